//! Per-slot power model of one device.
//!
//! In a slot a device is either running a training round (`Schedule`) or not
//! (`Idle`), and the user's foreground app is either active or not. The four
//! combinations map to four measured battery power draws:
//!
//! | action    | app     | draw      |
//! |-----------|---------|-----------|
//! | Schedule  | App     | `p_corun` |
//! | Schedule  | NoApp   | `p_train` |
//! | Idle      | App     | `p_app`   |
//! | Idle      | NoApp   | `p_idle`  |
//!
//! Co-running costs `p_corun - p_app` extra over letting the app run alone,
//! which on every measured pair is far below the `p_train - p_idle` premium
//! of a dedicated background round. That difference is the entire reason the
//! schedulers in this crate prefer piggybacking onto app sessions.

use crate::error::{Error, Result};
use crate::scalar::Float;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Schedule,
    Idle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AppStatus {
    App,
    NoApp,
}

/// One device-slot state: what the scheduler chose and what the user was doing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Decision {
    pub action: Action,
    pub app: AppStatus,
}

impl Decision {
    pub const fn new(action: Action, app: AppStatus) -> Self {
        Decision { action, app }
    }

    /// Compact single-character code used in per-slot CSV dumps:
    /// `C` co-run, `B` background round, `A` app only, `I` idle.
    pub fn code(self) -> char {
        match (self.action, self.app) {
            (Action::Schedule, AppStatus::App) => 'C',
            (Action::Schedule, AppStatus::NoApp) => 'B',
            (Action::Idle, AppStatus::App) => 'A',
            (Action::Idle, AppStatus::NoApp) => 'I',
        }
    }
}

/// Measured power draws of one (device, app) pair plus the round length.
///
/// Construction checks `p_corun > p_app > p_train > p_idle > 0`; rows that
/// break the ordering are rejected so every profile in circulation satisfies
/// it. `train_duration` is the round length in whole slots, at least 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile<F> {
    pub id: String,
    pub p_corun: F,
    pub p_train: F,
    pub p_app: F,
    pub p_idle: F,
    pub train_duration: u32,
}

impl<F: Float> DeviceProfile<F> {
    pub fn new(
        id: impl Into<String>,
        p_corun: F,
        p_train: F,
        p_app: F,
        p_idle: F,
        train_duration: u32,
    ) -> Result<Self> {
        let id = id.into();
        let ordered = p_corun > p_app && p_app > p_train && p_train > p_idle && p_idle > F::zero();
        let finite =
            p_corun.is_finite() && p_app.is_finite() && p_train.is_finite() && p_idle.is_finite();
        if !ordered || !finite {
            let (device, app) = split_id(&id);
            return Err(Error::PowerOrdering {
                device,
                app,
                corun: p_corun.to_f64().unwrap_or(f64::NAN),
                app_w: p_app.to_f64().unwrap_or(f64::NAN),
                train: p_train.to_f64().unwrap_or(f64::NAN),
                idle: p_idle.to_f64().unwrap_or(f64::NAN),
            });
        }
        if train_duration == 0 {
            let (device, app) = split_id(&id);
            return Err(Error::ZeroDuration { device, app });
        }
        Ok(DeviceProfile {
            id,
            p_corun,
            p_train,
            p_app,
            p_idle,
            train_duration,
        })
    }

    /// Power draw in watts for a given slot state.
    pub fn draw(&self, decision: Decision) -> F {
        match (decision.action, decision.app) {
            (Action::Schedule, AppStatus::App) => self.p_corun,
            (Action::Schedule, AppStatus::NoApp) => self.p_train,
            (Action::Idle, AppStatus::App) => self.p_app,
            (Action::Idle, AppStatus::NoApp) => self.p_idle,
        }
    }

    /// [`energy_saving`] of this profile's own pair.
    pub fn saving(&self) -> F {
        energy_saving(self.p_train, self.p_app, self.p_corun)
    }
}

fn split_id(id: &str) -> (String, String) {
    match id.split_once('/') {
        Some((d, a)) => (d.to_string(), a.to_string()),
        None => (id.to_string(), String::new()),
    }
}

/// Energy in joules consumed by one device-slot: draw times slot length.
pub fn power_of<F: Float>(profile: &DeviceProfile<F>, decision: Decision, slot_len: F) -> F {
    profile.draw(decision) * slot_len
}

/// Queue service contributed by one device-slot: 1 while scheduled, else 0.
pub fn service_rate(decision: Decision) -> u32 {
    match decision.action {
        Action::Schedule => 1,
        Action::Idle => 0,
    }
}

/// Per-watt saving of co-running a round with the app instead of running
/// both separately: `p_train + p_app - p_corun`. Takes raw watts so it also
/// applies to table rows outside the strict draw ordering. Negative values
/// pass through untouched; the offline planner filters them itself.
pub fn energy_saving<F: Float>(p_train: F, p_app: F, p_corun: F) -> F {
    p_train + p_app - p_corun
}
