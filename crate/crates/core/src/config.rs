//! Run-wide parameter sets.
//!
//! [`SlotConfig`] is everything the queues and controllers need; defaults
//! match the evaluation setup these components were tuned on (25 devices,
//! 1 s slots, 3 h horizon, V = 4000, L_b = 500). [`TrainerConfig`] holds the
//! toy trainer's hyperparameters, and [`SimConfig`] bundles both with the
//! knobs that only the simulator reads.

use crate::error::{Error, Result};
use crate::scalar::Float;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotConfig<F> {
    /// Slot length in seconds (t_d).
    pub slot_len: F,
    /// Total slots simulated.
    pub horizon: u32,
    /// Number of devices.
    pub n_users: usize,
    /// Per-slot Bernoulli probability that a device starts an app session.
    pub arrival_prob: F,
    /// Gradient-gap units a device's estimate grows by per idle slot (ε).
    /// `None` lets the simulator calibrate it from a short training warmup.
    pub gap_increment: Option<F>,
    /// Per-slot budget on the summed gradient gap (L_b).
    pub staleness_bound: F,
    /// Energy weight in the drift-plus-penalty objective (V).
    pub v_param: F,
}

impl<F: Float> Default for SlotConfig<F> {
    fn default() -> Self {
        SlotConfig {
            slot_len: F::one(),
            horizon: 10_800,
            n_users: 25,
            arrival_prob: F::of(0.001),
            gap_increment: None,
            staleness_bound: F::of(500),
            v_param: F::of(4000),
        }
    }
}

impl<F: Float> SlotConfig<F> {
    pub fn validate(&self) -> Result<()> {
        let got = |x: F| x.to_f64().unwrap_or(f64::NAN);
        if !(self.slot_len > F::zero()) || !self.slot_len.is_finite() {
            return Err(Error::ConfigRange {
                key: "slot_len",
                expected: "(0, inf)",
                got: got(self.slot_len),
            });
        }
        if !(self.arrival_prob >= F::zero() && self.arrival_prob <= F::one()) {
            return Err(Error::ConfigRange {
                key: "arrival_prob",
                expected: "[0,1]",
                got: got(self.arrival_prob),
            });
        }
        if let Some(eps) = self.gap_increment {
            if !(eps >= F::zero()) || !eps.is_finite() {
                return Err(Error::ConfigRange {
                    key: "gap_increment",
                    expected: "[0, inf)",
                    got: got(eps),
                });
            }
        }
        if !(self.staleness_bound > F::zero()) || !self.staleness_bound.is_finite() {
            return Err(Error::ConfigRange {
                key: "staleness_bound",
                expected: "(0, inf)",
                got: got(self.staleness_bound),
            });
        }
        if !(self.v_param >= F::zero()) || !self.v_param.is_finite() {
            return Err(Error::ConfigRange {
                key: "v_param",
                expected: "[0, inf)",
                got: got(self.v_param),
            });
        }
        if self.n_users == 0 {
            return Err(Error::ConfigRange {
                key: "n_users",
                expected: "[1, inf)",
                got: 0.0,
            });
        }
        Ok(())
    }
}

/// Hyperparameters of the local momentum-SGD epochs and of the synthetic
/// classification task they run on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig<F> {
    pub lr: F,
    pub beta: F,
    pub batch_size: usize,
    /// Distance of each class mean from the origin; smaller is harder.
    pub cluster_scale: F,
}

impl<F: Float> Default for TrainerConfig<F> {
    fn default() -> Self {
        TrainerConfig {
            lr: F::of(0.01),
            beta: F::of(0.9),
            batch_size: 20,
            cluster_scale: F::of(2.0),
        }
    }
}

impl<F: Float> TrainerConfig<F> {
    pub fn validate(&self) -> Result<()> {
        let got = |x: F| x.to_f64().unwrap_or(f64::NAN);
        if !(self.lr >= F::zero()) || !self.lr.is_finite() {
            return Err(Error::ConfigRange {
                key: "lr",
                expected: "[0, inf)",
                got: got(self.lr),
            });
        }
        if !(self.beta >= F::zero() && self.beta < F::one()) {
            return Err(Error::ConfigRange {
                key: "beta",
                expected: "[0,1)",
                got: got(self.beta),
            });
        }
        if self.batch_size == 0 {
            return Err(Error::ConfigRange {
                key: "batch_size",
                expected: "[1, inf)",
                got: 0.0,
            });
        }
        if !(self.cluster_scale > F::zero()) || !self.cluster_scale.is_finite() {
            return Err(Error::ConfigRange {
                key: "cluster_scale",
                expected: "(0, inf)",
                got: got(self.cluster_scale),
            });
        }
        Ok(())
    }
}

/// Full simulator parameterization: slot/queue settings, trainer settings,
/// and scheduling knobs only the simulator interprets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig<F> {
    pub slots: SlotConfig<F>,
    pub trainer: TrainerConfig<F>,
    /// Slots a device rests after finishing a round before it re-enters the
    /// waiting pool.
    pub cooldown: u32,
    /// Force a round after this many consecutive deferrals. Off by default;
    /// useful only for starvation-prone corner configs.
    pub max_wait: Option<u32>,
    /// Evaluate global-model loss/accuracy every this many slots.
    pub eval_interval: u32,
}

impl<F: Float> Default for SimConfig<F> {
    fn default() -> Self {
        SimConfig {
            slots: SlotConfig::default(),
            trainer: TrainerConfig::default(),
            cooldown: 0,
            max_wait: None,
            eval_interval: 60,
        }
    }
}

impl<F: Float> SimConfig<F> {
    pub fn validate(&self) -> Result<()> {
        self.slots.validate()?;
        self.trainer.validate()?;
        if self.eval_interval == 0 {
            return Err(Error::ConfigRange {
                key: "eval_interval",
                expected: "[1, inf)",
                got: 0.0,
            });
        }
        Ok(())
    }
}
