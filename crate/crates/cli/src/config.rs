//! Flat TOML experiment configuration.
//!
//! Every key is optional; an empty file (or no file) is the default
//! experiment. Scalar keys mirror the simulator's defaults — the default
//! functions read them from [`SimConfig::default`] so the two can never
//! drift apart. The sweep axes are `None` unless set, in which case the
//! corresponding scalar supplies a single sweep point.

use std::path::PathBuf;

use anyhow::{bail, Context};
use fedsched_core::{Policy, SimConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    // Slot model and controller.
    #[serde(default = "d_slot_len")]
    pub slot_len: f64,
    #[serde(default = "d_horizon")]
    pub horizon: u32,
    #[serde(default = "d_n_users")]
    pub n_users: usize,
    #[serde(default = "d_arrival_prob")]
    pub arrival_prob: f64,
    /// Idle gap increment; left unset it is calibrated at run start.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_increment: Option<f64>,
    #[serde(default = "d_staleness_bound")]
    pub staleness_bound: f64,
    #[serde(default = "d_v_param")]
    pub v_param: f64,

    // Trainer.
    #[serde(default = "d_lr")]
    pub lr: f64,
    #[serde(default = "d_beta")]
    pub beta: f64,
    #[serde(default = "d_batch_size")]
    pub batch_size: usize,
    #[serde(default = "d_cluster_scale")]
    pub cluster_scale: f64,

    // Simulator knobs.
    #[serde(default = "d_cooldown")]
    pub cooldown: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_wait: Option<u32>,
    #[serde(default = "d_eval_interval")]
    pub eval_interval: u32,

    // Offline planner.
    #[serde(default = "d_offline_window")]
    pub offline_window: u32,
    #[serde(default = "d_offline_staleness_bound")]
    pub offline_staleness_bound: f64,
    #[serde(default = "d_offline_resolution")]
    pub offline_resolution: f64,

    // Experiment plumbing.
    #[serde(default = "d_policies")]
    pub policies: Vec<String>,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default = "d_out_dir")]
    pub out_dir: PathBuf,
    /// Alternate device/app power table; unset uses the built-in one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device_table: Option<PathBuf>,

    // Sweep axes; unset axes collapse to the matching scalar above.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lb_values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_values: Option<Vec<f64>>,
}

pub const POLICY_NAMES: [&str; 4] = ["online", "immediate", "offline", "sync"];

fn base() -> SimConfig {
    SimConfig::default()
}

fn d_slot_len() -> f64 {
    base().slots.slot_len
}
fn d_horizon() -> u32 {
    base().slots.horizon
}
fn d_n_users() -> usize {
    base().slots.n_users
}
fn d_arrival_prob() -> f64 {
    base().slots.arrival_prob
}
fn d_staleness_bound() -> f64 {
    base().slots.staleness_bound
}
fn d_v_param() -> f64 {
    base().slots.v_param
}
fn d_lr() -> f64 {
    base().trainer.lr
}
fn d_beta() -> f64 {
    base().trainer.beta
}
fn d_batch_size() -> usize {
    base().trainer.batch_size
}
fn d_cluster_scale() -> f64 {
    base().trainer.cluster_scale
}
fn d_cooldown() -> u32 {
    base().cooldown
}
fn d_eval_interval() -> u32 {
    base().eval_interval
}
fn d_offline_window() -> u32 {
    500
}
fn d_offline_staleness_bound() -> f64 {
    1000.0
}
fn d_offline_resolution() -> f64 {
    1.0
}
fn d_policies() -> Vec<String> {
    POLICY_NAMES.iter().map(|p| p.to_string()).collect()
}
fn d_seed() -> u64 {
    1
}
fn d_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config is the default experiment")
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn serialize(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// The simulator config this experiment starts from; sweeps override
    /// `v_param`, `staleness_bound` and `arrival_prob` per point.
    pub fn sim_config(&self) -> SimConfig {
        let mut cfg = SimConfig::default();
        cfg.slots.slot_len = self.slot_len;
        cfg.slots.horizon = self.horizon;
        cfg.slots.n_users = self.n_users;
        cfg.slots.arrival_prob = self.arrival_prob;
        cfg.slots.gap_increment = self.gap_increment;
        cfg.slots.staleness_bound = self.staleness_bound;
        cfg.slots.v_param = self.v_param;
        cfg.trainer.lr = self.lr;
        cfg.trainer.beta = self.beta;
        cfg.trainer.batch_size = self.batch_size;
        cfg.trainer.cluster_scale = self.cluster_scale;
        cfg.cooldown = self.cooldown;
        cfg.max_wait = self.max_wait;
        cfg.eval_interval = self.eval_interval;
        cfg
    }

    pub fn policy_named(&self, name: &str) -> anyhow::Result<Policy> {
        match name {
            "online" => Ok(Policy::Online),
            "immediate" => Ok(Policy::ImmediateScheduling),
            "offline" => Ok(Policy::OfflineKnapsack {
                window: self.offline_window,
                staleness_bound: self.offline_staleness_bound,
                resolution: self.offline_resolution,
            }),
            "sync" => Ok(Policy::SyncSgd),
            other => bail!(
                "policy `{other}` unknown (expected one of {})",
                POLICY_NAMES.join("|")
            ),
        }
    }

    /// One sweep axis: the configured list, or the scalar as a single point.
    fn axis(&self, values: &Option<Vec<f64>>, scalar: f64, key: &str) -> anyhow::Result<Vec<f64>> {
        match values {
            Some(v) if v.is_empty() => bail!("{key} must be non-empty when set"),
            Some(v) => Ok(v.clone()),
            None => Ok(vec![scalar]),
        }
    }

    pub fn v_axis(&self) -> anyhow::Result<Vec<f64>> {
        self.axis(&self.v_values, self.v_param, "v_values")
    }

    pub fn lb_axis(&self) -> anyhow::Result<Vec<f64>> {
        self.axis(&self.lb_values, self.staleness_bound, "lb_values")
    }

    pub fn rate_axis(&self) -> anyhow::Result<Vec<f64>> {
        self.axis(&self.rate_values, self.arrival_prob, "rate_values")
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.sim_config()
            .validate()
            .context("config invariant failed")?;
        if self.policies.is_empty() {
            bail!("policies must list at least one of {}", POLICY_NAMES.join("|"));
        }
        for p in &self.policies {
            self.policy_named(p)?;
        }
        if self.offline_window == 0 {
            bail!("offline_window out of [1, inf) (got 0)");
        }
        if !(self.offline_staleness_bound > 0.0) || !self.offline_staleness_bound.is_finite() {
            bail!(
                "offline_staleness_bound out of (0, inf) (got {})",
                self.offline_staleness_bound
            );
        }
        if !(self.offline_resolution > 0.0) || !self.offline_resolution.is_finite() {
            bail!(
                "offline_resolution out of (0, inf) (got {})",
                self.offline_resolution
            );
        }
        self.v_axis()?;
        self.lb_axis()?;
        self.rate_axis()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default_experiment() {
        let cfg = ExperimentConfig::parse("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.n_users, 25);
        assert_eq!(cfg.horizon, 10_800);
        assert_eq!(cfg.arrival_prob, 0.001);
        assert_eq!(cfg.v_param, 4000.0);
        assert_eq!(cfg.staleness_bound, 500.0);
        assert_eq!(cfg.policies, POLICY_NAMES);
        assert_eq!(cfg.seed, 1);
        assert!(cfg.gap_increment.is_none());
        assert!(cfg.v_values.is_none());
    }

    #[test]
    fn out_of_range_values_name_the_key() {
        let err = ExperimentConfig::parse("arrival_prob = 1.5").unwrap_err();
        assert!(
            format!("{err:#}").contains("arrival_prob out of [0,1]"),
            "{err:#}"
        );
    }

    #[test]
    fn unknown_keys_are_named() {
        let err = ExperimentConfig::parse("horzon = 500").unwrap_err();
        assert!(format!("{err:#}").contains("horzon"), "{err:#}");
    }

    #[test]
    fn config_round_trips_through_toml() {
        let mut cfg = ExperimentConfig::default();
        cfg.v_param = 250.0;
        cfg.gap_increment = Some(0.02);
        cfg.max_wait = Some(900);
        cfg.v_values = Some(vec![100.0, 1000.0]);
        cfg.policies = vec!["online".into(), "sync".into()];
        cfg.device_table = Some(PathBuf::from("other.csv"));
        let reparsed = ExperimentConfig::parse(&cfg.serialize()).unwrap();
        assert_eq!(reparsed, cfg);
    }

    #[test]
    fn policies_resolve_by_name() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.policy_named("online").unwrap(), Policy::Online);
        assert_eq!(
            cfg.policy_named("offline").unwrap(),
            Policy::OfflineKnapsack {
                window: 500,
                staleness_bound: 1000.0,
                resolution: 1.0
            }
        );
        let err = cfg.policy_named("bogus").unwrap_err();
        assert!(err.to_string().contains("online|immediate|offline|sync"));
    }

    #[test]
    fn empty_axes_are_rejected_but_unset_axes_collapse() {
        let cfg = ExperimentConfig::parse("v_values = [100.0, 200.0]").unwrap();
        assert_eq!(cfg.v_axis().unwrap(), vec![100.0, 200.0]);
        assert_eq!(cfg.lb_axis().unwrap(), vec![500.0]);
        assert_eq!(cfg.rate_axis().unwrap(), vec![0.001]);
        assert!(ExperimentConfig::parse("rate_values = []").is_err());
    }
}
