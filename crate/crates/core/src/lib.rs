//! Energy-aware scheduling of background training on battery-powered devices.
//!
//! A fleet of devices periodically runs local training rounds and pushes model
//! updates to a server. Running a round costs power; co-running it while the
//! user already has a foreground app active costs much less extra power than
//! running it on an otherwise idle device. The crate provides:
//!
//! * a power/queue model for per-slot scheduling decisions ([`power`], [`queue`]),
//! * momentum-gradient staleness estimation via linear weight prediction ([`gradient`]),
//! * a clairvoyant offline planner based on a 0/1 knapsack DP ([`offline`]),
//! * an online drift-plus-penalty controller with closed-form thresholds ([`online`]),
//! * a deterministic discrete-time simulator over a measured device/app
//!   power catalog ([`sim`], [`catalog`]),
//! * a toy multinomial-regression training task so gradient gaps, losses and
//!   accuracies are real numbers rather than stubs ([`task`]).
//!
//! Math-bearing types are generic over a [`scalar::Float`] scalar; the
//! simulator and everything above it run on `f64`. The aliases below fix the
//! common concrete choices.

pub mod catalog;
pub mod config;
pub mod error;
pub mod gradient;
pub mod metrics;
pub mod offline;
pub mod online;
pub mod power;
pub mod queue;
pub mod rng;
pub mod scalar;
pub mod sim;
pub mod task;
pub mod vecmath;

pub use error::{Error, Result};

/// Scalar type used by the simulator and CLI.
pub type Scalar = f64;

pub type DeviceProfile = power::DeviceProfile<Scalar>;
pub type QueueState = queue::QueueState<Scalar>;
pub type ModelState = gradient::ModelState<Scalar>;
pub type GapRecord = gradient::GapRecord<Scalar>;
pub type ControllerConfig = online::ControllerConfig<Scalar>;
pub type OfflineInstance = offline::OfflineInstance<Scalar>;
pub type OfflineSolution = offline::OfflineSolution<Scalar>;
pub type ToyTask = task::ToyTask<Scalar>;
pub type SlotConfig = config::SlotConfig<Scalar>;
pub type TrainerConfig = config::TrainerConfig<Scalar>;
pub type SimConfig = config::SimConfig<Scalar>;
pub type Policy = sim::Policy<Scalar>;
pub type SimOutput = sim::SimOutput<Scalar>;
pub type SlotMetrics = metrics::SlotMetrics<Scalar>;
pub type RunSummary = metrics::RunSummary<Scalar>;
