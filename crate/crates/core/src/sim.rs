//! Discrete-time fleet simulator.
//!
//! Each slot runs the same seven beats: rest timers and app arrivals resolve,
//! waiting devices decide, the slot's power is metered, finished rounds train
//! and merge, the server updates its queues from the slot's reports, apps tick
//! down, and a metrics row is emitted. Scheduling policies differ only in the
//! decision beat; everything else — arrival trace, task data, batch order —
//! is shared, so runs under different policies with the same seed see the
//! same world.
//!
//! Training is compressed: a device entering a round snapshots the global
//! model immediately and replays its local epoch at the round's last slot.
//! Nothing observable depends on when inside the round the arithmetic
//! happens, and the merge lands at the same slot either way.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::catalog::Catalog;
use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::gradient::{gap_dynamics, gradient_gap, GapRecord, ModelState};
use crate::metrics::{RunSummary, SlotMetrics};
use crate::offline::{rolling_offline, OfflineDevice, PlannedRound, WindowOutcome};
use crate::online::{
    decide, objective_term, server_step, ActionReport, ControllerConfig, DriftDiagnostics,
    TaskRegistry, VSweepPoint, VSweepReport,
};
use crate::power::{power_of, Action, AppStatus, Decision, DeviceProfile};
use crate::queue::QueueState;
use crate::rng::{stream_rng, Stream};
use crate::scalar::Float;
use crate::task::{async_merge, local_epoch, ToyTask};
use crate::vecmath::dist2;

/// Largest fleet the simulator accepts; merge tracking uses one bit per
/// device.
pub const MAX_DEVICES: usize = 64;

/// Number of warm-up global updates used to calibrate the idle gap
/// increment when the config leaves it unset.
const CALIBRATION_UPDATES: usize = 20;

/// How training rounds get placed.
#[derive(Debug, Clone, PartialEq)]
pub enum Policy<F> {
    /// Per-slot threshold decisions driven by the backlog and staleness
    /// queues; parameters come from the run's `SlotConfig`.
    Online,
    /// Train whenever free. The energy baseline.
    ImmediateScheduling,
    /// Clairvoyant window-by-window plan: a knapsack picks which devices
    /// delay their round to co-run with a foreseen app session.
    OfflineKnapsack {
        window: u32,
        staleness_bound: F,
        resolution: F,
    },
    /// Barrier rounds: everyone trains at once, the round lasts as long as
    /// the slowest device, and the results are averaged.
    SyncSgd,
}

impl<F> Policy<F> {
    pub fn label(&self) -> &'static str {
        match self {
            Policy::Online => "online",
            Policy::ImmediateScheduling => "immediate",
            Policy::OfflineKnapsack { .. } => "offline",
            Policy::SyncSgd => "sync",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Waiting,
    Training { ends_at: u32 },
    /// Sync only: local round done, result held until the barrier.
    Holding,
    Resting { until: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct ActiveApp {
    idx: usize,
    remaining: u32,
}

#[derive(Debug, Clone)]
struct DeviceSim<F> {
    /// One profile per schedulable app of this hardware type, catalog order.
    profiles: Vec<DeviceProfile<F>>,
    /// Measured session length in slots for each schedulable app.
    session_len: Vec<u32>,
    /// Round length in slots.
    duration: u32,
    phase: Phase,
    model: ModelState<F>,
    /// Current gradient-gap estimate; frozen while training.
    gap: F,
    app: Option<ActiveApp>,
    /// Foreign merges that landed since this device pulled the global model.
    merges_seen: u64,
    /// Consecutive deferrals since last round, for the starvation guard.
    waited: u32,
    batches: ChaCha8Rng,
}

impl<F: Float> DeviceSim<F> {
    /// Profile the device is currently drawing power against: the active
    /// app's, or the first schedulable one (its train/idle watts are
    /// app-independent, so the pick only matters while an app runs).
    fn profile(&self) -> &DeviceProfile<F> {
        match &self.app {
            Some(a) => &self.profiles[a.idx],
            None => &self.profiles[0],
        }
    }

    fn decision(&self) -> Decision {
        let action = match self.phase {
            Phase::Training { .. } => Action::Schedule,
            _ => Action::Idle,
        };
        let app = if self.app.is_some() {
            AppStatus::App
        } else {
            AppStatus::NoApp
        };
        Decision::new(action, app)
    }
}

/// Plain counters a run accumulates, for conservation checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunCounters {
    pub rounds_started: u32,
    pub rounds_completed: u32,
    pub in_flight_at_end: u32,
    /// Sum over slots of the waiting-device count (queue arrivals).
    pub arrivals_total: u64,
    /// Sum over slots of the training-device count (queue service).
    pub served_total: u64,
    /// Slots where the backlog update clamped at zero mid-service.
    pub q_clamps: u32,
    /// Slots where the staleness update clamped at zero.
    pub h_clamps: u32,
    pub global_updates: u32,
}

/// Everything a finished run hands back.
#[derive(Debug, Clone)]
pub struct SimOutput<F> {
    pub metrics: Vec<SlotMetrics<F>>,
    pub summary: RunSummary<F>,
    pub diagnostics: DriftDiagnostics<F>,
    /// One record per round start: the gap estimate and expected lag.
    pub schedules: Vec<GapRecord<F>>,
    /// One record per round completion: the same gap and the realized lag.
    pub completions: Vec<GapRecord<F>>,
    /// Offline policy only: the windows as planned.
    pub windows: Vec<WindowOutcome<F>>,
    pub counters: RunCounters,
    /// Idle gap increment actually used (configured or calibrated).
    pub gap_increment: F,
}

#[derive(Debug)]
pub struct SimState<F> {
    cfg: SimConfig<F>,
    policy: Policy<F>,
    slot: u32,
    devices: Vec<DeviceSim<F>>,
    task: ToyTask<F>,
    global: Vec<F>,
    queues: QueueState<F>,
    registry: TaskRegistry,
    ctrl: ControllerConfig<F>,
    /// Slot-major app arrival trace: `arrivals[slot * n + dev]` is the app
    /// index drawn for that device-slot, if an arrival fired.
    arrivals: Vec<Option<u8>>,
    /// Offline policy: per-device planned rounds, in start order.
    plan: Vec<Vec<PlannedRound>>,
    plan_next: Vec<usize>,
    windows: Vec<WindowOutcome<F>>,
    /// Sync policy: next round's start slot and current round's barrier.
    sync_next: u32,
    sync_barrier: u32,
    counters: RunCounters,
    schedules: Vec<GapRecord<F>>,
    completions: Vec<GapRecord<F>>,
    objective: Vec<F>,
    a_max: u32,
    b_max: u32,
    g_max: F,
    last_eval: (F, F),
    metrics: Vec<SlotMetrics<F>>,
}

impl<F: Float> SimState<F> {
    pub fn new(cfg: SimConfig<F>, policy: Policy<F>, seed: u64) -> Result<Self> {
        SimState::on_catalog(Catalog::builtin(), cfg, policy, seed)
    }

    /// Like [`SimState::new`] but drawing the fleet from `catalog` instead
    /// of the built-in table.
    pub fn on_catalog(
        catalog: &Catalog,
        cfg: SimConfig<F>,
        policy: Policy<F>,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.slots.n_users;
        if n > MAX_DEVICES {
            return Err(Error::TooManyUsers {
                max: MAX_DEVICES,
                got: n,
            });
        }
        let mut data_rng = stream_rng(seed, Stream::Data);
        let task = ToyTask::generate(n, cfg.trainer.cluster_scale, &mut data_rng)?;
        let devices = build_fleet(catalog, &cfg, task.param_dim(), seed)?;
        let global = vec![F::zero(); task.param_dim()];

        let increment = match cfg.slots.gap_increment {
            Some(eps) => eps,
            None => calibrate_increment(&cfg, &task, &devices, seed)?,
        };
        let ctrl = ControllerConfig::from_slots(&cfg.slots, increment)?;

        let counts: Vec<usize> = devices.iter().map(|d| d.profiles.len()).collect();
        let arrivals = arrival_trace(seed, cfg.slots.horizon, &counts, cfg.slots.arrival_prob);

        let (windows, plan) = match &policy {
            Policy::OfflineKnapsack {
                window,
                staleness_bound,
                resolution,
            } => build_plan(
                &devices,
                &arrivals,
                cfg.slots.horizon,
                *window,
                *staleness_bound,
                *resolution,
            )?,
            _ => (Vec::new(), vec![Vec::new(); n]),
        };

        Ok(SimState {
            cfg,
            policy,
            slot: 0,
            devices,
            task,
            global,
            queues: QueueState::default(),
            registry: TaskRegistry::new(),
            ctrl,
            arrivals,
            plan,
            plan_next: vec![0; n],
            windows,
            sync_next: 0,
            sync_barrier: 0,
            counters: RunCounters::default(),
            schedules: Vec::new(),
            completions: Vec::new(),
            objective: Vec::new(),
            a_max: 0,
            b_max: 0,
            g_max: F::zero(),
            last_eval: (F::zero(), F::zero()),
            metrics: Vec::new(),
        })
    }

    pub fn slot(&self) -> u32 {
        self.slot
    }

    pub fn step(&mut self) -> Result<()> {
        let start_queues = self.queues;
        self.begin_slot();
        let a_t = self.decide_all();
        let (energy, decisions, gaps, b_t) = self.record_slot();
        self.complete_rounds()?;
        self.settle_queues(&decisions, &gaps, a_t, b_t, start_queues);
        self.finish_slot(start_queues, energy, decisions, gaps)
    }

    /// Rest timers expire, sync rounds launch, and app sessions begin.
    fn begin_slot(&mut self) {
        for d in &mut self.devices {
            if let Phase::Resting { until } = d.phase {
                if self.slot >= until {
                    d.phase = Phase::Waiting;
                }
            }
        }

        if matches!(self.policy, Policy::SyncSgd) && self.slot == self.sync_next {
            let longest = self.devices.iter().map(|d| d.duration).max().unwrap_or(1);
            self.sync_barrier = self.slot + longest;
            self.sync_next = self.sync_barrier;
            for i in 0..self.devices.len() {
                let global = self.global.clone();
                let d = &mut self.devices[i];
                d.model.theta = global;
                d.phase = Phase::Training {
                    ends_at: self.slot + d.duration,
                };
                d.gap = gradient_gap(&d.model, 0);
                self.counters.rounds_started += 1;
                self.schedules.push(GapRecord {
                    device: i,
                    value: d.gap,
                    lag: 0,
                    slot: self.slot,
                });
            }
        }

        let n = self.devices.len();
        let base = self.slot as usize * n;
        for (i, d) in self.devices.iter_mut().enumerate() {
            if let Some(choice) = self.arrivals[base + i] {
                if d.app.is_none() {
                    d.app = Some(ActiveApp {
                        idx: choice as usize,
                        remaining: d.session_len[choice as usize].max(1),
                    });
                }
            }
        }
    }

    /// Phase-one decisions for waiting devices; returns the count left
    /// waiting (this slot's queue arrivals).
    fn decide_all(&mut self) -> u32 {
        let n = self.devices.len();
        for i in 0..n {
            if self.devices[i].phase != Phase::Waiting {
                continue;
            }
            match &self.policy {
                Policy::Online => {
                    let d = &self.devices[i];
                    let lag = self.registry.lag_estimate(self.slot, d.duration);
                    let starved = self
                        .cfg
                        .max_wait
                        .map(|m| d.waited >= m)
                        .unwrap_or(false);
                    let chosen = decide(
                        d.profile(),
                        d.app.is_some(),
                        self.queues,
                        &d.model,
                        lag,
                        d.gap,
                        &self.ctrl,
                    );
                    if starved || chosen.action == Action::Schedule {
                        self.start_round(i, lag, self.devices[i].app.is_some());
                    } else {
                        self.defer(i);
                    }
                }
                Policy::ImmediateScheduling => {
                    let lag = self.registry.lag_estimate(self.slot, self.devices[i].duration);
                    self.start_round(i, lag, false);
                }
                Policy::OfflineKnapsack { .. } => {
                    let due = self.plan[i]
                        .get(self.plan_next[i])
                        .filter(|r| r.start <= self.slot)
                        .copied();
                    if let Some(round) = due {
                        self.plan_next[i] += 1;
                        let lag = self.registry.lag_estimate(self.slot, self.devices[i].duration);
                        let align = round.co_run && self.devices[i].app.is_some();
                        self.start_round(i, lag, align);
                    } else {
                        self.defer(i);
                    }
                }
                Policy::SyncSgd => {}
            }
        }
        self.devices
            .iter()
            .filter(|d| d.phase == Phase::Waiting)
            .count() as u32
    }

    fn start_round(&mut self, i: usize, lag: u32, align_app: bool) {
        let global = self.global.clone();
        let ends_at = self.slot + self.devices[i].duration;
        let d = &mut self.devices[i];
        d.model.theta = global;
        d.gap = gradient_gap(&d.model, lag);
        d.phase = Phase::Training { ends_at };
        d.merges_seen = 0;
        d.waited = 0;
        if align_app {
            if let Some(app) = &mut d.app {
                app.remaining = d.duration;
            }
        }
        self.registry.register(i, ends_at);
        self.counters.rounds_started += 1;
        self.schedules.push(GapRecord {
            device: i,
            value: self.devices[i].gap,
            lag,
            slot: self.slot,
        });
    }

    fn defer(&mut self, i: usize) {
        let eps = self.ctrl.gap_increment;
        let d = &mut self.devices[i];
        d.gap = gap_dynamics(d.gap, Action::Idle, &d.model, 0, eps);
        d.waited += 1;
    }

    /// Meters the slot: energy, per-device decisions and gaps, service count.
    fn record_slot(&mut self) -> (F, Vec<Decision>, Vec<F>, u32) {
        let mut energy = F::zero();
        let mut decisions = Vec::with_capacity(self.devices.len());
        let mut gaps = Vec::with_capacity(self.devices.len());
        let mut b_t = 0u32;
        for d in &self.devices {
            let decision = d.decision();
            if decision.action == Action::Schedule {
                b_t += 1;
            }
            energy += power_of(d.profile(), decision, self.cfg.slots.slot_len);
            decisions.push(decision);
            gaps.push(d.gap);
        }
        (energy, decisions, gaps, b_t)
    }

    /// Runs the local epoch and merge for every round ending this slot.
    fn complete_rounds(&mut self) -> Result<()> {
        let n = self.devices.len();
        let sync = matches!(self.policy, Policy::SyncSgd);
        for i in 0..n {
            let ends_at = match self.devices[i].phase {
                Phase::Training { ends_at } if self.slot + 1 == ends_at => ends_at,
                _ => continue,
            };
            let start = self.devices[i].model.clone();
            let (_losses, trained) = local_epoch(
                &self.task,
                i,
                &start,
                self.cfg.trainer.batch_size,
                &mut self.devices[i].batches,
            )?;
            self.devices[i].model = trained;
            self.counters.rounds_completed += 1;

            if sync {
                self.devices[i].phase = Phase::Holding;
                self.completions.push(GapRecord {
                    device: i,
                    value: self.devices[i].gap,
                    lag: 0,
                    slot: self.slot,
                });
                continue;
            }

            let realized = self.devices[i].merges_seen.count_ones();
            self.completions.push(GapRecord {
                device: i,
                value: self.devices[i].gap,
                lag: realized,
                slot: self.slot,
            });
            self.global = async_merge(&self.global, &self.devices[i].model.theta)?;
            self.counters.global_updates += 1;
            for (j, other) in self.devices.iter_mut().enumerate() {
                if j != i && matches!(other.phase, Phase::Training { .. }) {
                    other.merges_seen |= 1 << i;
                }
            }
            self.registry.complete(i);
            self.devices[i].phase = if self.cfg.cooldown == 0 {
                Phase::Waiting
            } else {
                Phase::Resting {
                    until: ends_at + self.cfg.cooldown,
                }
            };
        }

        if sync && self.sync_barrier > 0 && self.slot + 1 == self.sync_barrier {
            let n_f = F::of(n);
            let dim = self.global.len();
            let mut mean = vec![F::zero(); dim];
            for d in &self.devices {
                for (m, t) in mean.iter_mut().zip(&d.model.theta) {
                    *m += *t / n_f;
                }
            }
            self.global = mean;
            self.counters.global_updates += 1;
            for d in &mut self.devices {
                d.phase = Phase::Waiting;
            }
        }
        Ok(())
    }

    /// Queue update from this slot's action reports, plus drift diagnostics.
    fn settle_queues(
        &mut self,
        decisions: &[Decision],
        gaps: &[F],
        a_t: u32,
        b_t: u32,
        start_queues: QueueState<F>,
    ) {
        let slot_objective = self
            .devices
            .iter()
            .zip(decisions)
            .zip(gaps)
            .map(|((d, dec), g)| objective_term(d.profile(), *dec, start_queues, *g, &self.ctrl))
            .sum();
        self.objective.push(slot_objective);

        let reports: Vec<ActionReport<F>> = decisions
            .iter()
            .zip(gaps)
            .enumerate()
            .map(|(i, (d, g))| ActionReport {
                device_id: i,
                action: d.action,
                gap: *g,
            })
            .collect();
        let g_sum: F = gaps.iter().copied().sum();
        if F::of(b_t) > self.queues.q {
            self.counters.q_clamps += 1;
        }
        if self.queues.h + g_sum < self.ctrl.staleness_bound {
            self.counters.h_clamps += 1;
        }
        self.queues = server_step(&reports, self.queues, a_t, &self.ctrl);

        self.counters.arrivals_total += a_t as u64;
        self.counters.served_total += b_t as u64;
        self.a_max = self.a_max.max(a_t);
        self.b_max = self.b_max.max(b_t);
        if g_sum > self.g_max {
            self.g_max = g_sum;
        }
    }

    /// App sessions tick down, the model is evaluated on schedule, and the
    /// slot's metrics row is pushed.
    fn finish_slot(
        &mut self,
        start_queues: QueueState<F>,
        energy: F,
        decisions: Vec<Decision>,
        gaps: Vec<F>,
    ) -> Result<()> {
        for d in &mut self.devices {
            if let Some(app) = &mut d.app {
                app.remaining -= 1;
                if app.remaining == 0 {
                    d.app = None;
                }
            }
        }
        if self.slot % self.cfg.eval_interval == 0 {
            self.last_eval = self.task.evaluate(&self.global)?;
        }
        self.metrics.push(SlotMetrics {
            slot: self.slot,
            total_energy_joules: energy,
            q_len: start_queues.q,
            h_len: start_queues.h,
            decisions,
            gaps,
            global_loss: self.last_eval.0,
            global_accuracy: self.last_eval.1,
        });
        self.slot += 1;
        Ok(())
    }

    pub fn into_output(mut self, seed: u64) -> SimOutput<F> {
        self.counters.in_flight_at_end = self
            .devices
            .iter()
            .filter(|d| matches!(d.phase, Phase::Training { .. }))
            .count() as u32;
        let summary = RunSummary::from_metrics(
            self.policy.label(),
            self.cfg.slots.v_param,
            self.cfg.slots.staleness_bound,
            self.cfg.slots.arrival_prob,
            seed,
            &self.metrics,
            self.counters.global_updates,
        );
        let diagnostics = DriftDiagnostics::from_maxima(
            F::of(self.a_max),
            F::of(self.b_max),
            self.g_max,
            self.cfg.slots.staleness_bound,
        )
        .with_objective(self.objective);
        SimOutput {
            metrics: self.metrics,
            summary,
            diagnostics,
            schedules: self.schedules,
            completions: self.completions,
            windows: self.windows,
            counters: self.counters,
            gap_increment: self.ctrl.gap_increment,
        }
    }
}

/// Simulates `cfg.slots.horizon` slots under `policy`.
pub fn run<F: Float>(cfg: &SimConfig<F>, policy: &Policy<F>, seed: u64) -> Result<SimOutput<F>> {
    run_on(Catalog::builtin(), cfg, policy, seed)
}

/// [`run`] against a caller-supplied device/app power table.
pub fn run_on<F: Float>(
    catalog: &Catalog,
    cfg: &SimConfig<F>,
    policy: &Policy<F>,
    seed: u64,
) -> Result<SimOutput<F>> {
    let mut state = SimState::on_catalog(catalog, cfg.clone(), policy.clone(), seed)?;
    while state.slot < cfg.slots.horizon {
        state.step()?;
    }
    Ok(state.into_output(seed))
}

/// Online runs across `vs`, reduced to the power/queue trade-off fit.
pub fn v_sweep<F: Float>(cfg: &SimConfig<F>, vs: &[F], seed: u64) -> Result<VSweepReport<F>> {
    let mut points = Vec::with_capacity(vs.len());
    for &v in vs {
        let mut c = cfg.clone();
        c.slots.v_param = v;
        let out = run(&c, &Policy::Online, seed)?;
        let horizon_s = F::of(c.slots.horizon) * c.slots.slot_len;
        points.push(VSweepPoint {
            v,
            mean_power: out.summary.mean_power(horizon_s),
            mean_queue: out.summary.mean_q + out.summary.mean_h,
        });
    }
    VSweepReport::build(points)
}

/// Every (rate, policy) combination's summary, rates outermost.
pub fn arrival_sweep<F: Float>(
    cfg: &SimConfig<F>,
    policies: &[Policy<F>],
    rates: &[F],
    seed: u64,
) -> Result<Vec<RunSummary<F>>> {
    let mut out = Vec::with_capacity(rates.len() * policies.len());
    for &rate in rates {
        for policy in policies {
            let mut c = cfg.clone();
            c.slots.arrival_prob = rate;
            out.push(run(&c, policy, seed)?.summary);
        }
    }
    Ok(out)
}

fn build_fleet<F: Float>(
    catalog: &Catalog,
    cfg: &SimConfig<F>,
    param_dim: usize,
    seed: u64,
) -> Result<Vec<DeviceSim<F>>> {
    let names = catalog.devices();
    let mut rng = stream_rng(seed, Stream::DeviceAssign);
    let mut fleet = Vec::with_capacity(cfg.slots.n_users);
    for _ in 0..cfg.slots.n_users {
        let name = names[rng.gen_range(0..names.len())];
        let rows = catalog.schedulable(name);
        if rows.is_empty() {
            return Err(Error::Config(format!(
                "device table: {name} has no app row with corun > app > train > idle"
            )));
        }
        let profiles: Vec<DeviceProfile<F>> = rows
            .iter()
            .map(|e| e.profile(cfg.slots.slot_len))
            .collect::<Result<_>>()?;
        let session_len: Vec<u32> = rows
            .iter()
            .map(|e| e.app_slots(cfg.slots.slot_len).max(1))
            .collect();
        let duration = profiles[0].train_duration;
        fleet.push(DeviceSim {
            profiles,
            session_len,
            duration,
            phase: Phase::Waiting,
            model: ModelState::zeros(param_dim, cfg.trainer.lr, cfg.trainer.beta)?,
            gap: F::zero(),
            app: None,
            merges_seen: 0,
            waited: 0,
            batches: stream_rng(seed, Stream::Batches(fleet.len() as u32)),
        });
    }
    Ok(fleet)
}

/// Slot-major Bernoulli arrival trace with a uniform app pick per hit. The
/// trace depends only on (seed, horizon, fleet), never on scheduling, so all
/// policies see identical app sessions.
fn arrival_trace<F: Float>(
    seed: u64,
    horizon: u32,
    app_counts: &[usize],
    arrival_prob: F,
) -> Vec<Option<u8>> {
    let p = arrival_prob.to_f64().unwrap_or(0.0);
    let n = app_counts.len();
    let mut rng = stream_rng(seed, Stream::Arrivals);
    let mut out = vec![None; horizon as usize * n];
    for t in 0..horizon as usize {
        for (i, &count) in app_counts.iter().enumerate() {
            if rng.gen_bool(p) {
                out[t * n + i] = Some(rng.gen_range(0..count) as u8);
            }
        }
    }
    out
}

/// Projects the arrival trace into app sessions and plans the whole horizon.
///
/// Planning sees each device's sessions at their measured lengths and prices
/// waiting with the devices' round-start models; execution then follows the
/// planned starts and meters whatever power states actually materialize.
fn build_plan<F: Float>(
    devices: &[DeviceSim<F>],
    arrivals: &[Option<u8>],
    horizon: u32,
    window: u32,
    staleness_bound: F,
    resolution: F,
) -> Result<(Vec<WindowOutcome<F>>, Vec<Vec<PlannedRound>>)> {
    let n = devices.len();
    let mut offline: Vec<OfflineDevice<F>> = Vec::with_capacity(n);
    for (i, d) in devices.iter().enumerate() {
        let mut apps = Vec::new();
        let mut busy_until = 0u32;
        for t in 0..horizon {
            if t < busy_until {
                continue;
            }
            if let Some(choice) = arrivals[t as usize * n + i] {
                let len = d.session_len[choice as usize].max(1);
                apps.push((t, len, d.profiles[choice as usize].saving()));
                busy_until = t + len;
            }
        }
        offline.push(OfflineDevice {
            duration: d.duration,
            model: d.model.clone(),
            apps,
        });
    }
    let windows = rolling_offline(&offline, horizon, window, staleness_bound, resolution)?;
    let mut plan = vec![Vec::new(); n];
    for w in &windows {
        for r in &w.rounds {
            plan[r.device].push(*r);
        }
    }
    Ok((windows, plan))
}

/// Warm-up estimate of how much one foreign update moves the global model,
/// amortized over a mean round length: `CALIBRATION_UPDATES` sequential
/// train-and-replace rounds on a scratch copy of the world.
fn calibrate_increment<F: Float>(
    cfg: &SimConfig<F>,
    task: &ToyTask<F>,
    devices: &[DeviceSim<F>],
    seed: u64,
) -> Result<F> {
    let n = devices.len();
    let mut rng = stream_rng(seed, Stream::Calibration);
    let mut global = vec![F::zero(); task.param_dim()];
    let mut models: Vec<ModelState<F>> = (0..n)
        .map(|_| ModelState::zeros(task.param_dim(), cfg.trainer.lr, cfg.trainer.beta))
        .collect::<Result<_>>()?;
    let mut moved = F::zero();
    for k in 0..CALIBRATION_UPDATES {
        let i = k % n;
        let mut start = models[i].clone();
        start.theta = global.clone();
        let (_losses, trained) = local_epoch(task, i, &start, cfg.trainer.batch_size, &mut rng)?;
        moved += dist2(&global, &trained.theta);
        global = trained.theta.clone();
        models[i] = trained;
    }
    let mean_step = moved / F::of(CALIBRATION_UPDATES);
    let mean_duration =
        devices.iter().map(|d| F::of(d.duration)).sum::<F>() / F::of(n.max(1));
    Ok(mean_step / mean_duration)
}
