//! Release-gate acceptance suite.
//!
//! One test per shipping criterion. Each prints a single
//! `criterion NN: PASS/FAIL — detail` line (visible with `--nocapture`) and
//! asserts the same condition, so the suite is green exactly when every
//! criterion holds. Simulation runs are cached and shared across tests; the
//! cache lock also serializes them, so timings stay honest.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use fedsched_core::gradient::{gap_dynamics, gradient_gap, predict_future_params};
use fedsched_core::metrics::summary_csv;
use fedsched_core::offline::{brute_force_offline, knapsack_dp, lag_upper_bound, OfflineUser};
use fedsched_core::online::{decide, threshold_decide};
use fedsched_core::power::Action;
use fedsched_core::sim;
use fedsched_core::{
    ControllerConfig, DeviceProfile, ModelState, OfflineInstance, Policy, QueueState, SimConfig,
    SimOutput,
};

const SEEDS: [u64; 3] = [1, 2, 3];
const V_GRID: [f64; 5] = [1e2, 1e3, 4e3, 1e4, 1e5];
const DEFAULT_V: f64 = 4000.0;
const DEFAULT_RATE: f64 = 0.001;

fn gate(criterion: u32, ok: bool, detail: &str) {
    println!(
        "criterion {criterion:02}: {} — {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {criterion:02}: {detail}");
}

fn config(v: f64, rate: f64) -> SimConfig {
    let mut cfg = SimConfig::default();
    cfg.slots.v_param = v;
    cfg.slots.arrival_prob = rate;
    cfg
}

fn offline_policy() -> Policy {
    Policy::OfflineKnapsack {
        window: 500,
        staleness_bound: 1000.0,
        resolution: 1.0,
    }
}

type CacheKey = (&'static str, u64, u64, u64);

/// Runs are deterministic per (config, policy, seed), so every test reads
/// from one shared pool. Computing inside the lock serializes the sims.
fn cached(policy: &Policy, v: f64, rate: f64, seed: u64) -> Arc<SimOutput> {
    static CACHE: OnceLock<Mutex<HashMap<CacheKey, Arc<SimOutput>>>> = OnceLock::new();
    let map = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut pool = map.lock().unwrap();
    let key = (policy.label(), v.to_bits(), rate.to_bits(), seed);
    if let Some(out) = pool.get(&key) {
        return Arc::clone(out);
    }
    let started = Instant::now();
    let out = Arc::new(sim::run(&config(v, rate), policy, seed).expect("simulation run"));
    record_run_secs(started.elapsed().as_secs_f64());
    pool.insert(key, Arc::clone(&out));
    out
}

fn run_secs_cell() -> &'static Mutex<f64> {
    static MAX: OnceLock<Mutex<f64>> = OnceLock::new();
    MAX.get_or_init(|| Mutex::new(0.0))
}

fn record_run_secs(secs: f64) {
    let mut max = run_secs_cell().lock().unwrap();
    if secs > *max {
        *max = secs;
    }
}

fn max_run_secs() -> f64 {
    *run_secs_cell().lock().unwrap()
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut n) = (0.0, 0u32);
    for x in xs {
        sum += x;
        n += 1;
    }
    sum / n as f64
}

/// Seed-averaged total energy for a policy at the given config point.
fn mean_energy(policy: &Policy, v: f64, rate: f64) -> f64 {
    mean(
        SEEDS
            .iter()
            .map(|&s| cached(policy, v, rate, s).summary.total_energy_j),
    )
}

#[test]
fn criterion_01_knapsack_matches_oracle() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC01);
    let (mut exact, mut bracketed, mut bad) = (0u32, 0u32, 0u32);

    for case in 0..500 {
        let n = rng.gen_range(1..=15usize);
        let integer_cells = case % 2 == 0;
        let resolution = if integer_cells { 1.0 } else { 0.1 };
        let mut users = Vec::with_capacity(n);
        for _ in 0..n {
            let begin = rng.gen_range(0..200u32);
            let app_start = begin + rng.gen_range(0..100u32);
            let duration = rng.gen_range(1..60u32);
            let saving = rng.gen_range(0.05..3.0);
            let model = if integer_cells {
                // lr=1, beta=0 makes the waiting gap exactly the integer
                // momentum magnitude (or 0 at lag bound 0): integer cells.
                ModelState::new(vec![0.0], vec![rng.gen_range(0..6) as f64], 1.0, 0.0).unwrap()
            } else {
                let dim = rng.gen_range(1..5usize);
                let theta = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let momentum = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
                ModelState::new(
                    theta,
                    momentum,
                    rng.gen_range(0.001..0.1),
                    rng.gen_range(0.0..0.95),
                )
                .unwrap()
            };
            users.push(OfflineUser {
                begin,
                app_start,
                duration,
                saving,
                model,
            });
        }
        let bound = rng.gen_range(0.0..12.0);
        let instance = OfflineInstance::new(users.clone(), bound).unwrap();
        let dp = knapsack_dp(&instance, resolution).unwrap();
        let oracle = brute_force_offline(&instance).unwrap();

        if integer_cells {
            if (dp.total_saving - oracle.total_saving).abs() > 1e-9 {
                bad += 1;
            } else {
                exact += 1;
            }
        } else {
            // Ceil weights waste at most one cell per user, so the honest
            // band is oracle(bound − n·res) ≤ dp ≤ oracle(bound).
            let slack = (bound - n as f64 * resolution).max(0.0);
            let reduced = OfflineInstance::new(users, slack).unwrap();
            let floor = brute_force_offline(&reduced).unwrap();
            let inside = dp.total_saving <= oracle.total_saving + 1e-9
                && dp.total_saving >= floor.total_saving - 1e-9;
            if inside {
                bracketed += 1;
            } else {
                bad += 1;
            }
        }
    }

    let secs = started.elapsed().as_secs_f64();
    gate(
        1,
        bad == 0 && secs < 10.0,
        &format!(
            "{exact} integer-cell instances exact, {bracketed} real-valued within one cell \
             per user, {bad} outside, {secs:.2} s (< 10 s)"
        ),
    );
}

#[test]
fn criterion_02_gap_identity_and_bounds() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC02);
    let (mut bad_identity, mut bad_monotone, mut bad_cap) = (0u32, 0u32, 0u32);

    for _ in 0..10_000 {
        let dim = rng.gen_range(1..=8usize);
        let theta: Vec<f64> = (0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let momentum: Vec<f64> = (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let lr = rng.gen_range(0.0..0.5);
        let beta = rng.gen_range(0.0..0.999);
        let lag = rng.gen_range(0..500u32);
        let state = ModelState::new(theta.clone(), momentum.clone(), lr, beta).unwrap();

        let gap = gradient_gap(&state, lag);
        let future = predict_future_params(&state, lag);
        let dist = theta
            .iter()
            .zip(&future)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let identity_ok = if dist == 0.0 {
            gap == 0.0
        } else {
            (gap - dist).abs() / dist <= 1e-12
        };
        if !identity_ok {
            bad_identity += 1;
        }
        if gradient_gap(&state, lag + 1) < gap {
            bad_monotone += 1;
        }
        let norm = momentum.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gap > lr * norm / (1.0 - beta) * (1.0 + 1e-12) {
            bad_cap += 1;
        }
    }

    let secs = started.elapsed().as_secs_f64();
    gate(
        2,
        bad_identity == 0 && bad_monotone == 0 && bad_cap == 0 && secs < 1.0,
        &format!(
            "10000 cases: {bad_identity} identity misses (1e-12 rel), {bad_monotone} \
             monotonicity misses, {bad_cap} cap misses, {secs:.2} s (< 1 s)"
        ),
    );
}

#[test]
fn criterion_03_threshold_equals_argmin() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC03);
    let models: Vec<ModelState> = (0..64)
        .map(|_| {
            let dim = rng.gen_range(1..6usize);
            let theta = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let momentum = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
            ModelState::new(
                theta,
                momentum,
                rng.gen_range(0.0..0.2),
                rng.gen_range(0.0..0.99),
            )
            .unwrap()
        })
        .collect();

    let mut mismatches = 0u32;
    let mut first = String::new();
    for i in 0..1_000_000u32 {
        let p_idle = rng.gen_range(0.05..3.0);
        let p_train = p_idle + rng.gen_range(0.01..4.0);
        let p_app = p_train + rng.gen_range(0.01..3.0);
        let p_corun = p_app + rng.gen_range(0.01..4.0);
        let device = DeviceProfile::new("fuzz/app", p_corun, p_train, p_app, p_idle, 1).unwrap();

        let app_active = rng.gen_bool(0.5);
        let v = if i % 13 == 0 {
            0.0
        } else {
            rng.gen_range(0.0..20_000.0)
        };
        let slot_len = [0.5, 1.0, 2.0][rng.gen_range(0..3usize)];
        let cfg = ControllerConfig {
            v_param: v,
            staleness_bound: 500.0,
            gap_increment: rng.gen_range(0.0..0.01),
            slot_len,
        };
        let h = if rng.gen_bool(0.5) {
            0.0
        } else {
            rng.gen_range(0.0..200.0)
        };
        let premium = if app_active {
            p_corun - p_app
        } else {
            p_train - p_idle
        };
        // Every fifth state sits exactly on the backlog threshold, the spot
        // where the tie rule must agree between the two formulations.
        let q = if i % 5 == 0 && h == 0.0 {
            v * slot_len * premium
        } else if rng.gen_bool(0.3) {
            0.0
        } else {
            rng.gen_range(0.0..30_000.0)
        };
        let queues = QueueState::new(q, h);

        let model = &models[rng.gen_range(0..models.len())];
        let lag = rng.gen_range(0..50u32);
        let prev_gap = rng.gen_range(0.0..2.0);

        let by_argmin = decide(&device, app_active, queues, model, lag, prev_gap, &cfg);
        let gap_s = gap_dynamics(prev_gap, Action::Schedule, model, lag, cfg.gap_increment);
        let gap_i = gap_dynamics(prev_gap, Action::Idle, model, 0, cfg.gap_increment);
        let by_threshold = threshold_decide(&device, app_active, queues, gap_s, gap_i, &cfg);

        if by_argmin != by_threshold {
            mismatches += 1;
            if first.is_empty() {
                first = format!(
                    " (first: q={q} h={h} v={v} premium={premium} app={app_active} \
                     argmin={by_argmin:?} threshold={by_threshold:?})"
                );
            }
        }
    }

    gate(
        3,
        mismatches == 0,
        &format!("1000000 fuzzed states, {mismatches} mismatches{first}"),
    );
}

#[test]
fn criterion_04_zero_backlog_idles() {
    let out = cached(&Policy::Online, DEFAULT_V, DEFAULT_RATE, SEEDS[0]);
    let mut zero_backlog_slots = 0u32;
    let mut scheduled = 0u32;
    for row in &out.metrics {
        if row.q_len == 0.0 && row.h_len == 0.0 {
            zero_backlog_slots += 1;
            if row.decisions.iter().any(|d| d.action == Action::Schedule) {
                scheduled += 1;
            }
        }
    }
    gate(
        4,
        zero_backlog_slots > 0 && scheduled == 0,
        &format!(
            "{zero_backlog_slots} zero-backlog slots in the default run, \
             {scheduled} scheduled a round (want 0)"
        ),
    );
}

#[test]
fn criterion_05_energy_falls_with_v_toward_offline() {
    let means: Vec<f64> = V_GRID
        .iter()
        .map(|&v| mean_energy(&Policy::Online, v, DEFAULT_RATE))
        .collect();
    let monotone = means.windows(2).all(|w| w[1] <= w[0] * 1.02);

    let offline = mean_energy(&offline_policy(), DEFAULT_V, DEFAULT_RATE);
    let immediate = mean_energy(&Policy::ImmediateScheduling, DEFAULT_V, DEFAULT_RATE);
    let at_top = *means.last().unwrap();
    let bracketed = offline <= at_top && at_top <= immediate;

    let secs = max_run_secs();
    gate(
        5,
        monotone && bracketed && secs < 60.0,
        &format!(
            "mean energy over V {means:.0?} J (non-increasing within 2%: {monotone}), \
             V=1e5 point {at_top:.0} J vs offline {offline:.0} / immediate {immediate:.0} \
             (bracketed: {bracketed}), slowest run {secs:.1} s (< 60 s)"
        ),
    );
}

#[test]
fn criterion_06_queue_grows_linearly_in_v() {
    let vs = [1e4, 3e4, 1e5];
    let points: Vec<(f64, f64)> = vs
        .iter()
        .map(|&v| {
            let backlog = mean(SEEDS.iter().map(|&s| {
                let out = cached(&Policy::Online, v, DEFAULT_RATE, s);
                out.summary.mean_q + out.summary.mean_h
            }));
            (v.ln(), backlog.ln())
        })
        .collect();

    let xbar = mean(points.iter().map(|p| p.0));
    let ybar = mean(points.iter().map(|p| p.1));
    let num: f64 = points.iter().map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let den: f64 = points.iter().map(|(x, _)| (x - xbar) * (x - xbar)).sum();
    let slope = num / den;

    gate(
        6,
        (0.8..=1.2).contains(&slope),
        &format!("log-log slope of mean(Q+H) vs V = {slope:.3} (want within [0.8, 1.2])"),
    );
}

#[test]
fn criterion_07_headline_savings() {
    let online = mean_energy(&Policy::Online, DEFAULT_V, DEFAULT_RATE);
    let immediate = mean_energy(&Policy::ImmediateScheduling, DEFAULT_V, DEFAULT_RATE);
    let sync = mean_energy(&Policy::SyncSgd, DEFAULT_V, DEFAULT_RATE);
    let offline = mean_energy(&offline_policy(), DEFAULT_V, DEFAULT_RATE);

    let saved_immediate = 1.0 - online / immediate;
    let saved_sync = 1.0 - online / sync;
    let factor = online / offline;

    gate(
        7,
        saved_immediate >= 0.40 && saved_sync >= 0.40 && factor <= 1.5,
        &format!(
            "saved {:.1}% vs immediate and {:.1}% vs sync (want ≥ 40%), {factor:.3}× \
             offline (want ≤ 1.5×); reference points 66%, 63%, 1.14×",
            100.0 * saved_immediate,
            100.0 * saved_sync
        ),
    );
}

#[test]
fn criterion_08_lag_bound_is_sound() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC08);
    let mut checked = 0u64;
    let mut violations = 0u64;

    for _ in 0..1000 {
        let n = rng.gen_range(2..=12usize);
        let mut users = Vec::with_capacity(n);
        for _ in 0..n {
            let begin = rng.gen_range(0..300u32);
            users.push(OfflineUser {
                begin,
                app_start: begin + rng.gen_range(0..150u32),
                duration: rng.gen_range(1..80u32),
                saving: rng.gen_range(0.0..2.0),
                model: ModelState::zeros(1, 0.01, 0.9).unwrap(),
            });
        }
        let instance = OfflineInstance::new(users, 100.0).unwrap();
        let users = instance.users();

        // Random execution: each user independently trains right away or
        // waits for its app, then lag counts the foreign pushes landing
        // inside its own pull-to-push span.
        let waits: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        let start: Vec<u32> = users
            .iter()
            .zip(&waits)
            .map(|(u, w)| if *w { u.app_start } else { u.begin })
            .collect();
        let finish: Vec<u32> = users
            .iter()
            .zip(&start)
            .map(|(u, s)| s + u.duration)
            .collect();

        for i in 0..n {
            let realized = (0..n)
                .filter(|&j| j != i && finish[j] >= start[i] && finish[j] <= finish[i])
                .count() as u32;
            checked += 1;
            if realized > lag_upper_bound(&instance, i) {
                violations += 1;
            }
        }
    }

    gate(
        8,
        violations == 0,
        &format!("{checked} user-lags across 1000 replayed instances, {violations} above bound"),
    );
}

#[test]
fn criterion_09_degrades_gracefully_with_arrivals() {
    let busy_online = mean_energy(&Policy::Online, DEFAULT_V, 0.2);
    let busy_immediate = mean_energy(&Policy::ImmediateScheduling, DEFAULT_V, 0.2);
    let busy_gap = (busy_online - busy_immediate).abs() / busy_immediate;

    let quiet_online = mean_energy(&Policy::Online, DEFAULT_V, 1e-4);
    let quiet_immediate = mean_energy(&Policy::ImmediateScheduling, DEFAULT_V, 1e-4);
    let quiet_ratio = quiet_online / quiet_immediate;

    gate(
        9,
        busy_gap <= 0.10 && quiet_ratio <= 0.70,
        &format!(
            "rate 0.2: online within {:.1}% of immediate (want ≤ 10%); rate 1e-4: \
             online at {:.1}% of immediate (want ≤ 70%)",
            100.0 * busy_gap,
            100.0 * quiet_ratio
        ),
    );
}

#[test]
fn criterion_10_runs_are_deterministic() {
    let cfg = config(DEFAULT_V, DEFAULT_RATE);
    let first = sim::run(&cfg, &Policy::Online, 7).unwrap();
    let second = sim::run(&cfg, &Policy::Online, 7).unwrap();
    let csv_first = summary_csv(std::slice::from_ref(&first.summary));
    let csv_second = summary_csv(std::slice::from_ref(&second.summary));
    gate(
        10,
        csv_first == csv_second,
        &format!(
            "two runs at (default config, seed 7): summary CSVs byte-identical: {}",
            csv_first == csv_second
        ),
    );
}

#[test]
fn criterion_11_convergence_sanity() {
    let mut worst_gap = 0.0f64;
    let mut sync_always_fewer = true;
    let mut detail = String::new();

    for &seed in &SEEDS {
        let online = cached(&Policy::Online, DEFAULT_V, DEFAULT_RATE, seed);
        let immediate = cached(&Policy::ImmediateScheduling, DEFAULT_V, DEFAULT_RATE, seed);
        let offline = cached(&offline_policy(), DEFAULT_V, DEFAULT_RATE, seed);
        let sync = cached(&Policy::SyncSgd, DEFAULT_V, DEFAULT_RATE, seed);

        let gap = (online.summary.final_acc - immediate.summary.final_acc).abs();
        worst_gap = worst_gap.max(gap);

        let sync_updates = sync.counters.global_updates;
        for out in [&online, &immediate, &offline] {
            if sync_updates >= out.counters.global_updates {
                sync_always_fewer = false;
            }
        }
        if seed == SEEDS[0] {
            detail = format!(
                "final acc online {:.3} vs immediate {:.3}; global updates sync {} vs \
                 online {} / immediate {} / offline {}",
                online.summary.final_acc,
                immediate.summary.final_acc,
                sync_updates,
                online.counters.global_updates,
                immediate.counters.global_updates,
                offline.counters.global_updates,
            );
        }
    }

    gate(
        11,
        worst_gap <= 0.03 && sync_always_fewer,
        &format!("{detail}; worst accuracy gap across seeds {worst_gap:.3} (want ≤ 0.03)"),
    );
}
