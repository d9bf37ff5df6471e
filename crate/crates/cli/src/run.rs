//! Experiment execution: expands a config into (point, policy, seed) jobs,
//! runs them on a worker pool, writes the summary CSV (plus optional
//! per-slot CSVs) and prints the headline comparisons.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{bail, Context};
use fedsched_core::catalog::Catalog;
use fedsched_core::metrics::{slot_csv, summary_csv_header, summary_csv_row};
use fedsched_core::{Policy, RunSummary};

use crate::config::ExperimentConfig;

pub struct Options {
    pub seed: Option<u64>,
    pub repeat: u32,
    pub out: Option<PathBuf>,
    pub per_slot: bool,
    pub policy: Option<String>,
}

/// `run` simulates the configured scalars as one point; `sweep` expands the
/// V × staleness × arrival-rate grid.
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Point,
    Grid,
}

#[derive(Clone)]
struct Job {
    label: String,
    policy: Policy,
    v: f64,
    lb: f64,
    rate: f64,
    seed: u64,
}

pub fn execute(cfg: &ExperimentConfig, mode: Mode, opts: &Options) -> anyhow::Result<()> {
    if opts.repeat == 0 {
        bail!("--repeat must be at least 1");
    }
    let labels: Vec<String> = match &opts.policy {
        Some(one) => {
            cfg.policy_named(one)?;
            vec![one.clone()]
        }
        None => cfg.policies.clone(),
    };
    let points: Vec<(f64, f64, f64)> = match mode {
        Mode::Point => vec![(cfg.v_param, cfg.staleness_bound, cfg.arrival_prob)],
        Mode::Grid => {
            let mut grid = Vec::new();
            for &v in &cfg.v_axis()? {
                for &lb in &cfg.lb_axis()? {
                    for &rate in &cfg.rate_axis()? {
                        grid.push((v, lb, rate));
                    }
                }
            }
            grid
        }
    };
    let base_seed = opts.seed.unwrap_or(cfg.seed);
    let seeds: Vec<u64> = (0..opts.repeat as u64).map(|k| base_seed + k).collect();

    let mut jobs = Vec::new();
    for &(v, lb, rate) in &points {
        for label in &labels {
            for &seed in &seeds {
                jobs.push(Job {
                    label: label.clone(),
                    policy: cfg.policy_named(label)?,
                    v,
                    lb,
                    rate,
                    seed,
                });
            }
        }
    }

    let loaded;
    let catalog: &Catalog = match &cfg.device_table {
        Some(path) => {
            loaded = Catalog::from_path(path)
                .with_context(|| format!("device table {}", path.display()))?;
            &loaded
        }
        None => Catalog::builtin(),
    };

    let out_dir = opts.out.as_ref().unwrap_or(&cfg.out_dir).clone();
    prepare_out_dir(&out_dir)?;

    let summaries = run_pool(cfg, catalog, &jobs, opts.per_slot, &out_dir)?;

    let mut csv = String::from(summary_csv_header());
    csv.push('\n');
    for (group, rows) in summaries.chunks(seeds.len()).enumerate() {
        for s in rows {
            csv.push_str(&summary_csv_row(s));
            csv.push('\n');
        }
        if rows.len() > 1 {
            let job = &jobs[group * seeds.len()];
            csv.push_str(&aggregate_row(job, rows, Stat::Mean));
            csv.push('\n');
            csv.push_str(&aggregate_row(job, rows, Stat::Stddev));
            csv.push('\n');
        }
    }
    let summary_path = out_dir.join("summary.csv");
    fs::write(&summary_path, &csv)
        .with_context(|| format!("writing {}", summary_path.display()))?;

    for line in headlines(&points, &labels, &seeds, &jobs, &summaries) {
        println!("{line}");
    }
    let plural = |n: usize| if n == 1 { "" } else { "s" };
    println!(
        "wrote {} ({} run{} across {} point{})",
        summary_path.display(),
        jobs.len(),
        plural(jobs.len()),
        points.len(),
        plural(points.len())
    );
    Ok(())
}

fn prepare_out_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let probe = dir.join(".write-probe");
    fs::write(&probe, b"ok")
        .with_context(|| format!("output directory {} not writable", dir.display()))?;
    fs::remove_file(&probe).ok();
    Ok(())
}

fn run_pool(
    cfg: &ExperimentConfig,
    catalog: &Catalog,
    jobs: &[Job],
    per_slot: bool,
    out_dir: &Path,
) -> anyhow::Result<Vec<RunSummary>> {
    let results: Vec<Mutex<Option<anyhow::Result<RunSummary>>>> =
        jobs.iter().map(|_| Mutex::new(None)).collect();
    let cursor = AtomicUsize::new(0);
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(jobs.len())
        .max(1);

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = cursor.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                *results[i].lock().unwrap() = Some(run_job(cfg, catalog, &jobs[i], per_slot, out_dir));
            });
        }
    });

    let mut out = Vec::with_capacity(jobs.len());
    for (job, cell) in jobs.iter().zip(results) {
        let r = cell.into_inner().unwrap().expect("worker covered every job");
        out.push(r.with_context(|| {
            format!(
                "{} run at v={} l_b={} rate={} seed={}",
                job.label, job.v, job.lb, job.rate, job.seed
            )
        })?);
    }
    Ok(out)
}

fn run_job(
    cfg: &ExperimentConfig,
    catalog: &Catalog,
    job: &Job,
    per_slot: bool,
    out_dir: &Path,
) -> anyhow::Result<RunSummary> {
    let mut sim_cfg = cfg.sim_config();
    sim_cfg.slots.v_param = job.v;
    sim_cfg.slots.staleness_bound = job.lb;
    sim_cfg.slots.arrival_prob = job.rate;
    let out = fedsched_core::sim::run_on(catalog, &sim_cfg, &job.policy, job.seed)?;
    if per_slot {
        let name = format!(
            "slots_{}_v{}_lb{}_rate{}_seed{}.csv",
            job.label, job.v, job.lb, job.rate, job.seed
        );
        let path = out_dir.join(name);
        fs::write(&path, slot_csv(sim_cfg.slots.n_users, &out.metrics))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(out.summary)
}

enum Stat {
    Mean,
    Stddev,
}

/// Aggregate CSV row over one (point, policy) group of seed rows: same 15
/// columns, `mean`/`stddev` in the seed cell, time-to-accuracy cells empty.
fn aggregate_row(job: &Job, rows: &[RunSummary], stat: Stat) -> String {
    let reduce = |pick: fn(&RunSummary) -> f64| -> f64 {
        let xs: Vec<f64> = rows.iter().map(pick).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        match stat {
            Stat::Mean => mean,
            Stat::Stddev => {
                let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
                (ss / (xs.len() - 1) as f64).sqrt()
            }
        }
    };
    format!(
        "{},{},{},{},{},{},{},{},{},,,,,{},{}",
        job.label,
        job.v,
        job.lb,
        job.rate,
        match stat {
            Stat::Mean => "mean",
            Stat::Stddev => "stddev",
        },
        reduce(|s| s.total_energy_j),
        reduce(|s| s.mean_q),
        reduce(|s| s.mean_h),
        reduce(|s| s.final_acc),
        reduce(|s| s.final_loss),
        reduce(|s| s.global_updates as f64),
    )
}

/// Per point: seed-averaged energy comparisons against each baseline that
/// actually ran.
fn headlines(
    points: &[(f64, f64, f64)],
    labels: &[String],
    seeds: &[u64],
    jobs: &[Job],
    summaries: &[RunSummary],
) -> Vec<String> {
    let mut lines = Vec::new();
    let runs_per_point = labels.len() * seeds.len();
    for (p, &(v, lb, rate)) in points.iter().enumerate() {
        let slice = &summaries[p * runs_per_point..(p + 1) * runs_per_point];
        let jobs_slice = &jobs[p * runs_per_point..(p + 1) * runs_per_point];
        let energy_of = |label: &str| -> Option<f64> {
            let xs: Vec<f64> = jobs_slice
                .iter()
                .zip(slice)
                .filter(|(j, _)| j.label == label)
                .map(|(_, s)| s.total_energy_j)
                .collect();
            (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
        };
        let online = match energy_of("online") {
            Some(e) => e,
            None => continue,
        };
        let prefix = if points.len() > 1 {
            format!("[v={v} l_b={lb} rate={rate}] ")
        } else {
            String::new()
        };
        if let Some(imm) = energy_of("immediate") {
            lines.push(format!(
                "{prefix}online vs immediate: {:.1}% energy saved",
                100.0 * (1.0 - online / imm)
            ));
        }
        if let Some(sync) = energy_of("sync") {
            lines.push(format!(
                "{prefix}online vs sync: {:.1}% energy saved",
                100.0 * (1.0 - online / sync)
            ));
        }
        if let Some(off) = energy_of("offline") {
            lines.push(format!(
                "{prefix}online vs offline: {:.3}x the clairvoyant plan's energy",
                online / off
            ));
        }
    }
    lines
}
