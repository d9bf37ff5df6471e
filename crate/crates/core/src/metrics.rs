//! Per-slot metrics, run summaries, and their CSV forms.
//!
//! Float columns are written with Rust's shortest round-trip formatting, so
//! equal runs produce byte-identical files.

use crate::power::Decision;
use crate::scalar::Float;

/// Test-accuracy levels whose first-reach times the summary records.
pub const ACCURACY_MARKS: [f64; 4] = [0.40, 0.45, 0.50, 0.55];

/// One slot of a run. `global_loss`/`global_accuracy` hold the latest
/// evaluation (they change only on evaluation slots and carry forward in
/// between).
#[derive(Debug, Clone, PartialEq)]
pub struct SlotMetrics<F> {
    pub slot: u32,
    pub total_energy_joules: F,
    /// Backlog queue at the start of the slot — what the decisions saw.
    pub q_len: F,
    /// Staleness queue at the start of the slot.
    pub h_len: F,
    pub decisions: Vec<Decision>,
    pub gaps: Vec<F>,
    pub global_loss: F,
    pub global_accuracy: F,
}

/// Whole-run roll-up, one CSV row per (policy, sweep point, seed).
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary<F> {
    pub policy: String,
    pub v_param: F,
    pub staleness_bound: F,
    pub arrival_prob: F,
    pub seed: u64,
    pub total_energy_j: F,
    pub mean_q: F,
    pub mean_h: F,
    pub final_acc: F,
    /// First slot at which test accuracy reached each of
    /// [`ACCURACY_MARKS`]; empty when never reached.
    pub t_acc: [Option<u32>; 4],
    pub final_loss: F,
    /// Times the global model changed (async merges, or sync rounds).
    pub global_updates: u32,
}

impl<F: Float> RunSummary<F> {
    pub fn from_metrics(
        policy: impl Into<String>,
        v_param: F,
        staleness_bound: F,
        arrival_prob: F,
        seed: u64,
        metrics: &[SlotMetrics<F>],
        global_updates: u32,
    ) -> Self {
        let n = metrics.len();
        let total_energy_j = metrics.iter().map(|m| m.total_energy_joules).sum();
        let mean = |f: fn(&SlotMetrics<F>) -> F| -> F {
            if n == 0 {
                F::zero()
            } else {
                metrics.iter().map(f).sum::<F>() / F::of(n)
            }
        };
        let mut t_acc = [None; 4];
        for (k, mark) in ACCURACY_MARKS.iter().enumerate() {
            t_acc[k] = metrics
                .iter()
                .find(|m| m.global_accuracy >= F::of(*mark))
                .map(|m| m.slot);
        }
        let last = metrics.last();
        RunSummary {
            policy: policy.into(),
            v_param,
            staleness_bound,
            arrival_prob,
            seed,
            total_energy_j,
            mean_q: mean(|m| m.q_len),
            mean_h: mean(|m| m.h_len),
            final_acc: last.map_or(F::zero(), |m| m.global_accuracy),
            t_acc,
            final_loss: last.map_or(F::zero(), |m| m.global_loss),
            global_updates,
        }
    }

    /// Mean power draw of the whole fleet in watts.
    pub fn mean_power(&self, horizon_seconds: F) -> F {
        if horizon_seconds == F::zero() {
            F::zero()
        } else {
            self.total_energy_j / horizon_seconds
        }
    }
}

pub fn summary_csv_header() -> &'static str {
    "policy,v,l_b,rate,seed,total_energy_j,mean_q,mean_h,final_acc,\
     t_acc_40,t_acc_45,t_acc_50,t_acc_55,final_loss,global_updates"
}

pub fn summary_csv_row<F: Float>(s: &RunSummary<F>) -> String {
    let mark = |m: Option<u32>| m.map(|v| v.to_string()).unwrap_or_default();
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        s.policy,
        s.v_param,
        s.staleness_bound,
        s.arrival_prob,
        s.seed,
        s.total_energy_j,
        s.mean_q,
        s.mean_h,
        s.final_acc,
        mark(s.t_acc[0]),
        mark(s.t_acc[1]),
        mark(s.t_acc[2]),
        mark(s.t_acc[3]),
        s.final_loss,
        s.global_updates,
    )
}

pub fn summary_csv<F: Float>(rows: &[RunSummary<F>]) -> String {
    let mut out = String::from(summary_csv_header());
    out.push('\n');
    for r in rows {
        out.push_str(&summary_csv_row(r));
        out.push('\n');
    }
    out
}

/// Per-slot CSV: fixed columns, then one decision-code column and one gap
/// column per device (see [`Decision::code`] for the letter scheme).
pub fn slot_csv_header(n_devices: usize) -> String {
    let mut out = String::from("slot,total_energy_j,q,h,loss,accuracy");
    for i in 0..n_devices {
        out.push_str(&format!(",d{i}"));
    }
    for i in 0..n_devices {
        out.push_str(&format!(",gap{i}"));
    }
    out
}

pub fn slot_csv_row<F: Float>(m: &SlotMetrics<F>) -> String {
    let mut out = format!(
        "{},{},{},{},{},{}",
        m.slot, m.total_energy_joules, m.q_len, m.h_len, m.global_loss, m.global_accuracy
    );
    for d in &m.decisions {
        out.push(',');
        out.push(d.code());
    }
    for g in &m.gaps {
        out.push_str(&format!(",{g}"));
    }
    out
}

pub fn slot_csv<F: Float>(n_devices: usize, rows: &[SlotMetrics<F>]) -> String {
    let mut out = slot_csv_header(n_devices);
    out.push('\n');
    for r in rows {
        out.push_str(&slot_csv_row(r));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::power::{Action, AppStatus};

    fn row(slot: u32, energy: f64, acc: f64) -> SlotMetrics<f64> {
        SlotMetrics {
            slot,
            total_energy_joules: energy,
            q_len: slot as f64,
            h_len: 0.5,
            decisions: vec![
                Decision::new(Action::Schedule, AppStatus::App),
                Decision::new(Action::Idle, AppStatus::NoApp),
            ],
            gaps: vec![0.25, 0.5],
            global_loss: 2.0,
            global_accuracy: acc,
        }
    }

    #[test]
    fn summary_aggregates() {
        let rows = vec![row(0, 10.0, 0.1), row(1, 20.0, 0.42), row(2, 30.0, 0.56)];
        let s = RunSummary::from_metrics("online", 4000.0, 500.0, 0.001, 7, &rows, 3);
        assert_eq!(s.total_energy_j, 60.0);
        assert_eq!(s.mean_q, 1.0);
        assert_eq!(s.mean_h, 0.5);
        assert_eq!(s.final_acc, 0.56);
        assert_eq!(s.t_acc, [Some(1), Some(2), Some(2), Some(2)]);
        assert_eq!(s.global_updates, 3);
    }

    #[test]
    fn empty_run_summarizes_to_zero() {
        let s = RunSummary::<f64>::from_metrics("online", 0.0, 1.0, 0.0, 0, &[], 0);
        assert_eq!(s.total_energy_j, 0.0);
        assert_eq!(s.final_acc, 0.0);
        assert_eq!(s.t_acc, [None; 4]);
    }

    #[test]
    fn csv_shapes() {
        let rows = vec![row(0, 10.0, 0.1)];
        let csv = slot_csv(2, &rows);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "slot,total_energy_j,q,h,loss,accuracy,d0,d1,gap0,gap1"
        );
        assert_eq!(lines.next().unwrap(), "0,10,0,0.5,2,0.1,C,I,0.25,0.5");

        let s = RunSummary::from_metrics("online", 4000.0, 500.0, 0.001, 7, &rows, 1);
        let csv = summary_csv(&[s]);
        let mut lines = csv.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("policy,v,l_b,rate,seed"));
        assert_eq!(header.split(',').count(), 15);
        let data = lines.next().unwrap();
        assert_eq!(data.split(',').count(), 15);
        assert!(data.starts_with("online,4000,500,0.001,7,10,"));
        // unreached accuracy marks stay empty
        assert!(data.contains(",,,"));
    }
}
