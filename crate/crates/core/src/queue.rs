//! Backlog and staleness queues driven by per-slot counts.
//!
//! `q` counts training work waiting for service; `h` is a virtual queue that
//! accumulates how far the summed gradient gap overshoots its per-slot budget.
//! Both evolve by the same max-plus recurrence, so both live in one state
//! struct and share the scalar type even though arrivals and services are
//! integer counts.

use crate::scalar::Float;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QueueState<F> {
    /// Backlog of devices waiting to run a training round.
    pub q: F,
    /// Accumulated excess of summed gradient gap over the staleness budget.
    pub h: F,
}

impl<F: Float> QueueState<F> {
    pub fn new(q: F, h: F) -> Self {
        QueueState { q, h }
    }

    pub fn total(&self) -> F {
        self.q + self.h
    }
}

/// One slot of queue evolution:
///
/// ```text
/// q' = max(q - served, 0) + arrivals
/// h' = max(h + gap_sum - staleness_bound, 0)
/// ```
///
/// All inputs are assumed non-negative; the recurrences then keep both
/// queues non-negative forever.
pub fn update_queues<F: Float>(
    state: QueueState<F>,
    arrivals: u32,
    served: u32,
    gap_sum: F,
    staleness_bound: F,
) -> QueueState<F> {
    let q = (state.q - F::of(served)).max(F::zero()) + F::of(arrivals);
    let h = (state.h + gap_sum - staleness_bound).max(F::zero());
    QueueState { q, h }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn step(q: f64, b: u32, a: u32) -> f64 {
        update_queues(QueueState::new(q, 0.0), a, b, 0.0, 0.0).q
    }

    #[test]
    fn backlog_accumulates_unserved_work() {
        assert_eq!(step(5.0, 2, 3), 6.0);
    }

    #[test]
    fn backlog_floors_at_zero() {
        assert_eq!(step(1.0, 4, 0), 0.0);
    }

    #[test]
    fn staleness_queue_stays_empty_under_budget() {
        let s = update_queues(QueueState::new(0.0, 0.0), 0, 0, 3.0, 5.0);
        assert_eq!(s.h, 0.0);
    }

    proptest! {
        #[test]
        fn queues_never_go_negative(
            steps in prop::collection::vec(
                (0u32..10, 0u32..10, 0.0f64..5.0, 0.0f64..5.0), 1..200)
        ) {
            let mut s = QueueState::new(0.0, 0.0);
            for (a, b, g, lb) in steps {
                s = update_queues(s, a, b, g, lb);
                prop_assert!(s.q >= 0.0 && s.h >= 0.0);
            }
        }

        #[test]
        fn update_is_monotone_in_arrivals_and_gap(
            q in 0.0f64..20.0, h in 0.0f64..20.0,
            a in 0u32..10, b in 0u32..10,
            g in 0.0f64..10.0, lb in 0.0f64..10.0,
        ) {
            let base = update_queues(QueueState::new(q, h), a, b, g, lb);
            let more_a = update_queues(QueueState::new(q, h), a + 1, b, g, lb);
            let more_g = update_queues(QueueState::new(q, h), a, b, g + 1.0, lb);
            let more_b = update_queues(QueueState::new(q, h), a, b + 1, g, lb);
            let more_lb = update_queues(QueueState::new(q, h), a, b, g, lb + 1.0);
            prop_assert!(more_a.q >= base.q);
            prop_assert!(more_g.h >= base.h);
            prop_assert!(more_b.q <= base.q);
            prop_assert!(more_lb.h <= base.h);
        }
    }
}
