//! Momentum state and gradient-gap staleness estimation.
//!
//! A device that trains from a stale snapshot ends up some distance from
//! where the global model will actually be once `lag` other updates land.
//! With momentum SGD that distance has a cheap closed form: assuming the
//! next `lag` steps keep replaying the current momentum EMA, the parameters
//! move by `lr * (1 - beta^lag) / (1 - beta) * v_t` (linear weight
//! prediction), so the expected parameter drift — the *gradient gap* — is
//! the norm of that vector. Devices use it to judge how much staleness a
//! training round would inject before deciding to run one.

use crate::error::{Error, Result};
use crate::power::Action;
use crate::scalar::Float;
use crate::vecmath::{check_same_len, norm2};

/// Parameters, momentum EMA, and the hyperparameters that move them.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState<F> {
    pub theta: Vec<F>,
    pub momentum: Vec<F>,
    pub lr: F,
    pub beta: F,
}

impl<F: Float> ModelState<F> {
    /// Checks dimensions, `lr ≥ 0`, and `0 ≤ beta < 1` (the prediction
    /// factor divides by `1 - beta`).
    pub fn new(theta: Vec<F>, momentum: Vec<F>, lr: F, beta: F) -> Result<Self> {
        check_same_len(&theta, &momentum)?;
        if !(lr >= F::zero()) || !lr.is_finite() {
            return Err(Error::Model(format!("lr must be finite and >= 0, got {lr}")));
        }
        if !(beta >= F::zero() && beta < F::one()) {
            return Err(Error::Model(format!("beta must be in [0,1), got {beta}")));
        }
        Ok(ModelState {
            theta,
            momentum,
            lr,
            beta,
        })
    }

    pub fn zeros(dim: usize, lr: F, beta: F) -> Result<Self> {
        ModelState::new(vec![F::zero(); dim], vec![F::zero(); dim], lr, beta)
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }
}

/// One gap estimate: which device computed it, against how many foreign
/// updates, and when.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapRecord<F> {
    pub device: usize,
    pub value: F,
    pub lag: u32,
    pub slot: u32,
}

/// One momentum-SGD update:
/// `v' = beta*v + (1-beta)*grad`, `theta' = theta - lr*v'`.
pub fn momentum_step<F: Float>(state: &ModelState<F>, gradient: &[F]) -> Result<ModelState<F>> {
    check_same_len(&state.theta, gradient)?;
    let fresh = F::one() - state.beta;
    let momentum: Vec<F> = state
        .momentum
        .iter()
        .zip(gradient)
        .map(|(v, g)| state.beta * *v + fresh * *g)
        .collect();
    let theta: Vec<F> = state
        .theta
        .iter()
        .zip(&momentum)
        .map(|(t, v)| *t - state.lr * *v)
        .collect();
    Ok(ModelState {
        theta,
        momentum,
        lr: state.lr,
        beta: state.beta,
    })
}

/// Geometric replay factor `(1 - beta^lag) / (1 - beta)`; 0 at lag 0,
/// approaching `1/(1-beta)` as lag grows.
fn replay_factor<F: Float>(beta: F, lag: u32) -> F {
    (F::one() - beta.powi(lag as i32)) / (F::one() - beta)
}

/// Linear weight prediction: where the parameters land after `lag` more
/// steps that keep replaying the current momentum.
pub fn predict_future_params<F: Float>(state: &ModelState<F>, lag: u32) -> Vec<F> {
    let c = state.lr * replay_factor(state.beta, lag);
    state
        .theta
        .iter()
        .zip(&state.momentum)
        .map(|(t, v)| *t - c * *v)
        .collect()
}

/// Predicted parameter drift over `lag` foreign updates:
/// `lr * (1 - beta^lag) / (1 - beta) * ‖v‖₂`, i.e. the norm of the
/// [`predict_future_params`] displacement.
pub fn gradient_gap<F: Float>(state: &ModelState<F>, lag: u32) -> F {
    state.lr * replay_factor(state.beta, lag) * norm2(&state.momentum)
}

/// Per-slot gap evolution: a scheduled device re-estimates from its model
/// and expected lag; an idle device's estimate creeps up by `increment`.
pub fn gap_dynamics<F: Float>(
    prev_gap: F,
    action: Action,
    state: &ModelState<F>,
    lag_if_scheduled: u32,
    increment: F,
) -> F {
    match action {
        Action::Schedule => gradient_gap(state, lag_if_scheduled),
        Action::Idle => prev_gap + increment,
    }
}
