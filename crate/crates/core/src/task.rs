//! Toy federated training task.
//!
//! Multinomial logistic regression over synthetic Gaussian clusters: 10
//! classes whose means sit on a scaled coordinate simplex in 16 dimensions,
//! unit covariance, 400 points per device plus a shared test set. The loss
//! is convex, one local pass costs microseconds, and the momentum vectors it
//! produces are real — which is all the schedulers need from a task.
//!
//! Parameters are a flat vector: 10 weight rows of 16 then 10 biases
//! (170 entries).

use crate::error::{Error, Result};
use crate::gradient::{momentum_step, ModelState};
use crate::scalar::Float;
use crate::vecmath::check_same_len;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const DIM: usize = 16;
pub const CLASSES: usize = 10;
pub const POINTS_PER_USER: usize = 400;
pub const TEST_POINTS: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoint<F> {
    pub x: Vec<F>,
    pub y: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyTask<F> {
    train: Vec<Vec<LabeledPoint<F>>>,
    test: Vec<LabeledPoint<F>>,
    dim: usize,
    n_classes: usize,
}

impl<F: Float> ToyTask<F> {
    /// Builds a task from explicit partitions. Every partition must be
    /// non-empty and every point must have `dim` features and a label below
    /// `n_classes`.
    pub fn new(
        train: Vec<Vec<LabeledPoint<F>>>,
        test: Vec<LabeledPoint<F>>,
        dim: usize,
        n_classes: usize,
    ) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Task("no user partitions".into()));
        }
        for (u, part) in train.iter().enumerate() {
            if part.is_empty() {
                return Err(Error::Task(format!("user {u} has an empty partition")));
            }
        }
        for p in train.iter().flatten().chain(&test) {
            if p.x.len() != dim {
                return Err(Error::Task(format!(
                    "point has {} features, expected {dim}",
                    p.x.len()
                )));
            }
            if p.y >= n_classes {
                return Err(Error::Task(format!("label {} out of range", p.y)));
            }
        }
        Ok(ToyTask {
            train,
            test,
            dim,
            n_classes,
        })
    }

    /// Standard instance: `n_users` balanced partitions of
    /// [`POINTS_PER_USER`] points each plus [`TEST_POINTS`] test points.
    /// Class `k`'s mean is `cluster_scale`·e_k; larger scales make the task
    /// easier. Deterministic given the generator state.
    pub fn generate(n_users: usize, cluster_scale: F, rng: &mut ChaCha8Rng) -> Result<Self> {
        if n_users == 0 {
            return Err(Error::Task("need at least one user".into()));
        }
        let mut sample = |count: usize| -> Vec<LabeledPoint<F>> {
            (0..count)
                .map(|i| {
                    let y = i % CLASSES;
                    let x = (0..DIM)
                        .map(|j| {
                            let noise: f64 = rng.sample(StandardNormal);
                            let mean = if j == y { cluster_scale } else { F::zero() };
                            mean + F::of(noise)
                        })
                        .collect();
                    LabeledPoint { x, y }
                })
                .collect()
        };
        let test = sample(TEST_POINTS);
        let train = (0..n_users).map(|_| sample(POINTS_PER_USER)).collect();
        ToyTask::new(train, test, DIM, CLASSES)
    }

    pub fn n_users(&self) -> usize {
        self.train.len()
    }

    pub fn partition(&self, user: usize) -> &[LabeledPoint<F>] {
        &self.train[user]
    }

    /// Flat parameter count: one weight row per class plus biases.
    pub fn param_dim(&self) -> usize {
        self.n_classes * (self.dim + 1)
    }

    fn logits(&self, theta: &[F], x: &[F]) -> Vec<F> {
        (0..self.n_classes)
            .map(|k| {
                let row = &theta[k * self.dim..(k + 1) * self.dim];
                let bias = theta[self.n_classes * self.dim + k];
                row.iter().zip(x).map(|(w, xi)| *w * *xi).sum::<F>() + bias
            })
            .collect()
    }

    /// Mean cross-entropy loss and its gradient over a batch of point
    /// indices into one user's partition.
    pub fn loss_and_grad(
        &self,
        theta: &[F],
        points: &[LabeledPoint<F>],
    ) -> Result<(F, Vec<F>)> {
        if points.is_empty() {
            return Err(Error::Task("empty batch".into()));
        }
        if theta.len() != self.param_dim() {
            return Err(Error::DimensionMismatch {
                left: theta.len(),
                right: self.param_dim(),
            });
        }
        let mut grad = vec![F::zero(); theta.len()];
        let mut loss = F::zero();
        let inv = F::one() / F::of(points.len());
        for p in points {
            let probs = softmax(&self.logits(theta, &p.x));
            loss -= probs[p.y].max(F::of(1e-300)).ln();
            for k in 0..self.n_classes {
                let delta = probs[k] - if k == p.y { F::one() } else { F::zero() };
                let row = &mut grad[k * self.dim..(k + 1) * self.dim];
                for (g, xi) in row.iter_mut().zip(&p.x) {
                    *g += inv * delta * *xi;
                }
                grad[self.n_classes * self.dim + k] += inv * delta;
            }
        }
        Ok((loss * inv, grad))
    }

    /// Test-set mean loss and top-1 accuracy.
    pub fn evaluate(&self, theta: &[F]) -> Result<(F, F)> {
        if theta.len() != self.param_dim() {
            return Err(Error::DimensionMismatch {
                left: theta.len(),
                right: self.param_dim(),
            });
        }
        let mut loss = F::zero();
        let mut hits = 0usize;
        for p in &self.test {
            let logits = self.logits(theta, &p.x);
            let probs = softmax(&logits);
            loss -= probs[p.y].max(F::of(1e-300)).ln();
            let argmax = (0..logits.len())
                .max_by(|a, b| logits[*a].partial_cmp(&logits[*b]).unwrap())
                .unwrap();
            if argmax == p.y {
                hits += 1;
            }
        }
        let n = F::of(self.test.len());
        Ok((loss / n, F::of(hits) / n))
    }
}

fn softmax<F: Float>(logits: &[F]) -> Vec<F> {
    let max = logits.iter().cloned().fold(F::neg_infinity(), F::max);
    let exps: Vec<F> = logits.iter().map(|z| (*z - max).exp()).collect();
    let total: F = exps.iter().cloned().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// One local training pass: shuffles the user's partition, walks it in
/// mini-batches of `batch_size`, and applies one momentum step per batch.
/// Returns the per-batch loss trace and the updated model. Deterministic
/// for a given generator state.
pub fn local_epoch<F: Float>(
    task: &ToyTask<F>,
    user: usize,
    start: &ModelState<F>,
    batch_size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<F>, ModelState<F>)> {
    if user >= task.n_users() {
        return Err(Error::Task(format!(
            "user {user} out of range (n={})",
            task.n_users()
        )));
    }
    if batch_size == 0 {
        return Err(Error::Task("batch_size must be at least 1".into()));
    }
    let part = task.partition(user);
    let mut order: Vec<usize> = (0..part.len()).collect();
    order.shuffle(rng);

    let mut state = start.clone();
    let mut trace = Vec::with_capacity(part.len() / batch_size + 1);
    for chunk in order.chunks(batch_size) {
        let batch: Vec<LabeledPoint<F>> = chunk.iter().map(|i| part[*i].clone()).collect();
        let (loss, grad) = task.loss_and_grad(&state.theta, &batch)?;
        state = momentum_step(&state, &grad)?;
        trace.push(loss);
    }
    Ok((trace, state))
}

/// Server-side merge of an arriving local model: the newest update wins
/// outright. Same-slot arrivals are applied in device-index order, so the
/// highest-index completion of a slot is the survivor.
pub fn async_merge<F: Float>(global: &[F], local: &[F]) -> Result<Vec<F>> {
    check_same_len(global, local)?;
    Ok(local.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};
    use approx::assert_relative_eq;

    fn small_task() -> ToyTask<f64> {
        let mut rng = stream_rng(11, Stream::Data);
        ToyTask::generate(3, 2.0, &mut rng).unwrap()
    }

    #[test]
    fn generated_shape() {
        let t = small_task();
        assert_eq!(t.n_users(), 3);
        assert_eq!(t.partition(0).len(), POINTS_PER_USER);
        assert_eq!(t.param_dim(), 170);
        let labels: Vec<usize> = t.partition(1).iter().map(|p| p.y).take(10).collect();
        assert_eq!(labels, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn generation_is_deterministic() {
        let mut r1 = stream_rng(5, Stream::Data);
        let mut r2 = stream_rng(5, Stream::Data);
        let a = ToyTask::<f64>::generate(2, 2.0, &mut r1).unwrap();
        let b = ToyTask::<f64>::generate(2, 2.0, &mut r2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_lr_epoch_is_a_no_op_on_theta() {
        let t = small_task();
        let start = ModelState::zeros(t.param_dim(), 0.0, 0.9).unwrap();
        let mut rng = stream_rng(1, Stream::Batches(0));
        let (trace, end) = local_epoch(&t, 0, &start, 20, &mut rng).unwrap();
        assert_eq!(trace.len(), 20);
        assert_eq!(end.theta, start.theta);
    }

    #[test]
    fn single_point_epoch_is_one_sgd_step() {
        let p = LabeledPoint {
            x: vec![1.0, -1.0],
            y: 0,
        };
        let t = ToyTask::new(vec![vec![p.clone()]], vec![], 2, 2).unwrap();
        let start = ModelState::zeros(t.param_dim(), 0.1, 0.0).unwrap();
        let mut rng = stream_rng(1, Stream::Batches(0));
        let (_, end) = local_epoch(&t, 0, &start, 8, &mut rng).unwrap();
        let (_, grad) = t.loss_and_grad(&start.theta, &[p]).unwrap();
        let expect = momentum_step(&start, &grad).unwrap();
        assert_eq!(end.theta, expect.theta);
    }

    #[test]
    fn epochs_are_deterministic() {
        let t = small_task();
        let start = ModelState::zeros(t.param_dim(), 0.01, 0.9).unwrap();
        let run = || {
            let mut rng = stream_rng(42, Stream::Batches(7));
            local_epoch(&t, 2, &start, 20, &mut rng).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn loss_drops_over_an_epoch() {
        let t = small_task();
        let start = ModelState::zeros(t.param_dim(), 0.05, 0.9).unwrap();
        let mut rng = stream_rng(3, Stream::Batches(1));
        let (trace, _) = local_epoch(&t, 1, &start, 20, &mut rng).unwrap();
        let head: f64 = trace[..10].iter().sum::<f64>() / 10.0;
        let tail: f64 = trace[10..].iter().sum::<f64>() / (trace.len() - 10) as f64;
        assert!(tail < head, "head {head} tail {tail}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let t = small_task();
        let mut theta = vec![0.0; t.param_dim()];
        for (i, v) in theta.iter_mut().enumerate() {
            *v = ((i * 37 % 11) as f64 - 5.0) * 0.01;
        }
        let batch: Vec<LabeledPoint<f64>> = t.partition(0)[..5].to_vec();
        let (_, grad) = t.loss_and_grad(&theta, &batch).unwrap();
        let h = 1e-6;
        for i in [0usize, 17, 159, 169] {
            let mut up = theta.clone();
            up[i] += h;
            let mut dn = theta.clone();
            dn[i] -= h;
            let (lu, _) = t.loss_and_grad(&up, &batch).unwrap();
            let (ld, _) = t.loss_and_grad(&dn, &batch).unwrap();
            assert_relative_eq!(grad[i], (lu - ld) / (2.0 * h), epsilon = 1e-5);
        }
    }

    #[test]
    fn merge_is_replacement_in_device_order() {
        let global = vec![0.0, 0.0];
        let m3 = vec![3.0, 3.0];
        let m7 = vec![7.0, 7.0];
        let after = async_merge(&async_merge(&global, &m3).unwrap(), &m7).unwrap();
        assert_eq!(after, m7);
        assert_eq!(async_merge(&global, &global).unwrap(), global);
        assert!(async_merge(&global, &[1.0]).is_err());
    }

    #[test]
    fn rejects_malformed_tasks() {
        assert!(ToyTask::<f64>::new(vec![], vec![], 2, 2).is_err());
        assert!(ToyTask::<f64>::new(vec![vec![]], vec![], 2, 2).is_err());
        let bad = LabeledPoint { x: vec![1.0], y: 5 };
        assert!(ToyTask::new(vec![vec![bad]], vec![], 1, 2).is_err());
    }
}
