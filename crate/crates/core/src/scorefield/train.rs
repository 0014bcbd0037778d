//! Flow-matching regression of `v_theta(x_t, t)` onto `alpha' x + sigma' eps`
//! at a fixed `t`, with Adam, global-norm clipping and a held-out guard.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::model::{Architecture, Preconditioner, VectorFieldModel};
use super::ScoreSource;
use crate::error::{Error, Result};
use crate::sampling::{systematic_resample, FitnessPool};
use crate::schedule::Interpolant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossWeights {
    None,
    /// Use the pool's per-dimension debias weights when it has them.
    #[default]
    Debias,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
    /// Cosine decay of the learning rate to zero over `steps`.
    pub cosine_decay: bool,
    pub warm_start: bool,
    pub loss_weights: LossWeights,
    pub clip_norm: f64,
    /// Number of fitness-resampled training points; 0 means the pool size.
    pub train_size: usize,
    pub holdout_fraction: f64,
    /// Held-out evaluation period in steps; 0 evaluates only at the end.
    pub eval_every: usize,
    pub architecture: Architecture,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 1000,
            batch: 1024,
            lr: 5e-5,
            cosine_decay: false,
            warm_start: true,
            loss_weights: LossWeights::Debias,
            clip_norm: 10.0,
            train_size: 0,
            holdout_fraction: 0.1,
            eval_every: 100,
            architecture: Architecture::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch < 2 {
            return Err(Error::Config(format!("train.batch must be >= 2, got {}", self.batch)));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::Config(format!("train.lr must be positive, got {}", self.lr)));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::Config("train.clip_norm must be positive".into()));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(Error::Config("train.holdout_fraction must lie in (0,1)".into()));
        }
        self.architecture.validate()
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for k in 0..params.len() {
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * grad[k];
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * grad[k] * grad[k];
            params[k] -= lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + self.eps);
        }
    }
}

/// Scales `grad` in place so its Euclidean norm is at most `max_norm`;
/// returns the norm before clipping.
pub fn clip_global_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let f = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= f);
    }
    norm
}

/// One regression batch: noisy inputs, raw velocity targets, and
/// per-dimension loss weights.
#[derive(Debug, Clone)]
pub struct TrainBatch {
    pub x_t: Array2<f64>,
    pub t: f64,
    pub target: Array2<f64>,
    pub weights: Array2<f64>,
}

impl TrainBatch {
    /// Builds `x_t = alpha x + sigma eps` and `target = alpha' x + sigma' eps`.
    pub fn from_clean(interp: &dyn Interpolant, x: &Array2<f64>, eps: &Array2<f64>, t: f64, weights: Array2<f64>) -> Self {
        let (a, s, da, ds) = (interp.alpha(t), interp.sigma(t), interp.dalpha(t), interp.dsigma(t));
        Self {
            x_t: x * a + eps * s,
            t,
            target: x * da + eps * ds,
            weights,
        }
    }
}

/// Loss in preconditioned units:
/// `mean_rows mean_dims w (net - (target - offset) / scale)^2`.
pub fn batch_loss(model: &VectorFieldModel, batch: &TrainBatch) -> f64 {
    loss_impl(model, batch, false).0
}

pub fn batch_loss_and_grad(model: &VectorFieldModel, batch: &TrainBatch) -> (f64, Vec<f64>) {
    let (l, g) = loss_impl(model, batch, true);
    (l, g.expect("gradient requested"))
}

fn loss_impl(model: &VectorFieldModel, batch: &TrainBatch, with_grad: bool) -> (f64, Option<Vec<f64>>) {
    let feats = model.features(batch.x_t.view(), batch.t);
    let (net, tape) = model.mlp().forward_tape(feats.view());
    let (offset, scale) = model.output_affine(batch.t);
    let (rows, n) = net.dim();
    let norm = 1.0 / (rows * n) as f64;
    let mut loss = 0.0;
    let mut grad_out = Array2::zeros((rows, n));
    for i in 0..rows {
        for d in 0..n {
            let r = net[[i, d]] - (batch.target[[i, d]] - offset[d]) / scale[d];
            let w = batch.weights[[i, d]];
            loss += w * r * r;
            grad_out[[i, d]] = 2.0 * w * r * norm;
        }
    }
    loss *= norm;
    if !with_grad {
        return (loss, None);
    }
    (loss, Some(model.mlp().backward(&tape, grad_out)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub steps: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Step whose parameters were kept (0 = initialization).
    pub best_step: usize,
    pub last_train_loss: f64,
}

/// Fits the vector field at fixed `t` on points resampled from `pool` in
/// proportion to their transformed fitness.
///
/// The returned parameters are the best ones seen on a fixed held-out batch,
/// which includes the initialization, so `final_loss <= initial_loss`.
pub fn train_flow_matching<R: Rng + ?Sized>(
    pool: &FitnessPool,
    t: f64,
    cfg: &TrainConfig,
    init: Option<VectorFieldModel>,
    interp: std::sync::Arc<dyn Interpolant>,
    rng: &mut R,
) -> Result<(VectorFieldModel, TrainReport)> {
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::invalid(format!("training time must lie in (0,1], got {t}")));
    }
    cfg.validate()?;
    let n = pool.dim();
    let mut model = match init {
        Some(m) => {
            if m.dim() != n {
                return Err(Error::DimensionMismatch { expected: n, got: m.dim() });
            }
            m
        }
        None => VectorFieldModel::new(n, cfg.architecture.clone(), interp.clone(), rng)?,
    };
    if cfg.steps == 0 {
        return Ok((
            model,
            TrainReport {
                steps: 0,
                initial_loss: f64::NAN,
                final_loss: f64::NAN,
                best_step: 0,
                last_train_loss: f64::NAN,
            },
        ));
    }

    let size = if cfg.train_size == 0 { pool.len() } else { cfg.train_size }.max(2);
    let mut idx = systematic_resample(&pool.probs, size, rng)?;
    idx.shuffle(rng);
    let hold = ((size as f64 * cfg.holdout_fraction).round() as usize).clamp(1, size - 1);
    let (hold_idx, train_idx) = idx.split_at(hold);

    let gather = |rows: &[usize]| pool.points.select(Axis(0), rows);
    let gather_w = |rows: &[usize]| match (&pool.loss_weights, cfg.loss_weights) {
        (Some(w), LossWeights::Debias) => w.select(Axis(0), rows),
        _ => Array2::ones((rows.len(), n)),
    };
    let train_x = gather(train_idx);
    let train_w = gather_w(train_idx);
    model.set_preconditioner(Preconditioner::from_data(train_x.view()))?;

    let hold_eps = Array2::from_shape_fn((hold, n), |_| rng.sample(StandardNormal));
    let holdout = TrainBatch::from_clean(model.interpolant(), &gather(hold_idx), &hold_eps, t, gather_w(hold_idx));
    let initial_loss = batch_loss(&model, &holdout);
    if !initial_loss.is_finite() {
        return Err(Error::TrainingDiverged { step: 0, loss: initial_loss });
    }

    let mut best = (initial_loss, 0usize, model.params().to_vec());
    let mut adam = Adam::new(model.num_params());
    let mut last_train_loss = f64::NAN;
    let b = cfg.batch;
    for step in 1..=cfg.steps {
        let rows: Vec<usize> = (0..b).map(|_| rng.gen_range(0..train_x.nrows())).collect();
        let eps = Array2::from_shape_fn((b, n), |_| rng.sample(StandardNormal));
        let batch = TrainBatch::from_clean(model.interpolant(), &train_x.select(Axis(0), &rows), &eps, t, train_w.select(Axis(0), &rows));
        let (loss, mut grad) = batch_loss_and_grad(&model, &batch);
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::TrainingDiverged { step, loss });
        }
        last_train_loss = loss;
        clip_global_norm(&mut grad, cfg.clip_norm);
        let lr = if cfg.cosine_decay {
            cfg.lr * 0.5 * (1.0 + (std::f64::consts::PI * (step - 1) as f64 / cfg.steps as f64).cos())
        } else {
            cfg.lr
        };
        adam.step(model.params_mut(), &grad, lr);
        let evaluate = step == cfg.steps || (cfg.eval_every > 0 && step % cfg.eval_every == 0);
        if evaluate {
            let l = batch_loss(&model, &holdout);
            if !l.is_finite() {
                return Err(Error::TrainingDiverged { step, loss: l });
            }
            if l < best.0 {
                best = (l, step, model.params().to_vec());
            }
        }
    }
    model.params_mut().copy_from_slice(&best.2);
    Ok((
        model,
        TrainReport {
            steps: cfg.steps,
            initial_loss,
            final_loss: best.0,
            best_step: best.1,
            last_train_loss,
        },
    ))
}

/// Central-difference check (`h = 1e-4`) of the loss gradient on 200 random
/// parameters; returns the largest relative error.
pub fn parameter_gradient_check(model: &VectorFieldModel, batch: &TrainBatch) -> f64 {
    parameter_gradient_check_with(model, batch, |_| {})
}

/// As [`parameter_gradient_check`], with `mutate` applied to the analytic
/// gradient before comparison (negative controls).
pub fn parameter_gradient_check_with(model: &VectorFieldModel, batch: &TrainBatch, mutate: impl Fn(&mut [f64])) -> f64 {
    const H: f64 = 1e-4;
    const SAMPLES: usize = 200;
    /// Absolute floor of the relative-error denominator.
    const FLOOR: f64 = 1e-6;
    let (_, mut grad) = batch_loss_and_grad(model, batch);
    mutate(&mut grad);
    let mut probe = model.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6752_4144);
    let count = model.num_params();
    let picks: Vec<usize> = if count <= SAMPLES {
        (0..count).collect()
    } else {
        rand::seq::index::sample(&mut rng, count, SAMPLES).into_vec()
    };
    let mut worst = 0.0f64;
    for k in picks {
        let orig = probe.params()[k];
        probe.params_mut()[k] = orig + H;
        let lp = batch_loss(&probe, batch);
        probe.params_mut()[k] = orig - H;
        let lm = batch_loss(&probe, batch);
        probe.params_mut()[k] = orig;
        let fd = (lp - lm) / (2.0 * H);
        let rel = (fd - grad[k]).abs() / fd.abs().max(grad[k].abs()).max(FLOOR);
        worst = worst.max(rel);
    }
    worst
}
