//! Minibatch gradient descent on binary cross-entropy via
//! backpropagation through time. Single-threaded and deterministic:
//! a fixed seed fixes the init and the shuffle order, so two runs
//! produce byte-identical parameters.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lstm::{lstm_backward, LstmGrads, LstmParams};
use super::{ImuWindow, FRAME_FEATURES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub hidden: usize,
    pub init_scale: f64,
    /// Cap on the global gradient norm per batch.
    pub grad_clip: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.2,
            epochs: 25,
            batch_size: 8,
            seed: 0,
            hidden: 32,
            init_scale: 0.08,
            grad_clip: 5.0,
        }
    }
}

/// Mean training loss per epoch, plus any anomalies observed.
#[derive(Debug, Clone, PartialEq)]
pub struct LossCurve {
    pub per_epoch: Vec<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: LstmParams,
    pub curve: LossCurve,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {what}")]
    BadConfig { what: String },
    #[error("dataset is empty")]
    Empty,
    #[error("window {index} is unlabeled")]
    Unlabeled { index: usize },
    #[error("dataset contains a single class; training needs both labels")]
    SingleClass,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
}

fn validate_config(cfg: &TrainConfig) -> Result<(), TrainError> {
    let bad = |what: &str| Err(TrainError::BadConfig { what: what.into() });
    if !(cfg.lr.is_finite() && cfg.lr > 0.0) {
        return bad("lr must be > 0");
    }
    if cfg.epochs == 0 || cfg.batch_size == 0 || cfg.hidden == 0 {
        return bad("epochs, batch_size and hidden must be >= 1");
    }
    if !(cfg.init_scale.is_finite() && cfg.init_scale > 0.0) {
        return bad("init_scale must be > 0");
    }
    if !(cfg.grad_clip.is_finite() && cfg.grad_clip > 0.0) {
        return bad("grad_clip must be > 0");
    }
    Ok(())
}

/// Per-feature mean and std over every frame of the given windows.
/// A tiny variance floor keeps constant features harmless.
pub fn fit_normalization(windows: &[ImuWindow]) -> (Vec<f64>, Vec<f64>) {
    let mut mean = vec![0.0f64; FRAME_FEATURES];
    let mut count = 0usize;
    for w in windows {
        for r in 0..super::WINDOW_LEN {
            for (m, v) in mean.iter_mut().zip(w.row(r)) {
                *m += v;
            }
        }
        count += super::WINDOW_LEN;
    }
    for m in &mut mean {
        *m /= count as f64;
    }
    let mut var = vec![0.0f64; FRAME_FEATURES];
    for w in windows {
        for r in 0..super::WINDOW_LEN {
            for ((s, m), v) in var.iter_mut().zip(&mean).zip(w.row(r)) {
                let d = v - m;
                *s += d * d;
            }
        }
    }
    let std: Vec<f64> = var.iter().map(|s| (s / count as f64 + 1e-12).sqrt()).collect();
    (mean, std)
}

/// Trains a fresh classifier on the labeled windows; the caller holds
/// out its own evaluation split. Normalization statistics come from
/// this dataset only and are stored inside the returned parameters.
pub fn train(dataset: &[ImuWindow], cfg: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    validate_config(cfg)?;
    if dataset.is_empty() {
        return Err(TrainError::Empty);
    }
    let mut labels = Vec::with_capacity(dataset.len());
    for (index, w) in dataset.iter().enumerate() {
        labels.push(w.label.ok_or(TrainError::Unlabeled { index })?);
    }
    if labels.iter().all(|l| *l == labels[0]) {
        return Err(TrainError::SingleClass);
    }

    let mut params = LstmParams::init(FRAME_FEATURES, cfg.hidden, cfg.seed, cfg.init_scale);
    let (mean, std) = fit_normalization(dataset);
    params.norm_mean = mean;
    params.norm_std = std;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut per_epoch = Vec::with_capacity(cfg.epochs);
    let mut warnings = Vec::new();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            let mut grads = LstmGrads::zeros(FRAME_FEATURES, cfg.hidden);
            let mut batch_loss = 0.0;
            for &wi in batch {
                let (loss, g) =
                    lstm_backward(&params, dataset[wi].seq(), labels[wi]).expect("shapes fixed");
                batch_loss += loss;
                grads.add_scaled(&g, 1.0);
            }
            let scale = 1.0 / batch.len() as f64;
            grads.scale(scale);
            batch_loss *= scale;
            if !batch_loss.is_finite() || !grads.global_norm().is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch, batch: batch_idx });
            }
            let norm = grads.global_norm();
            if norm > cfg.grad_clip {
                grads.scale(cfg.grad_clip / norm);
            }
            apply_sgd(&mut params, &grads, cfg.lr);
            epoch_loss += batch_loss * batch.len() as f64;
        }
        epoch_loss /= dataset.len() as f64;
        if let Some(prev) = per_epoch.last() {
            if epoch_loss > prev + 1e-9 {
                warnings.push(format!(
                    "training loss rose at epoch {epoch}: {prev} -> {epoch_loss}; lr may be too high"
                ));
            }
        }
        per_epoch.push(epoch_loss);
    }
    Ok(TrainOutcome { params, curve: LossCurve { per_epoch, warnings } })
}

fn apply_sgd(params: &mut LstmParams, grads: &LstmGrads, lr: f64) {
    for (p, g) in params.gates.iter_mut().zip(&grads.gates) {
        for (a, b) in p.w.iter_mut().zip(&g.w) {
            *a -= lr * b;
        }
        for (a, b) in p.u.iter_mut().zip(&g.u) {
            *a -= lr * b;
        }
        for (a, b) in p.b.iter_mut().zip(&g.b) {
            *a -= lr * b;
        }
    }
    for (a, b) in params.w_out.iter_mut().zip(&grads.w_out) {
        *a -= lr * b;
    }
    params.b_out -= lr * grads.b_out;
}
