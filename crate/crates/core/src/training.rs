//! Huber loss, Adam with per-epoch exponential learning-rate decay, and the
//! mini-batch epoch loop.
//!
//! Training is single-threaded and deterministic: one ChaCha8 stream shuffles
//! the training split each epoch and a second one draws dropout masks. After
//! every epoch both the training and validation splits are scored in
//! inference mode (no dropout) on the normalized scale.

use std::io::Write;
use std::ops::Range;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::WindowedDataset;
use crate::error::{Error, Result};
use crate::models::{DropoutSpec, Gradients, Model, ModelKind, DEFAULT_DROPOUT};
use crate::numkernel::Matrix;

pub const DEFAULT_BASE_LR: f64 = 0.0003;
pub const DEFAULT_DECAY: f64 = 0.98;
pub const DEFAULT_BATCH_SIZE: usize = 32;
pub const DEFAULT_EPOCHS: usize = 100;

/// Windows scored per forward call in inference mode. Small batches keep the
/// unrolled LSTM state in cache; the feed-forward net prefers wide ones.
fn eval_batch(kind: ModelKind) -> usize {
    match kind {
        ModelKind::Fcnn => 256,
        ModelKind::Lstm => 32,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Transition point between the quadratic and linear branches.
    pub delta: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { delta: 1.0 }
    }
}

impl LossConfig {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Config(format!("Huber delta must be positive, got {delta}")));
        }
        Ok(Self { delta })
    }
}

fn check_same_shape(pred: &Matrix, target: &Matrix) -> Result<()> {
    if pred.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "prediction {}x{} vs target {}x{}",
            pred.rows(),
            pred.cols(),
            target.rows(),
            target.cols()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Shape("empty prediction".into()));
    }
    Ok(())
}

/// Mean Huber loss over all entries.
pub fn huber_loss(pred: &Matrix, target: &Matrix, cfg: LossConfig) -> Result<f64> {
    check_same_shape(pred, target)?;
    let d = cfg.delta;
    let total: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| {
            let e = (p - t).abs();
            if e <= d {
                0.5 * e * e
            } else {
                d * (e - 0.5 * d)
            }
        })
        .sum();
    Ok(total / pred.len() as f64)
}

/// Gradient of [`huber_loss`] with respect to `pred`.
pub fn huber_grad(pred: &Matrix, target: &Matrix, cfg: LossConfig) -> Result<Matrix> {
    check_same_shape(pred, target)?;
    let n = pred.len() as f64;
    let d = cfg.delta;
    let data = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| {
            let e = p - t;
            if e.abs() <= d {
                e / n
            } else {
                d * e.signum() / n
            }
        })
        .collect();
    Matrix::new(pred.rows(), pred.cols(), data)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub base_lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Multiplicative learning-rate factor applied once per epoch.
    pub decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            base_lr: DEFAULT_BASE_LR,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            decay: DEFAULT_DECAY,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Matrix>,
    pub v: Vec<Matrix>,
    pub t: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(params: &[&Matrix], config: AdamConfig) -> Self {
        let zeros = || params.iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect();
        Self {
            m: zeros(),
            v: zeros(),
            t: 0,
            config,
        }
    }
}

/// `base_lr · decay^epoch`, with `epoch` counted from zero.
pub fn decayed_lr(state: &AdamState, epoch: usize) -> f64 {
    state.config.base_lr * state.config.decay.powi(epoch as i32)
}

/// One bias-corrected Adam update at learning rate `lr`.
pub fn adam_step(params: &mut [&mut Matrix], grads: &Gradients, state: &mut AdamState, lr: f64) -> Result<()> {
    if params.len() != grads.0.len() || params.len() != state.m.len() {
        return Err(Error::Shape(format!(
            "{} parameters, {} gradients, {} moment slots",
            params.len(),
            grads.0.len(),
            state.m.len()
        )));
    }
    for (k, (p, g)) in params.iter().zip(&grads.0).enumerate() {
        if p.shape() != g.shape() || p.shape() != state.m[k].shape() {
            return Err(Error::Shape(format!(
                "parameter {k} is {:?} but gradient is {:?}",
                p.shape(),
                g.shape()
            )));
        }
    }
    state.t += 1;
    let AdamConfig {
        beta1, beta2, epsilon, ..
    } = state.config;
    let c1 = 1.0 - beta1.powi(state.t as i32);
    let c2 = 1.0 - beta2.powi(state.t as i32);
    for (k, p) in params.iter_mut().enumerate() {
        let g = grads.0[k].data();
        let m = state.m[k].data_mut();
        let v = state.v[k].data_mut();
        for (j, theta) in p.data_mut().iter_mut().enumerate() {
            m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
            v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
            let m_hat = m[j] / c1;
            let v_hat = v[j] / c2;
            *theta -= lr * m_hat / (v_hat.sqrt() + epsilon);
        }
        if !p.is_finite() {
            return Err(Error::NonFiniteParameter(state.t));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout: f64,
    pub loss: LossConfig,
    pub adam: AdamConfig,
    /// Seeds batch shuffling and dropout masks.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: DEFAULT_EPOCHS,
            batch_size: DEFAULT_BATCH_SIZE,
            dropout: DEFAULT_DROPOUT,
            loss: LossConfig::default(),
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    /// One-based.
    pub epoch: usize,
    pub train_mae: f64,
    pub train_mse: f64,
    pub val_mae: f64,
    pub val_mse: f64,
    pub lr: f64,
    /// Mean Huber loss of the epoch's mini-batches, in training mode,
    /// weighted by batch size.
    pub train_loss: f64,
    /// Huber loss over the training split in inference mode after the
    /// epoch.
    pub train_loss_eval: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub rows: Vec<EpochRow>,
    pub epochs: usize,
    /// One-based epoch with the lowest validation MSE, if any epoch ran.
    pub best_epoch: Option<usize>,
}

pub const TRAIN_REPORT_HEADER: &str = "epoch,train_mae,train_mse,val_mae,val_mse,lr";

impl TrainReport {
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{TRAIN_REPORT_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.epoch, r.train_mae, r.train_mse, r.val_mae, r.val_mse, r.lr
            )?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).map_err(|e| Error::io(path, e))?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    /// Epoch (one-based) at which validation MAE was lowest.
    pub fn min_val_mae_epoch(&self) -> Option<usize> {
        self.rows
            .iter()
            .min_by(|a, b| a.val_mae.total_cmp(&b.val_mae))
            .map(|r| r.epoch)
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters after the last epoch.
    pub model: Model,
    /// Parameters at the epoch with the lowest validation MSE.
    pub best_model: Model,
    pub report: TrainReport,
}

/// Normalized inference-mode predictions for a range of samples.
pub fn predict_range(model: &Model, ds: &WindowedDataset, range: Range<usize>) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(range.len());
    let mut start = range.start;
    while start < range.end {
        let end = (start + eval_batch(model.kind())).min(range.end);
        let y = model.predict(&ds.inputs(start..end))?;
        out.extend_from_slice(y.data());
        start = end;
    }
    Ok(out)
}

/// `(MAE, MSE, mean Huber loss)` of inference-mode predictions on the
/// normalized scale.
pub fn evaluate_split(model: &Model, ds: &WindowedDataset, range: Range<usize>, loss: LossConfig) -> Result<(f64, f64, f64)> {
    let pred = predict_range(model, ds, range.clone())?;
    let target = ds.targets(range);
    let n = pred.len() as f64;
    let (mut abs, mut sq) = (0.0, 0.0);
    for (p, t) in pred.iter().zip(&target) {
        abs += (p - t).abs();
        sq += (p - t) * (p - t);
    }
    let huber = huber_loss(
        &Matrix::new(pred.len(), 1, pred)?,
        &Matrix::new(target.len(), 1, target)?,
        loss,
    )?;
    Ok((abs / n, sq / n, huber))
}

/// Mini-batch training for `cfg.epochs` epochs over the training split.
pub fn train_model(mut model: Model, ds: &WindowedDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    if ds.split.train.is_empty() {
        return Err(Error::EmptySplit("train"));
    }
    if ds.split.val.is_empty() {
        return Err(Error::EmptySplit("validation"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let sizes = model.sizes();
    if sizes.features != ds.n_features() || sizes.look_back != ds.spec.look_back {
        return Err(Error::Shape(format!(
            "model expects {}x{} windows, dataset has {}x{}",
            sizes.look_back,
            sizes.features,
            ds.spec.look_back,
            ds.n_features()
        )));
    }
    let dropout_spec = DropoutSpec::new(cfg.dropout, cfg.seed ^ 0x5eed_d0d0)?;
    let mut dropout = dropout_spec.sampler();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = AdamState::new(&model.params(), cfg.adam);
    let mut order: Vec<usize> = ds.split.train.clone().collect();
    let mut report = TrainReport {
        rows: Vec::with_capacity(cfg.epochs),
        epochs: cfg.epochs,
        best_epoch: None,
    };
    let mut best_model = model.clone();
    let mut best_val = f64::INFINITY;

    for epoch in 0..cfg.epochs {
        let lr = decayed_lr(&state, epoch);
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let windows: Vec<&[f64]> = chunk.iter().map(|&i| ds.input(i)).collect();
            let target = Matrix::new(chunk.len(), 1, chunk.iter().map(|&i| ds.target(i)).collect())?;
            let (pred, cache) = model.forward(&windows, Some(&mut dropout), true)?;
            let loss = huber_loss(&pred, &target, cfg.loss)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch: epoch + 1,
                    batch: b + 1,
                });
            }
            loss_sum += loss * chunk.len() as f64;
            let grad = huber_grad(&pred, &target, cfg.loss)?;
            let grads = model.backward(&cache, &grad)?;
            adam_step(&mut model.params_mut(), &grads, &mut state, lr)?;
        }
        let (train_mae, train_mse, train_loss_eval) = evaluate_split(&model, ds, ds.split.train.clone(), cfg.loss)?;
        let (val_mae, val_mse, _) = evaluate_split(&model, ds, ds.split.val.clone(), cfg.loss)?;
        report.rows.push(EpochRow {
            epoch: epoch + 1,
            train_mae,
            train_mse,
            val_mae,
            val_mse,
            lr,
            train_loss: loss_sum / order.len() as f64,
            train_loss_eval,
        });
        if val_mse < best_val {
            best_val = val_mse;
            best_model = model.clone();
            report.best_epoch = Some(epoch + 1);
        }
    }
    Ok(TrainOutcome {
        model,
        best_model,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::{finite_difference_grad, relative_error, DEFAULT_FD_EPS};
    use proptest::prelude::*;

    fn m(v: &[f64]) -> Matrix {
        Matrix::new(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn huber_hand_cases() {
        let cfg = LossConfig::default();
        assert_eq!(huber_loss(&m(&[1.0, 2.0]), &m(&[1.0, 2.0]), cfg).unwrap(), 0.0);
        assert_eq!(huber_loss(&m(&[0.5]), &m(&[0.0]), cfg).unwrap(), 0.125);
        assert_eq!(huber_loss(&m(&[2.0]), &m(&[0.0]), cfg).unwrap(), 1.5);
        assert!(huber_loss(&m(&[1.0]), &m(&[1.0, 2.0]), cfg).is_err());
        assert!(LossConfig::new(0.0).is_err());
    }

    #[test]
    fn huber_grad_hand_cases() {
        let cfg = LossConfig::default();
        assert!(huber_grad(&m(&[3.0]), &m(&[3.0]), cfg).unwrap().data().iter().all(|&g| g == 0.0));
        assert_eq!(huber_grad(&m(&[0.5]), &m(&[0.0]), cfg).unwrap().data(), &[0.5]);
        assert_eq!(huber_grad(&m(&[-3.0, 0.0]), &m(&[0.0, 0.0]), cfg).unwrap().data(), &[-0.5, 0.0]);
        assert!(huber_grad(&m(&[1.0]), &m(&[1.0, 2.0]), cfg).is_err());
    }

    proptest! {
        #[test]
        fn huber_grad_matches_fd(
            pred in prop::collection::vec(-3.0f64..3.0, 1..8),
            delta in 0.3f64..2.0,
            seed in any::<u64>(),
        ) {
            use rand::Rng;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let target: Vec<f64> = pred.iter().map(|_| rng.gen_range(-3.0..3.0)).collect();
            let cfg = LossConfig::new(delta).unwrap();
            // Keep clear of the kink where the derivative is not smooth.
            prop_assume!(pred.iter().zip(&target).all(|(p, t)| ((p - t).abs() - delta).abs() > 1e-3));
            let (p, t) = (m(&pred), m(&target));
            let analytic = huber_grad(&p, &t, cfg).unwrap();
            let numeric = finite_difference_grad(|x| huber_loss(x, &t, cfg).unwrap(), &p, DEFAULT_FD_EPS);
            for (a, b) in analytic.data().iter().zip(numeric.data()) {
                prop_assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn adam_first_step() {
        let mut theta = Matrix::zeros(1, 1);
        let mut state = AdamState::new(&[&theta], AdamConfig::default());
        let g = Gradients(vec![Matrix::filled(1, 1, 1.0)]);
        let lr = decayed_lr(&state, 0);
        adam_step(&mut [&mut theta], &g, &mut state, lr).unwrap();
        assert!((theta.get(0, 0) + 0.0003).abs() < 1e-8);
        assert_eq!(state.t, 1);
    }

    #[test]
    fn adam_zero_gradient_is_noop() {
        let mut theta = Matrix::filled(2, 2, 0.7);
        let before = theta.clone();
        let mut state = AdamState::new(&[&theta], AdamConfig::default());
        let g = Gradients(vec![Matrix::zeros(2, 2)]);
        adam_step(&mut [&mut theta], &g, &mut state, 0.0003).unwrap();
        assert_eq!(theta, before);
    }

    #[test]
    fn adam_replays_recurrence() {
        // Oracle: the update recurrence written out independently.
        let cfg = AdamConfig::default();
        let mut theta = Matrix::filled(1, 1, 1.0);
        let mut state = AdamState::new(&[&theta], cfg);
        let g = Gradients(vec![Matrix::filled(1, 1, -2.0)]);
        let (mut m, mut v, mut x) = (0.0f64, 0.0f64, 1.0f64);
        let mut prev = theta.get(0, 0);
        for t in 1..=2 {
            adam_step(&mut [&mut theta], &g, &mut state, 0.001).unwrap();
            m = 0.9 * m + 0.1 * -2.0;
            v = 0.999 * v + 0.001 * 4.0;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            x -= 0.001 * mh / (vh.sqrt() + 1e-8);
            assert!(relative_error(theta.get(0, 0), x) < 1e-14);
            assert!(theta.get(0, 0) > prev, "moves against the gradient sign");
            prev = theta.get(0, 0);
        }
    }

    #[test]
    fn adam_shape_mismatch() {
        let mut theta = Matrix::zeros(1, 2);
        let mut state = AdamState::new(&[&theta], AdamConfig::default());
        let g = Gradients(vec![Matrix::zeros(2, 1)]);
        assert!(adam_step(&mut [&mut theta], &g, &mut state, 0.1).is_err());
    }

    #[test]
    fn adam_rejects_non_finite_result() {
        let mut theta = Matrix::zeros(1, 1);
        let mut state = AdamState::new(&[&theta], AdamConfig::default());
        let g = Gradients(vec![Matrix::filled(1, 1, f64::NAN)]);
        assert!(matches!(
            adam_step(&mut [&mut theta], &g, &mut state, 0.1),
            Err(Error::NonFiniteParameter(1))
        ));
    }

    #[test]
    fn lr_schedule() {
        let state = AdamState::new(&[], AdamConfig::default());
        assert_eq!(decayed_lr(&state, 0), 0.0003);
        let lr35 = decayed_lr(&state, 35);
        assert!((lr35 - 0.0003 * 0.98f64.powi(35)).abs() < 1e-18);
        // 1.478e-4 is the value truncated to four significant figures.
        assert!((lr35 - 1.478e-4).abs() / 1.478e-4 < 1e-3);
        let flat = AdamState::new(&[], AdamConfig { decay: 1.0, ..AdamConfig::default() });
        assert_eq!(decayed_lr(&flat, 77), 0.0003);
    }

    #[test]
    fn report_csv_shape() {
        let report = TrainReport {
            rows: vec![EpochRow {
                epoch: 1,
                train_mae: 0.5,
                train_mse: 0.25,
                val_mae: 0.125,
                val_mse: 0.0625,
                lr: 0.0003,
                train_loss: 0.125,
                train_loss_eval: 0.125,
            }],
            epochs: 1,
            best_epoch: Some(1),
        };
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "epoch,train_mae,train_mse,val_mae,val_mse,lr\n1,0.5,0.25,0.125,0.0625,0.0003\n"
        );
    }
}
