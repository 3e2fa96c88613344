use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Single-layer softmax classifier: `logits = x · weights + biases`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxModel {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

impl SoftmaxModel {
    pub fn zeros(n_features: usize, n_classes: usize) -> Self {
        Self {
            weights: Array2::zeros((n_features, n_classes)),
            biases: Array1::zeros(n_classes),
        }
    }

    pub fn n_features(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_classes(&self) -> usize {
        self.weights.ncols()
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    pub fn logits(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.n_features() {
            return Err(Error::Dimension(format!(
                "classifier expects {} features, got {}",
                self.n_features(),
                x.ncols()
            )));
        }
        Ok(x.dot(&self.weights) + &self.biases)
    }

    /// Row-wise class probabilities.
    pub fn probabilities(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut z = self.logits(x)?;
        for row in z.rows_mut() {
            softmax_in_place(row);
        }
        Ok(z)
    }

    /// Argmax of the logits, ties to the lowest class index.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<usize>> {
        Ok(self.logits(x)?.rows().into_iter().map(argmax).collect())
    }
}

fn softmax_in_place(mut row: ndarray::ArrayViewMut1<f64>) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    row.mapv_inplace(|v| (v - max).exp());
    let sum = row.sum();
    row /= sum;
}

pub(crate) fn argmax(row: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Fraction of rows whose predicted class equals the label.
pub fn predict_accuracy(model: &SoftmaxModel, x: ArrayView2<f64>, labels: &[usize]) -> Result<f64> {
    if labels.len() != x.nrows() {
        return Err(Error::Dimension(format!(
            "{} labels for {} rows",
            labels.len(),
            x.nrows()
        )));
    }
    if labels.is_empty() {
        return Err(Error::Request("accuracy of an empty set".into()));
    }
    let pred = model.predict(x)?;
    let hits = pred.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Adaptive-moment training settings for the softmax head.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainRegime {
    pub step_size: f64,
    pub decay1: f64,
    pub decay2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop once validation error has gone up this many times in total.
    pub patience_total: usize,
    pub seed: u64,
}

impl Default for TrainRegime {
    fn default() -> Self {
        Self {
            step_size: 0.001,
            decay1: 0.9,
            decay2: 0.999,
            eps: 1e-8,
            batch_size: 32,
            max_epochs: 500,
            patience_total: 4,
            seed: 0,
        }
    }
}

impl TrainRegime {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !unit(self.decay1) || !unit(self.decay2) {
            return Err(Error::Request("moment decays must lie in (0, 1)".into()));
        }
        if self.patience_total == 0 || self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Request(
                "patience, batch size and epoch budget must be positive".into(),
            ));
        }
        if !(self.step_size > 0.0 && self.eps > 0.0) {
            return Err(Error::Request("step size and eps must be positive".into()));
        }
        Ok(())
    }
}

/// Counts validation-error increases over the whole run (not consecutive
/// ones) and remembers the best epoch.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience_total: usize,
    increases: usize,
    previous: Option<f64>,
    best: Option<(usize, f64)>,
    epochs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StopDecision {
    /// This epoch is the new best; snapshot the parameters.
    pub improved: bool,
    pub stop: bool,
}

impl EarlyStopping {
    pub fn new(patience_total: usize) -> Self {
        Self {
            patience_total,
            increases: 0,
            previous: None,
            best: None,
            epochs: 0,
        }
    }

    pub fn observe(&mut self, error: f64) -> StopDecision {
        self.epochs += 1;
        if self.previous.is_some_and(|p| error > p) {
            self.increases += 1;
        }
        self.previous = Some(error);
        let improved = self.best.map_or(true, |(_, b)| error < b);
        if improved {
            self.best = Some((self.epochs, error));
        }
        StopDecision {
            improved,
            stop: self.increases >= self.patience_total,
        }
    }

    pub fn increases(&self) -> usize {
        self.increases
    }

    /// 1-based epoch and error of the best observation.
    pub fn best(&self) -> Option<(usize, f64)> {
        self.best
    }
}

/// What happened during [`train_softmax`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epochs: usize,
    pub val_errors: Vec<f64>,
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
    pub warnings: Vec<String>,
}

/// Fit a softmax head by minimizing mean cross-entropy with bias-corrected
/// adaptive moment updates over shuffled mini-batches.
///
/// Validation error (misclassification rate) is measured after each epoch;
/// training stops when it has increased `patience_total` times in total, and
/// the parameters of the lowest validation error are returned.
pub fn train_softmax(
    train_x: ArrayView2<f64>,
    train_y: &[usize],
    val_x: ArrayView2<f64>,
    val_y: &[usize],
    n_classes: usize,
    regime: &TrainRegime,
) -> Result<(SoftmaxModel, TrainLog)> {
    regime.validate()?;
    let n = train_x.nrows();
    let f = train_x.ncols();
    if train_y.len() != n || val_y.len() != val_x.nrows() {
        return Err(Error::Dimension("label count does not match rows".into()));
    }
    if n == 0 {
        return Err(Error::InsufficientData("no training samples".into()));
    }
    if val_x.nrows() > 0 && val_x.ncols() != f {
        return Err(Error::Dimension(format!(
            "validation features have {} columns, training {}",
            val_x.ncols(),
            f
        )));
    }
    if let Some(&bad) = train_y.iter().chain(val_y).find(|&&l| l >= n_classes) {
        return Err(Error::Request(format!("label {bad} outside {n_classes} classes")));
    }

    let mut model = SoftmaxModel::zeros(f, n_classes);
    let mut adam_w = Moments::new(f * n_classes);
    let mut adam_b = Moments::new(n_classes);
    let mut rng = ChaCha8Rng::seed_from_u64(regime.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut stopper = EarlyStopping::new(regime.patience_total);
    let mut best = model.clone();
    let mut log = TrainLog {
        epochs: 0,
        val_errors: Vec::new(),
        best_epoch: None,
        stopped_early: false,
        warnings: Vec::new(),
    };
    let has_val = val_x.nrows() > 0;
    if !has_val {
        log.warnings.push(format!(
            "empty validation set: trained for a fixed {} epochs",
            regime.max_epochs
        ));
    }

    let mut step = 0u64;
    for _ in 0..regime.max_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(regime.batch_size) {
            let xb = train_x.select(Axis(0), batch);
            let mut grad = xb.dot(&model.weights) + &model.biases;
            for (mut row, &i) in grad.rows_mut().into_iter().zip(batch) {
                softmax_in_place(row.view_mut());
                row[train_y[i]] -= 1.0;
            }
            grad /= batch.len() as f64;
            let gw = xb.t().dot(&grad);
            let gb = grad.sum_axis(Axis(0));
            step += 1;
            adam_w.update(
                model.weights.as_slice_mut().expect("standard layout"),
                gw.as_slice().expect("standard layout"),
                step,
                regime,
            );
            adam_b.update(
                model.biases.as_slice_mut().expect("contiguous"),
                gb.as_slice().expect("contiguous"),
                step,
                regime,
            );
        }
        log.epochs += 1;
        if has_val {
            let err = 1.0 - predict_accuracy(&model, val_x, val_y)?;
            log.val_errors.push(err);
            let decision = stopper.observe(err);
            if decision.improved {
                best.clone_from(&model);
                log.best_epoch = Some(log.epochs);
            }
            if decision.stop {
                log.stopped_early = true;
                break;
            }
        }
    }
    if has_val {
        Ok((best, log))
    } else {
        Ok((model, log))
    }
}

struct Moments {
    first: Vec<f64>,
    second: Vec<f64>,
}

impl Moments {
    fn new(n: usize) -> Self {
        Self {
            first: vec![0.0; n],
            second: vec![0.0; n],
        }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64], step: u64, r: &TrainRegime) {
        let c1 = 1.0 - r.decay1.powi(step as i32);
        let c2 = 1.0 - r.decay2.powi(step as i32);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            *m = r.decay1 * *m + (1.0 - r.decay1) * g;
            *v = r.decay2 * *v + (1.0 - r.decay2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= r.step_size * m_hat / (v_hat.sqrt() + r.eps);
        }
    }
}
