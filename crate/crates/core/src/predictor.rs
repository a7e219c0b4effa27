//! Base learners for `P(x1 = 1 | x2)`.
//!
//! Two estimators: a from-scratch logistic regression trained by full-batch
//! gradient descent (deterministic, testable against finite differences), and
//! a Laplace-smoothed histogram for one-dimensional `x2`, which reproduces
//! arbitrary nonlinear conditionals. Missing feature values are mean-imputed
//! with means frozen at fit time.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::posterior::Probability;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PredictorError {
    #[error("training data is empty")]
    EmptyData,
    #[error("training data contains a single x1 class")]
    SingleClassData,
    #[error("loss became non-finite at epoch {epoch}; reduce the learning rate")]
    NonFiniteLoss { epoch: usize },
    #[error("feature dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value in feature data")]
    NonFiniteFeature,
    #[error("invalid {what}: {value}")]
    InvalidConfig { what: &'static str, value: f64 },
}

/// A real feature vector with an explicit missing mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    values: Vec<f64>,
    missing_mask: Vec<bool>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>, missing_mask: Vec<bool>) -> Result<Self, PredictorError> {
        if values.len() != missing_mask.len() {
            return Err(PredictorError::DimensionMismatch {
                expected: values.len(),
                got: missing_mask.len(),
            });
        }
        for (v, missing) in values.iter().zip(&missing_mask) {
            if !missing && !v.is_finite() {
                return Err(PredictorError::NonFiniteFeature);
            }
        }
        Ok(Self {
            values,
            missing_mask,
        })
    }

    /// A fully observed vector.
    pub fn dense(values: Vec<f64>) -> Result<Self, PredictorError> {
        let mask = vec![false; values.len()];
        Self::new(values, mask)
    }

    pub fn from_options(values: Vec<Option<f64>>) -> Result<Self, PredictorError> {
        let mask: Vec<bool> = values.iter().map(Option::is_none).collect();
        let values: Vec<f64> = values.into_iter().map(|v| v.unwrap_or(0.0)).collect();
        Self::new(values, mask)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, i: usize) -> Option<f64> {
        if self.missing_mask[i] {
            None
        } else {
            Some(self.values[i])
        }
    }

    /// Raw values with missing entries replaced by the supplied means.
    pub fn imputed(&self, means: &[f64]) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.missing_mask)
            .zip(means)
            .map(|((v, missing), mean)| if *missing { *mean } else { *v })
            .collect()
    }
}

/// A predictor of the surrogate feature: returns `P(x1 = 1 | x)`.
pub trait BasePredictor {
    type Input: ?Sized;

    fn p_x1(&self, x: &Self::Input) -> Result<f64, PredictorError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub l2_penalty: f64,
    pub max_epochs: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            l2_penalty: 1e-4,
            max_epochs: 5000,
            tolerance: 1e-7,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), PredictorError> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(PredictorError::InvalidConfig {
                what: "learning_rate",
                value: self.learning_rate,
            });
        }
        if !(self.l2_penalty.is_finite() && self.l2_penalty >= 0.0) {
            return Err(PredictorError::InvalidConfig {
                what: "l2_penalty",
                value: self.l2_penalty,
            });
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(PredictorError::InvalidConfig {
                what: "tolerance",
                value: self.tolerance,
            });
        }
        Ok(())
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// The L2-regularized mean negative log-likelihood on mean-imputed data,
/// exposed as a struct so the analytic gradient can be checked against
/// finite differences of the loss.
#[derive(Debug, Clone)]
pub struct LogisticObjective {
    rows: Vec<Vec<f64>>,
    labels: Vec<f64>,
    feature_means: Vec<f64>,
    l2_penalty: f64,
}

impl LogisticObjective {
    pub fn new(data: &[(FeatureVector, bool)], l2_penalty: f64) -> Result<Self, PredictorError> {
        if data.is_empty() {
            return Err(PredictorError::EmptyData);
        }
        let dim = data[0].0.len();
        let mut sums = vec![0.0; dim];
        let mut counts = vec![0usize; dim];
        for (x, _) in data {
            if x.len() != dim {
                return Err(PredictorError::DimensionMismatch {
                    expected: dim,
                    got: x.len(),
                });
            }
            for i in 0..dim {
                if let Some(v) = x.value(i) {
                    sums[i] += v;
                    counts[i] += 1;
                }
            }
        }
        // A feature that is missing everywhere imputes to 0.
        let feature_means: Vec<f64> = sums
            .iter()
            .zip(&counts)
            .map(|(s, c)| if *c == 0 { 0.0 } else { s / *c as f64 })
            .collect();
        let rows: Vec<Vec<f64>> = data.iter().map(|(x, _)| x.imputed(&feature_means)).collect();
        let labels: Vec<f64> = data.iter().map(|(_, y)| f64::from(*y)).collect();
        Ok(Self {
            rows,
            labels,
            feature_means,
            l2_penalty,
        })
    }

    pub fn dim(&self) -> usize {
        self.feature_means.len()
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn feature_means(&self) -> &[f64] {
        &self.feature_means
    }

    pub fn loss(&self, weights: &[f64], bias: f64) -> f64 {
        let n = self.rows.len() as f64;
        let mut loss = 0.0;
        for (row, y) in self.rows.iter().zip(&self.labels) {
            let z: f64 = row.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>() + bias;
            loss += softplus(z) - y * z;
        }
        loss /= n;
        let penalty: f64 = weights.iter().map(|w| w * w).sum();
        loss + 0.5 * self.l2_penalty * penalty
    }

    /// Gradient of [`Self::loss`] with respect to (weights, bias).
    pub fn grad(&self, weights: &[f64], bias: f64) -> (Vec<f64>, f64) {
        let n = self.rows.len() as f64;
        let mut grad_w = vec![0.0; weights.len()];
        let mut grad_b = 0.0;
        for (row, y) in self.rows.iter().zip(&self.labels) {
            let z: f64 = row.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>() + bias;
            let residual = sigmoid(z) - y;
            for (g, x) in grad_w.iter_mut().zip(row) {
                *g += residual * x;
            }
            grad_b += residual;
        }
        for (g, w) in grad_w.iter_mut().zip(weights) {
            *g = *g / n + self.l2_penalty * w;
        }
        (grad_w, grad_b / n)
    }
}

/// A fitted logistic model with frozen imputation means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub feature_means: Vec<f64>,
    pub trained_on: usize,
}

impl LogisticModel {
    /// `P(x1 = 1 | x)` = sigmoid(w . x_imputed + b).
    pub fn predict_proba(&self, x: &FeatureVector) -> Result<Probability, PredictorError> {
        if x.len() != self.weights.len() {
            return Err(PredictorError::DimensionMismatch {
                expected: self.weights.len(),
                got: x.len(),
            });
        }
        let row = x.imputed(&self.feature_means);
        let z: f64 = row.iter().zip(&self.weights).map(|(x, w)| x * w).sum::<f64>() + self.bias;
        Ok(Probability::clamped01(sigmoid(z)))
    }
}

impl BasePredictor for LogisticModel {
    type Input = FeatureVector;

    fn p_x1(&self, x: &FeatureVector) -> Result<f64, PredictorError> {
        self.predict_proba(x).map(Probability::get)
    }
}

/// Fit by full-batch gradient descent from a zero start; stops when the
/// gradient max-norm drops below `cfg.tolerance` or `cfg.max_epochs` is hit.
pub fn fit_logistic(
    data: &[(FeatureVector, bool)],
    cfg: &TrainConfig,
) -> Result<LogisticModel, PredictorError> {
    cfg.validate()?;
    let n_pos = data.iter().filter(|(_, y)| *y).count();
    if data.is_empty() {
        return Err(PredictorError::EmptyData);
    }
    if n_pos == 0 || n_pos == data.len() {
        return Err(PredictorError::SingleClassData);
    }
    let objective = LogisticObjective::new(data, cfg.l2_penalty)?;
    let mut weights = vec![0.0; objective.dim()];
    let mut bias = 0.0;
    for epoch in 0..cfg.max_epochs {
        let (grad_w, grad_b) = objective.grad(&weights, bias);
        let max_norm = grad_w
            .iter()
            .chain(std::iter::once(&grad_b))
            .fold(0.0f64, |m, g| m.max(g.abs()));
        if !max_norm.is_finite() {
            return Err(PredictorError::NonFiniteLoss { epoch });
        }
        if max_norm < cfg.tolerance {
            break;
        }
        for (w, g) in weights.iter_mut().zip(&grad_w) {
            *w -= cfg.learning_rate * g;
        }
        bias -= cfg.learning_rate * grad_b;
    }
    if !objective.loss(&weights, bias).is_finite() {
        return Err(PredictorError::NonFiniteLoss {
            epoch: cfg.max_epochs,
        });
    }
    Ok(LogisticModel {
        weights,
        bias,
        feature_means: objective.feature_means().to_vec(),
        trained_on: data.len(),
    })
}

/// Per-bin add-one-smoothed estimate of `P(x1 = 1 | x2 in bin)` for scalar x2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramModel {
    lo: f64,
    hi: f64,
    probs: Vec<f64>,
}

impl HistogramModel {
    pub fn bins(&self) -> usize {
        self.probs.len()
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn bin_of(&self, x: f64) -> usize {
        let bins = self.probs.len();
        let t = (x - self.lo) / (self.hi - self.lo);
        ((t * bins as f64).floor() as i64).clamp(0, bins as i64 - 1) as usize
    }

    /// `P(x1 = 1 | x2)`; out-of-range inputs map to the edge bins.
    pub fn predict(&self, x: f64) -> Probability {
        Probability::clamped01(self.probs[self.bin_of(x)])
    }
}

impl BasePredictor for HistogramModel {
    type Input = f64;

    fn p_x1(&self, x: &f64) -> Result<f64, PredictorError> {
        if !x.is_finite() {
            return Err(PredictorError::NonFiniteFeature);
        }
        Ok(self.predict(*x).get())
    }
}

pub fn fit_histogram(
    data: &[(f64, bool)],
    bins: usize,
    range: (f64, f64),
) -> Result<HistogramModel, PredictorError> {
    if data.is_empty() {
        return Err(PredictorError::EmptyData);
    }
    if bins < 2 {
        return Err(PredictorError::InvalidConfig {
            what: "bins",
            value: bins as f64,
        });
    }
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(PredictorError::InvalidConfig {
            what: "range",
            value: hi - lo,
        });
    }
    let mut model = HistogramModel {
        lo,
        hi,
        probs: vec![0.0; bins],
    };
    let mut totals = vec![0usize; bins];
    let mut ones = vec![0usize; bins];
    for (x, x1) in data {
        if !x.is_finite() {
            return Err(PredictorError::NonFiniteFeature);
        }
        let b = model.bin_of(*x);
        totals[b] += 1;
        ones[b] += usize::from(*x1);
    }
    for (b, prob) in model.probs.iter_mut().enumerate() {
        *prob = (ones[b] + 1) as f64 / (totals[b] + 2) as f64;
    }
    Ok(model)
}
