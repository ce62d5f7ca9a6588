//! Binary logistic regression trained by full-batch gradient descent.
//!
//! This is the base learner behind every label node, synthetic or real.
//! Training starts from zero weights and draws no random numbers, so a
//! model is a pure function of its data and [`TrainConfig`].

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Activations are clamped to this magnitude before exponentiation.
pub const ACTIVATION_CLAMP: f64 = 35.0;

/// Probabilities are clipped to `[PROB_EPS, 1 - PROB_EPS]` inside the loss.
pub const PROB_EPS: f64 = 1e-12;

pub fn sigmoid(a: f64) -> f64 {
    let a = a.clamp(-ACTIVATION_CLAMP, ACTIVATION_CLAMP);
    1.0 / (1.0 + (-a).exp())
}

/// Hard decision rule on a probability: ties at exactly 0.5 go to 1.
pub fn decide(probability: f64) -> u8 {
    u8::from(probability >= 0.5)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2_penalty: f64,
    /// Carried for provenance. Zero-initialized full-batch descent does not
    /// consume randomness.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            epochs: 1000,
            l2_penalty: 1e-4,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidConfig("epochs must be at least 1".into()));
        }
        if !(self.l2_penalty >= 0.0 && self.l2_penalty.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "l2_penalty must be nonnegative, got {}",
                self.l2_penalty
            )));
        }
        Ok(())
    }
}

/// Weights of a trained binary classifier. Index 0 of `weights` is the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    weights: Vec<f64>,
    input_dim: usize,
}

impl LinearModel {
    /// Builds a model from `[bias, w_1, .., w_D]`.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyData("weights must hold at least the bias"));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("model weights"));
        }
        let input_dim = weights.len() - 1;
        Ok(LinearModel { weights, input_dim })
    }

    pub fn zeros(input_dim: usize) -> Self {
        LinearModel {
            weights: vec![0.0; input_dim + 1],
            input_dim,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn bias(&self) -> f64 {
        self.weights[0]
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.weights[1..]
    }

    /// All weights, bias first.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[cfg(test)]
    pub(crate) fn coefficients_mut(&mut self) -> &mut [f64] {
        &mut self.weights[1..]
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got,
            });
        }
        Ok(())
    }

    /// `bias + w·x` without a dimension check.
    pub(crate) fn activation_unchecked(&self, x: &[f64]) -> f64 {
        self.coefficients()
            .iter()
            .zip(x)
            .fold(self.bias(), |acc, (w, v)| acc + w * v)
    }

    pub fn activation(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        Ok(self.activation_unchecked(x))
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.activation(x)?))
    }

    /// 1 iff `bias + w·x >= 0`, i.e. iff the probability is at least 0.5.
    pub fn predict_bit(&self, x: &[f64]) -> Result<u8> {
        Ok(u8::from(self.activation(x)? >= 0.0))
    }

    pub(crate) fn predict_bit_unchecked(&self, x: &[f64]) -> u8 {
        u8::from(self.activation_unchecked(x) >= 0.0)
    }

    /// Activations for every row of `x`.
    pub fn activations(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        self.check_dim(x.ncols())?;
        let w = ArrayView1::from(self.coefficients());
        Ok(x.dot(&w) + self.bias())
    }
}

fn check_training_data(x: ArrayView2<f64>, y: ArrayView1<u8>) -> Result<()> {
    if x.nrows() == 0 {
        return Err(Error::EmptyData("training set has no rows"));
    }
    if y.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training features"));
    }
    if let Some(bad) = y.iter().find(|&&t| t > 1) {
        return Err(Error::InvalidConfig(format!("binary target expected, got {bad}")));
    }
    Ok(())
}

/// Negative log-likelihood summed over the examples (lower is better).
pub fn cross_entropy(model: &LinearModel, x: ArrayView2<f64>, y: ArrayView1<u8>) -> Result<f64> {
    if x.nrows() == 0 {
        return Err(Error::EmptyData("no examples"));
    }
    if y.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    let a = model.activations(x)?;
    Ok(a.iter()
        .zip(y.iter())
        .map(|(&a, &t)| {
            let p = sigmoid(a).clamp(PROB_EPS, 1.0 - PROB_EPS);
            if t == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum())
}

/// Gradient of [`cross_entropy`] with respect to `[bias, w]`.
pub fn cross_entropy_gradient(
    model: &LinearModel,
    x: ArrayView2<f64>,
    y: ArrayView1<u8>,
) -> Result<Vec<f64>> {
    if y.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            got: y.len(),
        });
    }
    let a = model.activations(x)?;
    let residual: Array1<f64> = a
        .iter()
        .zip(y.iter())
        .map(|(&a, &t)| sigmoid(a) - f64::from(t))
        .collect();
    let mut grad = Vec::with_capacity(model.input_dim + 1);
    grad.push(residual.sum());
    grad.extend(x.t().dot(&residual));
    Ok(grad)
}

/// Training objective: mean cross-entropy plus `l2/2 * |w|^2` on the
/// non-bias weights.
pub fn objective(
    model: &LinearModel,
    x: ArrayView2<f64>,
    y: ArrayView1<u8>,
    l2_penalty: f64,
) -> Result<f64> {
    let n = x.nrows() as f64;
    let penalty: f64 = model.coefficients().iter().map(|w| w * w).sum();
    Ok(cross_entropy(model, x, y)? / n + 0.5 * l2_penalty * penalty)
}

pub fn objective_gradient(
    model: &LinearModel,
    x: ArrayView2<f64>,
    y: ArrayView1<u8>,
    l2_penalty: f64,
) -> Result<Vec<f64>> {
    let n = x.nrows() as f64;
    let mut grad = cross_entropy_gradient(model, x, y)?;
    grad[0] /= n;
    for (g, w) in grad[1..].iter_mut().zip(model.coefficients()) {
        *g = *g / n + l2_penalty * w;
    }
    Ok(grad)
}

/// Step size actually used: the configured rate, capped at the inverse of a
/// curvature bound so that every step decreases the objective.
///
/// The Hessian of the objective is at most `tr(X'X)/(4N) + l2` in spectral
/// norm (bias column included in the trace).
pub fn effective_step(x: ArrayView2<f64>, config: &TrainConfig) -> f64 {
    let n = x.nrows().max(1) as f64;
    let mean_sq_norm = 1.0 + x.iter().map(|v| v * v).sum::<f64>() / n;
    let curvature = 0.25 * mean_sq_norm + config.l2_penalty;
    config.learning_rate.min(1.0 / curvature)
}

pub fn train_logistic(
    x: ArrayView2<f64>,
    y: ArrayView1<u8>,
    config: &TrainConfig,
) -> Result<LinearModel> {
    train(x, y, config, None)
}

/// Like [`train_logistic`], also returning the objective before each epoch
/// and after the last one (`epochs + 1` values).
pub fn train_logistic_traced(
    x: ArrayView2<f64>,
    y: ArrayView1<u8>,
    config: &TrainConfig,
) -> Result<(LinearModel, Vec<f64>)> {
    let mut trace = Vec::with_capacity(config.epochs + 1);
    let model = train(x, y, config, Some(&mut trace))?;
    trace.push(objective(&model, x, y, config.l2_penalty)?);
    Ok((model, trace))
}

fn train(
    x: ArrayView2<f64>,
    y: ArrayView1<u8>,
    config: &TrainConfig,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<LinearModel> {
    config.validate()?;
    check_training_data(x, y)?;

    let n = x.nrows() as f64;
    let step = effective_step(x, config);
    let target: Array1<f64> = y.mapv(f64::from);
    let mut w = Array1::<f64>::zeros(x.ncols());
    let mut bias = 0.0;

    for _ in 0..config.epochs {
        let mut residual = x.dot(&w);
        residual.zip_mut_with(&target, |a, &t| *a = sigmoid(*a + bias) - t);
        if let Some(trace) = trace.as_deref_mut() {
            trace.push(objective_from_parts(&w, bias, x, y, config.l2_penalty));
        }
        let grad_bias = residual.sum() / n;
        let mut grad = x.t().dot(&residual);
        grad.zip_mut_with(&w, |g, &wi| *g = *g / n + config.l2_penalty * wi);
        w.scaled_add(-step, &grad);
        bias -= step * grad_bias;
    }

    let mut weights = Vec::with_capacity(x.ncols() + 1);
    weights.push(bias);
    weights.extend(w.iter().copied());
    LinearModel::new(weights)
}

fn objective_from_parts(
    w: &Array1<f64>,
    bias: f64,
    x: ArrayView2<f64>,
    y: ArrayView1<u8>,
    l2_penalty: f64,
) -> f64 {
    let mut weights = vec![bias];
    weights.extend(w.iter().copied());
    let model = LinearModel {
        input_dim: w.len(),
        weights,
    };
    objective(&model, x, y, l2_penalty).unwrap_or(f64::NAN)
}

/// Fraction of rows where `predict_bit` matches the target.
pub fn training_accuracy(model: &LinearModel, x: ArrayView2<f64>, y: ArrayView1<u8>) -> Result<f64> {
    let a = model.activations(x)?;
    if a.is_empty() {
        return Err(Error::EmptyData("no examples"));
    }
    let hits = a
        .iter()
        .zip(y.iter())
        .filter(|(&a, &t)| u8::from(a >= 0.0) == t)
        .count();
    Ok(hits as f64 / a.len() as f64)
}

/// Hard predictions for every row of `x`.
pub fn predict_bits(model: &LinearModel, x: ArrayView2<f64>) -> Result<Array1<u8>> {
    Ok(model.activations(x)?.mapv(|a| u8::from(a >= 0.0)))
}
