//! How many rollouts the weighted-average update needs.
//!
//! Two concentration bounds are combined. Hoeffding bounds the error of the
//! weight mean estimate (weights live in `[0, 1]`):
//!
//! ```text
//! K1 = ceil(-ln(rho1 / 2) / eps1^2)
//! ```
//!
//! Chebyshev bounds the error of the weighted perturbation mean, where the
//! variance proxy `Gamma = 2 (Var[du] + E[du]^2)` grows with the distance of
//! the sampling mean from zero:
//!
//! ```text
//! K2 = ceil(Gamma / (rho2 eps2^2) * (1 / (E1_hat - eps1))^2)
//! ```
//!
//! The required count is `max(K1, K2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSizeInputs {
    pub eps1: f64,
    pub eps2: f64,
    pub rho1: f64,
    pub rho2: f64,
    /// Per-channel mean of the control perturbation distribution.
    pub mean_u: Vec<f64>,
    /// Per-channel variance, same length as `mean_u`.
    pub var_u: Vec<f64>,
    /// Estimate of the expected weight, in `(0, 1]`.
    pub e1_hat: f64,
}

impl SampleSizeInputs {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("eps1", self.eps1),
            ("eps2", self.eps2),
            ("rho1", self.rho1),
            ("rho2", self.rho2),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be positive"));
            }
        }
        if self.mean_u.len() != self.var_u.len() {
            return Err(Error::invalid("var_u", "must have one entry per mean_u channel"));
        }
        if self.var_u.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::invalid("var_u", "must be nonnegative"));
        }
        if self.mean_u.iter().any(|m| !m.is_finite()) {
            return Err(Error::invalid("mean_u", "must be finite"));
        }
        if !(self.e1_hat > 0.0 && self.e1_hat <= 1.0) {
            return Err(Error::invalid("e1_hat", "must lie in (0, 1]"));
        }
        Ok(())
    }

    /// `sum_c 2 (var_c + mean_c^2)`.
    pub fn gamma(&self) -> f64 {
        self.mean_u
            .iter()
            .zip(&self.var_u)
            .map(|(m, v)| 2.0 * (v + m * m))
            .sum()
    }
}

fn ceil_count(x: f64) -> u64 {
    // Guard against 16000.000000000002 style noise from the float formula.
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.max(1.0) {
        r as u64
    } else {
        x.ceil() as u64
    }
}

/// Hoeffding count. Zero once `rho1 >= 2`, where the bound is vacuous.
pub fn k1(eps1: f64, rho1: f64) -> Result<u64> {
    if !(eps1 > 0.0 && eps1.is_finite()) {
        return Err(Error::invalid("eps1", "must be positive"));
    }
    if rho1.is_nan() || rho1 <= 0.0 {
        return Err(Error::invalid("rho1", "must be positive"));
    }
    if rho1 >= 2.0 {
        return Ok(0);
    }
    Ok(ceil_count(-(rho1 / 2.0).ln() / (eps1 * eps1)))
}

/// Chebyshev count. Fails when `eps1 >= e1_hat`.
pub fn k2(inputs: &SampleSizeInputs) -> Result<u64> {
    inputs.validate()?;
    if inputs.eps1 >= inputs.e1_hat {
        return Err(Error::WeightMeanBound {
            eps1: inputs.eps1,
            e1_hat: inputs.e1_hat,
        });
    }
    let gap = inputs.e1_hat - inputs.eps1;
    let x = inputs.gamma() / (inputs.rho2 * inputs.eps2 * inputs.eps2) / (gap * gap);
    Ok(ceil_count(x))
}

pub fn required_sample_size(inputs: &SampleSizeInputs) -> Result<u64> {
    Ok(k1(inputs.eps1, inputs.rho1)?.max(k2(inputs)?))
}

/// Sample mean of `exp(-S / lambda)`.
pub fn estimate_e1(costs: &[f64], lambda: f64) -> Result<f64> {
    if costs.is_empty() {
        return Err(Error::invalid("costs", "must not be empty"));
    }
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(Error::invalid("lambda", "must be positive"));
    }
    Ok(costs.iter().map(|s| (-s / lambda).exp()).sum::<f64>() / costs.len() as f64)
}

/// Finite discrete distribution as `(value, probability)` pairs.
pub type Discrete = [(f64, f64)];

fn check_probabilities(x: &Discrete) -> Result<()> {
    let sum: f64 = x.iter().map(|(_, p)| p).sum();
    if (sum - 1.0).abs() > 1e-9 || x.iter().any(|(_, p)| *p < 0.0) {
        return Err(Error::Probabilities { sum });
    }
    Ok(())
}

fn moments(x: &Discrete) -> (f64, f64) {
    let mean: f64 = x.iter().map(|(v, p)| v * p).sum();
    let var = x.iter().map(|(v, p)| p * (v - mean) * (v - mean)).sum();
    (mean, var)
}

/// Exact quantities for the product-variance bound on independent `X`, `Y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductVariance {
    pub var_xy: f64,
    /// `2 Var[X] Var[Y] + 2 Var[Y] E[X]^2`.
    pub bound: f64,
}

impl ProductVariance {
    pub fn holds(&self) -> bool {
        self.var_xy <= self.bound + 1e-12
    }
}

/// Enumerates the product support of independent `x` and `y`.
pub fn product_variance(x: &Discrete, y: &Discrete) -> Result<ProductVariance> {
    check_probabilities(x)?;
    check_probabilities(y)?;
    let (ex, vx) = moments(x);
    let (_, vy) = moments(y);
    let joint: Vec<(f64, f64)> = x
        .iter()
        .flat_map(|&(a, pa)| y.iter().map(move |&(b, pb)| (a * b, pa * pb)))
        .collect();
    let (_, vxy) = moments(&joint);
    Ok(ProductVariance {
        var_xy: vxy,
        bound: 2.0 * vx * vy + 2.0 * vy * ex * ex,
    })
}

/// `Var[XY] <= 2 Var[X] Var[Y] + 2 Var[Y] E[X]^2` for independent discrete
/// `X`, `Y`, up to 1e-12.
pub fn verify_lemma1(x: &Discrete, y: &Discrete) -> Result<bool> {
    Ok(product_variance(x, y)?.holds())
}

/// Sample mean and (population) variance of a weight sample.
pub fn weight_moments(w: &[f64]) -> (f64, f64) {
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    let var = w.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

/// `Var <= (1 - mean) mean <= mean <= 1` for a sample of values in `[0, 1]`.
pub fn lemma2_chain_holds(w: &[f64]) -> bool {
    let (mean, var) = weight_moments(w);
    let tol = 1e-12;
    var <= (1.0 - mean) * mean + tol && (1.0 - mean) * mean <= mean + tol && mean <= 1.0 + tol
}
