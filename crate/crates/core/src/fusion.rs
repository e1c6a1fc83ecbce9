//! Bayesian model averaging across per-kernel GP predictions.
//!
//! Weights combine a marginal-likelihood term (softmax of the log-MLs, shared
//! across tasks) with an inverse-variance term computed per task at the
//! query point. The fused variance is the weighted mean of the per-kernel
//! variances; [`VarianceRule::FullBma`] adds the between-model spread.

use std::fmt;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpr::{KernelKind, Prediction};
use crate::num::Scalar;

/// Variances are floored here before inversion (mm²).
pub const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceRule {
    /// Σ w_i σ_i²
    #[default]
    Literal,
    /// Σ w_i (σ_i² + μ_i²) − μ²
    FullBma,
}

impl FromStr for VarianceRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "literal" => Ok(VarianceRule::Literal),
            "full_bma" | "full" => Ok(VarianceRule::FullBma),
            other => Err(Error::invalid(
                "variance rule",
                format!("unknown rule {other:?}"),
            )),
        }
    }
}

impl fmt::Display for VarianceRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VarianceRule::Literal => "literal",
            VarianceRule::FullBma => "full_bma",
        })
    }
}

fn uniform<T: Scalar>(n: usize) -> Vec<T> {
    vec![T::one() / T::lit(n as f64); n]
}

/// Softmax of log marginal likelihoods (equal kernel priors).
pub fn ml_weights<T: Scalar>(lmls: &[T]) -> Result<Vec<T>> {
    if lmls.is_empty() {
        return Err(Error::invalid("ml weights", "no kernels"));
    }
    if let Some(i) = lmls.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(
            "ml weights",
            format!("non-finite log marginal likelihood for kernel {}", i + 1),
        ));
    }
    let max = lmls.iter().copied().fold(lmls[0], |a, b| a.max(b));
    let e: Vec<T> = lmls.iter().map(|&l| (l - max).exp()).collect();
    let s = e.iter().fold(T::zero(), |a, &b| a + b);
    Ok(e.into_iter().map(|v| v / s).collect())
}

/// Inverse-variance weights for one task at one query point.
pub fn unc_weights<T: Scalar>(variances: &[T]) -> Result<Vec<T>> {
    if variances.is_empty() {
        return Err(Error::invalid("uncertainty weights", "no kernels"));
    }
    if let Some(i) = variances
        .iter()
        .position(|v| !v.is_finite() || *v < T::zero())
    {
        return Err(Error::invalid(
            "uncertainty weights",
            format!("invalid variance {} for kernel {}", variances[i], i + 1),
        ));
    }
    let floor = T::lit(VARIANCE_FLOOR);
    if variances.iter().all(|&v| v <= floor) {
        warn!("all predictive variances at the floor; using uniform uncertainty weights");
        return Ok(uniform(variances.len()));
    }
    let inv: Vec<T> = variances.iter().map(|&v| T::one() / v.max(floor)).collect();
    let s = inv.iter().fold(T::zero(), |a, &b| a + b);
    Ok(inv.into_iter().map(|v| v / s).collect())
}

/// Renormalised elementwise product of two probability vectors.
pub fn combine_weights<T: Scalar>(w_ml: &[T], w_unc: &[T]) -> Result<Vec<T>> {
    if w_ml.len() != w_unc.len() || w_ml.is_empty() {
        return Err(Error::Dimension {
            expected: w_ml.len(),
            got: w_unc.len(),
        });
    }
    let prod: Vec<T> = w_ml.iter().zip(w_unc).map(|(&a, &b)| a * b).collect();
    let s = prod.iter().fold(T::zero(), |a, &b| a + b);
    if !(s > T::zero()) {
        warn!("all combined weight products are zero; using uniform weights");
        return Ok(uniform(prod.len()));
    }
    Ok(prod.into_iter().map(|v| v / s).collect())
}

/// One kernel's contribution: its model evidence and prediction at x*.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct KernelPrediction<T: Scalar> {
    pub kernel: KernelKind,
    pub log_marginal_likelihood: T,
    pub prediction: Prediction<T>,
}

/// `ml` is shared across tasks; `unc[a]` and `combined[a]` are the weights
/// for task `a`, each indexed like `kernels`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FusionWeights<T: Scalar> {
    pub kernels: Vec<KernelKind>,
    pub ml: Vec<T>,
    pub unc: Vec<Vec<T>>,
    pub combined: Vec<Vec<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FusedPrediction<T: Scalar> {
    pub per_kernel: Vec<KernelPrediction<T>>,
    pub weights: FusionWeights<T>,
    pub rule: VarianceRule,
    pub mean: Vec<T>,
    pub variance: Vec<T>,
}

fn n_tasks<T: Scalar>(preds: &[KernelPrediction<T>]) -> Result<usize> {
    let first = preds
        .first()
        .ok_or_else(|| Error::invalid("fusion", "no kernel predictions"))?;
    let t = first.prediction.mean.len();
    for p in preds {
        if p.prediction.mean.len() != t || p.prediction.variance.len() != t {
            return Err(Error::Dimension {
                expected: t,
                got: p.prediction.mean.len(),
            });
        }
    }
    Ok(t)
}

pub fn fusion_weights<T: Scalar>(preds: &[KernelPrediction<T>]) -> Result<FusionWeights<T>> {
    let t = n_tasks(preds)?;
    let lmls: Vec<T> = preds.iter().map(|p| p.log_marginal_likelihood).collect();
    let ml = ml_weights(&lmls)?;
    let mut unc = Vec::with_capacity(t);
    let mut combined = Vec::with_capacity(t);
    for a in 0..t {
        let vars: Vec<T> = preds.iter().map(|p| p.prediction.variance[a]).collect();
        let u = unc_weights(&vars)?;
        combined.push(combine_weights(&ml, &u)?);
        unc.push(u);
    }
    Ok(FusionWeights {
        kernels: preds.iter().map(|p| p.kernel).collect(),
        ml,
        unc,
        combined,
    })
}

/// Weighted per-task combination of the kernel predictions.
pub fn fuse<T: Scalar>(
    preds: &[KernelPrediction<T>],
    weights: &FusionWeights<T>,
    rule: VarianceRule,
) -> Result<FusedPrediction<T>> {
    let t = n_tasks(preds)?;
    let kernels: Vec<KernelKind> = preds.iter().map(|p| p.kernel).collect();
    if kernels != weights.kernels {
        return Err(Error::invalid(
            "fusion",
            format!(
                "kernel sets differ: predictions {:?}, weights {:?}",
                kernels, weights.kernels
            ),
        ));
    }
    if weights.combined.len() != t {
        return Err(Error::Dimension {
            expected: t,
            got: weights.combined.len(),
        });
    }
    let mut mean = Vec::with_capacity(t);
    let mut variance = Vec::with_capacity(t);
    for (a, w) in weights.combined.iter().enumerate() {
        let mu = preds
            .iter()
            .zip(w)
            .fold(T::zero(), |acc, (p, &wi)| acc + wi * p.prediction.mean[a]);
        let var = match rule {
            VarianceRule::Literal => preds.iter().zip(w).fold(T::zero(), |acc, (p, &wi)| {
                acc + wi * p.prediction.variance[a]
            }),
            VarianceRule::FullBma => preds.iter().zip(w).fold(T::zero(), |acc, (p, &wi)| {
                let d = p.prediction.mean[a] - mu;
                acc + wi * (p.prediction.variance[a] + d * d)
            }),
        };
        mean.push(mu);
        variance.push(var);
    }
    Ok(FusedPrediction {
        per_kernel: preds.to_vec(),
        weights: weights.clone(),
        rule,
        mean,
        variance,
    })
}

/// [`fusion_weights`] followed by [`fuse`].
pub fn fuse_predictions<T: Scalar>(
    preds: &[KernelPrediction<T>],
    rule: VarianceRule,
) -> Result<FusedPrediction<T>> {
    let w = fusion_weights(preds)?;
    fuse(preds, &w, rule)
}
