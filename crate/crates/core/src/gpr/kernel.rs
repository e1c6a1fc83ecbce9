//! Input kernels over TDOA vectors: RBF, cosine similarity and their product.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, RowDVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Rbf,
    Cos,
    Comp,
}

impl KernelKind {
    pub const ALL: [KernelKind; 3] = [KernelKind::Rbf, KernelKind::Cos, KernelKind::Comp];

    pub fn uses_rbf(self) -> bool {
        matches!(self, KernelKind::Rbf | KernelKind::Comp)
    }

    pub fn uses_cos(self) -> bool {
        matches!(self, KernelKind::Cos | KernelKind::Comp)
    }

    pub fn label(self) -> &'static str {
        match self {
            KernelKind::Rbf => "RBF",
            KernelKind::Cos => "COS",
            KernelKind::Comp => "COMP",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rbf" => Ok(KernelKind::Rbf),
            "cos" => Ok(KernelKind::Cos),
            "comp" => Ok(KernelKind::Comp),
            other => Err(Error::invalid(
                "kernel",
                format!("unknown kernel {other:?}"),
            )),
        }
    }
}

/// Kernel choice with log-space hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct KernelSpec<T: Scalar> {
    pub kind: KernelKind,
    pub log_lengthscale_rbf: T,
    pub log_scale_cos: T,
    pub log_noise_variance: T,
}

impl<T: Scalar> KernelSpec<T> {
    pub fn new(kind: KernelKind) -> Self {
        Self {
            kind,
            log_lengthscale_rbf: T::zero(),
            log_scale_cos: T::zero(),
            log_noise_variance: T::lit(1e-2).ln(),
        }
    }

    pub fn lengthscale_rbf(&self) -> T {
        self.log_lengthscale_rbf.exp()
    }

    pub fn scale_cos(&self) -> T {
        self.log_scale_cos.exp()
    }

    pub fn noise_variance(&self) -> T {
        self.log_noise_variance.exp()
    }
}

/// Pairwise quantities shared by all kernel kinds.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PairTerms<T> {
    pub sq_dist: T,
    pub cosine: T,
}

pub(crate) fn pair_terms<T: Scalar>(x: &[T], y: &[T], x_norm: T, y_norm: T) -> PairTerms<T> {
    let mut sq = T::zero();
    let mut dot = T::zero();
    for (&a, &b) in x.iter().zip(y) {
        let d = a - b;
        sq += d * d;
        dot += a * b;
    }
    let cosine = if x_norm == T::zero() || y_norm == T::zero() {
        T::zero()
    } else {
        dot / (x_norm * y_norm)
    };
    PairTerms {
        sq_dist: sq,
        cosine,
    }
}

/// Kernel value and its derivatives w.r.t. (log l_rbf, log l_cos).
pub(crate) fn value_and_grad<T: Scalar>(spec: &KernelSpec<T>, p: PairTerms<T>) -> (T, T, T) {
    let two = T::lit(2.0);
    match spec.kind {
        KernelKind::Rbf => {
            let l2 = (spec.log_lengthscale_rbf * two).exp();
            let k = (-p.sq_dist / (two * l2)).exp();
            (k, k * p.sq_dist / l2, T::zero())
        }
        KernelKind::Cos => {
            let s2 = (spec.log_scale_cos * two).exp();
            let k = s2 * p.cosine;
            (k, T::zero(), two * k)
        }
        KernelKind::Comp => {
            let l2 = (spec.log_lengthscale_rbf * two).exp();
            let s2 = (spec.log_scale_cos * two).exp();
            let rbf = (-p.sq_dist / (two * l2)).exp();
            let k = rbf * s2 * p.cosine;
            (k, k * p.sq_dist / l2, two * k)
        }
    }
}

/// k(x, x') for the given kernel.
pub fn kernel_eval<T: Scalar>(spec: &KernelSpec<T>, x: &[T], x2: &[T]) -> Result<T> {
    if x.len() != x2.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            got: x2.len(),
        });
    }
    let terms = pair_terms(x, x2, crate::num::norm(x), crate::num::norm(x2));
    Ok(value_and_grad(spec, terms).0)
}

fn row_norms<T: Scalar>(x: &DMatrix<T>) -> Vec<T> {
    x.row_iter().map(|r| r.norm()).collect()
}

fn row_vec<T: Scalar>(r: RowDVector<T>) -> Vec<T> {
    r.iter().copied().collect()
}

/// Input kernel matrix between the rows of `a` and `b`.
pub fn input_kernel_matrix<T: Scalar>(
    spec: &KernelSpec<T>,
    a: &DMatrix<T>,
    b: &DMatrix<T>,
) -> Result<DMatrix<T>> {
    if a.ncols() != b.ncols() {
        return Err(Error::Dimension {
            expected: a.ncols(),
            got: b.ncols(),
        });
    }
    let (na, nb) = (row_norms(a), row_norms(b));
    let ra: Vec<Vec<T>> = a.row_iter().map(|r| row_vec(r.into_owned())).collect();
    let rb: Vec<Vec<T>> = b.row_iter().map(|r| row_vec(r.into_owned())).collect();
    Ok(DMatrix::from_fn(a.nrows(), b.nrows(), |i, j| {
        value_and_grad(spec, pair_terms(&ra[i], &rb[j], na[i], nb[j])).0
    }))
}

/// Symmetric training kernel matrix and its derivatives w.r.t. the two
/// log-scale input hyperparameters.
pub(crate) fn train_kernel_with_grads<T: Scalar>(
    spec: &KernelSpec<T>,
    x: &DMatrix<T>,
) -> (DMatrix<T>, DMatrix<T>, DMatrix<T>) {
    let n = x.nrows();
    let norms = row_norms(x);
    let rows: Vec<Vec<T>> = x.row_iter().map(|r| row_vec(r.into_owned())).collect();
    let mut k = DMatrix::zeros(n, n);
    let mut dl = DMatrix::zeros(n, n);
    let mut dc = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let (v, gl, gc) =
                value_and_grad(spec, pair_terms(&rows[i], &rows[j], norms[i], norms[j]));
            k[(i, j)] = v;
            k[(j, i)] = v;
            dl[(i, j)] = gl;
            dl[(j, i)] = gl;
            dc[(i, j)] = gc;
            dc[(j, i)] = gc;
        }
    }
    (k, dl, dc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(kind: KernelKind, l: f64, c: f64) -> KernelSpec<f64> {
        KernelSpec {
            kind,
            log_lengthscale_rbf: l.ln(),
            log_scale_cos: c.ln(),
            log_noise_variance: 0.0,
        }
    }

    #[test]
    fn rbf_self_similarity_is_one() {
        for l in [0.1, 1.0, 30.0] {
            assert_eq!(
                kernel_eval(
                    &spec(KernelKind::Rbf, l, 1.0),
                    &[0.3, 2.0, 0.0],
                    &[0.3, 2.0, 0.0]
                )
                .unwrap(),
                1.0
            );
        }
    }

    #[test]
    fn cos_is_scale_free() {
        let s = spec(KernelKind::Cos, 1.0, 1.7);
        let x = [0.0, 0.2, 0.5];
        let v = kernel_eval(&s, &x, &[0.0, 0.6, 1.5]).unwrap();
        assert!((v - 1.7 * 1.7).abs() < 1e-12);
    }

    #[test]
    fn comp_hand_value() {
        let v = kernel_eval(&spec(KernelKind::Comp, 1.0, 1.0), &[0.6, 0.8], &[0.8, 0.6]).unwrap();
        assert!((v - (-0.04f64).exp() * 0.96).abs() < 1e-15);
        assert!((v - 0.9224).abs() < 1e-4);
    }

    #[test]
    fn zero_vector_has_zero_cosine() {
        let s = spec(KernelKind::Comp, 1.0, 1.0);
        assert_eq!(kernel_eval(&s, &[0.0, 0.0], &[0.6, 0.8]).unwrap(), 0.0);
        assert_eq!(
            kernel_eval(&spec(KernelKind::Cos, 1.0, 1.0), &[0.0, 0.0], &[0.0, 0.0]).unwrap(),
            0.0
        );
        assert_eq!(
            kernel_eval(&spec(KernelKind::Rbf, 1.0, 1.0), &[0.0, 0.0], &[0.0, 0.0]).unwrap(),
            1.0
        );
    }

    #[test]
    fn dimension_mismatch() {
        assert!(kernel_eval(&spec(KernelKind::Rbf, 1.0, 1.0), &[0.0, 1.0], &[0.0]).is_err());
    }

    #[test]
    fn parse_kinds() {
        assert_eq!("COMP".parse::<KernelKind>().unwrap(), KernelKind::Comp);
        assert!("matern".parse::<KernelKind>().is_err());
    }
}
