//! Low-rank task covariance K_tasks = B·Bᵀ + diag(v) coupling the x and y
//! coordinate outputs.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TaskCovariance<T: Scalar> {
    /// T×r factor, row-major
    pub factor: Vec<Vec<T>>,
    /// log of the per-task diagonal term v
    pub log_diag: Vec<T>,
}

impl<T: Scalar> TaskCovariance<T> {
    /// B = I (T×rank, truncated), v = `diag`.
    pub fn identity(tasks: usize, rank: usize, diag: T) -> Result<Self> {
        if tasks == 0 || rank == 0 || rank > tasks {
            return Err(Error::invalid(
                "task covariance",
                format!("rank must satisfy 1 <= r <= T, got r={rank}, T={tasks}"),
            ));
        }
        if !(diag > T::zero()) {
            return Err(Error::invalid(
                "task covariance",
                "diagonal must be positive",
            ));
        }
        let factor = (0..tasks)
            .map(|i| {
                (0..rank)
                    .map(|j| if i == j { T::one() } else { T::zero() })
                    .collect()
            })
            .collect();
        Ok(Self {
            factor,
            log_diag: vec![diag.ln(); tasks],
        })
    }

    pub fn from_parts(factor: &DMatrix<T>, diag: &[T]) -> Result<Self> {
        if factor.nrows() != diag.len() || factor.ncols() == 0 || factor.ncols() > factor.nrows() {
            return Err(Error::invalid(
                "task covariance",
                "factor must be T×r with 1 <= r <= T",
            ));
        }
        if diag.iter().any(|d| !(*d > T::zero())) {
            return Err(Error::invalid(
                "task covariance",
                "diagonal must be positive",
            ));
        }
        Ok(Self {
            factor: factor
                .row_iter()
                .map(|r| r.iter().copied().collect())
                .collect(),
            log_diag: diag.iter().map(|d| d.ln()).collect(),
        })
    }

    pub fn n_tasks(&self) -> usize {
        self.factor.len()
    }

    pub fn rank(&self) -> usize {
        self.factor.first().map_or(0, Vec::len)
    }

    pub fn factor_matrix(&self) -> DMatrix<T> {
        DMatrix::from_fn(self.n_tasks(), self.rank(), |i, j| self.factor[i][j])
    }

    pub fn diag(&self) -> DVector<T> {
        DVector::from_iterator(self.n_tasks(), self.log_diag.iter().map(|v| v.exp()))
    }

    /// K_tasks = B·Bᵀ + diag(v)
    pub fn matrix(&self) -> DMatrix<T> {
        let b = self.factor_matrix();
        let mut k = &b * b.transpose();
        for (i, v) in self.diag().iter().enumerate() {
            k[(i, i)] += *v;
        }
        k
    }

    pub(crate) fn n_params(&self) -> usize {
        self.n_tasks() * self.rank() + self.n_tasks()
    }

    /// Factor entries (row-major) followed by log-diagonal entries.
    pub(crate) fn params(&self) -> Vec<T> {
        self.factor
            .iter()
            .flatten()
            .copied()
            .chain(self.log_diag.iter().copied())
            .collect()
    }

    pub(crate) fn set_params(&mut self, p: &[T]) {
        let (t, r) = (self.n_tasks(), self.rank());
        for i in 0..t {
            for j in 0..r {
                self.factor[i][j] = p[i * r + j];
            }
        }
        self.log_diag.copy_from_slice(&p[t * r..t * r + t]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_initialisation() {
        let t = TaskCovariance::<f64>::identity(2, 2, 1e-2).unwrap();
        let k = t.matrix();
        assert!((k[(0, 0)] - 1.01).abs() < 1e-15);
        assert_eq!(k[(0, 1)], 0.0);
        assert!(TaskCovariance::<f64>::identity(2, 3, 1e-2).is_err());
    }

    #[test]
    fn params_round_trip() {
        let mut t = TaskCovariance::<f64>::identity(2, 1, 0.5).unwrap();
        let p = vec![0.3, -0.7, 0.1, 0.2];
        t.set_params(&p);
        assert_eq!(t.params(), p);
        let k = t.matrix();
        assert!((k[(0, 1)] + 0.21).abs() < 1e-15);
        assert!((k[(1, 1)] - (0.49 + 0.2f64.exp())).abs() < 1e-15);
        assert!(k.clone().cholesky().is_some());
        assert_eq!(k, k.transpose());
    }
}
