//! Sample standardisation (SS) and feature standardisation (FS).
//!
//! SS divides every row by its Euclidean norm and keeps no state. FS shifts
//! and scales every column to zero mean and unit population variance using
//! statistics fitted on training data.

use std::fmt;
use std::str::FromStr;

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StdMode {
    Ss,
    Fs,
    None,
}

impl FromStr for StdMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ss" => Ok(StdMode::Ss),
            "fs" => Ok(StdMode::Fs),
            "none" => Ok(StdMode::None),
            other => Err(Error::invalid(
                "standardisation mode",
                format!("unknown mode {other:?}"),
            )),
        }
    }
}

impl fmt::Display for StdMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StdMode::Ss => "ss",
            StdMode::Fs => "fs",
            StdMode::None => "none",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Standardizer<T: Scalar> {
    pub mode: StdMode,
    #[serde(default)]
    pub fitted_means: Vec<T>,
    #[serde(default)]
    pub fitted_stds: Vec<T>,
}

impl<T: Scalar> Standardizer<T> {
    pub fn new(mode: StdMode) -> Self {
        Self {
            mode,
            fitted_means: Vec::new(),
            fitted_stds: Vec::new(),
        }
    }

    pub fn is_fitted(&self) -> bool {
        self.mode != StdMode::Fs || !self.fitted_stds.is_empty()
    }

    /// Fits column statistics (FS only; population standard deviation).
    pub fn fit(&self, x: &DMatrix<T>) -> Result<Self> {
        match self.mode {
            StdMode::Ss | StdMode::None => Ok(Self::new(self.mode)),
            StdMode::Fs => {
                let n = x.nrows();
                if n < 2 {
                    return Err(Error::invalid(
                        "feature standardisation",
                        format!("needs at least 2 rows, got {n}"),
                    ));
                }
                let nf = T::lit(n as f64);
                let mut means = Vec::with_capacity(x.ncols());
                let mut stds = Vec::with_capacity(x.ncols());
                for (j, col) in x.column_iter().enumerate() {
                    let mean = col.iter().fold(T::zero(), |a, &v| a + v) / nf;
                    let var = col
                        .iter()
                        .fold(T::zero(), |a, &v| a + (v - mean) * (v - mean))
                        / nf;
                    let std = var.sqrt();
                    if !(std > mean.abs() * T::lit(1e-12)) {
                        return Err(Error::ZeroVariance { column: j + 1 });
                    }
                    means.push(mean);
                    stds.push(std);
                }
                Ok(Self {
                    mode: StdMode::Fs,
                    fitted_means: means,
                    fitted_stds: stds,
                })
            }
        }
    }

    fn check_fs(&self, ncols: usize) -> Result<()> {
        if self.fitted_stds.is_empty() {
            return Err(Error::NotFitted);
        }
        if self.fitted_stds.len() != ncols {
            return Err(Error::Dimension {
                expected: self.fitted_stds.len(),
                got: ncols,
            });
        }
        Ok(())
    }

    /// Applies the transform to every row of `x`.
    pub fn transform(&self, x: &DMatrix<T>) -> Result<DMatrix<T>> {
        let mut out = x.clone();
        match self.mode {
            StdMode::None => {}
            StdMode::Ss => {
                for (i, mut row) in out.row_iter_mut().enumerate() {
                    let norm = row.norm();
                    if norm == T::zero() {
                        warn!("row {} has zero norm (singularity-point TDOA); mapped to the zero vector", i + 1);
                    } else {
                        row /= norm;
                    }
                }
            }
            StdMode::Fs => {
                self.check_fs(x.ncols())?;
                for (j, mut col) in out.column_iter_mut().enumerate() {
                    let (m, s) = (self.fitted_means[j], self.fitted_stds[j]);
                    col.apply(|v| *v = (*v - m) / s);
                }
            }
        }
        Ok(out)
    }

    pub fn transform_vector(&self, x: &[T]) -> Result<Vec<T>> {
        let m = DMatrix::from_row_slice(1, x.len(), x);
        Ok(self.transform(&m)?.iter().copied().collect())
    }

    /// Maps standardised predictions back to output units: y = y_std·σ + μ and
    /// v = v_std·σ² per column.
    pub fn inverse_transform_outputs(
        &self,
        y: &DMatrix<T>,
        var: &DMatrix<T>,
    ) -> Result<(DMatrix<T>, DMatrix<T>)> {
        if y.shape() != var.shape() {
            return Err(Error::Dimension {
                expected: y.len(),
                got: var.len(),
            });
        }
        match self.mode {
            StdMode::None => Ok((y.clone(), var.clone())),
            StdMode::Ss => Err(Error::invalid(
                "output standardisation",
                "sample standardisation is not invertible on outputs",
            )),
            StdMode::Fs => {
                self.check_fs(y.ncols())?;
                let mut ym = y.clone();
                let mut vm = var.clone();
                for j in 0..y.ncols() {
                    let (m, s) = (self.fitted_means[j], self.fitted_stds[j]);
                    ym.column_mut(j).apply(|v| *v = *v * s + m);
                    vm.column_mut(j).apply(|v| *v *= s * s);
                }
                Ok((ym, vm))
            }
        }
    }
}
