//! JSON persistence for fitted models.
//!
//! `name.json` holds the hyperparameters, standardiser statistics and a
//! SHA-256 digest of the raw training data; the data itself sits next to it
//! in `name.train.csv` (columns `x_1..x_M,y_1..y_T`, shortest round-trip
//! floats). Loading re-conditions the posterior, so predictions from a
//! reloaded model match the original bit for bit.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::kernel::KernelSpec;
use super::model::{GprModel, TrainingTrace};
use super::tasks::TaskCovariance;
use crate::dataset::fmt_num;
use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::preprocess::Standardizer;

pub const MODEL_FORMAT: &str = "impactloc-gpr/1";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ModelFile<T: Scalar> {
    pub format: String,
    pub kernel: KernelSpec<T>,
    pub tasks: TaskCovariance<T>,
    pub input_std: Standardizer<T>,
    pub output_std: Standardizer<T>,
    pub log_marginal_likelihood: T,
    pub trace: Option<TrainingTrace>,
    /// file name of the training payload, relative to the model file
    pub train_data: String,
    pub n_features: usize,
    pub n_tasks: usize,
    pub train_digest: String,
}

/// `dir/name.json` → `dir/name.train.csv`.
pub fn train_data_path(model_path: &Path) -> PathBuf {
    let stem = model_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    model_path.with_file_name(format!("{stem}.train.csv"))
}

fn write_payload<T: Scalar>(path: &Path, x: &DMatrix<T>, y: &DMatrix<T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::invalid("training payload", e.to_string()))?;
    let header: Vec<String> = (1..=x.ncols())
        .map(|j| format!("x_{j}"))
        .chain((1..=y.ncols()).map(|j| format!("y_{j}")))
        .collect();
    w.write_record(&header)?;
    for i in 0..x.nrows() {
        let row: Vec<String> = x
            .row(i)
            .iter()
            .chain(y.row(i).iter())
            .map(|v| fmt_num(*v))
            .collect();
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_payload<T: Scalar>(path: &Path, m: usize, t: usize) -> Result<(DMatrix<T>, DMatrix<T>)> {
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| Error::invalid("training payload", e.to_string()))?;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != m + t {
            return Err(Error::Row {
                row: i + 1,
                reason: format!("expected {} columns, got {}", m + t, rec.len()),
            });
        }
        let vals = rec
            .iter()
            .map(|s| {
                s.trim().parse::<f64>().map(T::lit).map_err(|_| Error::Row {
                    row: i + 1,
                    reason: format!("malformed value {s:?}"),
                })
            })
            .collect::<Result<Vec<T>>>()?;
        x.push(vals[..m].to_vec());
        y.push(vals[m..].to_vec());
    }
    Ok((
        from_rows(&x, "model training inputs")?,
        from_rows(&y, "model training outputs")?,
    ))
}

fn from_rows<T: Scalar>(rows: &[Vec<T>], what: &'static str) -> Result<DMatrix<T>> {
    let ncols = rows.first().map(Vec::len).unwrap_or(0);
    if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::invalid(what, "ragged or empty matrix"));
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Hex SHA-256 over the shortest round-trip text of both matrices.
pub fn training_digest<T: Scalar>(x: &DMatrix<T>, y: &DMatrix<T>) -> String {
    let mut h = Sha256::new();
    for m in [x, y] {
        h.update(format!("{}x{};", m.nrows(), m.ncols()));
        for r in m.row_iter() {
            for v in r.iter() {
                h.update(format!("{},", v.to_f64()));
            }
            h.update(";");
        }
    }
    hex::encode(h.finalize())
}

impl<T: Scalar> GprModel<T> {
    /// Model description; `train_data` names the payload written by [`GprModel::save`].
    pub fn to_file(&self, train_data: &str) -> ModelFile<T> {
        ModelFile {
            format: MODEL_FORMAT.to_string(),
            kernel: *self.kernel(),
            tasks: self.tasks().clone(),
            input_std: self.input_standardizer().clone(),
            output_std: self.output_standardizer().clone(),
            log_marginal_likelihood: self.log_marginal_likelihood(),
            trace: self.trace().copied(),
            train_data: train_data.to_string(),
            n_features: self.n_features(),
            n_tasks: self.n_tasks(),
            train_digest: training_digest(self.raw_inputs(), self.raw_outputs()),
        }
    }

    /// Rebuilds a model from its description and raw training data.
    pub fn from_file(f: ModelFile<T>, x: &DMatrix<T>, y: &DMatrix<T>) -> Result<Self> {
        if f.format != MODEL_FORMAT {
            return Err(Error::invalid(
                "model file",
                format!("unsupported format {:?}", f.format),
            ));
        }
        if training_digest(x, y) != f.train_digest {
            return Err(Error::invalid(
                "model file",
                "training data digest mismatch",
            ));
        }
        let mut m = GprModel::condition(x, y, f.kernel, f.tasks, f.input_std, f.output_std)?;
        m.set_trace(f.trace);
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let payload = train_data_path(path);
        write_payload(&payload, self.raw_inputs(), self.raw_outputs())?;
        let name = payload
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let text = serde_json::to_string_pretty(&self.to_file(&name))?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let f: ModelFile<T> = serde_json::from_str(&text)?;
        let payload = path.with_file_name(&f.train_data);
        let (x, y) = read_payload(&payload, f.n_features, f.n_tasks)?;
        Self::from_file(f, &x, &y)
    }
}
