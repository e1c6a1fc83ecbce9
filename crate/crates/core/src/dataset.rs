//! Dataset CSV files and their `<name>.meta.json` sidecar.
//!
//! CSV columns:
//! `impact_id,condition,repetition,x_mm,y_mm,frequency_khz,anchor_index,tdoa_1_ms,...,tdoa_N_ms`
//! with a 0-based `anchor_index`. The sidecar holds plate geometry and sensor
//! coordinates. Floats are written in shortest round-trip form, so a
//! save/load cycle is exact.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::types::{Dataset, ImpactLocation, ImpactRecord, PlateGeometry, SensorArray, TdoaVector};

const FIXED_COLUMNS: [&str; 7] = [
    "impact_id",
    "condition",
    "repetition",
    "x_mm",
    "y_mm",
    "frequency_khz",
    "anchor_index",
];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlateMeta {
    pub lx: f64,
    pub ly: f64,
    pub h: f64,
}

/// Contents of the `<name>.meta.json` sidecar.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub plate: PlateMeta,
    pub sensors: Vec<[f64; 2]>,
    pub ids: Vec<String>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub provenance: String,
}

impl DatasetMeta {
    pub fn from_parts<T: Scalar>(
        plate: &PlateGeometry<T>,
        array: &SensorArray<T>,
        provenance: &str,
    ) -> Self {
        Self {
            plate: PlateMeta {
                lx: plate.length_x.to_f64(),
                ly: plate.length_y.to_f64(),
                h: plate.thickness.to_f64(),
            },
            sensors: array
                .positions()
                .iter()
                .map(|p| [p.x.to_f64(), p.y.to_f64()])
                .collect(),
            ids: array.ids().to_vec(),
            provenance: provenance.to_string(),
        }
    }

    pub fn geometry<T: Scalar>(&self) -> Result<PlateGeometry<T>> {
        PlateGeometry::new(
            T::lit(self.plate.lx),
            T::lit(self.plate.ly),
            T::lit(self.plate.h),
        )
    }

    pub fn array<T: Scalar>(&self) -> Result<SensorArray<T>> {
        let positions = self
            .sensors
            .iter()
            .map(|[x, y]| ImpactLocation::new(T::lit(*x), T::lit(*y)))
            .collect();
        if self.ids.is_empty() {
            SensorArray::from_positions(positions)
        } else {
            SensorArray::new(positions, self.ids.clone())
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Sidecar path for a dataset CSV: `dir/name.csv` → `dir/name.meta.json`.
pub fn meta_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    csv_path.with_file_name(format!("{stem}.meta.json"))
}

pub fn csv_header(n_sensors: usize) -> Vec<String> {
    FIXED_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain((1..=n_sensors).map(|j| format!("tdoa_{j}_ms")))
        .collect()
}

pub(crate) fn fmt_num<T: Scalar>(v: T) -> String {
    format!("{}", v.to_f64())
}

fn record_row<T: Scalar>(r: &ImpactRecord<T>) -> Vec<String> {
    let mut row = vec![
        r.impact_id.clone(),
        r.condition.clone(),
        r.repetition.to_string(),
        fmt_num(r.location.x),
        fmt_num(r.location.y),
        fmt_num(r.tdoa.frequency()),
        r.tdoa.anchor_index().to_string(),
    ];
    row.extend(r.tdoa.values().iter().map(|&v| fmt_num(v)));
    row
}

/// Writes `path` and its sidecar. Refuses empty datasets.
pub fn save_dataset<T: Scalar>(d: &Dataset<T>, path: &Path) -> Result<()> {
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::invalid("dataset path", format!("{other:?}")),
    })?;
    w.write_record(csv_header(d.array().len()))?;
    for r in d.records() {
        w.write_record(record_row(r))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    DatasetMeta::from_parts(d.geometry(), d.array(), &d.provenance).write(&meta_path(path))
}

/// Appends records to an existing dataset file (creating it when absent).
pub fn append_records<T: Scalar>(
    path: &Path,
    geometry: &PlateGeometry<T>,
    array: &SensorArray<T>,
    records: &[ImpactRecord<T>],
    provenance: &str,
) -> Result<Dataset<T>> {
    let mut all = if path.exists() {
        let existing: Dataset<T> = load_dataset(path)?;
        if existing.array().len() != array.len() {
            return Err(Error::Dimension {
                expected: existing.array().len(),
                got: array.len(),
            });
        }
        existing.into_records()
    } else {
        Vec::new()
    };
    all.extend_from_slice(records);
    let d = Dataset::new(*geometry, array.clone(), all, provenance)?;
    save_dataset(&d, path)?;
    Ok(d)
}

fn parse_field<T: Scalar>(row: usize, name: &str, raw: &str) -> Result<T> {
    let v: f64 = raw.trim().parse().map_err(|_| Error::Row {
        row,
        reason: format!("malformed {name} value {raw:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Row {
            row,
            reason: format!("non-finite {name} value {raw:?}"),
        });
    }
    Ok(T::lit(v))
}

/// Parses dataset rows (header included) against a known sensor array.
pub fn parse_records<T: Scalar, R: std::io::Read>(
    reader: R,
    n_sensors: usize,
) -> Result<Vec<ImpactRecord<T>>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() != FIXED_COLUMNS.len() + n_sensors {
        return Err(Error::Row {
            row: 0,
            reason: format!(
                "inconsistent sensor count: header has {} TDOA columns, sidecar lists {} sensors",
                header.len().saturating_sub(FIXED_COLUMNS.len()),
                n_sensors
            ),
        });
    }
    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Row {
            row,
            reason: e.to_string(),
        })?;
        if rec.len() != header.len() {
            return Err(Error::Row {
                row,
                reason: format!(
                    "inconsistent sensor count: {} TDOA values, expected {n_sensors}",
                    rec.len().saturating_sub(FIXED_COLUMNS.len())
                ),
            });
        }
        let repetition: u32 = rec[2].trim().parse().map_err(|_| Error::Row {
            row,
            reason: format!("malformed repetition {:?}", &rec[2]),
        })?;
        let anchor: usize = rec[6].trim().parse().map_err(|_| Error::Row {
            row,
            reason: format!("malformed anchor_index {:?}", &rec[6]),
        })?;
        let x = parse_field::<T>(row, "x_mm", &rec[3])?;
        let y = parse_field::<T>(row, "y_mm", &rec[4])?;
        let freq = parse_field::<T>(row, "frequency_khz", &rec[5])?;
        let values = (0..n_sensors)
            .map(|j| {
                parse_field::<T>(
                    row,
                    &format!("tdoa_{}_ms", j + 1),
                    &rec[FIXED_COLUMNS.len() + j],
                )
            })
            .collect::<Result<Vec<T>>>()?;
        let tdoa = TdoaVector::new(values, anchor, freq).map_err(|e| Error::Row {
            row,
            reason: e.to_string(),
        })?;
        records.push(ImpactRecord {
            impact_id: rec[0].to_string(),
            condition: rec[1].to_string(),
            repetition,
            location: ImpactLocation::new(x, y),
            tdoa,
        });
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(records)
}

/// Loads and validates a dataset CSV together with its sidecar.
pub fn load_dataset<T: Scalar>(path: &Path) -> Result<Dataset<T>> {
    let meta = DatasetMeta::read(&meta_path(path))?;
    let geometry = meta.geometry()?;
    let array = meta.array()?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.iter().all(|b| b.is_ascii_whitespace()) {
        return Err(Error::EmptyDataset);
    }
    let records = parse_records(bytes.as_slice(), array.len())?;
    Dataset::new(geometry, array, records, meta.provenance)
}

#[cfg(test)]
mod tests {
    use super::*;

    const META: &str = r#"{"plate":{"lx":100,"ly":100,"h":4},"sensors":[[0,0],[100,0],[100,100]],"ids":["A","B","C"]}"#;

    fn write_pair(dir: &Path, csv_body: &str) -> PathBuf {
        let p = dir.join("d.csv");
        fs::write(&p, csv_body).unwrap();
        fs::write(dir.join("d.meta.json"), META).unwrap();
        p
    }

    const HEADER: &str = "impact_id,condition,repetition,x_mm,y_mm,frequency_khz,anchor_index,tdoa_1_ms,tdoa_2_ms,tdoa_3_ms\n";

    #[test]
    fn negative_tdoa_names_row() {
        let dir = tempfile::tempdir().unwrap();
        let body = format!("{HEADER}1,REF,1,10,10,1,0,0,0.1,0.2\n2,REF,1,20,10,1,0,0,-0.1,0.2\n");
        let err = load_dataset::<f64>(&write_pair(dir.path(), &body)).unwrap_err();
        match err {
            Error::Row { row, reason } => {
                assert_eq!(row, 2);
                assert!(reason.contains("negative"), "{reason}");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn missing_anchor_zero_and_bad_width() {
        let dir = tempfile::tempdir().unwrap();
        let body = format!("{HEADER}1,REF,1,10,10,1,1,0,0.1,0.2\n");
        let err = load_dataset::<f64>(&write_pair(dir.path(), &body)).unwrap_err();
        assert!(matches!(err, Error::Row { row: 1, .. }), "{err}");
        assert!(err.to_string().contains("anchor"));

        let body = format!("{HEADER}1,REF,1,10,10,1,0,0,0.1\n");
        let err = load_dataset::<f64>(&write_pair(dir.path(), &body)).unwrap_err();
        assert!(
            err.to_string().contains("inconsistent sensor count"),
            "{err}"
        );

        let body = format!("{HEADER}1,REF,1,ten,10,1,0,0,0.1,0.2\n");
        let err = load_dataset::<f64>(&write_pair(dir.path(), &body)).unwrap_err();
        assert!(err.to_string().contains("malformed x_mm"), "{err}");
    }

    #[test]
    fn empty_file_is_empty_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_dataset::<f64>(&write_pair(dir.path(), "")).unwrap_err();
        assert!(matches!(err, Error::EmptyDataset));
        let err = load_dataset::<f64>(&write_pair(dir.path(), HEADER)).unwrap_err();
        assert!(matches!(err, Error::EmptyDataset));
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(
            meta_path(Path::new("/a/ref.csv")),
            PathBuf::from("/a/ref.meta.json")
        );
    }
}
