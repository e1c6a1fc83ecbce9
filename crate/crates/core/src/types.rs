//! Domain value types: plate, sensors, impacts and TDOA vectors.
//!
//! Units are fixed across the crate: millimetres, milliseconds, kilohertz and
//! newtons. Conversions happen only at I/O boundaries.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Scalar;

/// TDOA components below this value (ms) are clamped to exactly zero.
pub const TDOA_CLAMP_MS: f64 = 1e-9;

/// Rectangular plate, all dimensions in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PlateGeometry<T: Scalar> {
    pub length_x: T,
    pub length_y: T,
    pub thickness: T,
}

impl<T: Scalar> PlateGeometry<T> {
    pub fn new(length_x: T, length_y: T, thickness: T) -> Result<Self> {
        for (name, v) in [("lx", length_x), ("ly", length_y), ("h", thickness)] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::invalid(
                    "plate geometry",
                    format!("{name} must be strictly positive, got {v}"),
                ));
            }
        }
        Ok(Self {
            length_x,
            length_y,
            thickness,
        })
    }

    pub fn contains(&self, p: &ImpactLocation<T>) -> bool {
        p.x >= T::zero() && p.y >= T::zero() && p.x <= self.length_x && p.y <= self.length_y
    }
}

/// A point on the plate surface in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ImpactLocation<T: Scalar> {
    pub x: T,
    pub y: T,
}

impl<T: Scalar> ImpactLocation<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Self) -> T {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }

    /// Direction of travel from `self` towards `other`, in radians.
    pub fn bearing_to(&self, other: &Self) -> T {
        (other.y - self.y).atan2(other.x - self.x)
    }
}

/// Ordered set of sensors bonded to the plate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SensorArray<T: Scalar> {
    positions: Vec<ImpactLocation<T>>,
    ids: Vec<String>,
}

impl<T: Scalar> SensorArray<T> {
    pub fn new(positions: Vec<ImpactLocation<T>>, ids: Vec<String>) -> Result<Self> {
        if positions.len() < 3 {
            return Err(Error::invalid(
                "sensor array",
                format!("at least 3 sensors required, got {}", positions.len()),
            ));
        }
        if ids.len() != positions.len() {
            return Err(Error::invalid(
                "sensor array",
                format!("{} ids for {} sensors", ids.len(), positions.len()),
            ));
        }
        for (i, a) in positions.iter().enumerate() {
            if !a.x.is_finite() || !a.y.is_finite() {
                return Err(Error::invalid(
                    "sensor array",
                    format!("sensor {} has non-finite coordinates", ids[i]),
                ));
            }
            for (j, b) in positions.iter().enumerate().skip(i + 1) {
                if !(a.distance(b) > T::zero()) {
                    return Err(Error::invalid(
                        "sensor array",
                        format!("sensors {} and {} coincide", ids[i], ids[j]),
                    ));
                }
            }
        }
        Ok(Self { positions, ids })
    }

    /// Sensors labelled `S1..SN` in the given order.
    pub fn from_positions(positions: Vec<ImpactLocation<T>>) -> Result<Self> {
        let ids = (1..=positions.len()).map(|i| format!("S{i}")).collect();
        Self::new(positions, ids)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[ImpactLocation<T>] {
        &self.positions
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Sub-array in the order given by `indices` (0-based).
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut positions = Vec::with_capacity(indices.len());
        let mut ids = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::invalid(
                    "sensor subset",
                    format!("index {i} out of range for {} sensors", self.len()),
                ));
            }
            positions.push(self.positions[i]);
            ids.push(self.ids[i].clone());
        }
        Self::new(positions, ids)
    }

    pub fn check_inside(&self, plate: &PlateGeometry<T>) -> Result<()> {
        for (p, id) in self.positions.iter().zip(&self.ids) {
            if !plate.contains(p) {
                return Err(Error::invalid(
                    "sensor array",
                    format!("sensor {id} at ({}, {}) lies outside the plate", p.x, p.y),
                ));
            }
        }
        Ok(())
    }
}

/// Non-negative arrival-time differences (ms) relative to the first-hit sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TdoaVector<T: Scalar> {
    values: Vec<T>,
    anchor_index: usize,
    frequency: T,
}

impl<T: Scalar> TdoaVector<T> {
    /// Validates an already anchored vector.
    pub fn new(values: Vec<T>, anchor_index: usize, frequency: T) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("tdoa", "empty vector"));
        }
        if anchor_index >= values.len() {
            return Err(Error::invalid(
                "tdoa",
                format!(
                    "anchor index {anchor_index} out of range for {} sensors",
                    values.len()
                ),
            ));
        }
        if !(frequency > T::zero()) || !frequency.is_finite() {
            return Err(Error::invalid(
                "tdoa",
                format!("frequency must be positive, got {frequency}"),
            ));
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::invalid(
                    "tdoa",
                    format!("component {} is not finite", i + 1),
                ));
            }
            if *v < T::zero() {
                return Err(Error::invalid(
                    "tdoa",
                    format!("negative TDOA {v} at sensor {}", i + 1),
                ));
            }
        }
        if values[anchor_index] != T::zero() {
            return Err(Error::invalid(
                "tdoa",
                format!(
                    "missing anchor zero: component {} is {}",
                    anchor_index + 1,
                    values[anchor_index]
                ),
            ));
        }
        Ok(Self {
            values,
            anchor_index,
            frequency,
        })
    }

    /// Builds a TDOA vector from raw arrival times: the earliest arrival becomes
    /// the anchor (lowest index on ties) and tiny residues are clamped to zero.
    pub fn from_arrivals(arrivals: &[T], frequency: T) -> Result<Self> {
        if arrivals.is_empty() {
            return Err(Error::invalid("tdoa", "no arrival times"));
        }
        if let Some(i) = arrivals.iter().position(|t| !t.is_finite()) {
            return Err(Error::invalid(
                "tdoa",
                format!("arrival {} is not finite", i + 1),
            ));
        }
        let mut anchor = 0;
        for (i, &t) in arrivals.iter().enumerate() {
            if t < arrivals[anchor] {
                anchor = i;
            }
        }
        let t_min = arrivals[anchor];
        let clamp = T::lit(TDOA_CLAMP_MS);
        let values = arrivals
            .iter()
            .map(|&t| {
                let d = t - t_min;
                if d < clamp {
                    T::zero()
                } else {
                    d
                }
            })
            .collect();
        Self::new(values, anchor, frequency)
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn anchor_index(&self) -> usize {
        self.anchor_index
    }

    pub fn frequency(&self) -> T {
        self.frequency
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Multiplies every component by `factor` (> 0) and relabels the frequency.
    pub(crate) fn rescaled(&self, factor: T, frequency: T) -> Self {
        Self {
            values: self.values.iter().map(|&v| v * factor).collect(),
            anchor_index: self.anchor_index,
            frequency,
        }
    }

    /// Keeps the given sensors and re-anchors on the earliest of them.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let picked = indices
            .iter()
            .map(|&i| {
                self.values.get(i).copied().ok_or_else(|| {
                    Error::invalid(
                        "sensor subset",
                        format!("index {i} out of range for {} sensors", self.len()),
                    )
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_arrivals(&picked, self.frequency)
    }
}

/// One impact event with its measured or simulated TDOA vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ImpactRecord<T: Scalar> {
    pub impact_id: String,
    pub condition: String,
    pub repetition: u32,
    pub location: ImpactLocation<T>,
    pub tdoa: TdoaVector<T>,
}

/// Validated collection of impact records sharing one plate and sensor array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Dataset<T: Scalar> {
    geometry: PlateGeometry<T>,
    array: SensorArray<T>,
    records: Vec<ImpactRecord<T>>,
    pub provenance: String,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(
        geometry: PlateGeometry<T>,
        array: SensorArray<T>,
        records: Vec<ImpactRecord<T>>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        array.check_inside(&geometry)?;
        for (row, r) in records.iter().enumerate() {
            if r.tdoa.len() != array.len() {
                return Err(Error::Row {
                    row: row + 1,
                    reason: format!(
                        "inconsistent sensor count: {} TDOA values for {} sensors",
                        r.tdoa.len(),
                        array.len()
                    ),
                });
            }
        }
        Ok(Self {
            geometry,
            array,
            records,
            provenance: provenance.into(),
        })
    }

    pub fn geometry(&self) -> &PlateGeometry<T> {
        &self.geometry
    }

    pub fn array(&self) -> &SensorArray<T> {
        &self.array
    }

    pub fn records(&self) -> &[ImpactRecord<T>] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn into_records(self) -> Vec<ImpactRecord<T>> {
        self.records
    }

    /// N×M matrix of TDOA values, one row per record.
    pub fn inputs(&self) -> DMatrix<T> {
        let m = self.array.len();
        DMatrix::from_fn(self.records.len(), m, |i, j| {
            self.records[i].tdoa.values()[j]
        })
    }

    /// N×2 matrix of impact coordinates.
    pub fn outputs(&self) -> DMatrix<T> {
        DMatrix::from_fn(self.records.len(), 2, |i, j| {
            let p = &self.records[i].location;
            if j == 0 {
                p.x
            } else {
                p.y
            }
        })
    }

    /// Same dataset with fewer records, kept in the order of `indices`.
    pub fn with_records(&self, indices: &[usize]) -> Result<Self> {
        let records = indices
            .iter()
            .map(|&i| {
                self.records.get(i).cloned().ok_or_else(|| {
                    Error::invalid("record subset", format!("index {i} out of range"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(
            self.geometry,
            self.array.clone(),
            records,
            self.provenance.clone(),
        )
    }

    /// Restricts every record to a sensor subset and re-anchors the TDOAs.
    pub fn select_sensors(&self, indices: &[usize]) -> Result<Self> {
        let array = self.array.select(indices)?;
        let records = self
            .records
            .iter()
            .map(|r| {
                Ok(ImpactRecord {
                    tdoa: r.tdoa.select(indices)?,
                    ..r.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.geometry, array, records, self.provenance.clone())
    }

    /// Collapses repeated impacts (same id and condition) into one record whose
    /// TDOA is the re-anchored mean of the repetitions.
    pub fn average_repetitions(&self) -> Result<Self> {
        let mut groups: Vec<(String, String, Vec<&ImpactRecord<T>>)> = Vec::new();
        for r in &self.records {
            match groups
                .iter_mut()
                .find(|(id, cond, _)| *id == r.impact_id && *cond == r.condition)
            {
                Some((_, _, members)) => members.push(r),
                None => groups.push((r.impact_id.clone(), r.condition.clone(), vec![r])),
            }
        }
        let m = self.array.len();
        let records = groups
            .into_iter()
            .map(|(impact_id, condition, members)| {
                let n = T::lit(members.len() as f64);
                let mut mean = vec![T::zero(); m];
                let (mut x, mut y) = (T::zero(), T::zero());
                for r in &members {
                    for (acc, &v) in mean.iter_mut().zip(r.tdoa.values()) {
                        *acc += v;
                    }
                    x += r.location.x;
                    y += r.location.y;
                }
                mean.iter_mut().for_each(|v| *v /= n);
                Ok(ImpactRecord {
                    impact_id,
                    condition,
                    repetition: 0,
                    location: ImpactLocation::new(x / n, y / n),
                    tdoa: TdoaVector::from_arrivals(&mean, members[0].tdoa.frequency())?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(
            self.geometry,
            self.array.clone(),
            records,
            self.provenance.clone(),
        )
    }
}
