//! Desk-scale reproduction of the test plate: geometry, sensor layout, the
//! 7 × 5 reference grid and dataset generation under temperature / noise
//! scenarios.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gvp::GvpModel;
use super::tdoa::{arrival_times, noisy_tdoa};
use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::types::{Dataset, ImpactLocation, ImpactRecord, PlateGeometry, SensorArray};

/// 290 × 200 × 4 mm composite plate.
pub fn default_plate<T: Scalar>() -> PlateGeometry<T> {
    PlateGeometry {
        length_x: T::lit(290.0),
        length_y: T::lit(200.0),
        thickness: T::lit(4.0),
    }
}

/// Six sensors: S1–S4 on the corners of a rectangle centred on the grid,
/// S5 and S6 placed irregularly so the full array has no singularity point.
pub const DEFAULT_SENSORS_MM: [[f64; 2]; 6] = [
    [40.0, 40.0],
    [250.0, 40.0],
    [250.0, 160.0],
    [40.0, 160.0],
    [110.0, 20.0],
    [215.0, 185.0],
];

pub fn default_sensor_array<T: Scalar>() -> SensorArray<T> {
    SensorArray::from_positions(
        DEFAULT_SENSORS_MM
            .iter()
            .map(|[x, y]| ImpactLocation::new(T::lit(*x), T::lit(*y)))
            .collect(),
    )
    .expect("fixed layout is valid")
}

/// Regular impact grid; ids run row-major from the minimum-y row, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub spacing: f64,
    pub origin_x: f64,
    pub origin_y: f64,
}

impl GridSpec {
    /// 7 columns × 5 rows at 20 mm pitch, centred on the plate.
    pub fn standard() -> Self {
        Self {
            nx: 7,
            ny: 5,
            spacing: 20.0,
            origin_x: 85.0,
            origin_y: 60.0,
        }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn locations<T: Scalar>(&self) -> Vec<(String, ImpactLocation<T>)> {
        let mut out = Vec::with_capacity(self.len());
        for row in 0..self.ny {
            for col in 0..self.nx {
                let id = row * self.nx + col + 1;
                out.push((
                    id.to_string(),
                    ImpactLocation::new(
                        T::lit(self.origin_x + col as f64 * self.spacing),
                        T::lit(self.origin_y + row as f64 * self.spacing),
                    ),
                ));
            }
        }
        out
    }
}

/// Everything needed to generate one synthetic impact campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Scenario<T: Scalar> {
    pub plate: PlateGeometry<T>,
    pub array: SensorArray<T>,
    pub gvp: GvpModel<T>,
    pub grid: GridSpec,
    /// kHz
    pub frequency: T,
    /// ms, added to raw arrivals after scaling
    pub noise_sigma: T,
    /// uniform TDOA scale factor from a temperature change (1 = none)
    pub temperature_alpha: T,
    pub condition: String,
    pub repetitions: u32,
    pub seed: u64,
}

impl<T: Scalar> Scenario<T> {
    /// Default plate and grid, elliptical GVP of 400 mm/ms at 1 kHz with 10 %
    /// anisotropy, noise-free reference conditions.
    pub fn default_reference() -> Self {
        Self {
            plate: default_plate(),
            array: default_sensor_array(),
            gvp: GvpModel::elliptical(T::lit(400.0), T::one(), T::lit(0.1)).expect("valid"),
            grid: GridSpec::standard(),
            frequency: T::one(),
            noise_sigma: T::zero(),
            temperature_alpha: T::one(),
            condition: "REF".into(),
            repetitions: 1,
            seed: 0,
        }
    }

    pub fn generate(&self) -> Result<Dataset<T>> {
        if !(self.temperature_alpha > T::zero()) {
            return Err(Error::invalid(
                "scenario",
                "temperature alpha must be positive",
            ));
        }
        if !(self.noise_sigma >= T::zero()) {
            return Err(Error::invalid("scenario", "noise sigma must be >= 0"));
        }
        if self.repetitions == 0 || self.grid.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut records = Vec::with_capacity(self.grid.len() * self.repetitions as usize);
        for (id, p) in self.grid.locations::<T>() {
            if !self.plate.contains(&p) {
                return Err(Error::invalid(
                    "scenario",
                    format!("impact {id} lies outside the plate"),
                ));
            }
            let clean: Vec<T> = arrival_times(&self.gvp, &self.array, &p, self.frequency)?
                .into_iter()
                .map(|t| t * self.temperature_alpha)
                .collect();
            for rep in 1..=self.repetitions {
                records.push(ImpactRecord {
                    impact_id: id.clone(),
                    condition: self.condition.clone(),
                    repetition: rep,
                    location: p,
                    tdoa: noisy_tdoa(&clean, self.frequency, self.noise_sigma, &mut rng)?,
                });
            }
        }
        Dataset::new(
            self.plate,
            self.array.clone(),
            records,
            format!(
                "synthetic {}: f={} kHz, alpha={}, sigma={} ms, seed={}",
                self.condition, self.frequency, self.temperature_alpha, self.noise_sigma, self.seed
            ),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wavesim::tdoa::{analytic_tdoa, NoiseModel};

    #[test]
    fn grid_is_35_points_inside_sensor_rectangle() {
        let locs = GridSpec::standard().locations::<f64>();
        assert_eq!(locs.len(), 35);
        assert_eq!(locs[17].0, "18");
        assert_eq!(locs[17].1, ImpactLocation::new(145.0, 100.0));
        assert!(locs
            .iter()
            .all(|(_, p)| p.x > 40.0 && p.x < 250.0 && p.y > 40.0 && p.y < 160.0));
    }

    #[test]
    fn full_array_has_no_singularity_at_centre() {
        let g = GvpModel::isotropic(5.0, 1.0).unwrap();
        let t = analytic_tdoa(
            &g,
            &default_sensor_array(),
            &ImpactLocation::new(145.0, 100.0),
            1.0,
            &NoiseModel::none(),
        )
        .unwrap();
        assert!(t.values().iter().any(|&v| v > 0.0));
    }

    #[test]
    fn temperature_scenario_scales_every_tdoa() {
        let base = Scenario::<f64>::default_reference();
        let warm = Scenario {
            temperature_alpha: 1.15,
            condition: "TEM".into(),
            ..base.clone()
        };
        let a = base.generate().unwrap();
        let b = warm.generate().unwrap();
        for (ra, rb) in a.records().iter().zip(b.records()) {
            for (x, y) in ra.tdoa.values().iter().zip(rb.tdoa.values()) {
                assert!((x * 1.15 - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn repetitions_are_separate_rows() {
        let s = Scenario::<f64> {
            repetitions: 3,
            noise_sigma: 0.01,
            ..Scenario::default_reference()
        };
        let d = s.generate().unwrap();
        assert_eq!(d.len(), 105);
        assert_ne!(d.records()[0].tdoa, d.records()[1].tdoa);
        assert_eq!(d.average_repetitions().unwrap().len(), 35);
    }
}
