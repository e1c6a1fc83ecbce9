//! Group velocity profiles v_g(θ, ω) for flexural waves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Scalar;

/// Angles are snapped to a lattice of 2^-32 turns after reduction into
/// [0, 2π), which makes every profile exactly 2π-periodic.
const TURN_LATTICE: f64 = 4_294_967_296.0;

/// Reduces an angle into [0, 2π).
pub fn reduce_angle<T: Scalar>(theta: T) -> T {
    let turns = theta.to_f64() / std::f64::consts::TAU;
    let frac = turns - turns.floor();
    let q = (frac * TURN_LATTICE).round() / TURN_LATTICE;
    let q = if q >= 1.0 { 0.0 } else { q };
    T::lit(q * std::f64::consts::TAU)
}

/// Direction dependence of the group velocity at the reference frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GvpKind<T: Scalar> {
    Isotropic,
    /// c(θ) = c0·(1 + ε·cos 2θ)
    Elliptical {
        anisotropy: T,
    },
    /// Speeds at sorted angles in [0, 2π), interpolated periodically. `base_speed` is ignored.
    Tabulated {
        table: Vec<(T, T)>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GvpModel<T: Scalar> {
    /// Speed (mm/ms) at the reference frequency.
    pub base_speed: T,
    /// Reference frequency (kHz).
    pub reference_frequency: T,
    #[serde(flatten)]
    pub kind: GvpKind<T>,
}

impl<T: Scalar> GvpModel<T> {
    pub fn isotropic(base_speed: T, reference_frequency: T) -> Result<Self> {
        Self {
            base_speed,
            reference_frequency,
            kind: GvpKind::Isotropic,
        }
        .validated()
    }

    pub fn elliptical(base_speed: T, reference_frequency: T, anisotropy: T) -> Result<Self> {
        Self {
            base_speed,
            reference_frequency,
            kind: GvpKind::Elliptical { anisotropy },
        }
        .validated()
    }

    pub fn tabulated(reference_frequency: T, mut table: Vec<(T, T)>) -> Result<Self> {
        table.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        let base_speed = table.first().map(|e| e.1).unwrap_or_else(T::zero);
        Self {
            base_speed,
            reference_frequency,
            kind: GvpKind::Tabulated { table },
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.reference_frequency > T::zero()) {
            return Err(Error::invalid(
                "gvp",
                "reference frequency must be positive",
            ));
        }
        match &self.kind {
            GvpKind::Isotropic | GvpKind::Elliptical { .. } => {
                if !(self.base_speed > T::zero()) || !self.base_speed.is_finite() {
                    return Err(Error::invalid(
                        "gvp",
                        format!("base speed must be positive, got {}", self.base_speed),
                    ));
                }
                if let GvpKind::Elliptical { anisotropy } = self.kind {
                    if !(anisotropy.abs() < T::one()) {
                        return Err(Error::invalid(
                            "gvp",
                            format!("|anisotropy| must be < 1, got {anisotropy}"),
                        ));
                    }
                }
            }
            GvpKind::Tabulated { table } => {
                if table.len() < 2 {
                    return Err(Error::invalid(
                        "gvp",
                        "tabulated profile needs at least 2 entries",
                    ));
                }
                let two_pi = T::two_pi();
                for w in table.windows(2) {
                    if !(w[1].0 > w[0].0) {
                        return Err(Error::invalid("gvp", "tabulated angles must be distinct"));
                    }
                }
                for &(theta, speed) in table {
                    if theta < T::zero() || theta >= two_pi {
                        return Err(Error::invalid(
                            "gvp",
                            format!("tabulated angle {theta} outside [0, 2π)"),
                        ));
                    }
                    if !(speed > T::zero()) {
                        return Err(Error::invalid(
                            "gvp",
                            format!("tabulated speed {speed} not positive"),
                        ));
                    }
                }
            }
        }
        Ok(self)
    }

    /// Speed along direction θ at the reference frequency.
    pub fn directional_speed(&self, theta: T) -> T {
        let theta = reduce_angle(theta);
        match &self.kind {
            GvpKind::Isotropic => self.base_speed,
            GvpKind::Elliptical { anisotropy } => {
                self.base_speed * (T::one() + *anisotropy * (theta + theta).cos())
            }
            GvpKind::Tabulated { table } => interpolate_periodic(table, theta),
        }
    }
}

fn interpolate_periodic<T: Scalar>(table: &[(T, T)], theta: T) -> T {
    let two_pi = T::two_pi();
    let n = table.len();
    let upper = table.iter().position(|&(a, _)| a > theta);
    let ((a0, s0), (a1, s1)) = match upper {
        Some(0) => {
            let (a, s) = table[n - 1];
            ((a - two_pi, s), table[0])
        }
        Some(i) => (table[i - 1], table[i]),
        None => {
            let (a, s) = table[0];
            (table[n - 1], (a + two_pi, s))
        }
    };
    let w = (theta - a0) / (a1 - a0);
    s0 + (s1 - s0) * w
}

/// v_g(θ, ω) = c(θ)·√(ω/ω_ref) in mm/ms.
pub fn group_velocity<T: Scalar>(g: &GvpModel<T>, theta: T, omega: T) -> Result<T> {
    if !(omega > T::zero()) || !omega.is_finite() {
        return Err(Error::invalid(
            "frequency",
            format!("must be positive, got {omega}"),
        ));
    }
    Ok(g.directional_speed(theta) * (omega / g.reference_frequency).sqrt())
}
