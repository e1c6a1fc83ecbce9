//! Analytic arrival times and the frequency / temperature scaling laws.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::gvp::{group_velocity, GvpModel};
use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::types::{ImpactLocation, SensorArray, TdoaVector};

/// Zero-mean Gaussian error added to raw arrival times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NoiseModel<T: Scalar> {
    /// Standard deviation in ms.
    pub sigma: T,
    pub seed: u64,
}

impl<T: Scalar> NoiseModel<T> {
    pub fn new(sigma: T, seed: u64) -> Result<Self> {
        if !(sigma >= T::zero()) || !sigma.is_finite() {
            return Err(Error::invalid(
                "noise model",
                format!("sigma must be >= 0, got {sigma}"),
            ));
        }
        Ok(Self { sigma, seed })
    }

    pub fn none() -> Self {
        Self {
            sigma: T::zero(),
            seed: 0,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// Time (ms) for the flexural wavefront to travel from `p` to each sensor.
pub fn arrival_times<T: Scalar>(
    g: &GvpModel<T>,
    array: &SensorArray<T>,
    p: &ImpactLocation<T>,
    omega: T,
) -> Result<Vec<T>> {
    array
        .positions()
        .iter()
        .map(|s| {
            let dist = p.distance(s);
            if dist == T::zero() {
                // still validates omega
                group_velocity(g, T::zero(), omega).map(|_| T::zero())
            } else {
                group_velocity(g, p.bearing_to(s), omega).map(|v| dist / v)
            }
        })
        .collect()
}

/// Adds N(0, σ²) to every arrival, then re-anchors; the anchor may move.
pub fn noisy_tdoa<T: Scalar, R: Rng + ?Sized>(
    arrivals: &[T],
    omega: T,
    sigma: T,
    rng: &mut R,
) -> Result<TdoaVector<T>> {
    if sigma == T::zero() {
        return TdoaVector::from_arrivals(arrivals, omega);
    }
    let noisy: Vec<T> = arrivals
        .iter()
        .map(|&t| {
            let z: f64 = StandardNormal.sample(rng);
            t + sigma * T::lit(z)
        })
        .collect();
    TdoaVector::from_arrivals(&noisy, omega)
}

/// TDOA vector for an impact at `p` using a caller-provided random stream.
pub fn analytic_tdoa_with_rng<T: Scalar, R: Rng + ?Sized>(
    g: &GvpModel<T>,
    array: &SensorArray<T>,
    p: &ImpactLocation<T>,
    omega: T,
    sigma: T,
    rng: &mut R,
) -> Result<TdoaVector<T>> {
    let arrivals = arrival_times(g, array, p, omega)?;
    noisy_tdoa(&arrivals, omega, sigma, rng)
}

/// TDOA vector for an impact at `p`, seeded from `noise.seed`.
pub fn analytic_tdoa<T: Scalar>(
    g: &GvpModel<T>,
    array: &SensorArray<T>,
    p: &ImpactLocation<T>,
    omega: T,
    noise: &NoiseModel<T>,
) -> Result<TdoaVector<T>> {
    analytic_tdoa_with_rng(g, array, p, omega, noise.sigma, &mut noise.rng())
}

/// Re-expresses a TDOA vector extracted at its own frequency ω at a new
/// frequency ω*: every component is multiplied by √(ω/ω*).
pub fn scale_tdoa<T: Scalar>(t: &TdoaVector<T>, omega_star: T) -> Result<TdoaVector<T>> {
    if !(omega_star > T::zero()) || !omega_star.is_finite() {
        return Err(Error::invalid(
            "frequency",
            format!("target frequency must be positive, got {omega_star}"),
        ));
    }
    if !(t.frequency() > T::zero()) {
        return Err(Error::invalid(
            "frequency",
            "source frequency must be positive",
        ));
    }
    let alpha = (t.frequency() / omega_star).sqrt();
    Ok(t.rescaled(alpha, omega_star))
}

/// Uniform scaling of all TDOA components by `alpha` (> 0).
pub fn apply_temperature_scaling<T: Scalar>(t: &TdoaVector<T>, alpha: T) -> Result<TdoaVector<T>> {
    if !(alpha > T::zero()) || !alpha.is_finite() {
        return Err(Error::invalid(
            "temperature scaling",
            format!("alpha must be positive, got {alpha}"),
        ));
    }
    Ok(t.rescaled(alpha, t.frequency()))
}
