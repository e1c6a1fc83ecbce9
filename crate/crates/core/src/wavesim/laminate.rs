//! Critical impact load for delamination onset in a laminated plate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Scalar;

/// Bending stiffnesses in N·m and mode II interlaminar toughness in J/m².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LaminateStiffness<T: Scalar> {
    pub d11: T,
    pub d22: T,
    pub d12: T,
    pub d66: T,
    pub g_iic: T,
}

impl<T: Scalar> LaminateStiffness<T> {
    pub fn new(d11: T, d22: T, d12: T, d66: T, g_iic: T) -> Result<Self> {
        let lam = Self {
            d11,
            d22,
            d12,
            d66,
            g_iic,
        };
        lam.validate()?;
        Ok(lam)
    }

    /// Quasi-isotropic plate whose effective stiffness equals `d`.
    pub fn isotropic(d: T, g_iic: T) -> Result<Self> {
        Self::new(d, d, d * T::lit(0.3), d * T::lit(0.35), g_iic)
    }

    fn validate(&self) -> Result<()> {
        if !(self.d11 > T::zero()) || !(self.d22 > T::zero()) {
            return Err(Error::invalid("laminate", "D11 and D22 must be positive"));
        }
        if !(self.g_iic > T::zero()) {
            return Err(Error::invalid("laminate", "G_IIc must be positive"));
        }
        if !(self.anisotropy_ratio() > -T::one()) {
            return Err(Error::invalid(
                "laminate",
                "(D12 + 2 D66) / sqrt(D11 D22) must exceed -1",
            ));
        }
        Ok(())
    }

    /// A = (D12 + 2·D66) / √(D11·D22)
    pub fn anisotropy_ratio(&self) -> T {
        (self.d12 + self.d66 * T::lit(2.0)) / (self.d11 * self.d22).sqrt()
    }

    /// D* ≈ √(D11·D22·(A + 1) / 2), in N·m.
    pub fn effective_stiffness(&self) -> T {
        (self.d11 * self.d22 * (self.anisotropy_ratio() + T::one()) * T::lit(0.5)).sqrt()
    }
}

/// F_cr = π·√(32·D*·G_IIc / 3) for D* in N·m and G_IIc in J/m², giving newtons.
pub fn critical_load_from_effective<T: Scalar>(d_star: T, g_iic: T) -> Result<T> {
    if !(d_star > T::zero()) || !(g_iic > T::zero()) {
        return Err(Error::invalid(
            "laminate",
            "effective stiffness and G_IIc must be positive",
        ));
    }
    Ok(T::pi() * (T::lit(32.0) * d_star * g_iic / T::lit(3.0)).sqrt())
}

/// Critical impact load (N) for delamination onset.
pub fn critical_delamination_load<T: Scalar>(lam: &LaminateStiffness<T>) -> Result<T> {
    lam.validate()?;
    critical_load_from_effective(lam.effective_stiffness(), lam.g_iic)
}
