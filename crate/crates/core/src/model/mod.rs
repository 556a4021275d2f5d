//! Model parameters, spin matrices, the driving Hamiltonian and Wigner matrices.

mod spin;
mod wigner;

pub use spin::{Spin, SpinOperators, MAX_TWICE_J};
pub use wigner::{wigner_d, WignerMatrix};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// Sweep parameters. `kappa` is derived from `eta` and `nu` at construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    eta: f64,
    nu: f64,
    kappa: f64,
    spin: Spin,
}

impl ModelParams {
    pub fn new(eta: f64, nu: f64, spin: Spin) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::EtaNotPositive(eta));
        }
        if !(nu.is_finite() && nu > 0.0) {
            return Err(Error::NuNotPositive(nu));
        }
        if nu > eta {
            return Err(Error::NuExceedsEta { nu, eta });
        }
        let ratio = nu / eta;
        let kappa = ((1.0 - ratio) * (1.0 + ratio)).sqrt();
        Ok(Self { eta, nu, kappa, spin })
    }

    /// Convenience constructor taking `j` as a number.
    pub fn with_j(eta: f64, nu: f64, j: f64) -> Result<Self> {
        Self::new(eta, nu, Spin::new(j)?)
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn spin(&self) -> Spin {
        self.spin
    }

    pub fn j(&self) -> f64 {
        self.spin.value()
    }

    pub fn dim(&self) -> usize {
        self.spin.dim()
    }

    pub fn nu_over_eta(&self) -> f64 {
        self.nu / self.eta
    }

    pub fn with_spin(self, spin: Spin) -> Self {
        Self { spin, ..self }
    }

    /// Overrides `kappa` without touching `eta`/`nu`. Only used to check that the
    /// verification suite notices an inconsistent model.
    #[doc(hidden)]
    pub fn with_kappa_fault(self, kappa: f64) -> Self {
        Self { kappa, ..self }
    }

    pub fn operators(&self) -> SpinOperators {
        SpinOperators::new(self.spin)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldComponents {
    pub x: f64,
    pub z: f64,
}

impl FieldComponents {
    pub fn magnitude(&self) -> f64 {
        self.x.hypot(self.z)
    }
}

/// `Ω_x = η/(1+ν²t²)`, `Ω_z = ηκνt/(1+ν²t²)`.
pub fn field_components(params: &ModelParams, t: f64) -> FieldComponents {
    let s = params.nu * t;
    let envelope = params.eta / (1.0 + s * s);
    FieldComponents { x: envelope, z: envelope * params.kappa * s }
}

pub fn hamiltonian(params: &ModelParams, ops: &SpinOperators, t: f64) -> CMatrix {
    let f = field_components(params, t);
    &ops.jx * Complex64::from(f.x) + &ops.jz * Complex64::from(f.z)
}

/// Instantaneous eigenvalue of `H(t)` continuously connected to `|m⟩` at `t → −∞`:
/// `E^ad_m(t) = −m·|Ω(t)|`.
pub fn adiabatic_energy(params: &ModelParams, m: f64, t: f64) -> Result<f64> {
    params.spin.index_of(m)?;
    Ok(-m * field_components(params, t).magnitude())
}
