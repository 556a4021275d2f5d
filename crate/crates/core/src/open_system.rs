//! Markovian noise on the two-level sweep.
//!
//! With `ρ = (1 + r·σ)/2` the master equation
//! `∂_tρ = −i[H, ρ] − Σ_i (γ_i/2)[J_i, [J_i, ρ]]` becomes the linear system
//! `∂_t r = −M(t) r` with
//!
//! ```text
//!        ⎡ (γ_y+γ_z)/2    Ω_z          0          ⎤
//! M(t) = ⎢ −Ω_z           (γ_x+γ_z)/2  Ω_x        ⎥
//!        ⎣ 0              −Ω_x         (γ_x+γ_y)/2⎦
//! ```
//!
//! `r` holds the Pauli expectations `(⟨σ_x⟩, ⟨σ_y⟩, ⟨σ_z⟩)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact;
use crate::model::{field_components, ModelParams};
use crate::ode::{uniform_grid, Dopri5};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct DampingRates {
    pub gamma_x: f64,
    pub gamma_y: f64,
    pub gamma_z: f64,
}

impl DampingRates {
    pub fn new(gamma_x: f64, gamma_y: f64, gamma_z: f64) -> Result<Self> {
        for (name, value) in [("gamma_x", gamma_x), ("gamma_y", gamma_y), ("gamma_z", gamma_z)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidRate { name, value });
            }
        }
        Ok(Self { gamma_x, gamma_y, gamma_z })
    }

    /// Pure phase damping: `γ_x = γ_y = 0`.
    pub fn dephasing(gamma_z: f64) -> Result<Self> {
        Self::new(0.0, 0.0, gamma_z)
    }

    /// Isotropic spin flip: `γ_x = γ_y = γ_z = γ`.
    pub fn isotropic(gamma: f64) -> Result<Self> {
        Self::new(gamma, gamma, gamma)
    }

    pub fn is_isotropic(&self) -> bool {
        self.gamma_x == self.gamma_y && self.gamma_y == self.gamma_z
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlochVector {
    pub t: f64,
    pub rx: f64,
    pub ry: f64,
    pub rz: f64,
}

impl BlochVector {
    /// `|+⟩`, i.e. `r = (0, 0, 1)`.
    pub fn spin_up(t: f64) -> Self {
        Self { t, rx: 0.0, ry: 0.0, rz: 1.0 }
    }

    pub fn from_array(t: f64, r: [f64; 3]) -> Self {
        Self { t, rx: r[0], ry: r[1], rz: r[2] }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.rx, self.ry, self.rz]
    }

    pub fn length(&self) -> f64 {
        (self.rx * self.rx + self.ry * self.ry + self.rz * self.rz).sqrt()
    }

    /// Population of `|−⟩`, `(1 − r_z)/2`.
    pub fn population_down(&self) -> f64 {
        0.5 * (1.0 - self.rz)
    }
}

fn require_half(params: &ModelParams, what: &'static str) -> Result<()> {
    if params.spin().is_half() {
        Ok(())
    } else {
        Err(Error::RequiresSpinHalf { what, j: params.j(), hint: "open-system dynamics covers j = 1/2 only" })
    }
}

/// `−M(t)·r`.
pub fn bloch_rhs(params: &ModelParams, rates: &DampingRates, t: f64, r: [f64; 3]) -> [f64; 3] {
    let f = field_components(params, t);
    let (dx, dy, dz) = (
        0.5 * (rates.gamma_y + rates.gamma_z),
        0.5 * (rates.gamma_x + rates.gamma_z),
        0.5 * (rates.gamma_x + rates.gamma_y),
    );
    [-(dx * r[0] + f.z * r[1]), -(-f.z * r[0] + dy * r[1] + f.x * r[2]), -(-f.x * r[1] + dz * r[2])]
}

/// Integrates the Bloch equations from `r0` (at `grid[0]`) over `grid`.
pub fn integrate_master(
    params: &ModelParams,
    rates: &DampingRates,
    r0: &BlochVector,
    grid: &[f64],
    tol: f64,
) -> Result<Vec<BlochVector>> {
    require_half(params, "the Bloch master equation")?;
    let len = r0.length();
    if len.is_nan() || len > 1.0 + 1e-12 {
        return Err(Error::UnphysicalBloch(len));
    }
    if grid.first() != Some(&r0.t) {
        return Err(Error::InvalidGrid);
    }
    let solver = Dopri5::with_tolerance(tol)?;
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let d = bloch_rhs(params, rates, t, [y[0], y[1], y[2]]);
        dy.copy_from_slice(&d);
    };
    let sol = solver.solve(rhs, &r0.as_array(), grid)?;
    Ok(sol.times.iter().zip(&sol.states).map(|(&t, y)| BlochVector::from_array(t, [y[0], y[1], y[2]])).collect())
}

/// Bloch vector of the target state `|φ_+(t)⟩`, from direct Pauli expectations.
pub fn target_bloch(params: &ModelParams, t: f64) -> Result<[f64; 3]> {
    require_half(params, "the fidelity target")?;
    let v = exact::eigenvector(params, 0.5, t)?;
    let (a, b) = (v[0], v[1]);
    let ab = a.conj() * b;
    Ok([2.0 * ab.re, 2.0 * ab.im, a.norm_sqr() - b.norm_sqr()])
}

/// `F = ⟨φ_+(t)|ρ|φ_+(t)⟩ = (1 + r·n(t))/2`.
pub fn fidelity(params: &ModelParams, r: &BlochVector) -> Result<f64> {
    let n = target_bloch(params, r.t)?;
    let dot: f64 = n.iter().zip(r.as_array()).map(|(a, b)| a * b).sum();
    Ok((0.5 * (1.0 + dot)).abs())
}

/// Noise-free fidelity of a sweep started in `|+⟩` at `−τ_c`:
/// `|⟨φ_+(−τ_c)|+⟩|² = (1 + ντ_c/√(1+ν²τ_c²))/2`, constant in time.
pub fn closed_system_fidelity(params: &ModelParams, tau_c: f64) -> f64 {
    let x = params.nu() * tau_c;
    0.5 * (1.0 + x / x.hypot(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FidelityCurve {
    pub rates: DampingRates,
    pub tau_c: f64,
    pub nu_t: Vec<f64>,
    pub fidelity: Vec<f64>,
    /// Population transferred to `|−⟩`.
    pub transfer: Vec<f64>,
    pub bloch: Vec<BlochVector>,
}

impl FidelityCurve {
    pub fn final_fidelity(&self) -> f64 {
        *self.fidelity.last().expect("curve has at least one point")
    }

    pub fn final_transfer(&self) -> f64 {
        *self.transfer.last().expect("curve has at least one point")
    }

    /// Sample index of the steepest fidelity decrease.
    pub fn steepest_descent_index(&self) -> usize {
        (1..self.fidelity.len())
            .min_by(|&a, &b| {
                let da = (self.fidelity[a] - self.fidelity[a - 1]) / (self.nu_t[a] - self.nu_t[a - 1]);
                let db = (self.fidelity[b] - self.fidelity[b - 1]) / (self.nu_t[b] - self.nu_t[b - 1]);
                da.total_cmp(&db)
            })
            .unwrap_or(0)
    }
}

/// Sweep over `[−τ_c, τ_c]` from `|+⟩` under the given rates.
pub fn run_scenario(
    params: &ModelParams,
    rates: DampingRates,
    tau_c: f64,
    points: usize,
    tol: f64,
) -> Result<FidelityCurve> {
    require_half(params, "noise scenarios")?;
    if !(tau_c.is_finite() && tau_c > 0.0) {
        return Err(Error::NonPositiveWindow(tau_c));
    }
    let grid = uniform_grid(-tau_c, tau_c, points.max(2));
    let bloch = integrate_master(params, &rates, &BlochVector::spin_up(-tau_c), &grid, tol)?;
    let fidelity = bloch.iter().map(|r| fidelity(params, r)).collect::<Result<Vec<_>>>()?;
    Ok(FidelityCurve {
        rates,
        tau_c,
        nu_t: bloch.iter().map(|r| params.nu() * r.t).collect(),
        fidelity,
        transfer: bloch.iter().map(BlochVector::population_down).collect(),
        bloch,
    })
}

pub fn dephasing_scenario(
    params: &ModelParams,
    gamma_z: f64,
    tau_c: f64,
    points: usize,
    tol: f64,
) -> Result<FidelityCurve> {
    run_scenario(params, DampingRates::dephasing(gamma_z)?, tau_c, points, tol)
}

pub fn spin_flip_scenario(
    params: &ModelParams,
    gamma: f64,
    tau_c: f64,
    points: usize,
    tol: f64,
) -> Result<FidelityCurve> {
    run_scenario(params, DampingRates::isotropic(gamma)?, tau_c, points, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams::with_j(1.0, 0.8, 0.5).unwrap()
    }

    #[test]
    fn rhs_limits() {
        let p = params();
        let zero = DampingRates::default();
        let r = [0.3, -0.5, 0.4];
        let d = bloch_rhs(&p, &zero, 1.7, r);
        let growth: f64 = r.iter().zip(d).map(|(a, b)| a * b).sum();
        assert!(growth.abs() < 1e-16);

        let iso = DampingRates::isotropic(0.2).unwrap();
        let far = bloch_rhs(&p, &iso, 1e12, r);
        for k in 0..3 {
            assert!((far[k] + 0.2 * r[k]).abs() < 1e-12);
        }

        assert_eq!(bloch_rhs(&p, &zero, 0.0, [0.0, 0.0, 1.0]), [0.0, -1.0, 0.0]);
    }

    #[test]
    fn rejects_invalid_inputs() {
        assert!(matches!(DampingRates::new(-1.0, 0.0, 0.0), Err(Error::InvalidRate { name: "gamma_x", .. })));
        assert!(DampingRates::dephasing(f64::NAN).is_err());
        let p = params();
        let big = BlochVector::from_array(0.0, [0.0, 0.8, 0.8]);
        assert!(matches!(
            integrate_master(&p, &DampingRates::default(), &big, &[0.0, 1.0], 1e-8),
            Err(Error::UnphysicalBloch(_))
        ));
        let p1 = ModelParams::with_j(1.0, 0.8, 1.0).unwrap();
        assert!(matches!(dephasing_scenario(&p1, 0.0, 1.0, 11, 1e-8), Err(Error::RequiresSpinHalf { .. })));
    }

    #[test]
    fn fidelity_extremes() {
        let p = params();
        let t = 0.42;
        let n = target_bloch(&p, t).unwrap();
        assert!((fidelity(&p, &BlochVector::from_array(t, n)).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(fidelity(&p, &BlochVector::from_array(t, [0.0; 3])).unwrap(), 0.5);
        let anti = [-n[0], -n[1], -n[2]];
        assert!(fidelity(&p, &BlochVector::from_array(t, anti)).unwrap() < 1e-15);
    }

    #[test]
    fn target_is_minus_alpha() {
        let p = params();
        for t in [-3.0, 0.0, 2.5] {
            let n = target_bloch(&p, t).unwrap();
            let a = exact::InvariantFrame::at(&p, t).alpha;
            for k in 0..3 {
                assert!((n[k] + a[k]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn closed_system_keeps_length_and_fidelity() {
        let p = params();
        let tol = 1e-10;
        let tau = 8.0 / p.nu();
        let curve = run_scenario(&p, DampingRates::default(), tau, 401, tol).unwrap();
        let ideal = closed_system_fidelity(&p, tau);
        for (r, f) in curve.bloch.iter().zip(&curve.fidelity) {
            assert!((r.length() - 1.0).abs() < 10.0 * tol);
            assert!((f - ideal).abs() < 1e-8);
        }
        let p_exact = exact::transfer_probability(&p, tau).unwrap().probability;
        assert!((curve.final_transfer() - p_exact).abs() < 1e-8);
    }

    #[test]
    fn isotropic_decay_law() {
        let p = params();
        let tol = 1e-10;
        let gamma = 0.01 * p.nu();
        let tau = 8.0 / p.nu();
        let curve = spin_flip_scenario(&p, gamma, tau, 201, tol).unwrap();
        for r in &curve.bloch {
            let expect = (-gamma * (r.t + tau)).exp();
            assert!((r.length() - expect).abs() < 10.0 * tol);
        }
    }

    #[test]
    fn heavy_noise_mixes_state() {
        let p = params();
        let curve = spin_flip_scenario(&p, 5.0, 8.0 / p.nu(), 21, 1e-10).unwrap();
        assert!((curve.final_fidelity() - 0.5).abs() < 1e-6);
    }
}
