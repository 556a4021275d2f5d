//! Closed-form dynamics from the dynamical invariant `I(t) = α(t)·J`.
//!
//! `α(t) = (κ, ν/η, νt)/√(1+ν²t²)` and `I(t) = −G(t) J_z G†(t)` with
//! `G(t) = e^{iφJ_z} e^{iθ(t)J_y}`, `θ(t) = arccos(−νt/√(1+ν²t²))`,
//! `φ = −arcsin(ν/η)`. The eigenvectors `|φ_m(t)⟩ = G(t)|m⟩` pick up only the
//! phase `Φ_m = mηκ·[asinh(νt₁) − asinh(νt₀)]/ν`, so the propagator is known in
//! closed form.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{commutator, spectral_norm, CMatrix, CVector, I};
use crate::model::{hamiltonian, wigner_d, ModelParams, SpinOperators};

/// Geometry of the invariant at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvariantFrame {
    pub t: f64,
    /// Polar angle in `[0, π]`, increasing with `t`.
    pub theta: f64,
    /// Constant azimuth `−arcsin(ν/η)`.
    pub phi: f64,
    /// Unit vector `α(t)`.
    pub alpha: [f64; 3],
}

impl InvariantFrame {
    pub fn at(params: &ModelParams, t: f64) -> Self {
        let x = params.nu() * t;
        let phi = -params.nu_over_eta().asin();
        if x.is_infinite() {
            return if x > 0.0 { Self::plus_infinity(params) } else { Self::minus_infinity(params) };
        }
        let inv_s = 1.0 / x.hypot(1.0);
        // νt/√(1+ν²t²) without cancellation for large |νt|
        let z = x.signum() / (1.0 + 1.0 / (x * x)).sqrt();
        let z = if x == 0.0 { 0.0 } else { z };
        Self { t, theta: 1.0f64.atan2(-x), phi, alpha: [params.kappa() * inv_s, params.nu_over_eta() * inv_s, z] }
    }

    /// `t → −∞`: `α = (0, 0, −1)`, `θ = 0`.
    pub fn minus_infinity(params: &ModelParams) -> Self {
        Self { t: f64::NEG_INFINITY, theta: 0.0, phi: -params.nu_over_eta().asin(), alpha: [0.0, 0.0, -1.0] }
    }

    /// `t → +∞`: `α = (0, 0, 1)`, `θ = π`.
    pub fn plus_infinity(params: &ModelParams) -> Self {
        Self {
            t: f64::INFINITY,
            theta: std::f64::consts::PI,
            phi: -params.nu_over_eta().asin(),
            alpha: [0.0, 0.0, 1.0],
        }
    }

    pub fn alpha_norm(&self) -> f64 {
        self.alpha.iter().map(|a| a * a).sum::<f64>().sqrt()
    }
}

/// Finite-window Lewis-Riesenfeld phase of level `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LrPhase {
    pub m: f64,
    pub t0: f64,
    pub t1: f64,
    pub value: f64,
}

/// Outcome of a symmetric truncated sweep `[−τ_c, τ_c]` for `j = 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransferReport {
    pub tau_c: f64,
    /// `|⟨−|U(τ_c, −τ_c)|+⟩|²`.
    pub probability: f64,
    /// `1 − probability`.
    pub loss: f64,
    /// `Φ_+(τ_c, −τ_c)`.
    pub phase_plus: f64,
    /// `(1+ν²τ_c²)⁻¹`, an upper bound on the loss.
    pub bound: f64,
    /// Set when `κ = 0`: the LR phases vanish and the loss sits exactly at the bound.
    pub kappa_degenerate: bool,
}

pub fn invariant_matrix(params: &ModelParams, ops: &SpinOperators, t: f64) -> CMatrix {
    ops.dot(InvariantFrame::at(params, t).alpha)
}

/// Residual of `i∂_tI = [H, I]` with a central difference:
/// `‖i(I(t+dt) − I(t−dt))/(2dt) − [H(t), I(t)]‖₂`.
pub fn invariant_defect(params: &ModelParams, ops: &SpinOperators, t: f64, dt: f64) -> Result<f64> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::NonPositiveStep(dt));
    }
    let di = (invariant_matrix(params, ops, t + dt) - invariant_matrix(params, ops, t - dt)) * (I / (2.0 * dt));
    let rhs = commutator(&hamiltonian(params, ops, t), &invariant_matrix(params, ops, t));
    Ok(spectral_norm(&(di - rhs)))
}

/// Default finite-difference step `10⁻⁵/ν`.
pub fn default_dt(params: &ModelParams) -> f64 {
    1e-5 / params.nu()
}

/// Columns `|φ_m⟩ = e^{iφJ_z}e^{iθJ_y}|m⟩` for `m = +j … −j`.
pub fn eigenbasis(params: &ModelParams, t: f64) -> CMatrix {
    eigenbasis_for_frame(params, &InvariantFrame::at(params, t))
}

pub fn eigenbasis_for_frame(params: &ModelParams, frame: &InvariantFrame) -> CMatrix {
    let spin = params.spin();
    let d = wigner_d(spin, frame.theta).d;
    let phases: Vec<Complex64> = spin.levels().map(|m| Complex64::from_polar(1.0, m * frame.phi)).collect();
    CMatrix::from_fn(spin.dim(), spin.dim(), |r, c| phases[r] * d[(r, c)])
}

pub fn eigenvector(params: &ModelParams, m: f64, t: f64) -> Result<CVector> {
    let k = params.spin().index_of(m)?;
    Ok(eigenbasis(params, t).column(k).into_owned())
}

/// `E_m(t) = ⟨φ_m|H|φ_m⟩ = −mηκ/√(1+ν²t²)`.
pub fn diabatic_energy(params: &ModelParams, m: f64, t: f64) -> Result<f64> {
    params.spin().index_of(m)?;
    Ok(-m * params.eta() * params.kappa() / (params.nu() * t).hypot(1.0))
}

/// `Φ_m(t₁, t₀) = −∫E_m dt = mηκ·[asinh(νt₁) − asinh(νt₀)]/ν`; the connection
/// term vanishes identically for this invariant.
pub fn lr_phase(params: &ModelParams, m: f64, t0: f64, t1: f64) -> Result<LrPhase> {
    params.spin().index_of(m)?;
    if t0 > t1 {
        return Err(Error::BackwardInterval { t0, t1 });
    }
    let value = m * lr_phase_unit(params, t0, t1);
    Ok(LrPhase { m, t0, t1, value })
}

/// Phase per unit `m`.
fn lr_phase_unit(params: &ModelParams, t0: f64, t1: f64) -> f64 {
    let nu = params.nu();
    params.eta() * params.kappa() * ((nu * t1).asinh() - (nu * t0).asinh()) / nu
}

/// Central-difference estimate of `⟨φ_m(t)|i∂_t|φ_m(t)⟩`.
pub fn geometric_connection(params: &ModelParams, m: f64, t: f64, dt: f64) -> Result<Complex64> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::NonPositiveStep(dt));
    }
    let here = eigenvector(params, m, t)?;
    let fwd = eigenvector(params, m, t + dt)?;
    let back = eigenvector(params, m, t - dt)?;
    let deriv = (fwd - back) / Complex64::from(2.0 * dt);
    Ok(I * here.dotc(&deriv))
}

/// `U(t₁, t₀) = Σ_m e^{iΦ_m(t₁,t₀)} |φ_m(t₁)⟩⟨φ_m(t₀)|`.
pub fn propagator(params: &ModelParams, t0: f64, t1: f64) -> Result<CMatrix> {
    if t0 > t1 {
        return Err(Error::BackwardInterval { t0, t1 });
    }
    let unit = lr_phase_unit(params, t0, t1);
    let after = eigenbasis(params, t1);
    let before = eigenbasis(params, t0);
    let dressed = CMatrix::from_fn(after.nrows(), after.ncols(), |r, c| {
        after[(r, c)] * Complex64::from_polar(1.0, params.spin().level_at(c) * unit)
    });
    Ok(dressed * before.adjoint())
}

/// Closed-form transfer probability of the two-level sweep over `[−τ_c, τ_c]`:
/// `P = 1 − (1+ν²τ_c²)⁻¹ cos²((Φ_+ − Φ_−)/2)`.
pub fn transfer_probability(params: &ModelParams, tau_c: f64) -> Result<TransferReport> {
    if !params.spin().is_half() {
        return Err(Error::RequiresSpinHalf {
            what: "the closed-form transfer probability",
            j: params.j(),
            hint: "use `propagator` and take |<-m|U|m>|^2 for higher spins",
        });
    }
    if !(tau_c.is_finite() && tau_c > 0.0) {
        return Err(Error::NonPositiveWindow(tau_c));
    }
    let x = params.nu() * tau_c;
    let bound = 1.0 / (1.0 + x * x);
    let phase_plus = lr_phase(params, 0.5, -tau_c, tau_c)?.value;
    let phase_minus = -phase_plus;
    let c = (0.5 * (phase_plus - phase_minus)).cos();
    let loss = bound * c * c;
    Ok(TransferReport {
        tau_c,
        probability: 1.0 - loss,
        loss,
        phase_plus,
        bound,
        kappa_degenerate: params.kappa() == 0.0,
    })
}

/// `|⟨−m|U(τ, −τ)|m⟩|²` from the closed-form propagator, any spin.
pub fn level_transfer(params: &ModelParams, m: f64, tau: f64) -> Result<f64> {
    let spin = params.spin();
    let (src, dst) = (spin.index_of(m)?, spin.index_of(-m)?);
    let u = propagator(params, -tau, tau)?;
    Ok(u[(dst, src)].norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermitian_eigenvalues, unitarity_defect};
    use crate::model::Spin;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn params(j: f64) -> ModelParams {
        ModelParams::with_j(1.0, 0.8, j).unwrap()
    }

    #[test]
    fn frame_geometry() {
        let p = params(0.5);
        for x in [-1e9, -5.0, -0.3, 0.0, 0.7, 40.0, 1e12] {
            let f = InvariantFrame::at(&p, x / p.nu());
            assert!((f.alpha_norm() - 1.0).abs() < 1e-14, "{x}");
            assert!((0.0..=PI).contains(&f.theta));
        }
        let f0 = InvariantFrame::at(&p, 0.0);
        assert!((f0.theta - PI / 2.0).abs() < 1e-15);
        assert!((f0.alpha[0] - 0.6).abs() < 1e-15 && (f0.alpha[1] - 0.8).abs() < 1e-15);
        assert_eq!(InvariantFrame::at(&p, f64::NEG_INFINITY).alpha, [0.0, 0.0, -1.0]);
        assert_eq!(InvariantFrame::plus_infinity(&p).theta, PI);
        // cos θ = −α_z
        let f = InvariantFrame::at(&p, 2.0);
        assert!((f.theta.cos() + f.alpha[2]).abs() < 1e-15);
    }

    #[test]
    fn invariant_limits() {
        let p = params(1.0);
        let ops = p.operators();
        let far = invariant_matrix(&p, &ops, -1e12);
        assert!(spectral_norm(&(far + &ops.jz)) < 1e-11);
        let far = invariant_matrix(&p, &ops, 1e12);
        assert!(spectral_norm(&(far - &ops.jz)) < 1e-11);
        let at0 = invariant_matrix(&p, &ops, 0.0);
        let expect = &ops.jx * Complex64::from(0.6) + &ops.jy * Complex64::from(0.8);
        assert!(spectral_norm(&(at0 - expect)) < 1e-15);
    }

    #[test]
    fn invariant_spectrum_is_fixed() {
        let p = params(0.5);
        let ops = p.operators();
        for x in [-5.0, 0.0, 5.0] {
            let ev = hermitian_eigenvalues(&invariant_matrix(&p, &ops, x / p.nu()));
            assert!((ev[0] + 0.5).abs() < 1e-14 && (ev[1] - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn defect_small_and_second_order() {
        let p = params(0.5);
        let ops = p.operators();
        let t = 0.3 / p.nu();
        assert!(invariant_defect(&p, &ops, t, 1e-4).unwrap() < 1e-6);
        let a = invariant_defect(&p, &ops, t, 1e-2).unwrap();
        let b = invariant_defect(&p, &ops, t, 5e-3).unwrap();
        assert!((a / b - 4.0).abs() < 0.05, "ratio {}", a / b);

        let p = params(1.5);
        let ops = p.operators();
        assert!(invariant_defect(&p, &ops, -1.7 / p.nu(), 1e-4).unwrap() < 1e-6);
        assert_eq!(invariant_defect(&p, &ops, 0.0, 0.0), Err(Error::NonPositiveStep(0.0)));
    }

    #[test]
    fn eigenbasis_columns() {
        let p = params(0.5);
        let b = eigenbasis(&p, 0.0);
        let phi = -(0.8f64).asin();
        // |φ_+(0)⟩ = (e^{iφ/2}cos(π/4), −e^{−iφ/2}sin(π/4))
        let e0 = Complex64::from_polar(FRAC_PI_4.cos(), phi / 2.0);
        let e1 = -Complex64::from_polar(FRAC_PI_4.sin(), -phi / 2.0);
        assert!((b[(0, 0)] - e0).norm() < 1e-15);
        assert!((b[(1, 0)] - e1).norm() < 1e-15);

        let p = params(1.5);
        let b = eigenbasis(&p, 2.3 / p.nu());
        let gram = b.adjoint() * &b;
        assert!(spectral_norm(&(gram - CMatrix::identity(4, 4))) < 1e-12);

        let far = eigenbasis_for_frame(&p, &InvariantFrame::minus_infinity(&p));
        for (k, m) in p.spin().levels().enumerate() {
            assert!((far[(k, k)] - Complex64::from_polar(1.0, m * phi)).norm() < 1e-15);
        }
    }

    #[test]
    fn eigenvectors_diagonalize_invariant() {
        let p = params(1.0);
        let ops = p.operators();
        let t = -0.9;
        let inv = invariant_matrix(&p, &ops, t);
        for (k, m) in p.spin().levels().enumerate() {
            let v = eigenbasis(&p, t).column(k).into_owned();
            let r = &inv * &v - &v * Complex64::from(-m);
            assert!(r.norm() < 1e-13);
        }
    }

    #[test]
    fn diabatic_levels() {
        let p = params(0.5);
        assert!((diabatic_energy(&p, 0.5, 0.0).unwrap() + 0.3).abs() < 1e-15);
        assert!(diabatic_energy(&p, 0.5, 1e15).unwrap().abs() < 1e-14);
        let p1 = params(1.0);
        assert_eq!(diabatic_energy(&p1, 0.0, 3.0).unwrap(), 0.0);
        assert!(diabatic_energy(&p1, 0.5, 0.0).is_err());
        // matches ⟨φ_m|H|φ_m⟩
        let ops = p1.operators();
        let h = hamiltonian(&p1, &ops, 1.1);
        for m in [1.0, 0.0, -1.0] {
            let v = eigenvector(&p1, m, 1.1).unwrap();
            let e = v.dotc(&(&h * &v)).re;
            assert!((e - diabatic_energy(&p1, m, 1.1).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn lr_phase_closed_form() {
        let p = params(0.5);
        assert_eq!(lr_phase(&p, 0.5, 2.0, 2.0).unwrap().value, 0.0);
        let tau = 3.0;
        let plus = lr_phase(&p, 0.5, -tau, tau).unwrap().value;
        let expect = p.eta() * p.kappa() / p.nu() * (p.nu() * tau).asinh();
        assert!((plus - expect).abs() < 1e-14);
        let minus = lr_phase(&p, -0.5, -tau, tau).unwrap().value;
        assert_eq!(plus + minus, 0.0);
        assert!(matches!(lr_phase(&p, 0.5, 1.0, 0.0), Err(Error::BackwardInterval { .. })));
    }

    #[test]
    fn connection_vanishes() {
        let p = params(0.5);
        let dt = default_dt(&p);
        assert!(geometric_connection(&p, 0.5, 0.7 / p.nu(), dt).unwrap().norm() < 1e-8);
        let p = params(1.5);
        let a = geometric_connection(&p, -0.5, -2.0 / p.nu(), dt).unwrap().norm();
        let b = geometric_connection(&p, -0.5, -2.0 / p.nu(), dt / 2.0).unwrap().norm();
        assert!(a < 1e-8 && b < 1e-8);
        assert!(geometric_connection(&p, 0.5, 0.0, -1.0).is_err());
    }

    #[test]
    fn propagator_structure() {
        let p = params(1.5);
        let u = propagator(&p, 0.4, 0.4).unwrap();
        assert!(spectral_norm(&(u - CMatrix::identity(4, 4))) < 1e-13);
        let u20 = propagator(&p, -3.0, 2.0).unwrap();
        assert!(unitarity_defect(&u20) < 1e-10);
        let u21 = propagator(&p, 0.5, 2.0).unwrap();
        let u10 = propagator(&p, -3.0, 0.5).unwrap();
        assert!(spectral_norm(&(u21 * u10 - &u20)) < 1e-10);
        assert!(propagator(&p, 1.0, 0.0).is_err());
    }

    #[test]
    fn transfer_formula_matches_propagator() {
        let p = params(0.5);
        for x in [5.0, 10.0 * PI] {
            let tau = x / p.nu();
            let rep = transfer_probability(&p, tau).unwrap();
            let via_u = level_transfer(&p, 0.5, tau).unwrap();
            assert!((rep.probability - via_u).abs() < 1e-12, "{x}");
            assert!(rep.loss <= rep.bound);
            assert!((rep.probability + rep.loss - 1.0).abs() < 1e-15);
        }
        let rep = transfer_probability(&p, 10.0 * PI / p.nu()).unwrap();
        assert!(rep.bound < 1.02e-3 && rep.loss <= 1.02e-3);
    }

    #[test]
    fn transfer_edge_cases() {
        assert!(matches!(transfer_probability(&params(1.0), 1.0), Err(Error::RequiresSpinHalf { .. })));
        assert!(matches!(transfer_probability(&params(0.5), 0.0), Err(Error::NonPositiveWindow(_))));
        let flat = ModelParams::new(1.0, 1.0, Spin::HALF).unwrap();
        let rep = transfer_probability(&flat, 2.0).unwrap();
        assert!(rep.kappa_degenerate);
        assert!((rep.loss - rep.bound).abs() < 1e-16);
        // phase tuned so cos((Φ₊−Φ₋)/2) = 0: complete transfer
        let p = params(0.5);
        let tau = ((PI / 2.0) * p.nu() / (p.eta() * p.kappa())).sinh() / p.nu();
        let rep = transfer_probability(&p, tau).unwrap();
        assert!((rep.probability - 1.0).abs() < 1e-15);
    }
}
