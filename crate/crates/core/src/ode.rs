//! Dormand-Prince 5(4) integrator with adaptive steps.
//!
//! The state is a flat `f64` slice; complex problems pack `(re, im)` pairs.
//! Solutions are reported on a caller-supplied output grid. Steps are shortened
//! to land on each grid time, so every reported state carries the full
//! fifth-order accuracy; the step-size controller otherwise runs unaffected by
//! the grid. Integration may run forwards or backwards in time.

#![allow(clippy::needless_range_loop)]

use crate::error::{Error, Result};

pub const MIN_TOL: f64 = 1e-13;
pub const MAX_TOL: f64 = 1e-4;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub safety: f64,
    /// PI-controller weight on the previous error.
    pub beta: f64,
    pub h_max: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub stats: Stats,
}

impl Dopri5 {
    /// Same relative and absolute tolerance; must lie in `[1e-13, 1e-4]`.
    pub fn with_tolerance(tol: f64) -> Result<Self> {
        if !(MIN_TOL..=MAX_TOL).contains(&tol) {
            return Err(Error::InvalidTolerance(tol));
        }
        Ok(Self { rtol: tol, atol: tol, max_steps: 1_000_000, safety: 0.9, beta: 0.04, h_max: None })
    }

    /// Integrates `y' = f(t, y)` from `grid[0]` to the last grid time and returns
    /// the state at every grid time. The grid must be strictly monotone.
    pub fn solve<F>(&self, mut f: F, y0: &[f64], grid: &[f64]) -> Result<Solution>
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let Some((&t0, rest)) = grid.split_first() else {
            return Err(Error::InvalidGrid);
        };
        let mut out = Solution { times: vec![t0], states: vec![y0.to_vec()], stats: Stats::default() };
        let Some(&t_end) = rest.last() else {
            return Ok(out);
        };
        let dir = if t_end > t0 { 1.0 } else { -1.0 };
        if !grid.iter().all(|t| t.is_finite()) || grid.windows(2).any(|w| dir * (w[1] - w[0]) <= 0.0) {
            return Err(Error::InvalidGrid);
        }

        let n = y0.len();
        let mut ws = Workspace::new(n);
        let mut t = t0;
        let mut y = y0.to_vec();
        f(t, &y, &mut ws.k1);
        out.stats.evaluations += 1;
        let span = (t_end - t0).abs();
        let h_max = self.h_max.unwrap_or(span);
        let mut h = dir * self.initial_step(&mut f, t, &y, &mut ws, h_max, dir);
        out.stats.evaluations += 1;
        let mut err_old: f64 = 1e-4;
        let mut last_rejected = false;
        let mut next_out = 1;

        while next_out < grid.len() {
            if out.stats.accepted + out.stats.rejected >= self.max_steps {
                return Err(Error::TooManySteps(self.max_steps));
            }
            if h.abs() < 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepSizeUnderflow(t));
            }
            // land exactly on the next output time; the controller's proposal
            // is kept for the step after it
            let target = grid[next_out];
            let clamped = dir * (t + h - target) >= 0.0;
            let h_try = if clamped { target - t } else { h };

            self.stages(&mut f, t, h_try, &y, &mut ws);
            out.stats.evaluations += 6;

            let err = self.error_norm(&y, &ws, h_try);
            let expo = 0.2 - self.beta * 0.75;
            let fac11 = err.powf(expo);

            if err <= 1.0 {
                let fac = (fac11 / err_old.powf(self.beta) / self.safety).clamp(0.1, 5.0);
                let mut h_new = h_try / fac;
                if clamped {
                    h_new = h_new.abs().max(h.abs()) * dir;
                }
                err_old = err.max(1e-4);
                out.stats.accepted += 1;

                std::mem::swap(&mut ws.k1, &mut ws.k7);
                std::mem::swap(&mut y, &mut ws.y_new);
                t = if clamped { target } else { t + h_try };
                if clamped {
                    out.times.push(target);
                    out.states.push(y.clone());
                    next_out += 1;
                }
                if h_new.abs() > h_max {
                    h_new = dir * h_max;
                }
                if last_rejected && h_new.abs() > h_try.abs() {
                    h_new = h_try;
                }
                last_rejected = false;
                h = h_new;
            } else {
                let fac = (fac11 / self.safety).min(5.0);
                h = h_try / fac;
                last_rejected = true;
                out.stats.rejected += 1;
            }
        }
        Ok(out)
    }

    fn initial_step<F>(&self, f: &mut F, t: f64, y: &[f64], ws: &mut Workspace, h_max: f64, dir: f64) -> f64
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let n = y.len().max(1) as f64;
        let scale = |i: usize| self.atol + self.rtol * y[i].abs();
        let dnf = (ws.k1.iter().enumerate().map(|(i, v)| (v / scale(i)).powi(2)).sum::<f64>() / n).sqrt();
        let dny = (y.iter().enumerate().map(|(i, v)| (v / scale(i)).powi(2)).sum::<f64>() / n).sqrt();
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { 0.01 * dny / dnf };
        h = h.min(h_max);
        for i in 0..y.len() {
            ws.y_stage[i] = y[i] + dir * h * ws.k1[i];
        }
        f(t + dir * h, &ws.y_stage, &mut ws.k2);
        let der2 = (ws.k2.iter().zip(&ws.k1).enumerate().map(|(i, (a, b))| ((a - b) / scale(i)).powi(2)).sum::<f64>()
            / n)
            .sqrt()
            / h;
        let der12 = der2.max(dnf);
        let h1 = if der12 <= 1e-15 { (1e-6f64).max(h * 1e-3) } else { (0.01 / der12).powf(0.2) };
        (100.0 * h).min(h1).min(h_max)
    }

    fn stages<F>(&self, f: &mut F, t: f64, h: f64, y: &[f64], ws: &mut Workspace)
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let n = y.len();
        for i in 0..n {
            ws.y_stage[i] = y[i] + h * A21 * ws.k1[i];
        }
        f(t + C2 * h, &ws.y_stage, &mut ws.k2);
        for i in 0..n {
            ws.y_stage[i] = y[i] + h * (A31 * ws.k1[i] + A32 * ws.k2[i]);
        }
        f(t + C3 * h, &ws.y_stage, &mut ws.k3);
        for i in 0..n {
            ws.y_stage[i] = y[i] + h * (A41 * ws.k1[i] + A42 * ws.k2[i] + A43 * ws.k3[i]);
        }
        f(t + C4 * h, &ws.y_stage, &mut ws.k4);
        for i in 0..n {
            ws.y_stage[i] = y[i] + h * (A51 * ws.k1[i] + A52 * ws.k2[i] + A53 * ws.k3[i] + A54 * ws.k4[i]);
        }
        f(t + C5 * h, &ws.y_stage, &mut ws.k5);
        for i in 0..n {
            ws.y_stage[i] =
                y[i] + h * (A61 * ws.k1[i] + A62 * ws.k2[i] + A63 * ws.k3[i] + A64 * ws.k4[i] + A65 * ws.k5[i]);
        }
        f(t + h, &ws.y_stage, &mut ws.k6);
        for i in 0..n {
            ws.y_new[i] =
                y[i] + h * (A71 * ws.k1[i] + A73 * ws.k3[i] + A74 * ws.k4[i] + A75 * ws.k5[i] + A76 * ws.k6[i]);
        }
        f(t + h, &ws.y_new, &mut ws.k7);
    }

    fn error_norm(&self, y: &[f64], ws: &Workspace, h: f64) -> f64 {
        let n = y.len().max(1) as f64;
        let mut acc = 0.0;
        for i in 0..y.len() {
            let e = h * (E1 * ws.k1[i] + E3 * ws.k3[i] + E4 * ws.k4[i] + E5 * ws.k5[i] + E6 * ws.k6[i] + E7 * ws.k7[i]);
            let sk = self.atol + self.rtol * y[i].abs().max(ws.y_new[i].abs());
            acc += (e / sk).powi(2);
        }
        (acc / n).sqrt()
    }
}

struct Workspace {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    k5: Vec<f64>,
    k6: Vec<f64>,
    k7: Vec<f64>,
    y_stage: Vec<f64>,
    y_new: Vec<f64>,
}

impl Workspace {
    fn new(n: usize) -> Self {
        let z = || vec![0.0; n];
        Self { k1: z(), k2: z(), k3: z(), k4: z(), k5: z(), k6: z(), k7: z(), y_stage: z(), y_new: z() }
    }
}

/// `n` equally spaced times from `t0` to `t1` inclusive. Points are placed
/// symmetrically about the midpoint, so a window `[−τ, τ]` yields an exactly
/// antisymmetric grid that contains 0 when `n` is odd.
pub fn uniform_grid(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![t0],
        _ => {
            let (mid, half) = (0.5 * (t0 + t1), 0.5 * (t1 - t0));
            let last = (n - 1) as f64;
            (0..n)
                .map(|k| match k {
                    0 => t0,
                    k if k == n - 1 => t1,
                    k => mid + half * ((2 * k) as f64 - last) / last,
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn harmonic(_t: f64, y: &[f64], dy: &mut [f64]) {
        dy[0] = y[1];
        dy[1] = -y[0];
    }

    #[test]
    fn rejects_tolerance_out_of_range() {
        assert!(Dopri5::with_tolerance(1e-3).is_err());
        assert!(Dopri5::with_tolerance(1e-14).is_err());
        assert!(Dopri5::with_tolerance(1e-10).is_ok());
    }

    #[test]
    fn harmonic_oscillator_on_grid() {
        let solver = Dopri5::with_tolerance(1e-10).unwrap();
        let grid = uniform_grid(0.0, 10.0, 101);
        let sol = solver.solve(harmonic, &[1.0, 0.0], &grid).unwrap();
        assert_eq!(sol.times.len(), 101);
        for (t, y) in sol.times.iter().zip(&sol.states) {
            assert!((y[0] - t.cos()).abs() < 1e-8, "t={t}");
            assert!((y[1] + t.sin()).abs() < 1e-8);
        }
        assert_eq!(*sol.times.last().unwrap(), 10.0);
    }

    #[test]
    fn runs_backwards() {
        let solver = Dopri5::with_tolerance(1e-11).unwrap();
        let sol = solver.solve(|_, y, dy| dy[0] = -y[0], &[1.0], &[2.0, 1.0, 0.0]).unwrap();
        assert!((sol.states[2][0] - 2f64.exp()).abs() < 1e-9);
        assert!((sol.states[1][0] - 1f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn error_shrinks_with_tolerance() {
        let grid = [0.0, 20.0];
        let err = |tol: f64| {
            let s = Dopri5::with_tolerance(tol).unwrap().solve(harmonic, &[1.0, 0.0], &grid).unwrap();
            (s.states[1][0] - 20f64.cos()).abs()
        };
        let (e6, e10) = (err(1e-6), err(1e-10));
        assert!(e10 < e6 / 100.0, "{e6:e} {e10:e}");
    }

    #[test]
    fn fine_output_grid_is_accurate() {
        let solver = Dopri5::with_tolerance(1e-10).unwrap();
        let grid = uniform_grid(0.0, 3.0, 3001);
        let sol = solver.solve(|t, _, dy| dy[0] = (3.0 * t).cos(), &[0.0], &grid).unwrap();
        assert!(sol.stats.accepted < 3100);
        for (t, y) in sol.times.iter().zip(&sol.states) {
            assert!((y[0] - (3.0 * t).sin() / 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn symmetric_grid_is_antisymmetric() {
        let g = uniform_grid(-31.4, 31.4, 2001);
        assert_eq!(g[1000], 0.0);
        assert!(g.iter().zip(g.iter().rev()).all(|(a, b)| *a == -*b));
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn rejects_non_monotone_grid() {
        let solver = Dopri5::with_tolerance(1e-8).unwrap();
        assert_eq!(solver.solve(harmonic, &[1.0, 0.0], &[0.0, 1.0, 0.5]), Err(Error::InvalidGrid));
        assert_eq!(solver.solve(harmonic, &[1.0, 0.0], &[]), Err(Error::InvalidGrid));
        let single = solver.solve(harmonic, &[1.0, 0.0], &[0.0]).unwrap();
        assert_eq!(single.states.len(), 1);
    }

    #[test]
    fn uniform_grid_endpoints() {
        let g = uniform_grid(-1.0, 1.0, 2001);
        assert_eq!(g[0], -1.0);
        assert_eq!(g[1000], 0.0);
        assert_eq!(g[2000], 1.0);
    }
}
