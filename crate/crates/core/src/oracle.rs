//! Brute-force reference path: direct integration of `i∂_tψ = H(t)ψ`,
//! instantaneous adiabatic frames and the transition-probability matrix.
//!
//! Nothing here uses the invariant; it exists to check the closed forms in
//! [`crate::exact`] independently.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};
use crate::model::{field_components, hamiltonian, ModelParams, SpinOperators};
use crate::ode::{self, Dopri5, Stats};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_POINTS: usize = 2001;

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    pub t: f64,
    /// Amplitudes in the `J_z` basis, `m = +j … −j`.
    pub amplitudes: CVector,
}

impl QuantumState {
    /// The `J_z` eigenstate `|m⟩` at time `t`.
    pub fn basis(params: &ModelParams, m: f64, t: f64) -> Result<Self> {
        let k = params.spin().index_of(m)?;
        let mut amplitudes = CVector::zeros(params.dim());
        amplitudes[k] = Complex64::new(1.0, 0.0);
        Ok(Self { t, amplitudes })
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    fn pack(&self) -> Vec<f64> {
        self.amplitudes.iter().flat_map(|a| [a.re, a.im]).collect()
    }

    fn unpack(t: f64, y: &[f64]) -> Self {
        let amplitudes = CVector::from_iterator(y.len() / 2, y.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])));
        Self { t, amplitudes }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<QuantumState>,
    pub stats: Stats,
}

impl Trajectory {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.states.iter().map(|s| s.t)
    }

    pub fn last(&self) -> &QuantumState {
        self.states.last().expect("trajectory has at least the initial state")
    }

    pub fn max_norm_drift(&self) -> f64 {
        self.states.iter().map(|s| (s.norm() - 1.0).abs()).fold(0.0, f64::max)
    }

    fn index_of_time(&self, t: f64) -> Option<usize> {
        let slack = 1e-9 * t.abs().max(1.0);
        self.states.iter().position(|s| (s.t - t).abs() <= slack)
    }
}

/// Integrates the Schrödinger equation from `psi0` (at `grid[0]`) across `grid`,
/// which may run forwards or backwards in time.
pub fn integrate_schrodinger(
    params: &ModelParams,
    ops: &SpinOperators,
    psi0: &QuantumState,
    grid: &[f64],
    tol: f64,
) -> Result<Trajectory> {
    let solver = Dopri5::with_tolerance(tol)?;
    if psi0.amplitudes.len() != ops.dim() {
        return Err(Error::DimensionMismatch { expected: ops.dim(), got: psi0.amplitudes.len() });
    }
    let norm = psi0.norm();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::NotNormalized(norm));
    }
    if grid.first() != Some(&psi0.t) {
        return Err(Error::InvalidGrid);
    }

    let jx: DMatrix<f64> = ops.jx.map(|z| z.re);
    let jz: Vec<f64> = ops.jz.diagonal().iter().map(|z| z.re).collect();
    let n = ops.dim();
    // H is real: Ω_x J_x + Ω_z J_z, so dψ/dt = −iHψ splits into re/im parts
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        let f = field_components(params, t);
        for r in 0..n {
            let (mut hr, mut hi) = (f.z * jz[r] * y[2 * r], f.z * jz[r] * y[2 * r + 1]);
            for c in [r.wrapping_sub(1), r + 1] {
                if c < n {
                    let w = f.x * jx[(r, c)];
                    hr += w * y[2 * c];
                    hi += w * y[2 * c + 1];
                }
            }
            dy[2 * r] = hi;
            dy[2 * r + 1] = -hr;
        }
    };
    let sol = solver.solve(rhs, &psi0.pack(), grid)?;
    let states = sol.times.iter().zip(&sol.states).map(|(&t, y)| QuantumState::unpack(t, y)).collect();
    Ok(Trajectory { states, stats: sol.stats })
}

/// Numerical `U(t₁, t₀)`: one integration per basis column.
pub fn propagator_oracle(params: &ModelParams, ops: &SpinOperators, t0: f64, t1: f64, tol: f64) -> Result<CMatrix> {
    if t0 > t1 {
        return Err(Error::BackwardInterval { t0, t1 });
    }
    let n = ops.dim();
    let mut u = CMatrix::identity(n, n);
    if t0 == t1 {
        return Ok(u);
    }
    for (k, m) in params.spin().levels().enumerate() {
        let psi0 = QuantumState::basis(params, m, t0)?;
        let traj = integrate_schrodinger(params, ops, &psi0, &[t0, t1], tol)?;
        u.set_column(k, &traj.last().amplitudes);
    }
    Ok(u)
}

/// Instantaneous eigen-decomposition of `H(t)`.
///
/// Level `k` (basis order, `m = j − k`) is the eigenvector continuously connected
/// to `|m⟩` at `t → −∞`, with energy `−m|Ω(t)|`; energies therefore ascend with `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdiabaticFrame {
    pub t: f64,
    pub energies: Vec<f64>,
    pub vectors: CMatrix,
}

/// Diagonalizes `H(t)`. With `prev`, each vector's phase makes `⟨prev_k|v_k⟩` real
/// positive; without it, the largest-magnitude component is made real positive.
pub fn adiabatic_frame(
    params: &ModelParams,
    ops: &SpinOperators,
    t: f64,
    prev: Option<&AdiabaticFrame>,
) -> Result<AdiabaticFrame> {
    let h = hamiltonian(params, ops, t);
    let eig = h.symmetric_eigen();
    let n = ops.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let energies: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    if let Some(gap) = energies.windows(2).map(|w| w[1] - w[0]).reduce(f64::min) {
        if gap < 1e-12 * params.eta() {
            return Err(Error::DegenerateSpectrum { t, gap });
        }
    }

    let mut vectors = CMatrix::zeros(n, n);
    for (level, &k) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(k).into_owned();
        let reference = match prev {
            Some(p) => {
                let overlap = p.vectors.column(level).dotc(&v);
                if overlap.norm() <= 0.5 {
                    return Err(Error::LevelTracking { t, level, overlap: overlap.norm() });
                }
                overlap
            }
            None => {
                let mut best = v[0];
                for z in v.iter().skip(1) {
                    if z.norm() > best.norm() {
                        best = *z;
                    }
                }
                best
            }
        };
        v *= reference.conj() / reference.norm();
        vectors.set_column(level, &v);
    }
    Ok(AdiabaticFrame { t, energies, vectors })
}

/// How rows of the transition matrix are labeled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Labeling {
    /// Row `m` is the adiabatic state whose `J_z` projection has the sign of `m`:
    /// frame level `m` for `t ≤ 0` and level `−m` for `t > 0`. A completed
    /// transfer `|n⟩ → |−n⟩` then shows up as `T_{−n,n} → 1`.
    #[default]
    Diabatic,
    /// Row `m` is frame level `m` at all times (continuous in `t`); a completed
    /// transfer keeps `T_{n,n} → 1`.
    Adiabatic,
}

impl Labeling {
    fn frame_level(self, dim: usize, row: usize, t: f64) -> usize {
        match self {
            Labeling::Diabatic if t > 0.0 => dim - 1 - row,
            _ => row,
        }
    }
}

/// `T_{mn}(t) = |⟨ψ^ad_m(t)|ψ_n(t)⟩|²`; columns follow the trajectories' initial levels.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub t: f64,
    pub labeling: Labeling,
    pub t_matrix: DMatrix<f64>,
}

impl TransitionMatrix {
    /// `max |row sum − 1|, |column sum − 1|`.
    pub fn stochasticity_defect(&self) -> f64 {
        let rows = self.t_matrix.row_iter().map(|r| (r.sum() - 1.0).abs());
        let cols = self.t_matrix.column_iter().map(|c| (c.sum() - 1.0).abs());
        rows.chain(cols).fold(0.0, f64::max)
    }

    pub fn get(&self, params: &ModelParams, m: f64, n: f64) -> Result<f64> {
        let spin = params.spin();
        Ok(self.t_matrix[(spin.index_of(m)?, spin.index_of(n)?)])
    }
}

/// Runs the `2j+1` trajectories that feed [`transition_matrix`]: each starts at
/// `−τ` in the adiabatic eigenvector of level `n` and is sampled on a uniform grid.
pub fn transition_trajectories(
    params: &ModelParams,
    ops: &SpinOperators,
    tau: f64,
    points: usize,
    tol: f64,
) -> Result<Vec<Trajectory>> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::NonPositiveWindow(tau));
    }
    let grid = ode::uniform_grid(-tau, tau, points.max(2));
    let start = adiabatic_frame(params, ops, -tau, None)?;
    let n = ops.dim();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..n)
            .map(|k| {
                let psi0 = QuantumState { t: -tau, amplitudes: start.vectors.column(k).into_owned() };
                let grid = &grid;
                scope.spawn(move || integrate_schrodinger(params, ops, &psi0, grid, tol))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("trajectory worker panicked")).collect()
    })
}

fn check_common_grid(ops: &SpinOperators, trajectories: &[Trajectory]) -> Result<()> {
    if trajectories.len() != ops.dim() {
        return Err(Error::DimensionMismatch { expected: ops.dim(), got: trajectories.len() });
    }
    let first = &trajectories[0];
    let same = trajectories
        .iter()
        .all(|tr| tr.states.len() == first.states.len() && tr.times().zip(first.times()).all(|(a, b)| a == b));
    if same {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

fn matrix_from_frame(
    frame: &AdiabaticFrame,
    trajectories: &[Trajectory],
    idx: usize,
    labeling: Labeling,
) -> TransitionMatrix {
    let n = trajectories.len();
    let t = frame.t;
    let t_matrix = DMatrix::from_fn(n, n, |row, col| {
        let level = labeling.frame_level(n, row, t);
        frame.vectors.column(level).dotc(&trajectories[col].states[idx].amplitudes).norm_sqr()
    });
    TransitionMatrix { t, labeling, t_matrix }
}

/// Transition matrix at grid time `t`.
pub fn transition_matrix(
    params: &ModelParams,
    ops: &SpinOperators,
    trajectories: &[Trajectory],
    t: f64,
    labeling: Labeling,
) -> Result<TransitionMatrix> {
    check_common_grid(ops, trajectories)?;
    let idx = trajectories[0].index_of_time(t).ok_or(Error::TimeNotOnGrid(t))?;
    let t_grid = trajectories[0].states[idx].t;
    let frame = adiabatic_frame(params, ops, t_grid, None)?;
    Ok(matrix_from_frame(&frame, trajectories, idx, labeling))
}

/// Transition matrices at every grid time, tracking the adiabatic frame along the grid.
pub fn transition_history(
    params: &ModelParams,
    ops: &SpinOperators,
    trajectories: &[Trajectory],
    labeling: Labeling,
) -> Result<Vec<TransitionMatrix>> {
    check_common_grid(ops, trajectories)?;
    let mut prev: Option<AdiabaticFrame> = None;
    let mut out = Vec::with_capacity(trajectories[0].states.len());
    for (idx, t) in trajectories[0].times().enumerate() {
        let frame = adiabatic_frame(params, ops, t, prev.as_ref())?;
        out.push(matrix_from_frame(&frame, trajectories, idx, labeling));
        prev = Some(frame);
    }
    Ok(out)
}

/// Diagonal element `T_{nn}(t)`.
pub fn survival_probability(
    params: &ModelParams,
    ops: &SpinOperators,
    trajectories: &[Trajectory],
    n: f64,
    t: f64,
    labeling: Labeling,
) -> Result<f64> {
    transition_matrix(params, ops, trajectories, t, labeling)?.get(params, n, n)
}
