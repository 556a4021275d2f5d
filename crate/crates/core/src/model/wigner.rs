use nalgebra::DMatrix;

use super::Spin;

/// Real rotation matrix `d_{m'm}(θ) = ⟨m'|e^{iθJ_y}|m⟩`, rows and columns in
/// basis order `m = +j … −j`.
///
/// Note the `+i` sign in the exponent: `wigner_d(j, θ)` equals the textbook
/// `d^j(−θ)` of the `e^{−iβJ_y}` convention.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerMatrix {
    pub spin: Spin,
    pub theta: f64,
    pub d: DMatrix<f64>,
}

impl WignerMatrix {
    pub fn entry(&self, m_row: f64, m_col: f64) -> crate::Result<f64> {
        Ok(self.d[(self.spin.index_of(m_row)?, self.spin.index_of(m_col)?)])
    }
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// Above this `2j` the alternating factorial sum loses too many digits at large
/// angles, so the angle is halved until the sum is well conditioned and the
/// result squared back up.
const DIRECT_SUM_MAX_TWICE_J: u32 = 24;
const REDUCED_ANGLE: f64 = 0.25;

/// Factorial-sum evaluation with log-factorial prefactors.
pub fn wigner_d(spin: Spin, theta: f64) -> WignerMatrix {
    if spin.twice() <= DIRECT_SUM_MAX_TWICE_J || theta.abs() <= REDUCED_ANGLE {
        return WignerMatrix { spin, theta, d: factorial_sum(spin, theta) };
    }
    let halvings = (theta.abs() / REDUCED_ANGLE).log2().ceil() as i32;
    let mut d = factorial_sum(spin, theta / 2f64.powi(halvings));
    for _ in 0..halvings {
        d = &d * &d;
    }
    WignerMatrix { spin, theta, d }
}

fn factorial_sum(spin: Spin, theta: f64) -> DMatrix<f64> {
    let d = spin.dim();
    let tj = spin.twice() as i64;
    let lf = ln_factorials(tj as usize);
    // e^{+iθJ_y} = d(β) with β = −θ in the standard convention
    let half = -0.5 * theta;
    let (c, s) = (half.cos(), half.sin());

    let mut out = DMatrix::<f64>::zeros(d, d);
    for r in 0..d as i64 {
        for col in 0..d as i64 {
            // j+m' = 2j−r, j−m' = r, j+m = 2j−col, j−m = col, m'−m = col−r
            let pre = 0.5 * (lf[(tj - r) as usize] + lf[r as usize] + lf[(tj - col) as usize] + lf[col as usize]);
            let lo = (r - col).max(0);
            let hi = (tj - col).min(r);
            let mut sum = 0.0;
            for k in lo..=hi {
                let den =
                    lf[(tj - col - k) as usize] + lf[k as usize] + lf[(col - r + k) as usize] + lf[(r - k) as usize];
                let sign = if (col - r + k).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                let cpow = (tj + r - col - 2 * k) as i32;
                let spow = (col - r + 2 * k) as i32;
                sum += sign * (pre - den).exp() * c.powi(cpow) * s.powi(spow);
            }
            out[(r as usize, col as usize)] = sum;
        }
    }
    out
}
