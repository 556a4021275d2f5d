use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// Largest supported `2j`.
pub const MAX_TWICE_J: u32 = 100;

/// Half-integer spin quantum number `j ≥ 1/2`, stored as `2j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Spin {
    twice: u32,
}

impl Spin {
    pub const HALF: Spin = Spin { twice: 1 };

    pub fn from_twice(twice: u32) -> Result<Self> {
        if twice == 0 {
            return Err(Error::InvalidSpin("0".into()));
        }
        if twice > MAX_TWICE_J {
            return Err(Error::SpinTooLarge(f64::from(twice) / 2.0));
        }
        Ok(Self { twice })
    }

    pub fn new(j: f64) -> Result<Self> {
        if !j.is_finite() {
            return Err(Error::InvalidSpin(j.to_string()));
        }
        let twice = 2.0 * j;
        if twice < 0.5 || (twice - twice.round()).abs() > 1e-12 {
            return Err(Error::InvalidSpin(j.to_string()));
        }
        if twice.round() > f64::from(MAX_TWICE_J) {
            return Err(Error::SpinTooLarge(j));
        }
        Self::from_twice(twice.round() as u32)
    }

    pub fn twice(self) -> u32 {
        self.twice
    }

    pub fn value(self) -> f64 {
        f64::from(self.twice) / 2.0
    }

    /// Hilbert-space dimension `2j+1`.
    pub fn dim(self) -> usize {
        self.twice as usize + 1
    }

    pub fn is_half(self) -> bool {
        self.twice == 1
    }

    /// Projections `m = +j, …, −j` in basis order.
    pub fn levels(self) -> impl DoubleEndedIterator<Item = f64> + ExactSizeIterator {
        let j = self.value();
        (0..self.dim()).map(move |k| j - k as f64)
    }

    /// Basis position of `m` (0 for `m = +j`).
    pub fn index_of(self, m: f64) -> Result<usize> {
        let j = self.value();
        let k = j - m;
        if !k.is_finite() || k < -1e-12 || k > 2.0 * j + 1e-12 || (k - k.round()).abs() > 1e-12 {
            return Err(Error::InvalidLevel { m, j });
        }
        Ok(k.round() as usize)
    }

    pub fn level_at(self, index: usize) -> f64 {
        self.value() - index as f64
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.twice.is_multiple_of(2) {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

impl FromStr for Spin {
    type Err = Error;

    /// Accepts `"3/2"`, `"1.5"` or `"1"`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidSpin(s.to_string());
        if let Some((num, den)) = s.split_once('/') {
            let num: u32 = num.trim().parse().map_err(|_| bad())?;
            match den.trim() {
                "2" => Self::from_twice(num),
                "1" => Self::from_twice(num.checked_mul(2).ok_or_else(bad)?),
                _ => Err(bad()),
            }
        } else {
            Self::new(s.parse::<f64>().map_err(|_| bad())?)
        }
    }
}

impl Serialize for Spin {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Spin {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Text(String),
            Number(f64),
        }
        match Repr::deserialize(d)? {
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Repr::Number(x) => Spin::new(x).map_err(serde::de::Error::custom),
        }
    }
}

/// Angular-momentum matrices in the `J_z` eigenbasis (`m = +j … −j`).
#[derive(Debug, Clone, PartialEq)]
pub struct SpinOperators {
    pub spin: Spin,
    pub jx: CMatrix,
    pub jy: CMatrix,
    pub jz: CMatrix,
}

impl SpinOperators {
    /// Ladder-operator construction: `⟨m+1|J₊|m⟩ = √(j(j+1) − m(m+1))`.
    pub fn new(spin: Spin) -> Self {
        let d = spin.dim();
        let j = spin.value();
        let mut jp = DMatrix::<f64>::zeros(d, d);
        // column k holds |m_k>, J+ raises it to row k-1
        for k in 1..d {
            let m = spin.level_at(k);
            jp[(k - 1, k)] = (j * (j + 1.0) - m * (m + 1.0)).sqrt();
        }
        let jm = jp.transpose();
        let jx = (&jp + &jm).map(|x| Complex64::new(0.5 * x, 0.0));
        let jy = (&jp - &jm).map(|x| Complex64::new(0.0, -0.5 * x));
        let jz =
            CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(d, spin.levels().map(|m| Complex64::new(m, 0.0))));
        Self { spin, jx, jy, jz }
    }

    pub fn dim(&self) -> usize {
        self.spin.dim()
    }

    /// `n_x J_x + n_y J_y + n_z J_z`.
    pub fn dot(&self, n: [f64; 3]) -> CMatrix {
        &self.jx * Complex64::from(n[0]) + &self.jy * Complex64::from(n[1]) + &self.jz * Complex64::from(n[2])
    }
}
