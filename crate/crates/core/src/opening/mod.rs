//! Opened-node Riemann surface: Gauss-map components, neck charts, the
//! third/second-kind differentials and the 1-form `omega` obtained from the
//! contraction fixed point.

mod forms;
mod gauss;
mod omega;

pub use forms::{principal_part, third_kind_form, FormTable, SecondKind};
pub use gauss::GaussMap;
pub use omega::{
    coeffs_of, fix_omega, fix_omega_with, gluing_rows, laurent_coeffs, laurent_from_coeffs, omega_eval, CircleData, LaurentTable, OmegaSeries, Surface,
    TorusData,
};

use crate::config::Configuration;
use crate::elliptic::{Lattice, C64};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

pub const DEFAULT_N_MAX: usize = 8;
pub const DEFAULT_NODES: usize = 256;
pub const FIX_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    /// chart at `v_k`
    Plus,
    /// chart at `0_k`
    Minus,
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

/// `(-conj)^k z`.
pub fn neg_conj_pow(k: i64, z: C64) -> C64 {
    if k.rem_euclid(2) == 0 {
        z
    } else {
        -z.conj()
    }
}

/// `conj^k z`.
pub fn conj_pow(k: i64, z: C64) -> C64 {
    if k.rem_euclid(2) == 0 {
        z
    } else {
        z.conj()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusParams {
    pub a: C64,
    pub b: C64,
    pub v: C64,
    pub tau: C64,
}

impl TorusParams {
    /// Central values at `t = 0` for node `q` and modulus `tau`.
    pub fn central(k: i64, q: C64, tau: C64) -> Result<Self> {
        let tau_k = neg_conj_pow(k, tau);
        let v = neg_conj_pow(k, q);
        let lat = Lattice::new(tau_k)?;
        Ok(TorusParams { a: C64::new(-0.5, 0.0), b: 0.5 * lat.xi_linear(v), v, tau: tau_k })
    }

    /// `b_hat = b + a xi(v)`, the regular-part offset.
    pub fn b_hat(&self) -> Result<C64> {
        Ok(self.b + self.a * Lattice::new(self.tau)?.xi_linear(self.v))
    }

    pub fn from_unknowns(b_hat: C64, a: C64, tau: C64, v: C64) -> Result<Self> {
        let lat = Lattice::new(tau)?;
        Ok(TorusParams { a, b: b_hat - a * lat.xi_linear(v), v, tau })
    }
}

/// Truncated coefficients `lambda^±_{k,n}`, index `n - 2`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LambdaRow {
    pub plus: Vec<C64>,
    pub minus: Vec<C64>,
}

impl LambdaRow {
    pub fn zeros(n_max: usize) -> Self {
        LambdaRow { plus: vec![C64::new(0.0, 0.0); n_max - 1], minus: vec![C64::new(0.0, 0.0); n_max - 1] }
    }

    pub fn sup_norm(&self) -> f64 {
        self.plus.iter().chain(&self.minus).map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// Resized copy (zero padded or truncated) for another `n_max`.
    pub fn resized(&self, n_max: usize) -> Self {
        let fit = |v: &Vec<C64>| {
            let mut out = v.clone();
            out.resize(n_max - 1, C64::new(0.0, 0.0));
            out
        };
        LambdaRow { plus: fit(&self.plus), minus: fit(&self.minus) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Boundary {
    /// Indices wrap around; the number of tori must be even.
    Cyclic,
    /// The first and last tori are fixed ghosts carrying these coefficients.
    Clamped { left: LambdaRow, right: LambdaRow },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GluingState {
    pub t: f64,
    pub epsilon: f64,
    pub rho: f64,
    /// Stacking index of `tori[0]`.
    pub k_start: i64,
    pub tori: Vec<TorusParams>,
    pub boundary: Boundary,
}

impl GluingState {
    /// Central state for `k = k_lo..=k_hi` at `t = 0`. With clamped
    /// boundaries the two end tori act as ghosts.
    pub fn central(cfg: &Configuration, k_lo: i64, k_hi: i64, cyclic: bool) -> Result<Self> {
        if k_hi < k_lo {
            return Err(Error::Invalid("empty torus range".into()));
        }
        let tori = (k_lo..=k_hi).map(|k| TorusParams::central(k, cfg.q(k), cfg.tau)).collect::<Result<Vec<_>>>()?;
        if cyclic && tori.len() % 2 != 0 {
            return Err(Error::Invalid("cyclic states need an even number of tori".into()));
        }
        if !cyclic && tori.len() < 3 {
            return Err(Error::Invalid("clamped states need at least one interior torus".into()));
        }
        let epsilon = choose_epsilon(&tori)?;
        let boundary = if cyclic {
            Boundary::Cyclic
        } else {
            Boundary::Clamped { left: LambdaRow::zeros(DEFAULT_N_MAX), right: LambdaRow::zeros(DEFAULT_N_MAX) }
        };
        Ok(GluingState { t: 0.0, epsilon, rho: epsilon / 4.0, k_start: k_lo, tori, boundary })
    }

    pub fn len(&self) -> usize {
        self.tori.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tori.is_empty()
    }

    pub fn k_of(&self, i: usize) -> i64 {
        self.k_start + i as i64
    }

    pub fn index_of(&self, k: i64) -> Option<usize> {
        let i = k - self.k_start;
        (i >= 0 && (i as usize) < self.tori.len()).then_some(i as usize)
    }

    pub fn is_cyclic(&self) -> bool {
        matches!(self.boundary, Boundary::Cyclic)
    }

    pub fn is_ghost(&self, i: usize) -> bool {
        !self.is_cyclic() && (i == 0 || i + 1 == self.tori.len())
    }

    /// Index of torus `i + delta`, wrapping when cyclic.
    pub fn neighbor(&self, i: usize, delta: i64) -> Option<usize> {
        let n = self.tori.len() as i64;
        let j = i as i64 + delta;
        if self.is_cyclic() {
            Some(j.rem_euclid(n) as usize)
        } else {
            (0..n).contains(&j).then_some(j as usize)
        }
    }

    /// Indices of tori whose parameters and coefficients are unknowns.
    pub fn active(&self) -> std::ops::Range<usize> {
        if self.is_cyclic() {
            0..self.tori.len()
        } else {
            1..self.tori.len() - 1
        }
    }

    pub fn check_regime(&self) -> Result<()> {
        if !(self.t >= 0.0) {
            return Err(Error::Invalid(format!("t must be non-negative, got {}", self.t)));
        }
        if self.rho > self.epsilon / 4.0 * (1.0 + 1e-12) {
            return Err(Error::Invalid(format!("rho = {} exceeds epsilon/4", self.rho)));
        }
        if self.t * self.t >= self.rho * self.epsilon {
            return Err(Error::NonContraction { t: self.t, ratio: self.t * self.t / (self.rho * self.epsilon) });
        }
        Ok(())
    }
}

/// Neck radius: `0.2` times the smallest pole separation, shrunk until every
/// chart is univalent up to `2 eps`.
pub fn choose_epsilon(tori: &[TorusParams]) -> Result<f64> {
    let mut sep = f64::INFINITY;
    for p in tori {
        let lat = Lattice::new(p.tau)?;
        sep = sep.min(lat.distance_to_lattice(p.v));
    }
    let mut eps = 0.2 * sep;
    'shrink: for _ in 0..20 {
        for p in tori {
            let gm = GaussMap::new(*p)?;
            for sign in [Sign::Plus, Sign::Minus] {
                if gm.check_chart(sign, 2.0 * eps, 64).is_err() {
                    eps *= 0.8;
                    continue 'shrink;
                }
            }
        }
        return Ok(eps);
    }
    Err(Error::Chart("no admissible neck radius".into()))
}
