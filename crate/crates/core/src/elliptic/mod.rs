//! Weierstrass functions on the lattice `Z + tau Z`.
//!
//! Everything is evaluated from nome expansions. With `q = exp(i pi tau)`
//! and `Q_n = q^(2n) / (1 - q^(2n))`,
//!
//! ```text
//! zeta(w) = eta1 w + pi cot(pi w) + 4 pi sum_n Q_n sin(2 pi n w)
//! eta1    = pi^2/3 (1 - 24 sum_n n Q_n),    eta2 = tau eta1 - 2 pi i
//! ```
//!
//! after the argument has been moved to the centered cell
//! `|Re w|, |Im w / Im tau| <= 1/2`, where the sine series converges like
//! `exp(-pi n Im tau)`.

mod agm;

pub use agm::{elliptic_k_e, theta_star};

use crate::error::{Error, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::OnceLock;

pub type C64 = Complex64;

pub const DEFAULT_SERIES_TOL: f64 = 1e-13;
pub const DEFAULT_POLE_RADIUS: f64 = 1e-6;

/// Highest derivative order of `zeta` supported by [`Lattice::zeta_derivatives`].
pub const MAX_DERIVATIVE: usize = 24;

#[inline]
pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// A flat torus `C / (Z + tau Z)` together with its quasi-periods.
#[derive(Clone, Debug)]
pub struct Lattice {
    tau: C64,
    eta1: C64,
    eta2: C64,
    nome: C64,
    series_tol: f64,
    pole_radius: f64,
    /// `Q_n` for n = 1, 2, ...
    q_coeffs: Vec<C64>,
}

/// A point of the torus with its lattice coordinates reduced to `[0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    pub z: C64,
    pub x: f64,
    pub y: f64,
}

impl TorusPoint {
    pub fn from_coords(x: f64, y: f64, tau: C64) -> Self {
        let x = frac(x);
        let y = frac(y);
        TorusPoint { z: x + y * tau, x, y }
    }
}

/// Fractional part in `[0, 1)`; exact halves are resolved by rounding to even.
fn frac(v: f64) -> f64 {
    let r = v - v.round_ties_even();
    let r = if r < 0.0 { r + 1.0 } else { r };
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

impl PartialEq for Lattice {
    fn eq(&self, other: &Self) -> bool {
        self.tau == other.tau && self.series_tol == other.series_tol
    }
}

impl Lattice {
    pub fn new(tau: C64) -> Result<Self> {
        Self::with_tolerance(tau, DEFAULT_SERIES_TOL)
    }

    pub fn with_tolerance(tau: C64, series_tol: f64) -> Result<Self> {
        if !(tau.im > 0.0) || !tau.re.is_finite() || !tau.im.is_finite() {
            return Err(Error::InvalidTau(tau));
        }
        let nome = (C64::i() * PI * tau).exp();
        let q2 = nome * nome;
        // Terms are bounded by |q|^(2n) exp(pi n Im tau) (2 pi n)^j after
        // centering; keep enough of them for derivatives up to MAX_DERIVATIVE.
        let decay = PI * tau.im;
        let mut q_coeffs = Vec::new();
        let mut q2n = C64::new(1.0, 0.0);
        for n in 1..=20_000usize {
            q2n *= q2;
            q_coeffs.push(q2n / (1.0 - q2n));
            let log_bound = -decay * n as f64 + MAX_DERIVATIVE as f64 * (2.0 * PI * n as f64).ln();
            if n > 4 && log_bound < (series_tol * 1e-20).ln() {
                break;
            }
        }
        let s1: C64 = q_coeffs.iter().enumerate().map(|(i, q)| (i + 1) as f64 * q).sum();
        let eta1 = PI * PI / 3.0 * (1.0 - 24.0 * s1);
        let eta2 = tau * eta1 - c(0.0, 2.0 * PI);
        Ok(Lattice { tau, eta1, eta2, nome, series_tol, pole_radius: DEFAULT_POLE_RADIUS, q_coeffs })
    }

    pub fn with_pole_radius(mut self, radius: f64) -> Self {
        self.pole_radius = radius;
        self
    }

    pub fn tau(&self) -> C64 {
        self.tau
    }
    pub fn eta1(&self) -> C64 {
        self.eta1
    }
    pub fn eta2(&self) -> C64 {
        self.eta2
    }
    pub fn nome(&self) -> C64 {
        self.nome
    }
    pub fn series_tol(&self) -> f64 {
        self.series_tol
    }
    pub fn pole_radius(&self) -> f64 {
        self.pole_radius
    }

    /// Real coordinates `(x, y)` with `z = x + y tau` (no reduction).
    pub fn lattice_coords(&self, z: C64) -> (f64, f64) {
        let y = z.im / self.tau.im;
        (z.re - y * self.tau.re, y)
    }

    pub fn from_lattice_coords(&self, x: f64, y: f64) -> C64 {
        x + y * self.tau
    }

    pub fn reduce(&self, z: C64) -> TorusPoint {
        let (x, y) = self.lattice_coords(z);
        TorusPoint::from_coords(x, y, self.tau)
    }

    /// Splits `z = w + m + n tau` with `w` in the centered cell.
    fn center(&self, z: C64) -> (C64, f64, f64) {
        let n = (z.im / self.tau.im).round_ties_even();
        let shifted = z - n * self.tau;
        let m = shifted.re.round_ties_even();
        (shifted - m, m, n)
    }

    /// Representative of `z` modulo the lattice closest to 0.
    pub fn nearest_representative(&self, z: C64) -> C64 {
        let (w, _, _) = self.center(z);
        let mut best = w;
        for dn in -1..=1 {
            for dm in -1..=1 {
                let cand = w + dm as f64 + dn as f64 * self.tau;
                if cand.norm() < best.norm() {
                    best = cand;
                }
            }
        }
        best
    }

    pub fn distance_to_lattice(&self, z: C64) -> f64 {
        self.nearest_representative(z).norm()
    }

    pub fn torus_distance(&self, a: C64, b: C64) -> f64 {
        self.distance_to_lattice(a - b)
    }

    fn check_pole(&self, z: C64) -> Result<()> {
        if self.distance_to_lattice(z) < self.pole_radius {
            Err(Error::Pole { z, tau: self.tau, radius: self.pole_radius })
        } else {
            Ok(())
        }
    }

    /// `xi` of an arbitrary representative, real-linear in `z`:
    /// `xi(z) = x eta1 + y eta2` for `z = x + y tau`.
    pub fn xi_linear(&self, z: C64) -> C64 {
        let (x, y) = self.lattice_coords(z);
        x * self.eta1 + y * self.eta2
    }

    /// `xi` of a point reduced to the fundamental domain.
    pub fn xi(&self, p: &TorusPoint) -> C64 {
        p.x * self.eta1 + p.y * self.eta2
    }

    pub fn zeta(&self, z: C64) -> Result<C64> {
        self.check_pole(z)?;
        Ok(self.zeta_unchecked(z))
    }

    pub fn zeta_unchecked(&self, z: C64) -> C64 {
        let (w, m, n) = self.center(z);
        self.centered_derivatives(w, 0)[0] + m * self.eta1 + n * self.eta2
    }

    /// `[zeta(z), zeta'(z), ..., zeta^(order)(z)]` without a pole check.
    pub fn zeta_derivatives(&self, z: C64, order: usize) -> Vec<C64> {
        assert!(order <= MAX_DERIVATIVE, "derivative order {order} not supported");
        let (w, m, n) = self.center(z);
        let mut out = self.centered_derivatives(w, order);
        out[0] += m * self.eta1 + n * self.eta2;
        out
    }

    /// Weierstrass `wp` (`order = 0`) or `wp'` (`order = 1`).
    pub fn wp_eval(&self, z: C64, order: u8) -> Result<C64> {
        self.check_pole(z)?;
        match order {
            0 => Ok(-self.zeta_derivatives(z, 1)[1]),
            1 => Ok(-self.zeta_derivatives(z, 2)[2]),
            _ => Err(Error::Invalid(format!("wp order must be 0 or 1, got {order}"))),
        }
    }

    fn centered_derivatives(&self, w: C64, order: usize) -> Vec<C64> {
        let polys = cot_derivative_polys();
        let cot = (PI * w).cos() / (PI * w).sin();
        let mut out = Vec::with_capacity(order + 1);
        let mut pi_pow = PI;
        for j in 0..=order {
            out.push(pi_pow * horner(&polys[j], cot));
            pi_pow *= PI;
        }
        out[0] += self.eta1 * w;
        if order >= 1 {
            out[1] += self.eta1;
        }

        let scale = out.iter().map(|v| v.norm()).fold(1.0, f64::max);
        let e = (c(0.0, 2.0 * PI) * w).exp();
        let e_inv = 1.0 / e;
        let mut en = C64::new(1.0, 0.0);
        let mut en_inv = C64::new(1.0, 0.0);
        let mut prev = f64::INFINITY;
        let mut sums = vec![C64::new(0.0, 0.0); order + 1];
        for (i, qn) in self.q_coeffs.iter().enumerate() {
            let n = (i + 1) as f64;
            en *= e;
            en_inv *= e_inv;
            let s = (en - en_inv) / c(0.0, 2.0);
            let co = (en + en_inv) * 0.5;
            let base = 4.0 * PI * qn;
            let k = 2.0 * PI * n;
            let mut kp = 1.0;
            let mut largest = 0.0f64;
            for (j, acc) in sums.iter_mut().enumerate() {
                let trig = match j % 4 {
                    0 => s,
                    1 => co,
                    2 => -s,
                    _ => -co,
                };
                let term = base * kp * trig;
                largest = largest.max(term.norm());
                *acc += term;
                kp *= k;
            }
            if largest < self.series_tol * 1e-3 * scale && largest < prev {
                break;
            }
            prev = largest;
        }
        for (o, s) in out.iter_mut().zip(sums) {
            *o += s;
        }
        out
    }

    /// Invariants `(g2, g3)` from the Eisenstein series `E4`, `E6`.
    pub fn invariants(&self) -> (C64, C64) {
        let mut s3 = C64::new(0.0, 0.0);
        let mut s5 = C64::new(0.0, 0.0);
        for (i, q) in self.q_coeffs.iter().enumerate() {
            let n = (i + 1) as f64;
            s3 += n.powi(3) * q;
            s5 += n.powi(5) * q;
        }
        let e4 = 1.0 + 240.0 * s3;
        let e6 = 1.0 - 504.0 * s5;
        (4.0 * PI.powi(4) / 3.0 * e4, 8.0 * PI.powi(6) / 27.0 * e6)
    }

    /// Taylor coefficients `l_0..=l_order` of `zeta(w) - 1/w` at `w = 0`.
    pub fn zeta_laurent_regular(&self, order: usize) -> Vec<C64> {
        let (g2, g3) = self.invariants();
        // wp(w) = 1/w^2 + sum_{k>=2} c_k w^(2k-2)
        let kmax = order / 2 + 2;
        let mut ck = vec![C64::new(0.0, 0.0); kmax + 1];
        if kmax >= 2 {
            ck[2] = g2 / 20.0;
        }
        if kmax >= 3 {
            ck[3] = g3 / 28.0;
        }
        for k in 4..=kmax {
            let mut s = C64::new(0.0, 0.0);
            for m in 2..=k - 2 {
                s += ck[m] * ck[k - m];
            }
            ck[k] = 3.0 / ((2 * k + 1) as f64 * (k - 3) as f64) * s;
        }
        let mut out = vec![C64::new(0.0, 0.0); order + 1];
        for k in 2..=kmax {
            let p = 2 * k - 1;
            if p <= order {
                out[p] = -ck[k] / p as f64;
            }
        }
        out
    }

    /// `2 zeta(tau/2)` evaluated from the series at the half period itself,
    /// an independent check on `eta2`.
    pub fn eta2_crosscheck(&self) -> C64 {
        // tau/2 - tau/2 rounding: evaluate on the boundary of the centered cell
        // without any lattice shift.
        let w = self.tau * 0.5 - (self.tau * 0.5).re.round_ties_even();
        let shift = (self.tau * 0.5).re.round_ties_even();
        2.0 * (self.centered_derivatives(w, 0)[0] + shift * self.eta1)
    }
}

fn horner(coeffs: &[f64], x: C64) -> C64 {
    coeffs.iter().rev().fold(C64::new(0.0, 0.0), |acc, &a| acc * x + a)
}

/// Polynomials `P_j` with `d^j/dx^j cot(x) = P_j(cot x)`.
fn cot_derivative_polys() -> &'static Vec<Vec<f64>> {
    static POLYS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    POLYS.get_or_init(|| {
        let mut polys = vec![vec![0.0, 1.0]];
        for j in 0..MAX_DERIVATIVE {
            let p = &polys[j];
            // derivative in c
            let dp: Vec<f64> = (1..p.len()).map(|i| i as f64 * p[i]).collect();
            // multiply by -(1 + c^2)
            let mut next = vec![0.0; dp.len() + 2];
            for (i, &a) in dp.iter().enumerate() {
                next[i] -= a;
                next[i + 2] -= a;
            }
            polys.push(next);
        }
        polys
    })
}
