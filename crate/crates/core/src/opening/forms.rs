//! Third- and second-kind differentials on a torus with real normalisation.

use super::gauss::GaussMap;
use super::Sign;
use crate::elliptic::{Lattice, C64};
use crate::error::{Error, Result};
use std::f64::consts::PI;

/// `omega_{p,q}/dz = zeta(z-p) - zeta(z-q) - xi(q-p)`: residues +1 at `p`,
/// -1 at `q`, imaginary periods.
pub fn third_kind_form(lat: &Lattice, p: C64, q: C64, z: C64) -> Result<C64> {
    Ok(lat.zeta(z - p)? - lat.zeta(z - q)? - lat.xi_linear(q - p))
}

/// A second-kind form written as `sum_m A_m zeta^(m-1)(z - center) + constant`.
///
/// Scaling the principal part by a complex `lambda` is only real-linear:
/// the period correction becomes `i (2 pi / Im tau) Im(lambda A_2)`.
#[derive(Clone, Debug)]
pub struct SecondKind {
    pub sign: Sign,
    pub n: usize,
    pub center: C64,
    /// `A_m` for `m = 2..=n`.
    pub coeffs: Vec<C64>,
    pub constant: C64,
    /// Complex-linear part of the constant, `-A_2 eta_1`.
    pub linear_constant: C64,
    kappa: f64,
}

impl SecondKind {
    /// The form with principal part `dz^±/(z^±)^n` at the chart pole.
    pub fn new(gm: &GaussMap, sign: Sign, n: usize) -> SecondKind {
        assert!(n >= 2);
        let d = principal_part(gm, sign, n);
        let mut fact = 1.0;
        let mut coeffs = Vec::with_capacity(n - 1);
        for m in 2..=n {
            fact *= (m - 1) as f64;
            let sgn = if (m - 1) % 2 == 0 { 1.0 } else { -1.0 };
            coeffs.push(d[m - 2] * sgn / fact);
        }
        let lat = &gm.lat;
        let a2 = coeffs[0];
        // zero alpha period, then cancel the real part of the beta period
        let kappa = 2.0 * PI / lat.tau().im;
        let linear_constant = -a2 * lat.eta1();
        let constant = linear_constant + C64::new(0.0, kappa * a2.im);
        SecondKind { sign, n, center: gm.center(sign), coeffs, constant, linear_constant, kappa }
    }

    pub fn a2(&self) -> C64 {
        self.coeffs[0]
    }

    /// Complex-linear part at `z` from `zeta^(j)(z - center)`.
    pub fn linear_part(&self, derivs: &[C64]) -> C64 {
        self.coeffs.iter().enumerate().map(|(i, a)| a * derivs[i + 1]).sum::<C64>() + self.linear_constant
    }

    /// Period correction for the coefficient `lambda`.
    pub fn period_fix(&self, lambda: C64) -> C64 {
        C64::new(0.0, self.kappa * (lambda * self.a2()).im)
    }

    /// The form with principal part `lambda dz^±/(z^±)^n`.
    pub fn eval_scaled(&self, lat: &Lattice, lambda: C64, z: C64) -> Result<C64> {
        lat.zeta(z - self.center)?;
        let d = lat.zeta_derivatives(z - self.center, self.n - 1);
        Ok(lambda * self.linear_part(&d) + self.period_fix(lambda))
    }

    /// Value from precomputed `zeta^(j)(z - center)`, `j >= 1`.
    pub fn eval_with(&self, derivs: &[C64]) -> C64 {
        self.coeffs.iter().enumerate().map(|(i, a)| a * derivs[i + 1]).sum::<C64>() + self.constant
    }

    pub fn eval(&self, lat: &Lattice, z: C64) -> Result<C64> {
        lat.zeta(z - self.center)?;
        Ok(self.eval_with(&lat.zeta_derivatives(z - self.center, self.n - 1)))
    }
}

/// Coefficients `d_m` (`m = 2..=n`) of `w^-m` in `u' u^-n`, `u = 1/g`,
/// `w = z - center`.
pub fn principal_part(gm: &GaussMap, sign: Sign, n: usize) -> Vec<C64> {
    let r = gm.residue(sign);
    let deg = n - 2;
    // V(w) = w g(w) = r + sum_i h_i w^(i+1)
    let h = gm.pole_taylor(sign, deg.saturating_sub(1));
    let mut v = vec![C64::new(0.0, 0.0); deg + 1];
    v[0] = r;
    for j in 1..=deg {
        v[j] = h[j - 1];
    }
    // e = V^(n-1) truncated at degree n-2
    let mut e = vec![C64::new(0.0, 0.0); deg + 1];
    e[0] = C64::new(1.0, 0.0);
    for _ in 0..n - 1 {
        let mut next = vec![C64::new(0.0, 0.0); deg + 1];
        for i in 0..=deg {
            for j in 0..=deg - i {
                next[i + j] += e[i] * v[j];
            }
        }
        e = next;
    }
    (2..=n).map(|m| e[n - m] * ((1.0 - m as f64) / (1.0 - n as f64))).collect()
}

/// All forms of one torus: `omega_{0,v}` and `omega^±_n` for `n = 2..=n_max`.
#[derive(Clone, Debug)]
pub struct FormTable {
    pub n_max: usize,
    pub xi_v: C64,
    pub plus: Vec<SecondKind>,
    pub minus: Vec<SecondKind>,
}

impl FormTable {
    pub fn new(gm: &GaussMap, n_max: usize) -> FormTable {
        FormTable {
            n_max,
            xi_v: gm.lat.xi_linear(gm.p.v),
            plus: (2..=n_max).map(|n| SecondKind::new(gm, Sign::Plus, n)).collect(),
            minus: (2..=n_max).map(|n| SecondKind::new(gm, Sign::Minus, n)).collect(),
        }
    }

    /// Number of basis forms: `omega_0`, then plus, then minus.
    pub fn len(&self) -> usize {
        1 + 2 * (self.n_max - 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Complex-linear parts `/dz` of the basis at `z` (no pole check).
    pub fn eval_all(&self, gm: &GaussMap, z: C64) -> Vec<C64> {
        let order = self.n_max.max(2) - 1;
        let d0 = gm.lat.zeta_derivatives(z, order);
        let d1 = gm.lat.zeta_derivatives(z - gm.p.v, order);
        let mut out = Vec::with_capacity(self.len());
        out.push(d0[0] - d1[0] - self.xi_v);
        out.extend(self.plus.iter().map(|f| f.linear_part(&d1)));
        out.extend(self.minus.iter().map(|f| f.linear_part(&d0)));
        out
    }

    /// `A_2` of each basis form (zero for `omega_0`).
    pub fn a2_all(&self) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0)];
        out.extend(self.plus.iter().chain(&self.minus).map(|f| f.a2()));
        out
    }

    /// `2 pi / Im tau`.
    pub fn kappa(&self) -> f64 {
        self.plus.first().map_or(0.0, |f| f.kappa)
    }

    /// `omega/dz` for basis coefficients `c` from the linear parts `q`.
    pub fn combine(&self, c: &[C64], q: &[C64]) -> C64 {
        c.iter().zip(q).map(|(x, y)| x * y).sum::<C64>() + self.period_fix(c)
    }

    /// Summed period corrections `/dz` for basis coefficients `c`.
    pub fn period_fix(&self, c: &[C64]) -> C64 {
        let a2 = self.plus.iter().chain(&self.minus).map(|f| f.a2());
        let im: f64 = c[1..].iter().zip(a2).map(|(x, a)| (x * a).im).sum();
        C64::new(0.0, self.kappa() * im)
    }

    pub fn form(&self, sign: Sign, n: usize) -> Result<&SecondKind> {
        if n < 2 || n > self.n_max {
            return Err(Error::OrderOverflow { n, n_max: self.n_max });
        }
        Ok(match sign {
            Sign::Plus => &self.plus[n - 2],
            Sign::Minus => &self.minus[n - 2],
        })
    }
}
