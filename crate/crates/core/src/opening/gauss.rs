//! Gauss-map components `g_k = a (zeta(z) - zeta(z - v)) + b` and the neck
//! charts `z^± = 1/g_k` around their poles.

use super::{Sign, TorusParams};
use crate::elliptic::{Lattice, C64};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct GaussMap {
    pub lat: Lattice,
    pub p: TorusParams,
}

impl GaussMap {
    pub fn new(p: TorusParams) -> Result<Self> {
        Ok(GaussMap { lat: Lattice::new(p.tau)?, p })
    }

    pub fn center(&self, sign: Sign) -> C64 {
        match sign {
            Sign::Plus => self.p.v,
            Sign::Minus => C64::new(0.0, 0.0),
        }
    }

    /// Residue of `g` at the pole of the given chart.
    pub fn residue(&self, sign: Sign) -> C64 {
        match sign {
            Sign::Plus => -self.p.a,
            Sign::Minus => self.p.a,
        }
    }

    pub fn value(&self, z: C64) -> Result<C64> {
        self.lat.zeta(z)?;
        self.lat.zeta(z - self.p.v)?;
        Ok(self.value_unchecked(z))
    }

    pub fn value_unchecked(&self, z: C64) -> C64 {
        self.p.a * (self.lat.zeta_unchecked(z) - self.lat.zeta_unchecked(z - self.p.v)) + self.p.b
    }

    /// `(g(z), g'(z))`.
    pub fn value_and_derivative(&self, z: C64) -> (C64, C64) {
        let d0 = self.lat.zeta_derivatives(z, 1);
        let d1 = self.lat.zeta_derivatives(z - self.p.v, 1);
        (self.p.a * (d0[0] - d1[0]) + self.p.b, self.p.a * (d0[1] - d1[1]))
    }

    /// Coefficients `h_0..=h_order` of `g = r/w + sum h_i w^i` at the pole
    /// of the chart, `w = z - center`.
    pub fn pole_taylor(&self, sign: Sign, order: usize) -> Vec<C64> {
        let l = self.lat.zeta_laurent_regular(order);
        let a = self.p.a;
        let other = match sign {
            Sign::Plus => self.lat.zeta_derivatives(self.p.v, order),
            Sign::Minus => self.lat.zeta_derivatives(-self.p.v, order),
        };
        let mut fact = 1.0;
        let mut h = Vec::with_capacity(order + 1);
        for i in 0..=order {
            if i > 0 {
                fact *= i as f64;
            }
            let t = other[i] / fact;
            h.push(match sign {
                Sign::Plus => a * t - a * l[i],
                Sign::Minus => a * l[i] - a * t,
            });
        }
        h[0] += self.p.b;
        h
    }

    /// `z^±(z) = 1/g(z)`; fails outside the chart disk `|z^±| < 2 eps`.
    pub fn neck_coordinate(&self, sign: Sign, z: C64, eps: f64) -> Result<C64> {
        let c = self.center(sign);
        let w = self.lat.nearest_representative(z - c);
        if w.norm() < self.lat.pole_radius() {
            return Ok(C64::new(0.0, 0.0));
        }
        let s = 1.0 / self.value_unchecked(c + w);
        if s.norm() >= 2.0 * eps || !s.is_finite() {
            return Err(Error::Chart(format!("|z^{}| = {:.3e} outside the chart radius {:.3e}", sign, s.norm(), 2.0 * eps)));
        }
        Ok(s)
    }

    /// Torus point with `1/g(z) = s` near the pole of the chart, by Newton
    /// from the second-order seed (or from `seed` when given).
    pub fn chart_inverse(&self, sign: Sign, s: C64, seed: Option<C64>) -> Result<C64> {
        let c = self.center(sign);
        if s.norm() == 0.0 {
            return Ok(c);
        }
        let r = self.residue(sign);
        let mut z = match seed {
            Some(z) => z,
            None => {
                let h0 = self.pole_taylor(sign, 0)[0];
                c + r * s + h0 * r * s * s
            }
        };
        for _ in 0..50 {
            let (g, dg) = self.value_and_derivative(z);
            // f = 1/g - s, f' = -g'/g^2
            let f = 1.0 / g - s;
            let step = f * g * g / dg;
            z += step;
            if step.norm() <= 1e-15 * (1.0 + z.norm()) {
                let back = 1.0 / self.value_unchecked(z);
                if (back - s).norm() > 1e-10 * s.norm().max(1e-3) {
                    break;
                }
                return Ok(z);
            }
            if !z.is_finite() {
                break;
            }
        }
        Err(Error::Chart(format!("chart inversion failed for z^{} = {s}", sign)))
    }

    /// `dz/ds = -g^2 / g'` at `z`.
    pub fn chart_jacobian(&self, z: C64) -> C64 {
        let (g, dg) = self.value_and_derivative(z);
        -g * g / dg
    }

    /// Checks that the chart extends univalently to `|s| <= radius`: the
    /// preimage of the circle winds once around the pole.
    pub fn check_chart(&self, sign: Sign, radius: f64, nodes: usize) -> Result<()> {
        let c = self.center(sign);
        let mut prev: Option<C64> = None;
        let mut winding = 0.0;
        let mut first = None;
        for j in 0..=nodes {
            let s = C64::from_polar(radius, 2.0 * std::f64::consts::PI * j as f64 / nodes as f64);
            let z = self.chart_inverse(sign, s, prev)?;
            let w = z - c;
            if let Some(p) = prev {
                winding += (w / (p - c)).arg();
            }
            if first.is_none() {
                first = Some(z);
            }
            prev = Some(z);
        }
        let closes = (prev.unwrap() - first.unwrap()).norm() < 1e-9;
        if !closes || (winding - 2.0 * std::f64::consts::PI).abs() > 1e-6 {
            return Err(Error::Chart(format!("chart z^{sign} is not univalent up to radius {radius:.3e}")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sample() -> GaussMap {
        let tau = C64::new(0.15, 1.1);
        let p = TorusParams::central(1, C64::new(0.35, 0.45), C64::new(-0.15, 1.1)).unwrap();
        assert_eq!(p.tau, tau);
        GaussMap::new(p).unwrap()
    }

    fn residue_at(gm: &GaussMap, c: C64) -> C64 {
        let n = 128;
        let r = 1e-2;
        (0..n)
            .map(|j| {
                let e = C64::from_polar(r, 2.0 * PI * j as f64 / n as f64);
                gm.value(c + e).unwrap() * e
            })
            .sum::<C64>()
            / n as f64
    }

    #[test]
    fn residues_at_poles() {
        let gm = sample();
        assert!((residue_at(&gm, C64::new(0.0, 0.0)) - gm.p.a).norm() < 1e-10);
        assert!((residue_at(&gm, gm.p.v) + gm.p.a).norm() < 1e-10);
    }

    #[test]
    fn doubly_periodic() {
        let gm = sample();
        let z = C64::new(0.13, 0.21);
        let g = gm.value(z).unwrap();
        assert!((gm.value(z + 1.0).unwrap() - g).norm() < 1e-10);
        assert!((gm.value(z + gm.p.tau).unwrap() - g).norm() < 1e-10);
    }

    #[test]
    fn chart_round_trip() {
        let gm = sample();
        for sign in [Sign::Plus, Sign::Minus] {
            for j in 0..12 {
                let s = C64::from_polar(0.05 * (1.0 + j as f64 / 12.0), 0.7 * j as f64);
                let z = gm.chart_inverse(sign, s, None).unwrap();
                assert!((gm.neck_coordinate(sign, z, 0.1).unwrap() - s).norm() < 1e-12);
                let back = gm.chart_inverse(sign, gm.neck_coordinate(sign, z, 0.1).unwrap(), None).unwrap();
                assert!((back - z).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn chart_center_and_bounds() {
        let gm = sample();
        let near = gm.p.v + C64::new(1e-7, 0.0);
        assert!(gm.neck_coordinate(Sign::Plus, near, 0.1).unwrap().norm() < 1e-6);
        assert!(matches!(gm.neck_coordinate(Sign::Plus, gm.p.v + 0.2, 0.02), Err(Error::Chart(_))));
    }

    #[test]
    fn pole_taylor_matches_values() {
        let gm = sample();
        for sign in [Sign::Plus, Sign::Minus] {
            let h = gm.pole_taylor(sign, 10);
            let w = C64::new(0.01, -0.02);
            let mut series = gm.residue(sign) / w;
            let mut p = C64::new(1.0, 0.0);
            for c in &h {
                series += c * p;
                p *= w;
            }
            assert!((series - gm.value(gm.center(sign) + w).unwrap()).norm() < 1e-12);
        }
    }

    #[test]
    fn gluing_identity() {
        let t: f64 = 0.01;
        let st0 = sample();
        let st1 = GaussMap::new(TorusParams::central(2, C64::new(0.2, -0.3), C64::new(-0.15, 1.1)).unwrap()).unwrap();
        for j in 0..8 {
            let s = C64::from_polar(t, 0.8 * j as f64);
            let z0 = st0.chart_inverse(Sign::Plus, s, None).unwrap();
            let z1 = st1.chart_inverse(Sign::Minus, t * t / s, None).unwrap();
            // torus 1 is odd, torus 2 even
            let g0 = t * st0.value(z0).unwrap();
            let g1 = 1.0 / (t * st1.value(z1).unwrap());
            assert!((g0 - g1).norm() < 1e-10 * g0.norm());
        }
    }
}
