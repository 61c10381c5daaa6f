//! Complete elliptic integrals by the arithmetic-geometric mean.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Complete elliptic integrals `(K(m), E(m))` for parameter `0 < m < 1`.
pub fn elliptic_k_e(m: f64) -> Result<(f64, f64)> {
    if !(m > 0.0 && m < 1.0) {
        return Err(Error::Domain { value: m, domain: "(0, 1)" });
    }
    let mut a = 1.0f64;
    let mut b = (1.0 - m).sqrt();
    let mut c = m.sqrt();
    let mut sum = 0.5 * c * c;
    let mut pow = 0.5;
    for _ in 0..64 {
        if c.abs() <= f64::EPSILON * a {
            break;
        }
        let an = 0.5 * (a + b);
        let bn = (a * b).sqrt();
        c = 0.5 * (a - b);
        a = an;
        b = bn;
        pow *= 2.0;
        sum += pow * c * c;
    }
    let k = PI / (2.0 * a);
    Ok((k, k * (1.0 - sum)))
}

/// The angle `theta*` of the degenerate rectangular-rhombic modulus:
/// `2 atan(K(1-m)/K(m))` at the root of `2E(m) = K(m)`.
pub fn theta_star() -> f64 {
    let f = |m: f64| {
        let (k, e) = elliptic_k_e(m).expect("bracket inside (0,1)");
        2.0 * e - k
    };
    let (mut lo, mut hi) = (0.5, 0.99);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    let m = 0.5 * (lo + hi);
    let (k, _) = elliptic_k_e(m).unwrap();
    let (kp, _) = elliptic_k_e(1.0 - m).unwrap();
    2.0 * (kp / k).atan()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Gauss-Legendre-free oracle: composite Simpson on the smooth form
    /// `K = int_0^{pi/2} (1 - m sin^2)^{-1/2}`.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn matches_quadrature_at_half() {
        let m = 0.5;
        let (k, e) = elliptic_k_e(m).unwrap();
        let kq = simpson(|t| 1.0 / (1.0 - m * t.sin().powi(2)).sqrt(), 0.0, PI / 2.0, 2000);
        let eq = simpson(|t| (1.0 - m * t.sin().powi(2)).sqrt(), 0.0, PI / 2.0, 2000);
        assert!((k - kq).abs() < 1e-12, "{k} {kq}");
        assert!((e - eq).abs() < 1e-12, "{e} {eq}");
    }

    #[test]
    fn small_parameter_limit() {
        let (k, e) = elliptic_k_e(1e-12).unwrap();
        assert!((k - PI / 2.0).abs() < 1e-11 && (e - PI / 2.0).abs() < 1e-11);
    }

    #[test]
    fn domain_errors() {
        assert!(elliptic_k_e(0.0).is_err());
        assert!(elliptic_k_e(1.0).is_err());
        assert!(elliptic_k_e(f64::NAN).is_err());
    }

    #[test]
    fn theta_star_value() {
        assert!((theta_star() - 1.23409).abs() < 1e-4);
    }
}
