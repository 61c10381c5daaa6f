//! Stacking sequences `(q_k)` stored as a finite window with periodic tails.
//!
//! Tails are indexed by absolute position: for `k > K` the value is
//! `right_tail[k mod P]`, for `k < -K` it is `left_tail[k mod P]`. Growing
//! or shrinking the window therefore never changes the sequence.

use crate::elliptic::{c, Lattice, TorusPoint, C64};
use crate::error::{Error, Result};
use crate::hecke::{hecke_g_at, hecke_jacobian, solve_g_equals_c};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const BALANCE_TOL: f64 = 1e-10;
pub const NONDEG_TOL: f64 = 1e-8;
pub const MIN_SEPARATION: f64 = 1e-3;
pub const DEFAULT_HALF_WIDTH: usize = 8;

pub const CATALOG_NAMES: [&str; 14] = [
    "tP",
    "oPa",
    "oPb",
    "oCLP'",
    "rPD",
    "H",
    "oDelta",
    "twin-rPD",
    "rPD-H",
    "H-H-shift",
    "oPa-oCLP",
    "oCLP-rot-twin",
    "oPa-oDelta",
    "oH",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub tau: C64,
    /// `q_k` for `k = -K..=K`.
    pub window: Vec<C64>,
    pub left_tail: Vec<C64>,
    pub right_tail: Vec<C64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BalanceReport {
    /// Index of the first entry of `G_values`.
    pub k_start: i64,
    #[serde(rename = "G_values")]
    pub g_values: Vec<C64>,
    /// `F_k = G_{k+1} - G_k` for `k = k_start ..`.
    pub forces: Vec<C64>,
    pub max_force: f64,
    pub balanced: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NondegeneracyReport {
    pub min_singular_value: f64,
    pub nondegenerate: bool,
    pub worst_k: i64,
}

fn close(a: C64, b: C64) -> bool {
    (a - b).norm() < 1e-12
}

impl Configuration {
    pub fn new(tau: C64, window: Vec<C64>, left_tail: Vec<C64>, right_tail: Vec<C64>) -> Result<Self> {
        let cfg = Configuration { tau, window, left_tail, right_tail };
        cfg.validate()?;
        Ok(cfg)
    }

    /// A periodic configuration `q_k = pattern[k mod P]`.
    pub fn periodic(tau: C64, pattern: &[C64], half_width: usize) -> Result<Self> {
        let p = pattern.len() as i64;
        if p == 0 {
            return Err(Error::InvalidConfiguration("empty pattern".into()));
        }
        let k = half_width as i64;
        let window = (-k..=k).map(|j| pattern[j.rem_euclid(p) as usize]).collect();
        Self::new(tau, window, pattern.to_vec(), pattern.to_vec())
    }

    /// Builds the window from a rule on absolute indices.
    pub fn from_rule(
        tau: C64,
        half_width: usize,
        left_tail: Vec<C64>,
        right_tail: Vec<C64>,
        rule: impl Fn(i64) -> C64,
    ) -> Result<Self> {
        let k = half_width as i64;
        Self::new(tau, (-k..=k).map(rule).collect(), left_tail, right_tail)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau.im > 0.0) {
            return Err(Error::InvalidTau(self.tau));
        }
        if self.window.len() % 2 == 0 {
            return Err(Error::InvalidConfiguration(format!(
                "window must have odd length 2K+1, got {}",
                self.window.len()
            )));
        }
        if self.left_tail.is_empty() || self.right_tail.is_empty() {
            return Err(Error::InvalidConfiguration("tails must be non-empty".into()));
        }
        let lat = Lattice::new(self.tau)?;
        let all = self.window.iter().chain(&self.left_tail).chain(&self.right_tail);
        for q in all {
            let d = lat.distance_to_lattice(*q);
            if !(d >= MIN_SEPARATION) {
                return Err(Error::InvalidConfiguration(format!(
                    "q = {q} lies within {d:.3e} of the lattice (minimum {MIN_SEPARATION})"
                )));
            }
        }
        Ok(())
    }

    pub fn half_width(&self) -> i64 {
        (self.window.len() as i64 - 1) / 2
    }

    pub fn lattice(&self) -> Result<Lattice> {
        Lattice::new(self.tau)
    }

    /// `q_k` for any integer `k`.
    pub fn q(&self, k: i64) -> C64 {
        let kk = self.half_width();
        if k > kk {
            self.right_tail[k.rem_euclid(self.right_tail.len() as i64) as usize]
        } else if k < -kk {
            self.left_tail[k.rem_euclid(self.left_tail.len() as i64) as usize]
        } else {
            self.window[(k + kk) as usize]
        }
    }

    /// Smallest `P` with `q_{k+P} = q_k` for all `k`, if the sequence is periodic.
    pub fn period(&self) -> Option<usize> {
        let l = self.left_tail.len();
        let r = self.right_tail.len();
        let lcm = l / gcd(l, r) * r;
        'outer: for p in 1..=lcm {
            if lcm % p != 0 {
                continue;
            }
            let kk = self.half_width();
            let span = kk + 2 * lcm as i64;
            for k in -span..=span {
                if !close(self.q(k), self.q(k + p as i64)) {
                    continue 'outer;
                }
            }
            return Some(p);
        }
        None
    }

    /// Minimal period of the tail pattern on one side.
    pub fn tail_period(tail: &[C64]) -> usize {
        let n = tail.len();
        (1..=n).find(|p| n % p == 0 && (0..n).all(|i| close(tail[i], tail[(i + p) % n]))).unwrap_or(n)
    }

    /// The periodic configuration continuing the right tail in both directions.
    pub fn right_comparator(&self) -> Result<Self> {
        Self::periodic(self.tau, &self.right_tail, self.half_width() as usize)
    }

    pub fn left_comparator(&self) -> Result<Self> {
        Self::periodic(self.tau, &self.left_tail, self.half_width() as usize)
    }

    /// Same sequence, window half-width changed to `half_width`.
    pub fn with_half_width(&self, half_width: usize) -> Result<Self> {
        let k = half_width as i64;
        Self::new(self.tau, (-k..=k).map(|j| self.q(j)).collect(), self.left_tail.clone(), self.right_tail.clone())
    }

    /// Range `[lo, hi]` covering the window plus one tail period on each side.
    pub fn checked_range(&self) -> (i64, i64) {
        let kk = self.half_width();
        (-kk - self.left_tail.len() as i64, kk + self.right_tail.len() as i64)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Configuration = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Node positions `p_k = p_0 + q_1 + ... + q_k` for `k = -K..=K`.
pub fn positions(cfg: &Configuration, p0: TorusPoint) -> Vec<TorusPoint> {
    let lat = Lattice::new(cfg.tau).expect("validated configuration");
    let kk = cfg.half_width();
    let mut z = vec![C64::new(0.0, 0.0); (2 * kk + 1) as usize];
    let mid = kk as usize;
    z[mid] = p0.z;
    for k in 1..=kk {
        z[mid + k as usize] = z[mid + k as usize - 1] + cfg.q(k);
    }
    for k in (-kk..0).rev() {
        // p_k = p_{k+1} - q_{k+1}
        let i = (k + kk) as usize;
        z[i] = z[i + 1] - cfg.q(k + 1);
    }
    z.into_iter().map(|w| lat.reduce(w)).collect()
}

/// Forward differences `q_k = p_k - p_{k-1}` reduced to the torus, `k = -K+1..=K`.
pub fn differences(lat: &Lattice, points: &[TorusPoint]) -> Vec<TorusPoint> {
    points.windows(2).map(|w| lat.reduce(w[1].z - w[0].z)).collect()
}

pub fn balance_report(cfg: &Configuration) -> Result<BalanceReport> {
    let lat = cfg.lattice()?;
    let (lo, hi) = cfg.checked_range();
    let g_values = (lo..=hi)
        .map(|k| hecke_g_at(&lat, cfg.q(k)).map_err(|e| e.at_index(k)))
        .collect::<Result<Vec<_>>>()?;
    let forces: Vec<C64> = g_values.windows(2).map(|w| w[1] - w[0]).collect();
    let max_force = forces.iter().map(|f| f.norm()).fold(0.0, f64::max);
    Ok(BalanceReport { k_start: lo, g_values, forces, max_force, balanced: max_force < BALANCE_TOL })
}

/// Smallest singular value over the diagonal blocks `dG(q_k)`.
pub fn nondegeneracy_check(cfg: &Configuration) -> Result<NondegeneracyReport> {
    let lat = cfg.lattice()?;
    let (lo, hi) = cfg.checked_range();
    let mut best = (f64::INFINITY, lo);
    for k in lo..=hi {
        let j = hecke_jacobian(&lat, cfg.q(k)).map_err(|e| e.at_index(k))?;
        let s = j.min_singular_value();
        if s < best.0 {
            best = (s, k);
        }
    }
    Ok(NondegeneracyReport { min_singular_value: best.0, nondegenerate: best.0 > NONDEG_TOL, worst_k: best.1 })
}

/// Default family parameter for a catalog entry, if it has one.
pub fn default_parameter(name: &str) -> Option<f64> {
    match name {
        "oPa" | "oCLP'" | "oDelta" | "oPa-oCLP" | "oCLP-rot-twin" | "oPa-oDelta" => Some(1.5),
        "oPb" => Some(1.4),
        "oH" => Some(1.1),
        _ => None,
    }
}

pub fn catalog(name: &str) -> Result<Configuration> {
    catalog_with(name, None, DEFAULT_HALF_WIDTH)
}

/// Catalog recipe. `param` is `Im tau` for the rectangular families and the
/// angle `theta` of `tau = exp(i theta)` for oPb and oH.
pub fn catalog_with(name: &str, param: Option<f64>, half_width: usize) -> Result<Configuration> {
    let p = param.or_else(|| default_parameter(name));
    let rect = || c(0.0, p.unwrap());
    let hex = C64::from_polar(1.0, PI / 3.0);
    let third = (1.0 + hex) / 3.0;
    let k = half_width;
    let half = c(0.5, 0.0);
    match name {
        "tP" => Configuration::periodic(c(0.0, 1.0), &[(1.0 + c(0.0, 1.0)) / 2.0], k),
        "oPa" => Configuration::periodic(rect(), &[(1.0 + rect()) / 2.0], k),
        "oPb" => {
            let tau = C64::from_polar(1.0, p.unwrap());
            Configuration::periodic(tau, &[(1.0 + tau) / 2.0], k)
        }
        "oCLP'" => Configuration::periodic(rect(), &[half], k),
        "rPD" => Configuration::periodic(hex, &[third], k),
        "H" => Configuration::periodic(hex, &[third, -third], k),
        "oDelta" => Configuration::periodic(rect(), &[half, rect() / 2.0], k),
        "twin-rPD" => {
            Configuration::from_rule(hex, k, vec![third], vec![-third], |j| if j < 0 { third } else { -third })
        }
        "rPD-H" => Configuration::from_rule(hex, k, vec![third, -third], vec![-third], |j| {
            if j < 0 && j.rem_euclid(2) == 0 {
                third
            } else {
                -third
            }
        }),
        "H-H-shift" => Configuration::from_rule(hex, k, vec![third, -third], vec![-third, third], |j| {
            let even = j.rem_euclid(2) == 0;
            if (j < 0 && even) || (j > 0 && !even) {
                third
            } else {
                -third
            }
        }),
        "oPa-oCLP" => {
            let tau = rect();
            let pa = (1.0 + tau) / 2.0;
            Configuration::from_rule(tau, k, vec![half], vec![pa], |j| if j < 0 { half } else { pa })
        }
        "oCLP-rot-twin" => {
            let tau = rect();
            Configuration::from_rule(tau, k, vec![half], vec![tau / 2.0], |j| if j < 0 { half } else { tau / 2.0 })
        }
        "oPa-oDelta" => {
            let tau = rect();
            let pa = (1.0 + tau) / 2.0;
            Configuration::from_rule(tau, k, vec![tau / 2.0, half], vec![pa], |j| {
                if j >= 0 {
                    pa
                } else if j.rem_euclid(2) == 0 {
                    tau / 2.0
                } else {
                    half
                }
            })
        }
        "oH" => {
            let tau = C64::from_polar(1.0, p.unwrap());
            let q0 = rhombic_root(&Lattice::new(tau)?)?;
            Configuration::periodic(tau, &[q0, -q0], k)
        }
        _ => Err(Error::UnknownCatalog { name: name.to_string(), valid: CATALOG_NAMES.join(", ") }),
    }
}

/// Experimental: the root `c (1 + tau)` with `c < 1/2` of `G = 0` on a
/// rhombic torus `|tau| = 1`, found by bisection on the symmetry line.
pub fn rhombic_root(lat: &Lattice) -> Result<C64> {
    let tau = lat.tau();
    if (tau.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidConfiguration(format!("rhombic root needs |tau| = 1, got {tau}")));
    }
    let dir = (1.0 + tau) / (1.0 + tau).norm();
    let f = |s: f64| hecke_g_at(lat, s * (1.0 + tau)).map(|g| (g * dir.conj()).re);
    let (mut lo, mut hi) = (0.02, 0.5 - 1e-4);
    let (flo, fhi) = (f(lo)?, f(hi)?);
    if flo.signum() == fhi.signum() {
        return Err(Error::InvalidConfiguration(format!(
            "no non-trivial root on the diagonal for tau = {tau} (angle beyond the degenerate value)"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid)?.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-16 {
            break;
        }
    }
    // polish on the full 2D system
    let z = 0.5 * (lo + hi) * (1.0 + tau);
    Ok(crate::hecke::newton_root(lat, C64::new(0.0, 0.0), z, 20).unwrap_or(z))
}

/// Roots of `G = 0` usable as stacking values on this torus.
pub fn balanced_values(lat: &Lattice) -> Vec<C64> {
    solve_g_equals_c(lat, C64::new(0.0, 0.0), crate::hecke::DEFAULT_GRID).roots.iter().map(|r| r.z).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_period_positions_alternate() {
        let cfg = Configuration::periodic(c(0.0, 1.0), &[c(0.5, 0.0)], 3).unwrap();
        let ps = positions(&cfg, TorusPoint::from_coords(0.0, 0.0, cfg.tau));
        for (i, p) in ps.iter().enumerate() {
            let k = i as i64 - 3;
            let expect = if k.rem_euclid(2) == 0 { 0.0 } else { 0.5 };
            assert!((p.x - expect).abs() < 1e-14 && p.y.abs() < 1e-14, "{k}: {p:?}");
        }
    }

    #[test]
    fn rpd_positions_three_cycle() {
        let cfg = catalog("rPD").unwrap();
        let lat = cfg.lattice().unwrap();
        let ps = positions(&cfg, TorusPoint::from_coords(0.0, 0.0, cfg.tau));
        let kk = cfg.half_width();
        for (i, p) in ps.iter().enumerate() {
            let k = i as i64 - kk;
            assert!(lat.torus_distance(p.z, k as f64 * (1.0 + cfg.tau) / 3.0) < 1e-12);
            if i >= 3 {
                assert!(lat.torus_distance(p.z, ps[i - 3].z) < 1e-12);
            }
        }
    }

    #[test]
    fn h_positions_two_cycle() {
        let cfg = catalog("H").unwrap();
        let lat = cfg.lattice().unwrap();
        let ps = positions(&cfg, TorusPoint::from_coords(0.0, 0.0, cfg.tau));
        let third = (1.0 + cfg.tau) / 3.0;
        // q_1 = -(1+tau)/3, so the second node sits at -(1+tau)/3
        for p in &ps {
            assert!(lat.distance_to_lattice(p.z) < 1e-12 || lat.torus_distance(p.z, -third) < 1e-12);
        }
    }

    #[test]
    fn unbalanced_example() {
        let tau = c(0.0, 1.0);
        let cfg = Configuration::periodic(tau, &[c(0.5, 0.0), c(0.3, 0.1)], 2).unwrap();
        let r = balance_report(&cfg).unwrap();
        let lat = Lattice::new(tau).unwrap();
        let expect = (hecke_g_at(&lat, c(0.3, 0.1)).unwrap() - hecke_g_at(&lat, c(0.5, 0.0)).unwrap()).norm();
        assert!(!r.balanced);
        assert!((r.max_force - expect).abs() < 1e-12);
    }

    #[test]
    fn twin_rpd_recipe() {
        let cfg = catalog("twin-rPD").unwrap();
        let third = (1.0 + cfg.tau) / 3.0;
        assert!(close(cfg.q(-1), third) && close(cfg.q(-100), third));
        assert!(close(cfg.q(0), -third) && close(cfg.q(57), -third));
        assert_eq!(cfg.period(), None);
        assert_eq!(catalog("H").unwrap().period(), Some(2));
        assert_eq!(catalog("rPD").unwrap().period(), Some(1));
    }

    #[test]
    fn rotation_twin_recipe() {
        let cfg = catalog("oCLP-rot-twin").unwrap();
        assert_eq!(cfg.tau.re, 0.0);
        assert!(close(cfg.q(-3), c(0.5, 0.0)) && close(cfg.q(0), cfg.tau / 2.0));
        let od = catalog("oDelta").unwrap();
        assert!(close(od.q(0), c(0.5, 0.0)) && close(od.q(1), od.tau / 2.0) && close(od.q(-1), od.tau / 2.0));
    }

    #[test]
    fn unknown_name_lists_valid() {
        match catalog("gyroid") {
            Err(Error::UnknownCatalog { valid, .. }) => assert!(valid.contains("twin-rPD")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn separation_enforced() {
        assert!(Configuration::periodic(c(0.0, 1.0), &[c(1e-4, 0.0)], 1).is_err());
    }

    #[test]
    fn degenerate_obp_flagged() {
        let cfg = catalog_with("oPb", Some(crate::elliptic::theta_star()), 2).unwrap();
        assert!(balance_report(&cfg).unwrap().balanced);
        let r = nondegeneracy_check(&cfg).unwrap();
        assert!(!r.nondegenerate, "{r:?}");
    }

    #[test]
    fn rhombic_root_at_hexagonal_angle() {
        let lat = Lattice::new(C64::from_polar(1.0, PI / 3.0)).unwrap();
        let q = rhombic_root(&lat).unwrap();
        assert!((q - (1.0 + lat.tau()) / 3.0).norm() < 1e-9);
    }

    #[test]
    fn window_growth_preserves_sequence() {
        let cfg = catalog("oPa-oDelta").unwrap();
        let big = cfg.with_half_width(12).unwrap();
        for k in -30..30 {
            assert!(close(cfg.q(k), big.q(k)));
        }
    }
}
