//! The Hecke form `G(q; tau) = zeta(q) - xi(q)` and the equation `G = C`.

use crate::elliptic::{c, Lattice, TorusPoint, C64};
use crate::error::Result;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const ROOT_TOL: f64 = 1e-10;
pub const DEDUP_RADIUS: f64 = 1e-6;
pub const DEGENERACY_TOL: f64 = 1e-9;
pub const DEFAULT_GRID: usize = 32;

/// Real differential of `G` in the coordinates `(Re q, Im q)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeckeJacobian {
    pub m: [[f64; 2]; 2],
    pub det: f64,
}

impl HeckeJacobian {
    /// Smallest singular value of `m`.
    pub fn min_singular_value(&self) -> f64 {
        let [[a, b], [cc, d]] = self.m;
        let s = a * a + b * b + cc * cc + d * d;
        let disc = ((a * a + b * b - cc * cc - d * d).powi(2) + 4.0 * (a * cc + b * d).powi(2)).sqrt();
        let smax = (0.5 * (s + disc)).sqrt();
        if smax == 0.0 {
            0.0
        } else {
            self.det.abs() / smax
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolutionSet {
    pub tau: C64,
    #[serde(rename = "C")]
    pub c: C64,
    pub count: usize,
    pub roots: Vec<TorusPoint>,
    pub jacobians: Vec<HeckeJacobian>,
    /// Grid cells `(i, j)` whose Newton run did not converge.
    pub failed_seeds: Vec<(usize, usize)>,
}

/// `G` at an arbitrary representative. The linear `xi` makes this exactly
/// lattice periodic.
pub fn hecke_g_at(lat: &Lattice, z: C64) -> Result<C64> {
    Ok(lat.zeta(z)? - lat.xi_linear(z))
}

pub fn hecke_g(q: &TorusPoint, lat: &Lattice) -> Result<C64> {
    hecke_g_at(lat, q.z)
}

/// Wirtinger derivatives `(dG/dq, dG/dq̄)`.
pub fn hecke_wirtinger(lat: &Lattice, z: C64) -> Result<(C64, C64)> {
    let wp = lat.wp_eval(z, 0)?;
    let s = PI / lat.tau().im;
    Ok((-wp - lat.eta1() + s, c(-s, 0.0)))
}

pub fn hecke_jacobian(lat: &Lattice, z: C64) -> Result<HeckeJacobian> {
    let (a, b) = hecke_wirtinger(lat, z)?;
    let dx = a + b;
    let dy = C64::i() * (a - b);
    Ok(HeckeJacobian { m: [[dx.re, dy.re], [dx.im, dy.im]], det: a.norm_sqr() - b.norm_sqr() })
}

/// Newton on the real system `G(z) = C`, starting from `z0`.
pub fn newton_root(lat: &Lattice, target: C64, z0: C64, max_iter: usize) -> Option<C64> {
    let mut z = z0;
    let step_cap = 0.25 * lat.tau().im.min(1.0);
    for _ in 0..max_iter {
        let f = hecke_g_at(lat, z).ok()? - target;
        if f.norm() < 1e-13 * (1.0 + target.norm()) {
            return Some(z);
        }
        let (a, b) = hecke_wirtinger(lat, z).ok()?;
        let det = a.norm_sqr() - b.norm_sqr();
        if det.abs() < 1e-300 {
            return None;
        }
        let mut dz = (-f * a.conj() + b * f.conj()) / det;
        if dz.norm() > step_cap {
            dz *= step_cap / dz.norm();
        }
        z = lat.nearest_representative(z + dz);
        if dz.norm() < 1e-15 {
            break;
        }
    }
    let f = hecke_g_at(lat, z).ok()? - target;
    (f.norm() < ROOT_TOL).then_some(z)
}

fn push_unique(lat: &Lattice, roots: &mut Vec<TorusPoint>, z: C64) {
    if roots.iter().all(|r| lat.torus_distance(r.z, z) > DEDUP_RADIUS) {
        roots.push(lat.reduce(z));
    }
}

/// All solutions of `G(q; tau) = C`, seeded from an `n x n` grid.
pub fn solve_g_equals_c(lat: &Lattice, target: C64, grid: usize) -> SolutionSet {
    let mut roots = Vec::new();
    let mut failed = Vec::new();
    for i in 0..grid {
        for j in 0..grid {
            let z0 = lat.from_lattice_coords((i as f64 + 0.5) / grid as f64, (j as f64 + 0.5) / grid as f64);
            if lat.distance_to_lattice(z0) < lat.pole_radius() {
                continue;
            }
            match newton_root(lat, target, z0, 80) {
                Some(z) => push_unique(lat, &mut roots, z),
                None => failed.push((i, j)),
            }
        }
    }
    if target == C64::new(0.0, 0.0) {
        for w in half_periods(lat) {
            if let Some(z) = newton_root(lat, target, w, 20) {
                push_unique(lat, &mut roots, z);
            }
        }
    }
    roots.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    let jacobians = roots.iter().map(|r| hecke_jacobian(lat, r.z).expect("roots are off-lattice")).collect();
    SolutionSet { tau: lat.tau(), c: target, count: roots.len(), roots, jacobians, failed_seeds: failed }
}

pub fn half_periods(lat: &Lattice) -> [C64; 3] {
    let tau = lat.tau();
    [c(0.5, 0.0), tau / 2.0, (1.0 + tau) / 2.0]
}

/// Fixed-point iteration of the antiholomorphic map
/// `z -> z - (conj(G(z)) - conj(C)) / b`, `b = -pi / Im tau`.
pub fn antiholomorphic_iterate(lat: &Lattice, target: C64, z0: C64, max_iter: usize) -> Option<TorusPoint> {
    let b = -PI / lat.tau().im;
    let mut z = z0;
    for _ in 0..max_iter {
        let g = hecke_g_at(lat, z).ok()?;
        let next = lat.nearest_representative(z - (g.conj() - target.conj()) / b);
        let step = (next - z).norm();
        z = next;
        if !step.is_finite() {
            return None;
        }
        if step < 1e-14 {
            let r = hecke_g_at(lat, z).ok()? - target;
            return (r.norm() < ROOT_TOL).then(|| lat.reduce(z));
        }
    }
    None
}

/// Distinct attracting fixed points reached from an `n x n` seed grid.
pub fn attracting_fixed_points(lat: &Lattice, target: C64, grid: usize, max_iter: usize) -> Vec<TorusPoint> {
    let mut out = Vec::new();
    for i in 0..grid {
        for j in 0..grid {
            let z0 = lat.from_lattice_coords((i as f64 + 0.5) / grid as f64, (j as f64 + 0.5) / grid as f64);
            if lat.distance_to_lattice(z0) < 1e-3 {
                continue;
            }
            if let Some(p) = antiholomorphic_iterate(lat, target, z0, max_iter) {
                push_unique(lat, &mut out, p.z);
            }
        }
    }
    out
}

/// Period quotient `(tau wp(w) + eta2) / (wp(w) + eta1)` at the 2-division
/// point selected by `which` (1: 1/2, 2: tau/2, 3: (1+tau)/2).
pub fn degeneracy_2division(lat: &Lattice, which: u8) -> Result<(C64, bool)> {
    let w = match which {
        1..=3 => half_periods(lat)[which as usize - 1],
        _ => return Err(crate::Error::Invalid(format!("2-division selector must be 1, 2 or 3, got {which}"))),
    };
    let wp = lat.wp_eval(w, 0)?;
    let quotient = (lat.tau() * wp + lat.eta2()) / (wp + lat.eta1());
    Ok((quotient, quotient.im.abs() < DEGENERACY_TOL))
}

/// Root counts of `G = C` over a grid of moduli.
pub fn atlas(re: (f64, f64), im: (f64, f64), n_re: usize, n_im: usize, target: C64, grid: usize) -> Result<Vec<(C64, usize)>> {
    let mut out = Vec::with_capacity(n_re * n_im);
    let lerp = |(a, b): (f64, f64), i: usize, n: usize| if n <= 1 { a } else { a + (b - a) * i as f64 / (n - 1) as f64 };
    for j in 0..n_im {
        for i in 0..n_re {
            let tau = c(lerp(re, i, n_re), lerp(im, j, n_im));
            let lat = Lattice::new(tau)?;
            out.push((tau, solve_g_equals_c(&lat, target, grid).count));
        }
    }
    Ok(out)
}
