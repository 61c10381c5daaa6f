//! Weierstrass immersion of a solved gluing state: layer patches on the
//! tori, catenoidal half necks from the chart Laurent series, and
//! embeddedness diagnostics on the resulting triangle mesh.

use crate::config::Configuration;
use crate::elliptic::{Lattice, C64};
use crate::error::{Error, Result};
use crate::opening::{laurent_from_coeffs, LaurentTable, OmegaSeries, Sign};
use crate::solver::{gl_rule, System, TorusEval};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

pub const DEFAULT_GRID: usize = 64;
pub const DEFAULT_RINGS: usize = 16;
pub const DEFAULT_SPOKES: usize = 64;
pub const LOOP_TOL: f64 = 1e-8;
pub const TAIL_TOL: f64 = 1e-7;
pub const LAURENT_ORDER: usize = 32;
pub const GRAPH_TOL: f64 = 0.1;
pub const CONVEX_SLACK: f64 = 0.05;

/// `(Phi_1, Phi_2, Phi_3)` per unit of the coordinate in which `omega` is
/// given, on torus `k` with local Gauss map value `gk`.
pub fn weierstrass_phi(k: i64, t: f64, gk: C64, omega: C64) -> [C64; 3] {
    let dh = omega * t;
    // g = (t g_k)^((-1)^(k+1))
    let (g, ginv) = if k.rem_euclid(2) == 0 { (1.0 / (gk * t), gk * t) } else { (gk * t, 1.0 / (gk * t)) };
    [0.5 * (ginv - g) * dh, C64::new(0.0, 0.5) * (ginv + g) * dh, dh]
}

/// Horizontal part `X = x_1 + i x_2` of a displacement.
pub fn horizontal(p: [f64; 3]) -> C64 {
    C64::new(p[0], p[1])
}

fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm3(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Laurent series `sum_j c[j - lo] s^j`.
#[derive(Clone, Debug)]
pub struct Laurent {
    pub lo: i32,
    pub c: Vec<C64>,
}

impl Laurent {
    pub fn from_table(t: &LaurentTable) -> Laurent {
        let lo = -(t.minus.len() as i32) - 1;
        let mut c: Vec<C64> = t.minus.iter().rev().copied().collect();
        c.push(t.residue);
        c.extend(t.plus.iter().copied());
        Laurent { lo, c }
    }

    /// The series times `f s^m`.
    pub fn shifted(&self, m: i32, f: C64) -> Laurent {
        Laurent { lo: self.lo + m, c: self.c.iter().map(|x| x * f).collect() }
    }

    pub fn coeff(&self, j: i32) -> C64 {
        let i = j - self.lo;
        if i < 0 || i as usize >= self.c.len() {
            C64::new(0.0, 0.0)
        } else {
            self.c[i as usize]
        }
    }

    pub fn combine(a: &Laurent, fa: C64, b: &Laurent, fb: C64) -> Laurent {
        let lo = a.lo.min(b.lo);
        let hi = (a.lo + a.c.len() as i32).max(b.lo + b.c.len() as i32);
        Laurent { lo, c: (lo..hi).map(|j| fa * a.coeff(j) + fb * b.coeff(j)).collect() }
    }

    pub fn eval(&self, s: C64) -> C64 {
        self.c.iter().enumerate().map(|(i, c)| c * s.powi(self.lo + i as i32)).sum()
    }

    /// Antiderivative with `log s = ln|s| + i arg`.
    pub fn primitive(&self, s: C64, arg: f64) -> C64 {
        let mut v = C64::new(0.0, 0.0);
        for (i, c) in self.c.iter().enumerate() {
            let j = self.lo + i as i32;
            if j == -1 {
                v += c * C64::new(s.norm().ln(), arg);
            } else {
                v += c * s.powi(j + 1) / (j + 1) as f64;
            }
        }
        v
    }
}

/// `Phi / ds` in one chart of torus `k` as Laurent series.
#[derive(Clone, Debug)]
pub struct ChartSeries {
    pub sign: Sign,
    pub phi: [Laurent; 3],
    pub tail: f64,
}

impl ChartSeries {
    pub fn new(k: i64, t: f64, table: &LaurentTable, sign: Sign, radius: f64) -> ChartSeries {
        let w = Laurent::from_table(table);
        let one = C64::new(1.0, 0.0);
        let s_w = w.shifted(1, one);
        let w_s = w.shifted(-1, C64::new(t * t, 0.0));
        // g dh and g^-1 dh
        let (gdh, ginvdh) = if k.rem_euclid(2) == 0 { (s_w, w_s) } else { (w_s, s_w) };
        let phi1 = Laurent::combine(&ginvdh, C64::new(0.5, 0.0), &gdh, C64::new(-0.5, 0.0));
        let phi2 = Laurent::combine(&ginvdh, C64::new(0.0, 0.5), &gdh, C64::new(0.0, 0.5));
        let phi3 = w.shifted(0, C64::new(t, 0.0));
        ChartSeries { sign, phi: [phi1, phi2, phi3], tail: table.tail_estimate(radius) }
    }

    /// `Re (F(s1) - F(s0))` along a path whose argument runs from `a0` to `a1`.
    pub fn displacement(&self, s0: C64, a0: f64, s1: C64, a1: f64) -> [f64; 3] {
        let d = |l: &Laurent| (l.primitive(s1, a1) - l.primitive(s0, a0)).re;
        [d(&self.phi[0]), d(&self.phi[1]), d(&self.phi[2])]
    }
}

/// Weierstrass data of torus `k` of a solved state.
pub struct TorusView<'a> {
    pub k: i64,
    pub t: f64,
    pub ev: &'a TorusEval,
    pub coeffs: Vec<C64>,
    pub n_max: usize,
}

impl<'a> TorusView<'a> {
    pub fn new(sys: &'a System, series: &OmegaSeries, k: i64) -> Result<TorusView<'a>> {
        let st = &sys.state;
        let i = if st.is_cyclic() {
            (k - st.k_start).rem_euclid(st.len() as i64) as usize
        } else {
            st.index_of(k).ok_or_else(|| Error::Invalid(format!("layer {k} outside the solved range")))?
        };
        Ok(TorusView { k, t: st.t, ev: &sys.evals[i], coeffs: series.coeffs(i), n_max: series.n_max })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.ev.data.gm.lat
    }

    /// Corner `O_k` of the fundamental parallelogram.
    pub fn origin(&self) -> C64 {
        self.lattice().from_lattice_coords(self.ev.origin.0, self.ev.origin.1)
    }

    /// Pole of the chart, translated into the parallelogram.
    pub fn center(&self, sign: Sign) -> C64 {
        let idx = if sign == Sign::Minus { 0 } else { 1 };
        self.ev.data.gm.center(sign) + self.ev.shift[idx]
    }

    pub fn omega(&self, z: C64) -> C64 {
        let d = &self.ev.data;
        d.forms.combine(&self.coeffs, &d.forms.eval_all(&d.gm, z))
    }

    /// `Phi / dz` at `z`.
    pub fn phi(&self, z: C64) -> [C64; 3] {
        weierstrass_phi(self.k, self.t, self.ev.data.gm.value_unchecked(z), self.omega(z))
    }

    /// `Re int_a^b Phi` along the segment, 8-point Gauss-Legendre.
    pub fn segment(&self, a: C64, b: C64) -> [f64; 3] {
        let half = (b - a) * 0.5;
        let mid = (a + b) * 0.5;
        let mut acc = [C64::new(0.0, 0.0); 3];
        for &(x, w) in gl8() {
            let p = self.phi(mid + half * x);
            for c in 0..3 {
                acc[c] += p[c] * w;
            }
        }
        [(acc[0] * half).re, (acc[1] * half).re, (acc[2] * half).re]
    }

    pub fn chart_series(&self, sign: Sign, radius: f64) -> Result<ChartSeries> {
        let table = laurent_from_coeffs(&self.ev.data, &self.coeffs, sign, LAURENT_ORDER, self.n_max);
        let cs = ChartSeries::new(self.k, self.t, &table, sign, radius);
        if !(cs.tail <= TAIL_TOL) {
            return Err(Error::CoefficientDecay { k: self.k, estimate: cs.tail });
        }
        Ok(cs)
    }
}

fn gl8() -> &'static [(f64, f64)] {
    use std::sync::OnceLock;
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| gl_rule(8))
}

/// Mesh vertex provenance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tag {
    Layer { k: i64 },
    Neck { k: i64, sign: Sign },
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SurfaceMesh {
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<[usize; 3]>,
    pub tags: Vec<Tag>,
}

impl SurfaceMesh {
    fn push(&mut self, p: [f64; 3], tag: Tag) -> usize {
        self.vertices.push(p);
        self.tags.push(tag);
        self.vertices.len() - 1
    }

    pub fn face_normal(&self, f: usize) -> [f64; 3] {
        let [a, b, c] = self.faces[f];
        let n = cross(sub(self.vertices[b], self.vertices[a]), sub(self.vertices[c], self.vertices[a]));
        let l = norm3(n);
        [n[0] / l, n[1] / l, n[2] / l]
    }

    /// Tag of a face: the tag of its first vertex.
    pub fn face_tag(&self, f: usize) -> Tag {
        self.tags[self.faces[f][0]]
    }

    pub fn translated(&self, d: [f64; 3]) -> SurfaceMesh {
        SurfaceMesh {
            vertices: self.vertices.iter().map(|v| add(*v, d)).collect(),
            faces: self.faces.clone(),
            tags: self.tags.clone(),
        }
    }

    pub fn append(&mut self, other: &SurfaceMesh) {
        let off = self.vertices.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.tags.extend_from_slice(&other.tags);
        self.faces.extend(other.faces.iter().map(|f| [f[0] + off, f[1] + off, f[2] + off]));
    }

    pub fn write_obj<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# stacked minimal surface mesh")?;
        for v in &self.vertices {
            writeln!(w, "v {:.17e} {:.17e} {:.17e}", v[0], v[1], v[2])?;
        }
        for f in &self.faces {
            writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
        }
        Ok(())
    }
}

/// Position of the corner `O_k` and the layer base data.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LayerFrame {
    pub k: i64,
    /// `O_k` in the torus coordinate.
    pub origin: C64,
    pub position: [f64; 3],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NeckCenter {
    pub k: i64,
    /// `X(w_k)` with the normalisation `X(w_0) = p_0`.
    pub center: C64,
    pub height: f64,
    /// Distance of `X(w_k) - p_k` to the lattice.
    pub drift: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpacingEntry {
    pub k: i64,
    pub spacing: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeshOptions {
    pub grid: usize,
    pub rings: usize,
    pub spokes: usize,
}

impl Default for MeshOptions {
    fn default() -> Self {
        MeshOptions { grid: DEFAULT_GRID, rings: DEFAULT_RINGS, spokes: DEFAULT_SPOKES }
    }
}

/// A half neck in one chart: rings from the cut circle down to `|s| = t`.
struct HalfNeck {
    series: ChartSeries,
    /// Spoke arguments.
    args: Vec<f64>,
    radii: Vec<f64>,
    /// Position of ring 0, spoke 0 relative to `O_k`.
    base: [f64; 3],
    /// Grid loop around the hole, as node indices.
    hole: Vec<usize>,
    ring_z: Vec<C64>,
    stitch: f64,
}

impl HalfNeck {
    fn position(&self, ring: usize, spoke: usize) -> [f64; 3] {
        let s0 = C64::from_polar(self.radii[0], self.args[0]);
        let s = C64::from_polar(self.radii[ring], self.args[spoke]);
        add(self.base, self.series.displacement(s0, self.args[0], s, self.args[spoke]))
    }
}

/// Layer patch on one torus: grid positions relative to `O_k` and both
/// half necks.
struct LayerPatch {
    k: i64,
    origin: C64,
    n: usize,
    nodes: Vec<C64>,
    pos: Vec<Option<[f64; 3]>>,
    cells: Vec<(usize, usize)>,
    loop_residual: f64,
    necks: [HalfNeck; 2],
}

fn layer_patch(view: &TorusView, opts: &MeshOptions, strict: bool) -> Result<LayerPatch> {
    let n = opts.grid;
    let lat = view.lattice();
    let (ox, oy) = view.ev.origin;
    let eps = view.ev.data.epsilon;
    let r_cut = eps;
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let nodes: Vec<C64> = (0..=n)
        .flat_map(|j| (0..=n).map(move |i| (i, j)))
        .map(|(i, j)| lat.from_lattice_coords(ox + i as f64 / n as f64, oy + j as f64 / n as f64))
        .collect();
    let centers = [view.center(Sign::Minus), view.center(Sign::Plus)];
    let gm = &view.ev.data.gm;
    let removed: Vec<bool> = nodes
        .par_iter()
        .map(|&z| {
            let near = centers.iter().any(|c| (z - c).norm() < 4.0 * eps * gm.p.a.norm().max(1.0));
            near && (1.0 / gm.value_unchecked(z)).norm() < 1.05 * r_cut
        })
        .collect();
    let mut cells = Vec::new();
    let mut in_cell = vec![false; nodes.len()];
    for j in 0..n {
        for i in 0..n {
            let c = [idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)];
            if c.iter().all(|&m| !removed[m]) {
                cells.push((i, j));
                for m in c {
                    in_cell[m] = true;
                }
            }
        }
    }
    // edge integrals: horizontal (i,j)->(i+1,j) and vertical (i,j)->(i,j+1)
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut edge_id: HashMap<(usize, usize), usize> = HashMap::new();
    for &(i, j) in &cells {
        for e in [(idx(i, j), idx(i + 1, j)), (idx(i + 1, j), idx(i + 1, j + 1)), (idx(i, j + 1), idx(i + 1, j + 1)), (idx(i, j), idx(i, j + 1))] {
            edge_id.entry(e).or_insert_with(|| {
                edges.push(e);
                edges.len() - 1
            });
        }
    }
    let integrals: Vec<[f64; 3]> = edges.par_iter().map(|&(a, b)| view.segment(nodes[a], nodes[b])).collect();
    let mut loop_residual: f64 = 0.0;
    for &(i, j) in &cells {
        let e = |a, b| integrals[edge_id[&(a, b)]];
        let r = sub(
            add(e(idx(i, j), idx(i + 1, j)), e(idx(i + 1, j), idx(i + 1, j + 1))),
            add(e(idx(i, j), idx(i, j + 1)), e(idx(i, j + 1), idx(i + 1, j + 1))),
        );
        loop_residual = loop_residual.max(norm3(r));
    }
    if strict && loop_residual > LOOP_TOL {
        return Err(Error::LoopResidual { k: view.k, residual: loop_residual });
    }
    // breadth-first positions from O_k
    let mut adj: HashMap<usize, Vec<(usize, usize, bool)>> = HashMap::new();
    for (e, &(a, b)) in edges.iter().enumerate() {
        adj.entry(a).or_default().push((b, e, true));
        adj.entry(b).or_default().push((a, e, false));
    }
    let mut pos: Vec<Option<[f64; 3]>> = vec![None; nodes.len()];
    let start = idx(0, 0);
    if !in_cell[start] {
        return Err(Error::Chart("layer corner lies inside a neck disk".into()));
    }
    pos[start] = Some([0.0; 3]);
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(a) = queue.pop_front() {
        let pa = pos[a].unwrap();
        for &(b, e, fwd) in &adj[&a] {
            if pos[b].is_none() {
                let d = integrals[e];
                pos[b] = Some(if fwd { add(pa, d) } else { sub(pa, d) });
                queue.push_back(b);
            }
        }
    }

    // hole loops: edges used by one kept cell, off the outer border
    let mut count: HashMap<(usize, usize), u8> = HashMap::new();
    for &(i, j) in &cells {
        for e in [(idx(i, j), idx(i + 1, j)), (idx(i + 1, j), idx(i + 1, j + 1)), (idx(i, j + 1), idx(i + 1, j + 1)), (idx(i, j), idx(i, j + 1))] {
            *count.entry(e).or_default() += 1;
        }
    }
    let on_border = |m: usize| {
        let (i, j) = (m % (n + 1), m / (n + 1));
        i == 0 || j == 0 || i == n || j == n
    };
    let mut badj: HashMap<usize, Vec<usize>> = HashMap::new();
    for (&(a, b), &c) in &count {
        if c == 1 && !(on_border(a) && on_border(b)) {
            badj.entry(a).or_default().push(b);
            badj.entry(b).or_default().push(a);
        }
    }
    if badj.values().any(|v| v.len() != 2) {
        return Err(Error::Chart(format!("neck hole boundary on torus {} is not a simple loop", view.k)));
    }
    let mut loops: Vec<Vec<usize>> = Vec::new();
    let mut seen: std::collections::HashSet<usize> = std::collections::HashSet::new();
    let mut keys: Vec<usize> = badj.keys().copied().collect();
    keys.sort_unstable();
    for &s in &keys {
        if seen.contains(&s) {
            continue;
        }
        let mut lp = vec![s];
        seen.insert(s);
        let mut prev = s;
        let mut cur = badj[&s][0];
        while cur != s {
            seen.insert(cur);
            lp.push(cur);
            let nb = &badj[&cur];
            let next = if nb[0] == prev { nb[1] } else { nb[0] };
            prev = cur;
            cur = next;
        }
        loops.push(lp);
    }
    let mut holes: [Option<Vec<usize>>; 2] = [None, None];
    for lp in loops {
        let mean = lp.iter().map(|&m| nodes[m]).sum::<C64>() / lp.len() as f64;
        let which = if (mean - centers[0]).norm() < (mean - centers[1]).norm() { 0 } else { 1 };
        if holes[which].replace(lp).is_some() {
            return Err(Error::Chart(format!("torus {} has more than one hole per neck", view.k)));
        }
    }

    let m = opts.spokes;
    let mut necks = Vec::with_capacity(2);
    for (si, sign) in [Sign::Minus, Sign::Plus].into_iter().enumerate() {
        let hole = holes[si].take().ok_or_else(|| Error::Chart(format!("no {sign} neck hole on torus {}", view.k)))?;
        let dir = if sign == Sign::Plus { 1.0 } else { -1.0 };
        let args: Vec<f64> = (0..m).map(|j| dir * 2.0 * PI * j as f64 / m as f64).collect();
        let t = view.t;
        let radii: Vec<f64> =
            (0..=opts.rings).map(|i| r_cut * (t / r_cut).powf(i as f64 / opts.rings as f64)).collect();
        let shift = view.ev.shift[si];
        let mut ring_z = Vec::with_capacity(m);
        let mut seed = None;
        for &a in &args {
            let z = gm.chart_inverse(sign, C64::from_polar(r_cut, a), seed)?;
            seed = Some(z);
            ring_z.push(z + shift);
        }
        let series = view.chart_series(sign, r_cut)?;
        let from_layer = |j: usize| -> [f64; 3] {
            let near = *hole.iter().min_by(|&&a, &&b| (nodes[a] - ring_z[j]).norm().total_cmp(&(nodes[b] - ring_z[j]).norm())).unwrap();
            add(pos[near].unwrap(), view.segment(nodes[near], ring_z[j]))
        };
        let layer_ring: Vec<[f64; 3]> = (0..m).map(from_layer).collect();
        let mut neck = HalfNeck { series, args, radii, base: layer_ring[0], hole, ring_z, stitch: 0.0 };
        neck.stitch = (0..m).map(|j| norm3(sub(layer_ring[j], neck.position(0, j)))).fold(0.0, f64::max);
        necks.push(neck);
    }
    let plus = necks.pop().unwrap();
    let minus = necks.pop().unwrap();
    Ok(LayerPatch { k: view.k, origin: view.origin(), n, nodes, pos, cells, loop_residual, necks: [minus, plus] })
}

/// Coarse layer patch: node positions relative to `O_k` in grid order
/// (`None` inside the neck disks) and the waist points of both half necks.
#[derive(Clone, Debug)]
pub struct LayerGeometry {
    pub positions: Vec<Option<[f64; 3]>>,
    pub up: [f64; 3],
    pub down: [f64; 3],
}

pub fn layer_geometry(view: &TorusView, grid: usize) -> Result<LayerGeometry> {
    let p = layer_patch(view, &MeshOptions { grid, rings: 1, spokes: 8 }, false)?;
    Ok(LayerGeometry { positions: p.pos, up: p.necks[1].position(1, 0), down: p.necks[0].position(1, 0) })
}

/// Triangulates the band between two closed loops around `center`.
fn zipper(outer: &[(usize, C64)], inner: &[(usize, C64)], center: C64) -> Vec<[usize; 3]> {
    let ccw = |l: &[(usize, C64)]| -> Vec<(usize, f64)> {
        let area: f64 = (0..l.len()).map(|i| {
            let (a, b) = (l[i].1 - center, l[(i + 1) % l.len()].1 - center);
            a.re * b.im - a.im * b.re
        }).sum();
        let mut v: Vec<(usize, f64)> = l.iter().map(|(i, z)| (*i, (z - center).arg())).collect();
        if area < 0.0 {
            v.reverse();
        }
        v
    };
    let a = ccw(outer);
    let b = ccw(inner);
    let b0 = b[0].1;
    let rel = |x: f64| (x - b0).rem_euclid(2.0 * PI);
    let rel_start = |x: f64| {
        let r = rel(x);
        if r > PI { r - 2.0 * PI } else { r }
    };
    let start = (0..a.len()).min_by(|&i, &j| rel_start(a[i].1).abs().total_cmp(&rel_start(a[j].1).abs())).unwrap();
    let unwrap = |seq: Vec<f64>, first: f64| -> Vec<f64> {
        let mut out = vec![first];
        for w in seq.windows(2) {
            let d = (w[1] - w[0]).rem_euclid(2.0 * PI);
            let d = if d > PI { d - 2.0 * PI } else { d };
            out.push(out.last().unwrap() + d);
        }
        out
    };
    let na = a.len();
    let nb = b.len();
    let aseq: Vec<(usize, f64)> = (0..=na).map(|i| a[(start + i) % na]).collect();
    let bseq: Vec<(usize, f64)> = (0..=nb).map(|j| b[j % nb]).collect();
    let aang = unwrap(aseq.iter().map(|x| x.1).collect(), rel_start(aseq[0].1));
    let bang = unwrap(bseq.iter().map(|x| x.1).collect(), 0.0);
    let (mut i, mut j) = (0, 0);
    let mut tris = Vec::with_capacity(na + nb);
    while i < na || j < nb {
        if j == nb || (i < na && aang[i + 1] <= bang[j + 1]) {
            tris.push([aseq[i].0, aseq[i + 1].0, bseq[j].0]);
            i += 1;
        } else {
            tris.push([aseq[i].0, bseq[j + 1].0, bseq[j].0]);
            j += 1;
        }
    }
    tris
}

/// Diagnostics of the immersion.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct MeshDiagnostics {
    pub loop_residual: f64,
    /// Layer ring positions: grid integration against the Laurent primitive.
    pub stitch: f64,
    /// Gap between the two half necks at `|s| = t`.
    pub neck_mismatch: f64,
    pub laurent_tail: f64,
}

/// Immersed surface over a range of layers.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Immersion {
    pub t: f64,
    pub tau: C64,
    pub frames: Vec<LayerFrame>,
    pub necks: Vec<NeckCenter>,
    pub mesh: SurfaceMesh,
    pub diagnostics: MeshDiagnostics,
}

/// Builds the immersion of layers `k_lo..=k_hi` of a solved system.
pub fn immerse(
    cfg: &Configuration,
    sys: &System,
    series: &OmegaSeries,
    k_lo: i64,
    k_hi: i64,
    opts: &MeshOptions,
) -> Result<Immersion> {
    if k_hi < k_lo {
        return Err(Error::Invalid(format!("empty layer range {k_lo}..={k_hi}")));
    }
    if !(sys.state.t > 0.0) {
        return Err(Error::Invalid("the immersion needs t > 0".into()));
    }
    let views = (k_lo..=k_hi).map(|k| TorusView::new(sys, series, k)).collect::<Result<Vec<_>>>()?;
    let patches = views.iter().map(|v| layer_patch(v, opts, true)).collect::<Result<Vec<_>>>()?;
    let rings = opts.rings;
    let m = opts.spokes;

    // frames: O_{k+1} = O_k + plus neck to the waist - minus neck of k+1
    let mut frame = vec![[0.0; 3]; patches.len()];
    for i in 1..patches.len() {
        let up = patches[i - 1].necks[1].position(rings, 0);
        let down = patches[i].necks[0].position(rings, 0);
        frame[i] = sub(add(frame[i - 1], up), down);
    }
    let waist = |frame: &[[f64; 3]], i: usize| -> [f64; 3] {
        let nk = &patches[i].necks[1];
        let mut c = [0.0; 3];
        for j in 0..m {
            c = add(c, nk.position(rings, j));
        }
        add(frame[i], [c[0] / m as f64, c[1] / m as f64, c[2] / m as f64])
    };
    // X(w_0) = p_0 = 0 and h(O_0) = 0 when layer 0 is meshed
    let i0 = (-k_lo).clamp(0, patches.len() as i64 - 1) as usize;
    let w0 = waist(&frame, i0);
    let p_ref = neck_position(cfg, patches[i0].k);
    let shift = [p_ref.re - w0[0], p_ref.im - w0[1], -frame[i0][2]];
    for f in frame.iter_mut() {
        *f = add(*f, shift);
    }
    let lat = Lattice::new(cfg.tau)?;

    let mut mesh = SurfaceMesh::default();
    let mut diag = MeshDiagnostics::default();
    let mut frames = Vec::new();
    let mut necks = Vec::new();
    let mut prev_waist: Option<Vec<usize>> = None;
    for (i, p) in patches.iter().enumerate() {
        let k = p.k;
        let fk = frame[i];
        frames.push(LayerFrame { k, origin: p.origin, position: fk });
        diag.loop_residual = diag.loop_residual.max(p.loop_residual);
        let tag = Tag::Layer { k };
        let mut vid: Vec<Option<usize>> = vec![None; p.nodes.len()];
        for (nidx, q) in p.pos.iter().enumerate() {
            if let Some(q) = q {
                vid[nidx] = Some(mesh.push(add(fk, *q), tag));
            }
        }
        let n = p.n;
        let idx = |i: usize, j: usize| j * (n + 1) + i;
        for &(ci, cj) in &p.cells {
            let (a, b, c, d) = (idx(ci, cj), idx(ci + 1, cj), idx(ci + 1, cj + 1), idx(ci, cj + 1));
            let v = |x: usize| vid[x].unwrap();
            mesh.faces.push([v(a), v(b), v(c)]);
            mesh.faces.push([v(a), v(c), v(d)]);
        }
        for (si, sign) in [Sign::Minus, Sign::Plus].into_iter().enumerate() {
            let nk = &p.necks[si];
            diag.stitch = diag.stitch.max(nk.stitch);
            diag.laurent_tail = diag.laurent_tail.max(nk.series.tail);
            let neck_k = if sign == Sign::Plus { k } else { k - 1 };
            let ntag = Tag::Neck { k: neck_k, sign };
            let mut ring_ids: Vec<Vec<usize>> = Vec::with_capacity(rings + 1);
            for r in 0..=rings {
                let reuse = sign == Sign::Minus && r == rings && prev_waist.is_some();
                let ids: Vec<usize> = if reuse {
                    let ids = prev_waist.clone().unwrap();
                    for (j, &id) in ids.iter().enumerate() {
                        let q = add(fk, nk.position(r, j));
                        diag.neck_mismatch = diag.neck_mismatch.max(norm3(sub(q, mesh.vertices[id])));
                    }
                    ids
                } else {
                    let t = if r == 0 { tag } else { ntag };
                    (0..m).map(|j| mesh.push(add(fk, nk.position(r, j)), t)).collect()
                };
                ring_ids.push(ids);
            }
            for r in 0..rings {
                for j in 0..m {
                    let j1 = (j + 1) % m;
                    let (a, b, c, d) = (ring_ids[r][j], ring_ids[r][j1], ring_ids[r + 1][j1], ring_ids[r + 1][j]);
                    mesh.faces.push([a, b, c]);
                    mesh.faces.push([a, c, d]);
                }
            }
            let outer: Vec<(usize, C64)> = nk.hole.iter().map(|&h| (vid[h].unwrap(), p.nodes[h])).collect();
            let inner: Vec<(usize, C64)> = ring_ids[0].iter().zip(&nk.ring_z).map(|(&id, &z)| (id, z)).collect();
            let center = views[i].center(sign);
            mesh.faces.extend(zipper(&outer, &inner, center));
            if sign == Sign::Plus {
                let w = waist(&frame, i);
                let center = horizontal(w);
                let drift = lat.distance_to_lattice(center - neck_position(cfg, k));
                necks.push(NeckCenter { k, center, height: w[2], drift });
                prev_waist = Some(ring_ids[rings].clone());
            }
        }
    }
    Ok(Immersion { t: sys.state.t, tau: cfg.tau, frames, necks, mesh, diagnostics: diag })
}

/// `p_k = q_1 + ... + q_k` (and `p_0 = 0`).
pub fn neck_position(cfg: &Configuration, k: i64) -> C64 {
    let mut p = C64::new(0.0, 0.0);
    if k > 0 {
        for j in 1..=k {
            p += cfg.q(j);
        }
    } else {
        for j in (k + 1..=0).rev() {
            p -= cfg.q(j);
        }
    }
    p
}

/// Layer spacings `h(O_k) - h(O_{k-1})` and their ratio to `-2 t log t`.
pub fn spacing_report(im: &Immersion) -> Vec<SpacingEntry> {
    let scale = -2.0 * im.t * im.t.ln();
    im.frames
        .windows(2)
        .map(|w| {
            let d = w[1].position[2] - w[0].position[2];
            SpacingEntry { k: w[1].k, spacing: d, ratio: d / scale }
        })
        .collect()
}

/// Translate copies of the mesh by the horizontal lattice vectors
/// `i + j tau`, `0 <= i, j < copies`.
pub fn replicate(mesh: &SurfaceMesh, tau: C64, copies: usize) -> SurfaceMesh {
    let mut out = SurfaceMesh::default();
    for j in 0..copies {
        for i in 0..copies {
            let d = C64::new(i as f64, 0.0) + tau * j as f64;
            out.append(&mesh.translated([d.re, d.im, 0.0]));
        }
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SliceReport {
    pub k: i64,
    pub height: f64,
    pub loops: usize,
    pub simple: bool,
    pub convex: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EmbeddednessReport {
    /// Smallest `|n_3|` over layer faces.
    pub min_vertical_normal: f64,
    pub graph_ok: bool,
    /// Slice height offset `c` in units of `t`.
    pub slice_constant: f64,
    pub slices: Vec<SliceReport>,
    pub intersecting_pairs: usize,
    pub embedded: bool,
}

/// Faces of the slab of layer `k`: the layer and its two half necks.
fn slab_faces(mesh: &SurfaceMesh, k: i64) -> Vec<usize> {
    (0..mesh.faces.len())
        .filter(|&f| {
            mesh.faces[f].iter().any(|&v| match mesh.tags[v] {
                Tag::Layer { k: kk } => kk == k,
                _ => false,
            }) || mesh.faces[f].iter().all(|&v| match mesh.tags[v] {
                Tag::Neck { k: kk, sign: Sign::Plus } => kk == k,
                Tag::Neck { k: kk, sign: Sign::Minus } => kk == k - 1,
                Tag::Layer { k: kk } => kk == k,
            })
        })
        .collect()
}

/// Closed level curves of the faces at height `h`, as horizontal polylines.
pub fn level_curves(mesh: &SurfaceMesh, faces: &[usize], h: f64) -> Vec<Vec<C64>> {
    type Key = (usize, usize);
    let key = |a: usize, b: usize| if a < b { (a, b) } else { (b, a) };
    let mut adj: HashMap<Key, Vec<Key>> = HashMap::new();
    let mut point: HashMap<Key, C64> = HashMap::new();
    let above = |v: usize| mesh.vertices[v][2] > h;
    for &f in faces {
        let tri = mesh.faces[f];
        let mut cut = Vec::with_capacity(2);
        for e in 0..3 {
            let (a, b) = (tri[e], tri[(e + 1) % 3]);
            if above(a) != above(b) {
                let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
                let s = (h - pa[2]) / (pb[2] - pa[2]);
                let k = key(a, b);
                point.insert(k, C64::new(pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])));
                cut.push(k);
            }
        }
        if cut.len() == 2 {
            adj.entry(cut[0]).or_default().push(cut[1]);
            adj.entry(cut[1]).or_default().push(cut[0]);
        }
    }
    let mut seen = std::collections::HashSet::new();
    let mut curves = Vec::new();
    let mut keys: Vec<Key> = adj.keys().copied().collect();
    keys.sort_unstable();
    for s in keys {
        if seen.contains(&s) || adj[&s].len() != 2 {
            continue;
        }
        let mut curve = vec![point[&s]];
        seen.insert(s);
        let (mut prev, mut cur) = (s, adj[&s][0]);
        let mut closed = false;
        loop {
            if cur == s {
                closed = true;
                break;
            }
            if !seen.insert(cur) {
                break;
            }
            curve.push(point[&cur]);
            let nb = &adj[&cur];
            if nb.len() != 2 {
                break;
            }
            let next = if nb[0] == prev { nb[1] } else { nb[0] };
            prev = cur;
            cur = next;
        }
        if closed {
            curves.push(curve);
        }
    }
    curves
}

fn segments_cross(p1: C64, p2: C64, q1: C64, q2: C64) -> bool {
    let orient = |a: C64, b: C64, c: C64| {
        let u = b - a;
        let v = c - a;
        u.re * v.im - u.im * v.re
    };
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

pub fn is_simple(curve: &[C64]) -> bool {
    let n = curve.len();
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_cross(curve[i], curve[(i + 1) % n], curve[j], curve[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

/// Total turning is one revolution and no turn goes against it by more
/// than `CONVEX_SLACK` of the mean turn `2 pi / n`.
pub fn is_convex(curve: &[C64]) -> bool {
    let n = curve.len();
    if n < 3 {
        return false;
    }
    let turns: Vec<f64> = (0..n)
        .map(|i| {
            let a = curve[(i + 1) % n] - curve[i];
            let b = curve[(i + 2) % n] - curve[(i + 1) % n];
            (a.conj() * b).arg()
        })
        .collect();
    let total: f64 = turns.iter().sum();
    if (total.abs() - 2.0 * PI).abs() > 1e-6 {
        return false;
    }
    let slack = CONVEX_SLACK * 2.0 * PI / n as f64;
    turns.iter().all(|t| t * total.signum() >= -slack)
}

fn segment_hits_triangle(p: [f64; 3], q: [f64; 3], tri: [[f64; 3]; 3]) -> bool {
    let d = sub(q, p);
    let e1 = sub(tri[1], tri[0]);
    let e2 = sub(tri[2], tri[0]);
    let h = cross(d, e2);
    let det = dot3(e1, h);
    let scale = norm3(e1) * norm3(e2) * norm3(d);
    if det.abs() <= 1e-14 * scale {
        return false;
    }
    let s = sub(p, tri[0]);
    let u = dot3(s, h) / det;
    if !(0.0..=1.0).contains(&u) {
        return false;
    }
    let qv = cross(s, e1);
    let v = dot3(d, qv) / det;
    if v < 0.0 || u + v > 1.0 {
        return false;
    }
    let w = dot3(e2, qv) / det;
    (0.0..=1.0).contains(&w)
}

pub fn triangles_intersect(a: [[f64; 3]; 3], b: [[f64; 3]; 3]) -> bool {
    (0..3).any(|e| segment_hits_triangle(a[e], a[(e + 1) % 3], b) || segment_hits_triangle(b[e], b[(e + 1) % 3], a))
}

/// Pairs of faces without common vertices that intersect, via a spatial hash.
pub fn intersecting_pairs(mesh: &SurfaceMesh, faces: &[usize]) -> usize {
    if faces.is_empty() {
        return 0;
    }
    let mut lens: Vec<f64> = faces
        .iter()
        .map(|&f| {
            let t = mesh.faces[f];
            norm3(sub(mesh.vertices[t[1]], mesh.vertices[t[0]]))
        })
        .collect();
    lens.sort_by(f64::total_cmp);
    let cell = lens[lens.len() / 2].max(1e-12) * 2.0;
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    let tri = |f: usize| mesh.faces[f].map(|v| mesh.vertices[v]);
    for (slot, &f) in faces.iter().enumerate() {
        let t = tri(f);
        let lo: Vec<i64> = (0..3).map(|c| (t.iter().map(|p| p[c]).fold(f64::INFINITY, f64::min) / cell).floor() as i64).collect();
        let hi: Vec<i64> = (0..3).map(|c| (t.iter().map(|p| p[c]).fold(f64::NEG_INFINITY, f64::max) / cell).floor() as i64).collect();
        for x in lo[0]..=hi[0] {
            for y in lo[1]..=hi[1] {
                for z in lo[2]..=hi[2] {
                    grid.entry([x, y, z]).or_default().push(slot);
                }
            }
        }
    }
    let mut pairs: std::collections::HashSet<(usize, usize)> = std::collections::HashSet::new();
    for bucket in grid.values() {
        for (x, &i) in bucket.iter().enumerate() {
            for &j in &bucket[x + 1..] {
                pairs.insert(if i < j { (i, j) } else { (j, i) });
            }
        }
    }
    let pairs: Vec<(usize, usize)> = pairs.into_iter().collect();
    pairs
        .par_iter()
        .filter(|&&(i, j)| {
            let (fa, fb) = (mesh.faces[faces[i]], mesh.faces[faces[j]]);
            if fa.iter().any(|v| fb.contains(v)) {
                return false;
            }
            triangles_intersect(tri(faces[i]), tri(faces[j]))
        })
        .count()
}

/// Graph, slice and self-intersection checks on every layer slab with
/// both half necks.
pub fn embeddedness(im: &Immersion) -> EmbeddednessReport {
    let mesh = &im.mesh;
    let t = im.t;
    let mut min_n3 = f64::INFINITY;
    for f in 0..mesh.faces.len() {
        if mesh.faces[f].iter().all(|&v| matches!(mesh.tags[v], Tag::Layer { .. })) {
            min_n3 = min_n3.min(mesh.face_normal(f)[2].abs());
        }
    }
    // layer height extents and neck waists relative to h(O_k)
    let mut c_clear: f64 = 0.0;
    let mut gap = f64::INFINITY;
    for fr in &im.frames {
        let h0 = fr.position[2];
        let layer: Vec<f64> = mesh
            .vertices
            .iter()
            .zip(&mesh.tags)
            .filter(|(_, tag)| **tag == Tag::Layer { k: fr.k })
            .map(|(v, _)| v[2] - h0)
            .collect();
        let top = layer.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let bottom = layer.iter().cloned().fold(f64::INFINITY, f64::min);
        c_clear = c_clear.max(top / t).max(-bottom / t);
        if let Some(w) = im.necks.iter().find(|n| n.k == fr.k) {
            gap = gap.min((w.height - h0 - top) / t);
        }
        if let Some(w) = im.necks.iter().find(|n| n.k == fr.k - 1) {
            gap = gap.min((h0 + bottom - w.height) / t);
        }
    }
    let c = c_clear + 0.5 * gap.max(0.0).min(c_clear.max(1.0));
    let mut slices = Vec::new();
    let mut pairs = 0;
    for fr in &im.frames {
        let faces = slab_faces(mesh, fr.k);
        for dir in [1.0, -1.0] {
            let h = fr.position[2] + dir * t * c;
            let curves = level_curves(mesh, &faces, h);
            let simple = curves.iter().all(|c| is_simple(c));
            let convex = curves.iter().all(|c| is_convex(c));
            slices.push(SliceReport { k: fr.k, height: h, loops: curves.len(), simple, convex });
        }
        pairs += intersecting_pairs(mesh, &faces);
    }
    let graph_ok = min_n3 > GRAPH_TOL;
    let embedded = graph_ok && pairs == 0 && slices.iter().all(|s| s.loops == 1 && s.simple && s.convex);
    EmbeddednessReport { min_vertical_normal: min_n3, graph_ok, slice_constant: c, slices, intersecting_pairs: pairs, embedded }
}

/// Sidecar metadata written next to the OBJ file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeshSidecar {
    pub t: f64,
    pub tau: C64,
    pub copies: usize,
    pub vertex_count: usize,
    pub face_count: usize,
    pub tags: Vec<Tag>,
    pub frames: Vec<LayerFrame>,
    pub necks: Vec<NeckCenter>,
    pub diagnostics: MeshDiagnostics,
}

/// Writes `path` (OBJ) and `path.json`, each through a temporary file.
pub fn write_mesh(im: &Immersion, copies: usize, path: &Path) -> Result<MeshSidecar> {
    let mesh = replicate(&im.mesh, im.tau, copies.max(1));
    let mut buf = Vec::new();
    mesh.write_obj(&mut buf)?;
    write_atomic(path, &buf)?;
    let side = MeshSidecar {
        t: im.t,
        tau: im.tau,
        copies: copies.max(1),
        vertex_count: mesh.vertices.len(),
        face_count: mesh.faces.len(),
        tags: mesh.tags.clone(),
        frames: im.frames.clone(),
        necks: im.necks.clone(),
        diagnostics: im.diagnostics.clone(),
    };
    let mut json = path.as_os_str().to_owned();
    json.push(".json");
    write_atomic(Path::new(&json), serde_json::to_string(&side)?.as_bytes())?;
    Ok(side)
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
