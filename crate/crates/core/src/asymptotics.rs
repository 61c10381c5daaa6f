//! Decay of a defect surface toward its periodic right tail.
//!
//! Parameter differences beyond the first layer fall below the roundoff
//! level of the nonlinear solves already for moderate `k`, so the tail is
//! propagated with the linearized gluing equations around the periodic
//! solution: with `y_k = (x_k, lambda_k)` the equations of layer `k` read
//! `A_k y_{k-1} + B_k y_k + C_k y_{k+1} = 0` and the decaying solution is
//! `y_{k+1} = R_k y_k`, `R_k = -(B_{k+1} + C_{k+1} R_{k+1})^-1 A_{k+1}`.

use crate::config::{balance_report, Configuration};
use crate::elliptic::C64;
use crate::error::{Error, Result};
use crate::immersion::{layer_geometry, weierstrass_phi, Immersion, Tag, TorusView};
use crate::opening::{coeffs_of, gluing_rows, FormTable, GaussMap, LambdaRow, Sign, TorusData, TorusParams};
use crate::solver::{newton_continuation, params_from, system_for, unknowns_of, SolveReport, SolverOptions, System};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const FIT_FLOOR: f64 = 1e-14;
pub const SAMPLE_GRID: usize = 16;
pub const GEOMETRY_GRID: usize = 32;
const DIR_STEP: f64 = 1e-6;

/// Sup-norm distance over the quadruple `(a, b, v, tau)`.
pub fn param_distance(p: &TorusParams, q: &TorusParams) -> f64 {
    [(p.a - q.a).norm(), (p.b - q.b).norm(), (p.v - q.v).norm(), (p.tau - q.tau).norm()].into_iter().fold(0.0, f64::max)
}

#[derive(Clone, Debug)]
pub struct PairSolution {
    pub periodic: SolveReport,
    pub defect: SolveReport,
    pub cfg: Configuration,
    pub cfg_defect: Configuration,
    pub opts: SolverOptions,
}

/// Solves the periodic configuration and the defect with identical
/// settings and schedule. The defect window clamps its right end to the
/// cyclic solution of the shared tail.
pub fn pair_solve(cfg: &Configuration, cfg_defect: &Configuration, t: f64, opts: &SolverOptions) -> Result<PairSolution> {
    if cfg.period().is_none() {
        return Err(Error::Invalid("the comparison configuration must be periodic".into()));
    }
    let kk = cfg_defect.half_width();
    let agrees = |c: &Configuration| (0..=kk + 1).all(|k| (c.q(k) - cfg_defect.q(k)).norm() <= 1e-14);
    let reflected = reflect(cfg)?;
    let cfg = if agrees(cfg) {
        cfg
    } else if agrees(&reflected) {
        &reflected
    } else {
        return Err(Error::Invalid("configurations differ for some k >= 0 (also after z -> -z)".into()));
    };
    for c in [cfg, cfg_defect] {
        if !balance_report(c)?.balanced {
            return Err(Error::InvalidConfiguration("configuration is not balanced".into()));
        }
    }
    let (periodic, defect) = rayon::join(
        || newton_continuation(cfg, t, None, opts),
        || newton_continuation(cfg_defect, t, None, opts),
    );
    Ok(PairSolution { periodic: periodic?, defect: defect?, cfg: cfg.clone(), cfg_defect: cfg_defect.clone(), opts: opts.clone() })
}

/// Image of a configuration under the point reflection `z -> -z` of the torus.
pub fn reflect(cfg: &Configuration) -> Result<Configuration> {
    let neg = |v: &[C64]| v.iter().map(|q| -q).collect::<Vec<_>>();
    Configuration::new(cfg.tau, neg(&cfg.window), neg(&cfg.left_tail), neg(&cfg.right_tail))
}

fn cyclic_index(st: &crate::opening::GluingState, k: i64) -> usize {
    (k - st.k_start).rem_euclid(st.len() as i64) as usize
}

/// `(k, d_k)` between the defect and the periodic solution over the
/// defect's active tori.
pub fn parameter_differences(pair: &PairSolution) -> Vec<(i64, f64)> {
    let ds = &pair.defect.state;
    let ps = &pair.periodic.state;
    let range: Vec<usize> = if ds.is_cyclic() { (0..ds.len()).collect() } else { ds.active().collect() };
    range
        .into_iter()
        .map(|i| {
            let k = ds.k_of(i);
            (k, param_distance(&ds.tori[i], &ps.tori[cyclic_index(ps, k)]))
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayFit {
    /// `-slope` of `log d_k` against `k`.
    pub rate: f64,
    /// Per-layer factor `exp(-rate)`.
    pub factor: f64,
    pub r_squared: f64,
    pub k_range: (i64, i64),
}

/// Least-squares fit of `log d` against `k`. Fails when no value reaches
/// `floor` (use [`FIT_FLOOR`] for nonlinear differences, 0 for propagated ones).
pub fn decay_fit(ks: &[i64], ds: &[f64], floor: f64) -> Result<DecayFit> {
    if ds.iter().all(|d| !(*d >= floor && *d > 0.0)) {
        return Err(Error::DegenerateFit { floor });
    }
    let pts: Vec<(f64, f64)> = ks.iter().zip(ds).filter(|(_, d)| **d > 0.0).map(|(k, d)| (*k as f64, d.ln())).collect();
    if pts.len() < 2 {
        return Err(Error::DegenerateFit { floor });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(DecayFit {
        rate: -slope,
        factor: slope.exp(),
        r_squared,
        k_range: (*ks.iter().min().unwrap(), *ks.iter().max().unwrap()),
    })
}

/// Augmented state `(x, rho^(n-1) lambda_n)` of one torus as a real vector.
pub fn augmented(p: &TorusParams, row: &LambdaRow, rho: f64) -> Result<DVector<f64>> {
    let mut y: Vec<f64> = unknowns_of(p)?.to_vec();
    for part in [&row.plus, &row.minus] {
        let mut rp = 1.0;
        for c in part {
            rp *= rho;
            y.push(c.re * rp);
            y.push(c.im * rp);
        }
    }
    Ok(DVector::from_vec(y))
}

fn split(y: &DVector<f64>, n_max: usize, rho: f64) -> Result<(TorusParams, LambdaRow)> {
    let p = params_from(&y.as_slice()[..8])?;
    let m = n_max - 1;
    let c = |j: usize| C64::new(y[8 + 2 * j], y[9 + 2 * j]) / rho.powi((j % m) as i32 + 1);
    Ok((p, LambdaRow { plus: (0..m).map(c).collect(), minus: (m..2 * m).map(c).collect() }))
}

fn flatten(v: &[C64]) -> Vec<f64> {
    v.iter().flat_map(|c| [c.re, c.im]).collect()
}

/// Linearized gluing equations around a cyclic periodic solution.
pub struct Linearization {
    pub sys: System,
    pub lambda: Vec<LambdaRow>,
    pub n_max: usize,
    pub dim: usize,
    /// Transfer matrices `R_c` for `k = c mod N`.
    pub transfer: Vec<DMatrix<f64>>,
    pub riccati_iterations: usize,
}

impl Linearization {
    pub fn new(cfg: &Configuration, report: &SolveReport, opts: &SolverOptions) -> Result<Linearization> {
        if !report.cyclic {
            return Err(Error::Invalid("linearization needs a cyclic periodic solution".into()));
        }
        let sys = system_for(cfg, report, opts)?;
        let lambda = report.series.lambda.clone();
        let n_max = report.series.n_max;
        let dim = 8 + 4 * (n_max - 1);
        let n = sys.state.len();
        let mut lin = Linearization { sys, lambda, n_max, dim, transfer: Vec::new(), riccati_iterations: 0 };
        let blocks = (0..n).map(|c| lin.blocks(c as i64)).collect::<Result<Vec<_>>>()?;
        let mut r = vec![DMatrix::<f64>::zeros(dim, dim); n];
        let mut iterations = 0;
        for it in 0..200 {
            let mut change: f64 = 0.0;
            for c in (0..n).rev() {
                let (a, b, cc) = &blocks[(c + 1) % n];
                let m = b + cc * &r[(c + 1) % n];
                let next = -m.lu().solve(a).ok_or_else(|| Error::Invalid("singular linearized block".into()))?;
                change = change.max((&next - &r[c]).amax());
                r[c] = next;
            }
            iterations = it + 1;
            if change <= 1e-15 * r.iter().map(|m| m.amax()).fold(1e-300, f64::max) {
                break;
            }
        }
        lin.transfer = r;
        lin.riccati_iterations = iterations;
        Ok(lin)
    }

    fn index(&self, k: i64) -> usize {
        cyclic_index(&self.sys.state, k)
    }

    pub fn base(&self, k: i64) -> Result<DVector<f64>> {
        let i = self.index(k);
        augmented(&self.sys.state.tori[i], &self.lambda[i], self.sys.state.rho)
    }

    pub fn residual(&self, k: i64, y: &DVector<f64>) -> Result<Vec<f64>> {
        let i = self.index(k);
        let (p, row) = split(y, self.n_max, self.sys.state.rho)?;
        let ev = self.sys.rebuild(i, p)?;
        let st = &self.sys.state;
        let r = ev.residuals(k, &coeffs_of(&row, st.rho), st.t, self.sys.tau, self.sys.g0);
        Ok(flatten(&r))
    }

    fn rows(&self, sign: Sign, y: &DVector<f64>) -> Result<Vec<f64>> {
        let (p, row) = split(y, self.n_max, self.sys.state.rho)?;
        let st = &self.sys.state;
        let data = TorusData::new(p, st.epsilon, self.n_max, self.sys.opts.nodes)?;
        let raw = gluing_rows(&data, sign, st.t, st.rho, &row);
        let scaled: Vec<C64> = raw.iter().enumerate().map(|(n, x)| x * st.rho.powi(n as i32 + 1)).collect();
        Ok(flatten(&scaled))
    }

    /// Central-difference Jacobian of `f` at `y0`; the `lambda` columns are
    /// affine and use unit steps.
    fn jac(&self, y0: &DVector<f64>, rows: usize, f: &(dyn Fn(&DVector<f64>) -> Result<Vec<f64>> + Sync)) -> Result<DMatrix<f64>> {
        let cols: Vec<Result<Vec<f64>>> = (0..self.dim)
            .into_par_iter()
            .map(|c| {
                let h = if c < 8 { DIR_STEP * y0[c].abs().max(1.0) } else { 1.0 };
                let mut yp = y0.clone();
                let mut ym = y0.clone();
                yp[c] += h;
                ym[c] -= h;
                let (fp, fm) = (f(&yp)?, f(&ym)?);
                Ok(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
            })
            .collect();
        let mut m = DMatrix::zeros(rows, self.dim);
        for (c, col) in cols.into_iter().enumerate() {
            m.set_column(c, &DVector::from_vec(col?));
        }
        Ok(m)
    }

    /// `(A_k, B_k, C_k)`.
    fn blocks(&self, k: i64) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
        let dim = self.dim;
        let m = 2 * (self.n_max - 1);
        let y = self.base(k)?;
        let yp = self.base(k - 1)?;
        let yn = self.base(k + 1)?;
        let df = self.jac(&y, 8, &|v| self.residual(k, v))?;
        let dminus = self.jac(&yp, m, &|v| self.rows(Sign::Plus, v))?;
        let dplus = self.jac(&yn, m, &|v| self.rows(Sign::Minus, v))?;
        let mut a = DMatrix::zeros(dim, dim);
        let mut b = DMatrix::zeros(dim, dim);
        let mut c = DMatrix::zeros(dim, dim);
        b.view_mut((0, 0), (8, dim)).copy_from(&df);
        for j in 0..2 * m {
            b[(8 + j, 8 + j)] = 1.0;
        }
        c.view_mut((8, 0), (m, dim)).copy_from(&(-dplus));
        a.view_mut((8 + m, 0), (m, dim)).copy_from(&(-dminus));
        Ok((a, b, c))
    }

    /// `Delta_k` for `k = k0..=k1` from `Delta_{k0}`.
    pub fn propagate(&self, k0: i64, delta0: DVector<f64>, k1: i64) -> Vec<DVector<f64>> {
        let mut out = vec![delta0];
        for k in k0..k1 {
            let r = &self.transfer[self.index(k)];
            let next = r * out.last().unwrap();
            out.push(next);
        }
        out
    }

    /// Derivative of `f` at the base state of torus `k` along `delta`.
    fn directional<T, F>(&self, k: i64, delta: &DVector<f64>, f: F) -> Result<Vec<T>>
    where
        F: Fn(&DVector<f64>) -> Result<Vec<T>>,
        T: Copy + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T>,
    {
        let scale = delta.amax();
        let y = self.base(k)?;
        if scale == 0.0 {
            let v = f(&y)?;
            return Ok(v.iter().map(|x| (*x - *x) * 0.0).collect());
        }
        let u = delta / scale;
        let fp = f(&(&y + &u * DIR_STEP))?;
        let fm = f(&(&y - &u * DIR_STEP))?;
        if fp.len() != fm.len() {
            return Err(Error::Invalid("sample sets differ under perturbation".into()));
        }
        Ok(fp.iter().zip(&fm).map(|(a, b)| (*a - *b) * (scale / (2.0 * DIR_STEP))).collect())
    }

    /// Linearized parameter distance `d_k` for `Delta_k`.
    pub fn param_change(&self, k: i64, delta: &DVector<f64>) -> Result<f64> {
        let v = self.directional(k, delta, |y| {
            let (p, _) = split(y, self.n_max, self.sys.state.rho)?;
            Ok(vec![p.a, p.b, p.v, p.tau])
        })?;
        Ok(v.iter().map(|c| c.norm()).fold(0.0, f64::max))
    }

    /// Lattice-coordinate sample points of torus `k` outside the chart disks.
    fn samples(&self, k: i64) -> Vec<(f64, f64)> {
        let i = self.index(k);
        let ev = &self.sys.evals[i];
        let gm = &ev.data.gm;
        let eps = self.sys.state.epsilon;
        let (ox, oy) = ev.origin;
        let n = SAMPLE_GRID;
        (0..n * n)
            .map(|m| (ox + ((m % n) as f64 + 0.5) / n as f64, oy + ((m / n) as f64 + 0.5) / n as f64))
            .filter(|&(x, y)| (1.0 / gm.value_unchecked(gm.lat.from_lattice_coords(x, y))).norm() >= eps)
            .collect()
    }

    /// `omega` and `Phi` coefficients of `dx` and `dy` at the sample points.
    fn forms_at(&self, k: i64, y: &DVector<f64>, pts: &[(f64, f64)]) -> Result<(Vec<C64>, Vec<C64>)> {
        let (p, row) = split(y, self.n_max, self.sys.state.rho)?;
        let gm = GaussMap::new(p)?;
        let forms = FormTable::new(&gm, self.n_max);
        let c = coeffs_of(&row, self.sys.state.rho);
        let mut om = Vec::with_capacity(2 * pts.len());
        let mut ph = Vec::with_capacity(6 * pts.len());
        for &(x, yy) in pts {
            let z = gm.lat.from_lattice_coords(x, yy);
            let w = forms.combine(&c, &forms.eval_all(&gm, z));
            let phi = weierstrass_phi(k, self.sys.state.t, gm.value_unchecked(z), w);
            om.extend([w, w * p.tau]);
            for f in phi {
                ph.extend([f, f * p.tau]);
            }
        }
        Ok((om, ph))
    }

    /// Linearized `(w_k, dPhi_k)`: sup differences of the pulled-back
    /// `omega` and `Phi` over the sample points.
    pub fn form_change(&self, k: i64, delta: &DVector<f64>) -> Result<(f64, f64)> {
        let pts = self.samples(k);
        let om = self.directional(k, delta, |y| Ok(self.forms_at(k, y, &pts)?.0))?;
        let ph = self.directional(k, delta, |y| Ok(self.forms_at(k, y, &pts)?.1))?;
        let sup = |v: &[C64]| v.iter().map(|c| c.norm()).fold(0.0, f64::max);
        Ok((sup(&om), sup(&ph)))
    }

    fn geometry(&self, k: i64, y: &DVector<f64>) -> Result<Vec<[f64; 3]>> {
        let i = self.index(k);
        let (p, row) = split(y, self.n_max, self.sys.state.rho)?;
        let ev = self.sys.rebuild(i, p)?;
        let view = TorusView { k, t: self.sys.state.t, ev: &ev, coeffs: coeffs_of(&row, self.sys.state.rho), n_max: self.n_max };
        let g = layer_geometry(&view, GEOMETRY_GRID)?;
        let mut out: Vec<[f64; 3]> = g.positions.into_iter().flatten().collect();
        out.push(g.up);
        out.push(g.down);
        Ok(out)
    }

    /// Linearized vertex-wise distances between the defect and periodic
    /// layer patches `k0..=k1`, with positions aligned at `k1`.
    pub fn layer_distances(&self, k0: i64, deltas: &[DVector<f64>]) -> Result<Vec<f64>> {
        let v3 = |a: [f64; 3]| DVector::from_row_slice(&a);
        let geo: Vec<Vec<DVector<f64>>> = deltas
            .par_iter()
            .enumerate()
            .map(|(j, d)| {
                let k = k0 + j as i64;
                let g = self.directional(k, d, |y| self.geometry(k, y).map(|v| v.into_iter().map(|p| Vec3(p)).collect()))?;
                Ok(g.into_iter().map(|p| v3(p.0)).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        // frame offsets relative to the last layer
        let n = geo.len();
        let mut offset = vec![DVector::<f64>::zeros(3); n];
        for j in (0..n - 1).rev() {
            let up = &geo[j][geo[j].len() - 2];
            let down = &geo[j + 1][geo[j + 1].len() - 1];
            offset[j] = &offset[j + 1] - (up - down);
        }
        Ok((0..n)
            .map(|j| geo[j][..geo[j].len() - 2].iter().map(|p| (p + &offset[j]).norm()).fold(0.0, f64::max))
            .collect())
    }
}

#[derive(Clone, Copy, Debug)]
struct Vec3([f64; 3]);

impl std::ops::Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl std::ops::Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayReport {
    pub t: f64,
    pub half_width: i64,
    /// `k = 0..=K`.
    pub k: Vec<i64>,
    /// Parameter differences; `k = 0` from the nonlinear solves, `k >= 1`
    /// propagated by the linearized equations.
    pub d: Vec<f64>,
    pub w: Vec<f64>,
    /// Sup differences of the immersion differential.
    pub dphi: Vec<f64>,
    /// Vertex-wise layer distances aligned at `k = K`.
    pub layer_distance: Vec<f64>,
    /// Nonlinear `(k, d_k)` over the whole window.
    pub d_nonlinear: Vec<(i64, f64)>,
    pub fit: Option<DecayFit>,
    pub dphi_fit: Option<DecayFit>,
    pub period: usize,
}

impl DecayReport {
    /// `tpms_comparison` distances for `l = 0, 1, ..` with `l N <= K - 1`.
    pub fn tpms_distances(&self) -> Vec<f64> {
        (0..)
            .map(|l| l * self.period)
            .take_while(|&k| k as i64 <= self.half_width - 1)
            .map(|k| self.layer_distance[k])
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,d_k,w_k\n");
        for i in 0..self.k.len() {
            s.push_str(&format!("{},{:.16e},{:.16e}\n", self.k[i], self.d[i], self.w[i]));
        }
        s
    }
}

/// Full decay analysis of a pair solve.
pub fn decay_report(pair: &PairSolution) -> Result<DecayReport> {
    let lin = Linearization::new(&pair.cfg, &pair.periodic, &pair.opts)?;
    let kk = pair.cfg_defect.half_width();
    let ds = &pair.defect.state;
    let i0 = if ds.is_cyclic() { cyclic_index(ds, 0) } else { ds.index_of(0).expect("window contains 0") };
    let delta0 = augmented(&ds.tori[i0], &pair.defect.series.lambda[i0], ds.rho)? - lin.base(0)?;
    let deltas = lin.propagate(0, delta0, kk);
    let ks: Vec<i64> = (0..=kk).collect();
    let d_nonlinear = parameter_differences(pair);
    let mut d = Vec::with_capacity(ks.len());
    let mut w = Vec::with_capacity(ks.len());
    let mut dphi = Vec::with_capacity(ks.len());
    for (&k, delta) in ks.iter().zip(&deltas) {
        d.push(if k == 0 { d_nonlinear.iter().find(|e| e.0 == 0).map_or(0.0, |e| e.1) } else { lin.param_change(k, delta)? });
        let (a, b) = lin.form_change(k, delta)?;
        w.push(a);
        dphi.push(b);
    }
    let layer_distance = lin.layer_distances(0, &deltas)?;
    let hi = (kk - 2).max(1) as usize;
    let fit = decay_fit(&ks[1..=hi], &d[1..=hi], 0.0).ok();
    let dphi_fit = decay_fit(&ks[1..=hi], &dphi[1..=hi], 0.0).ok();
    Ok(DecayReport {
        t: pair.defect.state.t,
        half_width: kk,
        k: ks,
        d,
        w,
        dphi,
        layer_distance,
        d_nonlinear,
        fit,
        dphi_fit,
        period: lin.sys.state.len(),
    })
}

/// Period vector of a periodic immersion: `f(O_N) - f(O_0)`.
pub fn period_vector(periodic: &Immersion, period: usize) -> Result<[f64; 3]> {
    let f = |k: i64| periodic.frames.iter().find(|fr| fr.k == k).map(|fr| fr.position);
    match (f(0), f(period as i64)) {
        (Some(a), Some(b)) => Ok([b[0] - a[0], b[1] - a[1], b[2] - a[2]]),
        _ => Err(Error::Invalid(format!("periodic immersion must contain layers 0 and {period}"))),
    }
}

fn layer_vertices(im: &Immersion, k: i64) -> Vec<[f64; 3]> {
    im.mesh.vertices.iter().zip(&im.mesh.tags).filter(|(_, t)| **t == Tag::Layer { k }).map(|(v, _)| *v).collect()
}

/// Vertex-wise sup distance between layer `l N` of the defect mesh moved
/// by `-l T` and layer 0 of the periodic mesh. Both immersions must use
/// the same mesh options; the defect is aligned with the periodic surface
/// at its largest layer.
pub fn tpms_comparison(periodic: &Immersion, defect: &Immersion, period: usize, l: usize) -> Result<f64> {
    let tv = period_vector(periodic, period)?;
    let last = defect.frames.last().ok_or_else(|| Error::Invalid("empty defect immersion".into()))?;
    let n = period as i64;
    let base = periodic
        .frames
        .iter()
        .find(|fr| fr.k == last.k.rem_euclid(n))
        .ok_or_else(|| Error::Invalid("periodic immersion must contain layers 0..N".into()))?;
    let reps = last.k.div_euclid(n) as f64;
    let align: Vec<f64> = (0..3).map(|c| base.position[c] + reps * tv[c] - last.position[c]).collect();
    let k = (l * period) as i64;
    let a = layer_vertices(defect, k);
    let b = layer_vertices(periodic, 0);
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Invalid(format!("layer patches {k} and 0 do not correspond")));
    }
    Ok(a.iter()
        .zip(&b)
        .map(|(p, q)| {
            let d: Vec<f64> = (0..3).map(|c| p[c] + align[c] - l as f64 * tv[c] - q[c]).collect();
            (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt()
        })
        .fold(0.0, f64::max))
}
