//! Newton continuation in `t` for the regularity, period and balancing
//! equations `F_k = (E_k, P_k1, P_k2, G_k + 2 pi i G(q_0; tau)) = 0`.

use crate::config::Configuration;
use crate::elliptic::{Lattice, C64};
use crate::error::{Error, Result};
use crate::hecke::hecke_g_at;
use crate::opening::{
    conj_pow, fix_omega_with, Boundary, GaussMap, GluingState, LambdaRow, OmegaSeries, Sign, TorusData, TorusParams,
    DEFAULT_N_MAX, DEFAULT_NODES, FIX_TOL,
};
use gauss_quad::legendre::GaussLegendre;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::num::NonZeroUsize;

pub const RESIDUAL_TOL: f64 = 1e-9;
pub const ZERO_TOL: f64 = 1e-8;
pub const FD_STEP: f64 = 1e-6;
pub const MAX_NEWTON: usize = 40;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverOptions {
    pub n_max: usize,
    pub nodes: usize,
    /// Gauss-Legendre panels per edge of the parallelogram.
    pub panels: usize,
    pub order: usize,
    pub fd_step: f64,
    /// Newton stops once the residual sup-norm is below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Step halvings allowed per continuation step.
    pub max_bisections: usize,
    /// Central instead of forward differences in the Jacobian.
    pub central_differences: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            n_max: DEFAULT_N_MAX,
            nodes: DEFAULT_NODES,
            panels: 12,
            order: 16,
            fd_step: FD_STEP,
            tol: 1e-11,
            max_iter: MAX_NEWTON,
            max_bisections: 4,
            central_differences: false,
        }
    }
}

/// Composite Gauss-Legendre rule on the boundary of `O + [0,1] + [0,1] tau`,
/// counter-clockwise from `O`. Edge 0 is the alpha path, edge 3 reversed is
/// the beta path.
#[derive(Clone, Debug)]
pub struct BoundaryQuad {
    pub z: Vec<C64>,
    pub w: Vec<C64>,
    pub edge: Vec<u8>,
}

impl BoundaryQuad {
    pub fn new(origin: C64, tau: C64, panels: usize, rule: &[(f64, f64)]) -> Self {
        let one = C64::new(1.0, 0.0);
        let corners = [origin, origin + one, origin + one + tau, origin + tau];
        let mut q = BoundaryQuad { z: Vec::new(), w: Vec::new(), edge: Vec::new() };
        for e in 0..4 {
            let a = corners[e];
            let d = corners[(e + 1) % 4] - a;
            for p in 0..panels {
                for &(x, wt) in rule {
                    let u = (p as f64 + 0.5 * (x + 1.0)) / panels as f64;
                    q.z.push(a + d * u);
                    q.w.push(d * (0.5 * wt / panels as f64));
                    q.edge.push(e as u8);
                }
            }
        }
        q
    }
}

pub fn gl_rule(order: usize) -> Vec<(f64, f64)> {
    GaussLegendre::new(NonZeroUsize::new(order.max(1)).unwrap()).as_node_weight_pairs().to_vec()
}

/// Zeros of `g` modulo the lattice by Newton from a grid of seeds.
pub fn gauss_zeros(gm: &GaussMap) -> Vec<C64> {
    let lat = &gm.lat;
    let mut out: Vec<C64> = Vec::new();
    let n = 8;
    for i in 0..n {
        for j in 0..n {
            let mut z = lat.from_lattice_coords((i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64);
            let mut ok = false;
            for _ in 0..60 {
                if lat.distance_to_lattice(z) < 1e-4 || lat.distance_to_lattice(z - gm.p.v) < 1e-4 {
                    break;
                }
                let (g, dg) = gm.value_and_derivative(z);
                let step = g / dg;
                z -= step;
                if step.norm() < 1e-14 {
                    ok = gm.value_unchecked(z).norm() < 1e-10;
                    break;
                }
            }
            if ok {
                let z = lat.reduce(z).z;
                if out.iter().all(|w| lat.torus_distance(*w, z) > 1e-6) {
                    out.push(z);
                }
            }
        }
    }
    out
}

/// Lattice coordinates of the corner `O`: centre of the widest circular gap
/// of the coordinates of the poles and zeros of `g`.
pub fn choose_origin(gm: &GaussMap) -> (f64, f64) {
    let lat = &gm.lat;
    let mut pts = vec![C64::new(0.0, 0.0), gm.p.v];
    pts.extend(gauss_zeros(gm));
    let coords: Vec<(f64, f64)> = pts.iter().map(|z| lat.lattice_coords(*z)).collect();
    let gap = |mut xs: Vec<f64>| -> f64 {
        for x in xs.iter_mut() {
            *x = x.rem_euclid(1.0);
        }
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut best = (0.0, 0.0);
        for i in 0..xs.len() {
            let a = xs[i];
            let b = if i + 1 < xs.len() { xs[i + 1] } else { xs[0] + 1.0 };
            if b - a > best.0 {
                best = (b - a, 0.5 * (a + b));
            }
        }
        best.1.rem_euclid(1.0)
    };
    (gap(coords.iter().map(|c| c.0).collect()), gap(coords.iter().map(|c| c.1).collect()))
}

/// Per-torus data needed to assemble the residuals.
#[derive(Clone, Debug)]
pub struct TorusEval {
    pub data: TorusData,
    pub origin: (f64, f64),
    pub quad: BoundaryQuad,
    pub g: Vec<C64>,
    /// Complex-linear basis parts at the boundary nodes.
    pub q: Vec<Vec<C64>>,
    /// Lattice shifts bringing the chart circles inside the parallelogram.
    pub shift: [C64; 2],
    pub s1: C64,
    pub s2: C64,
    pub zero_count: C64,
}

impl AsRef<TorusData> for TorusEval {
    fn as_ref(&self) -> &TorusData {
        &self.data
    }
}

impl TorusEval {
    pub fn new(p: TorusParams, origin: (f64, f64), epsilon: f64, opts: &SolverOptions, rule: &[(f64, f64)]) -> Result<Self> {
        let data = TorusData::new(p, epsilon, opts.n_max, opts.nodes)?;
        let lat = &data.gm.lat;
        let o = lat.from_lattice_coords(origin.0, origin.1);
        let quad = BoundaryQuad::new(o, p.tau, opts.panels, rule);
        let mut g = Vec::with_capacity(quad.z.len());
        let mut q = Vec::with_capacity(quad.z.len());
        let mut moments = [C64::new(0.0, 0.0); 3];
        for (&z, &w) in quad.z.iter().zip(&quad.w) {
            let (gv, dg) = data.gm.value_and_derivative(z);
            if !(gv.norm() >= ZERO_TOL) {
                return Err(Error::ZeroOnContour { k: 0, value: gv.norm() });
            }
            let f = dg / gv * w;
            moments[0] += f;
            moments[1] += f * z;
            moments[2] += f * z * z;
            g.push(gv);
            q.push(data.forms.eval_all(&data.gm, z));
        }
        let two_pi_i = C64::new(0.0, 2.0 * PI);
        for m in moments.iter_mut() {
            *m /= two_pi_i;
        }
        let mut shift = [C64::new(0.0, 0.0); 2];
        for (idx, sign) in [Sign::Minus, Sign::Plus].into_iter().enumerate() {
            let (cx, cy) = lat.lattice_coords(data.gm.center(sign));
            let nx = (origin.0 + (cx - origin.0).rem_euclid(1.0) - cx).round();
            let ny = (origin.1 + (cy - origin.1).rem_euclid(1.0) - cy).round();
            shift[idx] = lat.from_lattice_coords(nx, ny);
            let circ = data.circle(sign);
            for &z in &circ.z {
                let (x, y) = lat.lattice_coords(z + shift[idx]);
                if !(x > origin.0 && x < origin.0 + 1.0 && y > origin.1 && y < origin.1 + 1.0) {
                    return Err(Error::Chart(format!("neck circle {sign} crosses the fundamental parallelogram")));
                }
            }
            let m = circ.z.len() as f64;
            let zs: Vec<C64> = circ.z.iter().map(|z| z + shift[idx]).collect();
            moments[0] += 1.0;
            moments[1] += zs.iter().sum::<C64>() / m;
            moments[2] += zs.iter().map(|z| z * z).sum::<C64>() / m;
        }
        let s1 = moments[1];
        let s2 = 0.5 * (s1 * s1 - moments[2]);
        Ok(TorusEval { data, origin, quad, g, q, shift, s1, s2, zero_count: moments[0] })
    }

    pub fn params(&self) -> TorusParams {
        self.data.gm.p
    }

    fn circle_z(&self, sign: Sign, j: usize) -> C64 {
        let idx = match sign {
            Sign::Minus => 0,
            Sign::Plus => 1,
        };
        self.data.circle(sign).z[j] + self.shift[idx]
    }

    fn omega_nodes(&self, coeffs: &[C64]) -> Vec<C64> {
        self.q.iter().map(|q| self.data.forms.combine(coeffs, q)).collect()
    }

    /// `s1 = Z1 + Z2` and `s2 = Z1 Z2` for the zeros inside the parallelogram.
    pub fn zeros_symmetric(&self) -> (C64, C64) {
        (self.s1, self.s2)
    }

    /// `omega/dz(Z1) + omega/dz(Z2)` by the residue theorem on the boundary.
    pub fn residual_e(&self, coeffs: &[C64]) -> C64 {
        let om = self.omega_nodes(coeffs);
        let (s1, s2) = (self.s1, self.s2);
        let kernel = |z: C64| (2.0 * z - s1) / (z * z - s1 * z + s2);
        let mut e: C64 = self.quad.z.iter().zip(&self.quad.w).zip(&om).map(|((z, w), o)| kernel(*z) * o * w).sum();
        e /= C64::new(0.0, 2.0 * PI);
        for sign in [Sign::Minus, Sign::Plus] {
            let c = self.data.circle(sign);
            let m = c.s.len() as f64;
            for j in 0..c.s.len() {
                let w = self.data.circle_value(sign, coeffs, j);
                e -= kernel(self.circle_z(sign, j)) * w * c.s[j] / m;
            }
        }
        e
    }

    /// `(P_1, P_2)` before subtracting the targets.
    pub fn period_values(&self, k: i64, coeffs: &[C64], t: f64) -> (C64, C64) {
        let om = self.omega_nodes(coeffs);
        let mut ga = [C64::new(0.0, 0.0); 2];
        let mut ia = [C64::new(0.0, 0.0); 2];
        for j in 0..self.quad.z.len() {
            let (slot, sgn) = match self.quad.edge[j] {
                0 => (0, 1.0),
                3 => (1, -1.0),
                _ => continue,
            };
            let f = om[j] * self.quad.w[j] * sgn;
            ga[slot] += self.g[j] * f;
            ia[slot] += f / self.g[j];
        }
        let t2 = t * t;
        let p = |s: usize| {
            if k.rem_euclid(2) == 0 {
                (t2 * ga[s]).conj() - ia[s]
            } else {
                ia[s].conj() - t2 * ga[s]
            }
        };
        (p(0), p(1))
    }

    /// `(P_1 - 2(-1)^k, P_2 - 2 tau)`.
    pub fn residual_p(&self, k: i64, coeffs: &[C64], t: f64, tau: C64) -> (C64, C64) {
        let (p1, p2) = self.period_values(k, coeffs, t);
        let sgn = if k.rem_euclid(2) == 0 { 2.0 } else { -2.0 };
        (p1 - sgn, p2 - 2.0 * tau)
    }

    /// `conj^k` of the integral of `g omega` around `0_k`.
    pub fn gbal_value(&self, k: i64, coeffs: &[C64]) -> C64 {
        let c = self.data.circle(Sign::Minus);
        let m = c.s.len() as f64;
        let mean: C64 = (0..c.s.len()).map(|j| self.data.circle_value(Sign::Minus, coeffs, j)).sum::<C64>() / m;
        conj_pow(k, C64::new(0.0, 2.0 * PI) * mean)
    }

    pub fn residual_gbal(&self, k: i64, coeffs: &[C64], g0: C64) -> C64 {
        self.gbal_value(k, coeffs) + C64::new(0.0, 2.0 * PI) * g0
    }

    /// The four residuals of torus `k`.
    pub fn residuals(&self, k: i64, coeffs: &[C64], t: f64, tau: C64, g0: C64) -> [C64; 4] {
        let (p1, p2) = self.residual_p(k, coeffs, t, tau);
        [self.residual_e(coeffs), p1, p2, self.residual_gbal(k, coeffs, g0)]
    }
}

/// Residual quadruples `(E, P1, P2, Gbal)` of the active tori.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResidualVector {
    pub k_start: i64,
    pub values: Vec<[C64; 4]>,
    pub sup_norm: f64,
}

impl ResidualVector {
    fn from_values(k_start: i64, values: Vec<[C64; 4]>) -> Self {
        let sup_norm = values.iter().flatten().map(|c| c.re.abs().max(c.im.abs())).fold(0.0, f64::max);
        ResidualVector { k_start, values, sup_norm }
    }

    fn flat(&self) -> DVector<f64> {
        DVector::from_iterator(self.values.len() * 8, self.values.iter().flatten().flat_map(|c| [c.re, c.im]))
    }
}

/// A gluing state together with the cached per-torus evaluations.
#[derive(Clone, Debug)]
pub struct System {
    pub tau: C64,
    pub g0: C64,
    pub state: GluingState,
    pub evals: Vec<TorusEval>,
    pub opts: SolverOptions,
    rule: Vec<(f64, f64)>,
}

pub fn unknowns_of(p: &TorusParams) -> Result<[f64; 8]> {
    let b = p.b_hat()?;
    Ok([b.re, b.im, p.a.re, p.a.im, p.tau.re, p.tau.im, p.v.re, p.v.im])
}

pub fn params_from(x: &[f64]) -> Result<TorusParams> {
    TorusParams::from_unknowns(C64::new(x[0], x[1]), C64::new(x[2], x[3]), C64::new(x[4], x[5]), C64::new(x[6], x[7]))
}

impl System {
    /// Builds the system from a central state; contour corners are fixed
    /// here in lattice coordinates.
    pub fn new(cfg: &Configuration, state: GluingState, opts: &SolverOptions) -> Result<Self> {
        let lat = cfg.lattice()?;
        let g0 = hecke_g_at(&lat, cfg.q(0))?;
        let rule = gl_rule(opts.order);
        let mut state = state;
        state.boundary = match state.boundary {
            Boundary::Clamped { left, right } => {
                Boundary::Clamped { left: left.resized(opts.n_max), right: right.resized(opts.n_max) }
            }
            b => b,
        };
        let evals = state
            .tori
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let origin = choose_origin(&GaussMap::new(*p)?);
                TorusEval::new(*p, origin, state.epsilon, opts, &rule).map_err(|e| e.at_index(state.k_of(i)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(System { tau: cfg.tau, g0, state, evals, opts: opts.clone(), rule })
    }

    pub fn origins(&self) -> Vec<(f64, f64)> {
        self.evals.iter().map(|e| e.origin).collect()
    }

    /// Evaluation data of torus `i` with parameters `p` and the same corner.
    pub fn rebuild(&self, i: usize, p: TorusParams) -> Result<TorusEval> {
        TorusEval::new(p, self.evals[i].origin, self.state.epsilon, &self.opts, &self.rule)
            .map_err(|e| e.at_index(self.state.k_of(i)))
    }

    pub fn set_params(&mut self, i: usize, p: TorusParams) -> Result<()> {
        self.evals[i] = self.rebuild(i, p)?;
        self.state.tori[i] = p;
        Ok(())
    }

    pub fn series(&self) -> Result<OmegaSeries> {
        fix_omega_with(&self.state, &self.evals, FIX_TOL, 500)
    }

    fn assemble(&self, evals: &[&TorusEval], series: &OmegaSeries) -> ResidualVector {
        let values = self
            .state
            .active()
            .map(|i| {
                let k = self.state.k_of(i);
                evals[i].residuals(k, &series.coeffs(i), self.state.t, self.tau, self.g0)
            })
            .collect();
        ResidualVector::from_values(self.state.k_of(self.state.active().start), values)
    }

    pub fn residual(&self) -> Result<(ResidualVector, OmegaSeries)> {
        let series = self.series()?;
        let refs: Vec<&TorusEval> = self.evals.iter().collect();
        Ok((self.assemble(&refs, &series), series))
    }

    fn unknowns(&self) -> Result<DVector<f64>> {
        let mut x = Vec::new();
        for i in self.state.active() {
            x.extend(unknowns_of(&self.state.tori[i])?);
        }
        Ok(DVector::from_vec(x))
    }

    /// Forward-difference Jacobian of the flattened residual with respect
    /// to the real unknowns `(b_hat, a, tau, v)` of the active tori.
    pub fn jacobian(&self, base: &ResidualVector) -> Result<DMatrix<f64>> {
        let active: Vec<usize> = self.state.active().collect();
        let n = active.len() * 8;
        let f0 = base.flat();
        let h = self.opts.fd_step;
        let eval_at = |c: usize, step: f64| -> Result<DVector<f64>> {
            let i = active[c / 8];
            let mut x = unknowns_of(&self.state.tori[i])?;
            x[c % 8] += step;
            let ev = self.rebuild(i, params_from(&x)?)?;
            let mut refs: Vec<&TorusEval> = self.evals.iter().collect();
            refs[i] = &ev;
            let series = fix_omega_with(&self.state, &refs, FIX_TOL, 500)?;
            Ok(self.assemble(&refs, &series).flat())
        };
        let cols: Vec<Result<DVector<f64>>> = (0..n)
            .into_par_iter()
            .map(|c| {
                if self.opts.central_differences {
                    Ok((eval_at(c, h)? - eval_at(c, -h)?) / (2.0 * h))
                } else {
                    Ok((eval_at(c, h)? - &f0) / h)
                }
            })
            .collect();
        let mut jac = DMatrix::zeros(n, n);
        for (c, col) in cols.into_iter().enumerate() {
            jac.set_column(c, &col?);
        }
        Ok(jac)
    }

    fn apply(&mut self, x: &DVector<f64>) -> Result<()> {
        let active: Vec<usize> = self.state.active().collect();
        let new: Vec<(usize, TorusEval, TorusParams)> = active
            .par_iter()
            .enumerate()
            .map(|(slot, &i)| {
                let p = params_from(&x.as_slice()[8 * slot..8 * slot + 8])?;
                Ok((i, self.rebuild(i, p)?, p))
            })
            .collect::<Result<Vec<_>>>()?;
        for (i, ev, p) in new {
            self.evals[i] = ev;
            self.state.tori[i] = p;
        }
        Ok(())
    }

    /// Damped Newton at the current `t`. Returns the residual history.
    pub fn newton(&mut self) -> Result<(Vec<f64>, OmegaSeries)> {
        let (mut res, mut series) = self.residual()?;
        let mut history = vec![res.sup_norm];
        for _ in 0..self.opts.max_iter {
            if res.sup_norm < self.opts.tol {
                break;
            }
            let jac = self.jacobian(&res)?;
            let rhs = -res.flat();
            let Some(dx) = jac.lu().solve(&rhs) else {
                return Err(self.step_failure(res.sup_norm));
            };
            let x0 = self.unknowns()?;
            let saved = (self.state.clone(), self.evals.clone());
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..20 {
                let trial = &x0 + &dx * lambda;
                let attempt = self.apply(&trial).and_then(|_| self.residual());
                match attempt {
                    Ok((r, s)) if r.sup_norm < res.sup_norm => {
                        res = r;
                        series = s;
                        accepted = true;
                        break;
                    }
                    _ => {
                        self.state = saved.0.clone();
                        self.evals = saved.1.clone();
                        lambda *= 0.5;
                    }
                }
            }
            if !accepted {
                break;
            }
            history.push(res.sup_norm);
            log::debug!("t = {} newton residual {:.3e} (damping {lambda})", self.state.t, res.sup_norm);
        }
        if res.sup_norm >= RESIDUAL_TOL {
            return Err(self.step_failure(res.sup_norm));
        }
        Ok((history, series))
    }

    fn step_failure(&self, residual: f64) -> Error {
        Error::StepFailure { t: self.state.t, residual, suggested_step: 0.5 * self.state.t }
    }

    pub fn set_t(&mut self, t: f64) {
        self.state.t = t;
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveReport {
    pub t_schedule: Vec<f64>,
    pub iterations: Vec<usize>,
    pub residual_history: Vec<Vec<f64>>,
    pub final_residual: f64,
    pub cyclic: bool,
    /// Contour corners in lattice coordinates, per torus.
    pub origins: Vec<(f64, f64)>,
    pub state: GluingState,
    pub series: OmegaSeries,
}

/// Default schedule `t/4, t/2, t`.
pub fn auto_schedule(t_target: f64) -> Vec<f64> {
    if t_target <= 0.0 {
        Vec::new()
    } else {
        vec![0.25 * t_target, 0.5 * t_target, t_target]
    }
}

fn lcm(a: usize, b: usize) -> usize {
    let mut x = a;
    let mut y = b;
    while y != 0 {
        (x, y) = (y, x % y);
    }
    a / x * b
}

fn validate_schedule(schedule: &[f64]) -> Result<()> {
    let mut prev = 0.0;
    for &t in schedule {
        if !(t > prev) {
            return Err(Error::Invalid("schedule must be strictly increasing and positive".into()));
        }
        prev = t;
    }
    Ok(())
}

/// Runs the continuation on one system, halving failed steps. `prepare` is
/// called before each Newton solve with the new `t`.
fn continue_system(
    sys: &mut System,
    schedule: &[f64],
    mut prepare: impl FnMut(&mut System, f64) -> Result<()>,
) -> Result<(Vec<f64>, Vec<usize>, Vec<Vec<f64>>, OmegaSeries)> {
    validate_schedule(schedule)?;
    let mut ts = Vec::new();
    let mut its = Vec::new();
    let mut hist = Vec::new();
    let (_, mut series) = sys.residual()?;
    let mut t_prev = 0.0;
    for &target in schedule {
        let mut t = target;
        let mut halvings = 0;
        loop {
            let saved = (sys.state.clone(), sys.evals.clone());
            sys.set_t(t);
            let attempt = prepare(sys, t).and_then(|_| sys.newton());
            match attempt {
                Ok((h, s)) => {
                    ts.push(t);
                    its.push(h.len() - 1);
                    hist.push(h);
                    series = s;
                    t_prev = t;
                    if t >= target {
                        break;
                    }
                    t = target;
                    halvings = 0;
                }
                Err(e @ (Error::StepFailure { .. } | Error::NonContraction { .. })) => {
                    sys.state = saved.0;
                    sys.evals = saved.1;
                    halvings += 1;
                    if halvings > sys.opts.max_bisections {
                        return Err(match e {
                            Error::StepFailure { residual, .. } => {
                                Error::StepFailure { t, residual, suggested_step: 0.5 * (t - t_prev) }
                            }
                            e => e,
                        });
                    }
                    t = 0.5 * (t_prev + t);
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok((ts, its, hist, series))
}

/// Number of tori used for the cyclic solve of a periodic configuration.
pub fn cyclic_length(period: usize) -> usize {
    lcm(period, 2)
}

/// Solves a periodic configuration on one (even) period with cyclic coupling.
pub fn solve_cyclic(cfg: &Configuration, schedule: &[f64], opts: &SolverOptions) -> Result<SolveReport> {
    let period = cfg.period().ok_or_else(|| Error::Invalid("configuration is not periodic".into()))?;
    let n = cyclic_length(period) as i64;
    let state = GluingState::central(cfg, 0, n - 1, true)?;
    let mut sys = System::new(cfg, state, opts)?;
    let (ts, its, hist, series) = continue_system(&mut sys, schedule, |_, _| Ok(()))?;
    let (res, _) = sys.residual()?;
    Ok(SolveReport {
        t_schedule: ts,
        iterations: its,
        residual_history: hist,
        final_residual: res.sup_norm,
        cyclic: true,
        origins: sys.origins(),
        state: sys.state,
        series,
    })
}

/// Parameters and coefficients of torus `k` from a cyclic solution.
pub fn cyclic_entry(sys: &System, series: &OmegaSeries, k: i64) -> (TorusParams, LambdaRow) {
    let i = k.rem_euclid(sys.state.len() as i64) as usize;
    (sys.state.tori[i], series.lambda[i].clone())
}

/// Solves the window `-K-1..=K+1` with the end tori clamped to the
/// cyclic solutions of the two tails.
pub fn solve_window(cfg: &Configuration, schedule: &[f64], opts: &SolverOptions) -> Result<SolveReport> {
    let kk = cfg.half_width();
    let left = cfg.left_comparator()?;
    let right = cfg.right_comparator()?;
    let tail_system = |c: &Configuration| -> Result<System> {
        let n = cyclic_length(c.period().expect("comparators are periodic")) as i64;
        System::new(c, GluingState::central(c, 0, n - 1, true)?, opts)
    };
    let mut ls = tail_system(&left)?;
    let mut rs = tail_system(&right)?;
    let mut lser = ls.series()?;
    let mut rser = rs.series()?;
    let state = GluingState::central(cfg, -kk - 1, kk + 1, false)?;
    let mut sys = System::new(cfg, state, opts)?;
    let last = sys.state.len() - 1;
    let (ts, its, hist, series) = continue_system(&mut sys, schedule, |sys, t| {
        ls.set_t(t);
        rs.set_t(t);
        lser = ls.newton()?.1;
        rser = rs.newton()?.1;
        let (pl, ll) = cyclic_entry(&ls, &lser, -kk - 1);
        let (pr, lr) = cyclic_entry(&rs, &rser, kk + 1);
        sys.set_params(0, pl)?;
        sys.set_params(last, pr)?;
        sys.state.boundary = Boundary::Clamped { left: ll.resized(opts.n_max), right: lr.resized(opts.n_max) };
        Ok(())
    })?;
    let (res, _) = sys.residual()?;
    Ok(SolveReport {
        t_schedule: ts,
        iterations: its,
        residual_history: hist,
        final_residual: res.sup_norm,
        cyclic: false,
        origins: sys.origins(),
        state: sys.state,
        series,
    })
}

/// Continuation from the explicit `t = 0` solution to `t_target`.
/// Periodic configurations are solved cyclically, others on the window.
pub fn newton_continuation(
    cfg: &Configuration,
    t_target: f64,
    schedule: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<SolveReport> {
    if !(t_target >= 0.0) {
        return Err(Error::Invalid(format!("t must be non-negative, got {t_target}")));
    }
    let sched = match schedule {
        Some(s) => {
            if s.last().is_some_and(|&t| (t - t_target).abs() > 1e-15) {
                return Err(Error::Invalid("schedule must end at t_target".into()));
            }
            s.to_vec()
        }
        None => auto_schedule(t_target),
    };
    if cfg.period().is_some() {
        solve_cyclic(cfg, &sched, opts)
    } else {
        solve_window(cfg, &sched, opts)
    }
}

/// Rebuilds the solver system for a solved state (for post-processing).
pub fn system_for(cfg: &Configuration, report: &SolveReport, opts: &SolverOptions) -> Result<System> {
    let central = if report.cyclic {
        GluingState::central(cfg, report.state.k_start, report.state.k_start + report.state.len() as i64 - 1, true)?
    } else {
        GluingState::central(cfg, report.state.k_start, report.state.k_start + report.state.len() as i64 - 1, false)?
    };
    let mut sys = System::new(cfg, central, opts)?;
    sys.state.t = report.state.t;
    sys.state.boundary = report.state.boundary.clone();
    for (i, p) in report.state.tori.iter().enumerate() {
        sys.set_params(i, *p)?;
    }
    Ok(sys)
}

/// Lattice of torus `i` of a state.
pub fn torus_lattice(st: &GluingState, i: usize) -> Result<Lattice> {
    Lattice::new(st.tori[i].tau)
}
