//! The 1-form `omega` as a truncated series of second-kind forms whose
//! coefficients solve `lambda = L(t, x, lambda)`.

use super::forms::FormTable;
use super::gauss::GaussMap;
use super::{GluingState, LambdaRow, Sign, TorusParams, Boundary, FIX_TOL};
use crate::elliptic::C64;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Chart circle `|z^±| = radius` sampled at `M` equispaced nodes.
#[derive(Clone, Debug)]
pub struct CircleData {
    pub sign: Sign,
    pub radius: f64,
    pub s: Vec<C64>,
    pub z: Vec<C64>,
    pub dzds: Vec<C64>,
    /// Complex-linear basis parts times `dz/ds` at each node: `[node][basis]`.
    pub basis: Vec<Vec<C64>>,
}

impl CircleData {
    pub fn new(gm: &GaussMap, forms: &FormTable, sign: Sign, radius: f64, nodes: usize) -> Result<Self> {
        let mut s = Vec::with_capacity(nodes);
        let mut z = Vec::with_capacity(nodes);
        let mut dzds = Vec::with_capacity(nodes);
        let mut basis = Vec::with_capacity(nodes);
        let mut seed = None;
        for j in 0..nodes {
            let sj = C64::from_polar(radius, 2.0 * PI * j as f64 / nodes as f64);
            let zj = gm.chart_inverse(sign, sj, seed)?;
            seed = Some(zj);
            let jac = gm.chart_jacobian(zj);
            let vals = forms.eval_all(gm, zj);
            basis.push(vals.into_iter().map(|b| b * jac).collect());
            s.push(sj);
            z.push(zj);
            dzds.push(jac);
        }
        Ok(CircleData { sign, radius, s, z, dzds, basis })
    }

    /// `(1/2 pi i) oint f(s) ds` by the trapezoid rule, `f` given at nodes.
    pub fn mean_residue(&self, f: impl Fn(usize) -> C64) -> C64 {
        let m = self.s.len() as f64;
        (0..self.s.len()).map(|j| f(j) * self.s[j]).sum::<C64>() / m
    }
}

/// Geometry of one torus that does not depend on `t` or `lambda`.
#[derive(Clone, Debug)]
pub struct TorusData {
    pub gm: GaussMap,
    pub forms: FormTable,
    pub epsilon: f64,
    /// `[minus (at 0), plus (at v)]` circles of radius `epsilon`.
    pub circles: [CircleData; 2],
}

impl TorusData {
    pub fn new(p: TorusParams, epsilon: f64, n_max: usize, nodes: usize) -> Result<Self> {
        let gm = GaussMap::new(p)?;
        let forms = FormTable::new(&gm, n_max);
        let minus = CircleData::new(&gm, &forms, Sign::Minus, epsilon, nodes)?;
        let plus = CircleData::new(&gm, &forms, Sign::Plus, epsilon, nodes)?;
        Ok(TorusData { gm, forms, epsilon, circles: [minus, plus] })
    }

    pub fn circle(&self, sign: Sign) -> &CircleData {
        match sign {
            Sign::Minus => &self.circles[0],
            Sign::Plus => &self.circles[1],
        }
    }

    /// Moments `-(1/M) sum s (t^2/(rho s))^(n-1) W` for `n = 2..=n_max`,
    /// per basis part (`[n-2][basis]`) and for `dz/ds` (`[n-2]`).
    fn moments(&self, sign: Sign, t: f64, rho: f64) -> Moments {
        let c = self.circle(sign);
        let nb = self.forms.len();
        let m = c.s.len() as f64;
        let mut q = vec![vec![C64::new(0.0, 0.0); nb]; self.forms.n_max - 1];
        let mut dz = vec![C64::new(0.0, 0.0); self.forms.n_max - 1];
        for (j, &s) in c.s.iter().enumerate() {
            let ratio = t * t / (rho * s);
            let mut pw = s * ratio / m;
            for (row, d) in q.iter_mut().zip(dz.iter_mut()) {
                for (acc, w) in row.iter_mut().zip(&c.basis[j]) {
                    *acc -= pw * w;
                }
                *d -= pw * c.dzds[j];
                pw *= ratio;
            }
        }
        Moments { q, dz, a2: self.forms.a2_all(), kappa: self.forms.kappa() }
    }

    /// `omega/ds` at node `j` of a circle for basis coefficients `c`.
    pub fn circle_value(&self, sign: Sign, c: &[C64], j: usize) -> C64 {
        let circ = self.circle(sign);
        let lin: C64 = c.iter().zip(&circ.basis[j]).map(|(x, y)| x * y).sum();
        lin + self.forms.period_fix(c) * circ.dzds[j]
    }
}

/// Gluing rows fed by a torus: the `Minus` circle gives `lambda^+` of the
/// torus below, the `Plus` circle gives `lambda^-` of the torus above.
pub fn gluing_rows(data: &TorusData, sign: Sign, t: f64, rho: f64, row: &LambdaRow) -> Vec<C64> {
    let mom = data.moments(sign, t, rho);
    let c = coeffs_of(row, rho);
    (0..data.forms.n_max - 1).map(|n| mom.apply(n, &c)).collect()
}

struct Moments {
    q: Vec<Vec<C64>>,
    dz: Vec<C64>,
    a2: Vec<C64>,
    kappa: f64,
}

impl Moments {
    fn apply(&self, n: usize, c: &[C64]) -> C64 {
        let im: f64 = c.iter().zip(&self.a2).map(|(x, a)| (x * a).im).sum();
        dot(&self.q[n], c) + C64::new(0.0, self.kappa * im) * self.dz[n]
    }

    /// Operator norm bound of row `n` with respect to unit `lambda`.
    fn row_bound(&self, n: usize, rho: f64, nrow: usize) -> f64 {
        let mut rp = rho;
        let mut sum = 0.0;
        for m in 0..nrow {
            for b in [1 + m, 1 + nrow + m] {
                sum += rp * (self.q[n][b].norm() + self.kappa * self.a2[b].norm() * self.dz[n].norm());
            }
            rp *= rho;
        }
        sum
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OmegaSeries {
    pub t: f64,
    pub rho: f64,
    pub n_max: usize,
    pub k_start: i64,
    pub lambda: Vec<LambdaRow>,
    pub converged: bool,
    /// `||dL/dlambda||_inf`.
    pub contraction_estimate: f64,
    /// Observed ratio of successive update norms.
    pub update_ratio: f64,
    pub iterations: usize,
    pub fixed_point_residual: f64,
}

impl OmegaSeries {
    /// Coefficients of the basis `[omega_0, omega^+_n.., omega^-_n..]`.
    pub fn coeffs(&self, i: usize) -> Vec<C64> {
        coeffs_of(&self.lambda[i], self.rho)
    }
}

/// Basis coefficients of a torus with gluing coefficients `row`.
pub fn coeffs_of(row: &LambdaRow, rho: f64) -> Vec<C64> {
    let mut out = Vec::with_capacity(1 + row.plus.len() + row.minus.len());
    out.push(C64::new(1.0, 0.0));
    let mut rp = rho;
    let mut plus = Vec::with_capacity(row.plus.len());
    let mut minus = Vec::with_capacity(row.minus.len());
    for (p, m) in row.plus.iter().zip(&row.minus) {
        plus.push(p * rp);
        minus.push(m * rp);
        rp *= rho;
    }
    out.extend(plus);
    out.extend(minus);
    out
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl AsRef<TorusData> for TorusData {
    fn as_ref(&self) -> &TorusData {
        self
    }
}

pub fn fix_omega<D: AsRef<TorusData>>(st: &GluingState, data: &[D]) -> Result<OmegaSeries> {
    fix_omega_with(st, data, FIX_TOL, 500)
}

/// Iterates `lambda -> L(lambda)` from zero until the update is below `tol`.
pub fn fix_omega_with<D: AsRef<TorusData>>(
    st: &GluingState,
    data: &[D],
    tol: f64,
    max_iter: usize,
) -> Result<OmegaSeries> {
    st.check_regime()?;
    let data: Vec<&TorusData> = data.iter().map(|d| d.as_ref()).collect();
    let n_max = data[0].forms.n_max;
    let nrow = n_max - 1;
    let (t, rho) = (st.t, st.rho);
    // moments of torus j feeding its neighbours
    let mom: Vec<[Moments; 2]> =
        data.iter().map(|d| [d.moments(Sign::Minus, t, rho), d.moments(Sign::Plus, t, rho)]).collect();

    let mut lambda: Vec<LambdaRow> = vec![LambdaRow::zeros(n_max); data.len()];
    if let Boundary::Clamped { left, right } = &st.boundary {
        lambda[0] = left.resized(n_max);
        *lambda.last_mut().unwrap() = right.resized(n_max);
    }

    // ||L(e) - L(0)||_inf row sums
    let mut contraction: f64 = 0.0;
    for i in st.active() {
        for (delta, which) in [(1i64, 0usize), (-1, 1)] {
            let j = st.neighbor(i, delta).expect("active tori have neighbours");
            for n in 0..nrow {
                contraction = contraction.max(mom[j][which].row_bound(n, rho, nrow));
            }
        }
    }
    if contraction >= 1.0 {
        return Err(Error::NonContraction { t, ratio: contraction });
    }

    let apply = |lambda: &Vec<LambdaRow>| -> Vec<LambdaRow> {
        let coeffs: Vec<Vec<C64>> = lambda.iter().map(|r| coeffs_of(r, rho)).collect();
        let mut out = lambda.clone();
        for i in st.active() {
            let jp = st.neighbor(i, 1).unwrap();
            let jm = st.neighbor(i, -1).unwrap();
            for n in 0..nrow {
                out[i].plus[n] = mom[jp][0].apply(n, &coeffs[jp]);
                out[i].minus[n] = mom[jm][1].apply(n, &coeffs[jm]);
            }
        }
        out
    };
    let diff = |a: &Vec<LambdaRow>, b: &Vec<LambdaRow>| -> f64 {
        a.iter()
            .zip(b)
            .flat_map(|(x, y)| x.plus.iter().zip(&y.plus).chain(x.minus.iter().zip(&y.minus)))
            .map(|(p, q)| (p - q).norm())
            .fold(0.0, f64::max)
    };

    let mut prev_update = f64::NAN;
    let mut ratio: f64 = 0.0;
    let mut iterations = 0;
    let mut converged = false;
    for it in 0..max_iter {
        let next = apply(&lambda);
        let upd = diff(&next, &lambda);
        iterations = it + 1;
        lambda = next;
        if prev_update > 0.0 && upd > 0.0 {
            ratio = upd / prev_update;
            if ratio >= 1.0 && upd > tol {
                return Err(Error::NonContraction { t, ratio });
            }
        }
        prev_update = upd;
        if upd < tol {
            converged = true;
            break;
        }
    }
    let residual = diff(&apply(&lambda), &lambda);
    Ok(OmegaSeries {
        t,
        rho,
        n_max,
        k_start: st.k_start,
        lambda,
        converged,
        contraction_estimate: contraction,
        update_ratio: ratio,
        iterations,
        fixed_point_residual: residual,
    })
}

/// `omega/dz` on torus `i` at `z`.
pub fn omega_eval(series: &OmegaSeries, data: &TorusData, i: usize, z: C64) -> Result<C64> {
    data.gm.value(z)?;
    Ok(data.forms.combine(&series.coeffs(i), &data.forms.eval_all(&data.gm, z)))
}

/// Laurent expansion of `omega` in the `z^+` chart of a torus:
/// `residue ds/s + sum plus[n-1] s^(n-1) ds + sum minus[n-1] ds/s^(n+1)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LaurentTable {
    pub residue: C64,
    /// `c^+_n`, `n = 1..`
    pub plus: Vec<C64>,
    /// `t^(2n) c^-_n`, `n = 1..`
    pub minus: Vec<C64>,
}

impl LaurentTable {
    /// `omega/ds` at chart coordinate `s`.
    pub fn eval(&self, s: C64) -> C64 {
        let mut v = self.residue / s;
        let mut p = C64::new(1.0, 0.0);
        for c in &self.plus {
            v += c * p;
            p *= s;
        }
        let inv = 1.0 / s;
        let mut q = inv * inv;
        for c in &self.minus {
            v += c * q;
            q *= inv;
        }
        v
    }

    /// Antiderivative of `omega` in `s` without the logarithmic term.
    pub fn primitive_regular(&self, s: C64) -> C64 {
        let mut v = C64::new(0.0, 0.0);
        let mut p = s;
        for (n, c) in self.plus.iter().enumerate() {
            v += c * p / (n + 1) as f64;
            p *= s;
        }
        let inv = 1.0 / s;
        let mut q = inv;
        for (n, c) in self.minus.iter().enumerate() {
            v -= c * q / (n + 1) as f64;
            q *= inv;
        }
        v
    }

    /// Bound on the omitted positive tail relative to the last kept term.
    pub fn tail_estimate(&self, radius: f64) -> f64 {
        let n = self.plus.len();
        if n < 2 {
            return f64::INFINITY;
        }
        let last = self.plus[n - 1].norm() * radius.powi(n as i32 - 1);
        let before = self.plus[n - 2].norm() * radius.powi(n as i32 - 2);
        if before == 0.0 {
            return last;
        }
        let q = (last / before).min(0.99);
        last * q / (1.0 - q)
    }
}

/// Contour-extracted Laurent coefficients of `omega` in the `z^+_k` chart.
pub fn laurent_coeffs(series: &OmegaSeries, data: &TorusData, i: usize, max_n: usize) -> LaurentTable {
    laurent_from_coeffs(data, &series.coeffs(i), Sign::Plus, max_n, series.n_max)
}

/// Laurent coefficients of the form with basis coefficients `coeffs` in
/// either chart, extracted on the circle `|s| = epsilon`.
pub fn laurent_from_coeffs(data: &TorusData, coeffs: &[C64], sign: Sign, max_n: usize, n_max: usize) -> LaurentTable {
    let nodes = 256.max(4 * max_n);
    let c = data.circle(sign);
    let owned;
    let circle = if c.s.len() == nodes {
        c
    } else {
        owned = CircleData::new(&data.gm, &data.forms, sign, data.epsilon, nodes).expect("chart validated");
        &owned
    };
    let fix = data.forms.period_fix(coeffs);
    let w: Vec<C64> = circle.basis.iter().zip(&circle.dzds).map(|(b, d)| dot(coeffs, b) + fix * d).collect();
    let m = nodes as f64;
    // coefficient of s^j ds is (1/M) sum W s^-j
    let coef = |j: i64| -> C64 { circle.s.iter().zip(&w).map(|(s, wv)| wv * s.powi(-j as i32)).sum::<C64>() / m };
    LaurentTable {
        residue: coef(-1),
        plus: (1..=max_n as i64).map(|n| coef(n - 1)).collect(),
        minus: (1..n_max as i64).map(|n| coef(-n - 1)).collect(),
    }
}

/// A gluing state with its per-torus geometry and the solved coefficients.
#[derive(Clone, Debug)]
pub struct Surface {
    pub state: GluingState,
    pub data: Vec<TorusData>,
    pub series: OmegaSeries,
}

impl Surface {
    pub fn build(state: &GluingState, n_max: usize, nodes: usize) -> Result<Surface> {
        let data = state
            .tori
            .iter()
            .enumerate()
            .map(|(i, p)| TorusData::new(*p, state.epsilon, n_max, nodes).map_err(|e| e.at_index(state.k_of(i))))
            .collect::<Result<Vec<_>>>()?;
        let series = fix_omega(state, &data)?;
        Ok(Surface { state: state.clone(), data, series })
    }

    pub fn omega(&self, i: usize, z: C64) -> Result<C64> {
        omega_eval(&self.series, &self.data[i], i, z)
    }

    /// `omega/ds` in the chart of torus `i` at `s` (direct series).
    pub fn omega_in_chart(&self, i: usize, sign: Sign, s: C64) -> Result<C64> {
        let d = &self.data[i];
        let z = d.gm.chart_inverse(sign, s, None)?;
        Ok(self.omega(i, z)? * d.gm.chart_jacobian(z))
    }
}
