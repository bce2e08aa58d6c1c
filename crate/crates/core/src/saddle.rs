//! The unregularized barycenter problem as a bilinear saddle point
//!
//! `min_{x_i in simplex(n^2), p in simplex(n)} max_{y_i in [-1,1]^{2n}}
//!  (1/m) sum_i d^T x_i + 2||d||_inf (y_i^T A x_i - b_i^T y_i)`, `b_i = (p, q_i)`,
//!
//! solved by mirror prox with entropic prox on the simplex blocks and the
//! Euclidean one on the boxes.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measures::{BregmanPenalty, CostMatrix, CostVector, Histogram};
use crate::numerics::softmax_in_place;
use crate::trace::{IterateTrace, Monitor, MIRROR_PROX_COLUMNS};

/// `A x` for a row-major `n x n` plan: `(row sums; column sums)`.
pub fn incidence_apply(x: &[f64], n: usize) -> Result<Vec<f64>> {
    if x.len() != n * n {
        return Err(Error::InvalidInput(format!(
            "incidence operator expects {} entries, got {}",
            n * n,
            x.len()
        )));
    }
    let mut out = vec![0.0; 2 * n];
    incidence_apply_into(x, n, &mut out);
    Ok(out)
}

pub(crate) fn incidence_apply_into(x: &[f64], n: usize, out: &mut [f64]) {
    out.fill(0.0);
    let (rows, cols) = out.split_at_mut(n);
    for (i, row) in x.chunks_exact(n).enumerate() {
        let mut s = 0.0;
        for (c, v) in cols.iter_mut().zip(row) {
            s += v;
            *c += v;
        }
        rows[i] = s;
    }
}

/// `(A^T y)_{(i,j)} = y_i + y_{n+j}`.
pub fn incidence_apply_transpose(y: &[f64], n: usize) -> Result<Vec<f64>> {
    if y.len() != 2 * n {
        return Err(Error::InvalidInput(format!(
            "incidence transpose expects {} entries, got {}",
            2 * n,
            y.len()
        )));
    }
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = y[i] + y[n + j];
        }
    }
    Ok(out)
}

/// Penalty `lambda B_d(p, p1)` added to the barycenter objective.
#[derive(Debug, Clone)]
pub struct Penalty {
    pub lambda: f64,
    pub bregman: BregmanPenalty,
}

/// One iterate of the saddle-point method: `m` plans, the barycenter block
/// and `m` dual boxes, with the step constants.
#[derive(Debug, Clone)]
pub struct SaddleState {
    pub n: usize,
    pub x: Vec<Vec<f64>>,
    pub p: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub alpha: f64,
    pub beta: f64,
    /// Entropic step on the plan blocks; `gamma` in the literature, unrelated
    /// to the entropic regularization strength.
    pub gamma_step: f64,
}

impl SaddleState {
    /// Uniform plans and barycenter, zero duals.
    pub fn initial(n: usize, m: usize, alpha: f64, beta: f64, gamma_step: f64) -> Self {
        Self {
            n,
            x: vec![vec![1.0 / (n * n) as f64; n * n]; m],
            p: vec![1.0 / n as f64; n],
            y: vec![vec![0.0; 2 * n]; m],
            alpha,
            beta,
            gamma_step,
        }
    }

    pub fn m(&self) -> usize {
        self.x.len()
    }
}

/// Value of the operator `(grad_x, grad_p, -grad_y)` at a state.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorValue {
    pub gx: Vec<Vec<f64>>,
    pub gp: Vec<f64>,
    pub gy: Vec<Vec<f64>>,
}

fn check_measures(measures: &[Histogram], n: usize) -> Result<()> {
    if measures.is_empty() {
        return Err(Error::InvalidInput("need at least one measure".into()));
    }
    if measures.iter().any(|q| q.len() != n) {
        return Err(Error::InvalidInput("measure sizes disagree with the cost".into()));
    }
    Ok(())
}

/// Blocks of the monotone operator of the (optionally penalized) problem:
/// `grad_x_i = (d + 2||d|| A^T y_i)/m`,
/// `grad_p = -(2||d||/m) sum_i [y_i]_top + lambda (grad d(p) - grad d(p1))`,
/// `-grad_y_i = (2||d||/m)(b_i - A x_i)`.
pub fn saddle_gradient_operator(
    x: &[Vec<f64>],
    p: &[f64],
    y: &[Vec<f64>],
    measures: &[Histogram],
    d: &CostVector,
    penalty: Option<&Penalty>,
) -> Result<OperatorValue> {
    let n = p.len();
    check_measures(measures, n)?;
    let m = measures.len();
    if x.len() != m || y.len() != m {
        return Err(Error::InvalidInput("block counts disagree with the measures".into()));
    }
    let dn = d.inf_norm;
    let mf = m as f64;
    let gx: Vec<Vec<f64>> = y
        .iter()
        .map(|yi| {
            let mut g = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    let k = i * n + j;
                    g[k] = (d.d[k] + 2.0 * dn * (yi[i] + yi[n + j])) / mf;
                }
            }
            g
        })
        .collect();
    let mut gp = vec![0.0; n];
    for yi in y {
        for (g, v) in gp.iter_mut().zip(&yi[..n]) {
            *g += v;
        }
    }
    for g in gp.iter_mut() {
        *g *= -2.0 * dn / mf;
    }
    if let Some(pen) = penalty {
        if pen.lambda != 0.0 {
            if p.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::Domain("penalty gradient needs a strictly positive p".into()));
            }
            for (g, b) in gp.iter_mut().zip(pen.bregman.gradient(p)) {
                *g += pen.lambda * b;
            }
        }
    }
    let mut ax = vec![0.0; 2 * n];
    let gy: Vec<Vec<f64>> = x
        .iter()
        .zip(measures)
        .map(|(xi, q)| {
            incidence_apply_into(xi, n, &mut ax);
            let mut g = vec![0.0; 2 * n];
            for l in 0..n {
                g[l] = 2.0 * dn / mf * (p[l] - ax[l]);
                g[n + l] = 2.0 * dn / mf * (q.weights()[l] - ax[n + l]);
            }
            g
        })
        .collect();
    Ok(OperatorValue { gx, gp, gy })
}

/// Step constants for `m` measures on `n` points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MirrorProxConstants {
    pub eta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma_step: f64,
    pub n_iter: usize,
}

impl MirrorProxConstants {
    pub fn new(n: usize, m: usize, d_norm: f64, epsilon: f64) -> Self {
        let nf = n as f64;
        let ln = nf.ln().max(f64::MIN_POSITIVE);
        let root = (6.0 * nf * ln).sqrt();
        let eta = 1.0 / (4.0 * d_norm * root);
        Self {
            eta,
            alpha: 2.0 * d_norm * eta * nf,
            beta: 6.0 * d_norm * eta * ln / m as f64,
            gamma_step: 3.0 * eta * ln,
            n_iter: (8.0 * d_norm * root / epsilon).ceil() as usize,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MirrorProxOutput {
    /// Average of the barycenter extrapolation blocks `s^k`.
    pub barycenter: Histogram,
    /// Averaged plan blocks.
    pub plans: Vec<Vec<f64>>,
    /// Averaged dual blocks.
    pub duals: Vec<Vec<f64>>,
    pub duality_gap: f64,
    pub constants: MirrorProxConstants,
    pub trace: IterateTrace,
}

pub(crate) fn clip_unit(v: f64) -> f64 {
    v.clamp(-1.0, 1.0)
}

/// `log w <- log w + step`, then normalize. Returns the new weights.
pub(crate) fn entropic_update(log_w: &mut [f64], step: impl Fn(usize) -> f64) -> Vec<f64> {
    for (k, l) in log_w.iter_mut().enumerate() {
        *l += step(k);
    }
    let mut w = log_w.to_vec();
    let lse = softmax_in_place(&mut w);
    for l in log_w.iter_mut() {
        *l -= lse;
    }
    w
}

/// Upper bound on the duality gap of `(x, p; y)`. Both inner problems are
/// solved in closed form; a penalty enters the max side exactly, and on the
/// min side through `B_d >= 0`, which only loosens the bound.
pub fn duality_gap(
    x: &[Vec<f64>],
    p: &[f64],
    y: &[Vec<f64>],
    measures: &[Histogram],
    d: &CostVector,
    penalty: Option<&Penalty>,
) -> Result<f64> {
    let n = p.len();
    check_measures(measures, n)?;
    let m = measures.len() as f64;
    let dn = d.inf_norm;
    let mut ax = vec![0.0; 2 * n];

    let mut primal = 0.0;
    for (xi, q) in x.iter().zip(measures) {
        incidence_apply_into(xi, n, &mut ax);
        let mut resid = 0.0;
        for l in 0..n {
            resid += (ax[l] - p[l]).abs() + (ax[n + l] - q.weights()[l]).abs();
        }
        primal += crate::numerics::dot(&d.d, xi) + 2.0 * dn * resid;
    }
    primal /= m;
    if let Some(pen) = penalty {
        primal += pen.lambda * pen.bregman.value(p)?;
    }

    let mut dual = 0.0;
    let mut top = vec![0.0; n];
    for (yi, q) in y.iter().zip(measures) {
        let mut best = f64::INFINITY;
        for i in 0..n {
            for j in 0..n {
                best = best.min(d.d[i * n + j] + 2.0 * dn * (yi[i] + yi[n + j]));
            }
        }
        dual += best - 2.0 * dn * crate::numerics::dot(q.weights(), &yi[n..]);
        for (t, v) in top.iter_mut().zip(&yi[..n]) {
            *t += v;
        }
    }
    dual += top.iter().map(|t| -2.0 * dn * t).fold(f64::INFINITY, f64::min);
    dual /= m;
    Ok(primal - dual)
}

/// Simplex blocks sum to one within 1e-9 and boxes hold.
pub(crate) fn check_feasible(x: &[Vec<f64>], p: &[f64], y: &[Vec<f64>], k: usize) -> Result<()> {
    let off = |w: &[f64]| (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 || w.iter().any(|v| !(*v >= 0.0));
    if x.iter().any(|xi| off(xi)) || off(p) {
        return Err(Error::Numeric(format!("simplex block left the simplex at iteration {k}")));
    }
    if y.iter().flatten().any(|v| !(v.abs() <= 1.0)) {
        return Err(Error::Numeric(format!("dual block left the box at iteration {k}")));
    }
    Ok(())
}

/// Running sums of the extrapolation points for the averaged output.
pub(crate) struct Averages {
    pub x: Vec<Vec<f64>>,
    pub p: Vec<f64>,
    pub y: Vec<Vec<f64>>,
}

impl Averages {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            x: vec![vec![0.0; n * n]; m],
            p: vec![0.0; n],
            y: vec![vec![0.0; 2 * n]; m],
        }
    }

    pub fn add(&mut self, u: &[Vec<f64>], s: &[f64], v: &[Vec<f64>]) {
        for (acc, ui) in self.x.iter_mut().zip(u) {
            for (a, b) in acc.iter_mut().zip(ui) {
                *a += b;
            }
        }
        for (a, b) in self.p.iter_mut().zip(s) {
            *a += b;
        }
        for (acc, vi) in self.y.iter_mut().zip(v) {
            for (a, b) in acc.iter_mut().zip(vi) {
                *a += b;
            }
        }
    }

    pub fn scaled(&self, k: usize) -> (Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>) {
        let s = 1.0 / k as f64;
        let sc = |v: &Vec<f64>| v.iter().map(|a| a * s).collect::<Vec<f64>>();
        (
            self.x.iter().map(sc).collect(),
            sc(&self.p),
            self.y.iter().map(sc).collect(),
        )
    }
}

/// Options beyond the algorithm's own inputs.
pub struct MirrorProxOptions<'a> {
    /// Override the iteration count derived from `epsilon`.
    pub n_iter: Option<usize>,
    pub monitor: Option<Monitor<'a>>,
}

impl Default for MirrorProxOptions<'_> {
    fn default() -> Self {
        Self {
            n_iter: None,
            monitor: None,
        }
    }
}

/// Mirror prox for the (optionally penalized) barycenter saddle point.
pub fn mirror_prox_wb(
    measures: &[Histogram],
    c: &CostMatrix,
    epsilon: f64,
    penalty: Option<&Penalty>,
    opts: MirrorProxOptions<'_>,
) -> Result<MirrorProxOutput> {
    let n = c.n();
    check_measures(measures, n)?;
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput(format!("epsilon = {epsilon} must be > 0")));
    }
    if measures.iter().any(|q| !q.is_strictly_positive()) {
        return Err(Error::InvalidInput("measures must be strictly positive; smooth them first".into()));
    }
    if let Some(pen) = penalty {
        if pen.bregman.reference().len() != n {
            return Err(Error::InvalidInput("penalty reference has the wrong size".into()));
        }
    }
    let m = measures.len();
    let d = c.to_vector();
    let dn = d.inf_norm;
    if !(dn > 0.0) {
        return Err(Error::InvalidInput("cost must have a positive entry".into()));
    }
    let mut consts = MirrorProxConstants::new(n, m, dn, epsilon);
    if let Some(k) = opts.n_iter {
        consts.n_iter = k.max(1);
    }
    let n_iter = consts.n_iter;
    let mut monitor = opts.monitor.unwrap_or_else(|| Monitor::new(n_iter));
    let mut trace = IterateTrace::new(&MIRROR_PROX_COLUMNS);
    trace.set_param("eta", consts.eta);
    trace.set_param("alpha", consts.alpha);
    trace.set_param("beta", consts.beta);
    trace.set_param("gamma_step", consts.gamma_step);
    trace.set_param("n_iter", n_iter as f64);

    let mut state = SaddleState::initial(n, m, consts.alpha, consts.beta, consts.gamma_step);
    let mut log_x: Vec<Vec<f64>> = vec![vec![-((n * n) as f64).ln(); n * n]; m];
    let mut log_p = vec![-(n as f64).ln(); n];
    let mut avg = Averages::zeros(n, m);
    // step multipliers turning operator blocks into the algorithm's updates
    let x_scale = consts.gamma_step * m as f64;
    let y_scale = consts.alpha * m as f64 / (2.0 * dn);

    for k in 1..=n_iter {
        let g = saddle_gradient_operator(&state.x, &state.p, &state.y, measures, &d, penalty)?;
        let v: Vec<Vec<f64>> = state
            .y
            .iter()
            .zip(&g.gy)
            .map(|(yi, gi)| yi.iter().zip(gi).map(|(a, b)| clip_unit(a - y_scale * b)).collect())
            .collect();
        let u: Vec<Vec<f64>> = log_x
            .par_iter()
            .zip(&g.gx)
            .map(|(lx, gi)| {
                let mut l = lx.clone();
                entropic_update(&mut l, |k| -x_scale * gi[k])
            })
            .collect();
        let s = {
            let mut l = log_p.clone();
            entropic_update(&mut l, |k| -consts.gamma_step * g.gp[k])
        };

        let g2 = saddle_gradient_operator(&u, &s, &v, measures, &d, penalty)?;
        let y_new: Vec<Vec<f64>> = state
            .y
            .iter()
            .zip(&g2.gy)
            .map(|(yi, gi)| yi.iter().zip(gi).map(|(a, b)| clip_unit(a - y_scale * b)).collect())
            .collect();
        let x_new: Vec<Vec<f64>> = log_x
            .par_iter_mut()
            .zip(&g2.gx)
            .map(|(lx, gi)| entropic_update(lx, |k| -x_scale * gi[k]))
            .collect();
        let p_new = entropic_update(&mut log_p, |k| -consts.gamma_step * g2.gp[k]);
        state.x = x_new;
        state.p = p_new;
        state.y = y_new;
        check_feasible(&state.x, &state.p, &state.y, k)?;
        check_feasible(&u, &s, &v, k)?;

        avg.add(&u, &s, &v);
        if monitor.checkpoints.hit(k) {
            let (ax, ap, ay) = avg.scaled(k);
            let gap = duality_gap(&ax, &ap, &ay, measures, &d, penalty)?;
            let bary = Histogram::from_mass(ap)?;
            let dist = monitor.dist(&bary)?;
            trace.push(vec![k as f64, gap, dist, monitor.clock.elapsed_ms()]);
        }
    }

    let (ax, ap, ay) = avg.scaled(n_iter);
    let gap = duality_gap(&ax, &ap, &ay, measures, &d, penalty)?;
    Ok(MirrorProxOutput {
        barycenter: Histogram::from_mass(ap)?,
        plans: ax,
        duals: ay,
        duality_gap: gap,
        constants: consts,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::cost_matrix_grid;
    use crate::ot::exact_ot;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    }

    #[test]
    fn incidence_examples() {
        let ax = incidence_apply(&[0.5, 0.0, 0.0, 0.5], 2).unwrap();
        assert_eq!(ax, vec![0.5, 0.5, 0.5, 0.5]);
        for n in 1..6 {
            for j in 0..n * n {
                let mut e = vec![0.0; n * n];
                e[j] = 1.0;
                let a = incidence_apply(&e, n).unwrap();
                assert_eq!(a.iter().map(|v| v * v).sum::<f64>(), 2.0);
                assert_eq!(a.iter().filter(|v| **v == 1.0).count(), 2);
            }
        }
        assert!(incidence_apply(&[1.0; 3], 2).is_err());
        assert!(incidence_apply_transpose(&[1.0; 3], 2).is_err());
    }

    #[test]
    fn incidence_adjoint_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let n = rng.random_range(1..9);
            let x: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let lhs = crate::numerics::dot(&incidence_apply(&x, n).unwrap(), &y);
            let rhs = crate::numerics::dot(&x, &incidence_apply_transpose(&y, n).unwrap());
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn operator_at_zero_dual_is_cost_over_m() {
        let c = cost_matrix_grid(&[0.0, 1.0, 3.0], 2.0).unwrap();
        let d = c.to_vector();
        let qs = vec![Histogram::uniform(3), Histogram::new(vec![0.2, 0.3, 0.5]).unwrap()];
        let st = SaddleState::initial(3, 2, 0.0, 0.0, 0.0);
        let g = saddle_gradient_operator(&st.x, &st.p, &st.y, &qs, &d, None).unwrap();
        for gx in &g.gx {
            for (a, b) in gx.iter().zip(&d.d) {
                assert_eq!(*a, b / 2.0);
            }
        }
    }

    #[test]
    fn zero_lambda_matches_unpenalized_bitwise() {
        let c = cost_matrix_grid(&[0.0, 1.0, 3.0], 2.0).unwrap();
        let d = c.to_vector();
        let qs = vec![Histogram::new(vec![0.2, 0.3, 0.5]).unwrap()];
        let mut st = SaddleState::initial(3, 1, 0.0, 0.0, 0.0);
        st.y[0] = vec![0.3, -0.2, 0.9, -1.0, 0.0, 0.4];
        st.p = vec![0.1, 0.6, 0.3];
        let pen = Penalty {
            lambda: 0.0,
            bregman: BregmanPenalty::new(Histogram::uniform(3)).unwrap(),
        };
        let a = saddle_gradient_operator(&st.x, &st.p, &st.y, &qs, &d, None).unwrap();
        let b = saddle_gradient_operator(&st.x, &st.p, &st.y, &qs, &d, Some(&pen)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bilinear_part_is_skew() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 4;
        let m = 3;
        // zero cost and zero measures remove every linear term
        let d = CostVector {
            d: vec![0.0; n * n],
            inf_norm: 1.7,
        };
        let zero_q = vec![vec![0.0; n]; m];
        let op = |x: &[Vec<f64>], p: &[f64], y: &[Vec<f64>]| {
            // saddle_gradient_operator needs histograms; subtract their contribution instead
            let qs: Vec<Histogram> = (0..m).map(|_| Histogram::uniform(n)).collect();
            let mut g = saddle_gradient_operator(x, p, y, &qs, &d, None).unwrap();
            for gi in g.gx.iter_mut() {
                for (k, v) in gi.iter_mut().enumerate() {
                    *v -= d.d[k] / m as f64;
                }
            }
            for gi in g.gy.iter_mut() {
                for l in 0..n {
                    gi[n + l] -= 2.0 * d.inf_norm / m as f64 * (1.0 / n as f64 - zero_q[0][l]);
                }
            }
            g
        };
        let flat = |g: &OperatorValue| -> Vec<f64> {
            g.gx.concat().into_iter().chain(g.gp.clone()).chain(g.gy.concat()).collect()
        };
        for _ in 0..50 {
            let mk = |rng: &mut ChaCha8Rng| {
                let x: Vec<Vec<f64>> = (0..m).map(|_| random_simplex(rng, n * n)).collect();
                let p = random_simplex(rng, n);
                let y: Vec<Vec<f64>> = (0..m).map(|_| (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
                (x, p, y)
            };
            let (x1, p1, y1) = mk(&mut rng);
            let (x2, p2, y2) = mk(&mut rng);
            let g1 = flat(&op(&x1, &p1, &y1));
            let g2 = flat(&op(&x2, &p2, &y2));
            let z1: Vec<f64> = x1.concat().into_iter().chain(p1).chain(y1.concat()).collect();
            let z2: Vec<f64> = x2.concat().into_iter().chain(p2).chain(y2.concat()).collect();
            let dg: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a - b).collect();
            let dz: Vec<f64> = z1.iter().zip(&z2).map(|(a, b)| a - b).collect();
            assert!(crate::numerics::dot(&dg, &dz).abs() < 1e-10);
        }
    }

    #[test]
    fn bilinear_coupling_bound() {
        // <y, A x> <= sqrt(2) ||x||_1 ||y||_2
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10_000 {
            let n = rng.random_range(1..6);
            let x: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x1 = crate::numerics::norm1(&x);
            let y2 = crate::numerics::norm2(&y);
            let xs: Vec<f64> = x.iter().map(|v| v / x1).collect();
            let ys: Vec<f64> = y.iter().map(|v| v / y2).collect();
            let val = crate::numerics::dot(&ys, &incidence_apply(&xs, n).unwrap());
            assert!(val <= 2f64.sqrt() + 1e-12);
        }
    }

    #[test]
    fn single_measure_two_points_matches_lp_barycenter() {
        // any p is optimal only at p = q for m = 1; the exact objective W(p, q) is minimized there
        let c = cost_matrix_grid(&[0.0, 1.0], 2.0).unwrap();
        let q = Histogram::new(vec![0.35, 0.65]).unwrap();
        let out = mirror_prox_wb(&[q.clone()], &c, 1e-2, None, MirrorProxOptions::default()).unwrap();
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=10_000 {
            let t = i as f64 / 10_000.0;
            let v = exact_ot(&Histogram::new(vec![t, 1.0 - t]).unwrap(), &q, &c).unwrap().value;
            if v < best.0 {
                best = (v, t);
            }
        }
        let d = crate::numerics::dist2(out.barycenter.weights(), &[best.1, 1.0 - best.1]);
        assert!(d < 2e-2, "distance {d}");
        assert!(out.duality_gap <= 1e-2, "gap {}", out.duality_gap);
    }

    #[test]
    fn duplicated_measure_matches_single() {
        let c = cost_matrix_grid(&[0.0, 1.0, 2.0], 2.0).unwrap();
        let q = Histogram::new(vec![0.2, 0.5, 0.3]).unwrap();
        let one = mirror_prox_wb(&[q.clone()], &c, 5e-2, None, MirrorProxOptions::default()).unwrap();
        let two = mirror_prox_wb(&[q.clone(), q], &c, 5e-2, None, MirrorProxOptions::default()).unwrap();
        assert!(crate::numerics::dist2(one.barycenter.weights(), two.barycenter.weights()) < 1e-6);
    }

    #[test]
    fn gap_certificate_at_theorem_horizon() {
        let pts: Vec<f64> = (0..4).map(|k| k as f64 / 3.0).collect();
        let c = cost_matrix_grid(&pts, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let qs: Vec<Histogram> = (0..3).map(|_| Histogram::new(random_simplex(&mut rng, 4)).unwrap()).collect();
        let eps = 5e-2;
        let out = mirror_prox_wb(&qs, &c, eps, None, MirrorProxOptions::default()).unwrap();
        assert!(out.duality_gap >= -1e-12);
        assert!(out.duality_gap <= eps, "gap {}", out.duality_gap);
    }

    #[test]
    fn penalized_run_stays_feasible() {
        let pts: Vec<f64> = (0..4).map(|k| k as f64 / 3.0).collect();
        let c = cost_matrix_grid(&pts, 2.0).unwrap();
        let qs = vec![Histogram::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap()];
        let pen = Penalty {
            lambda: 0.5,
            bregman: BregmanPenalty::new(Histogram::uniform(4)).unwrap(),
        };
        let out = mirror_prox_wb(&qs, &c, 0.1, Some(&pen), MirrorProxOptions::default()).unwrap();
        assert!((out.barycenter.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(out.duals.iter().flatten().all(|v| v.abs() <= 1.0));
        assert!(out.duality_gap.is_finite());
    }
}
