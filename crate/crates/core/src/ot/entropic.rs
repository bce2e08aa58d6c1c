//! Entropy-regularized transport `W_gamma(p,q) = min <C,pi> + gamma <pi, log pi>`,
//! its Fenchel conjugate in closed form, and Sinkhorn in the log domain.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::DualPotentials;
use crate::error::{Error, Result};
use crate::measures::{CostMatrix, Histogram, TransportPlan};
use crate::numerics::{center, logsumexp, softmax_in_place};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropicParams {
    pub gamma: f64,
    /// Target for the l1 marginal error.
    pub sinkhorn_tol: f64,
    pub max_iters: usize,
}

impl EntropicParams {
    pub fn new(gamma: f64, sinkhorn_tol: f64, max_iters: usize) -> Result<Self> {
        let params = Self {
            gamma,
            sinkhorn_tol,
            max_iters,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidInput(format!("gamma = {} must be > 0", self.gamma)));
        }
        if !(self.sinkhorn_tol > 0.0) {
            return Err(Error::InvalidInput(format!(
                "sinkhorn tolerance {} must be > 0",
                self.sinkhorn_tol
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidInput("max_iters must be >= 1".into()));
        }
        Ok(())
    }

    /// Inner tolerance used when an outer solver targets accuracy `epsilon`.
    pub fn default_tol(epsilon: f64, c: &CostMatrix) -> f64 {
        epsilon / (8.0 * c.inf_norm().max(1.0))
    }
}

#[derive(Debug, Clone)]
pub struct SinkhornOutput {
    /// `u = gamma log a` with `<u,1> = 0`, and the column potential shifted to match.
    pub potentials: DualPotentials,
    /// Unnormalized log-domain potentials `(f, g)`, usable as a warm start.
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub marginal_error: f64,
    pub iterations: usize,
    /// l1 marginal error after each full iteration.
    pub error_history: Vec<f64>,
}

impl SinkhornOutput {
    /// `pi_ij = exp((f_i + g_j - C_ij)/gamma)`.
    pub fn plan(&self, p: &Histogram, q: &Histogram, c: &CostMatrix, gamma: f64) -> TransportPlan {
        let n = c.n();
        let mut pi = vec![0.0; n * n];
        for i in 0..n {
            let row = c.row(i);
            for j in 0..n {
                pi[i * n + j] = ((self.f[i] + self.g[j] - row[j]) / gamma).exp();
            }
        }
        TransportPlan::new(n, pi, p.clone(), q.clone())
    }
}

fn check_positive(h: &Histogram, name: &str) -> Result<()> {
    if !h.is_strictly_positive() {
        return Err(Error::Domain(format!(
            "{name} must be strictly positive for entropic transport; smooth it first"
        )));
    }
    Ok(())
}

fn check_sizes(p: &Histogram, q: &Histogram, c: &CostMatrix) -> Result<()> {
    if p.len() != c.n() || q.len() != c.n() {
        return Err(Error::InvalidInput(format!(
            "sizes disagree: p has {}, q has {}, cost is {}x{}",
            p.len(),
            q.len(),
            c.n(),
            c.n()
        )));
    }
    Ok(())
}

pub fn sinkhorn(p: &Histogram, q: &Histogram, c: &CostMatrix, params: &EntropicParams) -> Result<SinkhornOutput> {
    sinkhorn_warm(p, q, c, params, None)
}

const ABSORB_MIN: f64 = 1e-50;
const ABSORB_MAX: f64 = 1e50;

fn absorb(f: &mut [f64], g: &mut [f64], a: &[f64], b: &[f64], gamma: f64) {
    for (fi, ai) in f.iter_mut().zip(a) {
        *fi += gamma * ai.ln();
    }
    for (gj, bj) in g.iter_mut().zip(b) {
        *gj += gamma * bj.ln();
    }
}

/// Sinkhorn on log-domain potentials `(f, g)`. Between exact log-sum-exp
/// sweeps it runs plain scaling iterations against the kernel
/// `exp((f_i + g_j - C_ij)/gamma)`, folding the scalings back into the
/// potentials before they leave `[1e-50, 1e50]`. A previous column potential
/// `g` may be supplied as the starting point.
pub fn sinkhorn_warm(
    p: &Histogram,
    q: &Histogram,
    c: &CostMatrix,
    params: &EntropicParams,
    warm_g: Option<&[f64]>,
) -> Result<SinkhornOutput> {
    params.validate()?;
    check_sizes(p, q, c)?;
    check_positive(p, "p")?;
    check_positive(q, "q")?;
    let n = c.n();
    let gamma = params.gamma;
    let log_p: Vec<f64> = p.weights().iter().map(|x| x.ln()).collect();
    let log_q: Vec<f64> = q.weights().iter().map(|x| x.ln()).collect();

    let mut g = match warm_g {
        Some(g0) if g0.len() == n && g0.iter().all(|x| x.is_finite()) => g0.to_vec(),
        _ => vec![0.0; n],
    };
    let mut f = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut history = Vec::new();
    let mut err = f64::INFINITY;
    let mut iterations = 0;
    // kernel exp((f_i + g_j - C_ij)/gamma), rebuilt at each absorption
    let mut kernel = vec![0.0; n * n];
    let mut a = vec![1.0; n];
    let mut b = vec![1.0; n];
    let mut kb = vec![0.0; n];
    let mut kta = vec![0.0; n];

    'outer: while iterations < params.max_iters {
        // one exact log-domain iteration
        iterations += 1;
        for i in 0..n {
            let row = c.row(i);
            for j in 0..n {
                scratch[j] = (g[j] - row[j]) / gamma;
            }
            f[i] = gamma * (log_p[i] - logsumexp(scratch.iter().copied()));
        }
        // column update; C symmetric so column j of C is row j
        for j in 0..n {
            let col = c.row(j);
            for i in 0..n {
                scratch[i] = (f[i] - col[i]) / gamma;
            }
            g[j] = gamma * (log_q[j] - logsumexp(scratch.iter().copied()));
        }
        // columns now match q exactly; measure the row error
        err = 0.0;
        for i in 0..n {
            let row = c.row(i);
            let krow = &mut kernel[i * n..(i + 1) * n];
            let mut mass = 0.0;
            for j in 0..n {
                let k = ((f[i] + g[j] - row[j]) / gamma).exp();
                krow[j] = k;
                mass += k;
            }
            kb[i] = mass;
            err += (mass - p.weights()[i]).abs();
        }
        if !err.is_finite() || f.iter().chain(&g).any(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite Sinkhorn state at iteration {iterations}"
            )));
        }
        history.push(err);
        if err <= params.sinkhorn_tol {
            break;
        }

        // cheap scaling iterations against the absorbed kernel
        a.fill(1.0);
        b.fill(1.0);
        while iterations < params.max_iters {
            let a_ok = (0..n).all(|i| kb[i] > 0.0 && kb[i].is_finite());
            if !a_ok {
                absorb(&mut f, &mut g, &a, &b, gamma);
                continue 'outer;
            }
            for i in 0..n {
                a[i] = p.weights()[i] / kb[i];
            }
            kta.fill(0.0);
            for i in 0..n {
                let ai = a[i];
                for (t, k) in kta.iter_mut().zip(&kernel[i * n..(i + 1) * n]) {
                    *t += k * ai;
                }
            }
            if !(0..n).all(|j| kta[j] > 0.0 && kta[j].is_finite()) {
                // a was already applied; fold it in and fall back to a log step
                absorb(&mut f, &mut g, &a, &b, gamma);
                continue 'outer;
            }
            iterations += 1;
            for j in 0..n {
                b[j] = q.weights()[j] / kta[j];
            }
            err = 0.0;
            for i in 0..n {
                let mut s = 0.0;
                for (k, bj) in kernel[i * n..(i + 1) * n].iter().zip(&b) {
                    s += k * bj;
                }
                kb[i] = s;
                err += (a[i] * s - p.weights()[i]).abs();
            }
            if !err.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite Sinkhorn state at iteration {iterations}"
                )));
            }
            history.push(err);
            let drifted = a
                .iter()
                .chain(&b)
                .any(|x| !(*x > ABSORB_MIN && *x < ABSORB_MAX));
            if err <= params.sinkhorn_tol || drifted {
                absorb(&mut f, &mut g, &a, &b, gamma);
                if err <= params.sinkhorn_tol {
                    break 'outer;
                }
                continue 'outer;
            }
        }
        absorb(&mut f, &mut g, &a, &b, gamma);
    }

    let mut u = f.clone();
    let shift = center(&mut u);
    let v: Vec<f64> = g.iter().map(|x| x + shift).collect();
    if err > params.sinkhorn_tol {
        return Err(Error::Convergence {
            iterations,
            marginal_error: err,
            last_potentials: u,
            context: None,
        });
    }
    Ok(SinkhornOutput {
        potentials: DualPotentials { u, v },
        f,
        g,
        marginal_error: err,
        iterations,
        error_history: history,
    })
}

/// `W_gamma(p,q)` evaluated on the Sinkhorn plan, together with that plan.
pub fn entropic_ot_value(
    p: &Histogram,
    q: &Histogram,
    c: &CostMatrix,
    params: &EntropicParams,
) -> Result<(f64, TransportPlan)> {
    let out = sinkhorn(p, q, c, params)?;
    let plan = out.plan(p, q, c, params.gamma);
    Ok((plan_entropic_cost(&plan, c, params.gamma), plan))
}

/// `<C,pi> + gamma sum pi log pi` for an arbitrary plan.
pub(crate) fn plan_entropic_cost(plan: &TransportPlan, c: &CostMatrix, gamma: f64) -> f64 {
    plan.entries()
        .iter()
        .zip(c.entries())
        .map(|(&x, &cij)| if x > 0.0 { x * cij + gamma * x * x.ln() } else { 0.0 })
        .sum()
}

/// `W_gamma` of the independent coupling `p q^T`, an upper bound on `W_gamma(p,q)`.
pub fn independent_coupling_value(p: &Histogram, q: &Histogram, c: &CostMatrix, gamma: f64) -> f64 {
    let n = c.n();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let x = p.weights()[i] * q.weights()[j];
            if x > 0.0 {
                total += x * c.get(i, j) + gamma * x * x.ln();
            }
        }
    }
    total
}

fn check_dual_args(u: &[f64], q: &Histogram, c: &CostMatrix, gamma: f64) -> Result<()> {
    if u.len() != c.n() || q.len() != c.n() {
        return Err(Error::InvalidInput("dual argument sizes disagree".into()));
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidInput(format!("gamma = {gamma} must be > 0")));
    }
    Ok(())
}

/// `W*_{gamma,q}(u) = gamma (-<q, log q> + sum_j q_j logsumexp_i((u_i - C_ji)/gamma))`.
pub fn entropic_dual_value(u: &[f64], q: &Histogram, c: &CostMatrix, gamma: f64) -> Result<f64> {
    check_dual_args(u, q, c, gamma)?;
    let mut total = 0.0;
    for (j, &qj) in q.weights().iter().enumerate() {
        if qj <= 0.0 {
            continue;
        }
        let row = c.row(j);
        let lse = logsumexp(u.iter().zip(row).map(|(ui, cji)| (ui - cji) / gamma));
        total += qj * (lse - qj.ln());
    }
    Ok(gamma * total)
}

/// `[grad W*(u)]_l = sum_j q_j softmax_l((u - C_{j.})/gamma)`, a point of the simplex.
pub fn entropic_dual_gradient(u: &[f64], q: &Histogram, c: &CostMatrix, gamma: f64) -> Result<Histogram> {
    check_dual_args(u, q, c, gamma)?;
    let n = c.n();
    let mut grad = vec![0.0; n];
    let mut s = vec![0.0; n];
    for (j, &qj) in q.weights().iter().enumerate() {
        if qj <= 0.0 {
            continue;
        }
        column_softmax(u, c, j, gamma, &mut s);
        for (gl, sl) in grad.iter_mut().zip(&s) {
            *gl += qj * sl;
        }
    }
    Histogram::from_mass(grad)
}

fn column_softmax(u: &[f64], c: &CostMatrix, j: usize, gamma: f64, out: &mut [f64]) {
    let row = c.row(j);
    for ((o, ui), cjl) in out.iter_mut().zip(u).zip(row) {
        *o = (ui - cjl) / gamma;
    }
    softmax_in_place(out);
}

/// Draw an index from `q` by inverting its CDF.
pub fn sample_index<R: Rng + ?Sized>(q: &Histogram, rng: &mut R) -> usize {
    let t: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (j, &w) in q.weights().iter().enumerate() {
        if w > 0.0 {
            last_positive = j;
        }
        acc += w;
        if t < acc && w > 0.0 {
            return j;
        }
    }
    last_positive
}

/// One-term stochastic gradient: `xi ~ q`, then the softmax of column `xi`.
pub fn entropic_dual_gradient_sample<R: Rng + ?Sized>(
    u: &[f64],
    q: &Histogram,
    c: &CostMatrix,
    gamma: f64,
    rng: &mut R,
) -> Result<Histogram> {
    check_dual_args(u, q, c, gamma)?;
    let xi = sample_index(q, rng);
    let mut s = vec![0.0; c.n()];
    column_softmax(u, c, xi, gamma, &mut s);
    Histogram::from_mass(s)
}
