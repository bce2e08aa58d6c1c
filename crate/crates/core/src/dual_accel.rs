//! Accelerated stochastic gradient on the dual of a strongly convex problem
//! with affine constraints, with mini-batches sized by a sub-Gaussian
//! schedule and primal recovery by weighted averaging.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{CostMatrix, Histogram};
use crate::ot::{entropic_dual_gradient, entropic_dual_gradient_sample, EntropicParams};
use crate::trace::{IterateTrace, Stopwatch, DUAL_ACCEL_COLUMNS};

/// Positive root of `2 L a^2 - a - A = 0`, and `A + a`.
pub fn next_step_constants(a_k: f64, lipschitz: f64) -> (f64, f64) {
    let alpha = (1.0 + (1.0 + 8.0 * lipschitz * a_k).sqrt()) / (4.0 * lipschitz);
    (alpha, a_k + alpha)
}

pub const DEFAULT_BATCH_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchSchedule {
    pub sigma_sq: f64,
    pub epsilon: f64,
    pub n_iter: usize,
    /// Confidence level `alpha` of the high-probability guarantee.
    pub alpha_conf: f64,
    pub cap: u64,
}

impl BatchSchedule {
    pub fn new(sigma_sq: f64, epsilon: f64, n_iter: usize, alpha_conf: f64) -> Self {
        Self {
            sigma_sq,
            epsilon,
            n_iter,
            alpha_conf,
            cap: DEFAULT_BATCH_CAP,
        }
    }

    /// Zero variance: every batch has one draw.
    pub fn deterministic(n_iter: usize) -> Self {
        Self::new(0.0, 1.0, n_iter, 0.5)
    }

    /// `r = max{1, ceil(50 sigma^2 alpha log(N/alpha_conf) / epsilon)}`.
    pub fn batch_size(&self, alpha: f64, iteration: usize) -> Result<u64> {
        let raw = 50.0 * self.sigma_sq * alpha * (self.n_iter as f64 / self.alpha_conf).ln() / self.epsilon;
        let r = if raw.is_finite() { raw.ceil().max(1.0) } else { f64::INFINITY };
        if r > self.cap as f64 {
            return Err(Error::Resource {
                iteration,
                requested: if r.is_finite() { r as u64 } else { u64::MAX },
                cap: self.cap,
            });
        }
        Ok(r as u64)
    }
}

/// One draw of a stochastic dual gradient with the matching primal point.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleDraw {
    pub gradient: Vec<f64>,
    pub primal: Vec<f64>,
}

pub trait StochasticOracle {
    fn draw(&self, point: &[f64], rng: &mut dyn RngCore) -> Result<OracleDraw>;
}

/// Batch mean of `r` independent draws (gradient and primal alike).
pub fn minibatch_dual_gradient(
    point: &[f64],
    oracle: &dyn StochasticOracle,
    r: u64,
    rng: &mut dyn RngCore,
) -> Result<OracleDraw> {
    if r == 0 {
        return Err(Error::InvalidInput("batch size must be >= 1".into()));
    }
    let mut acc: Option<OracleDraw> = None;
    for idx in 0..r {
        let d = oracle
            .draw(point, rng)
            .map_err(|e| e.with_context(format!("oracle draw {idx}")))?;
        match acc.as_mut() {
            None => acc = Some(d),
            Some(a) => {
                for (x, y) in a.gradient.iter_mut().zip(&d.gradient) {
                    *x += y;
                }
                for (x, y) in a.primal.iter_mut().zip(&d.primal) {
                    *x += y;
                }
            }
        }
    }
    let mut out = acc.expect("r >= 1");
    if r > 1 {
        let s = 1.0 / r as f64;
        out.gradient.iter_mut().for_each(|x| *x *= s);
        out.primal.iter_mut().for_each(|x| *x *= s);
    }
    Ok(out)
}

/// Dual of `min F(x) s.t. Ax = b` for a `mu`-strongly convex `F`.
pub trait DualProblem: StochasticOracle {
    fn dim(&self) -> usize;
    /// Lipschitz constant of the dual gradient, `lambda_max(A^T A)/mu`.
    fn lipschitz(&self) -> f64;
    fn primal_objective(&self, x: &[f64]) -> Result<f64>;
    /// `||Ax - b||_2`.
    fn feasibility_residual(&self, x: &[f64]) -> f64;
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcceleratedState {
    pub a_k: f64,
    pub alpha_k: f64,
    pub lambda: Vec<f64>,
    pub zeta: Vec<f64>,
    pub eta: Vec<f64>,
    pub k: usize,
}

impl AcceleratedState {
    pub fn zeros(dim: usize) -> Self {
        Self {
            a_k: 0.0,
            alpha_k: 0.0,
            lambda: vec![0.0; dim],
            zeta: vec![0.0; dim],
            eta: vec![0.0; dim],
            k: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AcceleratedOutput {
    /// `(1/A_N) sum alpha_k x(lambda^k)`.
    pub primal: Vec<f64>,
    /// Primal recovery at the final `eta` iterate.
    pub last_primal: Vec<f64>,
    pub state: AcceleratedState,
    /// `alpha_k` for every step, so the averaging weights can be checked.
    pub alphas: Vec<f64>,
    pub max_iterate_norm: f64,
    pub trace: IterateTrace,
}

pub fn accelerated_dual_solve(
    problem: &dyn DualProblem,
    schedule: &BatchSchedule,
    rng: &mut dyn RngCore,
    clock: Stopwatch,
) -> Result<AcceleratedOutput> {
    let n_iter = schedule.n_iter;
    if n_iter == 0 {
        return Err(Error::InvalidInput("N must be >= 1".into()));
    }
    let lip = problem.lipschitz();
    if !(lip > 0.0) {
        return Err(Error::InvalidInput(format!("Lipschitz constant {lip} must be > 0")));
    }
    let mut st = AcceleratedState::zeros(problem.dim());
    let mut primal_sum: Vec<f64> = Vec::new();
    let mut alphas = Vec::with_capacity(n_iter);
    let mut max_norm: f64 = 0.0;
    let mut trace = IterateTrace::new(&DUAL_ACCEL_COLUMNS);
    trace.set_param("lipschitz", lip);

    for k in 1..=n_iter {
        let (alpha, a_next) = next_step_constants(st.a_k, lip);
        for l in 0..st.lambda.len() {
            st.lambda[l] = (alpha * st.zeta[l] + st.a_k * st.eta[l]) / a_next;
        }
        let r = schedule.batch_size(alpha, k)?;
        let g = minibatch_dual_gradient(&st.lambda, problem, r, rng)
            .map_err(|e| e.with_context(format!("iteration {k}")))?;
        for (z, gl) in st.zeta.iter_mut().zip(&g.gradient) {
            *z -= alpha * gl;
        }
        for l in 0..st.eta.len() {
            st.eta[l] = (alpha * st.zeta[l] + st.a_k * st.eta[l]) / a_next;
        }
        if primal_sum.is_empty() {
            primal_sum = vec![0.0; g.primal.len()];
        }
        for (s, x) in primal_sum.iter_mut().zip(&g.primal) {
            *s += alpha * x;
        }
        st.a_k = a_next;
        st.alpha_k = alpha;
        st.k = k;
        alphas.push(alpha);
        for v in [&st.lambda, &st.zeta, &st.eta] {
            max_norm = max_norm.max(crate::numerics::norm2(v));
        }
        let avg: Vec<f64> = primal_sum.iter().map(|s| s / st.a_k).collect();
        trace.push(vec![
            k as f64,
            r as f64,
            problem
                .primal_objective(&avg)
                .map_err(|e| e.with_context(format!("objective at iteration {k}")))?,
            problem.feasibility_residual(&avg),
            clock.elapsed_ms(),
        ]);
    }
    let primal: Vec<f64> = primal_sum.iter().map(|s| s / st.a_k).collect();
    let last = problem.draw(&st.eta, rng)?.primal;
    trace.set_param("max_iterate_norm", max_norm);
    Ok(AcceleratedOutput {
        primal,
        last_primal: last,
        state: st,
        alphas,
        max_iterate_norm: max_norm,
        trace,
    })
}

/// The quadratic consensus problem `min 1/2 ||x - c||^2` subject to
/// `x_1 = x_2 = ... = x_B` over `B` blocks of width `w`, with the
/// constraint written as `x_b - x_{b+1} = 0`. Dual gradients are exact.
#[derive(Debug, Clone)]
pub struct QuadraticConsensus {
    pub c: Vec<Vec<f64>>,
}

impl QuadraticConsensus {
    fn width(&self) -> usize {
        self.c[0].len()
    }

    fn constraint(&self, x: &[f64]) -> Vec<f64> {
        let w = self.width();
        let b = self.c.len();
        let mut out = vec![0.0; (b - 1) * w];
        for blk in 0..b - 1 {
            for l in 0..w {
                out[blk * w + l] = x[blk * w + l] - x[(blk + 1) * w + l];
            }
        }
        out
    }

    /// `x(lambda) = c - A^T lambda`.
    pub fn primal_map(&self, lambda: &[f64]) -> Vec<f64> {
        let w = self.width();
        let b = self.c.len();
        let mut x: Vec<f64> = self.c.concat();
        for blk in 0..b - 1 {
            for l in 0..w {
                let v = lambda[blk * w + l];
                x[blk * w + l] -= v;
                x[(blk + 1) * w + l] += v;
            }
        }
        x
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        0.5 * crate::numerics::dist2(x, &self.c.concat()).powi(2)
    }

    /// Minimizer: every block equals the mean of the `c` blocks.
    pub fn solution(&self) -> Vec<f64> {
        let w = self.width();
        let b = self.c.len() as f64;
        let mean: Vec<f64> = (0..w).map(|l| self.c.iter().map(|ci| ci[l]).sum::<f64>() / b).collect();
        std::iter::repeat_n(mean, self.c.len()).flatten().collect()
    }

    /// Dual `Psi(lambda) = max_x -<lambda, Ax> - F(x)`.
    pub fn dual_value(&self, lambda: &[f64]) -> f64 {
        let x = self.primal_map(lambda);
        let ax = self.constraint(&x);
        -crate::numerics::dot(lambda, &ax) - self.objective(&x)
    }
}

impl StochasticOracle for QuadraticConsensus {
    fn draw(&self, point: &[f64], _rng: &mut dyn RngCore) -> Result<OracleDraw> {
        let x = self.primal_map(point);
        // grad Psi = -A x(lambda)
        let gradient = self.constraint(&x).into_iter().map(|v| -v).collect();
        Ok(OracleDraw { gradient, primal: x })
    }
}

impl DualProblem for QuadraticConsensus {
    fn dim(&self) -> usize {
        (self.c.len() - 1) * self.width()
    }

    fn lipschitz(&self) -> f64 {
        // lambda_max of the path-graph Laplacian on B nodes, times mu = 1
        let b = self.c.len() as f64;
        2.0 - 2.0 * (std::f64::consts::PI * (b - 1.0) / b).cos()
    }

    fn primal_objective(&self, x: &[f64]) -> Result<f64> {
        Ok(self.objective(x))
    }

    fn feasibility_residual(&self, x: &[f64]) -> f64 {
        crate::numerics::norm2(&self.constraint(x))
    }
}

/// Component-sampled dual gradient of `u -> W*_{gamma,q}(u)`.
#[derive(Debug, Clone)]
pub struct WbSampledOracle<'a> {
    pub q: &'a Histogram,
    pub c: &'a CostMatrix,
    pub gamma: f64,
}

impl StochasticOracle for WbSampledOracle<'_> {
    fn draw(&self, point: &[f64], rng: &mut dyn RngCore) -> Result<OracleDraw> {
        let g = entropic_dual_gradient_sample(point, self.q, self.c, self.gamma, rng)?.into_weights();
        Ok(OracleDraw {
            primal: g.clone(),
            gradient: g,
        })
    }
}

/// Dual of `min sum_i W_gamma(p_i, q_i)` subject to `p_b - p_{b+1} = 0`.
/// The primal map is `p_i(lambda) = grad W*_{gamma,q_i}(-(A^T lambda)_i)`;
/// with `sampled` set, each block is replaced by a one-column draw.
#[derive(Debug, Clone)]
pub struct WbConsensusDual<'a> {
    pub measures: &'a [Histogram],
    pub c: &'a CostMatrix,
    pub gamma: f64,
    pub sampled: bool,
    /// Sinkhorn settings for the reported objective.
    pub objective_params: EntropicParams,
}

impl WbConsensusDual<'_> {
    fn n(&self) -> usize {
        self.c.n()
    }

    fn constraint(&self, p: &[f64]) -> Vec<f64> {
        let n = self.n();
        let m = self.measures.len();
        let mut out = vec![0.0; (m - 1) * n];
        for b in 0..m - 1 {
            for l in 0..n {
                out[b * n + l] = p[b * n + l] - p[(b + 1) * n + l];
            }
        }
        out
    }

    /// `-(A^T lambda)` split into blocks.
    fn block_points(&self, lambda: &[f64]) -> Vec<Vec<f64>> {
        let n = self.n();
        let m = self.measures.len();
        let mut pts = vec![vec![0.0; n]; m];
        for b in 0..m - 1 {
            for l in 0..n {
                let v = lambda[b * n + l];
                pts[b][l] -= v;
                pts[b + 1][l] += v;
            }
        }
        pts
    }

    /// `lambda_max(A^T A)` for the chain on `m` blocks.
    pub fn constraint_norm_sq(&self) -> f64 {
        let m = self.measures.len() as f64;
        2.0 - 2.0 * (std::f64::consts::PI * (m - 1.0) / m).cos()
    }
}

impl StochasticOracle for WbConsensusDual<'_> {
    fn draw(&self, point: &[f64], rng: &mut dyn RngCore) -> Result<OracleDraw> {
        let mut primal = Vec::with_capacity(self.measures.len() * self.n());
        for (i, (u, q)) in self.block_points(point).iter().zip(self.measures).enumerate() {
            let p = if self.sampled {
                entropic_dual_gradient_sample(u, q, self.c, self.gamma, rng)
            } else {
                entropic_dual_gradient(u, q, self.c, self.gamma)
            }
            .map_err(|e| e.with_context(format!("block {i}")))?;
            primal.extend_from_slice(p.weights());
        }
        let gradient = self.constraint(&primal).into_iter().map(|v| -v).collect();
        Ok(OracleDraw { gradient, primal })
    }
}

impl DualProblem for WbConsensusDual<'_> {
    fn dim(&self) -> usize {
        (self.measures.len() - 1) * self.n()
    }

    fn lipschitz(&self) -> f64 {
        self.constraint_norm_sq() / self.gamma
    }

    /// `(1/m) sum_i W_gamma(p_i, q_i)`.
    fn primal_objective(&self, x: &[f64]) -> Result<f64> {
        let blocks = x
            .chunks(self.n())
            .map(|b| Histogram::from_mass(b.to_vec()))
            .collect::<Result<Vec<_>>>()?;
        crate::decentralized::empirical_entropic_objective(&blocks, self.measures, self.c, &self.objective_params)
    }

    fn feasibility_residual(&self, x: &[f64]) -> f64 {
        crate::numerics::norm2(&self.constraint(x))
    }
}
