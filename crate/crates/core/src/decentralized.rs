//! Decentralized barycenter solvers on the gossip runtime: the accelerated
//! dual stochastic gradient method for the entropic problem, and mirror prox
//! for the unregularized saddle point with the consensus constraint
//! `(W ⊗ I) p = 0` dualized.
//!
//! Spectral quantities of `W` are computed once at setup and treated as
//! knowledge shared by every node. Mirror prox reports all `m` averaged
//! `p`-blocks and their mean; the mean is what [`DecentralizedOutput::mean`]
//! holds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dual_accel::{minibatch_dual_gradient, next_step_constants, BatchSchedule, WbSampledOracle, DEFAULT_BATCH_CAP};
use crate::error::{Error, Result};
use crate::measures::{smooth_to_interior, CostMatrix, CostVector, Histogram};
use crate::network::{consensus_gap, ConsensusGap, Laplacian, Network, SpectralInfo, Topology};
use crate::ot::{entropic_dual_gradient, entropic_ot_value, EntropicParams};
use crate::saddle::{check_feasible, clip_unit, entropic_update, incidence_apply_into, saddle_gradient_operator};
use crate::trace::{Checkpoints, IterateTrace, Stopwatch, DECENTRALIZED_COLUMNS};

/// How each node evaluates the gradient of its conjugate term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    /// Mini-batches of one-column draws, sized by the batch schedule.
    Sampled,
    /// The exact gradient, one call per node and iteration.
    Full,
}

#[derive(Debug, Clone)]
pub struct DecentralizedRunConfig {
    pub topology: Topology,
    /// Entropic regularization; only the dual method uses it.
    pub gamma: f64,
    pub epsilon: f64,
    /// `None` derives the iteration count from `epsilon`.
    pub n_iter: Option<usize>,
    pub seed: u64,
    pub alpha_conf: f64,
    pub batch_cap: u64,
    pub oracle: OracleMode,
    /// Keep every message in memory (locality is checked on send regardless).
    pub keep_message_log: bool,
    pub record_wall_time: bool,
    pub checkpoints_per_decade: usize,
    pub sinkhorn_max_iters: usize,
}

impl DecentralizedRunConfig {
    pub fn new(topology: Topology, epsilon: f64) -> Self {
        Self {
            topology,
            gamma: 0.1,
            epsilon,
            n_iter: None,
            seed: 0,
            alpha_conf: 0.05,
            batch_cap: DEFAULT_BATCH_CAP,
            oracle: OracleMode::Sampled,
            keep_message_log: false,
            record_wall_time: false,
            checkpoints_per_decade: 20,
            sinkhorn_max_iters: 100_000,
        }
    }

    fn validate(&self, measures: &[Histogram], c: &CostMatrix) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidInput(format!("epsilon = {} must be > 0", self.epsilon)));
        }
        if measures.len() != self.topology.m {
            return Err(Error::InvalidInput(format!(
                "{} measures for {} nodes; assign exactly one per node",
                measures.len(),
                self.topology.m
            )));
        }
        if measures.iter().any(|q| q.len() != c.n()) {
            return Err(Error::InvalidInput("measure sizes disagree with the cost".into()));
        }
        if !(self.alpha_conf > 0.0 && self.alpha_conf < 1.0) {
            return Err(Error::InvalidInput(format!("alpha_conf = {} must lie in (0,1)", self.alpha_conf)));
        }
        if self.checkpoints_per_decade == 0 {
            return Err(Error::InvalidInput("checkpoints_per_decade must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DecentralizedOutput {
    /// Per-node barycenter estimates.
    pub blocks: Vec<Histogram>,
    /// `(1/m) sum_i blocks[i]`.
    pub mean: Histogram,
    pub consensus: ConsensusGap,
    pub n_iter: usize,
    pub oracle_calls: u64,
    /// Messages whose edge membership was verified against the log.
    pub messages_checked: usize,
    pub network: Network,
    pub trace: IterateTrace,
}

/// Independent stream for `(seed, node, iteration)`: the three words form
/// the ChaCha key.
pub fn node_rng(seed: u64, node: usize, iteration: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(node as u64).to_le_bytes());
    key[16..24].copy_from_slice(&(iteration as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

fn mean_block(blocks: &[Vec<f64>]) -> Vec<f64> {
    let m = blocks.len() as f64;
    let mut out = vec![0.0; blocks[0].len()];
    for b in blocks {
        for (o, v) in out.iter_mut().zip(b) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|o| *o /= m);
    out
}

fn finish(
    blocks: Vec<Vec<f64>>,
    w: &Laplacian,
    n_iter: usize,
    oracle_calls: u64,
    network: Network,
    trace: IterateTrace,
) -> Result<DecentralizedOutput> {
    let consensus = consensus_gap(&blocks, w)?;
    let mean = Histogram::from_mass(mean_block(&blocks))?;
    let messages_checked = network.verify_locality()?;
    let blocks = blocks.into_iter().map(Histogram::from_mass).collect::<Result<Vec<_>>>()?;
    Ok(DecentralizedOutput {
        blocks,
        mean,
        consensus,
        n_iter,
        oracle_calls,
        messages_checked,
        network,
        trace,
    })
}

/// `(1/m) sum_i W_gamma(p_i, q_i)`. Blocks that underflowed to exact zeros
/// are mixed with `1e-15` of the uniform vector so Sinkhorn can run.
pub fn empirical_entropic_objective(
    blocks: &[Histogram],
    measures: &[Histogram],
    c: &CostMatrix,
    params: &EntropicParams,
) -> Result<f64> {
    let mut total = 0.0;
    for (i, (p, q)) in blocks.iter().zip(measures).enumerate() {
        let p = if p.is_strictly_positive() {
            p.clone()
        } else {
            smooth_to_interior(p, 1e-15)?
        };
        let (v, _) = entropic_ot_value(&p, q, c, params).map_err(|e| e.with_context(format!("node {i}")))?;
        total += v;
    }
    Ok(total / blocks.len() as f64)
}

/// Iteration count `ceil(sqrt(n ||C||^2 chi / (gamma eps)))` of the dual method.
pub fn dual_iteration_count(n: usize, c_norm: f64, chi: f64, gamma: f64, epsilon: f64) -> usize {
    ((n as f64 * c_norm * c_norm * chi / (gamma * epsilon)).sqrt().ceil() as usize).max(1)
}

/// Accelerated dual stochastic gradient for `min sum_i W_gamma(p_i, q_i)`
/// subject to `sqrt(W) p = 0`, with one measure per node. Each iteration
/// costs one gossip round (the product `W g`). The per-node output is the
/// `alpha`-weighted average of the recovered primal points.
pub fn decentralized_dual_wb(
    measures: &[Histogram],
    c: &CostMatrix,
    cfg: &DecentralizedRunConfig,
) -> Result<DecentralizedOutput> {
    cfg.validate(measures, c)?;
    if !(cfg.gamma > 0.0) {
        return Err(Error::InvalidInput(format!("gamma = {} must be > 0", cfg.gamma)));
    }
    let m = measures.len();
    let n = c.n();
    let mut net = Network::new(cfg.topology.clone(), cfg.keep_message_log)?;
    let SpectralInfo { lambda_max, chi, .. } = net.spectral.clone();
    if m < 2 || !(lambda_max > 0.0) {
        return Err(Error::InvalidInput(
            "the dual method needs at least two nodes".into(),
        ));
    }
    let lip = lambda_max * m as f64 / cfg.gamma;
    let n_iter = cfg
        .n_iter
        .unwrap_or_else(|| dual_iteration_count(n, c.inf_norm(), chi, cfg.gamma, cfg.epsilon))
        .max(1);
    let schedule = BatchSchedule {
        cap: cfg.batch_cap,
        ..BatchSchedule::new(lambda_max * m as f64, cfg.epsilon, n_iter, cfg.alpha_conf)
    };
    let sinkhorn = EntropicParams::new(
        cfg.gamma,
        EntropicParams::default_tol(cfg.epsilon, c),
        cfg.sinkhorn_max_iters,
    )?;
    let clock = Stopwatch::new(cfg.record_wall_time);
    let mut checkpoints = Checkpoints::log_spaced(n_iter, cfg.checkpoints_per_decade);
    let mut trace = IterateTrace::new(&DECENTRALIZED_COLUMNS);
    trace.set_param("lipschitz", lip);
    trace.set_param("lambda_max", lambda_max);
    trace.set_param("chi", chi);
    trace.set_param("n_iter", n_iter as f64);

    let mut a_k = 0.0;
    let mut lambda = vec![vec![0.0; n]; m];
    let mut zeta = vec![vec![0.0; n]; m];
    let mut eta = vec![vec![0.0; n]; m];
    let mut primal_sum = vec![vec![0.0; n]; m];
    let mut oracle_calls = 0u64;

    for k in 1..=n_iter {
        let (alpha, a_next) = next_step_constants(a_k, lip);
        for i in 0..m {
            for l in 0..n {
                lambda[i][l] = (alpha * zeta[i][l] + a_k * eta[i][l]) / a_next;
            }
        }
        let r = match cfg.oracle {
            OracleMode::Sampled => schedule.batch_size(alpha, k)?,
            OracleMode::Full => 1,
        };
        let grads: Vec<Vec<f64>> = lambda
            .par_iter()
            .zip(measures)
            .enumerate()
            .map(|(i, (li, q))| {
                let g = match cfg.oracle {
                    OracleMode::Full => entropic_dual_gradient(li, q, c, cfg.gamma)?.into_weights(),
                    OracleMode::Sampled => {
                        let oracle = WbSampledOracle { q, c, gamma: cfg.gamma };
                        let mut rng = node_rng(cfg.seed, i, k);
                        minibatch_dual_gradient(li, &oracle, r, &mut rng)?.gradient
                    }
                };
                if !crate::numerics::all_finite(&g) {
                    return Err(Error::Numeric(format!("dual gradient at node {i}, iteration {k}")));
                }
                Ok(g)
            })
            .collect::<Result<_>>()
            .map_err(|e| e.with_context(format!("iteration {k}")))?;
        oracle_calls += r * m as u64;

        let wg = net.gossip_multiply(&grads)?;
        for i in 0..m {
            for l in 0..n {
                zeta[i][l] -= alpha * wg[i][l];
                eta[i][l] = (alpha * zeta[i][l] + a_k * eta[i][l]) / a_next;
                primal_sum[i][l] += alpha * grads[i][l];
            }
            if !crate::numerics::all_finite(&eta[i]) {
                return Err(Error::Numeric(format!("dual iterate at node {i}, iteration {k}")));
            }
        }
        a_k = a_next;

        if checkpoints.hit(k) {
            let blocks: Vec<Vec<f64>> = primal_sum
                .iter()
                .map(|s| s.iter().map(|v| v / a_k).collect())
                .collect();
            let gap = consensus_gap(&blocks, &net.laplacian)?;
            let hists = blocks.into_iter().map(Histogram::from_mass).collect::<Result<Vec<_>>>()?;
            let objective = empirical_entropic_objective(&hists, measures, c, &sinkhorn)
                .map_err(|e| e.with_context(format!("objective at iteration {k}")))?;
            trace.push(vec![
                k as f64,
                objective,
                gap.w_norm,
                gap.sqrt_w_norm,
                net.messages() as f64,
                oracle_calls as f64,
                clock.elapsed_ms(),
            ]);
        }
    }

    let blocks: Vec<Vec<f64>> = primal_sum
        .iter()
        .map(|s| s.iter().map(|v| v / a_k).collect())
        .collect();
    let w = net.laplacian.clone();
    finish(blocks, &w, n_iter, oracle_calls, net, trace)
}

/// Step constants of decentralized mirror prox.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecentralizedMirrorProxConstants {
    /// Bound `4 n ||d||^2 / lambda_min^+(W)` on `||z*||^2`; zero for one node.
    pub r_sq: f64,
    pub lipschitz: f64,
    pub r_u: f64,
    pub r_v: f64,
    pub eta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma_step: f64,
    pub theta: f64,
    pub n_iter: usize,
}

impl DecentralizedMirrorProxConstants {
    pub fn new(n: usize, m: usize, d_norm: f64, spectral: &SpectralInfo, epsilon: f64) -> Self {
        let nf = n as f64;
        let mf = m as f64;
        let ln = nf.ln().max(f64::MIN_POSITIVE);
        let r_sq = match spectral.lambda_min_plus {
            Some(l) => 4.0 * nf * d_norm * d_norm / l,
            None => 0.0,
        };
        let lipschitz = (8.0 * d_norm * d_norm + spectral.lambda_max.powi(2)).sqrt() / mf;
        let r_u = (3.0 * mf * ln).sqrt();
        let r_v = (mf * nf + r_sq / 2.0).sqrt();
        let eta = 1.0 / (2.0 * lipschitz * r_u * r_v);
        let theta = eta * (mf * nf + r_sq / 2.0) / mf;
        Self {
            r_sq,
            lipschitz,
            r_u,
            r_v,
            eta,
            alpha: 2.0 * d_norm * theta,
            beta: 6.0 * d_norm * eta * ln,
            gamma_step: 3.0 * eta * ln,
            theta,
            n_iter: ((4.0 * lipschitz * r_u * r_v / epsilon).ceil() as usize).max(1),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DecentralizedMirrorProxOutput {
    /// `blocks` are the averaged `s`-blocks.
    pub run: DecentralizedOutput,
    /// Averaged plan blocks `u_i`.
    pub plans: Vec<Vec<f64>>,
    /// Averaged dual blocks `v_i`.
    pub duals: Vec<Vec<f64>>,
    /// Averaged consensus multipliers `lambda_i`.
    pub multipliers: Vec<Vec<f64>>,
    pub duality_gap: f64,
    pub constants: DecentralizedMirrorProxConstants,
}

/// Duality gap of the decentralized saddle point with `||z|| <= radius`:
/// `max_{y, ||z|| <= R} F(x, p; y, z) - min_{x', p'} F(x', p'; y, lambda)`,
/// evaluated with global knowledge of `W`.
#[allow(clippy::too_many_arguments)]
pub fn decentralized_duality_gap(
    x: &[Vec<f64>],
    p: &[Vec<f64>],
    y: &[Vec<f64>],
    lambda: &[Vec<f64>],
    measures: &[Histogram],
    d: &CostVector,
    w: &Laplacian,
    radius: f64,
) -> Result<f64> {
    let m = measures.len();
    if [x.len(), p.len(), y.len(), lambda.len(), w.m].iter().any(|&l| l != m) {
        return Err(Error::InvalidInput("block counts disagree with the measures".into()));
    }
    let n = measures[0].len();
    let dn = d.inf_norm;
    let mf = m as f64;
    let mut ax = vec![0.0; 2 * n];

    let mut primal = 0.0;
    for ((xi, pi), q) in x.iter().zip(p).zip(measures) {
        incidence_apply_into(xi, n, &mut ax);
        let mut resid = 0.0;
        for l in 0..n {
            resid += (ax[l] - pi[l]).abs() + (ax[n + l] - q.weights()[l]).abs();
        }
        primal += crate::numerics::dot(&d.d, xi) + 2.0 * dn * resid;
    }
    let wp = w.dense_apply(p);
    primal += radius * wp.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    primal /= mf;

    let wl = w.dense_apply(lambda);
    let mut dual = 0.0;
    for ((yi, q), wli) in y.iter().zip(measures).zip(&wl) {
        let mut best = f64::INFINITY;
        for i in 0..n {
            for j in 0..n {
                best = best.min(d.d[i * n + j] + 2.0 * dn * (yi[i] + yi[n + j]));
            }
        }
        dual += best - 2.0 * dn * crate::numerics::dot(q.weights(), &yi[n..]);
        dual += (0..n).map(|l| wli[l] - 2.0 * dn * yi[l]).fold(f64::INFINITY, f64::min);
    }
    dual /= mf;
    Ok(primal - dual)
}

struct NodeState {
    log_x: Vec<f64>,
    log_p: Vec<f64>,
    x: Vec<f64>,
    p: Vec<f64>,
    y: Vec<f64>,
}

/// Extrapolation point of one node.
struct NodeHalf {
    u: Vec<f64>,
    s: Vec<f64>,
    v: Vec<f64>,
}

fn add_into(acc: &mut [Vec<f64>], blocks: &[&[f64]]) {
    for (a, b) in acc.iter_mut().zip(blocks) {
        for (x, y) in a.iter_mut().zip(b.iter()) {
            *x += y;
        }
    }
}

fn scaled(acc: &[Vec<f64>], k: usize) -> Vec<Vec<f64>> {
    let s = 1.0 / k as f64;
    acc.iter().map(|b| b.iter().map(|v| v * s).collect()).collect()
}

/// Mirror prox on the decentralized saddle point with one measure per node.
/// An iteration makes four gossip rounds, for `W z^k`, `W p^k`,
/// `W lambda^{k+1}` and `W s^{k+1}`. The trace objective is the duality gap
/// of the averaged iterates with `||z|| <= sqrt(r_sq)`.
pub fn decentralized_mirror_prox_wb(
    measures: &[Histogram],
    c: &CostMatrix,
    cfg: &DecentralizedRunConfig,
) -> Result<DecentralizedMirrorProxOutput> {
    cfg.validate(measures, c)?;
    if measures.iter().any(|q| !q.is_strictly_positive()) {
        return Err(Error::InvalidInput("measures must be strictly positive; smooth them first".into()));
    }
    let m = measures.len();
    let n = c.n();
    let d = c.to_vector();
    let dn = d.inf_norm;
    if !(dn > 0.0) {
        return Err(Error::InvalidInput("cost must have a positive entry".into()));
    }
    let mut net = Network::new(cfg.topology.clone(), cfg.keep_message_log)?;
    let mut consts = DecentralizedMirrorProxConstants::new(n, m, dn, &net.spectral, cfg.epsilon);
    if let Some(k) = cfg.n_iter {
        consts.n_iter = k.max(1);
    }
    let n_iter = consts.n_iter;
    let radius = consts.r_sq.sqrt();
    let w = net.laplacian.clone();
    let clock = Stopwatch::new(cfg.record_wall_time);
    let mut checkpoints = Checkpoints::log_spaced(n_iter, cfg.checkpoints_per_decade);
    let mut trace = IterateTrace::new(&DECENTRALIZED_COLUMNS);
    for (name, v) in [
        ("eta", consts.eta),
        ("alpha", consts.alpha),
        ("beta", consts.beta),
        ("gamma_step", consts.gamma_step),
        ("theta", consts.theta),
        ("r_sq", consts.r_sq),
        ("lipschitz", consts.lipschitz),
        ("n_iter", n_iter as f64),
    ] {
        trace.set_param(name, v);
    }

    let log_x0 = -((n * n) as f64).ln();
    let log_p0 = -(n as f64).ln();
    let mut nodes: Vec<NodeState> = (0..m)
        .map(|_| NodeState {
            log_x: vec![log_x0; n * n],
            log_p: vec![log_p0; n],
            x: vec![1.0 / (n * n) as f64; n * n],
            p: vec![1.0 / n as f64; n],
            y: vec![0.0; 2 * n],
        })
        .collect();
    let mut z = vec![vec![0.0; n]; m];
    let mut sum_u = vec![vec![0.0; n * n]; m];
    let mut sum_s = vec![vec![0.0; n]; m];
    let mut sum_v = vec![vec![0.0; 2 * n]; m];
    let mut sum_l = vec![vec![0.0; n]; m];
    let x_scale = consts.gamma_step;
    let y_scale = consts.alpha / (2.0 * dn);
    let mut oracle_calls = 0u64;

    for k in 1..=n_iter {
        let wz = net.gossip_multiply(&z)?;
        let p_now: Vec<Vec<f64>> = nodes.iter().map(|s| s.p.clone()).collect();
        let wp = net.gossip_multiply(&p_now)?;

        let halves: Vec<NodeHalf> = nodes
            .par_iter()
            .zip(measures)
            .zip(&wz)
            .map(|((st, q), wzi)| {
                let g = saddle_gradient_operator(
                    std::slice::from_ref(&st.x),
                    &st.p,
                    std::slice::from_ref(&st.y),
                    std::slice::from_ref(q),
                    &d,
                    None,
                )?;
                let v: Vec<f64> = st.y.iter().zip(&g.gy[0]).map(|(a, b)| clip_unit(a - y_scale * b)).collect();
                let mut lx = st.log_x.clone();
                let u = entropic_update(&mut lx, |l| -x_scale * g.gx[0][l]);
                let mut lp = st.log_p.clone();
                let s = entropic_update(&mut lp, |l| -consts.gamma_step * (g.gp[l] + wzi[l]));
                Ok(NodeHalf { u, s, v })
            })
            .collect::<Result<_>>()?;
        let lambda: Vec<Vec<f64>> = z
            .iter()
            .zip(&wp)
            .map(|(zi, wpi)| zi.iter().zip(wpi).map(|(a, b)| a + consts.theta * b).collect())
            .collect();
        let wl = net.gossip_multiply(&lambda)?;

        nodes
            .par_iter_mut()
            .zip(&halves)
            .zip(measures)
            .zip(&wl)
            .try_for_each(|(((st, h), q), wli)| -> Result<()> {
                let g = saddle_gradient_operator(
                    std::slice::from_ref(&h.u),
                    &h.s,
                    std::slice::from_ref(&h.v),
                    std::slice::from_ref(q),
                    &d,
                    None,
                )?;
                let y_new: Vec<f64> = st.y.iter().zip(&g.gy[0]).map(|(a, b)| clip_unit(a - y_scale * b)).collect();
                st.x = entropic_update(&mut st.log_x, |l| -x_scale * g.gx[0][l]);
                st.p = entropic_update(&mut st.log_p, |l| -consts.gamma_step * (g.gp[l] + wli[l]));
                st.y = y_new;
                check_feasible(std::slice::from_ref(&st.x), &st.p, std::slice::from_ref(&st.y), k)?;
                check_feasible(std::slice::from_ref(&h.u), &h.s, std::slice::from_ref(&h.v), k)
            })?;
        oracle_calls += 2 * m as u64;

        let s_now: Vec<Vec<f64>> = halves.iter().map(|h| h.s.clone()).collect();
        let ws = net.gossip_multiply(&s_now)?;
        for (zi, wsi) in z.iter_mut().zip(&ws) {
            for (a, b) in zi.iter_mut().zip(wsi) {
                *a += consts.theta * b;
            }
        }
        if z.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("consensus multiplier at iteration {k}")));
        }

        add_into(&mut sum_u, &halves.iter().map(|h| h.u.as_slice()).collect::<Vec<_>>());
        add_into(&mut sum_s, &halves.iter().map(|h| h.s.as_slice()).collect::<Vec<_>>());
        add_into(&mut sum_v, &halves.iter().map(|h| h.v.as_slice()).collect::<Vec<_>>());
        add_into(&mut sum_l, &lambda.iter().map(Vec::as_slice).collect::<Vec<_>>());

        if checkpoints.hit(k) {
            let (au, as_, av, al) = (scaled(&sum_u, k), scaled(&sum_s, k), scaled(&sum_v, k), scaled(&sum_l, k));
            let gap = decentralized_duality_gap(&au, &as_, &av, &al, measures, &d, &w, radius)?;
            let cg = consensus_gap(&as_, &w)?;
            trace.push(vec![
                k as f64,
                gap,
                cg.w_norm,
                cg.sqrt_w_norm,
                net.messages() as f64,
                oracle_calls as f64,
                clock.elapsed_ms(),
            ]);
        }
    }

    let (plans, blocks, duals, multipliers) = (
        scaled(&sum_u, n_iter),
        scaled(&sum_s, n_iter),
        scaled(&sum_v, n_iter),
        scaled(&sum_l, n_iter),
    );
    let duality_gap = decentralized_duality_gap(&plans, &blocks, &duals, &multipliers, measures, &d, &w, radius)?;
    let run = finish(blocks, &w, n_iter, oracle_calls, net, trace)?;
    Ok(DecentralizedMirrorProxOutput {
        run,
        plans,
        duals,
        multipliers,
        duality_gap,
        constants: consts,
    })
}
