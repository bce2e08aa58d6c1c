//! JSON-configured experiments: build a measure family, run the listed
//! solvers on it, and write one trace per run plus a summary report.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::family::{
    gen_gaussian_histograms, true_gaussian_barycenter, w2_distance_1d, GaussianFamily, GaussianFamilySpec, GridSpec,
};
use super::images::{image_family, load_image};
use crate::decentralized::{
    decentralized_dual_wb, decentralized_mirror_prox_wb, DecentralizedOutput, DecentralizedRunConfig, OracleMode,
};
use crate::dual_accel::{accelerated_dual_solve, BatchSchedule, DualProblem, WbConsensusDual, DEFAULT_BATCH_CAP};
use crate::error::{Error, Result};
use crate::measures::{
    cost_matrix_grid, format_histograms, load_histograms, smooth_to_interior, BregmanPenalty, CostMatrix, Histogram,
};
use crate::network::TopologySpec;
use crate::ot::{entropic_ot_value, exact_ot, EntropicParams};
use crate::sa::{psgd_barycenter, smd_barycenter, MeasureStream, SAConfig};
use crate::saddle::{mirror_prox_wb, MirrorProxOptions, Penalty};
use crate::trace::{Checkpoints, IterateTrace, Monitor, Stopwatch};

pub const SOLVER_KINDS: [&str; 6] = ["psgd", "smd", "mirror_prox", "dual_accel", "decentralized_dual", "decentralized_mp"];

fn default_exponent() -> f64 {
    2.0
}

fn default_per_decade() -> usize {
    20
}

fn default_delta() -> f64 {
    1e-6
}

fn default_rho() -> f64 {
    1e-6
}

fn default_sinkhorn_iters() -> usize {
    100_000
}

fn default_alpha_conf() -> f64 {
    0.05
}

fn default_batch_cap() -> u64 {
    DEFAULT_BATCH_CAP
}

fn full() -> OracleMode {
    OracleMode::Full
}

fn sampled() -> OracleMode {
    OracleMode::Sampled
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Every random choice of the experiment is derived from this seed.
    pub seed: u64,
    pub measures: MeasureSource,
    /// Exponent of the 1-D grid cost `|x_i - x_j|^p`; images always use the
    /// squared pixel distance.
    #[serde(default = "default_exponent")]
    pub cost_exponent: f64,
    /// When positive, each input measure is mixed with the uniform histogram
    /// at this weight before any solver sees it.
    #[serde(default)]
    pub smoothing: f64,
    #[serde(default)]
    pub record_wall_time: bool,
    #[serde(default = "default_per_decade")]
    pub checkpoints_per_decade: usize,
    pub solvers: Vec<SolverRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSource {
    /// Truncated Gaussians; see [`GaussianFamilySpec`].
    Gaussian {
        count: usize,
        #[serde(default)]
        grid: GridSpec,
        #[serde(default = "mean_range")]
        mean_range: [f64; 2],
        #[serde(default = "std_range")]
        std_range: [f64; 2],
    },
    /// Histograms in the text format of [`load_histograms`] on a 1-D grid.
    File {
        path: PathBuf,
        #[serde(default)]
        grid: GridSpec,
    },
    /// Same-sized grayscale PGM or CSV images.
    Images { paths: Vec<PathBuf> },
}

fn mean_range() -> [f64; 2] {
    GaussianFamilySpec::new(1, 0).mean_range
}

fn std_range() -> [f64; 2] {
    GaussianFamilySpec::new(1, 0).std_range
}

/// One solver invocation. `label` names the output files; `normalize_cost`
/// rescales the cost to `||C||_inf = 1` for that run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "solver", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolverRun {
    Psgd {
        #[serde(default)]
        label: Option<String>,
        gamma: f64,
        n_iter: usize,
        #[serde(default = "default_delta")]
        delta: f64,
        #[serde(default = "default_rho")]
        rho: f64,
        #[serde(default = "default_sinkhorn_iters")]
        sinkhorn_max_iters: usize,
        #[serde(default)]
        normalize_cost: Option<bool>,
    },
    Smd {
        #[serde(default)]
        label: Option<String>,
        n_iter: usize,
        #[serde(default)]
        normalize_cost: Option<bool>,
    },
    MirrorProx {
        #[serde(default)]
        label: Option<String>,
        epsilon: f64,
        #[serde(default)]
        n_iter: Option<usize>,
        /// Weight of the Bregman penalty anchored at the uniform histogram.
        #[serde(default)]
        penalty: Option<f64>,
        #[serde(default)]
        normalize_cost: Option<bool>,
    },
    DualAccel {
        #[serde(default)]
        label: Option<String>,
        gamma: f64,
        epsilon: f64,
        n_iter: usize,
        #[serde(default = "full")]
        oracle: OracleMode,
        #[serde(default = "default_alpha_conf")]
        alpha_conf: f64,
        #[serde(default = "default_batch_cap")]
        batch_cap: u64,
        #[serde(default)]
        normalize_cost: Option<bool>,
    },
    DecentralizedDual {
        #[serde(default)]
        label: Option<String>,
        topology: TopologySpec,
        gamma: f64,
        epsilon: f64,
        #[serde(default)]
        n_iter: Option<usize>,
        #[serde(default = "sampled")]
        oracle: OracleMode,
        #[serde(default = "default_alpha_conf")]
        alpha_conf: f64,
        #[serde(default = "default_batch_cap")]
        batch_cap: u64,
        #[serde(default)]
        log_messages: bool,
        #[serde(default)]
        normalize_cost: Option<bool>,
    },
    DecentralizedMp {
        #[serde(default)]
        label: Option<String>,
        topology: TopologySpec,
        epsilon: f64,
        #[serde(default)]
        n_iter: Option<usize>,
        #[serde(default)]
        log_messages: bool,
        #[serde(default)]
        normalize_cost: Option<bool>,
    },
}

fn topology_kind(t: &TopologySpec) -> &'static str {
    match t {
        TopologySpec::Cycle { .. } => "cycle",
        TopologySpec::Star { .. } => "star",
        TopologySpec::Complete { .. } => "complete",
        TopologySpec::Path { .. } => "path",
        TopologySpec::ErdosRenyi { .. } => "erdos_renyi",
        TopologySpec::Custom { .. } => "custom",
    }
}

impl SolverRun {
    pub fn kind(&self) -> &'static str {
        match self {
            SolverRun::Psgd { .. } => "psgd",
            SolverRun::Smd { .. } => "smd",
            SolverRun::MirrorProx { .. } => "mirror_prox",
            SolverRun::DualAccel { .. } => "dual_accel",
            SolverRun::DecentralizedDual { .. } => "decentralized_dual",
            SolverRun::DecentralizedMp { .. } => "decentralized_mp",
        }
    }

    pub fn label(&self) -> String {
        let (given, topology) = match self {
            SolverRun::Psgd { label, .. }
            | SolverRun::Smd { label, .. }
            | SolverRun::MirrorProx { label, .. }
            | SolverRun::DualAccel { label, .. } => (label, None),
            SolverRun::DecentralizedDual { label, topology, .. } | SolverRun::DecentralizedMp { label, topology, .. } => {
                (label, Some(topology))
            }
        };
        match (given, topology) {
            (Some(l), _) => l.clone(),
            (None, Some(t)) => format!("{}_{}", self.kind(), topology_kind(t)),
            (None, None) => self.kind().to_string(),
        }
    }

    /// Mirror prox variants normalize by default: their step constants are
    /// not invariant under scaling of the cost.
    pub fn normalizes_cost(&self) -> bool {
        match *self {
            SolverRun::Psgd { normalize_cost, .. }
            | SolverRun::Smd { normalize_cost, .. }
            | SolverRun::DualAccel { normalize_cost, .. }
            | SolverRun::DecentralizedDual { normalize_cost, .. } => normalize_cost.unwrap_or(false),
            SolverRun::MirrorProx { normalize_cost, .. } | SolverRun::DecentralizedMp { normalize_cost, .. } => {
                normalize_cost.unwrap_or(true)
            }
        }
    }
}

impl ExperimentConfig {
    /// Parse a JSON document. Unknown keys and variants become config errors
    /// that list the accepted names.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.solvers.is_empty() {
            return Err(Error::Config(format!(
                "`solvers` is empty; valid solvers: {}",
                SOLVER_KINDS.join(", ")
            )));
        }
        if self.checkpoints_per_decade == 0 {
            return Err(Error::Config("checkpoints_per_decade must be >= 1".into()));
        }
        if !(self.smoothing >= 0.0) {
            return Err(Error::Config(format!("smoothing = {} must be >= 0", self.smoothing)));
        }
        let mut seen = BTreeSet::new();
        for run in &self.solvers {
            let label = run.label();
            if label.is_empty() || !label.chars().all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c)) {
                return Err(Error::Config(format!(
                    "label {label:?} must be nonempty and use only letters, digits, '_', '-' or '.'"
                )));
            }
            if !seen.insert(label.clone()) {
                return Err(Error::Config(format!("duplicate run label {label:?}; set `label` to tell runs apart")));
            }
        }
        Ok(())
    }
}

/// Independent seed number `stream` of the experiment seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}

/// The measures an experiment runs on, with their cost and, for 1-D sources,
/// the support used for W2.
#[derive(Debug, Clone)]
pub struct Instance {
    pub measures: Vec<Histogram>,
    pub cost: CostMatrix,
    pub support: Option<Vec<f64>>,
    pub family: Option<GaussianFamily>,
    pub reference: Option<Histogram>,
}

pub fn build_instance(cfg: &ExperimentConfig, base_dir: &Path) -> Result<Instance> {
    let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base_dir.join(p) };
    let config_err = |e: Error| match e {
        Error::InvalidInput(msg) => Error::Config(msg),
        other => other,
    };
    let mut inst = match &cfg.measures {
        MeasureSource::Gaussian {
            count,
            grid,
            mean_range,
            std_range,
        } => {
            let spec = GaussianFamilySpec {
                count: *count,
                grid: *grid,
                mean_range: *mean_range,
                std_range: *std_range,
                seed: derive_seed(cfg.seed, 0),
            };
            let (measures, family) = gen_gaussian_histograms(&spec).map_err(config_err)?;
            let support = grid.points();
            Instance {
                measures,
                cost: cost_matrix_grid(&support, cfg.cost_exponent).map_err(config_err)?,
                support: Some(support),
                reference: Some(true_gaussian_barycenter(&family)?),
                family: Some(family),
            }
        }
        MeasureSource::File { path, grid } => {
            grid.validate().map_err(config_err)?;
            let measures = load_histograms(&resolve(path))?;
            if measures.is_empty() {
                return Err(Error::Config(format!("{} holds no histograms", path.display())));
            }
            if let Some(h) = measures.iter().find(|h| h.len() != grid.size) {
                return Err(Error::Config(format!(
                    "histogram of size {} on a grid of {} points",
                    h.len(),
                    grid.size
                )));
            }
            let support = grid.points();
            Instance {
                measures,
                cost: cost_matrix_grid(&support, cfg.cost_exponent).map_err(config_err)?,
                support: Some(support),
                family: None,
                reference: None,
            }
        }
        MeasureSource::Images { paths } => {
            let images = paths.iter().map(|p| load_image(&resolve(p))).collect::<Result<Vec<_>>>()?;
            let (measures, cost) = image_family(&images)?;
            Instance {
                measures,
                cost,
                support: None,
                family: None,
                reference: None,
            }
        }
    };
    if cfg.smoothing > 0.0 {
        inst.measures = inst
            .measures
            .iter()
            .map(|q| smooth_to_interior(q, cfg.smoothing))
            .collect::<Result<Vec<_>>>()
            .map_err(config_err)?;
    }
    Ok(inst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    ConvergenceFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub solver: String,
    pub status: RunStatus,
    pub error: Option<String>,
    pub seed: u64,
    /// Factor applied to the cost for this run; gaps and objectives are in
    /// the scaled units, W2 values in grid units.
    pub cost_scale: f64,
    pub trace_file: Option<String>,
    pub barycenter_file: Option<String>,
    pub message_log_file: Option<String>,
    pub n_iter: Option<usize>,
    /// Last value of the trace's gap or objective column.
    pub final_gap: Option<f64>,
    pub w2_initial: Option<f64>,
    pub w2_final: Option<f64>,
    pub w2_ratio: Option<f64>,
    pub consensus_gap_w: Option<f64>,
    pub consensus_gap_sqrt_w: Option<f64>,
    pub feasibility_residual: Option<f64>,
    pub messages: Option<u64>,
    pub oracle_calls: Option<u64>,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    /// The configuration document exactly as read.
    pub config: String,
    pub n: usize,
    pub m: usize,
    pub cost_inf_norm: f64,
    pub family: Option<GaussianFamily>,
    pub runs: Vec<RunSummary>,
}

impl ExperimentReport {
    pub fn any_convergence_failure(&self) -> bool {
        self.runs.iter().any(|r| r.status == RunStatus::ConvergenceFailure)
    }
}

struct RunOutput {
    trace: IterateTrace,
    gap_column: &'static str,
    blocks: Vec<Histogram>,
    barycenter: Histogram,
    n_iter: usize,
    consensus: Option<(f64, f64)>,
    feasibility: Option<f64>,
    messages: Option<u64>,
    oracle_calls: Option<u64>,
    message_log: Option<String>,
}

struct RunContext<'a> {
    inst: &'a Instance,
    cost: CostMatrix,
    seed: u64,
    record_wall_time: bool,
    per_decade: usize,
}

impl RunContext<'_> {
    fn w2_metric(&self) -> Option<crate::trace::HistogramMetric<'_>> {
        match (&self.inst.support, &self.inst.reference) {
            (Some(s), Some(r)) => Some(Box::new(move |p: &Histogram| w2_distance_1d(p, r, s))),
            _ => None,
        }
    }

    fn monitor(&self, n_iter: usize) -> Monitor<'_> {
        let mut mon = Monitor::new(n_iter)
            .with_checkpoints(Checkpoints::log_spaced(n_iter, self.per_decade))
            .with_clock(Stopwatch::new(self.record_wall_time));
        if let Some(d) = self.w2_metric() {
            mon = mon.with_distance(d);
        }
        mon
    }

    fn decentralized_config(
        &self,
        topology: &TopologySpec,
        epsilon: f64,
        n_iter: Option<usize>,
        log_messages: bool,
    ) -> Result<DecentralizedRunConfig> {
        let topo = topology.build().map_err(|e| Error::Config(format!("topology: {e}")))?;
        if topo.m != self.inst.measures.len() {
            return Err(Error::Config(format!(
                "topology has {} nodes but the experiment has {} measures",
                topo.m,
                self.inst.measures.len()
            )));
        }
        let mut cfg = DecentralizedRunConfig::new(topo, epsilon);
        cfg.n_iter = n_iter;
        cfg.seed = self.seed;
        cfg.keep_message_log = log_messages;
        cfg.record_wall_time = self.record_wall_time;
        cfg.checkpoints_per_decade = self.per_decade;
        Ok(cfg)
    }
}

/// Mean of `W_gamma(p, q_i)` (or of `W` when `gamma` is `None`), with `p`
/// smoothed by `rho` when it has entries below it.
fn sa_objective<'a>(
    measures: &'a [Histogram],
    c: &'a CostMatrix,
    entropic: Option<EntropicParams>,
    rho: f64,
) -> crate::trace::HistogramMetric<'a> {
    Box::new(move |p: &Histogram| {
        let m = measures.len() as f64;
        let mut total = 0.0;
        match &entropic {
            Some(params) => {
                let p = if p.is_interior(rho) { p.clone() } else { smooth_to_interior(p, rho)? };
                for q in measures {
                    let q = if q.is_interior(rho) { q.clone() } else { smooth_to_interior(q, rho)? };
                    total += entropic_ot_value(&p, &q, c, params)?.0;
                }
            }
            None => {
                for q in measures {
                    total += exact_ot(p, q, c)?.value;
                }
            }
        }
        Ok(total / m)
    })
}

fn run_one(run: &SolverRun, ctx: &RunContext<'_>) -> Result<RunOutput> {
    let measures = &ctx.inst.measures;
    let c = &ctx.cost;
    let objective_ref = |f: &crate::trace::HistogramMetric<'_>| -> Result<f64> {
        match &ctx.inst.reference {
            Some(r) => f(r),
            None => Ok(0.0),
        }
    };
    let single = |trace: IterateTrace, gap_column, barycenter: Histogram, n_iter| RunOutput {
        trace,
        gap_column,
        blocks: vec![barycenter.clone()],
        barycenter,
        n_iter,
        consensus: None,
        feasibility: None,
        messages: None,
        oracle_calls: None,
        message_log: None,
    };
    match run {
        SolverRun::Psgd {
            gamma,
            n_iter,
            delta,
            rho,
            sinkhorn_max_iters,
            ..
        } => {
            let mut cfg = SAConfig::psgd(*gamma, *n_iter, *delta);
            cfg.rho = *rho;
            cfg.sinkhorn_max_iters = *sinkhorn_max_iters;
            let params = EntropicParams::new(*gamma, delta.max(f64::MIN_POSITIVE), *sinkhorn_max_iters)?;
            let obj = sa_objective(measures, c, Some(params), *rho);
            let optimum = objective_ref(&obj)?;
            let mut mon = ctx.monitor(*n_iter).with_objective(obj, optimum);
            let mut stream = MeasureStream::from_family(measures.clone(), ctx.seed)?;
            let out = psgd_barycenter(&mut stream, c, &cfg, &mut mon)?;
            Ok(single(out.trace, "objective_gap", out.barycenter, *n_iter))
        }
        SolverRun::Smd { n_iter, .. } => {
            let cfg = SAConfig::smd(*n_iter);
            let obj = sa_objective(measures, c, None, 0.0);
            let optimum = objective_ref(&obj)?;
            let mut mon = ctx.monitor(*n_iter).with_objective(obj, optimum);
            let mut stream = MeasureStream::from_family(measures.clone(), ctx.seed)?;
            let out = smd_barycenter(&mut stream, c, &cfg, &mut mon)?;
            Ok(single(out.trace, "objective_gap", out.barycenter, *n_iter))
        }
        SolverRun::MirrorProx {
            epsilon,
            n_iter,
            penalty,
            ..
        } => {
            let pen = match penalty {
                Some(lambda) => Some(Penalty {
                    lambda: *lambda,
                    bregman: BregmanPenalty::new(Histogram::uniform(c.n()))?,
                }),
                None => None,
            };
            let d = c.to_vector().inf_norm;
            let auto = crate::saddle::MirrorProxConstants::new(c.n(), measures.len(), d, *epsilon).n_iter;
            let total = n_iter.unwrap_or(auto).max(1);
            let opts = MirrorProxOptions {
                n_iter: Some(total),
                monitor: Some(ctx.monitor(total)),
            };
            let out = mirror_prox_wb(measures, c, *epsilon, pen.as_ref(), opts)?;
            Ok(single(out.trace, "duality_gap", out.barycenter, total))
        }
        SolverRun::DualAccel {
            gamma,
            epsilon,
            n_iter,
            oracle,
            alpha_conf,
            batch_cap,
            ..
        } => {
            if measures.len() < 2 {
                return Err(Error::Config("dual_accel needs at least two measures".into()));
            }
            let problem = WbConsensusDual {
                measures,
                c,
                gamma: *gamma,
                sampled: *oracle == OracleMode::Sampled,
                objective_params: EntropicParams::new(*gamma, 1e-9, default_sinkhorn_iters())?,
            };
            let mut schedule = match oracle {
                OracleMode::Full => BatchSchedule::deterministic(*n_iter),
                OracleMode::Sampled => BatchSchedule::new(
                    problem.constraint_norm_sq() * measures.len() as f64,
                    *epsilon,
                    *n_iter,
                    *alpha_conf,
                ),
            };
            schedule.cap = *batch_cap;
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
            let out = accelerated_dual_solve(&problem, &schedule, &mut rng, Stopwatch::new(ctx.record_wall_time))?;
            let blocks = out
                .primal
                .chunks(c.n())
                .map(|b| Histogram::from_mass(b.to_vec()))
                .collect::<Result<Vec<_>>>()?;
            Ok(RunOutput {
                feasibility: Some(problem.feasibility_residual(&out.primal)),
                barycenter: Histogram::mean_of(&blocks)?,
                blocks,
                trace: out.trace,
                gap_column: "objective",
                n_iter: *n_iter,
                consensus: None,
                messages: None,
                oracle_calls: None,
                message_log: None,
            })
        }
        SolverRun::DecentralizedDual {
            topology,
            gamma,
            epsilon,
            n_iter,
            oracle,
            alpha_conf,
            batch_cap,
            log_messages,
            ..
        } => {
            let mut cfg = ctx.decentralized_config(topology, *epsilon, *n_iter, *log_messages)?;
            cfg.gamma = *gamma;
            cfg.oracle = *oracle;
            cfg.alpha_conf = *alpha_conf;
            cfg.batch_cap = *batch_cap;
            let out = decentralized_dual_wb(measures, c, &cfg)?;
            Ok(decentralized_output(out, *log_messages))
        }
        SolverRun::DecentralizedMp {
            topology,
            epsilon,
            n_iter,
            log_messages,
            ..
        } => {
            let cfg = ctx.decentralized_config(topology, *epsilon, *n_iter, *log_messages)?;
            let out = decentralized_mirror_prox_wb(measures, c, &cfg)?;
            Ok(decentralized_output(out.run, *log_messages))
        }
    }
}

fn decentralized_output(out: DecentralizedOutput, log_messages: bool) -> RunOutput {
    RunOutput {
        gap_column: "objective",
        consensus: Some((out.consensus.w_norm, out.consensus.sqrt_w_norm)),
        feasibility: None,
        messages: Some(out.network.messages()),
        oracle_calls: Some(out.oracle_calls),
        message_log: log_messages.then(|| out.network.log_csv()),
        n_iter: out.n_iter,
        barycenter: out.mean,
        blocks: out.blocks,
        trace: out.trace,
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Run every solver of `config_text` and write `<label>.csv`,
/// `<label>.barycenter.txt`, optional `<label>.messages.csv`, a byte copy
/// `config.json` and `report.json` into `out_dir`. A run that fails to
/// converge is recorded in the report and the remaining runs proceed.
pub fn run_experiment_text(config_text: &str, base_dir: &Path, out_dir: &Path) -> Result<ExperimentReport> {
    let cfg = ExperimentConfig::from_json(config_text)?;
    let inst = build_instance(&cfg, base_dir)?;
    std::fs::create_dir_all(out_dir)?;
    write(&out_dir.join("config.json"), config_text)?;
    let norm = inst.cost.inf_norm();
    let uniform = Histogram::uniform(inst.cost.n());
    let w2 = |p: &Histogram| -> Result<Option<f64>> {
        match (&inst.support, &inst.reference) {
            (Some(s), Some(r)) => Ok(Some(w2_distance_1d(p, r, s)?)),
            _ => Ok(None),
        }
    };
    let w2_initial = w2(&uniform)?;

    let mut runs = Vec::with_capacity(cfg.solvers.len());
    for (index, run) in cfg.solvers.iter().enumerate() {
        let label = run.label();
        let scale = if run.normalizes_cost() && norm > 0.0 { 1.0 / norm } else { 1.0 };
        let ctx = RunContext {
            inst: &inst,
            cost: inst.cost.scaled(scale)?,
            seed: derive_seed(cfg.seed, 1 + index as u64),
            record_wall_time: cfg.record_wall_time,
            per_decade: cfg.checkpoints_per_decade,
        };
        let clock = Stopwatch::new(cfg.record_wall_time);
        let mut summary = RunSummary {
            label: label.clone(),
            solver: run.kind().to_string(),
            status: RunStatus::Ok,
            error: None,
            seed: ctx.seed,
            cost_scale: scale,
            trace_file: None,
            barycenter_file: None,
            message_log_file: None,
            n_iter: None,
            final_gap: None,
            w2_initial,
            w2_final: None,
            w2_ratio: None,
            consensus_gap_w: None,
            consensus_gap_sqrt_w: None,
            feasibility_residual: None,
            messages: None,
            oracle_calls: None,
            runtime_ms: 0.0,
        };
        match run_one(run, &ctx) {
            Ok(out) => {
                let trace_name = format!("{label}.csv");
                out.trace.write_csv(&out_dir.join(&trace_name))?;
                let bary_name = format!("{label}.barycenter.txt");
                write(&out_dir.join(&bary_name), &format_histograms(&out.blocks))?;
                if let Some(log) = &out.message_log {
                    let name = format!("{label}.messages.csv");
                    write(&out_dir.join(&name), log)?;
                    summary.message_log_file = Some(name);
                }
                summary.trace_file = Some(trace_name);
                summary.barycenter_file = Some(bary_name);
                summary.n_iter = Some(out.n_iter);
                summary.final_gap = out.trace.last(out.gap_column).filter(|v| v.is_finite());
                summary.w2_final = w2(&out.barycenter)?;
                summary.w2_ratio = match (summary.w2_final, w2_initial) {
                    (Some(f), Some(i)) if i > 0.0 => Some(f / i),
                    _ => None,
                };
                summary.consensus_gap_w = out.consensus.map(|c| c.0);
                summary.consensus_gap_sqrt_w = out.consensus.map(|c| c.1);
                summary.feasibility_residual = out.feasibility;
                summary.messages = out.messages;
                summary.oracle_calls = out.oracle_calls;
            }
            Err(e) if e.is_convergence_failure() => {
                summary.status = RunStatus::ConvergenceFailure;
                summary.error = Some(e.to_string());
            }
            Err(Error::InvalidInput(msg)) => return Err(Error::Config(format!("run {label:?}: {msg}"))),
            Err(e) => return Err(e),
        }
        summary.runtime_ms = clock.elapsed_ms();
        runs.push(summary);
    }
    let report = ExperimentReport {
        config: config_text.to_string(),
        n: inst.cost.n(),
        m: inst.measures.len(),
        cost_inf_norm: norm,
        family: inst.family.clone(),
        runs,
    };
    write(&out_dir.join("report.json"), &serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

/// [`run_experiment_text`] on a config file; relative measure paths are
/// resolved against the file's directory.
pub fn run_experiment(config_path: &Path, out_dir: &Path) -> Result<ExperimentReport> {
    let text = std::fs::read_to_string(config_path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", config_path.display())))?;
    let base = config_path.parent().unwrap_or(Path::new("."));
    run_experiment_text(&text, base, out_dir)
}

/// Process exit code for an experiment outcome: 0 on success, 2 when a
/// solver failed to converge, 1 for configuration and other errors.
pub fn exit_code(result: &Result<ExperimentReport>) -> i32 {
    match result {
        Ok(r) if r.any_convergence_failure() => 2,
        Ok(_) => 0,
        Err(e) if e.is_convergence_failure() => 2,
        Err(_) => 1,
    }
}
