//! Stochastic approximation over a stream of measures: projected SGD on the
//! entropic objective and stochastic mirror descent on the exact one.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{project_simplex, smooth_to_interior, CostMatrix, Histogram};
use crate::numerics::{center, softmax_in_place};
use crate::ot::{exact_ot, sinkhorn_warm, EntropicParams};
use crate::trace::{IterateTrace, Monitor, SA_COLUMNS};

type Generator = Box<dyn FnMut(&mut ChaCha8Rng) -> Histogram + Send>;

enum Source {
    Family(Vec<Histogram>),
    Repeated(Histogram),
    Cycle(Vec<Histogram>),
    Generator(Generator),
}

/// Seeded source of measures `q^1, q^2, ...`.
pub struct MeasureStream {
    source: Source,
    rng: ChaCha8Rng,
    counter: usize,
    pub descriptor: String,
}

/// A drawn measure and, for finite families, its index in the family.
pub struct Draw {
    pub id: Option<usize>,
    pub measure: Histogram,
}

impl MeasureStream {
    /// Uniform i.i.d. draws from a finite family.
    pub fn from_family(measures: Vec<Histogram>, seed: u64) -> Result<Self> {
        if measures.is_empty() {
            return Err(Error::InvalidInput("measure family is empty".into()));
        }
        Ok(Self {
            descriptor: format!("uniform draws from {} measures (seed {seed})", measures.len()),
            source: Source::Family(measures),
            rng: ChaCha8Rng::seed_from_u64(seed),
            counter: 0,
        })
    }

    /// The same measure at every step.
    pub fn repeated(measure: Histogram) -> Self {
        Self {
            descriptor: "repeated single measure".into(),
            source: Source::Repeated(measure),
            rng: ChaCha8Rng::seed_from_u64(0),
            counter: 0,
        }
    }

    /// Deterministic round-robin over a family.
    pub fn cycle(measures: Vec<Histogram>) -> Result<Self> {
        if measures.is_empty() {
            return Err(Error::InvalidInput("measure family is empty".into()));
        }
        Ok(Self {
            descriptor: format!("round-robin over {} measures", measures.len()),
            source: Source::Cycle(measures),
            rng: ChaCha8Rng::seed_from_u64(0),
            counter: 0,
        })
    }

    pub fn from_fn(descriptor: impl Into<String>, seed: u64, f: Generator) -> Self {
        Self {
            descriptor: descriptor.into(),
            source: Source::Generator(f),
            rng: ChaCha8Rng::seed_from_u64(seed),
            counter: 0,
        }
    }

    pub fn next_draw(&mut self) -> Draw {
        self.counter += 1;
        match &mut self.source {
            Source::Family(ms) => {
                let id = self.rng.random_range(0..ms.len());
                Draw {
                    id: Some(id),
                    measure: ms[id].clone(),
                }
            }
            Source::Repeated(h) => Draw {
                id: Some(0),
                measure: h.clone(),
            },
            Source::Cycle(ms) => {
                let id = (self.counter - 1) % ms.len();
                Draw {
                    id: Some(id),
                    measure: ms[id].clone(),
                }
            }
            Source::Generator(f) => Draw {
                id: None,
                measure: f(&mut self.rng),
            },
        }
    }

    pub fn drawn(&self) -> usize {
        self.counter
    }
}

impl Iterator for MeasureStream {
    type Item = Histogram;

    fn next(&mut self) -> Option<Histogram> {
        Some(self.next_draw().measure)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaPolicy {
    /// `eta_k = 1/(gamma k)`.
    InverseGammaK,
    /// `eta = sqrt(2 log n) / (||C||_inf sqrt(N))`.
    MirrorConstant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SAConfig {
    pub gamma: f64,
    pub n_iter: usize,
    /// l1 marginal tolerance of the inner Sinkhorn solve.
    pub delta: f64,
    pub eta_policy: EtaPolicy,
    /// Iterates and measures with entries below `rho` are smoothed before
    /// being handed to Sinkhorn.
    pub rho: f64,
    pub sinkhorn_max_iters: usize,
}

impl SAConfig {
    pub fn psgd(gamma: f64, n_iter: usize, delta: f64) -> Self {
        Self {
            gamma,
            n_iter,
            delta,
            eta_policy: EtaPolicy::InverseGammaK,
            rho: 1e-6,
            sinkhorn_max_iters: 100_000,
        }
    }

    pub fn smd(n_iter: usize) -> Self {
        Self {
            gamma: 0.0,
            n_iter,
            delta: 0.0,
            eta_policy: EtaPolicy::MirrorConstant,
            rho: 1e-6,
            sinkhorn_max_iters: 0,
        }
    }

    fn validate(&self, psgd: bool) -> Result<()> {
        if self.n_iter == 0 {
            return Err(Error::InvalidInput("iteration budget N must be >= 1".into()));
        }
        if !(self.delta >= 0.0) {
            return Err(Error::InvalidInput("delta must be >= 0".into()));
        }
        if psgd && !(self.gamma > 0.0) {
            return Err(Error::InvalidInput("PSGD needs gamma > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SAOutput {
    pub barycenter: Histogram,
    pub last_iterate: Histogram,
    pub trace: IterateTrace,
}

fn average(sum: &[f64], k: usize) -> Result<Histogram> {
    Histogram::from_mass(sum.iter().map(|s| s / k as f64).collect())
}

fn interior(h: &Histogram, rho: f64) -> Result<Histogram> {
    if h.is_interior(rho) {
        Ok(h.clone())
    } else {
        smooth_to_interior(h, rho)
    }
}

fn record(trace: &mut IterateTrace, monitor: &mut Monitor<'_>, k: usize, sum: &[f64]) -> Result<()> {
    if monitor.checkpoints.hit(k) {
        let avg = average(sum, k)?;
        let gap = monitor.gap(&avg)?;
        let dist = monitor.dist(&avg)?;
        trace.push(vec![k as f64, gap, dist, monitor.clock.elapsed_ms()]);
    }
    Ok(())
}

/// Projected stochastic gradient descent on `p -> E W_gamma(p, q)`, started at
/// the uniform histogram, returning the running average of the iterates.
pub fn psgd_barycenter(
    stream: &mut MeasureStream,
    c: &CostMatrix,
    cfg: &SAConfig,
    monitor: &mut Monitor<'_>,
) -> Result<SAOutput> {
    cfg.validate(true)?;
    let n = c.n();
    let params = EntropicParams::new(cfg.gamma, cfg.delta.max(f64::MIN_POSITIVE), cfg.sinkhorn_max_iters)?;
    let mut trace = IterateTrace::new(&SA_COLUMNS);
    trace.set_param("gamma", cfg.gamma);
    trace.set_param("sinkhorn_tol", params.sinkhorn_tol);
    trace.set_param("rho", cfg.rho);

    let mut p = Histogram::uniform(n);
    let mut sum = vec![0.0; n];
    let mut warm: HashMap<Option<usize>, Vec<f64>> = HashMap::new();
    for k in 1..=cfg.n_iter {
        for (s, w) in sum.iter_mut().zip(p.weights()) {
            *s += w;
        }
        record(&mut trace, monitor, k, &sum)?;
        if k == cfg.n_iter {
            break;
        }
        let draw = stream.next_draw();
        let q = interior(&draw.measure, cfg.rho)?;
        let p_in = interior(&p, cfg.rho)?;
        let out = sinkhorn_warm(&p_in, &q, c, &params, warm.get(&draw.id).map(Vec::as_slice))
            .map_err(|e| e.with_context(format!("PSGD iteration {k}")))?;
        let eta = 1.0 / (cfg.gamma * k as f64);
        let step: Vec<f64> = p
            .weights()
            .iter()
            .zip(&out.potentials.u)
            .map(|(w, u)| w - eta * u)
            .collect();
        warm.insert(draw.id, out.g);
        p = project_simplex(&step)?;
    }
    Ok(SAOutput {
        barycenter: average(&sum, cfg.n_iter)?,
        last_iterate: p,
        trace,
    })
}

/// `p <- p * exp(-eta u)`, normalized, computed from log-weights.
pub fn multiplicative_step(log_p: &mut [f64], u: &[f64], eta: f64) -> Vec<f64> {
    for (l, g) in log_p.iter_mut().zip(u) {
        *l -= eta * g;
    }
    let mut w = log_p.to_vec();
    let lse = softmax_in_place(&mut w);
    for l in log_p.iter_mut() {
        *l -= lse;
    }
    w
}

pub fn smd_step_size(c: &CostMatrix, n_iter: usize) -> f64 {
    let n = c.n() as f64;
    (2.0 * n.ln()).sqrt() / (c.inf_norm().max(f64::MIN_POSITIVE) * (n_iter as f64).sqrt())
}

/// Stochastic mirror descent with entropic prox and the constant step
/// [`smd_step_size`]; gradients are exact dual LP potentials.
pub fn smd_barycenter(
    stream: &mut MeasureStream,
    c: &CostMatrix,
    cfg: &SAConfig,
    monitor: &mut Monitor<'_>,
) -> Result<SAOutput> {
    cfg.validate(false)?;
    let n = c.n();
    let eta = smd_step_size(c, cfg.n_iter);
    let mut trace = IterateTrace::new(&SA_COLUMNS);
    trace.set_param("eta", eta);

    let mut log_p = vec![-(n as f64).ln(); n];
    let mut p = Histogram::uniform(n);
    let mut sum = vec![0.0; n];
    for k in 1..=cfg.n_iter {
        for (s, w) in sum.iter_mut().zip(p.weights()) {
            *s += w;
        }
        record(&mut trace, monitor, k, &sum)?;
        if k == cfg.n_iter {
            break;
        }
        let q = stream.next_draw().measure;
        let sol = exact_ot(&p, &q, c).map_err(|e| e.with_context(format!("SMD iteration {k}")))?;
        let mut u = sol.potentials.u;
        center(&mut u);
        let w = multiplicative_step(&mut log_p, &u, eta);
        if w.iter().any(|x| !(*x > 0.0)) {
            return Err(Error::Numeric(format!("SMD iterate lost positivity at iteration {k}")));
        }
        p = Histogram::from_mass(w)?;
    }
    Ok(SAOutput {
        barycenter: average(&sum, cfg.n_iter)?,
        last_iterate: p,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::cost_matrix_grid;
    use crate::ot::entropic_ot_value;

    fn quiet(n: usize) -> Monitor<'static> {
        Monitor::new(n)
    }

    #[test]
    fn psgd_single_measure_matches_grid_minimizer() {
        let c = cost_matrix_grid(&[0.0, 1.0], 2.0).unwrap();
        let q = Histogram::new(vec![0.3, 0.7]).unwrap();
        let gamma = 0.5;
        let cfg = SAConfig::psgd(gamma, 2000, 1e-10);
        let out = psgd_barycenter(&mut MeasureStream::repeated(q.clone()), &c, &cfg, &mut quiet(2000)).unwrap();

        let params = EntropicParams::new(gamma, 1e-12, 100_000).unwrap();
        let mut best = (f64::INFINITY, 0.0);
        let res = 10_000;
        for i in 1..res {
            let t = i as f64 / res as f64;
            let p = Histogram::new(vec![t, 1.0 - t]).unwrap();
            let v = entropic_ot_value(&p, &q, &c, &params).unwrap().0;
            if v < best.0 {
                best = (v, t);
            }
        }
        let d = crate::numerics::dist2(out.barycenter.weights(), &[best.1, 1.0 - best.1]);
        assert!(d < 1e-2, "distance {d} to grid minimizer {}", best.1);
    }

    #[test]
    fn psgd_mirrored_measures_give_symmetric_output() {
        let pts: Vec<f64> = (0..6).map(|k| k as f64).collect();
        let c = cost_matrix_grid(&pts, 2.0).unwrap();
        let a = Histogram::from_mass(vec![5.0, 3.0, 1.0, 0.5, 0.3, 0.2]).unwrap();
        let mut rev = a.weights().to_vec();
        rev.reverse();
        let b = Histogram::new(rev).unwrap();
        let cfg = SAConfig::psgd(1.0, 400, 1e-9);
        let run = |fam: Vec<Histogram>| {
            psgd_barycenter(&mut MeasureStream::cycle(fam).unwrap(), &c, &cfg, &mut quiet(400)).unwrap()
        };
        let out = run(vec![a.clone(), b.clone()]);
        let mirrored = run(vec![b, a]);
        let mut flipped = mirrored.barycenter.weights().to_vec();
        flipped.reverse();
        assert!(crate::numerics::dist2(out.barycenter.weights(), &flipped) < 1e-2);
        let mut own = out.barycenter.weights().to_vec();
        own.reverse();
        assert!(crate::numerics::dist2(out.barycenter.weights(), &own) < 1e-2);
    }

    #[test]
    fn zero_gradient_keeps_iterate() {
        let mut log_p = vec![0.2f64.ln(), 0.3f64.ln(), 0.5f64.ln()];
        let w = multiplicative_step(&mut log_p, &[0.0; 3], 0.7);
        for (a, b) in w.iter().zip([0.2, 0.3, 0.5]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn smd_single_measure_near_optimum() {
        let c = cost_matrix_grid(&[0.0, 1.0, 2.0], 2.0).unwrap();
        let q = Histogram::new(vec![0.2, 0.5, 0.3]).unwrap();
        let n_iter = 5000;
        let out = smd_barycenter(&mut MeasureStream::repeated(q.clone()), &c, &SAConfig::smd(n_iter), &mut quiet(n_iter)).unwrap();
        assert!(out.barycenter.min_entry() > 0.0);
        let w = exact_ot(&out.barycenter, &q, &c).unwrap().value;
        let mut best = f64::INFINITY;
        for i in 0..=100 {
            for j in 0..=(100 - i) {
                let p = Histogram::new(vec![i as f64 / 100.0, j as f64 / 100.0, (100 - i - j) as f64 / 100.0]).unwrap();
                best = best.min(exact_ot(&p, &q, &c).unwrap().value);
            }
        }
        assert!(w - best < 2e-2, "{w} vs {best}");
    }

    #[test]
    fn smd_iterates_stay_positive() {
        let pts: Vec<f64> = (0..5).map(|k| k as f64).collect();
        let c = cost_matrix_grid(&pts, 2.0).unwrap();
        let fam = vec![Histogram::point_mass(5, 0), Histogram::point_mass(5, 4)];
        let mut stream = MeasureStream::from_family(fam, 3).unwrap();
        let out = smd_barycenter(&mut stream, &c, &SAConfig::smd(300), &mut quiet(300)).unwrap();
        assert!(out.last_iterate.min_entry() > 0.0);
        assert!(out.barycenter.min_entry() > 0.0);
    }

    #[test]
    fn traces_are_bitwise_reproducible() {
        let pts: Vec<f64> = (0..6).map(|k| k as f64).collect();
        let c = cost_matrix_grid(&pts, 2.0).unwrap();
        let fam: Vec<Histogram> = (0..3)
            .map(|s| Histogram::from_mass((0..6).map(|k| 1.0 + ((k * (s + 2)) % 5) as f64).collect()).unwrap())
            .collect();
        let run = || {
            let mut mon = Monitor::new(200).with_objective(
                Box::new(|p: &Histogram| Ok(p.weights()[0])),
                0.0,
            );
            let mut s = MeasureStream::from_family(fam.clone(), 99).unwrap();
            let a = psgd_barycenter(&mut s, &c, &SAConfig::psgd(0.5, 200, 1e-9), &mut mon).unwrap();
            let mut mon = Monitor::new(200);
            let mut s = MeasureStream::from_family(fam.clone(), 99).unwrap();
            let b = smd_barycenter(&mut s, &c, &SAConfig::smd(200), &mut mon).unwrap();
            (a.trace.to_csv(), b.trace.to_csv(), a.barycenter, b.barycenter)
        };
        let (a1, b1, pa1, pb1) = run();
        let (a2, b2, pa2, pb2) = run();
        assert_eq!(a1, a2);
        assert_eq!(b1, b2);
        assert_eq!(pa1, pa2);
        assert_eq!(pb1, pb2);
    }
}
