//! Graph topologies, their Laplacians, and a synchronous gossip runtime in
//! which a node only ever reads vectors sent by its neighbors.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_ER_ATTEMPTS: usize = 10_000;

/// JSON description of a topology, e.g. `{"kind":"cycle","m":10}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologySpec {
    Cycle { m: usize },
    Star { m: usize },
    Complete { m: usize },
    Path { m: usize },
    ErdosRenyi { m: usize, p: f64, seed: u64 },
    Custom { m: usize, edges: Vec<(usize, usize)> },
}

pub const TOPOLOGY_KINDS: [&str; 6] = ["cycle", "star", "complete", "path", "erdos_renyi", "custom"];

impl TopologySpec {
    pub fn build(&self) -> Result<Topology> {
        match *self {
            TopologySpec::Cycle { m } => Topology::cycle(m),
            TopologySpec::Star { m } => Topology::star(m),
            TopologySpec::Complete { m } => Topology::complete(m),
            TopologySpec::Path { m } => Topology::path(m),
            TopologySpec::ErdosRenyi { m, p, seed } => Topology::erdos_renyi(m, p, seed),
            TopologySpec::Custom { m, ref edges } => Topology::new(m, edges.clone(), "custom"),
        }
    }
}

/// Undirected connected simple graph on nodes `0..m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Topology {
    pub m: usize,
    /// Sorted, each pair `(i, j)` with `i < j`.
    pub edges: Vec<(usize, usize)>,
    pub kind: String,
}

impl Topology {
    pub fn new(m: usize, edges: Vec<(usize, usize)>, kind: impl Into<String>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidInput("a graph needs at least one node".into()));
        }
        let mut set = BTreeSet::new();
        for &(a, b) in &edges {
            if a >= m || b >= m {
                return Err(Error::InvalidInput(format!("edge ({a},{b}) has a node outside 0..{m}")));
            }
            if a == b {
                return Err(Error::InvalidInput(format!("self-loop at node {a}")));
            }
            if !set.insert((a.min(b), a.max(b))) {
                return Err(Error::InvalidInput(format!("duplicate edge ({a},{b})")));
            }
        }
        let t = Self {
            m,
            edges: set.into_iter().collect(),
            kind: kind.into(),
        };
        if !t.is_connected() {
            return Err(Error::Connectivity(format!("{} graph on {m} nodes", t.kind)));
        }
        Ok(t)
    }

    pub fn cycle(m: usize) -> Result<Self> {
        let edges = match m {
            0 | 1 => vec![],
            2 => vec![(0, 1)],
            _ => (0..m).map(|i| (i, (i + 1) % m)).collect(),
        };
        Self::new(m, edges, "cycle")
    }

    pub fn star(m: usize) -> Result<Self> {
        Self::new(m, (1..m).map(|i| (0, i)).collect(), "star")
    }

    pub fn complete(m: usize) -> Result<Self> {
        let edges = (0..m).flat_map(|i| ((i + 1)..m).map(move |j| (i, j))).collect();
        Self::new(m, edges, "complete")
    }

    pub fn path(m: usize) -> Result<Self> {
        Self::new(m, (1..m).map(|i| (i - 1, i)).collect(), "path")
    }

    /// `G(m, p)` redrawn from the seeded stream until connected.
    pub fn erdos_renyi(m: usize, p: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidInput(format!("edge probability {p} outside [0,1]")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kind = format!("erdos_renyi(p={p}, seed={seed})");
        for _ in 0..MAX_ER_ATTEMPTS {
            let mut edges = Vec::new();
            for i in 0..m {
                for j in (i + 1)..m {
                    if rng.random::<f64>() < p {
                        edges.push((i, j));
                    }
                }
            }
            match Self::new(m, edges, kind.clone()) {
                Ok(t) => return Ok(t),
                Err(Error::Connectivity(_)) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::Connectivity(format!(
            "no connected draw of G({m}, {p}) in {MAX_ER_ATTEMPTS} attempts"
        )))
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut nb = vec![Vec::new(); self.m];
        for &(a, b) in &self.edges {
            nb[a].push(b);
            nb[b].push(a);
        }
        for v in nb.iter_mut() {
            v.sort_unstable();
        }
        nb
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.binary_search(&(a.min(b), a.max(b))).is_ok()
    }

    fn is_connected(&self) -> bool {
        let nb = self.neighbors();
        let mut seen = vec![false; self.m];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &nb[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// `W_ij = -1` on edges, `deg(i)` on the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Laplacian {
    pub m: usize,
    pub entries: Vec<f64>,
    pub degree: Vec<usize>,
}

impl Laplacian {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.m + j]
    }

    /// Dense `(W ⊗ I_n) p` for stacked blocks, written as
    /// `sum_j -W_ij (p_i - p_j)` so that consensus maps to exact zeros.
    pub fn dense_apply(&self, p: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = p.first().map_or(0, Vec::len);
        (0..self.m)
            .map(|i| {
                let mut out = vec![0.0; n];
                for (j, pj) in p.iter().enumerate() {
                    let w = self.get(i, j);
                    if j != i && w != 0.0 {
                        for ((o, a), b) in out.iter_mut().zip(&p[i]).zip(pj) {
                            *o -= w * (a - b);
                        }
                    }
                }
                out
            })
            .collect()
    }

    /// `p^T (W ⊗ I_n) p = sum_{i<j} -W_ij ||p_i - p_j||^2`.
    pub fn quadratic_form(&self, p: &[Vec<f64>]) -> f64 {
        let mut total = 0.0;
        for i in 0..self.m {
            for j in (i + 1)..self.m {
                let w = self.get(i, j);
                if w != 0.0 {
                    total -= w * crate::numerics::dist2(&p[i], &p[j]).powi(2);
                }
            }
        }
        total
    }
}

pub fn laplacian_of(t: &Topology) -> Result<Laplacian> {
    if !t.is_connected() {
        return Err(Error::Connectivity(format!("{} graph on {} nodes", t.kind, t.m)));
    }
    let m = t.m;
    let mut entries = vec![0.0; m * m];
    let mut degree = vec![0; m];
    for &(a, b) in &t.edges {
        entries[a * m + b] = -1.0;
        entries[b * m + a] = -1.0;
        degree[a] += 1;
        degree[b] += 1;
    }
    for i in 0..m {
        entries[i * m + i] = degree[i] as f64;
    }
    Ok(Laplacian { m, entries, degree })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralInfo {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub lambda_max: f64,
    /// `None` only for the single-node graph.
    pub lambda_min_plus: Option<f64>,
    pub chi: f64,
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues(a: &[f64], m: usize) -> Vec<f64> {
    let mut a = a.to_vec();
    for _sweep in 0..100 {
        let off: f64 = (0..m)
            .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * m + j] * a[i * m + j])
            .sum();
        let scale: f64 = a.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..m {
            for q in (p + 1)..m {
                let apq = a[p * m + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * m + p];
                let aqq = a[q * m + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..m {
                    let akp = a[k * m + p];
                    let akq = a[k * m + q];
                    a[k * m + p] = c * akp - s * akq;
                    a[k * m + q] = s * akp + c * akq;
                }
                for k in 0..m {
                    let apk = a[p * m + k];
                    let aqk = a[q * m + k];
                    a[p * m + k] = c * apk - s * aqk;
                    a[q * m + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..m).map(|i| a[i * m + i]).collect();
    ev.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
    ev
}

pub fn spectral(w: &Laplacian) -> Result<SpectralInfo> {
    let ev = symmetric_eigenvalues(&w.entries, w.m);
    let lambda_max = ev.last().copied().unwrap_or(0.0);
    if w.m == 1 {
        return Ok(SpectralInfo {
            eigenvalues: ev,
            lambda_max,
            lambda_min_plus: None,
            chi: 1.0,
        });
    }
    let threshold = 1e-9 * lambda_max;
    let positive: Vec<f64> = ev.iter().copied().filter(|v| *v > threshold).collect();
    // a connected graph has exactly one zero eigenvalue
    if lambda_max <= 0.0 || positive.len() != w.m - 1 {
        return Err(Error::Connectivity(format!(
            "Laplacian has {} near-zero eigenvalues",
            w.m - positive.len()
        )));
    }
    let lmin = positive[0];
    Ok(SpectralInfo {
        eigenvalues: ev,
        lambda_max,
        lambda_min_plus: Some(lmin),
        chi: lambda_max / lmin,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Message {
    pub round: usize,
    pub src: usize,
    pub dst: usize,
    pub bytes: usize,
}

/// Synchronous message-passing simulator. One call to
/// [`Network::gossip_multiply`] is one round: every node sends its vector to
/// each neighbor, then each node combines what it received.
#[derive(Debug, Clone)]
pub struct Network {
    pub topology: Topology,
    pub laplacian: Laplacian,
    pub spectral: SpectralInfo,
    neighbors: Vec<Vec<usize>>,
    keep_log: bool,
    log: Vec<Message>,
    rounds: usize,
    messages: u64,
    bytes: u64,
}

impl Network {
    pub fn new(topology: Topology, keep_log: bool) -> Result<Self> {
        let laplacian = laplacian_of(&topology)?;
        let spectral = spectral(&laplacian)?;
        let neighbors = topology.neighbors();
        Ok(Self {
            topology,
            laplacian,
            spectral,
            neighbors,
            keep_log,
            log: Vec::new(),
            rounds: 0,
            messages: 0,
            bytes: 0,
        })
    }

    pub fn m(&self) -> usize {
        self.topology.m
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn messages(&self) -> u64 {
        self.messages
    }

    pub fn bytes(&self) -> u64 {
        self.bytes
    }

    pub fn log(&self) -> &[Message] {
        &self.log
    }

    /// `(W ⊗ I_n) p`, computed by each node from its own vector and its inbox.
    pub fn gossip_multiply(&mut self, p: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let m = self.m();
        if p.len() != m {
            return Err(Error::InvalidInput(format!("{} node vectors for {m} nodes", p.len())));
        }
        let n = p[0].len();
        if p.iter().any(|v| v.len() != n) {
            return Err(Error::InvalidInput("node vectors differ in dimension".into()));
        }
        let round = self.rounds;
        self.rounds += 1;

        // send phase, in (src, dst) order
        let mut inbox: Vec<Vec<(usize, &[f64])>> = vec![Vec::new(); m];
        for src in 0..m {
            for &dst in &self.neighbors[src] {
                let msg = Message {
                    round,
                    src,
                    dst,
                    bytes: n * std::mem::size_of::<f64>(),
                };
                if !self.topology.has_edge(msg.src, msg.dst) {
                    return Err(Error::Connectivity(format!(
                        "message {src}->{dst} does not follow an edge"
                    )));
                }
                self.messages += 1;
                self.bytes += msg.bytes as u64;
                if self.keep_log {
                    self.log.push(msg);
                }
                inbox[dst].push((src, p[src].as_slice()));
            }
        }

        // receive phase: node i sees only p_i and its inbox
        let out = inbox
            .par_iter()
            .enumerate()
            .map(|(i, msgs)| {
                // sum over neighbors of (p_i - p_j)
                let mut acc = vec![0.0; n];
                for (_, v) in msgs {
                    for ((a, own), b) in acc.iter_mut().zip(&p[i]).zip(v.iter()) {
                        *a += own - b;
                    }
                }
                acc
            })
            .collect();
        Ok(out)
    }

    pub fn messages_per_round(&self) -> u64 {
        2 * self.topology.edges.len() as u64
    }

    /// Every logged message follows an edge. Returns the number checked.
    pub fn verify_locality(&self) -> Result<usize> {
        for msg in &self.log {
            if !self.topology.has_edge(msg.src, msg.dst) {
                return Err(Error::Connectivity(format!(
                    "round {} message {}->{} is not along an edge",
                    msg.round, msg.src, msg.dst
                )));
            }
        }
        Ok(self.log.len())
    }

    pub fn log_csv(&self) -> String {
        let mut out = String::from("round,src,dst,bytes\n");
        for m in &self.log {
            let _ = writeln!(out, "{},{},{},{}", m.round, m.src, m.dst, m.bytes);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsensusGap {
    /// `||(W ⊗ I) p||_2`.
    pub w_norm: f64,
    /// `sqrt(p^T (W ⊗ I) p) = ||sqrt(W) p||_2`.
    pub sqrt_w_norm: f64,
}

/// Both consensus metrics, evaluated centrally (no messages are logged).
pub fn consensus_gap(p: &[Vec<f64>], w: &Laplacian) -> Result<ConsensusGap> {
    if p.len() != w.m {
        return Err(Error::InvalidInput(format!("{} blocks for {} nodes", p.len(), w.m)));
    }
    let wp = w.dense_apply(p);
    let w_norm = wp.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
    let quad = w.quadratic_form(p);
    Ok(ConsensusGap {
        w_norm,
        sqrt_w_norm: quad.max(0.0).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn dense_eigen(w: &Laplacian) -> Vec<f64> {
        let mat = DMatrix::from_row_slice(w.m, w.m, &w.entries);
        let mut ev: Vec<f64> = mat.symmetric_eigen().eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }

    #[test]
    fn laplacian_examples() {
        let w = laplacian_of(&Topology::path(3).unwrap()).unwrap();
        assert_eq!(w.entries, vec![1.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 1.0]);
        let w = laplacian_of(&Topology::complete(4).unwrap()).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(w.get(i, j), if i == j { 3.0 } else { -1.0 });
            }
        }
    }

    #[test]
    fn rows_sum_to_zero() {
        let tops = vec![
            Topology::cycle(7).unwrap(),
            Topology::star(6).unwrap(),
            Topology::complete(5).unwrap(),
            Topology::path(4).unwrap(),
            Topology::erdos_renyi(12, 0.3, 4).unwrap(),
        ];
        for t in tops {
            let w = laplacian_of(&t).unwrap();
            for i in 0..w.m {
                assert_eq!((0..w.m).map(|j| w.get(i, j)).sum::<f64>(), 0.0);
            }
        }
    }

    #[test]
    fn invalid_graphs_rejected() {
        assert!(matches!(Topology::new(3, vec![(0, 1)], "custom"), Err(Error::Connectivity(_))));
        assert!(Topology::new(2, vec![(0, 0)], "custom").is_err());
        assert!(Topology::new(2, vec![(0, 1), (1, 0)], "custom").is_err());
    }

    #[test]
    fn spectral_examples() {
        let s = spectral(&laplacian_of(&Topology::path(2).unwrap()).unwrap()).unwrap();
        assert!((s.eigenvalues[0]).abs() < 1e-14 && (s.eigenvalues[1] - 2.0).abs() < 1e-14);
        assert!((s.chi - 1.0).abs() < 1e-14);
        let w = laplacian_of(&Topology::complete(5).unwrap()).unwrap();
        let s = spectral(&w).unwrap();
        let oracle = dense_eigen(&w);
        assert!((s.lambda_max - oracle[4]).abs() < 1e-10 && (s.lambda_max - 5.0).abs() < 1e-10);
        assert!((s.lambda_min_plus.unwrap() - 5.0).abs() < 1e-10);
        let w = laplacian_of(&Topology::cycle(6).unwrap()).unwrap();
        let s = spectral(&w).unwrap();
        let oracle = dense_eigen(&w);
        assert!((s.chi - oracle[5] / oracle[1]).abs() < 1e-8);
    }

    #[test]
    fn spectral_matches_dense_solver_on_random_graphs() {
        for seed in 0..20 {
            let w = laplacian_of(&Topology::erdos_renyi(15, 0.3, seed).unwrap()).unwrap();
            let ours = spectral(&w).unwrap().eigenvalues;
            let theirs = dense_eigen(&w);
            for (a, b) in ours.iter().zip(&theirs) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn single_node() {
        let net = Network::new(Topology::cycle(1).unwrap(), true).unwrap();
        assert_eq!(net.spectral.lambda_min_plus, None);
        assert_eq!(net.laplacian.entries, vec![0.0]);
    }

    #[test]
    fn erdos_renyi_reproducible() {
        let a = Topology::erdos_renyi(10, 0.5, 7).unwrap();
        let b = Topology::erdos_renyi(10, 0.5, 7).unwrap();
        assert_eq!(a, b);
        let c = Topology::erdos_renyi(10, 0.5, 8).unwrap();
        assert_ne!(a.edges, c.edges);
    }

    #[test]
    fn topology_json() {
        let s: TopologySpec = serde_json::from_str(r#"{"kind":"cycle","m":10}"#).unwrap();
        assert_eq!(s, TopologySpec::Cycle { m: 10 });
        let s: TopologySpec = serde_json::from_str(r#"{"kind":"erdos_renyi","m":10,"p":0.5,"seed":7}"#).unwrap();
        assert_eq!(s.build().unwrap(), Topology::erdos_renyi(10, 0.5, 7).unwrap());
        assert!(serde_json::from_str::<TopologySpec>(r#"{"kind":"torus","m":4}"#).is_err());
    }

    #[test]
    fn gossip_matches_dense_and_counts_messages() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for t in [Topology::cycle(6).unwrap(), Topology::star(5).unwrap(), Topology::erdos_renyi(8, 0.4, 1).unwrap()] {
            let mut net = Network::new(t, true).unwrap();
            let p: Vec<Vec<f64>> = (0..net.m()).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let got = net.gossip_multiply(&p).unwrap();
            let want = net.laplacian.dense_apply(&p);
            for (a, b) in got.iter().flatten().zip(want.iter().flatten()) {
                assert!((a - b).abs() < 1e-12);
            }
            assert_eq!(net.messages(), net.messages_per_round());
            assert_eq!(net.verify_locality().unwrap() as u64, net.messages_per_round());
            let same = vec![vec![0.3, -1.0, 2.0, 0.0]; net.m()];
            assert!(net.gossip_multiply(&same).unwrap().iter().flatten().all(|v| *v == 0.0));
            assert!(net.log_csv().starts_with("round,src,dst,bytes\n"));
        }
    }

    #[test]
    fn consensus_metrics() {
        let w = laplacian_of(&Topology::path(2).unwrap()).unwrap();
        let v = [0.5, -0.25];
        let p = vec![vec![1.0 + v[0], 2.0 + v[1]], vec![1.0, 2.0]];
        let g = consensus_gap(&p, &w).unwrap();
        let flat: Vec<f64> = p.concat();
        let mut dense = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                let (i, l) = (a / 2, a % 2);
                let (j, k) = (b / 2, b % 2);
                if l == k {
                    dense += flat[a] * w.get(i, j) * flat[b];
                }
            }
        }
        assert!((dense - v.iter().map(|x| x * x).sum::<f64>()).abs() < 1e-14);
        assert!((g.sqrt_w_norm.powi(2) - dense).abs() < 1e-14);
        assert!((g.w_norm.powi(2) - 2.0 * dense).abs() < 1e-14);
        let wp = w.dense_apply(&p);
        assert!((crate::numerics::dot(&wp.concat(), &flat) - dense).abs() < 1e-14);
        let same = vec![vec![0.1, 0.2]; 2];
        let g = consensus_gap(&same, &w).unwrap();
        assert_eq!((g.w_norm, g.sqrt_w_norm), (0.0, 0.0));
        let shifted: Vec<Vec<f64>> = p.iter().map(|b| b.iter().map(|x| x + 3.0).collect()).collect();
        let g2 = consensus_gap(&shifted, &w).unwrap();
        let g1 = consensus_gap(&p, &w).unwrap();
        assert!((g1.w_norm - g2.w_norm).abs() < 1e-12 && (g1.sqrt_w_norm - g2.sqrt_w_norm).abs() < 1e-12);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn gossip_is_linear(
                seed in 0u64..50,
                a in -3.0f64..3.0,
                b in -3.0f64..3.0,
                vals in proptest::collection::vec(-1.0f64..1.0, 48),
            ) {
                let mut net = Network::new(Topology::erdos_renyi(8, 0.4, seed).unwrap(), false).unwrap();
                let p: Vec<Vec<f64>> = vals[..24].chunks(3).map(<[f64]>::to_vec).collect();
                let q: Vec<Vec<f64>> = vals[24..].chunks(3).map(<[f64]>::to_vec).collect();
                let mix: Vec<Vec<f64>> = p.iter().zip(&q)
                    .map(|(x, y)| x.iter().zip(y).map(|(u, v)| a * u + b * v).collect())
                    .collect();
                let wp = net.gossip_multiply(&p).unwrap();
                let wq = net.gossip_multiply(&q).unwrap();
                let wm = net.gossip_multiply(&mix).unwrap();
                for ((x, y), z) in wp.iter().flatten().zip(wq.iter().flatten()).zip(wm.iter().flatten()) {
                    prop_assert!((a * x + b * y - z).abs() < 1e-10);
                }
            }

            #[test]
            fn zero_gap_iff_consensus(
                seed in 0u64..50,
                base in proptest::collection::vec(-1.0f64..1.0, 3),
                bump in prop_oneof![Just(0.0f64), 1e-3f64..1.0],
                node in 0usize..8,
            ) {
                let w = laplacian_of(&Topology::erdos_renyi(8, 0.4, seed).unwrap()).unwrap();
                let mut p = vec![base.clone(); 8];
                p[node][0] += bump;
                let g = consensus_gap(&p, &w).unwrap();
                let equal = bump == 0.0;
                prop_assert_eq!(g.sqrt_w_norm <= 1e-9, equal);
                prop_assert_eq!(g.w_norm <= 1e-9, equal);
            }
        }
    }
}
