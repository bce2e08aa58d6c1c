//! Histograms on the probability simplex, ground costs, and the divergences
//! and penalty functions built on them.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sums within this distance of one are accepted as-is.
pub const SIMPLEX_TOL: f64 = 1e-12;
/// Sums within this distance of one are renormalized; anything further is rejected.
pub const RENORMALIZE_TOL: f64 = 1e-9;

/// A point of the probability simplex: nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Histogram {
    weights: Vec<f64>,
}

impl Histogram {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidInput("histogram must have at least one entry".into()));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(Error::InvalidInput(format!(
                "histogram entry {i} is {w}; entries must be finite and nonnegative"
            )));
        }
        let sum: f64 = weights.iter().sum();
        let dev = (sum - 1.0).abs();
        if dev <= SIMPLEX_TOL {
            Ok(Self { weights })
        } else if dev <= RENORMALIZE_TOL {
            Ok(Self {
                weights: weights.into_iter().map(|w| w / sum).collect(),
            })
        } else {
            Err(Error::InvalidInput(format!(
                "histogram sums to {sum}, more than {RENORMALIZE_TOL:e} away from 1"
            )))
        }
    }

    /// Normalize an arbitrary nonnegative vector with positive mass.
    pub fn from_mass(mass: Vec<f64>) -> Result<Self> {
        if mass.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidInput("mass entries must be finite and nonnegative".into()));
        }
        let sum: f64 = mass.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::InvalidInput("total mass must be positive".into()));
        }
        Self::new(mass.into_iter().map(|w| w / sum).collect())
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform histogram needs n > 0");
        Self {
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(n: usize, at: usize) -> Self {
        assert!(at < n);
        let mut weights = vec![0.0; n];
        weights[at] = 1.0;
        Self { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }

    pub fn support_size(&self) -> usize {
        self.weights.len()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn min_entry(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.weights.iter().all(|w| *w > 0.0)
    }

    /// True when every entry is at least `rho`.
    pub fn is_interior(&self, rho: f64) -> bool {
        self.min_entry() >= rho
    }

    /// Entry-wise mean of histograms of a common size.
    pub fn mean_of(hists: &[Histogram]) -> Result<Histogram> {
        let first = hists
            .first()
            .ok_or_else(|| Error::InvalidInput("mean of zero histograms".into()))?;
        let n = first.len();
        let mut acc = vec![0.0; n];
        for h in hists {
            if h.len() != n {
                return Err(Error::InvalidInput("histograms differ in support size".into()));
            }
            for (a, w) in acc.iter_mut().zip(h.weights()) {
                *a += w;
            }
        }
        let m = hists.len() as f64;
        Histogram::from_mass(acc.into_iter().map(|a| a / m).collect())
    }
}

impl AsRef<[f64]> for Histogram {
    fn as_ref(&self) -> &[f64] {
        &self.weights
    }
}

/// Symmetric nonnegative `n x n` ground cost, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    entries: Vec<f64>,
    inf_norm: f64,
}

impl CostMatrix {
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        if n == 0 || entries.len() != n * n {
            return Err(Error::InvalidInput(format!(
                "cost matrix needs {} entries for n = {n}, got {}",
                n * n,
                entries.len()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let c = entries[i * n + j];
                if !c.is_finite() || c < 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "cost entry ({i},{j}) = {c} must be finite and nonnegative"
                    )));
                }
                if c != entries[j * n + i] {
                    return Err(Error::InvalidInput(format!(
                        "cost matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        let inf_norm = entries.iter().copied().fold(0.0, f64::max);
        Ok(Self { n, entries, inf_norm })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput("cost matrix rows must all have length n".into()));
        }
        Self::new(n, rows.concat())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Largest entry, `max_ij C_ij`.
    pub fn inf_norm(&self) -> f64 {
        self.inf_norm
    }

    /// Row-major vectorization `d[i*n + j] = C_ij`.
    pub fn to_vector(&self) -> CostVector {
        CostVector {
            d: self.entries.clone(),
            inf_norm: self.inf_norm,
        }
    }

    /// Multiply every entry by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.n, self.entries.iter().map(|c| c * factor).collect())
    }
}

/// Vectorized cost `d`, the linear objective of the plan-space formulation.
#[derive(Debug, Clone, PartialEq)]
pub struct CostVector {
    pub d: Vec<f64>,
    pub inf_norm: f64,
}

/// A coupling of two histograms with the marginals it was built for.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    n: usize,
    pi: Vec<f64>,
    pub row_marginal: Histogram,
    pub col_marginal: Histogram,
}

impl TransportPlan {
    pub fn new(n: usize, pi: Vec<f64>, row_marginal: Histogram, col_marginal: Histogram) -> Self {
        debug_assert_eq!(pi.len(), n * n);
        Self {
            n,
            pi,
            row_marginal,
            col_marginal,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pi[i * self.n + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.pi
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.pi.chunks(self.n).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for row in self.pi.chunks(self.n) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out
    }

    pub fn total_mass(&self) -> f64 {
        self.pi.iter().sum()
    }

    /// `||pi 1 - p||_1 + ||pi^T 1 - q||_1`.
    pub fn marginal_error(&self) -> f64 {
        let r: f64 = self
            .row_sums()
            .iter()
            .zip(self.row_marginal.weights())
            .map(|(a, b)| (a - b).abs())
            .sum();
        let c: f64 = self
            .col_sums()
            .iter()
            .zip(self.col_marginal.weights())
            .map(|(a, b)| (a - b).abs())
            .sum();
        r + c
    }

    pub fn cost(&self, c: &CostMatrix) -> f64 {
        self.pi.iter().zip(c.entries()).map(|(p, c)| p * c).sum()
    }
}

/// `C_ij = |x_i - x_j|^exponent`.
pub fn cost_matrix_grid(support_points: &[f64], exponent: f64) -> Result<CostMatrix> {
    if support_points.is_empty() {
        return Err(Error::InvalidInput("support must be nonempty".into()));
    }
    if let Some(x) = support_points.iter().find(|x| !x.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite support point {x}")));
    }
    if !(exponent >= 1.0) || !exponent.is_finite() {
        return Err(Error::InvalidInput(format!("cost exponent {exponent} must be >= 1")));
    }
    let n = support_points.len();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let c = (support_points[i] - support_points[j]).abs().powf(exponent);
            entries[i * n + j] = c;
            entries[j * n + i] = c;
        }
    }
    CostMatrix::new(n, entries)
}

/// Squared-Euclidean cost between the points of a `width x height` pixel
/// grid, pixels enumerated row by row.
pub fn cost_matrix_pixels(width: usize, height: usize) -> Result<CostMatrix> {
    let n = width * height;
    if n == 0 {
        return Err(Error::InvalidInput("image grid must be nonempty".into()));
    }
    let mut entries = vec![0.0; n * n];
    for a in 0..n {
        let (ya, xa) = ((a / width) as f64, (a % width) as f64);
        for b in 0..n {
            let (yb, xb) = ((b / width) as f64, (b % width) as f64);
            entries[a * n + b] = (xa - xb).powi(2) + (ya - yb).powi(2);
        }
    }
    CostMatrix::new(n, entries)
}

/// Euclidean projection onto the simplex by sorting and thresholding.
pub fn project_simplex(w: &[f64]) -> Result<Histogram> {
    if w.is_empty() {
        return Err(Error::InvalidInput("cannot project an empty vector".into()));
    }
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("projection input must be finite".into()));
    }
    let sum: f64 = w.iter().sum();
    if w.iter().all(|v| *v >= 0.0) && (sum - 1.0).abs() <= SIMPLEX_TOL {
        return Histogram::new(w.to_vec());
    }

    let mut order: Vec<usize> = (0..w.len()).collect();
    // stable: equal values keep their original index order
    order.sort_by(|&a, &b| w[b].partial_cmp(&w[a]).expect("finite"));

    let mut cumsum = 0.0;
    let mut rho = 0;
    let mut rho_cumsum = 0.0;
    for (j, &idx) in order.iter().enumerate() {
        cumsum += w[idx];
        let rank = (j + 1) as f64;
        if w[idx] - (cumsum - 1.0) / rank > 0.0 {
            rho = j + 1;
            rho_cumsum = cumsum;
        }
    }
    let theta = (rho_cumsum - 1.0) / rho as f64;
    let projected: Vec<f64> = w.iter().map(|v| (v - theta).max(0.0)).collect();
    Histogram::from_mass(projected)
}

/// Generalized KL divergence `<p, log(p/q)> - 1^T (p - q)` with `0 log 0 = 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::InvalidInput("KL arguments differ in length".into()));
    }
    let mut total = 0.0;
    for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if !(qi > 0.0) {
            return Err(Error::Domain(format!("KL reference entry {i} is {qi}, must be > 0")));
        }
        if pi < 0.0 {
            return Err(Error::Domain(format!("KL argument entry {i} is negative")));
        }
        if pi > 0.0 {
            total += pi * (pi / qi).ln();
        }
        total -= pi - qi;
    }
    Ok(total)
}

/// Mix with the uniform vector: `(p + rho 1) / (1 + n rho)`.
pub fn smooth_to_interior(p: &Histogram, rho: f64) -> Result<Histogram> {
    let n = p.len() as f64;
    if !(rho > 0.0 && rho < 1.0 / n) {
        return Err(Error::InvalidInput(format!(
            "smoothing parameter {rho} must lie in (0, 1/n) = (0, {})",
            1.0 / n
        )));
    }
    let denom = 1.0 + n * rho;
    Histogram::new(p.weights().iter().map(|w| (w + rho) / denom).collect())
}

/// Bregman divergence of `d(p) = ||p||_a^2 / (2(a-1))` with
/// `a = 1 + 1/(2 log n)`, anchored at a reference histogram.
#[derive(Debug, Clone)]
pub struct BregmanPenalty {
    a: f64,
    reference: Histogram,
    reference_grad: Vec<f64>,
    reference_value: f64,
}

impl BregmanPenalty {
    pub fn new(reference: Histogram) -> Result<Self> {
        let n = reference.len();
        if n < 2 {
            return Err(Error::InvalidInput("Bregman penalty needs n >= 2".into()));
        }
        if let Some(i) = reference.weights().iter().position(|w| *w <= 0.0) {
            return Err(Error::Domain(format!(
                "penalty reference has zero entry {i}; its gradient is undefined"
            )));
        }
        let a = Self::exponent_for(n);
        let reference_grad = prox_gradient(reference.weights(), a);
        let reference_value = prox_value(reference.weights(), a);
        Ok(Self {
            a,
            reference,
            reference_grad,
            reference_value,
        })
    }

    pub fn exponent_for(n: usize) -> f64 {
        1.0 + 1.0 / (2.0 * (n as f64).ln())
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn reference(&self) -> &Histogram {
        &self.reference
    }

    pub fn prox(&self, p: &[f64]) -> f64 {
        prox_value(p, self.a)
    }

    pub fn prox_gradient(&self, p: &[f64]) -> Vec<f64> {
        prox_gradient(p, self.a)
    }

    pub fn reference_gradient(&self) -> &[f64] {
        &self.reference_grad
    }

    /// `B_d(p, p1) = d(p) - d(p1) - <grad d(p1), p - p1>`.
    pub fn value(&self, p: &[f64]) -> Result<f64> {
        if p.len() != self.reference.len() {
            return Err(Error::InvalidInput("penalty argument has wrong size".into()));
        }
        let lin: f64 = self
            .reference_grad
            .iter()
            .zip(p.iter().zip(self.reference.weights()))
            .map(|(g, (x, r))| g * (x - r))
            .sum();
        Ok(prox_value(p, self.a) - self.reference_value - lin)
    }

    /// `grad_p B_d(p, p1) = grad d(p) - grad d(p1)`.
    pub fn gradient(&self, p: &[f64]) -> Vec<f64> {
        prox_gradient(p, self.a)
            .into_iter()
            .zip(&self.reference_grad)
            .map(|(g, r)| g - r)
            .collect()
    }

    /// Modulus `mu` with `B_d(p, p1) >= mu/2 ||p - p1||_1^2` on the simplex:
    /// `(a-1)` strong convexity of `||.||_a^2 / 2` in the `a`-norm combined with
    /// `||x||_1 <= n^{1-1/a} ||x||_a`. Equals `n^{-2(a-1)/a}`, never below `1/e`.
    pub fn strong_convexity_modulus(&self) -> f64 {
        let n = self.reference.len() as f64;
        n.powf(-2.0 * (self.a - 1.0) / self.a)
    }
}

fn anorm(p: &[f64], a: f64) -> f64 {
    p.iter().map(|x| x.abs().powf(a)).sum::<f64>().powf(1.0 / a)
}

fn prox_value(p: &[f64], a: f64) -> f64 {
    let norm = anorm(p, a);
    norm * norm / (2.0 * (a - 1.0))
}

fn prox_gradient(p: &[f64], a: f64) -> Vec<f64> {
    let norm = anorm(p, a);
    let scale = norm.powf(2.0 - a) / (a - 1.0);
    p.iter()
        .map(|x| scale * x.signum() * x.abs().powf(a - 1.0))
        .collect()
}

/// Parse histograms: one per line, entries separated by whitespace and/or
/// commas. Blank lines and lines starting with `#` are skipped.
pub fn parse_histograms(text: &str) -> Result<Vec<Histogram>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let values = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>().map_err(|e| {
                    Error::InvalidInput(format!("line {}: cannot parse {s:?}: {e}", lineno + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let h = Histogram::new(values)
            .map_err(|e| Error::InvalidInput(format!("line {}: {e}", lineno + 1)))?;
        out.push(h);
    }
    Ok(out)
}

pub fn load_histograms(path: &Path) -> Result<Vec<Histogram>> {
    let text = std::fs::read_to_string(path)?;
    parse_histograms(&text)
}

pub fn format_histograms(hists: &[Histogram]) -> String {
    let mut out = String::new();
    for h in hists {
        let line: Vec<String> = h.weights().iter().map(|w| format!("{w:e}")).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    out
}
