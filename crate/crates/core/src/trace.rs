//! Per-iteration convergence records and their CSV form.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::Histogram;

pub const SA_COLUMNS: [&str; 4] = ["k", "objective_gap", "w2_to_reference", "wall_time_ms"];
pub const MIRROR_PROX_COLUMNS: [&str; 4] = ["k", "duality_gap", "w2_to_reference", "wall_time_ms"];
pub const DUAL_ACCEL_COLUMNS: [&str; 5] = ["k", "r_k", "objective", "feasibility_residual", "wall_time_ms"];
pub const DECENTRALIZED_COLUMNS: [&str; 7] = [
    "k",
    "objective",
    "consensus_gap_W",
    "consensus_gap_sqrtW",
    "messages_cum",
    "oracle_calls_cum",
    "wall_time_ms",
];

/// Rows of numbers under a fixed header, plus named scalar parameters of
/// the run (step sizes and the like) that do not belong in the CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterateTrace {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub params: BTreeMap<String, f64>,
}

impl IterateTrace {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            params: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "trace row width");
        if let Some(last) = self.rows.last() {
            debug_assert!(row[0] > last[0], "trace k must increase");
        }
        self.rows.push(row);
    }

    pub fn set_param(&mut self, name: &str, value: f64) {
        self.params.insert(name.to_string(), value);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn last(&self, name: &str) -> Option<f64> {
        self.column(name).and_then(|c| c.last().copied())
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format_cell(*v)).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// Parse a CSV produced by [`IterateTrace::to_csv`]. Parameters are not
    /// part of the CSV and come back empty.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidInput("empty trace CSV".into()))?;
        let columns: Vec<String> = header.split(',').map(str::to_string).collect();
        let mut rows = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let row = line
                .split(',')
                .map(|s| {
                    s.parse::<f64>().map_err(|e| {
                        Error::InvalidInput(format!("trace line {}: {s:?}: {e}", lineno + 2))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if row.len() != columns.len() {
                return Err(Error::InvalidInput(format!(
                    "trace line {} has {} cells, header has {}",
                    lineno + 2,
                    row.len(),
                    columns.len()
                )));
            }
            rows.push(row);
        }
        Ok(Self {
            columns,
            rows,
            params: BTreeMap::new(),
        })
    }
}

fn format_cell(v: f64) -> String {
    if v.is_finite() && v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:e}")
    }
}

/// Iteration indices at which a trace row is recorded: every `k <= 10`,
/// then roughly `per_decade` log-spaced points per decade, and always `N`.
#[derive(Debug, Clone)]
pub struct Checkpoints {
    ks: Vec<usize>,
    cursor: usize,
}

impl Checkpoints {
    pub fn log_spaced(n: usize, per_decade: usize) -> Self {
        let mut ks: Vec<usize> = (1..=n.min(10)).collect();
        let per_decade = per_decade.max(1) as f64;
        let mut j = per_decade;
        loop {
            let k = 10f64.powf(j / per_decade).round() as usize;
            if k > n {
                break;
            }
            ks.push(k);
            j += 1.0;
        }
        ks.push(n);
        ks.sort_unstable();
        ks.dedup();
        Self { ks, cursor: 0 }
    }

    pub fn every(n: usize) -> Self {
        Self {
            ks: (1..=n).collect(),
            cursor: 0,
        }
    }

    pub fn list(&self) -> &[usize] {
        &self.ks
    }

    /// True when `k` is a checkpoint. Calls must come with nondecreasing `k`.
    pub fn hit(&mut self, k: usize) -> bool {
        while self.cursor < self.ks.len() && self.ks[self.cursor] < k {
            self.cursor += 1;
        }
        self.cursor < self.ks.len() && self.ks[self.cursor] == k
    }
}

/// Elapsed milliseconds, or a constant zero when timing is off so that
/// traces stay byte-reproducible.
#[derive(Debug, Clone)]
pub struct Stopwatch {
    start: Option<Instant>,
}

impl Stopwatch {
    pub fn new(enabled: bool) -> Self {
        Self {
            start: enabled.then(Instant::now),
        }
    }

    pub fn elapsed_ms(&self) -> f64 {
        match self.start {
            Some(t) => t.elapsed().as_secs_f64() * 1e3,
            None => 0.0,
        }
    }
}

pub type HistogramMetric<'a> = Box<dyn Fn(&Histogram) -> Result<f64> + Send + Sync + 'a>;

/// What solvers report at checkpoints: an objective whose known (or
/// estimated) optimum is subtracted, and a distance to a reference measure.
/// Either may be absent, in which case the column holds NaN.
pub struct Monitor<'a> {
    pub objective: Option<HistogramMetric<'a>>,
    pub optimum: f64,
    pub distance: Option<HistogramMetric<'a>>,
    pub checkpoints: Checkpoints,
    pub clock: Stopwatch,
}

impl<'a> Monitor<'a> {
    pub fn new(n_iter: usize) -> Self {
        Self {
            objective: None,
            optimum: 0.0,
            distance: None,
            checkpoints: Checkpoints::log_spaced(n_iter, 20),
            clock: Stopwatch::new(false),
        }
    }

    pub fn with_objective(mut self, objective: HistogramMetric<'a>, optimum: f64) -> Self {
        self.objective = Some(objective);
        self.optimum = optimum;
        self
    }

    pub fn with_distance(mut self, distance: HistogramMetric<'a>) -> Self {
        self.distance = Some(distance);
        self
    }

    pub fn with_checkpoints(mut self, checkpoints: Checkpoints) -> Self {
        self.checkpoints = checkpoints;
        self
    }

    pub fn with_clock(mut self, clock: Stopwatch) -> Self {
        self.clock = clock;
        self
    }

    pub fn gap(&self, p: &Histogram) -> Result<f64> {
        match &self.objective {
            Some(f) => Ok(f(p)? - self.optimum),
            None => Ok(f64::NAN),
        }
    }

    pub fn dist(&self, p: &Histogram) -> Result<f64> {
        match &self.distance {
            Some(f) => f(p),
            None => Ok(f64::NAN),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoints_are_log_spaced_and_end_at_n() {
        let c = Checkpoints::log_spaced(10_000, 10);
        let ks = c.list();
        assert_eq!(ks[..10], [1, 2, 3, 4, 5, 6, 7, 8, 9, 10]);
        assert_eq!(*ks.last().unwrap(), 10_000);
        assert!(ks.windows(2).all(|w| w[0] < w[1]));
        assert!(ks.contains(&100) && ks.contains(&1000));
        let mut c = Checkpoints::log_spaced(50, 10);
        assert!(c.hit(1));
        assert!(!c.hit(11));
        assert!(c.hit(50));
    }

    #[test]
    fn csv_roundtrip() {
        let mut t = IterateTrace::new(&SA_COLUMNS);
        t.push(vec![1.0, 0.5, f64::NAN, 0.0]);
        t.push(vec![2.0, 1.25e-7, 3.0, 0.0]);
        let text = t.to_csv();
        assert!(text.starts_with("k,objective_gap,w2_to_reference,wall_time_ms\n"));
        let back = IterateTrace::from_csv(&text).unwrap();
        assert_eq!(back.columns, t.columns);
        assert_eq!(back.rows[1], t.rows[1]);
        assert!(back.rows[0][2].is_nan());
        assert_eq!(back.to_csv(), text);
    }

    #[test]
    fn disabled_clock_reads_zero() {
        assert_eq!(Stopwatch::new(false).elapsed_ms(), 0.0);
    }
}
