use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use barylab::harness::{exit_code, gen_gaussian_histograms, run_experiment, true_gaussian_barycenter, GaussianFamilySpec};
use barylab::measures::{cost_matrix_grid, cost_matrix_pixels, format_histograms, load_histograms, CostMatrix};
use barylab::ot::exact_ot;
use barylab::{Error, Result};

#[derive(Parser)]
#[command(name = "barylab", version, about = "Wasserstein barycenter experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a truncated-Gaussian family, one histogram per line; family
    /// metadata goes to stdout as JSON.
    GenGaussians {
        #[arg(long)]
        spec: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run every solver of an experiment config into an output directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Exact OT between the first histogram of each file.
    ExactOt {
        #[arg(long)]
        p: PathBuf,
        #[arg(long)]
        q: PathBuf,
        /// `gridE` (points 0..n-1, cost |i-j|^E), `gridE:min:max`,
        /// `pixels:WxH`, or `file:PATH` with one matrix row per line.
        #[arg(long, default_value = "grid2")]
        cost: String,
    },
}

fn parse_cost(spec: &str, n: usize) -> Result<CostMatrix> {
    let bad = || Error::Config(format!("cannot parse cost {spec:?}; expected gridE, gridE:min:max, pixels:WxH or file:PATH"));
    if let Some(path) = spec.strip_prefix("file:") {
        let text = std::fs::read_to_string(path)?;
        let rows = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                l.split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<f64>().map_err(|e| Error::Config(format!("{path}: {e}"))))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        return CostMatrix::from_rows(&rows);
    }
    if let Some(dims) = spec.strip_prefix("pixels:") {
        let (w, h) = dims.split_once('x').ok_or_else(bad)?;
        let (w, h): (usize, usize) = (w.parse().map_err(|_| bad())?, h.parse().map_err(|_| bad())?);
        return cost_matrix_pixels(w, h);
    }
    let rest = spec.strip_prefix("grid").ok_or_else(bad)?;
    let mut parts = rest.split(':');
    let exponent: f64 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
    let points: Vec<f64> = match (parts.next(), parts.next(), parts.next()) {
        (None, _, _) => (0..n).map(|i| i as f64).collect(),
        (Some(lo), Some(hi), None) => {
            let (lo, hi): (f64, f64) = (lo.parse().map_err(|_| bad())?, hi.parse().map_err(|_| bad())?);
            let step = if n > 1 { (hi - lo) / (n - 1) as f64 } else { 0.0 };
            (0..n).map(|i| lo + step * i as f64).collect()
        }
        _ => return Err(bad()),
    };
    cost_matrix_grid(&points, exponent)
}

fn first_histogram(path: &Path) -> Result<barylab::measures::Histogram> {
    load_histograms(path)?
        .into_iter()
        .next()
        .ok_or_else(|| Error::InvalidInput(format!("{} holds no histogram", path.display())))
}

fn gen_gaussians(spec: &Path, output: &Path) -> Result<()> {
    let text = std::fs::read_to_string(spec)?;
    let spec: GaussianFamilySpec = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
    let (hists, family) = gen_gaussian_histograms(&spec)?;
    std::fs::write(output, format_histograms(&hists))?;
    let bar = true_gaussian_barycenter(&family)?;
    let meta = serde_json::json!({ "family": family, "true_barycenter": bar });
    emit(&meta)
}

fn exact(p: &Path, q: &Path, cost: &str) -> Result<()> {
    let (p, q) = (first_histogram(p)?, first_histogram(q)?);
    if p.len() != q.len() {
        return Err(Error::InvalidInput(format!("histogram sizes differ: {} vs {}", p.len(), q.len())));
    }
    let c = parse_cost(cost, p.len())?;
    let sol = exact_ot(&p, &q, &c)?;
    let plan: Vec<&[f64]> = sol.plan.entries().chunks(c.n()).collect();
    let out = serde_json::json!({
        "value": sol.value,
        "marginal_error": sol.marginal_error,
        "iterations": sol.iterations,
        "u": sol.potentials.u,
        "v": sol.potentials.v,
        "plan": plan,
    });
    emit(&out)
}

/// Pretty JSON to stdout; a closed pipe is not an error.
fn emit(value: &serde_json::Value) -> Result<()> {
    let mut out = std::io::stdout().lock();
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(out, "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("BARYLAB_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn code_for(e: &Error) -> u8 {
    if e.is_convergence_failure() {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    configure_threads();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenGaussians { spec, output } => gen_gaussians(&spec, &output),
        Command::ExactOt { p, q, cost } => exact(&p, &q, &cost),
        Command::Run { config, output } => {
            let res = run_experiment(&config, &output);
            let code = exit_code(&res);
            match &res {
                Ok(report) => {
                    for r in &report.runs {
                        match &r.error {
                            None => eprintln!("{}: ok", r.label),
                            Some(e) => eprintln!("{}: {e}", r.label),
                        }
                    }
                }
                Err(e) => eprintln!("error: {e}"),
            }
            return ExitCode::from(code as u8);
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(code_for(&e))
        }
    }
}
