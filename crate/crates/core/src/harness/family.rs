//! Synthetic truncated-Gaussian families, their closed-form barycenter, and
//! the 1-D 2-Wasserstein distance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::Histogram;
use crate::numerics::softmax_in_place;

/// Equally spaced support `min, ..., max` with `size` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub size: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            min: -10.0,
            max: 10.0,
            size: 100,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.size < 2 {
            return Err(Error::InvalidInput(format!("grid size {} must be >= 2", self.size)));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(Error::InvalidInput(format!(
                "grid range [{}, {}] must be finite with min < max",
                self.min, self.max
            )));
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        let step = (self.max - self.min) / (self.size - 1) as f64;
        (0..self.size)
            .map(|i| if i + 1 == self.size { self.max } else { self.min + step * i as f64 })
            .collect()
    }
}

fn default_mean_range() -> [f64; 2] {
    [-5.0, 5.0]
}

fn default_std_range() -> [f64; 2] {
    [0.8, 1.8]
}

/// `count` Gaussians with means and standard deviations drawn uniformly
/// from the given ranges. The ranges are read as standard deviations; a
/// variance range has to be converted by the caller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianFamilySpec {
    pub count: usize,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "default_mean_range")]
    pub mean_range: [f64; 2],
    #[serde(default = "default_std_range")]
    pub std_range: [f64; 2],
    #[serde(default)]
    pub seed: u64,
}

impl GaussianFamilySpec {
    pub fn new(count: usize, seed: u64) -> Self {
        Self {
            count,
            grid: GridSpec::default(),
            mean_range: default_mean_range(),
            std_range: default_std_range(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidInput("count must be >= 1".into()));
        }
        self.grid.validate()?;
        for (name, [lo, hi]) in [("mean_range", self.mean_range), ("std_range", self.std_range)] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidInput(format!("{name} [{lo}, {hi}] is empty or not finite")));
            }
        }
        if !(self.std_range[0] > 0.0) {
            return Err(Error::InvalidInput(format!(
                "std_range starts at {}; standard deviations must be > 0",
                self.std_range[0]
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub mean: f64,
    pub std: f64,
}

/// What was drawn, enough to rebuild the family and its barycenter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianFamily {
    pub grid: GridSpec,
    pub params: Vec<GaussianParams>,
    pub seed: u64,
}

/// The density of `N(mean, std^2)` on `points`, truncated to them and
/// renormalized. Normalization runs in log space, so a mean far outside the
/// grid still gives a valid histogram.
pub fn discretized_gaussian(points: &[f64], mean: f64, std: f64) -> Result<Histogram> {
    if !(std > 0.0 && std.is_finite()) {
        return Err(Error::InvalidInput(format!("degenerate standard deviation {std}")));
    }
    if !mean.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite mean {mean}")));
    }
    let mut w: Vec<f64> = points
        .iter()
        .map(|x| -(x - mean) * (x - mean) / (2.0 * std * std))
        .collect();
    softmax_in_place(&mut w);
    Histogram::new(w)
}

fn draw(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

pub fn gen_gaussian_histograms(spec: &GaussianFamilySpec) -> Result<(Vec<Histogram>, GaussianFamily)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let params: Vec<GaussianParams> = (0..spec.count)
        .map(|_| {
            let mean = draw(&mut rng, spec.mean_range);
            let std = draw(&mut rng, spec.std_range);
            GaussianParams { mean, std }
        })
        .collect();
    let family = GaussianFamily {
        grid: spec.grid,
        params,
        seed: spec.seed,
    };
    Ok((family_histograms(&family)?, family))
}

pub fn family_histograms(family: &GaussianFamily) -> Result<Vec<Histogram>> {
    let points = family.grid.points();
    family
        .params
        .iter()
        .map(|g| discretized_gaussian(&points, g.mean, g.std))
        .collect()
}

/// In 1-D the W2 barycenter of `N(mu_i, s_i^2)` with equal weights is
/// `N(mean mu_i, (mean s_i)^2)`; discretized on the family's grid.
pub fn true_gaussian_barycenter(family: &GaussianFamily) -> Result<Histogram> {
    if family.params.is_empty() {
        return Err(Error::InvalidInput("empty family".into()));
    }
    let m = family.params.len() as f64;
    let mean = family.params.iter().map(|g| g.mean).sum::<f64>() / m;
    let std = family.params.iter().map(|g| g.std).sum::<f64>() / m;
    discretized_gaussian(&family.grid.points(), mean, std)
}

/// `W2(p, q)` on a sorted 1-D support via the monotone (quantile) coupling.
pub fn w2_distance_1d(p: &Histogram, q: &Histogram, support: &[f64]) -> Result<f64> {
    let n = support.len();
    if p.len() != n || q.len() != n {
        return Err(Error::InvalidInput(format!(
            "histograms of sizes {} and {} on a support of {n} points",
            p.len(),
            q.len()
        )));
    }
    if support.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidInput("support must be strictly increasing".into()));
    }
    let (pw, qw) = (p.weights(), q.weights());
    let (mut i, mut j) = (0, 0);
    let (mut a, mut b) = (pw[0], qw[0]);
    let mut total = 0.0;
    while i < n && j < n {
        let t = a.min(b);
        let d = support[i] - support[j];
        total += t * d * d;
        let (next_i, next_j) = (a <= b, b <= a);
        a -= t;
        b -= t;
        if next_i {
            i += 1;
            a = pw.get(i).copied().unwrap_or(0.0);
        }
        if next_j {
            j += 1;
            b = qw.get(j).copied().unwrap_or(0.0);
        }
    }
    Ok(total.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::cost_matrix_grid;
    use crate::ot::exact_ot;

    fn random_hist(rng: &mut ChaCha8Rng, n: usize) -> Histogram {
        Histogram::from_mass((0..n).map(|_| rng.random::<f64>()).collect()).unwrap()
    }

    #[test]
    fn family_is_normalized_and_deterministic() {
        let spec = GaussianFamilySpec::new(10, 42);
        let (a, fa) = gen_gaussian_histograms(&spec).unwrap();
        let (b, fb) = gen_gaussian_histograms(&spec).unwrap();
        assert_eq!(fa, fb);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.weights(), y.weights());
            assert!((x.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
        for g in &fa.params {
            assert!((-5.0..=5.0).contains(&g.mean) && (0.8..=1.8).contains(&g.std));
        }
        let (c, _) = gen_gaussian_histograms(&GaussianFamilySpec::new(10, 43)).unwrap();
        assert_ne!(a[0].weights(), c[0].weights());
    }

    #[test]
    fn standard_gaussian_peaks_nearest_zero() {
        let mut spec = GaussianFamilySpec::new(1, 0);
        spec.mean_range = [0.0, 0.0];
        spec.std_range = [1.0, 1.0];
        let (h, _) = gen_gaussian_histograms(&spec).unwrap();
        let pts = spec.grid.points();
        let argmax = (0..pts.len())
            .max_by(|&i, &j| h[0].weights()[i].total_cmp(&h[0].weights()[j]))
            .unwrap();
        let nearest = pts.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
        assert!((pts[argmax].abs() - nearest).abs() <= 1e-12);
    }

    #[test]
    fn nonpositive_std_is_rejected() {
        let mut spec = GaussianFamilySpec::new(3, 0);
        spec.std_range = [0.0, 1.0];
        assert!(matches!(gen_gaussian_histograms(&spec), Err(Error::InvalidInput(_))));
        spec.std_range = [-1.0, -0.5];
        assert!(gen_gaussian_histograms(&spec).is_err());
        spec.std_range = [1.0, 0.5];
        assert!(gen_gaussian_histograms(&spec).is_err());
        assert!(discretized_gaussian(&[0.0, 1.0], 0.0, 0.0).is_err());
    }

    #[test]
    fn barycenter_of_shifted_pair_is_centered() {
        let grid = GridSpec::default();
        let family = GaussianFamily {
            grid,
            params: vec![GaussianParams { mean: -1.0, std: 1.0 }, GaussianParams { mean: 1.0, std: 1.0 }],
            seed: 0,
        };
        let bar = true_gaussian_barycenter(&family).unwrap();
        let expect = discretized_gaussian(&grid.points(), 0.0, 1.0).unwrap();
        assert_eq!(bar, expect);
        let same = GaussianFamily {
            grid,
            params: vec![GaussianParams { mean: 0.7, std: 1.3 }; 4],
            seed: 0,
        };
        let bar = true_gaussian_barycenter(&same).unwrap();
        assert_eq!(bar, family_histograms(&same).unwrap()[0]);
        assert!((bar.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn w2_basic_cases() {
        let pts = [-1.0, 0.0, 0.5, 2.0, 3.5];
        let p = Histogram::new(vec![0.1, 0.2, 0.3, 0.25, 0.15]).unwrap();
        assert_eq!(w2_distance_1d(&p, &p, &pts).unwrap(), 0.0);
        let a = Histogram::point_mass(5, 1);
        let b = Histogram::point_mass(5, 4);
        assert!((w2_distance_1d(&a, &b, &pts).unwrap() - 3.5).abs() <= 1e-15);
        assert!(w2_distance_1d(&a, &Histogram::uniform(4), &pts).is_err());
        assert!(w2_distance_1d(&a, &b, &[0.0, 1.0, 1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn w2_matches_exact_ot_on_small_grids() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let mut pts: Vec<f64> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
            pts.sort_by(f64::total_cmp);
            let (p, q) = (random_hist(&mut rng, 6), random_hist(&mut rng, 6));
            let c = cost_matrix_grid(&pts, 2.0).unwrap();
            let exact = exact_ot(&p, &q, &c).unwrap().value.sqrt();
            let w = w2_distance_1d(&p, &q, &pts).unwrap();
            assert!((w - exact).abs() <= 1e-8, "{w} vs {exact}");
        }
    }

    #[test]
    fn w2_handles_zero_entries() {
        let pts = [0.0, 1.0, 2.0, 3.0];
        let p = Histogram::new(vec![0.0, 0.5, 0.0, 0.5]).unwrap();
        let q = Histogram::new(vec![0.5, 0.0, 0.5, 0.0]).unwrap();
        assert!((w2_distance_1d(&p, &q, &pts).unwrap() - 1.0).abs() <= 1e-15);
    }
}
