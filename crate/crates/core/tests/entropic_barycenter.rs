use barylab::decentralized::{decentralized_dual_wb, decentralized_mirror_prox_wb, DecentralizedRunConfig, OracleMode};
use barylab::measures::{cost_matrix_grid, project_simplex, CostMatrix, Histogram};
use barylab::network::Topology;
use barylab::numerics::dist2;
use barylab::ot::{sinkhorn, EntropicParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn instance(seed: u64, m: usize, n: usize) -> (Vec<Histogram>, CostMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let qs = (0..m)
        .map(|_| Histogram::from_mass((0..n).map(|_| rng.random_range(0.05..1.0)).collect()).unwrap())
        .collect();
    let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    (qs, cost_matrix_grid(&xs, 2.0).unwrap())
}

/// Projected gradient descent on `(1/m) sum_i W_gamma(p, q_i)`, gradients
/// from high-accuracy Sinkhorn potentials.
fn centralized_entropic_barycenter(qs: &[Histogram], c: &CostMatrix, gamma: f64) -> Vec<f64> {
    let n = c.n();
    let params = EntropicParams::new(gamma, 1e-13, 1_000_000).unwrap();
    let mut p = vec![1.0 / n as f64; n];
    let step = gamma / 4.0;
    for _ in 0..4000 {
        let h = Histogram::new(p.clone()).unwrap();
        let mut g = vec![0.0; n];
        for q in qs {
            let out = sinkhorn(&h, q, c, &params).unwrap();
            for (gl, ul) in g.iter_mut().zip(&out.potentials.u) {
                *gl += ul / qs.len() as f64;
            }
        }
        let next: Vec<f64> = p.iter().zip(&g).map(|(a, b)| a - step * b).collect();
        p = project_simplex(&next).unwrap().into_weights();
    }
    p
}

#[test]
fn dual_matches_centralized_entropic_barycenter() {
    let (qs, c) = instance(11, 3, 5);
    let gamma = 0.1;
    let oracle = centralized_entropic_barycenter(&qs, &c, gamma);
    for (mode, n_iter, eps) in [(OracleMode::Full, 3000, 0.1), (OracleMode::Sampled, 500, 1.0)] {
        let mut cfg = DecentralizedRunConfig::new(Topology::complete(3).unwrap(), eps);
        cfg.gamma = gamma;
        cfg.oracle = mode;
        cfg.n_iter = Some(n_iter);
        cfg.seed = 5;
        let out = decentralized_dual_wb(&qs, &c, &cfg).unwrap();
        let d = dist2(out.mean.weights(), &oracle);
        assert!(d <= 5e-2, "{mode:?}: {d}");
    }
}

#[test]
fn mirror_prox_gap_decays_like_one_over_k() {
    let (qs, c) = instance(12, 4, 8);
    let mut cfg = DecentralizedRunConfig::new(Topology::cycle(4).unwrap(), 0.1);
    cfg.n_iter = Some(10_000);
    let out = decentralized_mirror_prox_wb(&qs, &c, &cfg).unwrap();
    let ks = out.run.trace.column("k").unwrap();
    let gaps = out.run.trace.column("objective").unwrap();
    let (xs, ys): (Vec<f64>, Vec<f64>) = ks.iter().zip(&gaps).filter(|(k, _)| **k >= 1e3).map(|(k, g)| (*k, *g)).unzip();
    let slope = barylab::numerics::loglog_slope(&xs, &ys);
    eprintln!("slope {slope} gaps {:?}", ys);
    assert!((-1.3..=-0.7).contains(&slope), "slope {slope}");
    assert!(gaps.iter().all(|g| *g >= -1e-12));
}

#[test]
fn centralized_dual_matches_the_same_oracle() {
    use barylab::dual_accel::{accelerated_dual_solve, BatchSchedule, DualProblem, WbConsensusDual};
    use barylab::trace::Stopwatch;
    let (qs, c) = instance(11, 3, 5);
    let gamma = 0.1;
    let oracle = centralized_entropic_barycenter(&qs, &c, gamma);
    let problem = WbConsensusDual {
        measures: &qs,
        c: &c,
        gamma,
        sampled: false,
        objective_params: EntropicParams::new(gamma, 1e-10, 100_000).unwrap(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let out = accelerated_dual_solve(&problem, &BatchSchedule::deterministic(1500), &mut rng, Stopwatch::new(false)).unwrap();
    for block in out.primal.chunks(5) {
        assert!(dist2(block, &oracle) <= 5e-2);
        assert!((block.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
    assert!(problem.feasibility_residual(&out.primal) <= 1e-3);
    let target = problem.primal_objective(&oracle.repeat(3)).unwrap();
    let last = out.trace.last("objective").unwrap();
    assert!((last - target).abs() <= 1e-3, "{last} vs {target}");
}
