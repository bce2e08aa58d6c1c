//! Transportation simplex on the dense `n x n` tableau.

use std::collections::VecDeque;

use super::{DualPotentials, OTSolution};
use crate::error::{Error, Result};
use crate::measures::{CostMatrix, Histogram, TransportPlan};

const MAX_PIVOTS_PER_CELL: usize = 50;

struct Basis {
    n: usize,
    cells: Vec<(usize, usize)>,
    values: Vec<f64>,
}

impl Basis {
    /// Northwest-corner start. On simultaneous exhaustion of a row and a
    /// column the row advances, leaving a zero cell so the basis stays a
    /// spanning tree with `2n - 1` cells.
    fn northwest(p: &[f64], q: &[f64]) -> Self {
        let n = p.len();
        let mut supply = p.to_vec();
        let mut demand = q.to_vec();
        let mut cells = Vec::with_capacity(2 * n - 1);
        let mut values = Vec::with_capacity(2 * n - 1);
        let (mut i, mut j) = (0, 0);
        loop {
            let x = if i == n - 1 {
                demand[j]
            } else if j == n - 1 {
                supply[i]
            } else {
                supply[i].min(demand[j])
            };
            let x = x.max(0.0);
            cells.push((i, j));
            values.push(x);
            supply[i] -= x;
            demand[j] -= x;
            if i == n - 1 && j == n - 1 {
                break;
            }
            if i == n - 1 {
                j += 1;
            } else if j == n - 1 || supply[i] <= demand[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
        Self { n, cells, values }
    }

    /// Adjacency of the bipartite tree: nodes `0..n` are rows, `n..2n` columns.
    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let n = self.n;
        let mut adj = vec![Vec::new(); 2 * n];
        for (k, &(i, j)) in self.cells.iter().enumerate() {
            adj[i].push((n + j, k));
            adj[n + j].push((i, k));
        }
        adj
    }

    fn potentials(&self, c: &CostMatrix, adj: &[Vec<(usize, usize)>]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let mut pot = vec![f64::NAN; 2 * n];
        pot[0] = 0.0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(node) = queue.pop_front() {
            for &(next, k) in &adj[node] {
                if pot[next].is_nan() {
                    let (i, j) = self.cells[k];
                    pot[next] = c.get(i, j) - pot[node];
                    queue.push_back(next);
                }
            }
        }
        (pot[..n].to_vec(), pot[n..].to_vec())
    }

    /// Cells on the tree path from row `i` to column `j`, in order.
    fn path(&self, adj: &[Vec<(usize, usize)>], i: usize, j: usize) -> Vec<usize> {
        let n = self.n;
        let target = n + j;
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; 2 * n];
        let mut seen = vec![false; 2 * n];
        seen[i] = true;
        let mut queue = VecDeque::from([i]);
        while let Some(node) = queue.pop_front() {
            if node == target {
                break;
            }
            for &(next, k) in &adj[node] {
                if !seen[next] {
                    seen[next] = true;
                    parent[next] = Some((node, k));
                    queue.push_back(next);
                }
            }
        }
        let mut cells = Vec::new();
        let mut node = target;
        while node != i {
            let (prev, k) = parent[node].expect("basis is a spanning tree");
            cells.push(k);
            node = prev;
        }
        cells.reverse();
        cells
    }
}

/// Exact optimal transport by the transportation simplex with Bland's rule.
/// Potentials come from the final basis and are shifted so that `<u,1> = 0`.
pub fn exact_ot(p: &Histogram, q: &Histogram, c: &CostMatrix) -> Result<OTSolution> {
    let n = p.len();
    if q.len() != n || c.n() != n {
        return Err(Error::InvalidInput(format!(
            "sizes disagree: p has {}, q has {}, cost is {}x{}",
            p.len(),
            q.len(),
            c.n(),
            c.n()
        )));
    }
    let tol = 1e-12 * c.inf_norm().max(1.0);
    let mut basis = Basis::northwest(p.weights(), q.weights());
    let mut in_basis = vec![false; n * n];
    for &(i, j) in &basis.cells {
        in_basis[i * n + j] = true;
    }

    let max_pivots = MAX_PIVOTS_PER_CELL * n * n + 100;
    let mut pivots = 0;
    let (u, v) = loop {
        let adj = basis.adjacency();
        let (u, v) = basis.potentials(c, &adj);
        // Bland: first improving cell in row-major order
        let entering = (0..n * n).find(|&idx| {
            !in_basis[idx] && c.get(idx / n, idx % n) - u[idx / n] - v[idx % n] < -tol
        });
        let Some(idx) = entering else {
            break (u, v);
        };
        if pivots >= max_pivots {
            return Err(Error::Numeric(format!(
                "transportation simplex exceeded {max_pivots} pivots"
            )));
        }
        pivots += 1;
        let (ei, ej) = (idx / n, idx % n);
        let path = basis.path(&adj, ei, ej);
        // path cells alternate -, +, -, ... starting next to the entering cell
        let mut leave: Option<usize> = None;
        for &k in path.iter().step_by(2) {
            leave = match leave {
                None => Some(k),
                Some(l) => {
                    let (li, lj) = basis.cells[l];
                    let (ki, kj) = basis.cells[k];
                    let (vl, vk) = (basis.values[l], basis.values[k]);
                    if vk < vl || (vk == vl && ki * n + kj < li * n + lj) {
                        Some(k)
                    } else {
                        Some(l)
                    }
                }
            };
        }
        let leave = leave.expect("cycle has a decreasing cell");
        let theta = basis.values[leave];
        for (pos, &k) in path.iter().enumerate() {
            if pos % 2 == 0 {
                basis.values[k] -= theta;
            } else {
                basis.values[k] += theta;
            }
        }
        let (li, lj) = basis.cells[leave];
        in_basis[li * n + lj] = false;
        in_basis[idx] = true;
        basis.cells[leave] = (ei, ej);
        basis.values[leave] = theta;
    };

    let mut pi = vec![0.0; n * n];
    for (&(i, j), &x) in basis.cells.iter().zip(&basis.values) {
        pi[i * n + j] = x.max(0.0);
    }
    let plan = TransportPlan::new(n, pi, p.clone(), q.clone());
    let value = plan.cost(c);
    let marginal_error = plan.marginal_error();

    let mut u = u;
    let shift = crate::numerics::center(&mut u);
    let v: Vec<f64> = v.into_iter().map(|x| x + shift).collect();

    Ok(OTSolution {
        value,
        plan,
        potentials: DualPotentials { u, v },
        marginal_error,
        iterations: pivots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::cost_matrix_grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hist(rng: &mut ChaCha8Rng, n: usize) -> Histogram {
        Histogram::from_mass((0..n).map(|_| rng.random_range(0.01..1.0)).collect()).unwrap()
    }

    fn random_cost(rng: &mut ChaCha8Rng, n: usize) -> CostMatrix {
        let mut e = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let c = if i == j { 0.0 } else { rng.random_range(0.0..5.0) };
                e[i * n + j] = c;
                e[j * n + i] = c;
            }
        }
        CostMatrix::new(n, e).unwrap()
    }

    #[test]
    fn identity_coupling() {
        let p = Histogram::new(vec![0.2, 0.3, 0.5]).unwrap();
        let c = cost_matrix_grid(&[0.0, 1.0, 2.0], 2.0).unwrap();
        let sol = exact_ot(&p, &p, &c).unwrap();
        assert!(sol.value.abs() < 1e-15);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { p.weights()[i] } else { 0.0 };
                assert!((sol.plan.get(i, j) - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn only_feasible_plan() {
        let p = Histogram::point_mass(2, 0);
        let q = Histogram::point_mass(2, 1);
        let c = cost_matrix_grid(&[0.0, 1.0], 2.0).unwrap();
        let sol = exact_ot(&p, &q, &c).unwrap();
        assert_eq!(sol.value, 1.0);
        assert_eq!(sol.plan.get(0, 1), 1.0);
    }

    #[test]
    fn duality_and_feasibility_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..200 {
            let n = rng.random_range(2..12);
            let p = random_hist(&mut rng, n);
            let q = random_hist(&mut rng, n);
            let c = random_cost(&mut rng, n);
            let sol = exact_ot(&p, &q, &c).unwrap();
            let DualPotentials { u, v } = &sol.potentials;
            assert!(crate::numerics::mean(u).abs() < 1e-12);
            for i in 0..n {
                for j in 0..n {
                    assert!(u[i] + v[j] <= c.get(i, j) + 1e-9);
                }
            }
            let dual = sol.potentials.dual_objective(p.weights(), q.weights());
            assert!((dual - sol.value).abs() < 1e-8, "gap {}", dual - sol.value);
            assert!(sol.marginal_error < 1e-12);
            assert!(sol.plan.entries().iter().all(|x| *x >= 0.0));
        }
    }

    #[test]
    fn symmetric_in_arguments() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let n = rng.random_range(2..8);
            let p = random_hist(&mut rng, n);
            let q = random_hist(&mut rng, n);
            let c = random_cost(&mut rng, n);
            let a = exact_ot(&p, &q, &c).unwrap().value;
            let b = exact_ot(&q, &p, &c).unwrap().value;
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn degenerate_marginals_with_zeros() {
        let p = Histogram::new(vec![0.5, 0.0, 0.5, 0.0]).unwrap();
        let q = Histogram::new(vec![0.0, 0.5, 0.0, 0.5]).unwrap();
        let c = cost_matrix_grid(&[0.0, 1.0, 2.0, 3.0], 1.0).unwrap();
        let sol = exact_ot(&p, &q, &c).unwrap();
        assert!((sol.value - 1.0).abs() < 1e-12);
        let dual = sol.potentials.dual_objective(p.weights(), q.weights());
        assert!((dual - 1.0).abs() < 1e-10);
    }

    #[test]
    fn size_mismatch_rejected() {
        let c = cost_matrix_grid(&[0.0, 1.0], 2.0).unwrap();
        assert!(exact_ot(&Histogram::uniform(3), &Histogram::uniform(2), &c).is_err());
    }
}
