//! Exact discrete optimal transport: assignment solvers for equal-size
//! uniform supports (exhaustive search up to 8 atoms, an O(n^3) shortest
//! augmenting path method above) and a transportation simplex for general
//! simplex-weighted supports.

use nalgebra::{DMatrix, DVector};

use crate::designs::TransportCost;

/// Atom count up to which the assignment problem is solved by exhaustive
/// subset search.
pub const EXHAUSTIVE_LIMIT: usize = 8;

/// Ground cost between two atoms.
pub fn pairwise_cost(cost: &TransportCost, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    match cost {
        TransportCost::EuclideanNorm | TransportCost::Frobenius => (x - y).norm(),
        TransportCost::Mahalanobis(l) => {
            let d = x - y;
            0.5 * (d.transpose() * l * &d)[(0, 0)]
        }
    }
}

/// Minimum-cost perfect assignment on a square cost matrix.
///
/// Dispatches to exhaustive search for small supports and to the
/// polynomial method above [`EXHAUSTIVE_LIMIT`].
pub fn min_cost_assignment(cost: &DMatrix<f64>) -> (Vec<usize>, f64) {
    assert_eq!(cost.nrows(), cost.ncols(), "assignment needs a square matrix");
    if cost.nrows() <= EXHAUSTIVE_LIMIT {
        assignment_exhaustive(cost)
    } else {
        assignment_hungarian(cost)
    }
}

/// Exhaustive assignment by dynamic programming over column subsets.
pub fn assignment_exhaustive(cost: &DMatrix<f64>) -> (Vec<usize>, f64) {
    let n = cost.nrows();
    let full = 1usize << n;
    let mut dp = vec![f64::INFINITY; full];
    let mut chosen = vec![usize::MAX; full];
    dp[0] = 0.0;
    for mask in 0..full {
        if !dp[mask].is_finite() {
            continue;
        }
        let row = mask.count_ones() as usize;
        if row == n {
            continue;
        }
        for col in 0..n {
            if mask & (1 << col) != 0 {
                continue;
            }
            let next = mask | (1 << col);
            let cand = dp[mask] + cost[(row, col)];
            if cand < dp[next] {
                dp[next] = cand;
                chosen[next] = col;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    let mut mask = full - 1;
    while mask != 0 {
        let row = mask.count_ones() as usize - 1;
        let col = chosen[mask];
        assignment[row] = col;
        mask &= !(1 << col);
    }
    (assignment, dp[full - 1])
}

/// Shortest-augmenting-path assignment with potentials, O(n^3).
pub fn assignment_hungarian(cost: &DMatrix<f64>) -> (Vec<usize>, f64) {
    let n = cost.nrows();
    let mut u = vec![0.0_f64; n + 1];
    let mut v = vec![0.0_f64; n + 1];
    let mut matched_row = vec![0usize; n + 1]; // matched_row[j]: row assigned to column j, 1-based
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if matched_row[j] > 0 {
            assignment[matched_row[j] - 1] = j - 1;
        }
    }
    let total = assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| cost[(i, j)])
        .sum();
    (assignment, total)
}

/// Optimal plan of the balanced transportation problem.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    pub cost: f64,
    /// Basic cells `(source, target, flow)`; flows are nonnegative.
    pub flows: Vec<(usize, usize, f64)>,
    /// Row potentials at termination.
    pub u: Vec<f64>,
    /// Column potentials at termination.
    pub v: Vec<f64>,
}

/// Transportation simplex on a balanced problem (both weight vectors are
/// positive and sum to the same total within 1e-9).
///
/// Northwest-corner start, most-negative entering rule, deterministic
/// leaving tie-break.
pub fn transport_simplex(supply: &[f64], demand: &[f64], cost: &DMatrix<f64>) -> TransportPlan {
    let m = supply.len();
    let n = demand.len();
    assert!(m > 0 && n > 0, "empty marginals");
    assert_eq!(cost.nrows(), m);
    assert_eq!(cost.ncols(), n);
    debug_assert!(
        (supply.iter().sum::<f64>() - demand.iter().sum::<f64>()).abs() <= 1e-9,
        "unbalanced marginals"
    );

    // Northwest-corner initialization: m + n - 1 basic cells, possibly with
    // zero flow on degenerate steps.
    let mut remaining_supply = supply.to_vec();
    let mut remaining_demand = demand.to_vec();
    let mut basis: Vec<(usize, usize, f64)> = Vec::with_capacity(m + n - 1);
    let (mut i, mut j) = (0usize, 0usize);
    loop {
        let f = remaining_supply[i].min(remaining_demand[j]).max(0.0);
        basis.push((i, j, f));
        remaining_supply[i] -= f;
        remaining_demand[j] -= f;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if remaining_supply[i] <= 1e-15 && i < m - 1 {
            i += 1;
        } else {
            j += 1;
        }
    }

    let scale = cost.iter().fold(1.0_f64, |acc, &c| acc.max(c.abs()));
    let enter_tol = 1e-11 * scale;
    let max_pivots = 1000 * (m + n);

    for _pivot in 0..max_pivots {
        let (u, v) = potentials(&basis, cost, m, n);
        // Most negative reduced cost among nonbasic cells.
        let mut best = -enter_tol;
        let mut entering = None;
        let in_basis: std::collections::HashSet<(usize, usize)> =
            basis.iter().map(|&(r, c, _)| (r, c)).collect();
        for r in 0..m {
            for c in 0..n {
                if in_basis.contains(&(r, c)) {
                    continue;
                }
                let rc = cost[(r, c)] - u[r] - v[c];
                if rc < best {
                    best = rc;
                    entering = Some((r, c));
                }
            }
        }
        let Some((er, ec)) = entering else {
            break;
        };

        // Unique cycle: path from the entering column back to the entering
        // row through the basis tree; edges alternate -,+,-,...
        let path = tree_path(&basis, m, n, er, ec);
        let mut theta = f64::INFINITY;
        let mut leaving = usize::MAX;
        for (k, &cell_idx) in path.iter().enumerate() {
            if k % 2 == 0 {
                let flow = basis[cell_idx].2;
                if flow < theta {
                    theta = flow;
                    leaving = cell_idx;
                }
            }
        }
        for (k, &cell_idx) in path.iter().enumerate() {
            if k % 2 == 0 {
                basis[cell_idx].2 -= theta;
            } else {
                basis[cell_idx].2 += theta;
            }
        }
        basis[leaving] = (er, ec, theta);
    }

    let (u, v) = potentials(&basis, cost, m, n);
    let total = basis.iter().map(|&(r, c, f)| f * cost[(r, c)]).sum();
    TransportPlan {
        cost: total,
        flows: basis,
        u,
        v,
    }
}

/// Solves `u_i + v_j = c_ij` over the basis tree with `u_0 = 0`.
fn potentials(
    basis: &[(usize, usize, f64)],
    cost: &DMatrix<f64>,
    m: usize,
    n: usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut row_adj: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut col_adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (idx, &(r, c, _)) in basis.iter().enumerate() {
        row_adj[r].push(idx);
        col_adj[c].push(idx);
    }
    let mut u = vec![f64::NAN; m];
    let mut v = vec![f64::NAN; n];
    u[0] = 0.0;
    // BFS over tree nodes: rows 0..m, cols m..m+n.
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(node) = queue.pop_front() {
        if node < m {
            for &idx in &row_adj[node] {
                let (r, c, _) = basis[idx];
                if v[c].is_nan() {
                    v[c] = cost[(r, c)] - u[r];
                    queue.push_back(m + c);
                }
            }
        } else {
            let c0 = node - m;
            for &idx in &col_adj[c0] {
                let (r, c, _) = basis[idx];
                if u[r].is_nan() {
                    u[r] = cost[(r, c)] - v[c];
                    queue.push_back(r);
                }
            }
        }
    }
    (u, v)
}

/// Basis-cell indices along the tree path from column `ec` to row `er`,
/// starting with the edge incident to `ec`.
fn tree_path(basis: &[(usize, usize, f64)], m: usize, n: usize, er: usize, ec: usize) -> Vec<usize> {
    let nodes = m + n;
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nodes]; // (neighbor, cell index)
    for (idx, &(r, c, _)) in basis.iter().enumerate() {
        adj[r].push((m + c, idx));
        adj[m + c].push((r, idx));
    }
    let start = m + ec;
    let goal = er;
    let mut prev: Vec<Option<(usize, usize)>> = vec![None; nodes];
    let mut visited = vec![false; nodes];
    visited[start] = true;
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(node) = queue.pop_front() {
        if node == goal {
            break;
        }
        for &(next, cell) in &adj[node] {
            if !visited[next] {
                visited[next] = true;
                prev[next] = Some((node, cell));
                queue.push_back(next);
            }
        }
    }
    let mut path = Vec::new();
    let mut node = goal;
    while let Some((parent, cell)) = prev[node] {
        path.push(cell);
        node = parent;
    }
    debug_assert_eq!(node, start, "basis must connect entering row and column");
    path.reverse();
    path
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_cost(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |_, _| rng.random_range(0.0..10.0))
    }

    #[test]
    fn exhaustive_matches_hungarian_on_small_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for _ in 0..200 {
            let n = rng.random_range(1..=8);
            let cost = random_cost(&mut rng, n);
            let (_, brute) = assignment_exhaustive(&cost);
            let (perm, fast) = assignment_hungarian(&cost);
            assert_relative_eq!(brute, fast, max_relative = 1e-10);
            // The returned permutation must actually achieve the value.
            let achieved: f64 = perm.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum();
            assert_relative_eq!(achieved, fast, max_relative = 1e-12);
            let mut seen = vec![false; n];
            for &j in &perm {
                assert!(!seen[j], "not a permutation");
                seen[j] = true;
            }
        }
    }

    #[test]
    fn simplex_matches_assignment_on_uniform_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        for _ in 0..100 {
            let n = rng.random_range(2..=7);
            let cost = random_cost(&mut rng, n);
            let (_, total) = assignment_exhaustive(&cost);
            let w = vec![1.0 / n as f64; n];
            let plan = transport_simplex(&w, &w, &cost);
            assert_relative_eq!(plan.cost, total / n as f64, max_relative = 1e-9);
        }
    }

    #[test]
    fn simplex_termination_certificate() {
        // Primal feasibility + dual feasibility + zero gap on random general
        // instances certifies optimality of the returned plan.
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        for _ in 0..100 {
            let m = rng.random_range(2..=6);
            let n = rng.random_range(2..=6);
            let cost = DMatrix::from_fn(m, n, |_, _| rng.random_range(0.0..5.0));
            let mut supply: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
            let mut demand: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
            let s: f64 = supply.iter().sum();
            let d: f64 = demand.iter().sum();
            supply.iter_mut().for_each(|x| *x /= s);
            demand.iter_mut().for_each(|x| *x /= d);
            let plan = transport_simplex(&supply, &demand, &cost);

            // Marginals.
            let mut row_sum = vec![0.0; m];
            let mut col_sum = vec![0.0; n];
            for &(r, c, f) in &plan.flows {
                assert!(f >= -1e-12);
                row_sum[r] += f;
                col_sum[c] += f;
            }
            for i in 0..m {
                assert_abs_diff_eq!(row_sum[i], supply[i], epsilon = 1e-9);
            }
            for j in 0..n {
                assert_abs_diff_eq!(col_sum[j], demand[j], epsilon = 1e-9);
            }
            // Dual feasibility.
            for r in 0..m {
                for c in 0..n {
                    assert!(
                        cost[(r, c)] - plan.u[r] - plan.v[c] >= -1e-8,
                        "dual infeasible at ({r},{c})"
                    );
                }
            }
            // Zero duality gap.
            let dual: f64 = supply.iter().zip(&plan.u).map(|(s, u)| s * u).sum::<f64>()
                + demand.iter().zip(&plan.v).map(|(d, v)| d * v).sum::<f64>();
            assert_relative_eq!(plan.cost, dual, epsilon = 1e-9, max_relative = 1e-8);
        }
    }

    #[test]
    fn simplex_one_dimensional_cdf_oracle() {
        // On the line with |x - y| cost, the transport cost equals the area
        // between the two CDFs, which this test computes directly.
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        for _ in 0..50 {
            let m = rng.random_range(2..=6);
            let n = rng.random_range(2..=6);
            let xs: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
            let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let mut supply: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
            let mut demand: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
            let s: f64 = supply.iter().sum();
            let d: f64 = demand.iter().sum();
            supply.iter_mut().for_each(|w| *w /= s);
            demand.iter_mut().for_each(|w| *w /= d);

            let cost = DMatrix::from_fn(m, n, |i, j| (xs[i] - ys[j]).abs());
            let plan = transport_simplex(&supply, &demand, &cost);

            // CDF-difference oracle.
            let mut points: Vec<f64> = xs.iter().chain(ys.iter()).copied().collect();
            points.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut expected = 0.0;
            for w in points.windows(2) {
                let (lo, hi) = (w[0], w[1]);
                let fp: f64 = xs
                    .iter()
                    .zip(&supply)
                    .filter(|(x, _)| **x <= lo)
                    .map(|(_, w)| w)
                    .sum();
                let fq: f64 = ys
                    .iter()
                    .zip(&demand)
                    .filter(|(y, _)| **y <= lo)
                    .map(|(_, w)| w)
                    .sum();
                expected += (fp - fq).abs() * (hi - lo);
            }
            assert_relative_eq!(plan.cost, expected, epsilon = 1e-9, max_relative = 1e-8);
        }
    }

    #[test]
    fn degenerate_equal_weights_handled() {
        // Many ties in the northwest-corner rule.
        let cost = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 1.0, 2.0, 3.0, 2.0, 1.0]);
        let w = vec![1.0 / 3.0; 3];
        let plan = transport_simplex(&w, &w, &cost);
        assert_relative_eq!(plan.cost, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn pairwise_costs() {
        let x = DVector::from_column_slice(&[0.0, 0.0]);
        let y = DVector::from_column_slice(&[3.0, 4.0]);
        assert_abs_diff_eq!(
            pairwise_cost(&TransportCost::EuclideanNorm, &x, &y),
            5.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            pairwise_cost(&TransportCost::Frobenius, &x, &y),
            5.0,
            epsilon = 1e-15
        );
        let l = DMatrix::identity(2, 2) * 2.0;
        assert_abs_diff_eq!(
            pairwise_cost(&TransportCost::Mahalanobis(l), &x, &y),
            25.0,
            epsilon = 1e-12
        );
    }
}
