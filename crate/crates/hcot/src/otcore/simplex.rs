//! Primal transportation simplex on the dense bipartite graph.
//!
//! Standard MODI scheme: northwest-corner start, spanning-tree duals,
//! Bland-ordered pivoting (first negative reduced cost in row-major order,
//! lexicographically smallest leaving arc), which is deterministic and cannot
//! cycle. Returns the optimal flow together with the tree duals `(u, v)`.

use crate::error::{Error, Result};
use crate::otcore::Mat;

const MASS_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 400_000;

pub struct SimplexSolution {
    pub flow: Mat,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub value: f64,
}

/// Solves `min Σ c_ij γ_ij` over the transportation polytope with row sums
/// `supply` and column sums `demand`.
pub fn solve_transportation(supply: &[f64], demand: &[f64], cost: &Mat) -> Result<SimplexSolution> {
    let m = supply.len();
    let n = demand.len();
    if cost.rows() != m || cost.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: m * n,
            got: cost.rows() * cost.cols(),
        });
    }
    if m == 0 || n == 0 {
        return Err(Error::Infeasible("empty marginal".into()));
    }
    if supply.iter().chain(demand.iter()).any(|w| *w < 0.0 || !w.is_finite()) {
        return Err(Error::Infeasible("negative or non-finite marginal weight".into()));
    }
    let total_s: f64 = supply.iter().sum();
    let total_d: f64 = demand.iter().sum();
    if (total_s - total_d).abs() > MASS_TOL * (1.0 + total_s.abs()) {
        return Err(Error::Infeasible(format!(
            "marginal masses differ: {total_s} vs {total_d}"
        )));
    }
    if cost.data().iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter("non-finite cost entry".into()));
    }

    let mut flow = Mat::zeros(m, n);
    let mut basis = vec![false; m * n];

    // Northwest-corner initial basis: always m+n−1 arcs, degenerate zeros
    // allowed.
    {
        let mut rem_s = supply.to_vec();
        let mut rem_d = demand.to_vec();
        let (mut i, mut j) = (0usize, 0usize);
        loop {
            let q = rem_s[i].min(rem_d[j]);
            flow[(i, j)] = q;
            basis[i * n + j] = true;
            rem_s[i] -= q;
            rem_d[j] -= q;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if i < m - 1 && (rem_s[i] <= rem_d[j] || j == n - 1) {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    let cmax = cost.data().iter().fold(0.0f64, |a, c| a.max(c.abs()));
    let enter_tol = 1e-12 * (1.0 + cmax);

    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];
    let mut row_arcs: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut col_arcs: Vec<Vec<usize>> = vec![Vec::new(); n];

    let mut pivots = 0usize;
    loop {
        // Tree adjacency and duals from the current basis.
        for arcs in row_arcs.iter_mut() {
            arcs.clear();
        }
        for arcs in col_arcs.iter_mut() {
            arcs.clear();
        }
        for (cell, active) in basis.iter().enumerate() {
            if *active {
                row_arcs[cell / n].push(cell);
                col_arcs[cell % n].push(cell);
            }
        }
        compute_duals(cost, &row_arcs, &col_arcs, &mut u, &mut v)?;

        // Bland entering rule: first cell in row-major order with negative
        // reduced cost.
        let mut entering = None;
        'scan: for i in 0..m {
            for j in 0..n {
                if basis[i * n + j] {
                    continue;
                }
                if cost[(i, j)] - u[i] - v[j] < -enter_tol {
                    entering = Some((i, j));
                    break 'scan;
                }
            }
        }
        let Some((ei, ej)) = entering else {
            break;
        };

        // Cycle: the tree path from col node ej back to row node ei,
        // alternating signs starting with + on the entering arc.
        let path = tree_path(m, n, &row_arcs, &col_arcs, ei, ej)?;
        let mut theta = f64::INFINITY;
        let mut leaving: Option<usize> = None;
        for (k, &cell) in path.iter().enumerate() {
            if k % 2 != 0 {
                continue; // only decreased arcs can leave
            }
            let f = flow[(cell / n, cell % n)];
            match leaving {
                None => {
                    theta = f;
                    leaving = Some(cell);
                }
                Some(l) => {
                    if f < theta {
                        theta = f;
                        leaving = Some(cell);
                    } else if f == theta && cell < l {
                        leaving = Some(cell);
                    }
                }
            }
        }
        let leaving = leaving.ok_or_else(|| Error::Numerical("degenerate pivot cycle".into()))?;

        flow[(ei, ej)] += theta;
        for (k, &cell) in path.iter().enumerate() {
            let (i, j) = (cell / n, cell % n);
            if k % 2 == 0 {
                flow[(i, j)] = (flow[(i, j)] - theta).max(0.0);
            } else {
                flow[(i, j)] += theta;
            }
        }
        flow[(leaving / n, leaving % n)] = 0.0;
        basis[leaving] = false;
        basis[ei * n + ej] = true;

        pivots += 1;
        if pivots > MAX_PIVOTS {
            return Err(Error::Numerical(format!(
                "transportation simplex exceeded {MAX_PIVOTS} pivots"
            )));
        }
    }

    let mut value = 0.0;
    for i in 0..m {
        for j in 0..n {
            value += flow[(i, j)] * cost[(i, j)];
        }
    }
    Ok(SimplexSolution { flow, u, v, value })
}

/// Solves the tree system `u_i + v_j = c_ij` on basis arcs with `u_0 = 0`.
fn compute_duals(
    cost: &Mat,
    row_arcs: &[Vec<usize>],
    col_arcs: &[Vec<usize>],
    u: &mut [f64],
    v: &mut [f64],
) -> Result<()> {
    let m = row_arcs.len();
    let n = col_arcs.len();
    let mut u_set = vec![false; m];
    let mut v_set = vec![false; n];
    let mut stack: Vec<usize> = Vec::with_capacity(m + n);
    u[0] = 0.0;
    u_set[0] = true;
    stack.push(0); // row nodes are 0..m, col nodes m..m+n
    while let Some(node) = stack.pop() {
        if node < m {
            for &cell in &row_arcs[node] {
                let j = cell % n;
                if !v_set[j] {
                    v[j] = cost[(node, j)] - u[node];
                    v_set[j] = true;
                    stack.push(m + j);
                }
            }
        } else {
            let j = node - m;
            for &cell in &col_arcs[j] {
                let i = cell / n;
                if !u_set[i] {
                    u[i] = cost[(i, j)] - v[j];
                    u_set[i] = true;
                    stack.push(i);
                }
            }
        }
    }
    if u_set.iter().any(|s| !s) || v_set.iter().any(|s| !s) {
        return Err(Error::Numerical("basis does not span the bipartite graph".into()));
    }
    Ok(())
}

/// Basis-tree path from column node `ej` to row node `ei`, returned as the
/// arc sequence walked. The first arc is incident to `ej`, so together with
/// the entering arc `(ei, ej)` the signs alternate −, +, −, … along it.
fn tree_path(
    m: usize,
    n: usize,
    row_arcs: &[Vec<usize>],
    col_arcs: &[Vec<usize>],
    ei: usize,
    ej: usize,
) -> Result<Vec<usize>> {
    // BFS over tree nodes from col ej to row ei.
    let total = m + n;
    let mut prev_arc: Vec<Option<usize>> = vec![None; total];
    let mut seen = vec![false; total];
    let start = m + ej;
    seen[start] = true;
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(start);
    while let Some(node) = queue.pop_front() {
        if node == ei {
            break;
        }
        let arcs = if node < m {
            &row_arcs[node]
        } else {
            &col_arcs[node - m]
        };
        for &cell in arcs {
            let other = if node < m { m + cell % n } else { cell / n };
            if !seen[other] {
                seen[other] = true;
                prev_arc[other] = Some(cell);
                queue.push_back(other);
            }
        }
    }
    if !seen[ei] {
        return Err(Error::Numerical("basis tree is disconnected".into()));
    }
    let mut path = Vec::new();
    let mut node = ei;
    while node != start {
        let cell = prev_arc[node].expect("path arc");
        path.push(cell);
        let (i, j) = (cell / n, cell % n);
        node = if node == i { m + j } else { i };
    }
    // path currently runs ei → ej; reverse so it starts at the column side.
    path.reverse();
    Ok(path)
}
