//! Discrete Monge-Kantorovich solvers for Carnot-Carathéodory costs.
//!
//! Plans are stored dense (desk scale keeps supports at or below 10³ atoms).
//! The primal LP is solved by an exact transportation simplex with
//! deterministic Bland pivoting; the spanning-tree duals give a Kantorovich
//! potential that is 1-Lipschitz on the union of the supports and attains
//! `u(x) − u(y) = d_CC(x, y)` on the support of every optimal plan.
//!
//! The secondary (lexicographic) problem — among the minimizers of
//! `Σ γ d`, minimize `Σ γ d²` — is solved by restricting the second stage to
//! the optimal face of the first via reduced costs: a plan is stage-1 optimal
//! exactly when it avoids cells of positive reduced cost, so the second stage
//! is again a transportation problem with the off-face cells priced out.

mod simplex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geodesy::cc_distance;
use crate::hgroup::{GroupPoint, ModelDims};

/// Dense row-major matrix of `f64`; serializes as nested JSON arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidParameter("ragged matrix rows".into()));
        }
        Ok(Mat {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.data[i * self.cols..(i + 1) * self.cols].iter().sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j] += self[(i, j)];
            }
        }
        out
    }

    pub fn to_nested(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| self.data[i * self.cols..(i + 1) * self.cols].to_vec())
            .collect()
    }
}

impl std::ops::Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Serialize for Mat {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_nested().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Mat {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        Mat::from_rows(rows).map_err(serde::de::Error::custom)
    }
}

/// A finitely supported probability measure on ℍⁿ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    points: Vec<GroupPoint>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<GroupPoint>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} points with {} weights",
                points.len(),
                weights.len()
            )));
        }
        let dims = points[0].dims();
        if points.iter().any(|p| p.dims() != dims) {
            return Err(Error::InvalidMeasure("mixed point dimensions".into()));
        }
        if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(Error::InvalidMeasure("negative weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {total}, not 1"
            )));
        }
        for (k, p) in points.iter().enumerate() {
            for q in points.iter().skip(k + 1) {
                if p == q {
                    return Err(Error::InvalidMeasure("duplicate support point".into()));
                }
            }
        }
        Ok(DiscreteMeasure { points, weights })
    }

    pub fn dirac(point: GroupPoint) -> Self {
        DiscreteMeasure {
            points: vec![point],
            weights: vec![1.0],
        }
    }

    /// Uniform weights on a list of distinct points.
    pub fn uniform(points: Vec<GroupPoint>) -> Result<Self> {
        let w = 1.0 / points.len() as f64;
        let mut weights = vec![w; points.len()];
        // Make the weights sum to exactly 1.
        let total: f64 = weights.iter().sum();
        *weights.last_mut().unwrap() += 1.0 - total;
        DiscreteMeasure::new(points, weights)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[GroupPoint] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dims(&self) -> ModelDims {
        self.points[0].dims()
    }
}

/// Which ground cost a matrix was assembled with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    Cc,
    CcSquared,
    Custom,
}

/// A coupling of two discrete measures.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransportPlan {
    pub gamma: Mat,
    pub cost_used: CostKind,
}

impl TransportPlan {
    /// Validates the marginal constraints against `(μ, ν)` within 1e−10.
    pub fn validate(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<()> {
        if self.gamma.rows() != mu.len() || self.gamma.cols() != nu.len() {
            return Err(Error::DimensionMismatch {
                expected: mu.len() * nu.len(),
                got: self.gamma.rows() * self.gamma.cols(),
            });
        }
        for (s, w) in self.gamma.row_sums().iter().zip(mu.weights()) {
            if (s - w).abs() > 1e-10 {
                return Err(Error::Infeasible(format!("row sum {s} != {w}")));
            }
        }
        for (s, w) in self.gamma.col_sums().iter().zip(nu.weights()) {
            if (s - w).abs() > 1e-10 {
                return Err(Error::Infeasible(format!("column sum {s} != {w}")));
            }
        }
        Ok(())
    }

    /// Support cells `(i, j)` with strictly positive mass.
    pub fn support(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.gamma.rows() {
            for j in 0..self.gamma.cols() {
                if self.gamma[(i, j)] > 0.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// A Kantorovich potential sampled on `supp μ ∪ supp ν` (first the μ values,
/// then the ν values).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotentialPair {
    pub on_mu: Vec<f64>,
    pub on_nu: Vec<f64>,
}

/// Assembles the ground cost matrix between the supports.
pub fn cost_matrix(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    kind: CostKind,
    custom: Option<&Mat>,
) -> Result<Mat> {
    match kind {
        CostKind::Custom => {
            let table = custom.ok_or_else(|| {
                Error::InvalidParameter("custom cost requested without a table".into())
            })?;
            if table.rows() != mu.len() || table.cols() != nu.len() {
                return Err(Error::DimensionMismatch {
                    expected: mu.len() * nu.len(),
                    got: table.rows() * table.cols(),
                });
            }
            if table.data().iter().any(|c| c.is_nan()) {
                return Err(Error::InvalidParameter("NaN in custom cost table".into()));
            }
            Ok(table.clone())
        }
        CostKind::Cc | CostKind::CcSquared => {
            let rows: Vec<Vec<f64>> = mu
                .points()
                .par_iter()
                .map(|x| {
                    nu.points()
                        .iter()
                        .map(|y| {
                            let d = cc_distance(x, y)?;
                            Ok(if kind == CostKind::CcSquared { d * d } else { d })
                        })
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            Mat::from_rows(rows)
        }
    }
}

/// Exact solution of the Kantorovich LP for the given cost matrix.
///
/// Returns the optimal plan, a potential on the supports with
/// `u(x_i) − u(y_j) ≤ C_ij` everywhere and equality on the support of the
/// plan, and the optimal value. Primal and dual values agree to fp accuracy
/// (strong duality of the simplex basis).
pub fn solve_kantorovich(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &Mat,
) -> Result<(TransportPlan, PotentialPair, f64)> {
    let sol = simplex::solve_transportation(mu.weights(), nu.weights(), cost)?;
    let plan = TransportPlan {
        gamma: sol.flow,
        cost_used: CostKind::Custom,
    };
    let potential = PotentialPair {
        on_mu: sol.u.clone(),
        on_nu: sol.v.iter().map(|v| -v).collect(),
    };
    Ok((plan, potential, sol.value))
}

/// Raw transportation LP for callers that assemble their own marginals
/// (used by the congestion solver's direction finding). Returns the optimal
/// coupling and value.
pub fn solve_transport_lp(supply: &[f64], demand: &[f64], cost: &Mat) -> Result<(Mat, f64)> {
    let sol = simplex::solve_transportation(supply, demand, cost)?;
    Ok((sol.flow, sol.value))
}

/// Dual objective `∫ u dμ − ∫ u dν` of a potential pair.
pub fn dual_value(mu: &DiscreteMeasure, nu: &DiscreteMeasure, pot: &PotentialPair) -> f64 {
    let on_mu: f64 = pot
        .on_mu
        .iter()
        .zip(mu.weights())
        .map(|(u, w)| u * w)
        .sum();
    let on_nu: f64 = pot
        .on_nu
        .iter()
        .zip(nu.weights())
        .map(|(u, w)| u * w)
        .sum();
    on_mu - on_nu
}

/// Lexicographic secondary plan: among minimizers of `Σ γ d_CC`, minimizes
/// `Σ γ d_CC²`.
///
/// Stage 1 is the CC-cost LP. Its optimal face consists exactly of the
/// feasible plans supported on cells with vanishing reduced cost, so stage 2
/// re-runs the simplex with the positive-reduced-cost cells priced out by a
/// large penalty; the stage-1 cost of the result is checked against
/// `opt₁ + 1e−9 (1 + |opt₁|)`.
pub fn solve_secondary(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<TransportPlan> {
    let cost = cost_matrix(mu, nu, CostKind::Cc, None)?;
    let stage1 = simplex::solve_transportation(mu.weights(), nu.weights(), &cost)?;
    let opt1 = stage1.value;
    let tol = 1e-9 * (1.0 + opt1.abs());

    let max_sq = cost.data().iter().fold(0.0f64, |a, d| a.max(d * d));
    let penalty = 1e6 * (1.0 + max_sq);
    let stage2_cost = Mat::from_fn(mu.len(), nu.len(), |i, j| {
        let rc = cost[(i, j)] - stage1.u[i] - stage1.v[j];
        if rc > tol {
            penalty
        } else {
            cost[(i, j)] * cost[(i, j)]
        }
    });
    let stage2 = simplex::solve_transportation(mu.weights(), nu.weights(), &stage2_cost)?;

    let mut stage1_cost = 0.0;
    let mut off_face = 0.0;
    for i in 0..mu.len() {
        for j in 0..nu.len() {
            let g = stage2.flow[(i, j)];
            stage1_cost += g * cost[(i, j)];
            if stage2_cost[(i, j)] == penalty {
                off_face += g;
            }
        }
    }
    if off_face > 1e-9 {
        return Err(Error::Numerical(format!(
            "secondary plan leaves the optimal face (mass {off_face:.3e})"
        )));
    }
    if stage1_cost > opt1 + tol {
        return Err(Error::Numerical(format!(
            "secondary plan violates the stage-1 optimum: {stage1_cost} > {opt1}"
        )));
    }
    Ok(TransportPlan {
        gamma: stage2.flow,
        cost_used: CostKind::Cc,
    })
}

/// Report of a cyclical-monotonicity scan over the support of a plan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub tuples_checked: u64,
    /// Worst value of `Σ c(x_i, y_i) − Σ c(x_{i+1}, y_i)`; positive means a
    /// violation.
    pub worst_violation: f64,
}

/// Samples pairs and triples from the support `Γ` of the plan and checks the
/// cyclical inequality `Σ c(x_i, y_i) ≤ Σ c(x_{σ(i)}, y_i)` for the cyclic
/// shift, reporting the worst margin found.
pub fn check_cyclical_monotonicity(
    plan: &TransportPlan,
    cost: &Mat,
    max_tuples: u64,
    seed: u64,
) -> Result<MonotonicityReport> {
    let support = plan.support();
    if support.is_empty() {
        return Err(Error::Infeasible("plan has empty support".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut checked = 0u64;

    // Exhaustive over ordered pairs when affordable, sampled otherwise.
    let n_pairs = (support.len() * support.len()) as u64;
    if n_pairs <= max_tuples / 2 {
        for &(i1, j1) in &support {
            for &(i2, j2) in &support {
                let margin = cost[(i1, j1)] + cost[(i2, j2)] - cost[(i2, j1)] - cost[(i1, j2)];
                worst = worst.max(margin);
                checked += 1;
            }
        }
    } else {
        for _ in 0..max_tuples / 2 {
            let (i1, j1) = support[rng.gen_range(0..support.len())];
            let (i2, j2) = support[rng.gen_range(0..support.len())];
            let margin = cost[(i1, j1)] + cost[(i2, j2)] - cost[(i2, j1)] - cost[(i1, j2)];
            worst = worst.max(margin);
            checked += 1;
        }
    }
    // Triples, sampled.
    for _ in 0..max_tuples / 2 {
        let picks: Vec<(usize, usize)> = (0..3)
            .map(|_| support[rng.gen_range(0..support.len())])
            .collect();
        let mut diag = 0.0;
        let mut shifted = 0.0;
        for k in 0..3 {
            let (i, j) = picks[k];
            let (i_next, _) = picks[(k + 1) % 3];
            diag += cost[(i, j)];
            shifted += cost[(i_next, j)];
        }
        worst = worst.max(diag - shifted);
        checked += 1;
    }
    Ok(MonotonicityReport {
        tuples_checked: checked,
        worst_violation: worst,
    })
}

/// Report of [`verify_potential`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotentialReport {
    /// Worst excess of `|u(s) − u(t)| − d_CC(s, t)` over all support pairs.
    pub max_lipschitz_excess: f64,
    /// Worst deviation of `u(x_i) − u(y_j)` from `d_CC(x_i, y_j)` on the
    /// support of the plan.
    pub max_support_gap: f64,
    pub ok: bool,
}

/// Checks that a potential is 1-Lipschitz on `supp μ ∪ supp ν` and attains
/// `u(x) − u(y) = d_CC(x, y)` on the support of the plan, within 1e−8.
pub fn verify_potential(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    plan: &TransportPlan,
    pot: &PotentialPair,
) -> Result<PotentialReport> {
    plan.validate(mu, nu)?;
    if pot.on_mu.len() != mu.len() || pot.on_nu.len() != nu.len() {
        return Err(Error::DimensionMismatch {
            expected: mu.len() + nu.len(),
            got: pot.on_mu.len() + pot.on_nu.len(),
        });
    }
    let all_points: Vec<&GroupPoint> = mu.points().iter().chain(nu.points().iter()).collect();
    let all_values: Vec<f64> = pot
        .on_mu
        .iter()
        .chain(pot.on_nu.iter())
        .copied()
        .collect();
    let mut lip_excess = f64::NEG_INFINITY;
    for (a, (pa, ua)) in all_points.iter().zip(&all_values).enumerate() {
        for (pb, ub) in all_points.iter().zip(&all_values).skip(a + 1) {
            if pa == pb {
                continue;
            }
            let d = cc_distance(pa, pb)?;
            lip_excess = lip_excess.max((ua - ub).abs() - d);
        }
    }
    let mut support_gap = 0.0f64;
    for (i, j) in plan.support() {
        let d = cc_distance(&mu.points()[i], &nu.points()[j])?;
        support_gap = support_gap.max((pot.on_mu[i] - pot.on_nu[j] - d).abs());
    }
    Ok(PotentialReport {
        max_lipschitz_excess: lip_excess,
        max_support_gap: support_gap,
        ok: lip_excess <= 1e-8 && support_gap <= 1e-8,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn pt(coords: &[f64]) -> GroupPoint {
        GroupPoint::new(coords.to_vec()).unwrap()
    }

    fn random_measure(rng: &mut impl Rng, k: usize) -> DiscreteMeasure {
        let points: Vec<GroupPoint> = (0..k)
            .map(|_| {
                pt(&[
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ])
            })
            .collect();
        let mut weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.2..1.0)).collect();
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        let drift: f64 = 1.0 - weights.iter().sum::<f64>();
        weights[0] += drift;
        DiscreteMeasure::new(points, weights).unwrap()
    }

    /// Exhaustive enumeration of the basic feasible solutions (spanning-tree
    /// bases) of the transportation polytope; independent optimality oracle.
    fn enumerate_vertices(supply: &[f64], demand: &[f64]) -> Vec<Mat> {
        let m = supply.len();
        let n = demand.len();
        let cells: Vec<(usize, usize)> = (0..m)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .collect();
        let k = m + n - 1;
        let mut out = Vec::new();
        let mut chosen = vec![0usize; k];

        fn rec(
            cells: &[(usize, usize)],
            start: usize,
            depth: usize,
            chosen: &mut [usize],
            supply: &[f64],
            demand: &[f64],
            out: &mut Vec<Mat>,
        ) {
            let k = chosen.len();
            if depth == k {
                if let Some(flow) = try_basis(cells, chosen, supply, demand) {
                    out.push(flow);
                }
                return;
            }
            for c in start..cells.len() {
                chosen[depth] = c;
                rec(cells, c + 1, depth + 1, chosen, supply, demand, out);
            }
        }

        fn try_basis(
            cells: &[(usize, usize)],
            chosen: &[usize],
            supply: &[f64],
            demand: &[f64],
        ) -> Option<Mat> {
            let m = supply.len();
            let n = demand.len();
            // Acyclic + spanning check via union-find on m+n nodes.
            let mut parent: Vec<usize> = (0..m + n).collect();
            fn find(parent: &mut Vec<usize>, x: usize) -> usize {
                if parent[x] != x {
                    let r = find(parent, parent[x]);
                    parent[x] = r;
                }
                parent[x]
            }
            for &c in chosen {
                let (i, j) = cells[c];
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, m + j));
                if ri == rj {
                    return None; // cycle
                }
                parent[ri] = rj;
            }
            // Solve flows by leaf elimination.
            let mut rem_s = supply.to_vec();
            let mut rem_d = demand.to_vec();
            let mut active: Vec<(usize, usize)> = chosen.iter().map(|&c| cells[c]).collect();
            let mut flow = Mat::zeros(m, n);
            while !active.is_empty() {
                let mut row_count = vec![0usize; m];
                let mut col_count = vec![0usize; n];
                for &(i, j) in &active {
                    row_count[i] += 1;
                    col_count[j] += 1;
                }
                let pos = active
                    .iter()
                    .position(|&(i, j)| row_count[i] == 1 || col_count[j] == 1)?;
                let (i, j) = active.swap_remove(pos);
                let q = if row_count[i] == 1 { rem_s[i] } else { rem_d[j] };
                flow[(i, j)] = q;
                rem_s[i] -= q;
                rem_d[j] -= q;
            }
            if flow.data().iter().any(|f| *f < -1e-12) {
                return None;
            }
            Some(flow)
        }

        rec(&cells, 0, 0, &mut chosen, supply, demand, &mut out);
        out
    }

    fn plan_cost(flow: &Mat, cost: &Mat) -> f64 {
        flow.data()
            .iter()
            .zip(cost.data())
            .map(|(f, c)| f * c)
            .sum()
    }

    #[test]
    fn dirac_to_dirac() {
        let mu = DiscreteMeasure::dirac(pt(&[0.0, 0.0, 0.0]));
        let nu = DiscreteMeasure::dirac(pt(&[1.0, 0.0, 0.0]));
        let c = cost_matrix(&mu, &nu, CostKind::Cc, None).unwrap();
        assert_eq!(c.rows(), 1);
        assert_eq!(c[(0, 0)], 1.0);
        let (plan, pot, value) = solve_kantorovich(&mu, &nu, &c).unwrap();
        assert_eq!(value, 1.0);
        assert_eq!(plan.gamma[(0, 0)], 1.0);
        assert_abs_diff_eq!(pot.on_mu[0] - pot.on_nu[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn cost_matrix_kinds_are_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let mu = random_measure(&mut rng, 4);
        let nu = random_measure(&mut rng, 3);
        let c = cost_matrix(&mu, &nu, CostKind::Cc, None).unwrap();
        let c2 = cost_matrix(&mu, &nu, CostKind::CcSquared, None).unwrap();
        for (a, b) in c.data().iter().zip(c2.data()) {
            assert_abs_diff_eq!(a * a, *b, epsilon = 1e-12);
        }
        // Metric symmetry: C(μ,ν) = C(ν,μ)ᵀ.
        let ct = cost_matrix(&nu, &mu, CostKind::Cc, None).unwrap();
        for i in 0..mu.len() {
            for j in 0..nu.len() {
                assert_abs_diff_eq!(c[(i, j)], ct[(j, i)], epsilon = 1e-12);
            }
        }
        // NaN rejected in custom tables.
        let mut bad = c.clone();
        bad[(0, 0)] = f64::NAN;
        assert!(cost_matrix(&mu, &nu, CostKind::Custom, Some(&bad)).is_err());
    }

    #[test]
    fn matches_vertex_enumeration_and_duality() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for trial in 0..12 {
            let m = 2 + trial % 3;
            let n = 2 + (trial / 3) % 3;
            let mu = random_measure(&mut rng, m);
            let nu = random_measure(&mut rng, n);
            let c = cost_matrix(&mu, &nu, CostKind::Cc, None).unwrap();
            let (plan, pot, value) = solve_kantorovich(&mu, &nu, &c).unwrap();
            plan.validate(&mu, &nu).unwrap();

            let vertices = enumerate_vertices(mu.weights(), nu.weights());
            assert!(!vertices.is_empty());
            let best = vertices
                .iter()
                .map(|v| plan_cost(v, &c))
                .fold(f64::INFINITY, f64::min);
            assert_abs_diff_eq!(value, best, epsilon = 1e-9);

            // Strong duality.
            let dv = dual_value(&mu, &nu, &pot);
            assert_abs_diff_eq!(value, dv, epsilon = 1e-9);
        }
    }

    #[test]
    fn optimal_plans_are_cyclically_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let mu = random_measure(&mut rng, 5);
        let nu = random_measure(&mut rng, 6);
        let c = cost_matrix(&mu, &nu, CostKind::Cc, None).unwrap();
        let (plan, _, _) = solve_kantorovich(&mu, &nu, &c).unwrap();
        let report = check_cyclical_monotonicity(&plan, &c, 20_000, 7).unwrap();
        assert!(
            report.worst_violation <= 1e-9,
            "violation {}",
            report.worst_violation
        );
    }

    #[test]
    fn anti_optimal_plan_violates_monotonicity() {
        // Maximize instead of minimize by negating the cost; on a generic
        // 2×2 instance the result violates the two-point inequality.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mu = random_measure(&mut rng, 2);
        let nu = random_measure(&mut rng, 2);
        let c = cost_matrix(&mu, &nu, CostKind::Cc, None).unwrap();
        let neg = Mat::from_fn(2, 2, |i, j| -c[(i, j)]);
        let (anti, _, _) = solve_kantorovich(&mu, &nu, &neg).unwrap();
        let report = check_cyclical_monotonicity(&anti, &c, 1_000, 3).unwrap();
        assert!(
            report.worst_violation > 1e-6,
            "expected a violation, got {}",
            report.worst_violation
        );
    }

    #[test]
    fn potential_verifies_on_random_instance() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let mu = random_measure(&mut rng, 4);
        let nu = random_measure(&mut rng, 4);
        let c = cost_matrix(&mu, &nu, CostKind::Cc, None).unwrap();
        let (plan, pot, _) = solve_kantorovich(&mu, &nu, &c).unwrap();
        let report = verify_potential(&mu, &nu, &plan, &pot).unwrap();
        assert!(report.ok, "{report:?}");

        // Negative control: breaking the potential is flagged.
        let mut broken = pot.clone();
        broken.on_mu[0] += 10.0;
        let report = verify_potential(&mu, &nu, &plan, &broken).unwrap();
        assert!(!report.ok);
    }

    #[test]
    fn secondary_matches_enumeration_on_degenerate_face() {
        // All plans between these collinear atoms are stage-1 optimal; the
        // secondary stage must pick the monotone vertex.
        let mu = DiscreteMeasure::new(
            vec![pt(&[0.0, 0.0, 0.0]), pt(&[0.5, 0.0, 0.0])],
            vec![0.5, 0.5],
        )
        .unwrap();
        let nu = DiscreteMeasure::new(
            vec![pt(&[0.5, 0.0, 0.0]), pt(&[1.0, 0.0, 0.0])],
            vec![0.5, 0.5],
        )
        .unwrap();
        let plan = solve_secondary(&mu, &nu).unwrap();
        let c = cost_matrix(&mu, &nu, CostKind::Cc, None).unwrap();
        let c2 = cost_matrix(&mu, &nu, CostKind::CcSquared, None).unwrap();

        let vertices = enumerate_vertices(mu.weights(), nu.weights());
        let opt1 = vertices
            .iter()
            .map(|v| plan_cost(v, &c))
            .fold(f64::INFINITY, f64::min);
        let best_secondary = vertices
            .iter()
            .filter(|v| plan_cost(v, &c) <= opt1 + 1e-9)
            .map(|v| plan_cost(v, &c2))
            .fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(plan_cost(&plan.gamma, &c2), best_secondary, epsilon = 1e-9);
        assert_abs_diff_eq!(plan_cost(&plan.gamma, &c), opt1, epsilon = 1e-9);
        // The monotone vertex is the diagonal coupling here.
        assert_abs_diff_eq!(plan.gamma[(0, 0)], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(plan.gamma[(1, 1)], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn secondary_reduces_to_primary_when_unique() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        let mu = random_measure(&mut rng, 3);
        let nu = random_measure(&mut rng, 3);
        let c = cost_matrix(&mu, &nu, CostKind::Cc, None).unwrap();
        let (plan1, _, opt1) = solve_kantorovich(&mu, &nu, &c).unwrap();
        let plan2 = solve_secondary(&mu, &nu).unwrap();
        // Generic instances have a unique stage-1 vertex.
        for (a, b) in plan1.gamma.data().iter().zip(plan2.gamma.data()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
        assert_abs_diff_eq!(plan_cost(&plan2.gamma, &c), opt1, epsilon = 1e-9);
    }

    #[test]
    fn collinear_secondary_is_monotone_rearrangement() {
        // Six atoms on a common geodesic; the secondary plan must be the
        // sorted (northwest-corner) coupling.
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let base = pt(&[-0.2, 0.1, 0.05]);
        let target = pt(&[0.9, 0.6, -0.3]);
        let solved = crate::geodesy::solve_geodesic(&base, &target).unwrap();
        let mut mu_ts: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..1.0)).collect();
        let mut nu_ts: Vec<f64> = (0..6).map(|_| rng.gen_range(0.0..1.0)).collect();
        mu_ts.sort_by(f64::total_cmp);
        nu_ts.sort_by(f64::total_cmp);
        let mu_pts: Vec<GroupPoint> = mu_ts
            .iter()
            .map(|&t| crate::geodesy::geodesic_point(&solved.params, t).unwrap())
            .collect();
        let nu_pts: Vec<GroupPoint> = nu_ts
            .iter()
            .map(|&t| crate::geodesy::geodesic_point(&solved.params, t).unwrap())
            .collect();
        let mut wu: Vec<f64> = (0..6).map(|_| rng.gen_range(0.2..1.0)).collect();
        let su: f64 = wu.iter().sum();
        wu.iter_mut().for_each(|w| *w /= su);
        let drift = 1.0 - wu.iter().sum::<f64>();
        wu[0] += drift;
        let mut wv: Vec<f64> = (0..6).map(|_| rng.gen_range(0.2..1.0)).collect();
        let sv: f64 = wv.iter().sum();
        wv.iter_mut().for_each(|w| *w /= sv);
        let drift = 1.0 - wv.iter().sum::<f64>();
        wv[0] += drift;

        let mu = DiscreteMeasure::new(mu_pts, wu.clone()).unwrap();
        let nu = DiscreteMeasure::new(nu_pts, wv.clone()).unwrap();
        let plan = solve_secondary(&mu, &nu).unwrap();

        // Monotone rearrangement oracle: northwest-corner on the sorted atoms.
        let mut expected = Mat::zeros(6, 6);
        let (mut i, mut j) = (0, 0);
        let (mut rs, mut rd) = (wu.clone(), wv.clone());
        loop {
            let q = rs[i].min(rd[j]);
            expected[(i, j)] = q;
            rs[i] -= q;
            rd[j] -= q;
            if i == 5 && j == 5 {
                break;
            }
            if i < 5 && (rs[i] <= rd[j] || j == 5) {
                i += 1;
            } else {
                j += 1;
            }
        }
        for (a, b) in plan.gamma.data().iter().zip(expected.data()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn value_invariant_under_relabeling_and_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(27);
        let mu = random_measure(&mut rng, 4);
        let nu = random_measure(&mut rng, 4);
        let c = cost_matrix(&mu, &nu, CostKind::Cc, None).unwrap();
        let (_, _, value) = solve_kantorovich(&mu, &nu, &c).unwrap();

        // Relabel the μ atoms by a permutation.
        let perm = [2usize, 0, 3, 1];
        let pts: Vec<GroupPoint> = perm.iter().map(|&k| mu.points()[k].clone()).collect();
        let ws: Vec<f64> = perm.iter().map(|&k| mu.weights()[k]).collect();
        let mu_p = DiscreteMeasure::new(pts, ws).unwrap();
        let c_p = cost_matrix(&mu_p, &nu, CostKind::Cc, None).unwrap();
        let (_, _, value_p) = solve_kantorovich(&mu_p, &nu, &c_p).unwrap();
        assert_abs_diff_eq!(value, value_p, epsilon = 1e-9);

        // Scaling the cost scales the value and preserves the argmin.
        let lam = 3.7;
        let scaled = Mat::from_fn(4, 4, |i, j| lam * c[(i, j)]);
        let (plan_s, _, value_s) = solve_kantorovich(&mu, &nu, &scaled).unwrap();
        assert_abs_diff_eq!(value_s, lam * value, epsilon = 1e-9);
        let (plan_1, _, _) = solve_kantorovich(&mu, &nu, &c).unwrap();
        for (a, b) in plan_s.gamma.data().iter().zip(plan_1.gamma.data()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-9);
        }
    }

    #[test]
    fn w1_triangle_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        for _ in 0..5 {
            let a = random_measure(&mut rng, 3);
            let b = random_measure(&mut rng, 4);
            let c_meas = random_measure(&mut rng, 3);
            let w = |x: &DiscreteMeasure, y: &DiscreteMeasure| -> f64 {
                let cm = cost_matrix(x, y, CostKind::Cc, None).unwrap();
                solve_kantorovich(x, y, &cm).unwrap().2
            };
            assert!(w(&a, &c_meas) <= w(&a, &b) + w(&b, &c_meas) + 1e-9);
        }
    }

    #[test]
    fn malformed_marginals_are_rejected() {
        let p = vec![pt(&[0.0, 0.0, 0.0]), pt(&[1.0, 0.0, 0.0])];
        assert!(DiscreteMeasure::new(p.clone(), vec![0.6, 0.6]).is_err());
        assert!(DiscreteMeasure::new(p.clone(), vec![-0.2, 1.2]).is_err());
        assert!(DiscreteMeasure::new(vec![p[0].clone(), p[0].clone()], vec![0.5, 0.5]).is_err());
    }
}
