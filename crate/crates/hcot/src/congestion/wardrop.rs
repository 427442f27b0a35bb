//! Congested traffic assignment and Wardrop equilibrium certificates.
//!
//! The total congestion cost of edge flows `i` is `F(i) = Σ_e len_e G(i_e)`
//! with `G(i) = a i + (b/p) i^p` the primitive of the congestion law
//! `g(i) = a + b i^{p−1}`. `F` is convex, so the problem is solved by
//! Frank-Wolfe over the polytope of feasible flows: direction finding is
//! all-or-nothing routing at the current edge costs `t_e = len_e g(i_e)`
//! (for the long-term mode the origin-destination coupling itself is
//! re-optimized each round through the transportation LP on the congested
//! shortest-path costs), followed by exact bisection line search. Away steps
//! over the accumulated vertex set are used as well, which restores linear
//! convergence when the optimum sits inside a face; the stopping rule is the
//! standard relative Frank-Wolfe gap `⟨t, i − i*⟩ / F(i)`.
//!
//! A Wardrop equilibrium is certified independently of the solver state:
//! with `φ = g(i)` frozen, every carried path must be within `1+ε` of the
//! congested shortest-path cost between its endpoints, the induced coupling
//! must be `ε`-optimal for the transportation problem with those costs
//! (long-term mode), and the variational inequality
//! `⟨t, i⟩ ≤ ⟨t, i'⟩ + ε⟨t, i⟩` must hold against the re-routed comparison
//! flow `i'`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::congestion::graph::{FlowNetwork, TieBreak};
use crate::error::{Error, Result};
use crate::hgroup::ModelDims;
use crate::otcore::{solve_transport_lp, Mat};

/// Power-law congestion cost `g(i) = a + b i^{p−1}` with primitive
/// `G(i) = a i + (b/p) i^p`.
///
/// `g` is continuous, strictly increasing, unbounded, and positive at zero,
/// and sits in the power growth class
/// `min(a,b) i^{p−1} ≤ g(i) ≤ (a+b)(i^{p−1}+1)` for all `i ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CongestionFunction {
    pub a: f64,
    pub b: f64,
    pub p: f64,
}

impl CongestionFunction {
    /// Congestion law for a lattice model over ℍⁿ: additionally requires
    /// `p < N/(N−1)` so the conjugate exponent stays above the homogeneous
    /// dimension (the range where the congested metric theory applies).
    pub fn new(a: f64, b: f64, p: f64, dims: ModelDims) -> Result<Self> {
        let n_over = dims.homog_dim() as f64 / (dims.homog_dim() as f64 - 1.0);
        if !(p < n_over) {
            return Err(Error::InvalidParameter(format!(
                "congestion exponent p = {p} must stay below N/(N-1) = {n_over}"
            )));
        }
        Self::for_network(a, b, p)
    }

    /// Congestion law for a generic network, where no homogeneous dimension
    /// constrains the exponent.
    pub fn for_network(a: f64, b: f64, p: f64) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::InvalidParameter(format!("exponent p = {p} must exceed 1")));
        }
        if !(a > 0.0) || !(b > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidParameter("congestion coefficients must be positive".into()));
        }
        Ok(CongestionFunction { a, b, p })
    }

    pub fn g(&self, i: f64) -> f64 {
        self.a + self.b * i.max(0.0).powf(self.p - 1.0)
    }

    /// Primitive `G(i) = ∫₀^i g`.
    pub fn primitive(&self, i: f64) -> f64 {
        let i = i.max(0.0);
        self.a * i + self.b / self.p * i.powf(self.p)
    }
}

/// Demand specification: free coupling (system optimum, long term) or a
/// fixed origin-destination coupling (user equilibrium, short term).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Demand {
    LongTerm {
        sources: Vec<(usize, f64)>,
        sinks: Vec<(usize, f64)>,
    },
    ShortTerm {
        coupling: Vec<(usize, usize, f64)>,
    },
}

impl Demand {
    fn total_mass(&self) -> f64 {
        match self {
            Demand::LongTerm { sources, .. } => sources.iter().map(|(_, w)| w).sum(),
            Demand::ShortTerm { coupling } => coupling.iter().map(|(_, _, w)| w).sum(),
        }
    }
}

/// One carried path with its transported mass.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathFlow {
    pub origin: usize,
    pub dest: usize,
    pub edges: Vec<u32>,
    pub nodes: Vec<u32>,
    pub mass: f64,
}

/// Flows, carried paths and the induced OD coupling of an assignment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrafficAssignment {
    pub edge_flows: Vec<f64>,
    pub path_support: Vec<PathFlow>,
    pub od_coupling: Vec<(usize, usize, f64)>,
    /// Path mass removed by the support pruning threshold (re-normalized
    /// back into the surviving paths).
    pub pruned_mass: f64,
}

/// Convergence log of the Frank-Wolfe iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FwLog {
    pub iterations: usize,
    pub objective: f64,
    pub rel_gap: f64,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
    pub gap_trace: Vec<f64>,
}

const PATH_PRUNE: f64 = 1e-10;
const ATOM_PRUNE: f64 = 1e-12;

#[derive(Debug, Clone)]
struct Vertex {
    edges: Vec<(u32, f64)>,
    paths: Vec<PathFlow>,
}

#[derive(Debug, Clone)]
struct Atom {
    weight: f64,
    vertex: Vertex,
}

fn edge_costs(net: &FlowNetwork, cf: &CongestionFunction, flows: &[f64]) -> Vec<f64> {
    net.edges()
        .iter()
        .zip(flows)
        .map(|(e, i)| e.len * cf.g(*i))
        .collect()
}

fn sparse_dot(costs: &[f64], edges: &[(u32, f64)]) -> f64 {
    edges.iter().map(|(e, f)| costs[*e as usize] * f).sum()
}

/// All-or-nothing routing of the demand at the given edge costs; for the
/// long-term mode the coupling is first re-optimized by the transportation
/// LP on the congested shortest-path cost table.
fn find_vertex(
    net: &FlowNetwork,
    costs: &[f64],
    demand: &Demand,
    tie: TieBreak,
    rng: &mut ChaCha8Rng,
) -> Result<Vertex> {
    let mut routes: Vec<(usize, usize, f64)> = match demand {
        Demand::LongTerm { sources, sinks } => {
            let sink_nodes: Vec<usize> = sinks.iter().map(|(n, _)| *n).collect();
            let mut trees = std::collections::HashMap::new();
            let mut table = Vec::with_capacity(sources.len());
            for (src, _) in sources {
                let tree = net.shortest_paths(*src, costs, Some(&sink_nodes), tie)?;
                let row: Vec<f64> = sink_nodes.iter().map(|&t| tree.dist[t]).collect();
                if let Some(pos) = row.iter().position(|d| d.is_infinite()) {
                    return Err(Error::Disconnected(*src, sink_nodes[pos]));
                }
                table.push(row);
                trees.insert(*src, tree);
            }
            let supply: Vec<f64> = sources.iter().map(|(_, w)| *w).collect();
            let sink_mass: Vec<f64> = sinks.iter().map(|(_, w)| *w).collect();
            let (coupling, _) = solve_transport_lp(&supply, &sink_mass, &Mat::from_rows(table)?)?;
            let mut routes = Vec::new();
            for (si, (src, _)) in sources.iter().enumerate() {
                for (dj, (dst, _)) in sinks.iter().enumerate() {
                    let w = coupling[(si, dj)];
                    if w > 0.0 {
                        routes.push((*src, *dst, w));
                    }
                }
            }
            // Routing reuses the trees below; stash them via a second pass.
            return assemble_vertex(net, routes, |src| {
                trees
                    .get(&src)
                    .cloned()
                    .ok_or_else(|| Error::Numerical("missing tree".into()))
            });
        }
        Demand::ShortTerm { coupling } => coupling.clone(),
    };
    routes.shuffle(rng);
    let mut trees: std::collections::HashMap<usize, crate::congestion::graph::ShortestPathTree> =
        std::collections::HashMap::new();
    for (src, dst, _) in &routes {
        if !trees.contains_key(src) {
            let tree = net.shortest_paths(*src, costs, None, tie)?;
            if tree.dist[*dst].is_infinite() {
                return Err(Error::Disconnected(*src, *dst));
            }
            trees.insert(*src, tree);
        } else if trees[src].dist[*dst].is_infinite() {
            return Err(Error::Disconnected(*src, *dst));
        }
    }
    assemble_vertex(net, routes, |src| {
        trees
            .get(&src)
            .cloned()
            .ok_or_else(|| Error::Numerical("missing tree".into()))
    })
}

fn assemble_vertex(
    net: &FlowNetwork,
    routes: Vec<(usize, usize, f64)>,
    mut tree_for: impl FnMut(usize) -> Result<crate::congestion::graph::ShortestPathTree>,
) -> Result<Vertex> {
    let mut edge_acc: std::collections::BTreeMap<u32, f64> = std::collections::BTreeMap::new();
    let mut paths = Vec::new();
    let mut cached: std::collections::HashMap<usize, crate::congestion::graph::ShortestPathTree> =
        std::collections::HashMap::new();
    for (src, dst, w) in routes {
        if w <= 0.0 {
            continue;
        }
        if !cached.contains_key(&src) {
            cached.insert(src, tree_for(src)?);
        }
        let tree = &cached[&src];
        let edges = net
            .path_to(tree, dst)
            .ok_or(Error::Disconnected(src, dst))?;
        for &e in &edges {
            *edge_acc.entry(e).or_insert(0.0) += w;
        }
        let nodes = net.path_nodes(src, &edges);
        paths.push(PathFlow {
            origin: src,
            dest: dst,
            edges,
            nodes,
            mass: w,
        });
    }
    Ok(Vertex {
        edges: edge_acc.into_iter().collect(),
        paths,
    })
}

/// Exact bisection line search for `min_{α ∈ [0, α_max]} F(i + α d)` with a
/// convex objective; `d` is given sparsely.
fn line_search(
    net: &FlowNetwork,
    cf: &CongestionFunction,
    flows: &[f64],
    dir: &[(u32, f64)],
    alpha_max: f64,
) -> f64 {
    let deriv = |alpha: f64| -> f64 {
        dir.iter()
            .map(|&(e, de)| {
                let edge = net.edge(e);
                de * edge.len * cf.g(flows[e as usize] + alpha * de)
            })
            .sum()
    };
    if deriv(0.0) >= 0.0 {
        return 0.0;
    }
    if deriv(alpha_max) <= 0.0 {
        return alpha_max;
    }
    let (mut lo, mut hi) = (0.0f64, alpha_max);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if deriv(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn objective(net: &FlowNetwork, cf: &CongestionFunction, flows: &[f64]) -> f64 {
    net.edges()
        .iter()
        .zip(flows)
        .map(|(e, i)| e.len * cf.primitive(*i))
        .sum()
}

fn rebuild_flows(n_edges: usize, atoms: &[Atom]) -> Vec<f64> {
    let mut flows = vec![0.0; n_edges];
    for atom in atoms {
        for &(e, f) in &atom.vertex.edges {
            flows[e as usize] += atom.weight * f;
        }
    }
    flows
}

/// Frank-Wolfe (with away steps) minimization of the total congestion cost.
///
/// Stops when the relative gap drops below `tol`; non-convergence within
/// `max_iter` is reported through the log, not silently ignored. The seed
/// fixes the order in which demands are routed and the shortest-path
/// tie-breaking orientation.
pub fn solve_wardrop(
    net: &FlowNetwork,
    cf: &CongestionFunction,
    demand: &Demand,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<(TrafficAssignment, FwLog)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {tol}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tie = if seed % 2 == 0 {
        TieBreak::PreferLow
    } else {
        TieBreak::PreferHigh
    };
    let n_edges = net.edge_count();

    if demand.total_mass() <= 0.0 {
        return Ok((
            TrafficAssignment {
                edge_flows: vec![0.0; n_edges],
                path_support: Vec::new(),
                od_coupling: Vec::new(),
                pruned_mass: 0.0,
            },
            FwLog {
                iterations: 0,
                objective: 0.0,
                rel_gap: 0.0,
                converged: true,
                objective_trace: vec![0.0],
                gap_trace: vec![0.0],
            },
        ));
    }

    // Free-flow initialization.
    let costs0 = edge_costs(net, cf, &vec![0.0; n_edges]);
    let v0 = find_vertex(net, &costs0, demand, tie, &mut rng)?;
    let mut atoms = vec![Atom {
        weight: 1.0,
        vertex: v0,
    }];
    let mut flows = rebuild_flows(n_edges, &atoms);

    let mut log = FwLog {
        iterations: 0,
        objective: objective(net, cf, &flows),
        rel_gap: f64::INFINITY,
        converged: false,
        objective_trace: vec![],
        gap_trace: vec![],
    };

    for iter in 0..max_iter {
        let costs = edge_costs(net, cf, &flows);
        let obj = objective(net, cf, &flows);
        let current_cost: f64 = costs.iter().zip(&flows).map(|(c, f)| c * f).sum();

        let v_fw = find_vertex(net, &costs, demand, tie, &mut rng)?;
        let fw_cost = sparse_dot(&costs, &v_fw.edges);
        let gap = current_cost - fw_cost;
        let rel_gap = if obj > 0.0 { gap / obj } else { 0.0 };
        log.iterations = iter + 1;
        log.objective = obj;
        log.rel_gap = rel_gap;
        log.objective_trace.push(obj);
        log.gap_trace.push(rel_gap);
        if rel_gap <= tol {
            log.converged = true;
            break;
        }

        // Away candidate: the heaviest-cost atom.
        let (away_idx, away_cost) = atoms
            .iter()
            .enumerate()
            .map(|(k, atom)| (k, sparse_dot(&costs, &atom.vertex.edges)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("at least one atom");
        let gap_away = away_cost - current_cost;

        if gap >= gap_away {
            // Frank-Wolfe step toward v_fw.
            let dir: Vec<(u32, f64)> = {
                let mut d: std::collections::BTreeMap<u32, f64> = flows
                    .iter()
                    .enumerate()
                    .filter(|(_, f)| **f != 0.0)
                    .map(|(e, f)| (e as u32, -*f))
                    .collect();
                for &(e, f) in &v_fw.edges {
                    *d.entry(e).or_insert(0.0) += f;
                }
                d.into_iter().filter(|(_, f)| *f != 0.0).collect()
            };
            let alpha = line_search(net, cf, &flows, &dir, 1.0);
            if alpha <= 0.0 {
                log.converged = true;
                break;
            }
            for atom in &mut atoms {
                atom.weight *= 1.0 - alpha;
            }
            if alpha >= 1.0 {
                atoms.clear();
            }
            atoms.push(Atom {
                weight: alpha,
                vertex: v_fw,
            });
            for &(e, _) in &atoms.last().unwrap().vertex.edges {
                let _ = e;
            }
            flows = rebuild_flows(n_edges, &atoms);
        } else {
            // Away step from the worst atom.
            let w_a = atoms[away_idx].weight;
            let alpha_max = if w_a < 1.0 { w_a / (1.0 - w_a) } else { 1.0 };
            let dir: Vec<(u32, f64)> = {
                let mut d: std::collections::BTreeMap<u32, f64> = flows
                    .iter()
                    .enumerate()
                    .filter(|(_, f)| **f != 0.0)
                    .map(|(e, f)| (e as u32, *f))
                    .collect();
                for &(e, f) in &atoms[away_idx].vertex.edges {
                    *d.entry(e).or_insert(0.0) -= f;
                }
                d.into_iter().filter(|(_, f)| *f != 0.0).collect()
            };
            let alpha = line_search(net, cf, &flows, &dir, alpha_max);
            if alpha <= 0.0 {
                log.converged = true;
                break;
            }
            for (k, atom) in atoms.iter_mut().enumerate() {
                if k == away_idx {
                    atom.weight = atom.weight * (1.0 + alpha) - alpha;
                } else {
                    atom.weight *= 1.0 + alpha;
                }
            }
            atoms.retain(|a| a.weight > ATOM_PRUNE);
            let total_w: f64 = atoms.iter().map(|a| a.weight).sum();
            for atom in &mut atoms {
                atom.weight /= total_w;
            }
            flows = rebuild_flows(n_edges, &atoms);
        }
    }

    // Collapse atoms into the carried path support.
    let mut merged: std::collections::BTreeMap<Vec<u32>, PathFlow> = std::collections::BTreeMap::new();
    for atom in &atoms {
        for path in &atom.vertex.paths {
            let mass = atom.weight * path.mass;
            if mass == 0.0 {
                continue;
            }
            match merged.entry(path.edges.clone()) {
                std::collections::btree_map::Entry::Occupied(mut e) => e.get_mut().mass += mass,
                std::collections::btree_map::Entry::Vacant(e) => {
                    e.insert(PathFlow {
                        mass,
                        ..path.clone()
                    });
                }
            }
        }
    }
    let total_demand = demand.total_mass();
    let mut pruned = 0.0;
    let mut paths: Vec<PathFlow> = Vec::new();
    for (_, p) in merged {
        if p.mass < PATH_PRUNE {
            pruned += p.mass;
        } else {
            paths.push(p);
        }
    }
    if pruned > 0.0 {
        let kept: f64 = paths.iter().map(|p| p.mass).sum();
        let scale = total_demand / kept;
        for p in &mut paths {
            p.mass *= scale;
        }
    }
    let mut coupling_acc: std::collections::BTreeMap<(usize, usize), f64> =
        std::collections::BTreeMap::new();
    for p in &paths {
        *coupling_acc.entry((p.origin, p.dest)).or_insert(0.0) += p.mass;
    }
    let ta = TrafficAssignment {
        edge_flows: flows,
        path_support: paths,
        od_coupling: coupling_acc
            .into_iter()
            .map(|((o, d), w)| (o, d, w))
            .collect(),
        pruned_mass: pruned,
    };
    Ok((ta, log))
}

/// Report of [`equilibrium_certificate`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateReport {
    pub eps: f64,
    pub checked_paths: usize,
    /// Worst relative excess of a carried path cost over the congested
    /// shortest-path cost between its endpoints.
    pub max_path_excess: f64,
    /// Relative gap of the induced coupling in the transportation problem
    /// with the congested costs (long-term mode only).
    pub lp_rel_gap: Option<f64>,
    /// Relative excess of `⟨t, i⟩` over the re-routed comparison flow.
    pub vi_rel_excess: f64,
    pub pass: bool,
}

/// Certifies the Wardrop conditions for an assignment at tolerance `ε`,
/// recomputing the congested metric and the transportation optimum from
/// scratch (independent of solver internals).
pub fn equilibrium_certificate(
    net: &FlowNetwork,
    cf: &CongestionFunction,
    ta: &TrafficAssignment,
    demand: &Demand,
    eps: f64,
) -> Result<CertificateReport> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon {eps}")));
    }
    let costs = edge_costs(net, cf, &ta.edge_flows);
    let total_mass: f64 = ta.path_support.iter().map(|p| p.mass).sum();
    if total_mass <= 0.0 {
        return Ok(CertificateReport {
            eps,
            checked_paths: 0,
            max_path_excess: 0.0,
            lp_rel_gap: None,
            vi_rel_excess: 0.0,
            pass: true,
        });
    }

    // Congested shortest-path trees from every origin in use.
    let mut origins: Vec<usize> = ta.path_support.iter().map(|p| p.origin).collect();
    if let Demand::LongTerm { sources, .. } = demand {
        origins.extend(sources.iter().map(|(n, _)| *n));
    }
    origins.sort_unstable();
    origins.dedup();
    let mut trees = std::collections::HashMap::new();
    for &src in &origins {
        trees.insert(
            src,
            net.shortest_paths(src, &costs, None, TieBreak::PreferLow)?,
        );
    }

    // Condition 1: carried paths are congested geodesics.
    let mut checked = 0usize;
    let mut max_excess = 0.0f64;
    for path in &ta.path_support {
        if path.mass <= eps * total_mass {
            continue;
        }
        checked += 1;
        let cost: f64 = path.edges.iter().map(|&e| costs[e as usize]).sum();
        let best = trees[&path.origin].dist[path.dest];
        if best == 0.0 {
            continue;
        }
        max_excess = max_excess.max(cost / best - 1.0);
    }

    // Condition 2 (long term): the induced coupling solves the
    // transportation problem for the congested costs.
    let mut lp_rel_gap = None;
    let mut comparison_cost;
    match demand {
        Demand::LongTerm { sources, sinks } => {
            let table = Mat::from_rows(
                sources
                    .iter()
                    .map(|(src, _)| sinks.iter().map(|(dst, _)| trees[src].dist[*dst]).collect())
                    .collect(),
            )?;
            if table.data().iter().any(|d| d.is_infinite()) {
                return Err(Error::Infeasible("disconnected demand pair".into()));
            }
            let supply: Vec<f64> = sources.iter().map(|(_, w)| *w).collect();
            let sink_mass: Vec<f64> = sinks.iter().map(|(_, w)| *w).collect();
            let (_, opt) = solve_transport_lp(&supply, &sink_mass, &table)?;
            let node_of = |n: usize, list: &[(usize, f64)]| list.iter().position(|(m, _)| *m == n);
            let mut coupling_value = 0.0;
            for &(o, d, w) in &ta.od_coupling {
                let (Some(si), Some(dj)) = (node_of(o, sources), node_of(d, sinks)) else {
                    return Err(Error::Infeasible(format!(
                        "coupling pair ({o}, {d}) outside the demand supports"
                    )));
                };
                coupling_value += w * table[(si, dj)];
            }
            lp_rel_gap = Some((coupling_value - opt) / opt.max(f64::MIN_POSITIVE));
            comparison_cost = opt;
        }
        Demand::ShortTerm { coupling } => {
            comparison_cost = 0.0;
            for &(o, d, w) in coupling {
                let tree = trees.entry(o).or_insert(net.shortest_paths(
                    o,
                    &costs,
                    None,
                    TieBreak::PreferLow,
                )?);
                if tree.dist[d].is_infinite() {
                    return Err(Error::Disconnected(o, d));
                }
                comparison_cost += w * tree.dist[d];
            }
        }
    }

    // Variational inequality ⟨t, i⟩ ≤ ⟨t, i'⟩ + ε⟨t, i⟩.
    let carried_cost: f64 = costs.iter().zip(&ta.edge_flows).map(|(c, f)| c * f).sum();
    let vi_rel_excess = (carried_cost - comparison_cost) / carried_cost.max(f64::MIN_POSITIVE);

    let pass = max_excess <= eps
        && lp_rel_gap.map_or(true, |g| g <= eps)
        && vi_rel_excess <= eps;
    Ok(CertificateReport {
        eps,
        checked_paths: checked,
        max_path_excess: max_excess,
        lp_rel_gap,
        vi_rel_excess,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::congestion::lattice::{build_lattice, snap_discrete};
    use crate::hgroup::GroupPoint;
    use crate::otcore::DiscreteMeasure;
    use approx::assert_abs_diff_eq;

    fn two_link() -> FlowNetwork {
        FlowNetwork::new(2, vec![(0, 1, 1.0), (0, 1, 1.0)]).unwrap()
    }

    #[test]
    fn congestion_function_guards() {
        let dims = ModelDims::default();
        assert!(CongestionFunction::new(1.0, 1.0, 1.25, dims).is_ok());
        // N/(N−1) = 4/3 at n = 1.
        assert!(CongestionFunction::new(1.0, 1.0, 4.0 / 3.0, dims).is_err());
        assert!(CongestionFunction::new(1.0, 1.0, 1.5, dims).is_err());
        assert!(CongestionFunction::for_network(1.0, 1.0, 2.0).is_ok());
        assert!(CongestionFunction::for_network(1.0, 1.0, 1.0).is_err());
        assert!(CongestionFunction::for_network(1.0, -1.0, 1.25).is_err());
        // Growth sandwich and monotonicity.
        let cf = CongestionFunction::for_network(2.0, 0.5, 1.25).unwrap();
        let mut prev = 0.0;
        for &i in &[0.0, 0.3, 1.0, 7.0, 100.0] {
            let g = cf.g(i);
            assert!(g >= 0.5f64.min(2.0) * i.powf(0.25) - 1e-12);
            assert!(g <= (2.0 + 0.5) * (i.powf(0.25) + 1.0) + 1e-12);
            assert!(g > prev || i == 0.0);
            prev = g;
        }
        assert_abs_diff_eq!(cf.g(0.0), 2.0, epsilon = 0.0);
    }

    #[test]
    fn two_link_equilibrium() {
        let net = two_link();
        let cf = CongestionFunction::for_network(1.0, 1.0, 2.0).unwrap();
        let demand = Demand::ShortTerm {
            coupling: vec![(0, 1, 1.0)],
        };
        let (ta, log) = solve_wardrop(&net, &cf, &demand, 1e-6, 500, 1).unwrap();
        assert!(log.converged, "{log:?}");
        assert!(log.iterations <= 500);
        assert_abs_diff_eq!(ta.edge_flows[0], 0.5, epsilon = 1e-4);
        assert_abs_diff_eq!(ta.edge_flows[1], 0.5, epsilon = 1e-4);
        // Both used routes cost 1 + 1/2 = 3/2.
        let costs = edge_costs(&net, &cf, &ta.edge_flows);
        for path in &ta.path_support {
            let c: f64 = path.edges.iter().map(|&e| costs[e as usize]).sum();
            assert_abs_diff_eq!(c, 1.5, epsilon = 1e-4);
        }
        let report = equilibrium_certificate(&net, &cf, &ta, &demand, 1e-2).unwrap();
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn all_or_nothing_fails_certificate() {
        let net = two_link();
        let cf = CongestionFunction::for_network(1.0, 1.0, 2.0).unwrap();
        let demand = Demand::ShortTerm {
            coupling: vec![(0, 1, 1.0)],
        };
        let ta = TrafficAssignment {
            edge_flows: vec![1.0, 0.0],
            path_support: vec![PathFlow {
                origin: 0,
                dest: 1,
                edges: vec![0],
                nodes: vec![0, 1],
                mass: 1.0,
            }],
            od_coupling: vec![(0, 1, 1.0)],
            pruned_mass: 0.0,
        };
        let report = equilibrium_certificate(&net, &cf, &ta, &demand, 1e-2).unwrap();
        assert!(!report.pass, "{report:?}");
        // Carried path costs 2 while the free link costs 1.
        assert!(report.max_path_excess > 0.5);
    }

    #[test]
    fn zero_demand_is_vacuously_certified() {
        let net = two_link();
        let cf = CongestionFunction::for_network(1.0, 1.0, 2.0).unwrap();
        let demand = Demand::ShortTerm { coupling: vec![] };
        let (ta, log) = solve_wardrop(&net, &cf, &demand, 1e-6, 10, 0).unwrap();
        assert!(log.converged);
        let report = equilibrium_certificate(&net, &cf, &ta, &demand, 1e-2).unwrap();
        assert!(report.pass);
        assert_eq!(report.checked_paths, 0);
    }

    #[test]
    fn objective_decreases_monotonically() {
        let net = two_link();
        let cf = CongestionFunction::for_network(1.0, 1.0, 2.0).unwrap();
        let demand = Demand::ShortTerm {
            coupling: vec![(0, 1, 1.0)],
        };
        let (_, log) = solve_wardrop(&net, &cf, &demand, 1e-12, 50, 0).unwrap();
        for w in log.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "objective increased: {w:?}");
        }
    }

    fn small_lattice_demand() -> (FlowNetwork, Demand) {
        let lat = build_lattice(
            ModelDims::default(),
            &[0.0, 0.0, -0.1],
            &[0.5, 0.5, 0.1],
            0.125,
        )
        .unwrap();
        let net = lat.to_network().unwrap();
        let mu = DiscreteMeasure::new(
            vec![
                GroupPoint::new(vec![0.0, 0.0, 0.0]).unwrap(),
                GroupPoint::new(vec![0.0, 0.125, 0.0]).unwrap(),
            ],
            vec![0.6, 0.4],
        )
        .unwrap();
        let nu = DiscreteMeasure::new(
            vec![
                GroupPoint::new(vec![0.5, 0.375, 0.0]).unwrap(),
                GroupPoint::new(vec![0.375, 0.5, 0.0]).unwrap(),
            ],
            vec![0.5, 0.5],
        )
        .unwrap();
        let sources = snap_discrete(&lat, &mu).unwrap();
        let sinks = snap_discrete(&lat, &nu).unwrap();
        (net, Demand::LongTerm { sources, sinks })
    }

    #[test]
    fn long_term_lattice_solve_certifies() {
        let (net, demand) = small_lattice_demand();
        let cf = CongestionFunction::new(1.0, 1.0, 1.25, ModelDims::default()).unwrap();
        let (ta, log) = solve_wardrop(&net, &cf, &demand, 1e-5, 5000, 2).unwrap();
        assert!(log.converged, "{log:?}");
        let report = equilibrium_certificate(&net, &cf, &ta, &demand, 1e-2).unwrap();
        assert!(report.pass, "{report:?}");

        // Strictly convex congestion: intensities agree across seeds.
        let (ta2, log2) = solve_wardrop(&net, &cf, &demand, 1e-5, 5000, 3).unwrap();
        assert!(log2.converged);
        let norm: f64 = ta.edge_flows.iter().map(|f| f * f).sum::<f64>().sqrt();
        let diff: f64 = ta
            .edge_flows
            .iter()
            .zip(&ta2.edge_flows)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        assert!(diff <= 1e-3 * norm, "flow mismatch {diff} vs norm {norm}");
    }

    #[test]
    fn vanishing_congestion_recovers_the_lp() {
        let (net, demand) = small_lattice_demand();
        // Nearly flat congestion: the optimum collapses to the plain LP on
        // the free-flow metric.
        let cf = CongestionFunction::for_network(1.0, 1e-6, 1.25).unwrap();
        let (ta, log) = solve_wardrop(&net, &cf, &demand, 1e-6, 5000, 4).unwrap();
        assert!(log.converged);
        let Demand::LongTerm { sources, sinks } = &demand else {
            unreachable!()
        };
        // Free-flow cost table and its LP.
        let free: Vec<f64> = net.edges().iter().map(|e| e.len * cf.g(0.0)).collect();
        let sink_nodes: Vec<usize> = sinks.iter().map(|(n, _)| *n).collect();
        let table = Mat::from_rows(
            sources
                .iter()
                .map(|(s, _)| {
                    let tree = net
                        .shortest_paths(*s, &free, Some(&sink_nodes), TieBreak::PreferLow)
                        .unwrap();
                    sink_nodes.iter().map(|&t| tree.dist[t]).collect()
                })
                .collect(),
        )
        .unwrap();
        let supply: Vec<f64> = sources.iter().map(|(_, w)| *w).collect();
        let sink_mass: Vec<f64> = sinks.iter().map(|(_, w)| *w).collect();
        let (coupling, opt) = solve_transport_lp(&supply, &sink_mass, &table).unwrap();

        // Total transport cost approaches the LP optimum.
        let costs = edge_costs(&net, &cf, &ta.edge_flows);
        let carried: f64 = costs.iter().zip(&ta.edge_flows).map(|(c, f)| c * f).sum();
        assert!(
            (carried - opt).abs() <= 1e-3 * opt,
            "carried {carried} vs LP {opt}"
        );
        // And the induced coupling matches the LP coupling.
        for &(o, d, w) in &ta.od_coupling {
            let si = sources.iter().position(|(n, _)| *n == o).unwrap();
            let dj = sinks.iter().position(|(n, _)| *n == d).unwrap();
            assert_abs_diff_eq!(w, coupling[(si, dj)], epsilon = 1e-3);
        }
    }
}
