//! Horizontal lattice discretization of a box domain in ℍⁿ.
//!
//! Nodes sit at `(i_1 h, …, i_{2n} h, k h²/2)` for integer indices inside the
//! box. Edges are the exact time-`h` flows of `±X_j`: stepping `±h` along
//! axis `j ≤ n` changes the vertical index by `∓ i_{n+j}` (and by `± i_j` for
//! the conjugate axes), so every edge lands exactly on a lattice node and has
//! CC length exactly `h`.
//!
//! The stencil realizes an ℓ¹-type horizontal metric: with unit weight,
//! axis-aligned pairs are exact, while a vertical displacement `z` costs
//! `4√z` in the `h → 0` limit (square loops are ℓ¹-isoperimetric), an
//! overestimate of `√(4π z)` by the fixed factor `4/√(4π) ≈ 1.1284`.
//!
//! Every horizontal move preserves the parity of `k − Σ_j i_j i_{n+j}`, so
//! the full index grid splits into two components regardless of `h`;
//! cross-parity queries report `+∞`. Demand placement should use the
//! parity-aware snapping (`snap_discrete_connected` / `snap_grid_connected`),
//! which keeps all marginals in the even class and hence mutually reachable.

use serde::{Deserialize, Serialize};

use crate::congestion::graph::FlowNetwork;
use crate::density::GridField;
use crate::error::{Error, Result};
use crate::hgroup::{GroupPoint, ModelDims};
use crate::otcore::{DiscreteMeasure, Mat};

/// Node weight (cost per unit CC length), either uniform or per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum WeightField {
    Uniform(f64),
    PerNode(Vec<f64>),
}

impl WeightField {
    pub fn uniform(c: f64) -> Result<Self> {
        if !(c >= 0.0) || !c.is_finite() {
            return Err(Error::InvalidParameter(format!("weight {c}")));
        }
        Ok(WeightField::Uniform(c))
    }

    pub fn per_node(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidParameter("negative node weight".into()));
        }
        Ok(WeightField::PerNode(values))
    }

    pub fn value(&self, node: usize) -> f64 {
        match self {
            WeightField::Uniform(c) => *c,
            WeightField::PerNode(v) => v[node],
        }
    }

    fn uniform_value(&self) -> Option<f64> {
        match self {
            WeightField::Uniform(c) => Some(*c),
            WeightField::PerNode(_) => None,
        }
    }

    fn check_len(&self, nodes: usize) -> Result<()> {
        if let WeightField::PerNode(v) = self {
            if v.len() != nodes {
                return Err(Error::DimensionMismatch {
                    expected: nodes,
                    got: v.len(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct HorizontalLattice {
    dims: ModelDims,
    h: f64,
    /// Lowest index per axis (2n horizontal axes, then the vertical one).
    lo: Vec<i64>,
    /// Number of indices per axis.
    counts: Vec<usize>,
    /// Mixed-radix strides; the vertical axis varies fastest.
    strides: Vec<usize>,
    node_count: usize,
}

/// Builds the lattice of spacing `h` (vertical spacing `h²/2`) inside the
/// closed box `[lo, hi]`.
pub fn build_lattice(dims: ModelDims, box_lo: &[f64], box_hi: &[f64], h: f64) -> Result<HorizontalLattice> {
    let d = dims.dim();
    if box_lo.len() != d || box_hi.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: box_lo.len().min(box_hi.len()),
        });
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidParameter(format!("spacing {h}")));
    }
    let mut lo = Vec::with_capacity(d);
    let mut counts = Vec::with_capacity(d);
    for a in 0..d {
        let spacing = if a < d - 1 { h } else { h * h / 2.0 };
        let eps = 1e-9;
        let lo_idx = (box_lo[a] / spacing - eps).ceil() as i64;
        let hi_idx = (box_hi[a] / spacing + eps).floor() as i64;
        if hi_idx < lo_idx {
            return Err(Error::EmptyLattice);
        }
        lo.push(lo_idx);
        counts.push((hi_idx - lo_idx + 1) as usize);
    }
    let mut total: u128 = 1;
    for c in &counts {
        total *= *c as u128;
    }
    if total > u32::MAX as u128 {
        return Err(Error::InvalidParameter(format!(
            "lattice with {total} nodes exceeds the addressable size"
        )));
    }
    let mut strides = vec![1usize; d];
    for a in (0..d - 1).rev() {
        strides[a] = strides[a + 1] * counts[a + 1];
    }
    Ok(HorizontalLattice {
        dims,
        h,
        lo,
        counts,
        strides,
        node_count: total as usize,
    })
}

impl HorizontalLattice {
    pub fn dims(&self) -> ModelDims {
        self.dims
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn vertical_spacing(&self) -> f64 {
        self.h * self.h / 2.0
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Lebesgue volume represented by one node cell, `h^{2n} · h²/2`.
    pub fn node_volume(&self) -> f64 {
        self.h.powi(self.dims.horizontal_dim() as i32) * self.vertical_spacing()
    }

    pub fn decode(&self, idx: usize) -> Vec<i64> {
        let d = self.dims.dim();
        let mut ints = vec![0i64; d];
        let mut rem = idx;
        for a in 0..d {
            let q = rem / self.strides[a];
            rem %= self.strides[a];
            ints[a] = self.lo[a] + q as i64;
        }
        ints
    }

    pub fn encode(&self, ints: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for a in 0..ints.len() {
            let off = ints[a] - self.lo[a];
            if off < 0 || off as usize >= self.counts[a] {
                return None;
            }
            idx += off as usize * self.strides[a];
        }
        Some(idx)
    }

    pub fn position(&self, idx: usize) -> GroupPoint {
        let ints = self.decode(idx);
        let d = self.dims.dim();
        let mut coords = Vec::with_capacity(d);
        for a in 0..d - 1 {
            coords.push(ints[a] as f64 * self.h);
        }
        coords.push(ints[d - 1] as f64 * self.vertical_spacing());
        GroupPoint::new(coords).expect("lattice position")
    }

    /// Vertical index change of a `sign` step along horizontal axis `dir`.
    fn vertical_shift(&self, ints: &[i64], dir: usize, sign: i64) -> i64 {
        let n = self.dims.n;
        if dir < n {
            -sign * ints[n + dir]
        } else {
            sign * ints[dir - n]
        }
    }

    /// Neighbor along `(dir, sign)` when it stays in the box.
    pub fn step(&self, ints: &[i64], dir: usize, sign: i64) -> Option<usize> {
        let d = self.dims.dim();
        let mut target = ints.to_vec();
        target[dir] += sign;
        target[d - 1] += self.vertical_shift(ints, dir, sign);
        self.encode(&target)
    }

    /// All neighbors of a node with the generating direction index.
    pub fn neighbors(&self, idx: usize) -> Vec<(usize, usize, i64)> {
        let ints = self.decode(idx);
        let mut out = Vec::with_capacity(2 * self.dims.horizontal_dim());
        for dir in 0..self.dims.horizontal_dim() {
            for sign in [1i64, -1] {
                if let Some(nbr) = self.step(&ints, dir, sign) {
                    out.push((nbr, dir, sign));
                }
            }
        }
        out
    }

    /// Materializes the lattice as an explicit flow network (every edge of
    /// length `h`, node ids preserved). Intended for solver-scale lattices.
    pub fn to_network(&self) -> Result<FlowNetwork> {
        let mut edges = Vec::new();
        for idx in 0..self.node_count {
            let ints = self.decode(idx);
            for dir in 0..self.dims.horizontal_dim() {
                if let Some(nbr) = self.step(&ints, dir, 1) {
                    edges.push((idx, nbr, self.h));
                }
            }
        }
        FlowNetwork::new(self.node_count, edges)
    }

    /// Parity class `(k − Σ_j i_j i_{n+j}) mod 2` of a node; horizontal
    /// moves preserve it, so nodes of different parity are disconnected.
    pub fn component_parity(&self, idx: usize) -> u8 {
        let ints = self.decode(idx);
        let n = self.dims.n;
        let mut cross = 0i64;
        for j in 0..n {
            cross += ints[j] * ints[n + j];
        }
        ((ints[self.dims.dim() - 1] - cross).rem_euclid(2)) as u8
    }

    /// Validates that `b` follows `a` along one lattice edge.
    fn check_adjacent(&self, a: usize, b: usize) -> Result<()> {
        let ia = self.decode(a);
        for dir in 0..self.dims.horizontal_dim() {
            for sign in [1i64, -1] {
                if self.step(&ia, dir, sign) == Some(b) {
                    return Ok(());
                }
            }
        }
        Err(Error::NotAdjacent(a, b))
    }
}

/// Trapezoid-quadrature weighted length of a lattice path:
/// `Σ_edges h (φ(q) + φ(q'))/2`.
pub fn weighted_length(
    lattice: &HorizontalLattice,
    phi: &WeightField,
    path: &[usize],
) -> Result<f64> {
    phi.check_len(lattice.node_count())?;
    let mut total = 0.0;
    for pair in path.windows(2) {
        lattice.check_adjacent(pair[0], pair[1])?;
        total += lattice.h * (phi.value(pair[0]) + phi.value(pair[1])) / 2.0;
    }
    Ok(total)
}

/// Weighted shortest-path cost table between source and sink nodes, with
/// edge costs `h (φ(q) + φ(q'))/2`. Disconnected pairs report `+∞`.
pub fn c_phi(
    lattice: &HorizontalLattice,
    phi: &WeightField,
    sources: &[usize],
    sinks: &[usize],
) -> Result<Mat> {
    phi.check_len(lattice.node_count())?;
    let run_source = |&src: &usize| -> Result<Vec<f64>> {
        if let Some(c) = phi.uniform_value() {
            let steps = bfs_steps(lattice, src, sinks)?;
            Ok(sinks
                .iter()
                .map(|&t| {
                    if steps[t] == u32::MAX {
                        f64::INFINITY
                    } else {
                        steps[t] as f64 * lattice.h * c
                    }
                })
                .collect())
        } else {
            let dist = dijkstra_weighted(lattice, phi, src, sinks)?;
            Ok(sinks.iter().map(|&t| dist[t]).collect())
        }
    };
    let rows: Vec<Vec<f64>> = if lattice.node_count() <= (1 << 21) && sources.len() > 1 {
        use rayon::prelude::*;
        sources.par_iter().map(run_source).collect::<Result<_>>()?
    } else {
        sources.iter().map(run_source).collect::<Result<_>>()?
    };
    Mat::from_rows(rows)
}

/// Breadth-first step counts from `source`; `u32::MAX` marks unreachable
/// nodes. Stops once all `targets` are settled.
fn bfs_steps(lattice: &HorizontalLattice, source: usize, targets: &[usize]) -> Result<Vec<u32>> {
    let n = lattice.node_count();
    let mut steps = vec![u32::MAX; n];
    let mut pending = std::collections::HashSet::new();
    for &t in targets {
        if t >= n {
            return Err(Error::InvalidParameter(format!("node {t} out of range")));
        }
        pending.insert(t);
    }
    let mut queue = std::collections::VecDeque::new();
    steps[source] = 0;
    pending.remove(&source);
    queue.push_back(source as u32);
    while let Some(at) = queue.pop_front() {
        if pending.is_empty() {
            break;
        }
        let s = steps[at as usize] + 1;
        let ints = lattice.decode(at as usize);
        for dir in 0..lattice.dims.horizontal_dim() {
            for sign in [1i64, -1] {
                if let Some(nbr) = lattice.step(&ints, dir, sign) {
                    if steps[nbr] == u32::MAX {
                        steps[nbr] = s;
                        pending.remove(&nbr);
                        queue.push_back(nbr as u32);
                    }
                }
            }
        }
    }
    Ok(steps)
}

fn dijkstra_weighted(
    lattice: &HorizontalLattice,
    phi: &WeightField,
    source: usize,
    targets: &[usize],
) -> Result<Vec<f64>> {
    let n = lattice.node_count();
    if n > (1 << 24) {
        return Err(Error::InvalidParameter(
            "weighted metric query on an oversized lattice; use a uniform weight or a smaller box"
                .into(),
        ));
    }
    let mut dist = vec![f64::INFINITY; n];
    let mut settled = vec![false; n];
    let mut pending: std::collections::HashSet<usize> = targets.iter().copied().collect();
    let mut heap = std::collections::BinaryHeap::new();
    dist[source] = 0.0;
    heap.push((std::cmp::Reverse(ordered(0.0)), source as u32));
    while let Some((std::cmp::Reverse(cost), at)) = heap.pop() {
        let at = at as usize;
        if settled[at] {
            continue;
        }
        settled[at] = true;
        pending.remove(&at);
        if pending.is_empty() {
            break;
        }
        let cost = f64::from_bits(cost);
        let ints = lattice.decode(at);
        let phi_at = phi.value(at);
        for dir in 0..lattice.dims.horizontal_dim() {
            for sign in [1i64, -1] {
                if let Some(nbr) = lattice.step(&ints, dir, sign) {
                    if settled[nbr] {
                        continue;
                    }
                    let w = lattice.h * (phi_at + phi.value(nbr)) / 2.0;
                    let next = cost + w;
                    if next < dist[nbr] {
                        dist[nbr] = next;
                        heap.push((std::cmp::Reverse(ordered(next)), nbr as u32));
                    }
                }
            }
        }
    }
    Ok(dist)
}

/// Order-preserving bit image of a nonnegative float.
fn ordered(x: f64) -> u64 {
    x.to_bits()
}

/// Snaps a discrete measure to lattice nodes (nearest node per atom; exact
/// midpoints round down, which selects the lexicographically smallest node
/// index). Returns `(node, mass)` pairs sorted by node index.
pub fn snap_discrete(
    lattice: &HorizontalLattice,
    measure: &DiscreteMeasure,
) -> Result<Vec<(usize, f64)>> {
    let mut acc = std::collections::BTreeMap::new();
    for (point, w) in measure.points().iter().zip(measure.weights()) {
        let node = nearest_node(lattice, point.coords())?;
        *acc.entry(node).or_insert(0.0) += w;
    }
    Ok(acc.into_iter().collect())
}

/// Snaps a grid density (cell masses at cell centers) to lattice nodes.
pub fn snap_grid(lattice: &HorizontalLattice, field: &GridField) -> Result<Vec<(usize, f64)>> {
    let vol = field.spec.cell_volume();
    let mut acc = std::collections::BTreeMap::new();
    for (idx, v) in field.values.iter().enumerate() {
        if *v > 0.0 {
            let node = nearest_node(lattice, &field.spec.cell_center(idx))?;
            *acc.entry(node).or_insert(0.0) += v * vol;
        }
    }
    if acc.is_empty() {
        return Err(Error::InvalidMeasure("field carries no mass".into()));
    }
    Ok(acc.into_iter().collect())
}

fn nearest_node(lattice: &HorizontalLattice, coords: &[f64]) -> Result<usize> {
    let d = lattice.dims.dim();
    if coords.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: coords.len(),
        });
    }
    let mut ints = Vec::with_capacity(d);
    for a in 0..d {
        let spacing = if a < d - 1 {
            lattice.h
        } else {
            lattice.vertical_spacing()
        };
        // ceil(x/Δ − ½): ties round toward the smaller index.
        let mut k = (coords[a] / spacing - 0.5).ceil() as i64;
        let hi = lattice.lo[a] + lattice.counts[a] as i64 - 1;
        k = k.clamp(lattice.lo[a], hi);
        ints.push(k);
    }
    lattice
        .encode(&ints)
        .ok_or_else(|| Error::InvalidParameter("snap target outside lattice".into()))
}

/// Nearest node in the even parity class (the class of the origin). The
/// horizontal indices are rounded per axis; the vertical index is then
/// rounded to the closest admissible parity, so the extra displacement is at
/// most one vertical spacing.
fn nearest_node_connected(lattice: &HorizontalLattice, coords: &[f64]) -> Result<usize> {
    let node = nearest_node(lattice, coords)?;
    if lattice.component_parity(node) == 0 {
        return Ok(node);
    }
    let mut ints = lattice.decode(node);
    let d = lattice.dims.dim();
    let spacing = lattice.vertical_spacing();
    let raw = coords[d - 1] / spacing;
    let k = ints[d - 1];
    // Prefer the admissible vertical neighbor on the side of the true value;
    // ties go down (the smaller node index).
    let candidate = if raw > k as f64 { k + 1 } else { k - 1 };
    let hi = lattice.lo[d - 1] + lattice.counts[d - 1] as i64 - 1;
    ints[d - 1] = if (lattice.lo[d - 1]..=hi).contains(&candidate) {
        candidate
    } else if candidate > hi {
        k - 1
    } else {
        k + 1
    };
    lattice
        .encode(&ints)
        .ok_or_else(|| Error::InvalidParameter("no even-parity node near the target".into()))
}

/// [`snap_discrete`] restricted to the even parity class, keeping every atom
/// mutually reachable on a large-enough box.
pub fn snap_discrete_connected(
    lattice: &HorizontalLattice,
    measure: &DiscreteMeasure,
) -> Result<Vec<(usize, f64)>> {
    let mut acc = std::collections::BTreeMap::new();
    for (point, w) in measure.points().iter().zip(measure.weights()) {
        let node = nearest_node_connected(lattice, point.coords())?;
        *acc.entry(node).or_insert(0.0) += w;
    }
    Ok(acc.into_iter().collect())
}

/// [`snap_grid`] restricted to the even parity class.
pub fn snap_grid_connected(
    lattice: &HorizontalLattice,
    field: &GridField,
) -> Result<Vec<(usize, f64)>> {
    let vol = field.spec.cell_volume();
    let mut acc = std::collections::BTreeMap::new();
    for (idx, v) in field.values.iter().enumerate() {
        if *v > 0.0 {
            let node = nearest_node_connected(lattice, &field.spec.cell_center(idx))?;
            *acc.entry(node).or_insert(0.0) += v * vol;
        }
    }
    if acc.is_empty() {
        return Err(Error::InvalidMeasure("field carries no mass".into()));
    }
    Ok(acc.into_iter().collect())
}

/// Bins edge traffic `i_e · len_e` into a grid over the lattice box (edge
/// midpoint binning) and divides by cell volume, yielding the traffic
/// intensity as a density field.
pub fn intensity_to_field(
    lattice: &HorizontalLattice,
    network: &FlowNetwork,
    edge_flows: &[f64],
    shape: &[usize],
) -> Result<GridField> {
    if network.edge_count() != edge_flows.len() {
        return Err(Error::DimensionMismatch {
            expected: network.edge_count(),
            got: edge_flows.len(),
        });
    }
    let d = lattice.dims.dim();
    let mut lo = Vec::with_capacity(d);
    let mut hi = Vec::with_capacity(d);
    for a in 0..d {
        let spacing = if a < d - 1 {
            lattice.h
        } else {
            lattice.vertical_spacing()
        };
        lo.push((lattice.lo[a] as f64 - 0.5) * spacing);
        hi.push((lattice.lo[a] as f64 + lattice.counts[a] as f64 - 0.5) * spacing);
    }
    let spec = crate::density::GridSpec::new(lo, hi, shape.to_vec())?;
    let mut field = GridField::zeros(spec);
    let vol = field.spec.cell_volume();
    for (e, flow) in edge_flows.iter().enumerate() {
        if *flow == 0.0 {
            continue;
        }
        let edge = network.edge(e as u32);
        let pa = lattice.position(edge.a as usize);
        let pb = lattice.position(edge.b as usize);
        let mid: Vec<f64> = pa
            .coords()
            .iter()
            .zip(pb.coords())
            .map(|(x, y)| 0.5 * (x + y))
            .collect();
        let cell = field
            .spec
            .cell_of(&mid)
            .ok_or_else(|| Error::OutOfBox(mid.clone()))?;
        field.values[cell] += flow * edge.len / vol;
    }
    Ok(field)
}
