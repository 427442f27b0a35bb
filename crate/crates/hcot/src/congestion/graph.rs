//! Undirected flow multigraph with per-query edge weights.
//!
//! Edges are undirected for cost purposes (congestion sees total occupation)
//! while paths are directed edge sequences. Parallel edges are allowed, so a
//! path is identified by its edge ids, not by its nodes.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: u32,
    pub b: u32,
    pub len: f64,
}

impl Edge {
    pub fn other(&self, node: u32) -> u32 {
        if node == self.a {
            self.b
        } else {
            self.a
        }
    }
}

/// Deterministic preference between equal-cost labels; exercised by the
/// solver's seed to probe tie-dependent path choices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TieBreak {
    PreferLow,
    PreferHigh,
}

#[derive(Debug, Clone)]
pub struct FlowNetwork {
    node_count: usize,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<u32>>,
}

#[derive(Debug, Clone)]
pub struct ShortestPathTree {
    pub source: usize,
    pub dist: Vec<f64>,
    pub parent_edge: Vec<u32>,
}

pub const NO_EDGE: u32 = u32::MAX;

impl FlowNetwork {
    pub fn new(node_count: usize, edge_list: Vec<(usize, usize, f64)>) -> Result<Self> {
        let mut edges = Vec::with_capacity(edge_list.len());
        let mut adjacency = vec![Vec::new(); node_count];
        for (id, (a, b, len)) in edge_list.into_iter().enumerate() {
            if a >= node_count || b >= node_count || a == b {
                return Err(Error::InvalidParameter(format!(
                    "bad edge ({a}, {b}) on {node_count} nodes"
                )));
            }
            if !(len > 0.0) || !len.is_finite() {
                return Err(Error::InvalidParameter(format!("edge length {len}")));
            }
            edges.push(Edge {
                a: a as u32,
                b: b as u32,
                len,
            });
            adjacency[a].push(id as u32);
            adjacency[b].push(id as u32);
        }
        Ok(FlowNetwork {
            node_count,
            edges,
            adjacency,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: u32) -> &Edge {
        &self.edges[e as usize]
    }

    pub fn incident(&self, node: usize) -> &[u32] {
        &self.adjacency[node]
    }

    /// Dijkstra with the given nonnegative edge weights. Stops early once
    /// every node of `targets` is settled (when provided).
    pub fn shortest_paths(
        &self,
        source: usize,
        weights: &[f64],
        targets: Option<&[usize]>,
        tie: TieBreak,
    ) -> Result<ShortestPathTree> {
        if weights.len() != self.edges.len() {
            return Err(Error::DimensionMismatch {
                expected: self.edges.len(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| *w < 0.0 || w.is_nan()) {
            return Err(Error::InvalidParameter("negative edge weight".into()));
        }
        let mut dist = vec![f64::INFINITY; self.node_count];
        let mut parent = vec![NO_EDGE; self.node_count];
        let mut settled = vec![false; self.node_count];
        let mut remaining = targets.map(|t| {
            let mut pending = vec![false; self.node_count];
            let mut count = 0usize;
            for &n in t {
                if !pending[n] {
                    pending[n] = true;
                    count += 1;
                }
            }
            (pending, count)
        });

        let mut heap = std::collections::BinaryHeap::new();
        dist[source] = 0.0;
        heap.push(HeapItem {
            cost: 0.0,
            node: source as u32,
            tie,
        });
        while let Some(HeapItem { cost, node, .. }) = heap.pop() {
            let node_us = node as usize;
            if settled[node_us] {
                continue;
            }
            settled[node_us] = true;
            if let Some((pending, count)) = remaining.as_mut() {
                if pending[node_us] {
                    pending[node_us] = false;
                    *count -= 1;
                    if *count == 0 {
                        break;
                    }
                }
            }
            for &e in &self.adjacency[node_us] {
                let edge = self.edges[e as usize];
                let next = edge.other(node) as usize;
                let next_cost = cost + weights[e as usize];
                let better = match next_cost.partial_cmp(&dist[next]) {
                    Some(std::cmp::Ordering::Less) => true,
                    Some(std::cmp::Ordering::Equal) => match tie {
                        // On ties prefer the smaller/larger parent edge id.
                        TieBreak::PreferLow => e < parent[next],
                        TieBreak::PreferHigh => parent[next] != NO_EDGE && e > parent[next],
                    },
                    _ => false,
                };
                if better && !settled[next] {
                    dist[next] = next_cost;
                    parent[next] = e;
                    heap.push(HeapItem {
                        cost: next_cost,
                        node: next as u32,
                        tie,
                    });
                }
            }
        }
        Ok(ShortestPathTree {
            source,
            dist,
            parent_edge: parent,
        })
    }

    /// Edge sequence from the tree source to `target`, or `None` when
    /// unreachable.
    pub fn path_to(&self, tree: &ShortestPathTree, target: usize) -> Option<Vec<u32>> {
        if tree.dist[target].is_infinite() {
            return None;
        }
        let mut path = Vec::new();
        let mut node = target as u32;
        while node as usize != tree.source {
            let e = tree.parent_edge[node as usize];
            if e == NO_EDGE {
                return None;
            }
            path.push(e);
            node = self.edges[e as usize].other(node);
        }
        path.reverse();
        Some(path)
    }

    /// Node sequence of an edge path starting at `source`.
    pub fn path_nodes(&self, source: usize, edges: &[u32]) -> Vec<u32> {
        let mut nodes = vec![source as u32];
        let mut at = source as u32;
        for &e in edges {
            at = self.edges[e as usize].other(at);
            nodes.push(at);
        }
        nodes
    }
}

struct HeapItem {
    cost: f64,
    node: u32,
    tie: TieBreak,
}

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.cost == other.cost && self.node == other.node
    }
}
impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Reversed for a min-heap; ties broken on node id for determinism.
        other
            .cost
            .partial_cmp(&self.cost)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| match self.tie {
                TieBreak::PreferLow => other.node.cmp(&self.node),
                TieBreak::PreferHigh => self.node.cmp(&other.node),
            })
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shortest_path_on_a_square() {
        // 0-1-3 and 0-2-3 with unequal weights.
        let net = FlowNetwork::new(
            4,
            vec![(0, 1, 1.0), (1, 3, 1.0), (0, 2, 1.0), (2, 3, 1.0)],
        )
        .unwrap();
        let w = vec![1.0, 1.0, 1.0, 3.0];
        let tree = net
            .shortest_paths(0, &w, None, TieBreak::PreferLow)
            .unwrap();
        assert_eq!(tree.dist[3], 2.0);
        let path = net.path_to(&tree, 3).unwrap();
        assert_eq!(path, vec![0, 1]);
        assert_eq!(net.path_nodes(0, &path), vec![0, 1, 3]);
    }

    #[test]
    fn parallel_edges_and_ties() {
        let net = FlowNetwork::new(2, vec![(0, 1, 1.0), (0, 1, 1.0)]).unwrap();
        let w = vec![1.0, 1.0];
        let low = net
            .shortest_paths(0, &w, None, TieBreak::PreferLow)
            .unwrap();
        assert_eq!(net.path_to(&low, 1).unwrap(), vec![0]);
        let high = net
            .shortest_paths(0, &w, None, TieBreak::PreferHigh)
            .unwrap();
        assert_eq!(net.path_to(&high, 1).unwrap(), vec![1]);
    }

    #[test]
    fn unreachable_is_infinite() {
        let net = FlowNetwork::new(3, vec![(0, 1, 1.0)]).unwrap();
        let tree = net
            .shortest_paths(0, &[1.0], None, TieBreak::PreferLow)
            .unwrap();
        assert!(tree.dist[2].is_infinite());
        assert!(net.path_to(&tree, 2).is_none());
    }
}
