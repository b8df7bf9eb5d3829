//! Path search: Dijkstra per queue-level graph, Yen's k-shortest-path
//! search for alternatives, candidate ranking across priority classes, and
//! the reroute candidate selection used when a new flow finds every path
//! exhausted.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::{Hop, NodeId, PhysicalTopology, QueueLevelGraph, TreeCatalog};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RoutingError {
    #[error("unknown endpoint {0}")]
    UnknownEndpoint(NodeId),
}

/// A routable path for one priority class: the switch/egress hops from the
/// source's access switch up to (and including) the egress toward the
/// destination's access switch, with the summed class weight.
///
/// The final hop toward the destination host is appended by admission; it
/// is the same queue for every candidate of a class and does not reorder
/// them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathCandidate {
    pub class_q: u8,
    /// Index of a configured spanning tree containing the path, if any.
    /// `None` marks a tree-less candidate that needs lazy configuration.
    pub tree_index: Option<usize>,
    pub hops: Vec<Hop>,
    pub weight_sum_s: f64,
}

/// Node sequence produced by the search; `hops` derive from it.
#[derive(Debug, Clone, PartialEq)]
struct NodePath {
    nodes: Vec<NodeId>,
    cost: f64,
}

fn cmp_f64(a: f64, b: f64) -> Ordering {
    a.total_cmp(&b)
}

/// Dijkstra over one class graph. Returns the minimal-weight simple path
/// `src..=dst` as a node sequence, or `None` when every route is
/// overloaded. `src == dst` yields the empty-hop path with weight 0.
fn dijkstra(
    g: &QueueLevelGraph,
    src: &str,
    dst: &str,
    banned_nodes: &BTreeSet<NodeId>,
    banned_edges: &BTreeSet<(NodeId, NodeId)>,
) -> Option<NodePath> {
    #[derive(PartialEq)]
    struct Entry {
        cost: f64,
        node: NodeId,
    }
    impl Eq for Entry {}
    impl Ord for Entry {
        fn cmp(&self, other: &Self) -> Ordering {
            // Min-heap on (cost, node id) for deterministic expansion.
            cmp_f64(other.cost, self.cost).then_with(|| other.node.cmp(&self.node))
        }
    }
    impl PartialOrd for Entry {
        fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
            Some(self.cmp(other))
        }
    }

    let mut dist: BTreeMap<NodeId, f64> = BTreeMap::new();
    let mut prev: BTreeMap<NodeId, NodeId> = BTreeMap::new();
    let mut heap = BinaryHeap::new();
    dist.insert(src.to_string(), 0.0);
    heap.push(Entry { cost: 0.0, node: src.to_string() });

    while let Some(Entry { cost, node }) = heap.pop() {
        if node == dst {
            let mut nodes = vec![dst.to_string()];
            let mut cur = dst.to_string();
            while let Some(p) = prev.get(&cur) {
                nodes.push(p.clone());
                cur = p.clone();
            }
            nodes.reverse();
            return Some(NodePath { nodes, cost });
        }
        if cost > *dist.get(&node).unwrap_or(&f64::INFINITY) {
            continue;
        }
        for (next, edge) in g.neighbors(&node) {
            if banned_nodes.contains(next)
                || banned_edges.contains(&(node.clone(), next.clone()))
            {
                continue;
            }
            let cand = cost + edge.weight_s;
            if cand < *dist.get(next).unwrap_or(&f64::INFINITY) {
                dist.insert(next.clone(), cand);
                prev.insert(next.clone(), node.clone());
                heap.push(Entry { cost: cand, node: next.clone() });
            }
        }
    }
    None
}

fn to_hops(g: &QueueLevelGraph, nodes: &[NodeId]) -> Vec<Hop> {
    nodes
        .windows(2)
        .map(|w| {
            let edge = g.edge(&w[0], &w[1]).expect("path follows graph edges");
            Hop {
                switch: w[0].clone(),
                egress_port: edge.egress_port,
            }
        })
        .collect()
}

/// Shortest path between two switches on one class graph.
pub fn shortest_path(
    g: &QueueLevelGraph,
    src_switch: &str,
    dst_switch: &str,
) -> Result<Option<PathCandidate>, RoutingError> {
    for id in [src_switch, dst_switch] {
        if !g.contains_switch(id) {
            return Err(RoutingError::UnknownEndpoint(id.to_string()));
        }
    }
    let Some(path) = dijkstra(g, src_switch, dst_switch, &BTreeSet::new(), &BTreeSet::new())
    else {
        return Ok(None);
    };
    Ok(Some(PathCandidate {
        class_q: g.class_q,
        tree_index: None,
        hops: to_hops(g, &path.nodes),
        weight_sum_s: path.cost,
    }))
}

/// Yen's algorithm on one class graph: up to `k` loop-free paths in
/// non-decreasing weight order with deterministic tie-breaks.
fn yen_on_graph(g: &QueueLevelGraph, src: &str, dst: &str, k: usize) -> Vec<NodePath> {
    let mut found: Vec<NodePath> = Vec::new();
    let Some(first) = dijkstra(g, src, dst, &BTreeSet::new(), &BTreeSet::new()) else {
        return found;
    };
    found.push(first);
    if src == dst {
        return found;
    }
    let mut candidates: Vec<NodePath> = Vec::new();

    while found.len() < k {
        let last = found.last().unwrap().clone();
        for spur_idx in 0..last.nodes.len() - 1 {
            let spur_node = &last.nodes[spur_idx];
            let root = &last.nodes[..=spur_idx];

            // Ban edges used by already-found paths sharing this root, and
            // the root nodes themselves (except the spur).
            let mut banned_edges = BTreeSet::new();
            for p in &found {
                if p.nodes.len() > spur_idx && p.nodes[..=spur_idx] == *root {
                    if let Some(next) = p.nodes.get(spur_idx + 1) {
                        banned_edges.insert((spur_node.clone(), next.clone()));
                    }
                }
            }
            let banned_nodes: BTreeSet<NodeId> = root[..spur_idx].iter().cloned().collect();

            if let Some(spur) = dijkstra(g, spur_node, dst, &banned_nodes, &banned_edges) {
                let mut nodes = root[..spur_idx].to_vec();
                nodes.extend(spur.nodes);
                let mut cost = spur.cost;
                for w in root.windows(2) {
                    cost += g.edge(&w[0], &w[1]).expect("root follows edges").weight_s;
                }
                let candidate = NodePath { nodes, cost };
                if !found.contains(&candidate) && !candidates.contains(&candidate) {
                    candidates.push(candidate);
                }
            }
        }
        if candidates.is_empty() {
            break;
        }
        candidates.sort_by(|a, b| {
            cmp_f64(a.cost, b.cost)
                .then_with(|| a.nodes.len().cmp(&b.nodes.len()))
                .then_with(|| a.nodes.cmp(&b.nodes))
        });
        found.push(candidates.remove(0));
    }
    found
}

/// Up to `k` loop-free switch paths over the physical topology with unit
/// edge weights, ascending by hop count. Endpoints may be hosts (resolved
/// to their access switch) or switches.
pub fn yen_k_paths(
    topo: &PhysicalTopology,
    src: &str,
    dst: &str,
    k: usize,
) -> Result<Vec<Vec<NodeId>>, RoutingError> {
    let src_switch = topo
        .as_switch(src)
        .map_err(|_| RoutingError::UnknownEndpoint(src.to_string()))?;
    let dst_switch = topo
        .as_switch(dst)
        .map_err(|_| RoutingError::UnknownEndpoint(dst.to_string()))?;
    let unit = QueueLevelGraph::build(topo, 0, |_, _| 1.0);
    Ok(yen_on_graph(&unit, &src_switch, &dst_switch, k)
        .into_iter()
        .map(|p| p.nodes)
        .collect())
}

/// Ranks up to `k_per_class` candidates per class across all class graphs,
/// ascending by summed weight; ties prefer fewer hops, then the
/// lower-priority class (higher class index, keeping high-priority
/// headroom free), then the lexicographic hop sequence.
///
/// Each candidate is annotated with a containing configured tree where one
/// exists; tree-less candidates trigger lazy tree configuration downstream.
pub fn rank_candidates(
    graphs: &[QueueLevelGraph],
    topo: &PhysicalTopology,
    catalog: &TreeCatalog,
    src_switch: &str,
    dst_switch: &str,
    k_per_class: usize,
) -> Vec<PathCandidate> {
    let mut out: Vec<PathCandidate> = Vec::new();
    for g in graphs {
        if !g.contains_switch(src_switch) || !g.contains_switch(dst_switch) {
            continue;
        }
        for path in yen_on_graph(g, src_switch, dst_switch, k_per_class.max(1)) {
            let hops = to_hops(g, &path.nodes);
            let edges = TreeCatalog::path_edges(topo, &path.nodes);
            let tree_index = catalog
                .configured()
                .find(|t| t.contains_edges(edges.iter()))
                .map(|t| t.index);
            out.push(PathCandidate {
                class_q: g.class_q,
                tree_index,
                hops,
                weight_sum_s: path.cost,
            });
        }
    }
    out.sort_by(|a, b| {
        cmp_f64(a.weight_sum_s, b.weight_sum_s)
            .then_with(|| a.hops.len().cmp(&b.hops.len()))
            .then_with(|| b.class_q.cmp(&a.class_q))
            .then_with(|| a.hops.cmp(&b.hops))
    });
    out
}

/// View of an embedded flow for reroute selection.
#[derive(Debug, Clone)]
pub struct RerouteView {
    pub flow_id: String,
    pub rate_bps: f64,
    /// Canonical physical links the flow's path crosses.
    pub links: BTreeSet<(NodeId, NodeId)>,
}

/// Embedded flows sharing at least one physical link with the selected
/// path, ordered by descending rate (big flows free the most capacity),
/// ties by flow id.
pub fn reroute_candidates(
    embedded: &[RerouteView],
    selected_links: &BTreeSet<(NodeId, NodeId)>,
) -> Vec<String> {
    let mut hits: Vec<&RerouteView> = embedded
        .iter()
        .filter(|f| f.links.intersection(selected_links).next().is_some())
        .collect();
    hits.sort_by(|a, b| {
        cmp_f64(b.rate_bps, a.rate_bps).then_with(|| a.flow_id.cmp(&b.flow_id))
    });
    hits.into_iter().map(|f| f.flow_id.clone()).collect()
}

#[cfg(test)]
mod tests;
