//! Spanning-tree enumeration over the switch subgraph and the catalog
//! binding trees to VLAN IDs.
//!
//! Every spanning tree of the switch graph is one loop-free routing layer;
//! a VLAN ID selects it end to end. Enumeration is lazy: only the first
//! tree is configured at startup, further trees get a VLAN the first time
//! an accepted path needs them. The branch order is fixed by the
//! lexicographic link ordering, so indices and VLAN assignments are
//! reproducible across runs.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::{
    NodeId, PhysicalTopology, TopologyError, BRIDGE_PRIORITY_STEP, VLAN_MAX, VLAN_MIN,
};

/// Canonical switch-switch edge, `(lower id, higher id)`.
pub type TreeEdge = (NodeId, NodeId);

/// One spanning tree of the switch subgraph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanningTree {
    /// Position in the deterministic enumeration order.
    pub index: usize,
    /// Canonical edges, sorted.
    pub edges: Vec<TreeEdge>,
    pub root: NodeId,
    pub vlan_id: Option<u16>,
    pub configured: bool,
}

impl SpanningTree {
    /// Builds a tree with the default root: the switch minimizing the tree
    /// eccentricity, ties broken by lowest id.
    pub fn new(index: usize, mut edges: Vec<TreeEdge>, single_switch: Option<NodeId>) -> SpanningTree {
        edges.sort();
        let root = match single_switch {
            Some(id) => id,
            None => choose_root(&edges),
        };
        SpanningTree {
            index,
            edges,
            root,
            vlan_id: None,
            configured: false,
        }
    }

    pub fn with_root(index: usize, mut edges: Vec<TreeEdge>, root: NodeId) -> SpanningTree {
        edges.sort();
        SpanningTree {
            index,
            edges,
            root,
            vlan_id: None,
            configured: false,
        }
    }

    fn adjacency(&self) -> BTreeMap<&NodeId, Vec<&NodeId>> {
        let mut adj: BTreeMap<&NodeId, Vec<&NodeId>> = BTreeMap::new();
        for (a, b) in &self.edges {
            adj.entry(a).or_default().push(b);
            adj.entry(b).or_default().push(a);
        }
        adj
    }

    /// Depth of every switch below the root.
    pub fn depths(&self) -> BTreeMap<NodeId, usize> {
        let adj = self.adjacency();
        let mut depths = BTreeMap::from([(self.root.clone(), 0usize)]);
        let mut queue = VecDeque::from([&self.root]);
        while let Some(node) = queue.pop_front() {
            let d = depths[node];
            if let Some(neighbors) = adj.get(node) {
                for &next in neighbors {
                    if !depths.contains_key(next) {
                        depths.insert(next.clone(), d + 1);
                        queue.push_back(next);
                    }
                }
            }
        }
        depths
    }

    /// Whether every edge of `path_edges` lies on this tree.
    pub fn contains_edges<'a, I>(&self, path_edges: I) -> bool
    where
        I: IntoIterator<Item = &'a TreeEdge>,
    {
        let set: BTreeSet<&TreeEdge> = self.edges.iter().collect();
        path_edges.into_iter().all(|e| set.contains(e))
    }
}

/// Root choice: minimize the maximum BFS depth, ties by lowest id.
fn choose_root(edges: &[TreeEdge]) -> NodeId {
    let mut nodes: BTreeSet<&NodeId> = BTreeSet::new();
    for (a, b) in edges {
        nodes.insert(a);
        nodes.insert(b);
    }
    let mut adj: BTreeMap<&NodeId, Vec<&NodeId>> = BTreeMap::new();
    for (a, b) in edges {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    let mut best: Option<(usize, &NodeId)> = None;
    for &candidate in &nodes {
        let mut depth = BTreeMap::from([(candidate, 0usize)]);
        let mut queue = VecDeque::from([candidate]);
        let mut ecc = 0;
        while let Some(node) = queue.pop_front() {
            let d = depth[node];
            ecc = ecc.max(d);
            if let Some(neighbors) = adj.get(node) {
                for &next in neighbors {
                    if !depth.contains_key(next) {
                        depth.insert(next, d + 1);
                        queue.push_back(next);
                    }
                }
            }
        }
        match best {
            Some((best_ecc, best_id)) if (ecc, candidate) >= (best_ecc, best_id) => {}
            _ => best = Some((ecc, candidate)),
        }
    }
    best.expect("tree has at least one node").1.clone()
}

/// BFS bridge-priority plan for one tree: the root gets priority 0 and
/// every level below adds one STP step (4096). Fails when the tree is
/// deeper than the 16 values the protocol field allows.
pub fn bridge_priorities(tree: &SpanningTree) -> Result<BTreeMap<NodeId, u16>, TopologyError> {
    let depths = tree.depths();
    let max_depth = depths.values().copied().max().unwrap_or(0);
    if max_depth >= 16 {
        return Err(TopologyError::DepthExceeded(max_depth));
    }
    Ok(depths
        .into_iter()
        .map(|(node, depth)| (node, depth as u16 * BRIDGE_PRIORITY_STEP))
        .collect())
}

/// Lazy deterministic enumeration of all spanning trees.
///
/// Classic include/exclude branching on the lexicographically sorted link
/// list: each frame either commits the next link into the tree (if it
/// closes no cycle) or discards it (if the remaining links still connect
/// the graph). Include branches are explored first, so the first tree is
/// the greedy lexicographic one.
#[derive(Debug, Clone)]
pub struct TreeEnumerator {
    switches: Vec<NodeId>,
    edges: Vec<(usize, usize)>,
    edge_names: Vec<TreeEdge>,
    stack: Vec<Frame>,
    emitted: usize,
    single_switch: Option<NodeId>,
}

#[derive(Debug, Clone)]
struct Frame {
    included: Vec<usize>,
    excluded: Vec<bool>,
    next_edge: usize,
}

impl TreeEnumerator {
    pub fn new(topo: &PhysicalTopology) -> TreeEnumerator {
        let switches: Vec<NodeId> = topo.switches().map(|n| n.id.clone()).collect();
        let index: BTreeMap<&NodeId, usize> =
            switches.iter().enumerate().map(|(i, n)| (n, i)).collect();
        let links = topo.switch_links();
        let edges: Vec<(usize, usize)> = links.iter().map(|l| (index[&l.a], index[&l.b])).collect();
        let edge_names: Vec<TreeEdge> = links.iter().map(|l| l.key()).collect();
        let stack = vec![Frame {
            included: Vec::new(),
            excluded: vec![false; edges.len()],
            next_edge: 0,
        }];
        let single_switch = if switches.len() == 1 {
            Some(switches[0].clone())
        } else {
            None
        };
        TreeEnumerator {
            switches,
            edges,
            edge_names,
            stack,
            emitted: 0,
            single_switch,
        }
    }

    fn forms_cycle(&self, included: &[usize], candidate: usize) -> bool {
        let mut dsu = Dsu::new(self.switches.len());
        for &e in included {
            dsu.union(self.edges[e].0, self.edges[e].1);
        }
        !dsu.union(self.edges[candidate].0, self.edges[candidate].1)
    }

    /// Whether the non-excluded links still connect all switches. The
    /// included forest is acyclic and made of non-excluded links, so
    /// connectivity here is exactly "some spanning tree extending the
    /// current choice remains".
    fn still_spannable(&self, excluded: &[bool]) -> bool {
        let mut dsu = Dsu::new(self.switches.len());
        let mut components = self.switches.len();
        for (e, &off) in excluded.iter().enumerate() {
            if !off && dsu.union(self.edges[e].0, self.edges[e].1) {
                components -= 1;
            }
        }
        components == 1
    }
}

impl Iterator for TreeEnumerator {
    type Item = SpanningTree;

    fn next(&mut self) -> Option<SpanningTree> {
        if self.switches.is_empty() {
            return None;
        }
        if self.switches.len() == 1 {
            if self.emitted == 0 {
                self.emitted = 1;
                return Some(SpanningTree::new(0, Vec::new(), self.single_switch.clone()));
            }
            return None;
        }
        let need = self.switches.len() - 1;
        while let Some(frame) = self.stack.pop() {
            if frame.included.len() == need {
                let edges = frame
                    .included
                    .iter()
                    .map(|&e| self.edge_names[e].clone())
                    .collect();
                let tree = SpanningTree::new(self.emitted, edges, None);
                self.emitted += 1;
                return Some(tree);
            }
            if frame.next_edge >= self.edges.len() {
                continue;
            }
            let e = frame.next_edge;

            // Exclude branch, pushed first so the include branch is on top.
            let mut excluded = frame.excluded.clone();
            excluded[e] = true;
            if self.still_spannable(&excluded) {
                self.stack.push(Frame {
                    included: frame.included.clone(),
                    excluded,
                    next_edge: e + 1,
                });
            }

            if !self.forms_cycle(&frame.included, e) {
                let mut included = frame.included.clone();
                included.push(e);
                self.stack.push(Frame {
                    included,
                    excluded: frame.excluded,
                    next_edge: e + 1,
                });
            }
        }
        None
    }
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Dsu {
        Dsu {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

/// Enumerates up to `limit` spanning trees of the switch subgraph.
pub fn enumerate_spanning_trees(topo: &PhysicalTopology, limit: usize) -> Vec<SpanningTree> {
    TreeEnumerator::new(topo).take(limit).collect()
}

/// The tree/VLAN catalog the controller mutates as paths demand new trees.
///
/// Only the `trees` prefix that has been materialized is held; the
/// enumerator continues deterministically on demand, so the catalog can be
/// rebuilt from `(enumerated_count, assignments)` alone.
#[derive(Debug, Clone)]
pub struct TreeCatalog {
    trees: Vec<SpanningTree>,
    enumerator: Option<TreeEnumerator>,
}

impl TreeCatalog {
    pub fn new(topo: &PhysicalTopology) -> TreeCatalog {
        TreeCatalog {
            trees: Vec::new(),
            enumerator: Some(TreeEnumerator::new(topo)),
        }
    }

    pub fn trees(&self) -> &[SpanningTree] {
        &self.trees
    }

    pub fn tree(&self, index: usize) -> Option<&SpanningTree> {
        self.trees.get(index)
    }

    pub fn configured(&self) -> impl Iterator<Item = &SpanningTree> {
        self.trees.iter().filter(|t| t.configured)
    }

    /// Materializes trees until at least `n` exist (or enumeration ends).
    pub fn ensure_enumerated(&mut self, n: usize) {
        while self.trees.len() < n {
            match self.enumerator.as_mut().and_then(Iterator::next) {
                Some(tree) => self.trees.push(tree),
                None => {
                    self.enumerator = None;
                    break;
                }
            }
        }
    }

    /// Index of the first tree containing all given switch-switch edges,
    /// materializing further trees as needed. Configured trees win over
    /// unconfigured ones so existing VLANs are reused.
    pub fn find_containing(&mut self, edges: &[TreeEdge]) -> Option<usize> {
        if let Some(hit) = self
            .trees
            .iter()
            .position(|t| t.configured && t.contains_edges(edges))
        {
            return Some(hit);
        }
        if let Some(hit) = self.trees.iter().position(|t| t.contains_edges(edges)) {
            return Some(hit);
        }
        loop {
            let next = self.enumerator.as_mut().and_then(Iterator::next);
            match next {
                Some(tree) => {
                    let found = tree.contains_edges(edges);
                    self.trees.push(tree);
                    if found {
                        return Some(self.trees.len() - 1);
                    }
                }
                None => {
                    self.enumerator = None;
                    return None;
                }
            }
        }
    }

    /// Assigns the lowest unused VLAN ID to the given tree and marks it
    /// configured. Returns the existing ID if the tree already has one.
    pub fn assign_vlan(&mut self, tree_index: usize) -> Result<u16, TopologyError> {
        self.ensure_enumerated(tree_index + 1);
        let used: BTreeSet<u16> = self.trees.iter().filter_map(|t| t.vlan_id).collect();
        let tree = self
            .trees
            .get_mut(tree_index)
            .ok_or_else(|| TopologyError::InvalidParameter(format!(
                "tree {tree_index} does not exist"
            )))?;
        if let Some(vlan) = tree.vlan_id {
            tree.configured = true;
            return Ok(vlan);
        }
        let vlan = (VLAN_MIN..=VLAN_MAX)
            .find(|v| !used.contains(v))
            .ok_or(TopologyError::VlanExhausted)?;
        tree.vlan_id = Some(vlan);
        tree.configured = true;
        Ok(vlan)
    }

    /// Rebuilds a catalog from persisted assignments by replaying the
    /// deterministic enumeration.
    pub fn restore(
        topo: &PhysicalTopology,
        enumerated: usize,
        assignments: &[(usize, u16)],
    ) -> Result<TreeCatalog, TopologyError> {
        let mut catalog = TreeCatalog::new(topo);
        catalog.ensure_enumerated(enumerated);
        for &(index, vlan) in assignments {
            let tree = catalog.trees.get_mut(index).ok_or_else(|| {
                TopologyError::InvalidParameter(format!(
                    "persisted tree index {index} not reachable by enumeration"
                ))
            })?;
            tree.vlan_id = Some(vlan);
            tree.configured = true;
        }
        Ok(catalog)
    }

    /// Switch-switch edges of a switch sequence, for containment queries.
    pub fn path_edges(topo: &PhysicalTopology, switches: &[NodeId]) -> Vec<TreeEdge> {
        let mut edges = Vec::new();
        for pair in switches.windows(2) {
            if let Some(link) = topo.link_between(&pair[0], &pair[1]) {
                edges.push(link.key());
            }
        }
        edges
    }
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::*;
    use crate::topology::{Link, Node, NodeKind};

    #[test]
    fn triangle_has_three_trees() {
        let topo = triangle_with_hosts();
        let trees = enumerate_spanning_trees(&topo, 100);
        assert_eq!(trees.len(), 3);
        for tree in &trees {
            assert_eq!(tree.edges.len(), 2);
        }
        // Lexicographic include-first order.
        assert_eq!(
            trees[0].edges,
            vec![("sa".to_string(), "sb".to_string()), ("sa".to_string(), "sc".to_string())]
        );
    }

    #[test]
    fn a_tree_yields_itself() {
        let topo = path_of_switches(4);
        let trees = enumerate_spanning_trees(&topo, 10);
        assert_eq!(trees.len(), 1);
        assert_eq!(trees[0].edges.len(), 3);
    }

    #[test]
    fn complete_graph_on_four_switches_has_sixteen_trees() {
        let ids = ["s1", "s2", "s3", "s4"];
        let nodes = ids
            .iter()
            .map(|id| Node { id: id.to_string(), kind: NodeKind::Switch, profile: None })
            .collect();
        let mut links = Vec::new();
        let mut port = BTreeMap::new();
        for i in 0..4 {
            for j in (i + 1)..4 {
                let pa = port.entry(i).or_insert(0u16);
                *pa += 1;
                let ap = *pa;
                let pb = port.entry(j).or_insert(0u16);
                *pb += 1;
                links.push(Link::new(ids[i].into(), ap, ids[j].into(), *pb, 1e9));
            }
        }
        let topo = PhysicalTopology::from_parts(nodes, links).unwrap();
        let trees = enumerate_spanning_trees(&topo, 1000);
        assert_eq!(trees.len(), 16);
        let unique: BTreeSet<_> = trees.iter().map(|t| t.edges.clone()).collect();
        assert_eq!(unique.len(), 16);
    }

    #[test]
    fn limit_stops_enumeration_early_and_resumes_deterministically() {
        let topo = triangle_with_hosts();
        let first_two = enumerate_spanning_trees(&topo, 2);
        let all = enumerate_spanning_trees(&topo, 10);
        assert_eq!(first_two[..], all[..2]);
    }

    #[test]
    fn vlan_assignment_takes_lowest_free_id() {
        let topo = triangle_with_hosts();
        let mut catalog = TreeCatalog::new(&topo);
        catalog.ensure_enumerated(3);
        assert_eq!(catalog.assign_vlan(0).unwrap(), 1);
        assert_eq!(catalog.assign_vlan(2).unwrap(), 2);
        assert_eq!(catalog.assign_vlan(1).unwrap(), 3);
        // Re-assignment is idempotent.
        assert_eq!(catalog.assign_vlan(2).unwrap(), 2);
    }

    #[test]
    fn bridge_priorities_follow_depth() {
        let tree = SpanningTree::with_root(
            0,
            vec![("a".into(), "b".into()), ("b".into(), "c".into())],
            "a".into(),
        );
        let priorities = bridge_priorities(&tree).unwrap();
        assert_eq!(priorities["a"], 0);
        assert_eq!(priorities["b"], 4096);
        assert_eq!(priorities["c"], 8192);

        let lone = SpanningTree::new(0, vec![], Some("only".into()));
        assert_eq!(bridge_priorities(&lone).unwrap()["only"], 0);
    }

    #[test]
    fn deep_trees_exceed_the_priority_space() {
        let edges: Vec<TreeEdge> = (0..16)
            .map(|i| (format!("s{i:02}"), format!("s{:02}", i + 1)))
            .collect();
        let tree = SpanningTree::with_root(0, edges, "s00".into());
        assert_eq!(bridge_priorities(&tree).unwrap_err(), TopologyError::DepthExceeded(16));
    }

    #[test]
    fn default_root_minimizes_eccentricity() {
        let edges: Vec<TreeEdge> = (0..4)
            .map(|i| (format!("s{i:02}"), format!("s{:02}", i + 1)))
            .collect();
        let tree = SpanningTree::new(0, edges, None);
        assert_eq!(tree.root, "s02");
    }

    #[test]
    fn enumeration_matches_brute_force_on_small_graphs() {
        // Every labeled connected graph on up to 5 switches.
        for n in 2..=5usize {
            let pairs: Vec<(usize, usize)> = (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .collect();
            for mask in 0u32..(1 << pairs.len()) {
                let chosen: Vec<(usize, usize)> = pairs
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| mask & (1 << k) != 0)
                    .map(|(_, &p)| p)
                    .collect();
                if !connected(n, &chosen) {
                    continue;
                }
                let nodes = (0..n)
                    .map(|i| Node {
                        id: format!("s{i}"),
                        kind: NodeKind::Switch,
                        profile: None,
                    })
                    .collect();
                let links = chosen
                    .iter()
                    .enumerate()
                    .map(|(k, &(i, j))| {
                        Link::new(format!("s{i}"), k as u16 + 1, format!("s{j}"), k as u16 + 101, 1e9)
                    })
                    .collect();
                let topo = PhysicalTopology::from_parts(nodes, links).unwrap();
                let ours: BTreeSet<Vec<TreeEdge>> = enumerate_spanning_trees(&topo, 10_000)
                    .into_iter()
                    .map(|t| t.edges)
                    .collect();
                let brute = brute_force_trees(n, &chosen);
                assert_eq!(ours, brute, "mismatch on n={n} mask={mask:b}");
            }
        }
    }

    fn connected(n: usize, edges: &[(usize, usize)]) -> bool {
        let mut reach = vec![false; n];
        let mut stack = vec![0usize];
        reach[0] = true;
        while let Some(v) = stack.pop() {
            for &(i, j) in edges {
                for (x, y) in [(i, j), (j, i)] {
                    if x == v && !reach[y] {
                        reach[y] = true;
                        stack.push(y);
                    }
                }
            }
        }
        reach.into_iter().all(|r| r)
    }

    fn brute_force_trees(n: usize, edges: &[(usize, usize)]) -> BTreeSet<Vec<TreeEdge>> {
        let mut out = BTreeSet::new();
        if n == 0 {
            return out;
        }
        let m = edges.len();
        for mask in 0u32..(1 << m) {
            if mask.count_ones() as usize != n - 1 {
                continue;
            }
            let subset: Vec<(usize, usize)> = edges
                .iter()
                .enumerate()
                .filter(|(k, _)| mask & (1 << k) != 0)
                .map(|(_, &p)| p)
                .collect();
            if connected(n, &subset) {
                let mut named: Vec<TreeEdge> = subset
                    .iter()
                    .map(|&(i, j)| (format!("s{i}"), format!("s{j}")))
                    .collect();
                named.sort();
                out.insert(named);
            }
        }
        out
    }
}
