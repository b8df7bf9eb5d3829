//! Network model: the physical topology discovered via neighbor reports,
//! its spanning trees, and the per-class queue-level graphs routing runs on.
//!
//! Three layers build on each other:
//!
//! 1. [`PhysicalTopology`] — switches, hosts, and links as discovered.
//! 2. [`SpanningTree`] — loop-free switch subgraphs, enumerated lazily in a
//!    deterministic order and bound to VLAN IDs as they are configured.
//! 3. [`QueueLevelGraph`] — one directed copy of the switch graph per
//!    priority class, each egress link weighted with its current
//!    worst-case delay.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

mod lldp;
mod queuegraph;
mod trees;

pub use lldp::{ingest_lldp, NeighborReport};
pub use queuegraph::{QueueEdge, QueueLevelGraph};
pub use trees::{bridge_priorities, enumerate_spanning_trees, SpanningTree, TreeCatalog, TreeEnumerator};

/// Node identifier; unique across switches and hosts.
pub type NodeId = String;

pub const VLAN_MIN: u16 = 1;
pub const VLAN_MAX: u16 = 4094;
/// Bridge priority increases by one STP step per tree depth level.
pub const BRIDGE_PRIORITY_STEP: u16 = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopologyError {
    #[error("topology is not connected")]
    DisconnectedTopology,
    #[error("conflicting reports for link {a}:{a_port} <-> {b}:{b_port}")]
    ConflictingReports { a: NodeId, a_port: u16, b: NodeId, b_port: u16 },
    #[error("host {0} must have exactly one link")]
    HostDegreeViolation(NodeId),
    #[error("self loop at {0}")]
    SelfLoop(NodeId),
    #[error("port {port} used twice on {node}")]
    PortConflict { node: NodeId, port: u16 },
    #[error("parallel links between {a} and {b} are not supported")]
    ParallelLink { a: NodeId, b: NodeId },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("all {VLAN_MAX} VLAN IDs are in use")]
    VlanExhausted,
    #[error("tree depth {0} exceeds the 16 available bridge priorities")]
    DepthExceeded(usize),
    #[error("invalid topology: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Switch,
    Host,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
    /// Switch profile name; ignored for hosts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
}

/// One physical cable. Stored in canonical orientation (`a < b`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub a: NodeId,
    pub a_port: u16,
    pub b: NodeId,
    pub b_port: u16,
    pub rate_bps: f64,
}

impl Link {
    pub fn new(a: NodeId, a_port: u16, b: NodeId, b_port: u16, rate_bps: f64) -> Link {
        if a <= b {
            Link { a, a_port, b, b_port, rate_bps }
        } else {
            Link { a: b, a_port: b_port, b: a, b_port: a_port, rate_bps }
        }
    }

    /// Canonical endpoint pair, used as the link identity.
    pub fn key(&self) -> (NodeId, NodeId) {
        (self.a.clone(), self.b.clone())
    }

    pub fn other<'a>(&'a self, node: &str) -> Option<&'a NodeId> {
        if self.a == node {
            Some(&self.b)
        } else if self.b == node {
            Some(&self.a)
        } else {
            None
        }
    }

    /// Egress port on `node` toward the other endpoint.
    pub fn port_of(&self, node: &str) -> Option<u16> {
        if self.a == node {
            Some(self.a_port)
        } else if self.b == node {
            Some(self.b_port)
        } else {
            None
        }
    }
}

/// One hop of a flow path: a switch plus the egress port it forwards on.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Hop {
    pub switch: NodeId,
    pub egress_port: u16,
}

/// Validated physical network graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalTopology {
    nodes: BTreeMap<NodeId, Node>,
    links: Vec<Link>,
}

impl PhysicalTopology {
    pub fn from_parts(
        nodes: Vec<Node>,
        links: Vec<Link>,
    ) -> Result<PhysicalTopology, TopologyError> {
        let mut map = BTreeMap::new();
        for node in nodes {
            if map.insert(node.id.clone(), node.clone()).is_some() {
                return Err(TopologyError::InvalidParameter(format!(
                    "duplicate node id {}",
                    node.id
                )));
            }
        }
        let mut links: Vec<Link> = links
            .into_iter()
            .map(|l| Link::new(l.a, l.a_port, l.b, l.b_port, l.rate_bps))
            .collect();
        links.sort_by(|x, y| {
            (&x.a, &x.b, x.a_port, x.b_port)
                .cmp(&(&y.a, &y.b, y.a_port, y.b_port))
        });
        let topo = PhysicalTopology { nodes: map, links };
        topo.validate()?;
        Ok(topo)
    }

    fn validate(&self) -> Result<(), TopologyError> {
        let mut seen_ports: BTreeSet<(NodeId, u16)> = BTreeSet::new();
        let mut seen_pairs: BTreeSet<(NodeId, NodeId)> = BTreeSet::new();
        for link in &self.links {
            if link.a == link.b {
                return Err(TopologyError::SelfLoop(link.a.clone()));
            }
            for id in [&link.a, &link.b] {
                if !self.nodes.contains_key(id) {
                    return Err(TopologyError::UnknownNode(id.clone()));
                }
            }
            if !seen_pairs.insert(link.key()) {
                return Err(TopologyError::ParallelLink {
                    a: link.a.clone(),
                    b: link.b.clone(),
                });
            }
            for (node, port) in [(&link.a, link.a_port), (&link.b, link.b_port)] {
                if !seen_ports.insert((node.clone(), port)) {
                    return Err(TopologyError::PortConflict {
                        node: node.clone(),
                        port,
                    });
                }
            }
        }
        for node in self.nodes.values() {
            if node.kind == NodeKind::Host && self.degree(&node.id) != 1 {
                return Err(TopologyError::HostDegreeViolation(node.id.clone()));
            }
        }
        if !self.is_connected() {
            return Err(TopologyError::DisconnectedTopology);
        }
        Ok(())
    }

    fn is_connected(&self) -> bool {
        let Some(start) = self.nodes.keys().next() else {
            return false;
        };
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([start.clone()]);
        seen.insert(start.clone());
        while let Some(node) = queue.pop_front() {
            for link in &self.links {
                if let Some(other) = link.other(&node) {
                    if seen.insert(other.clone()) {
                        queue.push_back(other.clone());
                    }
                }
            }
        }
        seen.len() == self.nodes.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn switches(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values().filter(|n| n.kind == NodeKind::Switch)
    }

    pub fn hosts(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values().filter(|n| n.kind == NodeKind::Host)
    }

    pub fn switch_count(&self) -> usize {
        self.switches().count()
    }

    /// Links whose endpoints are both switches, in canonical order. Tree
    /// enumeration and VLAN routing operate on this subgraph.
    pub fn switch_links(&self) -> Vec<&Link> {
        self.links
            .iter()
            .filter(|l| {
                self.nodes[&l.a].kind == NodeKind::Switch
                    && self.nodes[&l.b].kind == NodeKind::Switch
            })
            .collect()
    }

    pub fn degree(&self, node: &str) -> usize {
        self.links.iter().filter(|l| l.other(node).is_some()).count()
    }

    /// Number of ports carrying a cable; the denominator of the buffer
    /// partition.
    pub fn active_ports(&self, switch: &str) -> u8 {
        self.degree(switch).min(u8::MAX as usize) as u8
    }

    /// The switch a host hangs off, with the switch-side port.
    pub fn access_switch(&self, host: &str) -> Result<(NodeId, u16), TopologyError> {
        let node = self
            .nodes
            .get(host)
            .ok_or_else(|| TopologyError::UnknownNode(host.to_string()))?;
        if node.kind != NodeKind::Host {
            return Err(TopologyError::InvalidParameter(format!(
                "{host} is not a host"
            )));
        }
        let link = self
            .links
            .iter()
            .find(|l| l.other(host).is_some())
            .expect("validated host has one link");
        let switch = link.other(host).unwrap().clone();
        let port = link.port_of(&switch).unwrap();
        Ok((switch, port))
    }

    pub fn link_between(&self, a: &str, b: &str) -> Option<&Link> {
        self.links
            .iter()
            .find(|l| l.other(a).map(|o| o == b).unwrap_or(false))
    }

    /// Egress port of `from` toward neighbor `to`.
    pub fn egress_port(&self, from: &str, to: &str) -> Result<u16, TopologyError> {
        self.link_between(from, to)
            .and_then(|l| l.port_of(from))
            .ok_or_else(|| {
                TopologyError::InvalidParameter(format!("no link between {from} and {to}"))
            })
    }

    /// Switch neighbors of a switch, ascending by id.
    pub fn switch_neighbors<'a>(&'a self, switch: &str) -> Vec<(&'a NodeId, u16, f64)> {
        let mut out = Vec::new();
        for link in &self.links {
            if let (Some(other), Some(port)) = (link.other(switch), link.port_of(switch)) {
                if self.nodes[other].kind == NodeKind::Switch {
                    out.push((other, port, link.rate_bps));
                }
            }
        }
        out
    }

    /// Resolves a node that may be a host or a switch to a switch id; hosts
    /// map to their access switch.
    pub fn as_switch(&self, id: &str) -> Result<NodeId, TopologyError> {
        match self.nodes.get(id) {
            Some(n) if n.kind == NodeKind::Switch => Ok(n.id.clone()),
            Some(_) => Ok(self.access_switch(id)?.0),
            None => Err(TopologyError::UnknownNode(id.to_string())),
        }
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;

    /// Triangle of three switches with one host on `sa` and one on `sc`.
    pub fn triangle_with_hosts() -> PhysicalTopology {
        PhysicalTopology::from_parts(
            vec![
                Node { id: "sa".into(), kind: NodeKind::Switch, profile: None },
                Node { id: "sb".into(), kind: NodeKind::Switch, profile: None },
                Node { id: "sc".into(), kind: NodeKind::Switch, profile: None },
                Node { id: "h1".into(), kind: NodeKind::Host, profile: None },
                Node { id: "h2".into(), kind: NodeKind::Host, profile: None },
            ],
            vec![
                Link::new("sa".into(), 1, "sb".into(), 1, 1e9),
                Link::new("sb".into(), 2, "sc".into(), 1, 1e9),
                Link::new("sa".into(), 2, "sc".into(), 2, 1e9),
                Link::new("sa".into(), 3, "h1".into(), 1, 1e9),
                Link::new("sc".into(), 3, "h2".into(), 1, 1e9),
            ],
        )
        .unwrap()
    }

    pub fn path_of_switches(n: usize) -> PhysicalTopology {
        let nodes = (0..n)
            .map(|i| Node {
                id: format!("s{i:02}"),
                kind: NodeKind::Switch,
                profile: None,
            })
            .collect();
        let links = (0..n - 1)
            .map(|i| Link::new(format!("s{i:02}"), 2, format!("s{:02}", i + 1), 1, 1e9))
            .collect();
        PhysicalTopology::from_parts(nodes, links).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;

    #[test]
    fn validation_catches_bad_graphs() {
        // Disconnected.
        let err = PhysicalTopology::from_parts(
            vec![
                Node { id: "a".into(), kind: NodeKind::Switch, profile: None },
                Node { id: "b".into(), kind: NodeKind::Switch, profile: None },
            ],
            vec![],
        )
        .unwrap_err();
        assert_eq!(err, TopologyError::DisconnectedTopology);

        // Host with two links.
        let err = PhysicalTopology::from_parts(
            vec![
                Node { id: "s1".into(), kind: NodeKind::Switch, profile: None },
                Node { id: "s2".into(), kind: NodeKind::Switch, profile: None },
                Node { id: "h".into(), kind: NodeKind::Host, profile: None },
            ],
            vec![
                Link::new("s1".into(), 1, "s2".into(), 1, 1e9),
                Link::new("s1".into(), 2, "h".into(), 1, 1e9),
                Link::new("s2".into(), 2, "h".into(), 2, 1e9),
            ],
        )
        .unwrap_err();
        assert_eq!(err, TopologyError::HostDegreeViolation("h".into()));

        // Port reuse.
        let err = PhysicalTopology::from_parts(
            vec![
                Node { id: "s1".into(), kind: NodeKind::Switch, profile: None },
                Node { id: "s2".into(), kind: NodeKind::Switch, profile: None },
                Node { id: "s3".into(), kind: NodeKind::Switch, profile: None },
            ],
            vec![
                Link::new("s1".into(), 1, "s2".into(), 1, 1e9),
                Link::new("s1".into(), 1, "s3".into(), 1, 1e9),
            ],
        )
        .unwrap_err();
        assert!(matches!(err, TopologyError::PortConflict { .. }));
    }

    #[test]
    fn access_switch_and_ports() {
        let topo = triangle_with_hosts();
        assert_eq!(topo.access_switch("h1").unwrap(), ("sa".into(), 3));
        assert_eq!(topo.access_switch("h2").unwrap(), ("sc".into(), 3));
        assert_eq!(topo.egress_port("sa", "sc").unwrap(), 2);
        assert_eq!(topo.egress_port("sc", "sa").unwrap(), 2);
        assert_eq!(topo.active_ports("sa"), 3);
        assert_eq!(topo.active_ports("sb"), 2);
        assert_eq!(topo.as_switch("h1").unwrap(), "sa");
        assert_eq!(topo.as_switch("sb").unwrap(), "sb");
    }
}
