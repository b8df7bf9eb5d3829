//! Per-class routing graphs: the switch topology with every directed
//! egress link weighted by the current worst-case delay of that link's
//! queue for one priority class. Overloaded queues carry an infinite
//! weight and are skipped by path search.

use std::collections::{BTreeMap, BTreeSet};

use super::{NodeId, PhysicalTopology};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueEdge {
    pub egress_port: u16,
    pub weight_s: f64,
}

/// One directed copy of the switch graph for a single priority class.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueLevelGraph {
    pub class_q: u8,
    switches: BTreeSet<NodeId>,
    edges: BTreeMap<(NodeId, NodeId), QueueEdge>,
}

impl QueueLevelGraph {
    /// Builds the class graph; `weight` maps a (switch, egress port) queue
    /// to its current worst-case delay in seconds (`f64::INFINITY` for an
    /// overloaded queue).
    pub fn build<F>(topo: &PhysicalTopology, class_q: u8, weight: F) -> QueueLevelGraph
    where
        F: Fn(&NodeId, u16) -> f64,
    {
        let switches: BTreeSet<NodeId> = topo.switches().map(|n| n.id.clone()).collect();
        let mut edges = BTreeMap::new();
        for link in topo.switch_links() {
            for (from, to) in [(&link.a, &link.b), (&link.b, &link.a)] {
                let port = link.port_of(from).expect("link endpoint");
                edges.insert(
                    (from.clone(), to.clone()),
                    QueueEdge {
                        egress_port: port,
                        weight_s: weight(from, port),
                    },
                );
            }
        }
        QueueLevelGraph {
            class_q,
            switches,
            edges,
        }
    }

    pub fn switches(&self) -> impl Iterator<Item = &NodeId> {
        self.switches.iter()
    }

    pub fn contains_switch(&self, id: &str) -> bool {
        self.switches.contains(id)
    }

    /// Outgoing finite-weight edges of `from`, ascending by neighbor id.
    pub fn neighbors<'a>(&'a self, from: &str) -> Vec<(&'a NodeId, QueueEdge)> {
        let from = from.to_string();
        self.edges
            .range((from.clone(), String::new())..)
            .take_while(move |((a, _), _)| *a == from)
            .filter(|(_, e)| e.weight_s.is_finite())
            .map(|((_, b), e)| (b, *e))
            .collect()
    }

    pub fn edge(&self, from: &str, to: &str) -> Option<QueueEdge> {
        self.edges.get(&(from.to_string(), to.to_string())).copied()
    }
}
