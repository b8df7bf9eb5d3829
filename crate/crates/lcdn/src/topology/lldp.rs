//! Builds the physical topology from structured neighbor-discovery
//! reports. Each device (switch or host middleware) reports the links it
//! sees; symmetric reports are deduplicated, one-sided evidence is
//! accepted with a warning, and contradictory link speeds are rejected.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Link, Node, NodeId, NodeKind, PhysicalTopology, TopologyError};

/// One discovered adjacency, as seen from `reporter`. The link record uses
/// the same shape as the topology file, with `a` being the local end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborReport {
    pub reporter: NodeId,
    pub a: NodeId,
    pub a_kind: NodeKind,
    pub a_port: u16,
    pub b: NodeId,
    pub b_kind: NodeKind,
    pub b_port: u16,
    pub rate_bps: f64,
}

/// Merges neighbor reports into a validated [`PhysicalTopology`].
///
/// Switch nodes get `default_profile`. Errors if the same port pair is
/// reported with different speeds, if a node's kind is reported
/// inconsistently, or if the merged graph violates a topology invariant.
pub fn ingest_lldp(
    reports: &[NeighborReport],
    default_profile: &str,
) -> Result<PhysicalTopology, TopologyError> {
    let mut kinds: BTreeMap<NodeId, NodeKind> = BTreeMap::new();
    let mut links: BTreeMap<(NodeId, u16, NodeId, u16), (Link, usize)> = BTreeMap::new();

    for report in reports {
        for (id, kind) in [(&report.a, report.a_kind), (&report.b, report.b_kind)] {
            match kinds.get(id) {
                Some(existing) if *existing != kind => {
                    return Err(TopologyError::InvalidParameter(format!(
                        "node {id} reported both as switch and as host"
                    )));
                }
                Some(_) => {}
                None => {
                    kinds.insert(id.clone(), kind);
                }
            }
        }
        let link = Link::new(
            report.a.clone(),
            report.a_port,
            report.b.clone(),
            report.b_port,
            report.rate_bps,
        );
        let key = (link.a.clone(), link.a_port, link.b.clone(), link.b_port);
        match links.get_mut(&key) {
            None => {
                links.insert(key, (link, 1));
            }
            Some((existing, count)) => {
                if existing.rate_bps != link.rate_bps {
                    return Err(TopologyError::ConflictingReports {
                        a: existing.a.clone(),
                        a_port: existing.a_port,
                        b: existing.b.clone(),
                        b_port: existing.b_port,
                    });
                }
                *count += 1;
            }
        }
    }

    let mut merged = Vec::new();
    for (link, count) in links.into_values() {
        if count < 2 {
            log::warn!(
                "link {}:{} <-> {}:{} seen from one side only; accepting",
                link.a,
                link.a_port,
                link.b,
                link.b_port
            );
        }
        merged.push(link);
    }

    let nodes = kinds
        .into_iter()
        .map(|(id, kind)| Node {
            id,
            kind,
            profile: match kind {
                NodeKind::Switch => Some(default_profile.to_string()),
                NodeKind::Host => None,
            },
        })
        .collect();

    PhysicalTopology::from_parts(nodes, merged)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(a: &str, ak: NodeKind, ap: u16, b: &str, bk: NodeKind, bp: u16) -> NeighborReport {
        NeighborReport {
            reporter: a.to_string(),
            a: a.to_string(),
            a_kind: ak,
            a_port: ap,
            b: b.to_string(),
            b_kind: bk,
            b_port: bp,
            rate_bps: 1e9,
        }
    }

    fn mirrored(r: &NeighborReport) -> NeighborReport {
        NeighborReport {
            reporter: r.b.clone(),
            a: r.b.clone(),
            a_kind: r.b_kind,
            a_port: r.b_port,
            b: r.a.clone(),
            b_kind: r.a_kind,
            b_port: r.a_port,
            rate_bps: r.rate_bps,
        }
    }

    #[test]
    fn symmetric_reports_collapse_to_one_link() {
        let r = report("s1", NodeKind::Switch, 1, "s2", NodeKind::Switch, 1);
        let topo = ingest_lldp(&[r.clone(), mirrored(&r)], "FS-S2805S").unwrap();
        assert_eq!(topo.links().len(), 1);
        assert_eq!(topo.switch_count(), 2);
    }

    #[test]
    fn full_mesh_with_hosts() {
        let mut reports = Vec::new();
        for (a, ap, b, bp) in [("sa", 1u16, "sb", 1u16), ("sa", 2, "sc", 1), ("sb", 2, "sc", 2)] {
            let r = report(a, NodeKind::Switch, ap, b, NodeKind::Switch, bp);
            reports.push(mirrored(&r));
            reports.push(r);
        }
        for (h, s, sp) in [("h1", "sa", 3u16), ("h2", "sc", 3)] {
            let r = report(h, NodeKind::Host, 1, s, NodeKind::Switch, sp);
            reports.push(mirrored(&r));
            reports.push(r);
        }
        let topo = ingest_lldp(&reports, "FS-S2805S").unwrap();
        assert_eq!(topo.nodes().count(), 5);
        assert_eq!(topo.links().len(), 5);
        assert_eq!(
            topo.node("sa").unwrap().profile.as_deref(),
            Some("FS-S2805S")
        );
    }

    #[test]
    fn one_sided_evidence_still_creates_the_edge() {
        let reports = vec![
            report("s1", NodeKind::Switch, 1, "s2", NodeKind::Switch, 1),
            report("h1", NodeKind::Host, 1, "s1", NodeKind::Switch, 2),
        ];
        let topo = ingest_lldp(&reports, "FS-S2805S").unwrap();
        assert_eq!(topo.links().len(), 2);
    }

    #[test]
    fn conflicting_speeds_are_rejected() {
        let r1 = report("s1", NodeKind::Switch, 1, "s2", NodeKind::Switch, 1);
        let mut r2 = mirrored(&r1);
        r2.rate_bps = 1e8;
        let err = ingest_lldp(&[r1, r2], "FS-S2805S").unwrap_err();
        assert!(matches!(err, TopologyError::ConflictingReports { .. }));
    }

    #[test]
    fn disconnected_reports_are_rejected() {
        let reports = vec![
            report("s1", NodeKind::Switch, 1, "s2", NodeKind::Switch, 1),
            report("s3", NodeKind::Switch, 1, "s4", NodeKind::Switch, 1),
        ];
        let err = ingest_lldp(&reports, "FS-S2805S").unwrap_err();
        assert_eq!(err, TopologyError::DisconnectedTopology);
    }
}
