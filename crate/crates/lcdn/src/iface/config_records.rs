//! Vendor-neutral device configuration records derived from the current
//! network state. Emission is a pure function of the state, so repeated
//! emission yields identical records; a hardware driver consuming them is
//! an extension point, not part of this crate.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::admission::NetworkState;
use crate::topology::{bridge_priorities, NodeId};

use super::wire::pcp_for_class;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MstpInstance {
    pub vlan_id: u16,
    pub bridge_priority: u16,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortVlans {
    pub port: u16,
    pub vlan_ids: Vec<u16>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchConfigRecord {
    pub switch_id: NodeId,
    pub mstp_instances: Vec<MstpInstance>,
    pub port_vlan_memberships: Vec<PortVlans>,
    pub spq_enabled: bool,
    pub queue_count: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HostConfigRecord {
    pub host_id: NodeId,
    pub flow_id: String,
    /// Shaper parameters as requested; the controller compensates for the
    /// filter's leakiness internally, the host configures nominal values.
    pub tbf_rate_bps: f64,
    pub tbf_burst_bytes: u32,
    pub vlan_id: u16,
    pub pcp: u8,
}

/// Emits one record per switch plus one per embedded non-management flow.
pub fn emit_config(state: &NetworkState) -> (Vec<SwitchConfigRecord>, Vec<HostConfigRecord>) {
    let topo = state.topology();

    // Per switch: one MSTP instance per configured tree, its priority
    // from the BFS depth plan; tree-edge ports and host ports join the
    // tree's VLAN.
    let mut switch_records = Vec::new();
    for switch in topo.switches() {
        let mut instances = Vec::new();
        let mut port_vlans: BTreeMap<u16, Vec<u16>> = BTreeMap::new();
        for tree in state.catalog().configured() {
            let vlan = tree.vlan_id.expect("configured tree has a VLAN");
            let priorities = bridge_priorities(tree).expect("configured tree fits priorities");
            instances.push(MstpInstance {
                vlan_id: vlan,
                bridge_priority: priorities.get(&switch.id).copied().unwrap_or(0),
            });
            for (a, b) in &tree.edges {
                for (node, other) in [(a, b), (b, a)] {
                    if node == &switch.id {
                        let port = topo.egress_port(node, other).expect("tree edge is a link");
                        port_vlans.entry(port).or_default().push(vlan);
                    }
                }
            }
        }
        // Host access ports carry every configured VLAN so tagged frames
        // can enter and leave.
        let vlans_all: Vec<u16> = state
            .catalog()
            .configured()
            .filter_map(|t| t.vlan_id)
            .collect();
        for host in topo.hosts() {
            if let Ok((access_switch, port)) = topo.access_switch(&host.id) {
                if access_switch == switch.id {
                    port_vlans.entry(port).or_default().extend(&vlans_all);
                }
            }
        }
        for vlans in port_vlans.values_mut() {
            vlans.sort_unstable();
            vlans.dedup();
        }
        switch_records.push(SwitchConfigRecord {
            switch_id: switch.id.clone(),
            mstp_instances: instances,
            port_vlan_memberships: port_vlans
                .into_iter()
                .map(|(port, vlan_ids)| PortVlans { port, vlan_ids })
                .collect(),
            spq_enabled: true,
            queue_count: state
                .switch_profile(&switch.id)
                .map(|p| p.num_queues)
                .unwrap_or(8),
        });
    }

    let mut host_records = Vec::new();
    for flow in state.flows().values() {
        if flow.management {
            continue;
        }
        host_records.push(HostConfigRecord {
            host_id: flow.request.src.clone(),
            flow_id: flow.request.id.clone(),
            tbf_rate_bps: flow.request.rate_bps,
            tbf_burst_bytes: flow.request.burst_bytes,
            vlan_id: flow.vlan_id,
            pcp: pcp_for_class(flow.class_q),
        });
    }

    (switch_records, host_records)
}
