//! Request/response bodies in wire units (bps, bytes, microseconds).

use serde::{Deserialize, Serialize};

use crate::admission::{EmbedResult, FlowRequest, RejectReason, DEFAULT_MAX_PACKET_BYTES};
use crate::topology::Hop;

pub const SCHEMA_VERSION: u32 = 1;

/// Highest priority class (0) rides PCP 7; each class below steps the
/// PCP down by one.
pub fn pcp_for_class(class_q: u8) -> u8 {
    7u8.saturating_sub(class_q)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRequestWire {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub src: String,
    pub dst: String,
    pub rate_bps: f64,
    pub burst_bytes: u32,
    pub deadline_us: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_packet_bytes: Option<u32>,
}

impl FlowRequestWire {
    /// Canonicalizes into engine units; `fallback_id` names the flow when
    /// the caller did not.
    pub fn into_request(self, fallback_id: String) -> FlowRequest {
        FlowRequest {
            id: self.id.unwrap_or(fallback_id),
            src: self.src,
            dst: self.dst,
            rate_bps: self.rate_bps,
            burst_bytes: self.burst_bytes,
            deadline_s: self.deadline_us * 1e-6,
            max_packet_bytes: self.max_packet_bytes.unwrap_or(DEFAULT_MAX_PACKET_BYTES),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResultWire {
    pub accepted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<RejectReason>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flow_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vlan_id: Option<u16>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class_q: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pcp: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<Vec<Hop>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delay_bound_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rerouted_flows: Vec<ReroutedFlowWire>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReroutedFlowWire {
    pub flow_id: String,
    pub new_path: Vec<Hop>,
}

impl EmbedResultWire {
    pub fn from_result(flow_id: &str, result: &EmbedResult) -> EmbedResultWire {
        EmbedResultWire {
            accepted: result.accepted,
            reason: result.reason,
            flow_id: Some(flow_id.to_string()),
            vlan_id: result.vlan_id,
            class_q: result.class_q,
            pcp: result.class_q.map(pcp_for_class),
            path: result.path.clone(),
            delay_bound_us: result.delay_bound_s.map(|s| s * 1e6),
            rerouted_flows: result
                .rerouted_flows
                .iter()
                .map(|(id, path)| ReroutedFlowWire {
                    flow_id: id.clone(),
                    new_path: path.clone(),
                })
                .collect(),
        }
    }
}
