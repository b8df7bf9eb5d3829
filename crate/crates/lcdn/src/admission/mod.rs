//! The admission pipeline: validate a flow request against worst-case
//! delay and backlog guarantees, pick a path and priority class, reroute
//! existing flows when everything direct is exhausted, and commit the
//! network state transactionally.
//!
//! All mutating entry points work on a scratch clone and swap it in only
//! on success, so a rejected request leaves the state bit-identical.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::devicemodel::{compensate_rate, ProfileRegistry, SwitchProfile, TbfDeviationTable};
use crate::routing::{self, PathCandidate, RerouteView};
use crate::topology::{
    Hop, NodeId, NodeKind, PhysicalTopology, QueueLevelGraph, TopologyError, TreeCatalog,
};

mod analysis;

pub use analysis::{analyze, Analysis, FlowReport, FlowSpec, QueueKey, QueueReport};

pub const DEFAULT_MAX_PACKET_BYTES: u32 = 1542;

/// Rerouting explores the blockers of this many top-ranked paths.
const REROUTE_PATHS_CONSIDERED: usize = 4;
/// Upper bound on (flow, alternative-path) move attempts per admission.
const REROUTE_ATTEMPT_BUDGET: usize = 32;

#[derive(Debug, Error)]
pub enum AdmissionError {
    #[error("flow id {0} already embedded")]
    DuplicateFlowId(String),
    #[error("unknown flow {0}")]
    UnknownFlow(String),
    #[error("unknown endpoint {0}")]
    UnknownEndpoint(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("management flow toward {switch} rejected: {reason:?}")]
    ManagementRejected { switch: String, reason: RejectReason },
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

/// Why an embedding attempt was refused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RejectReason {
    /// No candidate path keeps the flow within its deadline.
    DeadlineInfeasible,
    /// Some queue's backlog bound would exceed its buffer budget.
    BufferOverflow,
    /// No finite-weight path exists between the endpoints.
    Unroutable,
    /// The path needs a new spanning tree but all VLAN IDs are taken.
    VlanExhausted,
    /// An already-admitted flow would lose its guarantee.
    WouldViolateExisting,
}

/// A flow embedding request as submitted by a source host.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRequest {
    pub id: String,
    pub src: NodeId,
    pub dst: NodeId,
    pub rate_bps: f64,
    pub burst_bytes: u32,
    pub deadline_s: f64,
    #[serde(default = "default_max_packet")]
    pub max_packet_bytes: u32,
}

fn default_max_packet() -> u32 {
    DEFAULT_MAX_PACKET_BYTES
}

impl FlowRequest {
    fn validate(&self, topo: &PhysicalTopology, host_endpoints: bool) -> Result<(), AdmissionError> {
        if self.src == self.dst {
            return Err(AdmissionError::InvalidRequest(
                "src and dst must differ".into(),
            ));
        }
        if !(self.rate_bps.is_finite() && self.rate_bps > 0.0) {
            return Err(AdmissionError::InvalidRequest("rate must be positive".into()));
        }
        if self.burst_bytes == 0 {
            return Err(AdmissionError::InvalidRequest("burst must be at least one byte".into()));
        }
        if !(self.deadline_s.is_finite() && self.deadline_s > 0.0) {
            return Err(AdmissionError::InvalidRequest("deadline must be positive".into()));
        }
        if self.max_packet_bytes == 0 {
            return Err(AdmissionError::InvalidRequest("max packet must be positive".into()));
        }
        if self.burst_bytes < self.max_packet_bytes {
            log::warn!(
                "flow {}: burst {} B below max packet {} B; the shaper may stall",
                self.id,
                self.burst_bytes,
                self.max_packet_bytes
            );
        }
        for endpoint in [&self.src, &self.dst] {
            match topo.node(endpoint) {
                None => return Err(AdmissionError::UnknownEndpoint(endpoint.clone())),
                Some(n) if host_endpoints && n.kind != NodeKind::Host => {
                    return Err(AdmissionError::InvalidRequest(format!(
                        "{endpoint} is not a host"
                    )));
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    pub fn burst_bits(&self) -> f64 {
        f64::from(self.burst_bytes) * 8.0
    }
}

/// An admitted flow with its current guarantees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedFlow {
    pub request: FlowRequest,
    pub compensated_rate_bps: f64,
    pub class_q: u8,
    pub vlan_id: u16,
    pub tree_index: usize,
    pub path: Vec<Hop>,
    /// In-band controller traffic; pinned to tree 0 and never rerouted.
    pub management: bool,
    /// Arrival envelope at each hop, refreshed after every mutation.
    pub per_hop_arrival: Vec<crate::netcalc::ArrivalCurve>,
    /// Current end-to-end delay bound, refreshed after every mutation.
    pub delay_bound_s: f64,
}

impl EmbeddedFlow {
    fn spec(&self) -> FlowSpec {
        FlowSpec {
            id: self.request.id.clone(),
            rate_bps: self.compensated_rate_bps,
            burst_bits: self.request.burst_bits(),
            class_q: self.class_q,
            path: self.path.clone(),
            max_packet_bytes: self.request.max_packet_bytes,
        }
    }

    /// Switch sequence of the path (hop switches). For host-terminated
    /// flows this equals the Yen node path, since the final hop's switch
    /// is the destination's access switch.
    pub fn switch_sequence(&self) -> Vec<NodeId> {
        let mut seq: Vec<NodeId> = self.path.iter().map(|h| h.switch.clone()).collect();
        seq.dedup();
        seq
    }
}

/// Outcome of one embedding attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResult {
    pub accepted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<RejectReason>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vlan_id: Option<u16>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class_q: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<Vec<Hop>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delay_bound_s: Option<f64>,
    /// Flows moved to admit this one, with their new paths.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rerouted_flows: Vec<(String, Vec<Hop>)>,
}

impl EmbedResult {
    fn rejected(reason: RejectReason) -> EmbedResult {
        EmbedResult {
            accepted: false,
            reason: Some(reason),
            vlan_id: None,
            class_q: None,
            path: None,
            delay_bound_s: None,
            rerouted_flows: Vec::new(),
        }
    }
}

/// Result of checking one candidate path without mutating anything.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub delay_bound_s: f64,
    pub per_hop_backlogs_bits: Vec<f64>,
}

/// Internal check verdict: `overloaded` marks failures where a rate
/// exceeds the available service outright (the edge is infinite for this
/// flow), as opposed to a finite bound missing its target.
#[derive(Debug, Clone, Copy)]
struct CheckFailure {
    reason: RejectReason,
    overloaded: bool,
}

/// Management traffic parameters. The defaults are configuration values,
/// not measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManagementConfig {
    /// Host running the controller; defaults to the first host by id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller_host: Option<NodeId>,
    pub rate_bps: f64,
    pub burst_bytes: u32,
    pub deadline_s: f64,
}

impl Default for ManagementConfig {
    fn default() -> Self {
        ManagementConfig {
            controller_host: None,
            rate_bps: 1e6,
            burst_bytes: 3000,
            deadline_s: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControllerConfig {
    pub default_profile: String,
    /// Priority classes in use; capped by the smallest queue count of any
    /// switch profile in the topology.
    pub num_classes: Option<u8>,
    pub k_per_class: usize,
    pub reroute_k: usize,
    pub reroute_enabled: bool,
    pub max_moved_flows: usize,
    pub preconfigure_trees: usize,
    /// Apply the measured shaper deviation to requested rates.
    pub compensation_enabled: bool,
    pub management: Option<ManagementConfig>,
    pub tbf_table: TbfDeviationTable,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            default_profile: "FS-S2805S".to_string(),
            num_classes: None,
            k_per_class: 4,
            reroute_k: 4,
            reroute_enabled: true,
            max_moved_flows: 1,
            preconfigure_trees: 1,
            compensation_enabled: true,
            management: Some(ManagementConfig::default()),
            tbf_table: TbfDeviationTable::measured(),
        }
    }
}

/// The controller's single source of truth: topology, tree/VLAN catalog,
/// embedded flows, and the cached worst-case analysis.
#[derive(Debug, Clone)]
pub struct NetworkState {
    topo: PhysicalTopology,
    profiles: ProfileRegistry,
    config: ControllerConfig,
    switch_profiles: BTreeMap<NodeId, SwitchProfile>,
    num_classes: u8,
    catalog: TreeCatalog,
    flows: BTreeMap<String, EmbeddedFlow>,
    analysis: Analysis,
    management_done: bool,
}

impl NetworkState {
    /// Builds a state around a validated topology, configures the first
    /// `preconfigure_trees` spanning trees, and embeds the management
    /// flows.
    pub fn initialize(
        topo: PhysicalTopology,
        profiles: ProfileRegistry,
        config: ControllerConfig,
    ) -> Result<NetworkState, AdmissionError> {
        let mut state = NetworkState::without_management(topo, profiles, config)?;
        state.init_management()?;
        Ok(state)
    }

    /// Same as [`NetworkState::initialize`] but without the management
    /// flows; used by tests and by restore.
    pub fn without_management(
        topo: PhysicalTopology,
        profiles: ProfileRegistry,
        config: ControllerConfig,
    ) -> Result<NetworkState, AdmissionError> {
        let mut switch_profiles = BTreeMap::new();
        for node in topo.switches() {
            let name = node.profile.as_deref().unwrap_or(&config.default_profile);
            let profile = profiles
                .get(name)
                .map_err(|e| AdmissionError::InvalidRequest(e.to_string()))?;
            profile
                .validate()
                .map_err(|e| AdmissionError::InvalidRequest(e.to_string()))?;
            switch_profiles.insert(node.id.clone(), profile.clone());
        }
        let hw_min = switch_profiles
            .values()
            .map(|p| p.num_queues)
            .min()
            .unwrap_or(8);
        let num_classes = match config.num_classes {
            Some(n) => n.clamp(1, hw_min),
            None => hw_min,
        };
        let mut catalog = TreeCatalog::new(&topo);
        catalog.ensure_enumerated(config.preconfigure_trees.max(1));
        for index in 0..config.preconfigure_trees.max(1).min(catalog.trees().len()) {
            catalog.assign_vlan(index)?;
        }
        let mut state = NetworkState {
            topo,
            profiles,
            config,
            switch_profiles,
            num_classes,
            catalog,
            flows: BTreeMap::new(),
            analysis: Analysis::empty(),
            management_done: false,
        };
        state.recompute();
        Ok(state)
    }

    pub fn topology(&self) -> &PhysicalTopology {
        &self.topo
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.config
    }

    pub fn set_reroute_enabled(&mut self, enabled: bool) {
        self.config.reroute_enabled = enabled;
    }

    /// Turns rate compensation on or off for subsequent admissions.
    pub fn set_compensation_enabled(&mut self, enabled: bool) {
        self.config.compensation_enabled = enabled;
    }

    pub fn profiles(&self) -> &ProfileRegistry {
        &self.profiles
    }

    pub fn switch_profile(&self, switch: &str) -> Option<&SwitchProfile> {
        self.switch_profiles.get(switch)
    }

    pub fn num_classes(&self) -> u8 {
        self.num_classes
    }

    pub fn catalog(&self) -> &TreeCatalog {
        &self.catalog
    }

    pub fn flows(&self) -> &BTreeMap<String, EmbeddedFlow> {
        &self.flows
    }

    pub fn flow(&self, id: &str) -> Option<&EmbeddedFlow> {
        self.flows.get(id)
    }

    /// The cached analysis, always consistent with the embedded flows.
    pub fn analysis(&self) -> &Analysis {
        &self.analysis
    }

    pub fn management_done(&self) -> bool {
        self.management_done
    }

    /// Recomputes every bound from scratch; what the cache must equal.
    pub fn recompute_analysis(&self) -> Analysis {
        analyze(
            &self.topo,
            &self.switch_profiles,
            self.num_classes,
            &self.flow_specs(),
        )
    }

    fn flow_specs(&self) -> BTreeMap<String, FlowSpec> {
        self.flows
            .iter()
            .map(|(id, f)| (id.clone(), f.spec()))
            .collect()
    }

    fn recompute(&mut self) {
        self.analysis = self.recompute_analysis();
        // Refresh the per-flow derived fields.
        let reports: Vec<(String, FlowReport)> = self
            .analysis
            .flows
            .iter()
            .map(|(id, r)| (id.clone(), r.clone()))
            .collect();
        for (id, report) in reports {
            if let Some(flow) = self.flows.get_mut(&id) {
                flow.per_hop_arrival = report.per_hop_arrival;
                flow.delay_bound_s = report.e2e_delay_s;
            }
        }
    }

    /// One queue-level graph per class, weighted from the cached analysis.
    pub fn queue_graphs(&self) -> Vec<QueueLevelGraph> {
        (0..self.num_classes)
            .map(|q| {
                QueueLevelGraph::build(&self.topo, q, |switch, port| {
                    self.analysis.queue_delay(switch, port, q)
                })
            })
            .collect()
    }

    /// Full queue path for a flow: switch-to-switch hops plus the egress
    /// toward the destination.
    fn full_path(
        &self,
        candidate_hops: &[Hop],
        dst: &str,
    ) -> Result<Vec<Hop>, AdmissionError> {
        let mut path = candidate_hops.to_vec();
        match self.topo.node(dst).map(|n| n.kind) {
            Some(NodeKind::Host) => {
                let (dst_switch, dst_port) = self.topo.access_switch(dst)?;
                path.push(Hop {
                    switch: dst_switch,
                    egress_port: dst_port,
                });
            }
            Some(NodeKind::Switch) => {}
            None => return Err(AdmissionError::UnknownEndpoint(dst.to_string())),
        }
        Ok(path)
    }

    /// Checks one candidate against all guarantees without mutating state.
    ///
    /// Tentatively adds the flow, recomputes every bound, and requires:
    /// the new flow's end-to-end bound within its deadline, every queue
    /// backlog within its buffer budget, and every existing flow still
    /// within its own deadline.
    pub fn check_path(
        &self,
        request: &FlowRequest,
        compensated_rate_bps: f64,
        candidate: &PathCandidate,
    ) -> Result<Decision, RejectReason> {
        let full = self
            .full_path(&candidate.hops, &request.dst)
            .map_err(|_| RejectReason::Unroutable)?;
        self.check_spec(&FlowSpec {
            id: request.id.clone(),
            rate_bps: compensated_rate_bps,
            burst_bits: request.burst_bits(),
            class_q: candidate.class_q,
            path: full,
            max_packet_bytes: request.max_packet_bytes,
        }, request.deadline_s)
    }

    fn check_spec(&self, spec: &FlowSpec, deadline_s: f64) -> Result<Decision, RejectReason> {
        self.check_spec_classified(spec, deadline_s)
            .map_err(|failure| failure.reason)
    }

    fn check_spec_classified(
        &self,
        spec: &FlowSpec,
        deadline_s: f64,
    ) -> Result<Decision, CheckFailure> {
        let mut specs = self.flow_specs();
        specs.insert(spec.id.clone(), spec.clone());
        let analysis = analyze(&self.topo, &self.switch_profiles, self.num_classes, &specs);

        let report = &analysis.flows[&spec.id];
        if !analysis.converged || !report.e2e_delay_s.is_finite() {
            // The class aggregate outruns the residual service somewhere:
            // no amount of deadline slack helps.
            return Err(CheckFailure {
                reason: RejectReason::DeadlineInfeasible,
                overloaded: true,
            });
        }
        if report.e2e_delay_s > deadline_s {
            return Err(CheckFailure {
                reason: RejectReason::DeadlineInfeasible,
                overloaded: false,
            });
        }
        for queue in analysis.queues.values() {
            if queue.backlog_bits > queue.buffer_bits {
                return Err(CheckFailure {
                    reason: RejectReason::BufferOverflow,
                    overloaded: !queue.backlog_bits.is_finite(),
                });
            }
        }
        for (id, flow) in &self.flows {
            let existing = &analysis.flows[id];
            if !existing.e2e_delay_s.is_finite()
                || existing.e2e_delay_s > flow.request.deadline_s
            {
                return Err(CheckFailure {
                    reason: RejectReason::WouldViolateExisting,
                    overloaded: !existing.e2e_delay_s.is_finite(),
                });
            }
        }
        let per_hop_backlogs = spec
            .path
            .iter()
            .map(|hop| {
                analysis.queues[&(hop.switch.clone(), hop.egress_port, spec.class_q)].backlog_bits
            })
            .collect();
        Ok(Decision {
            delay_bound_s: report.e2e_delay_s,
            per_hop_backlogs_bits: per_hop_backlogs,
        })
    }

    /// Admits a flow: ranks candidate paths over all class graphs, embeds
    /// the first one that checks out, and falls back to rerouting one
    /// existing flow when every direct candidate fails. All-or-nothing.
    pub fn embed(&mut self, request: FlowRequest) -> Result<EmbedResult, AdmissionError> {
        request.validate(&self.topo, true)?;
        if self.flows.contains_key(&request.id) {
            return Err(AdmissionError::DuplicateFlowId(request.id));
        }
        let compensated = self.compensated_rate(&request);

        let mut scratch = self.clone();
        match scratch.place(&request, compensated)? {
            Ok(result) => {
                *self = scratch;
                Ok(result)
            }
            Err(first_failure) => {
                if self.config.reroute_enabled && self.config.max_moved_flows > 0 {
                    if let Some(result) = self.try_reroute(&request, compensated)? {
                        return Ok(result);
                    }
                }
                Ok(EmbedResult::rejected(first_failure))
            }
        }
    }

    fn compensated_rate(&self, request: &FlowRequest) -> f64 {
        if self.config.compensation_enabled {
            compensate_rate(&self.config.tbf_table, request.rate_bps, request.burst_bytes)
        } else {
            request.rate_bps
        }
    }

    /// Tries every ranked candidate on `self` (which must be a scratch
    /// clone). `Ok(Ok(_))` on success; `Ok(Err(reason))` with the
    /// best-ranked failure otherwise.
    fn place(
        &mut self,
        request: &FlowRequest,
        compensated: f64,
    ) -> Result<Result<EmbedResult, RejectReason>, AdmissionError> {
        let src_switch = self.topo.as_switch(&request.src)?;
        let dst_switch = self.topo.as_switch(&request.dst)?;
        let ranked = routing::rank_candidates(
            &self.queue_graphs(),
            &self.topo,
            &self.catalog,
            &src_switch,
            &dst_switch,
            self.config.k_per_class,
        );
        if ranked.is_empty() {
            return Ok(Err(RejectReason::Unroutable));
        }
        let mut first_failure: Option<RejectReason> = None;
        let mut all_overloaded = true;
        for candidate in &ranked {
            let full = match self.full_path(&candidate.hops, &request.dst) {
                Ok(full) => full,
                Err(_) => return Ok(Err(RejectReason::Unroutable)),
            };
            let spec = FlowSpec {
                id: request.id.clone(),
                rate_bps: compensated,
                burst_bits: request.burst_bits(),
                class_q: candidate.class_q,
                path: full,
                max_packet_bytes: request.max_packet_bytes,
            };
            match self.check_spec_classified(&spec, request.deadline_s) {
                Err(failure) => {
                    all_overloaded &= failure.overloaded;
                    if !failure.overloaded {
                        first_failure.get_or_insert(failure.reason);
                    }
                }
                Ok(decision) => {
                    all_overloaded = false;
                    match self.commit(request, compensated, candidate, &decision, false) {
                        Ok(result) => return Ok(Ok(result)),
                        Err(reason) => {
                            first_failure.get_or_insert(reason);
                        }
                    }
                }
            }
        }
        if all_overloaded {
            // The flow's rate cannot be served on any candidate: every
            // edge is effectively infinite for it.
            return Ok(Err(RejectReason::Unroutable));
        }
        Ok(Err(first_failure.unwrap_or(RejectReason::DeadlineInfeasible)))
    }

    /// Binds the candidate to a spanning tree (configuring a new one if
    /// needed), inserts the flow, and refreshes the caches.
    fn commit(
        &mut self,
        request: &FlowRequest,
        compensated: f64,
        candidate: &PathCandidate,
        decision: &Decision,
        management: bool,
    ) -> Result<EmbedResult, RejectReason> {
        let full = self
            .full_path(&candidate.hops, &request.dst)
            .map_err(|_| RejectReason::Unroutable)?;
        let mut switch_seq: Vec<NodeId> = candidate.hops.iter().map(|h| h.switch.clone()).collect();
        switch_seq.push(full.last().expect("non-empty path").switch.clone());
        switch_seq.dedup();
        let edges = TreeCatalog::path_edges(&self.topo, &switch_seq);
        let tree_index = match candidate.tree_index {
            Some(index) => index,
            None => self
                .catalog
                .find_containing(&edges)
                .ok_or(RejectReason::Unroutable)?,
        };
        let vlan_id = self
            .catalog
            .assign_vlan(tree_index)
            .map_err(|_| RejectReason::VlanExhausted)?;

        self.flows.insert(
            request.id.clone(),
            EmbeddedFlow {
                request: request.clone(),
                compensated_rate_bps: compensated,
                class_q: candidate.class_q,
                vlan_id,
                tree_index,
                path: full.clone(),
                management,
                per_hop_arrival: Vec::new(),
                delay_bound_s: decision.delay_bound_s,
            },
        );
        self.recompute();
        Ok(EmbedResult {
            accepted: true,
            reason: None,
            vlan_id: Some(vlan_id),
            class_q: Some(candidate.class_q),
            path: Some(full),
            delay_bound_s: Some(decision.delay_bound_s),
            rerouted_flows: Vec::new(),
        })
    }

    /// Rerouting fallback: for each candidate path of the new flow (best
    /// first), move one existing flow sharing a physical link with it to a
    /// Yen alternative, then retry the new flow. At most one flow moves
    /// per admission.
    fn try_reroute(
        &mut self,
        request: &FlowRequest,
        compensated: f64,
    ) -> Result<Option<EmbedResult>, AdmissionError> {
        let src_switch = self.topo.as_switch(&request.src)?;
        let dst_switch = self.topo.as_switch(&request.dst)?;
        let ranked = routing::rank_candidates(
            &self.queue_graphs(),
            &self.topo,
            &self.catalog,
            &src_switch,
            &dst_switch,
            self.config.k_per_class,
        );
        let views: Vec<RerouteView> = self
            .flows
            .values()
            .filter(|f| !f.management)
            .map(|f| RerouteView {
                flow_id: f.request.id.clone(),
                rate_bps: f.compensated_rate_bps,
                links: self.physical_links(&f.path),
            })
            .collect();

        // Distinct geometric paths in rank order. Rerouting effort is
        // bounded: a handful of paths, and a fixed budget of move
        // attempts overall.
        let mut selected_paths: Vec<Vec<Hop>> = Vec::new();
        for candidate in &ranked {
            let full = self.full_path(&candidate.hops, &request.dst)?;
            if !selected_paths.contains(&full) {
                selected_paths.push(full);
            }
            if selected_paths.len() >= REROUTE_PATHS_CONSIDERED {
                break;
            }
        }

        let mut attempts = REROUTE_ATTEMPT_BUDGET;
        for selected in &selected_paths {
            let selected_links = self.physical_links(selected);
            if let Some(result) =
                self.try_reroute_for(request, compensated, &views, &selected_links, &mut attempts)?
            {
                return Ok(Some(result));
            }
            if attempts == 0 {
                break;
            }
        }
        Ok(None)
    }

    fn try_reroute_for(
        &mut self,
        request: &FlowRequest,
        compensated: f64,
        views: &[RerouteView],
        selected_links: &BTreeSet<(NodeId, NodeId)>,
        attempts: &mut usize,
    ) -> Result<Option<EmbedResult>, AdmissionError> {
        for moved_id in routing::reroute_candidates(views, selected_links) {
            let moved = self.flows[&moved_id].clone();
            let alternatives = routing::yen_k_paths(
                &self.topo,
                &moved.request.src,
                &moved.request.dst,
                self.config.reroute_k,
            )
            .map_err(|routing::RoutingError::UnknownEndpoint(e)| {
                AdmissionError::UnknownEndpoint(e)
            })?;
            for alt_nodes in alternatives {
                if alt_nodes == moved.switch_sequence() {
                    continue;
                }
                if *attempts == 0 {
                    return Ok(None);
                }
                *attempts -= 1;
                let mut scratch = self.clone();
                scratch.flows.remove(&moved_id);
                scratch.recompute();

                // Re-embed the moved flow on this specific path, same class.
                let alt_hops = match scratch.hops_for(&alt_nodes) {
                    Some(h) => h,
                    None => continue,
                };
                let alt_candidate = PathCandidate {
                    class_q: moved.class_q,
                    tree_index: None,
                    hops: alt_hops,
                    weight_sum_s: 0.0,
                };
                let Ok(decision) =
                    scratch.check_path(&moved.request, moved.compensated_rate_bps, &alt_candidate)
                else {
                    continue;
                };
                if scratch
                    .commit(&moved.request, moved.compensated_rate_bps, &alt_candidate, &decision, false)
                    .is_err()
                {
                    continue;
                }
                let new_path = scratch.flows[&moved_id].path.clone();

                // Now the new flow, over the refreshed graphs.
                if let Ok(Ok(mut result)) = scratch.place(request, compensated) {
                    result.rerouted_flows = vec![(moved_id.clone(), new_path)];
                    *self = scratch;
                    return Ok(Some(result));
                }
            }
        }
        Ok(None)
    }

    fn hops_for(&self, switch_nodes: &[NodeId]) -> Option<Vec<Hop>> {
        let mut hops = Vec::new();
        for w in switch_nodes.windows(2) {
            let port = self.topo.egress_port(&w[0], &w[1]).ok()?;
            hops.push(Hop {
                switch: w[0].clone(),
                egress_port: port,
            });
        }
        Some(hops)
    }

    /// Canonical undirected physical links crossed by a queue path.
    fn physical_links(&self, path: &[Hop]) -> BTreeSet<(NodeId, NodeId)> {
        let mut links = BTreeSet::new();
        for hop in path {
            if let Some(link) = self
                .topo
                .links()
                .iter()
                .find(|l| l.port_of(&hop.switch) == Some(hop.egress_port))
            {
                links.insert(link.key());
            }
        }
        links
    }

    /// Removes a flow; aggregates, weights, and buffer accounting return
    /// to the recomputed baseline. Trees and VLANs stay configured.
    pub fn remove(&mut self, flow_id: &str) -> Result<(), AdmissionError> {
        if self.flows.remove(flow_id).is_none() {
            return Err(AdmissionError::UnknownFlow(flow_id.to_string()));
        }
        self.recompute();
        Ok(())
    }

    /// Embeds the in-band management traffic: one aggregate flow from the
    /// controller host to every other switch along tree 0, at the lowest
    /// priority class on VLAN 1. No-op when management is disabled.
    pub fn init_management(&mut self) -> Result<(), AdmissionError> {
        if self.management_done {
            return Ok(());
        }
        let Some(mgmt) = self.config.management.clone() else {
            self.management_done = true;
            return Ok(());
        };
        let controller = match &mgmt.controller_host {
            Some(host) => host.clone(),
            None => match self.topo.hosts().next() {
                Some(h) => h.id.clone(),
                None => {
                    // Switch-only topology: nowhere to run the controller
                    // in-band; skip.
                    self.management_done = true;
                    return Ok(());
                }
            },
        };
        let controller_switch = self.topo.as_switch(&controller)?;
        let tree0 = self
            .catalog
            .tree(0)
            .ok_or_else(|| AdmissionError::InvalidRequest("no spanning tree".into()))?
            .clone();
        let lowest = self.num_classes - 1;

        let mut scratch = self.clone();
        let switches: Vec<NodeId> = scratch.topo.switches().map(|n| n.id.clone()).collect();
        for switch in switches {
            if switch == controller_switch {
                continue;
            }
            let nodes = tree_path(&tree0.edges, &controller_switch, &switch).ok_or_else(|| {
                AdmissionError::InvalidRequest(format!("{switch} unreachable on tree 0"))
            })?;
            let hops = scratch
                .hops_for(&nodes)
                .ok_or_else(|| AdmissionError::InvalidRequest("tree edge without link".into()))?;
            let request = FlowRequest {
                id: format!("mgmt-{switch}"),
                src: controller.clone(),
                dst: switch.clone(),
                rate_bps: mgmt.rate_bps,
                burst_bytes: mgmt.burst_bytes,
                deadline_s: mgmt.deadline_s,
                max_packet_bytes: DEFAULT_MAX_PACKET_BYTES,
            };
            request.validate(&scratch.topo, false)?;
            let compensated = scratch.compensated_rate(&request);
            let candidate = PathCandidate {
                class_q: lowest,
                tree_index: Some(0),
                hops,
                weight_sum_s: 0.0,
            };
            let decision = scratch
                .check_path(&request, compensated, &candidate)
                .map_err(|reason| AdmissionError::ManagementRejected {
                    switch: switch.clone(),
                    reason,
                })?;
            scratch
                .commit(&request, compensated, &candidate, &decision, true)
                .map_err(|reason| AdmissionError::ManagementRejected {
                    switch: switch.clone(),
                    reason,
                })?;
        }
        scratch.management_done = true;
        *self = scratch;
        Ok(())
    }

    /// Rebuilds a state from persisted parts, replaying tree enumeration
    /// and recomputing all derived data.
    pub fn restore(
        topo: PhysicalTopology,
        profiles: ProfileRegistry,
        config: ControllerConfig,
        enumerated_trees: usize,
        vlan_assignments: &[(usize, u16)],
        flows: Vec<EmbeddedFlow>,
        management_done: bool,
    ) -> Result<NetworkState, AdmissionError> {
        let mut state = NetworkState::without_management(topo.clone(), profiles, config)?;
        state.catalog = TreeCatalog::restore(&topo, enumerated_trees, vlan_assignments)?;
        for flow in flows {
            state.flows.insert(flow.request.id.clone(), flow);
        }
        state.management_done = management_done;
        state.recompute();
        Ok(state)
    }
}

/// BFS path between two switches along tree edges.
fn tree_path(
    edges: &[(NodeId, NodeId)],
    from: &str,
    to: &str,
) -> Option<Vec<NodeId>> {
    let mut adjacency: BTreeMap<&NodeId, Vec<&NodeId>> = BTreeMap::new();
    for (a, b) in edges {
        adjacency.entry(a).or_default().push(b);
        adjacency.entry(b).or_default().push(a);
    }
    let from_id = from.to_string();
    let to_id = to.to_string();
    let mut prev: BTreeMap<&NodeId, &NodeId> = BTreeMap::new();
    let mut queue = VecDeque::from([&from_id]);
    let mut seen = BTreeSet::from([&from_id]);
    while let Some(node) = queue.pop_front() {
        if *node == to_id {
            let mut path = vec![node.clone()];
            let mut cur = node;
            while let Some(p) = prev.get(cur) {
                path.push((*p).clone());
                cur = p;
            }
            path.reverse();
            return Some(path);
        }
        if let Some(neighbors) = adjacency.get(node) {
            for &n in neighbors {
                if seen.insert(n) {
                    prev.insert(n, node);
                    queue.push_back(n);
                }
            }
        }
    }
    None
}
