//! Packet-level discrete-event simulator for admitted network states.
//!
//! The simulator replays an admitted [`NetworkState`] with adversarial
//! sources and measures, per flow, the worst observed end-to-end latency
//! and, per egress queue, the worst observed backlog. Both must stay under
//! the bounds the admission pipeline guaranteed; any excess, and any
//! packet drop, is recorded as a violation.
//!
//! Behavioral model:
//!
//! - Sources release whole packets gated by a token bucket whose rate is
//!   the *measured* (leaky) filter rate, i.e. the requested rate inflated
//!   by the burst-dependent deviation table. Greedy sources send whenever
//!   a packet's worth of tokens is available; periodic sources pace at the
//!   token rate.
//! - Each switch applies a per-packet processing delay (a constant upper
//!   bound or uniform jitter below it), then enqueues the packet at the
//!   egress port's class queue. Full queues tail-drop.
//! - Ports serve strict-priority, non-preemptively, at link rate,
//!   store-and-forward. When a port starts a busy period with a class
//!   other than the last one it transmitted, it first spends the measured
//!   arbitration gap; within a busy period the scheduler pipelines its
//!   decisions. This keeps the charged gap within the single per-class
//!   overhead budget the service curves carry, which is also the only
//!   placement consistent with sustaining line rate under mixed classes.
//! - Latency is measured from the packet's release at the source NIC to
//!   the arrival of its last bit at the destination.
//!
//! Runs are deterministic for a fixed seed.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::admission::NetworkState;
use crate::devicemodel::{compensate_rate, per_queue_buffer};
use crate::topology::NodeId;

mod stress;

pub use stress::{stress_suite, ScenarioOutcome, SizeLimits, SuiteReport};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceModel {
    /// Sends a packet whenever the bucket holds one packet's tokens.
    GreedyTokenBucket,
    /// Sends one packet per `packet/rate` period.
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "model")]
pub enum ProcModel {
    /// Every packet takes exactly the profile's worst-case processing time.
    ConstantUpper,
    /// Uniform draw in `[lo_s, hi_s]`, clamped to the profile ceiling.
    UniformJitter { lo_s: f64, hi_s: f64 },
}

impl Default for ProcModel {
    fn default() -> Self {
        // Stresses the bounds without exceeding the measured ceiling.
        ProcModel::UniformJitter {
            lo_s: 1e-6,
            hi_s: 4.15e-6,
        }
    }
}

/// Run parameters; the state itself is passed to [`run`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub duration_s: f64,
    pub seed: u64,
    #[serde(default)]
    pub t_proc_model: ProcModel,
    #[serde(default = "default_source_model")]
    pub source_model: SourceModel,
    /// Per-flow source model overrides.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_flow_sources: BTreeMap<String, SourceModel>,
    /// Model the measured filter leakiness (sources run slightly hot).
    #[serde(default = "default_true")]
    pub leaky_sources: bool,
}

fn default_source_model() -> SourceModel {
    SourceModel::GreedyTokenBucket
}

fn default_true() -> bool {
    true
}

impl Scenario {
    pub fn new(duration_s: f64, seed: u64) -> Scenario {
        Scenario {
            duration_s,
            seed,
            t_proc_model: ProcModel::default(),
            source_model: SourceModel::GreedyTokenBucket,
            per_flow_sources: BTreeMap::new(),
            leaky_sources: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowStats {
    pub packets_sent: u64,
    pub packets_received: u64,
    pub max_latency_s: f64,
    pub p99_latency_s: f64,
    /// The delay bound the controller guaranteed when this state was
    /// committed.
    pub bound_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueStats {
    pub switch: NodeId,
    pub port: u16,
    pub class_q: u8,
    pub max_backlog_bits: f64,
    pub bound_bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Violation {
    LatencyBound {
        flow: String,
        observed_s: f64,
        bound_s: f64,
    },
    BacklogBound {
        switch: NodeId,
        port: u16,
        class_q: u8,
        observed_bits: f64,
        bound_bits: f64,
    },
    PacketDropped {
        switch: NodeId,
        port: u16,
        class_q: u8,
        flow: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub duration_s: f64,
    pub seed: u64,
    pub flows: BTreeMap<String, FlowStats>,
    pub queues: Vec<QueueStats>,
    pub violations: Vec<Violation>,
}

impl SimReport {
    pub fn total_received(&self) -> u64 {
        self.flows.values().map(|f| f.packets_received).sum()
    }
}

// ---------------------------------------------------------------------
// Engine internals
// ---------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
struct EventKey {
    time: f64,
    seq: u64,
}

impl Eq for EventKey {}

impl Ord for EventKey {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap, we need earliest-first.
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for EventKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone)]
enum Event {
    SourceEmit { flow: usize },
    IngressDone { packet: Packet },
    TxDone { port: usize },
    GapDone { port: usize },
}

#[derive(Debug, Clone)]
struct Packet {
    flow: usize,
    bits: f64,
    released_s: f64,
    /// Index into the flow's hop list: which egress queue comes next.
    hop: usize,
}

#[derive(Debug, Clone)]
struct SimFlow {
    id: String,
    class_q: u8,
    /// Resolved egress ports along the path.
    hops: Vec<usize>,
    source_rate_bps: f64,
    burst_bits: f64,
    packet_bits: f64,
    bound_s: f64,
    source: SourceModel,
    /// Token-bucket state.
    tokens: f64,
    tokens_at_s: f64,
    latencies: Vec<f64>,
    sent: u64,
    received: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PortState {
    Idle,
    /// Arbitration gap before the next transmission.
    Gap,
    Transmitting,
}

#[derive(Debug, Clone)]
struct SimPort {
    switch: NodeId,
    port: u16,
    rate_bps: f64,
    /// Arbitration gap on class change at busy-period start.
    t_spq_s: f64,
    t_proc_ceiling_s: f64,
    buffer_bits_per_queue: f64,
    queues: Vec<VecDeque<Packet>>,
    queued_bits: Vec<f64>,
    max_backlog_bits: Vec<f64>,
    state: PortState,
    /// (class, total bits, start time) of the frame on the wire.
    current: Option<(u8, f64, f64)>,
    last_tx_class: Option<u8>,
}

impl SimPort {
    fn highest_backlogged(&self) -> Option<u8> {
        (0..self.queues.len()).find(|&q| !self.queues[q].is_empty()).map(|q| q as u8)
    }

    /// Fluid backlog of one class queue at `now`: queued bits plus the
    /// untransmitted remainder of an in-service frame of that class.
    fn backlog_bits(&self, class_q: u8, now: f64) -> f64 {
        let mut bits = self.queued_bits[class_q as usize];
        if let Some((c, total, started)) = self.current {
            if c == class_q {
                bits += (total - self.rate_bps * (now - started)).max(0.0);
            }
        }
        bits
    }
}

struct Engine<'a> {
    scenario: &'a Scenario,
    flows: Vec<SimFlow>,
    ports: Vec<SimPort>,
    queue: BinaryHeap<(EventKey, u64)>,
    events: BTreeMap<u64, Event>,
    /// Frames currently on the wire, by port index.
    in_flight: BTreeMap<usize, Packet>,
    next_seq: u64,
    now: f64,
    rng: ChaCha8Rng,
    violations: Vec<Violation>,
}

impl<'a> Engine<'a> {
    fn schedule(&mut self, time: f64, event: Event) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.events.insert(seq, event);
        self.queue.push((EventKey { time, seq }, seq));
    }

    fn proc_delay(&mut self, ceiling_s: f64) -> f64 {
        match self.scenario.t_proc_model {
            ProcModel::ConstantUpper => ceiling_s,
            ProcModel::UniformJitter { lo_s, hi_s } => {
                let hi = hi_s.min(ceiling_s);
                let lo = lo_s.min(hi);
                self.rng.random_range(lo..=hi)
            }
        }
    }

    fn emit(&mut self, flow_idx: usize) {
        let now = self.now;
        let (packet, next_emit) = {
            let flow = &mut self.flows[flow_idx];
            // Refill tokens.
            let elapsed = now - flow.tokens_at_s;
            flow.tokens = (flow.tokens + flow.source_rate_bps * elapsed).min(flow.burst_bits);
            flow.tokens_at_s = now;
            // A deficit too small to move the clock forward counts as
            // filled; rounding must never stall the event loop.
            let deficit = flow.packet_bits - flow.tokens;
            let ready = deficit <= 0.0 || now + deficit / flow.source_rate_bps <= now;
            if !ready {
                (None, Some(now + deficit / flow.source_rate_bps))
            } else {
                flow.tokens = (flow.tokens - flow.packet_bits).max(0.0);
                flow.sent += 1;
                let packet = Packet {
                    flow: flow_idx,
                    bits: flow.packet_bits,
                    released_s: now,
                    hop: 0,
                };
                let next = match flow.source {
                    SourceModel::GreedyTokenBucket => {
                        if flow.tokens >= flow.packet_bits {
                            now
                        } else {
                            now + (flow.packet_bits - flow.tokens) / flow.source_rate_bps
                        }
                    }
                    SourceModel::Periodic => now + flow.packet_bits / flow.source_rate_bps,
                };
                (Some(packet), Some(next))
            }
        };
        if let Some(packet) = packet {
            // Instantaneous hand-off into the first switch's ingress.
            let port_idx = self.flows[flow_idx].hops[0];
            let ceiling = self.ports[port_idx].t_proc_ceiling_s;
            let delay = self.proc_delay(ceiling);
            self.schedule(now + delay, Event::IngressDone { packet });
        }
        if let Some(next) = next_emit {
            if next < self.scenario.duration_s {
                self.schedule(next, Event::SourceEmit { flow: flow_idx });
            }
        }
    }

    fn enqueue(&mut self, packet: Packet) {
        let flow_class = self.flows[packet.flow].class_q;
        let flow_id = self.flows[packet.flow].id.clone();
        let port_idx = self.flows[packet.flow].hops[packet.hop];
        let now = self.now;
        let q = flow_class as usize;
        let dropped = {
            let port = &mut self.ports[port_idx];
            if port.queued_bits[q] + packet.bits > port.buffer_bits_per_queue {
                Some((port.switch.clone(), port.port))
            } else {
                port.queued_bits[q] += packet.bits;
                port.queues[q].push_back(packet);
                let backlog = port.backlog_bits(flow_class, now);
                if backlog > port.max_backlog_bits[q] {
                    port.max_backlog_bits[q] = backlog;
                }
                None
            }
        };
        if let Some((switch, port_no)) = dropped {
            self.violations.push(Violation::PacketDropped {
                switch,
                port: port_no,
                class_q: flow_class,
                flow: flow_id,
            });
            return;
        }
        if self.ports[port_idx].state == PortState::Idle {
            self.start_service(port_idx, true);
        }
    }

    /// Picks the highest-priority backlogged queue and starts serving it.
    /// `fresh_busy_period` indicates the port was idle; only then can the
    /// arbitration gap apply, and only when the class changed since the
    /// last transmission.
    fn start_service(&mut self, port_idx: usize, fresh_busy_period: bool) {
        let (class, gap) = {
            let port = &mut self.ports[port_idx];
            match port.highest_backlogged() {
                None => {
                    port.state = PortState::Idle;
                    return;
                }
                Some(class) => {
                    let gap = fresh_busy_period
                        && port.last_tx_class.is_some_and(|last| last != class);
                    if gap {
                        port.state = PortState::Gap;
                    }
                    (class, gap)
                }
            }
        };
        if gap {
            let until = self.now + self.ports[port_idx].t_spq_s;
            self.schedule(until, Event::GapDone { port: port_idx });
        } else {
            self.transmit(port_idx, class);
        }
    }

    fn transmit(&mut self, port_idx: usize, class: u8) {
        let done = {
            let now = self.now;
            let port = &mut self.ports[port_idx];
            let q = class as usize;
            let packet = port.queues[q].pop_front().expect("class is backlogged");
            port.queued_bits[q] -= packet.bits;
            let tx_time = packet.bits / port.rate_bps;
            port.state = PortState::Transmitting;
            port.current = Some((class, packet.bits, now));
            port.last_tx_class = Some(class);
            self.in_flight.insert(port_idx, packet);
            now + tx_time
        };
        self.schedule(done, Event::TxDone { port: port_idx });
    }

    fn tx_done(&mut self, port_idx: usize) {
        let packet = self
            .in_flight
            .remove(&port_idx)
            .expect("transmission had a packet");
        self.ports[port_idx].current = None;
        // Deliver: either to the next switch's ingress or to the sink.
        if packet.hop + 1 < self.flows[packet.flow].hops.len() {
            let mut moved = packet;
            moved.hop += 1;
            let next_port = self.flows[moved.flow].hops[moved.hop];
            let ceiling = self.ports[next_port].t_proc_ceiling_s;
            let delay = self.proc_delay(ceiling);
            self.schedule(self.now + delay, Event::IngressDone { packet: moved });
        } else {
            let latency = self.now - packet.released_s;
            let flow = &mut self.flows[packet.flow];
            flow.received += 1;
            flow.latencies.push(latency);
        }
        self.start_service(port_idx, false);
    }

    fn gap_done(&mut self, port_idx: usize) {
        // Re-pick: a higher class may have arrived during the gap.
        match self.ports[port_idx].highest_backlogged() {
            Some(class) => self.transmit(port_idx, class),
            None => self.ports[port_idx].state = PortState::Idle,
        }
    }
}

/// Runs one scenario against an admitted state.
pub fn run(state: &NetworkState, scenario: &Scenario) -> Result<SimReport, SimError> {
    if !(scenario.duration_s.is_finite() && scenario.duration_s >= 0.0) {
        return Err(SimError::InvalidScenario(
            "duration must be finite and non-negative".into(),
        ));
    }

    // Resolve ports: every egress queue any flow crosses.
    let mut ports: Vec<SimPort> = Vec::new();
    let mut port_index: BTreeMap<(NodeId, u16), usize> = BTreeMap::new();
    let topo = state.topology();
    for link in topo.links() {
        for node in [&link.a, &link.b] {
            if let Some(profile) = state.switch_profile(node) {
                let port_no = link.port_of(node).expect("link endpoint");
                let buffer_bytes = per_queue_buffer(profile, topo.active_ports(node))
                    .map_err(|e| SimError::InvalidScenario(e.to_string()))?;
                port_index.insert((node.clone(), port_no), ports.len());
                ports.push(SimPort {
                    switch: node.clone(),
                    port: port_no,
                    rate_bps: link.rate_bps,
                    t_spq_s: profile.t_spq_s,
                    t_proc_ceiling_s: profile.t_proc_s,
                    buffer_bits_per_queue: buffer_bytes as f64 * 8.0,
                    queues: (0..state.num_classes()).map(|_| VecDeque::new()).collect(),
                    queued_bits: vec![0.0; state.num_classes() as usize],
                    max_backlog_bits: vec![0.0; state.num_classes() as usize],
                    state: PortState::Idle,
                    current: None,
                    last_tx_class: None,
                });
            }
        }
    }

    let mut flows: Vec<SimFlow> = Vec::new();
    for (id, embedded) in state.flows() {
        let mut hops = Vec::new();
        for hop in &embedded.path {
            let idx = port_index
                .get(&(hop.switch.clone(), hop.egress_port))
                .ok_or_else(|| {
                    SimError::InvalidScenario(format!(
                        "flow {id} crosses unknown port {}:{}",
                        hop.switch, hop.egress_port
                    ))
                })?;
            hops.push(*idx);
        }
        if hops.is_empty() {
            return Err(SimError::InvalidScenario(format!("flow {id} has no hops")));
        }
        let request = &embedded.request;
        let source_rate = if scenario.leaky_sources {
            compensate_rate(
                &state.config().tbf_table,
                request.rate_bps,
                request.burst_bytes,
            )
        } else {
            request.rate_bps
        };
        let source = scenario
            .per_flow_sources
            .get(id)
            .copied()
            .unwrap_or(scenario.source_model);
        flows.push(SimFlow {
            id: id.clone(),
            class_q: embedded.class_q,
            hops,
            source_rate_bps: source_rate,
            burst_bits: request.burst_bits(),
            packet_bits: f64::from(request.max_packet_bytes) * 8.0,
            bound_s: embedded.delay_bound_s,
            source,
            tokens: request.burst_bits(),
            tokens_at_s: 0.0,
            latencies: Vec::new(),
            sent: 0,
            received: 0,
        });
    }

    let mut engine = Engine {
        scenario,
        flows,
        ports,
        queue: BinaryHeap::new(),
        events: BTreeMap::new(),
        in_flight: BTreeMap::new(),
        next_seq: 0,
        now: 0.0,
        rng: ChaCha8Rng::seed_from_u64(scenario.seed),
        violations: Vec::new(),
    };

    if scenario.duration_s > 0.0 {
        for flow_idx in 0..engine.flows.len() {
            engine.schedule(0.0, Event::SourceEmit { flow: flow_idx });
        }
    }

    while let Some((key, seq)) = engine.queue.pop() {
        engine.now = key.time;
        let event = engine.events.remove(&seq).expect("scheduled event");
        match event {
            Event::SourceEmit { flow } => engine.emit(flow),
            Event::IngressDone { packet } => engine.enqueue(packet),
            Event::TxDone { port } => engine.tx_done(port),
            Event::GapDone { port } => engine.gap_done(port),
        }
    }

    // Assemble the report and check the guarantees.
    let mut report_flows = BTreeMap::new();
    let mut violations = engine.violations;
    for flow in &mut engine.flows {
        flow.latencies.sort_by(f64::total_cmp);
        let max = flow.latencies.last().copied().unwrap_or(0.0);
        let p99 = if flow.latencies.is_empty() {
            0.0
        } else {
            let idx = ((flow.latencies.len() as f64 * 0.99).ceil() as usize)
                .clamp(1, flow.latencies.len());
            flow.latencies[idx - 1]
        };
        if max > flow.bound_s {
            violations.push(Violation::LatencyBound {
                flow: flow.id.clone(),
                observed_s: max,
                bound_s: flow.bound_s,
            });
        }
        report_flows.insert(
            flow.id.clone(),
            FlowStats {
                packets_sent: flow.sent,
                packets_received: flow.received,
                max_latency_s: max,
                p99_latency_s: p99,
                bound_s: flow.bound_s,
            },
        );
    }
    let analysis = state.analysis();
    let mut report_queues = Vec::new();
    for port in &engine.ports {
        for class in 0..port.queues.len() as u8 {
            let observed = port.max_backlog_bits[class as usize];
            if observed == 0.0 {
                continue;
            }
            let bound = analysis
                .queues
                .get(&(port.switch.clone(), port.port, class))
                .map(|q| q.backlog_bits)
                .unwrap_or(f64::INFINITY);
            if observed > bound {
                violations.push(Violation::BacklogBound {
                    switch: port.switch.clone(),
                    port: port.port,
                    class_q: class,
                    observed_bits: observed,
                    bound_bits: bound,
                });
            }
            report_queues.push(QueueStats {
                switch: port.switch.clone(),
                port: port.port,
                class_q: class,
                max_backlog_bits: observed,
                bound_bits: bound,
            });
        }
    }

    Ok(SimReport {
        duration_s: scenario.duration_s,
        seed: scenario.seed,
        flows: report_flows,
        queues: report_queues,
        violations,
    })
}

#[cfg(test)]
mod tests;
