//! Whole-network worst-case analysis.
//!
//! Given the set of embedded flows (path, class, compensated arrival
//! curve), compute for every egress queue its aggregate arrival envelope,
//! residual service curve, delay bound, and backlog bound, and for every
//! flow its per-hop envelopes and end-to-end delay bound.
//!
//! Classes are processed from highest priority down: a class's residual
//! service depends only on the aggregates of strictly higher classes (plus
//! one non-preemptable lower-class frame). Within one class, a flow's
//! envelope at hop `k+1` is its envelope at hop `k` with the burst grown by
//! `rate * hop_delay(k)` — the hop delay of the whole class aggregate,
//! which bounds the delay of every member packet under per-class FIFO.
//! Because hop delays depend on the very bursts they inflate, the
//! per-class solution is the least fixed point of that propagation,
//! reached by iterating from the source envelopes upward. Divergence
//! (possible on cyclically dependent paths near saturation) is reported as
//! non-convergence and treated as infeasible by admission.
//!
//! Everything here recomputes from scratch; the state machine caches the
//! result per mutation, so cached values can always be cross-checked
//! against a fresh run.

use std::collections::BTreeMap;

use crate::devicemodel::{per_queue_buffer, SwitchProfile};
use crate::netcalc::{self, ArrivalCurve, ServiceCurve};
use crate::topology::{Hop, NodeId, PhysicalTopology};

const MAX_FIXPOINT_ITERS: usize = 500;
const BURST_DIVERGENCE_CAP_BITS: f64 = 1e15;

/// Queue identity: switch, egress port, priority class.
pub type QueueKey = (NodeId, u16, u8);

/// Static inputs of one flow.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSpec {
    pub id: String,
    /// Compensated sustained rate, bits per second.
    pub rate_bps: f64,
    /// Source burst, bits.
    pub burst_bits: f64,
    pub class_q: u8,
    pub path: Vec<Hop>,
    pub max_packet_bytes: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueueReport {
    pub aggregate: ArrivalCurve,
    /// None when higher classes saturate the port.
    pub residual: Option<ServiceCurve>,
    /// Delay bound of the class aggregate at this queue; infinite when
    /// overloaded.
    pub delay_s: f64,
    /// Backlog bound at this queue; infinite when overloaded.
    pub backlog_bits: f64,
    /// Buffer budget of this queue in bits.
    pub buffer_bits: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowReport {
    pub per_hop_arrival: Vec<ArrivalCurve>,
    pub per_hop_delay_s: Vec<f64>,
    pub e2e_delay_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub queues: BTreeMap<QueueKey, QueueReport>,
    pub flows: BTreeMap<String, FlowReport>,
    /// False when some class's burst propagation did not reach a fixed
    /// point; affected bounds are infinite.
    pub converged: bool,
}

impl Analysis {
    pub fn empty() -> Analysis {
        Analysis {
            queues: BTreeMap::new(),
            flows: BTreeMap::new(),
            converged: true,
        }
    }

    /// Worst-case delay of the class-`q` queue at the given egress, for
    /// routing weights. Unknown queues are empty queues of unused ports;
    /// they should not be asked for.
    pub fn queue_delay(&self, switch: &str, port: u16, class_q: u8) -> f64 {
        self.queues
            .get(&(switch.to_string(), port, class_q))
            .map(|q| q.delay_s)
            .unwrap_or(f64::INFINITY)
    }
}

/// Non-preemption blocking budget for class `q` at a port: the largest
/// frame any lower-priority queue may put on the wire. Lower hardware
/// queues exist below every class except the very lowest hardware queue,
/// and unmanaged traffic may use them, so the profile's maximum frame is
/// assumed there even with no embedded lower-class flow.
fn blocking_bits(
    profile: &SwitchProfile,
    num_classes: u8,
    class_q: u8,
    embedded_lower_max_packet: Option<u32>,
) -> f64 {
    let lowest_hw_queue = class_q == num_classes - 1 && num_classes == profile.num_queues;
    let mut frame = if lowest_hw_queue { 0 } else { profile.max_frame_bytes };
    if let Some(packet) = embedded_lower_max_packet {
        frame = frame.max(packet);
    }
    8.0 * f64::from(frame)
}

/// Full recomputation of all queue and flow bounds.
pub fn analyze(
    topo: &PhysicalTopology,
    switch_profiles: &BTreeMap<NodeId, SwitchProfile>,
    num_classes: u8,
    flows: &BTreeMap<String, FlowSpec>,
) -> Analysis {
    // Membership: which (flow, hop index) pairs cross each queue.
    let mut members: BTreeMap<QueueKey, Vec<(&String, usize)>> = BTreeMap::new();
    for (id, spec) in flows {
        for (k, hop) in spec.path.iter().enumerate() {
            members
                .entry((hop.switch.clone(), hop.egress_port, spec.class_q))
                .or_default()
                .push((id, k));
        }
    }

    // Largest embedded frame of classes below `q` per (switch, port).
    let mut lower_frames: BTreeMap<(NodeId, u16, u8), u32> = BTreeMap::new();
    for spec in flows.values() {
        for hop in &spec.path {
            for q in 0..spec.class_q {
                let key = (hop.switch.clone(), hop.egress_port, q);
                let entry = lower_frames.entry(key).or_insert(0);
                *entry = (*entry).max(spec.max_packet_bytes);
            }
        }
    }

    // All egress queues that exist: every cabled port of every switch,
    // per class.
    let mut port_rates: BTreeMap<(NodeId, u16), f64> = BTreeMap::new();
    for link in topo.links() {
        for node in [&link.a, &link.b] {
            if switch_profiles.contains_key(node) {
                let port = link.port_of(node).expect("link endpoint");
                port_rates.insert((node.clone(), port), link.rate_bps);
            }
        }
    }

    let mut queues: BTreeMap<QueueKey, QueueReport> = BTreeMap::new();
    let mut flow_bursts: BTreeMap<&String, Vec<f64>> = flows
        .iter()
        .map(|(id, spec)| (id, vec![spec.burst_bits; spec.path.len()]))
        .collect();
    // Aggregates of already-processed (higher-priority) classes per port.
    let mut higher_agg: BTreeMap<(NodeId, u16), ArrivalCurve> = BTreeMap::new();
    let mut converged = true;

    for q in 0..num_classes {
        let class_flows: Vec<(&String, &FlowSpec)> = flows
            .iter()
            .filter(|(_, s)| s.class_q == q)
            .collect();

        // Residual service per port for this class is fixed for the whole
        // fixed-point iteration (it only depends on higher classes).
        let mut residuals: BTreeMap<(NodeId, u16), Option<ServiceCurve>> = BTreeMap::new();
        for ((switch, port), link_rate) in &port_rates {
            let profile = &switch_profiles[switch];
            let service = netcalc::port_service(*link_rate, profile.t_proc_s, profile.t_spq_s)
                .expect("validated profile");
            let interference = higher_agg
                .get(&(switch.clone(), *port))
                .copied()
                .unwrap_or(ArrivalCurve::ZERO);
            let blocking = blocking_bits(
                profile,
                num_classes,
                q,
                lower_frames.get(&(switch.clone(), *port, q)).copied(),
            );
            let residual = netcalc::residual_spq(&service, &interference, blocking).ok();
            residuals.insert((switch.clone(), *port), residual);
        }

        // Fixed point of burst propagation within the class.
        let mut class_converged = class_flows.is_empty();
        let mut delays: BTreeMap<(NodeId, u16), f64> = BTreeMap::new();
        for _ in 0..MAX_FIXPOINT_ITERS {
            // Aggregates and hop delays from the current bursts.
            delays.clear();
            let mut aggregates: BTreeMap<(NodeId, u16), ArrivalCurve> = BTreeMap::new();
            for (key, entries) in &members {
                if key.2 != q {
                    continue;
                }
                let mut agg = ArrivalCurve::ZERO;
                for (id, k) in entries {
                    let burst = flow_bursts[*id][*k];
                    agg = agg.add(&ArrivalCurve {
                        rate_bps: flows[*id].rate_bps,
                        burst_bits: burst,
                    });
                }
                aggregates.insert((key.0.clone(), key.1), agg);
            }
            for (port_key, agg) in &aggregates {
                let delay = match &residuals[port_key] {
                    Some(residual) => {
                        netcalc::delay_bound(agg, residual).unwrap_or(f64::INFINITY)
                    }
                    None => f64::INFINITY,
                };
                delays.insert(port_key.clone(), delay);
            }

            // Propagate each flow's burst along its path.
            let mut changed = false;
            for (id, spec) in &class_flows {
                let bursts = flow_bursts.get_mut(*id).expect("every flow tracked");
                let mut burst = spec.burst_bits;
                for (slot, hop) in bursts.iter_mut().zip(&spec.path) {
                    if (burst - *slot).abs() > 1e-9 + 1e-12 * slot.abs() {
                        changed = true;
                    }
                    *slot = burst;
                    let delay = delays
                        .get(&(hop.switch.clone(), hop.egress_port))
                        .copied()
                        .unwrap_or(f64::INFINITY);
                    burst = if delay.is_finite() && burst.is_finite() {
                        burst + spec.rate_bps * delay
                    } else {
                        f64::INFINITY
                    };
                }
            }
            let diverged = class_flows.iter().any(|(id, _)| {
                flow_bursts[*id]
                    .iter()
                    .any(|b| !b.is_finite() || *b > BURST_DIVERGENCE_CAP_BITS)
            });
            if diverged {
                class_converged = false;
                break;
            }
            if !changed {
                class_converged = true;
                break;
            }
        }
        converged &= class_converged;

        // Queue reports for this class, including empty queues (their
        // weight is the residual latency), and fold the class aggregates
        // into the interference curve for the classes below.
        for (switch, port) in port_rates.keys() {
            let port_key = (switch.clone(), *port);
            let profile = &switch_profiles[switch];
            let mut agg = ArrivalCurve::ZERO;
            if let Some(entries) = members.get(&(switch.clone(), *port, q)) {
                for (id, k) in entries {
                    agg = agg.add(&ArrivalCurve {
                        rate_bps: flows[*id].rate_bps,
                        burst_bits: flow_bursts[*id][*k].min(BURST_DIVERGENCE_CAP_BITS),
                    });
                }
            }
            let residual = residuals[&port_key];
            let bounded = class_converged || agg == ArrivalCurve::ZERO;
            let (delay, backlog) = match &residual {
                Some(r) if bounded => (
                    netcalc::delay_bound(&agg, r).unwrap_or(f64::INFINITY),
                    netcalc::backlog_bound(&agg, r).unwrap_or(f64::INFINITY),
                ),
                _ => (f64::INFINITY, f64::INFINITY),
            };
            let buffer_bits = per_queue_buffer(profile, topo.active_ports(switch))
                .map(|bytes| bytes as f64 * 8.0)
                .unwrap_or(f64::INFINITY);
            queues.insert(
                (switch.clone(), *port, q),
                QueueReport {
                    aggregate: agg,
                    residual,
                    delay_s: delay,
                    backlog_bits: backlog,
                    buffer_bits,
                },
            );
            let entry = higher_agg.entry(port_key).or_insert(ArrivalCurve::ZERO);
            *entry = entry.add(&agg);
        }
    }

    // Per-flow reports from the final queue delays.
    let mut flow_reports = BTreeMap::new();
    for (id, spec) in flows {
        let bursts = &flow_bursts[id];
        let mut per_hop_arrival = Vec::with_capacity(spec.path.len());
        let mut per_hop_delay = Vec::with_capacity(spec.path.len());
        let mut e2e = 0.0;
        for (k, hop) in spec.path.iter().enumerate() {
            per_hop_arrival.push(ArrivalCurve {
                rate_bps: spec.rate_bps,
                burst_bits: bursts[k],
            });
            let delay = queues
                .get(&(hop.switch.clone(), hop.egress_port, spec.class_q))
                .map(|qr| qr.delay_s)
                .unwrap_or(f64::INFINITY);
            per_hop_delay.push(delay);
            e2e += delay;
        }
        flow_reports.insert(
            id.clone(),
            FlowReport {
                per_hop_arrival,
                per_hop_delay_s: per_hop_delay,
                e2e_delay_s: e2e,
            },
        );
    }

    Analysis {
        queues,
        flows: flow_reports,
        converged,
    }
}
