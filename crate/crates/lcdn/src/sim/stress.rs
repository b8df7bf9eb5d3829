//! Randomized end-to-end validation: generate topologies, admit random
//! flows through the controller, replay each admitted state in the
//! simulator, and aggregate the observed margin between bounds and
//! measurements.


use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::admission::{ControllerConfig, FlowRequest, NetworkState};
use crate::devicemodel::ProfileRegistry;
use crate::topology::{Link, Node, NodeKind, PhysicalTopology};

use super::{run, Scenario, SimReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeLimits {
    pub max_switches: usize,
    pub max_hosts: usize,
    pub max_flows: usize,
}

impl Default for SizeLimits {
    fn default() -> Self {
        SizeLimits {
            max_switches: 5,
            max_hosts: 6,
            max_flows: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub seed: u64,
    pub switches: usize,
    pub hosts: usize,
    pub flows_attempted: usize,
    pub flows_admitted: usize,
    /// Smallest latency headroom (bound minus observed max) over all
    /// flows that received traffic; infinite when none did.
    pub min_latency_margin_s: f64,
    pub min_backlog_margin_bits: f64,
    pub report: SimReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub scenarios: Vec<ScenarioOutcome>,
    pub total_violations: usize,
}

/// Builds a random connected topology: a spanning tree over the switches
/// plus extra links, hosts spread over the switches.
fn random_topology(rng: &mut ChaCha8Rng, limits: &SizeLimits) -> PhysicalTopology {
    let n_switches = rng.random_range(1..=limits.max_switches.max(1));
    let n_hosts = rng.random_range(2..=limits.max_hosts.max(2));
    let mut nodes: Vec<Node> = (0..n_switches)
        .map(|i| Node {
            id: format!("s{i}"),
            kind: NodeKind::Switch,
            profile: None,
        })
        .collect();
    let mut ports = vec![0u16; n_switches];
    let mut links = Vec::new();
    let connect = |i: usize, j: usize, ports: &mut Vec<u16>, links: &mut Vec<Link>| {
        ports[i] += 1;
        ports[j] += 1;
        links.push(Link::new(
            format!("s{i}"),
            ports[i],
            format!("s{j}"),
            ports[j],
            1e9,
        ));
    };
    for i in 1..n_switches {
        let parent = rng.random_range(0..i);
        connect(parent, i, &mut ports, &mut links);
    }
    for i in 0..n_switches {
        for j in (i + 1)..n_switches {
            if links
                .iter()
                .any(|l| l.other(&format!("s{i}")).map(|o| o == &format!("s{j}")) == Some(true))
            {
                continue;
            }
            if rng.random_bool(0.35) {
                connect(i, j, &mut ports, &mut links);
            }
        }
    }
    for h in 0..n_hosts {
        let sw = rng.random_range(0..n_switches);
        ports[sw] += 1;
        nodes.push(Node {
            id: format!("h{h}"),
            kind: NodeKind::Host,
            profile: None,
        });
        links.push(Link::new(
            format!("s{sw}"),
            ports[sw],
            format!("h{h}"),
            1,
            1e9,
        ));
    }
    PhysicalTopology::from_parts(nodes, links).expect("generated topology is valid")
}

fn random_request(rng: &mut ChaCha8Rng, index: usize, hosts: &[String]) -> FlowRequest {
    let src = hosts[rng.random_range(0..hosts.len())].clone();
    let mut dst = src.clone();
    while dst == src {
        dst = hosts[rng.random_range(0..hosts.len())].clone();
    }
    // Log-uniform rates between 100 kbps and 100 Mbps; the heavy tail
    // creates real contention on gigabit links.
    let rate_bps = 10f64.powf(rng.random_range(5.0..8.0));
    let burst_bytes = rng.random_range(1542..=6 * 1542);
    let deadline_s = 10f64.powf(rng.random_range(-4.0..-2.0));
    FlowRequest {
        id: format!("f{index}"),
        src,
        dst,
        rate_bps,
        burst_bytes,
        deadline_s,
        max_packet_bytes: 1542,
    }
}

/// Generates and validates `n_scenarios` random admitted networks.
pub fn stress_suite(
    seed: u64,
    n_scenarios: usize,
    limits: SizeLimits,
    duration_s: f64,
) -> SuiteReport {
    let mut scenarios = Vec::new();
    for i in 0..n_scenarios {
        let scenario_seed = seed.wrapping_add(i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut rng = ChaCha8Rng::seed_from_u64(scenario_seed);
        let topo = random_topology(&mut rng, &limits);
        let switches = topo.switch_count();
        let hosts: Vec<String> = topo.hosts().map(|n| n.id.clone()).collect();

        let mut state = NetworkState::initialize(
            topo,
            ProfileRegistry::builtin(),
            ControllerConfig::default(),
        )
        .expect("management traffic fits an idle network");

        let attempts = rng.random_range(1..=limits.max_flows.max(1));
        let mut admitted = 0usize;
        for f in 0..attempts {
            let request = random_request(&mut rng, f, &hosts);
            if let Ok(result) = state.embed(request) {
                if result.accepted {
                    admitted += 1;
                }
            }
        }

        let scenario = Scenario::new(duration_s, scenario_seed);
        let report = run(&state, &scenario).expect("admitted state simulates");

        let min_latency_margin_s = report
            .flows
            .values()
            .filter(|f| f.packets_received > 0)
            .map(|f| f.bound_s - f.max_latency_s)
            .fold(f64::INFINITY, f64::min);
        let min_backlog_margin_bits = report
            .queues
            .iter()
            .map(|q| q.bound_bits - q.max_backlog_bits)
            .fold(f64::INFINITY, f64::min);

        scenarios.push(ScenarioOutcome {
            seed: scenario_seed,
            switches,
            hosts: hosts.len(),
            flows_attempted: attempts,
            flows_admitted: admitted,
            min_latency_margin_s,
            min_backlog_margin_bits,
            report,
        });
    }
    let total_violations = scenarios.iter().map(|s| s.report.violations.len()).sum();
    SuiteReport {
        scenarios,
        total_violations,
    }
}

