//! Command-line interface. State persists between invocations in a
//! snapshot file (`--state`, default `lcdn-state.json`).
//!
//! Exit codes: 0 on success, 1 when the domain says no (admission
//! rejected, flow unknown, simulation found violations), 2 on usage or
//! file errors.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use crate::admission::{ControllerConfig, NetworkState};
use crate::devicemodel::ProfileRegistry;
use crate::sim::{self, ProcModel, Scenario};
use crate::topology::{Link, Node, PhysicalTopology};

use super::http::{serve, AppState};
use super::snapshot::{restore_state, write_snapshot};
use super::wire::{EmbedResultWire, FlowRequestWire};

pub const EXIT_OK: i32 = 0;
pub const EXIT_REJECTED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "lcdn", version, about = "Deterministic-networking controller for low-cost strict-priority switches")]
struct Cli {
    /// Snapshot file carrying the controller state between invocations.
    #[arg(long, global = true, default_value = "lcdn-state.json")]
    state: PathBuf,
    /// Machine-readable JSON output.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Topology operations.
    #[command(subcommand)]
    Topo(TopoCommand),
    /// Flow admission and removal.
    #[command(subcommand)]
    Flow(FlowCommand),
    /// State persistence.
    #[command(subcommand)]
    State(StateCommand),
    /// Data-plane simulation.
    #[command(subcommand)]
    Sim(SimCommand),
    /// Run the flow-dispatcher HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
enum TopoCommand {
    /// Load a topology file, configure trees, embed management traffic,
    /// and write the initial state.
    Load(TopoLoadArgs),
    /// List spanning trees of the loaded topology.
    Trees(TopoTreesArgs),
}

#[derive(Debug, Args)]
struct TopoLoadArgs {
    /// Topology JSON: {"nodes":[{"id","kind","profile"}],
    /// "links":[{"a","a_port","b","b_port","rate_bps"}]}.
    file: PathBuf,
    /// Profile for switches that do not name one.
    #[arg(long)]
    default_profile: Option<String>,
    /// Extra switch profiles (JSON array) merged over the built-ins.
    #[arg(long)]
    profiles: Option<PathBuf>,
    /// Controller configuration file (JSON), built-in defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Skip embedding the management flows.
    #[arg(long)]
    no_management: bool,
}

#[derive(Debug, Args)]
struct TopoTreesArgs {
    /// Stop after this many trees.
    #[arg(long, default_value_t = 16)]
    limit: usize,
}

#[derive(Debug, Subcommand)]
enum FlowCommand {
    /// Request admission for a flow.
    Add(FlowAddArgs),
    /// Remove an embedded flow.
    Rm { id: String },
}

#[derive(Debug, Args)]
struct FlowAddArgs {
    #[arg(long)]
    src: String,
    #[arg(long)]
    dst: String,
    /// Sustained rate in bits per second.
    #[arg(long)]
    rate: f64,
    /// Burst in bytes.
    #[arg(long)]
    burst: u32,
    /// End-to-end deadline in microseconds.
    #[arg(long)]
    deadline: f64,
    /// Flow id; generated when omitted.
    #[arg(long)]
    id: Option<String>,
    /// Largest frame the source will send, bytes.
    #[arg(long)]
    max_packet: Option<u32>,
}

#[derive(Debug, Subcommand)]
enum StateCommand {
    /// Write the current state snapshot to a file.
    Dump { file: PathBuf },
}

#[derive(Debug, Subcommand)]
enum SimCommand {
    /// Replay the admitted state and compare against the bounds.
    Run(SimRunArgs),
}

#[derive(Debug, Args)]
struct SimRunArgs {
    /// Simulated seconds.
    #[arg(long, required_unless_present = "scenario")]
    duration: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// "constant" for the worst-case processing time, "jitter" for
    /// uniform jitter below it.
    #[arg(long)]
    proc_model: Option<String>,
    /// Scenario file (JSON) with the full run parameters; --duration,
    /// --seed and --proc-model override it when given.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Write the full report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    /// Address to bind, e.g. 127.0.0.1:8080.
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
}

#[derive(Debug, Deserialize)]
struct TopologyFile {
    #[serde(default)]
    schema_version: Option<u32>,
    nodes: Vec<Node>,
    links: Vec<Link>,
}

pub fn run() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            EXIT_USAGE
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32, String> {
    match &cli.command {
        Command::Topo(TopoCommand::Load(args)) => topo_load(cli, args),
        Command::Topo(TopoCommand::Trees(args)) => topo_trees(cli, args),
        Command::Flow(FlowCommand::Add(args)) => flow_add(cli, args),
        Command::Flow(FlowCommand::Rm { id }) => flow_rm(cli, id),
        Command::State(StateCommand::Dump { file }) => state_dump(cli, file),
        Command::Sim(SimCommand::Run(args)) => sim_run(cli, args),
        Command::Serve(args) => serve_cmd(cli, args),
    }
}

fn load_state(path: &Path) -> Result<NetworkState, String> {
    restore_state(path).map_err(|e| format!("cannot load state from {}: {e}", path.display()))
}

fn save_state(state: &NetworkState, path: &Path) -> Result<(), String> {
    write_snapshot(state, path).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn topo_load(cli: &Cli, args: &TopoLoadArgs) -> Result<i32, String> {
    let text = std::fs::read_to_string(&args.file)
        .map_err(|e| format!("cannot read {}: {e}", args.file.display()))?;
    let parsed: TopologyFile =
        serde_json::from_str(&text).map_err(|e| format!("topology file: {e}"))?;
    if let Some(version) = parsed.schema_version {
        if version != super::wire::SCHEMA_VERSION {
            return Err(format!("topology schema {version} unsupported"));
        }
    }
    let topo = PhysicalTopology::from_parts(parsed.nodes, parsed.links)
        .map_err(|e| format!("topology file: {e}"))?;

    let mut profiles = ProfileRegistry::builtin();
    if let Some(path) = &args.profiles {
        profiles
            .load_file(path)
            .map_err(|e| format!("profiles: {e}"))?;
    }
    let mut config: ControllerConfig = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("config file: {e}"))?
        }
        None => ControllerConfig::default(),
    };
    if let Some(profile) = &args.default_profile {
        config.default_profile = profile.clone();
    }
    if args.no_management {
        config.management = None;
    }

    let state = NetworkState::initialize(topo, profiles, config)
        .map_err(|e| format!("initialization failed: {e}"))?;
    save_state(&state, &cli.state)?;

    if cli.json {
        println!(
            "{}",
            json!({
                "nodes": state.topology().nodes().count(),
                "links": state.topology().links().len(),
                "management_flows": state.flows().len(),
                "state_file": cli.state.display().to_string(),
            })
        );
    } else {
        println!(
            "loaded {} nodes, {} links; {} management flow(s); state in {}",
            state.topology().nodes().count(),
            state.topology().links().len(),
            state.flows().len(),
            cli.state.display()
        );
    }
    Ok(EXIT_OK)
}

fn topo_trees(cli: &Cli, args: &TopoTreesArgs) -> Result<i32, String> {
    let state = load_state(&cli.state)?;
    let trees = crate::topology::enumerate_spanning_trees(state.topology(), args.limit);
    let configured: std::collections::BTreeMap<usize, u16> = state
        .catalog()
        .configured()
        .filter_map(|t| t.vlan_id.map(|v| (t.index, v)))
        .collect();
    if cli.json {
        let items: Vec<_> = trees
            .iter()
            .map(|t| {
                json!({
                    "index": t.index,
                    "root": t.root,
                    "edges": t.edges,
                    "vlan_id": configured.get(&t.index),
                })
            })
            .collect();
        println!("{}", json!(items));
    } else {
        for tree in &trees {
            let vlan = configured
                .get(&tree.index)
                .map(|v| format!("VLAN {v}"))
                .unwrap_or_else(|| "unconfigured".to_string());
            let edges: Vec<String> = tree
                .edges
                .iter()
                .map(|(a, b)| format!("{a}-{b}"))
                .collect();
            println!("tree {} [{}] root {}: {}", tree.index, vlan, tree.root, edges.join(", "));
        }
    }
    Ok(EXIT_OK)
}

fn flow_add(cli: &Cli, args: &FlowAddArgs) -> Result<i32, String> {
    let mut state = load_state(&cli.state)?;
    let wire = FlowRequestWire {
        id: args.id.clone(),
        src: args.src.clone(),
        dst: args.dst.clone(),
        rate_bps: args.rate,
        burst_bytes: args.burst,
        deadline_us: args.deadline,
        max_packet_bytes: args.max_packet,
    };
    let fallback = next_flow_id(&state);
    let request = wire.into_request(fallback);
    let flow_id = request.id.clone();
    let result = state.embed(request).map_err(|e| e.to_string())?;
    let wire_result = EmbedResultWire::from_result(&flow_id, &result);
    if cli.json {
        println!("{}", serde_json::to_string(&wire_result).expect("serializable"));
    } else if result.accepted {
        println!(
            "accepted {flow_id}: VLAN {}, class {} (PCP {}), delay bound {:.3} us{}",
            wire_result.vlan_id.unwrap(),
            wire_result.class_q.unwrap(),
            wire_result.pcp.unwrap(),
            wire_result.delay_bound_us.unwrap(),
            if wire_result.rerouted_flows.is_empty() {
                String::new()
            } else {
                format!(
                    ", rerouted {}",
                    wire_result
                        .rerouted_flows
                        .iter()
                        .map(|r| r.flow_id.clone())
                        .collect::<Vec<_>>()
                        .join(", ")
                )
            }
        );
    } else {
        println!("rejected {flow_id}: {:?}", result.reason.unwrap());
    }
    if result.accepted {
        save_state(&state, &cli.state)?;
        Ok(EXIT_OK)
    } else {
        Ok(EXIT_REJECTED)
    }
}

fn next_flow_id(state: &NetworkState) -> String {
    let mut n = state.flows().values().filter(|f| !f.management).count() + 1;
    loop {
        let id = format!("flow-{n}");
        if state.flow(&id).is_none() {
            return id;
        }
        n += 1;
    }
}

fn flow_rm(cli: &Cli, id: &str) -> Result<i32, String> {
    let mut state = load_state(&cli.state)?;
    match state.remove(id) {
        Ok(()) => {
            save_state(&state, &cli.state)?;
            if cli.json {
                println!("{}", json!({ "removed": id }));
            } else {
                println!("removed {id}");
            }
            Ok(EXIT_OK)
        }
        Err(e) => {
            eprintln!("{e}");
            Ok(EXIT_REJECTED)
        }
    }
}

fn state_dump(cli: &Cli, file: &Path) -> Result<i32, String> {
    let state = load_state(&cli.state)?;
    save_state(&state, file)?;
    if !cli.json {
        println!("state written to {}", file.display());
    }
    Ok(EXIT_OK)
}

fn sim_run(cli: &Cli, args: &SimRunArgs) -> Result<i32, String> {
    let state = load_state(&cli.state)?;
    let mut scenario = match &args.scenario {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            serde_json::from_str::<Scenario>(&text).map_err(|e| format!("scenario file: {e}"))?
        }
        None => Scenario::new(0.0, 1),
    };
    if let Some(duration) = args.duration {
        scenario.duration_s = duration;
    }
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    match args.proc_model.as_deref() {
        Some("constant") => scenario.t_proc_model = ProcModel::ConstantUpper,
        Some("jitter") => scenario.t_proc_model = ProcModel::default(),
        Some(other) => return Err(format!("unknown proc model {other:?}")),
        None => {}
    }
    let report = sim::run(&state, &scenario).map_err(|e| e.to_string())?;
    if let Some(out) = &args.out {
        std::fs::write(out, serde_json::to_string_pretty(&report).expect("serializable"))
            .map_err(|e| format!("cannot write {}: {e}", out.display()))?;
    }
    if cli.json {
        println!("{}", serde_json::to_string(&report).expect("serializable"));
    } else {
        for (id, stats) in &report.flows {
            println!(
                "flow {id}: sent {}, received {}, max latency {:.3} us (bound {:.3} us)",
                stats.packets_sent,
                stats.packets_received,
                stats.max_latency_s * 1e6,
                stats.bound_s * 1e6
            );
        }
        println!(
            "{} queue(s) observed, {} violation(s)",
            report.queues.len(),
            report.violations.len()
        );
    }
    if report.violations.is_empty() {
        Ok(EXIT_OK)
    } else {
        Ok(EXIT_REJECTED)
    }
}

fn serve_cmd(cli: &Cli, args: &ServeArgs) -> Result<i32, String> {
    // A pre-loaded state is optional; POST /lldp can initialize instead.
    let app = match restore_state(&cli.state) {
        Ok(state) => AppState::with_state(state),
        Err(_) => AppState::empty(ControllerConfig::default()),
    };
    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    runtime
        .block_on(serve(args.bind, app))
        .map_err(|e| e.to_string())?;
    Ok(EXIT_OK)
}
