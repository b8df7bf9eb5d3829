//! Lossless state persistence. A snapshot stores the inputs the state was
//! built from (topology, profiles, config) plus the committed outcomes
//! (configured trees, embedded flows); derived caches are recomputed on
//! restore, which the deterministic analysis makes byte-stable.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::admission::{AdmissionError, ControllerConfig, EmbeddedFlow, NetworkState};
use crate::devicemodel::ProfileRegistry;
use crate::topology::PhysicalTopology;

use super::wire::SCHEMA_VERSION;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("state rebuild failed: {0}")]
    Rebuild(#[from] AdmissionError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub schema_version: u32,
    pub topology: PhysicalTopology,
    pub profiles: ProfileRegistry,
    pub config: ControllerConfig,
    /// How far the deterministic tree enumeration had materialized.
    pub enumerated_trees: usize,
    /// (tree index, VLAN id) of configured trees.
    pub vlan_assignments: Vec<(usize, u16)>,
    pub management_done: bool,
    pub flows: Vec<EmbeddedFlow>,
}

pub fn snapshot_state(state: &NetworkState) -> StateSnapshot {
    StateSnapshot {
        schema_version: SCHEMA_VERSION,
        topology: state.topology().clone(),
        profiles: state.profiles().clone(),
        config: state.config().clone(),
        enumerated_trees: state
            .catalog()
            .trees()
            .iter()
            .filter(|t| t.configured)
            .map(|t| t.index + 1)
            .max()
            .unwrap_or(0),
        vlan_assignments: state
            .catalog()
            .configured()
            .filter_map(|t| t.vlan_id.map(|v| (t.index, v)))
            .collect(),
        management_done: state.management_done(),
        flows: state.flows().values().cloned().collect(),
    }
}

/// Canonical serialized form, used both for files and for byte-equality
/// checks in tests.
pub fn snapshot_to_string(state: &NetworkState) -> String {
    serde_json::to_string_pretty(&snapshot_state(state)).expect("snapshot serializes")
}

pub fn write_snapshot(state: &NetworkState, path: &Path) -> Result<(), SnapshotError> {
    std::fs::write(path, snapshot_to_string(state))?;
    Ok(())
}

pub fn restore_state(path: &Path) -> Result<NetworkState, SnapshotError> {
    let text = std::fs::read_to_string(path)?;
    restore_from_str(&text)
}

pub fn restore_from_str(text: &str) -> Result<NetworkState, SnapshotError> {
    let snapshot: StateSnapshot = serde_json::from_str(text)
        .map_err(|e| SnapshotError::SchemaMismatch(e.to_string()))?;
    if snapshot.schema_version != SCHEMA_VERSION {
        return Err(SnapshotError::SchemaMismatch(format!(
            "snapshot schema {} unsupported (expected {SCHEMA_VERSION})",
            snapshot.schema_version
        )));
    }
    let state = NetworkState::restore(
        snapshot.topology,
        snapshot.profiles,
        snapshot.config,
        snapshot.enumerated_trees,
        &snapshot.vlan_assignments,
        snapshot.flows,
        snapshot.management_done,
    )?;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::admission::FlowRequest;
    use crate::topology::testutil::triangle_with_hosts;

    fn state_with_flows(n: usize) -> NetworkState {
        let mut state = NetworkState::initialize(
            triangle_with_hosts(),
            ProfileRegistry::builtin(),
            ControllerConfig::default(),
        )
        .unwrap();
        for i in 0..n {
            let (src, dst) = if i % 2 == 0 { ("h1", "h2") } else { ("h2", "h1") };
            let result = state
                .embed(FlowRequest {
                    id: format!("f{i}"),
                    src: src.into(),
                    dst: dst.into(),
                    rate_bps: 1e6 + i as f64 * 1e5,
                    burst_bytes: 1542 + i as u32 * 100,
                    deadline_s: 1e-3,
                    max_packet_bytes: 1542,
                })
                .unwrap();
            assert!(result.accepted);
        }
        state
    }

    #[test]
    fn roundtrip_preserves_everything_observable() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.json");
        for n in [0usize, 10] {
            let state = state_with_flows(n);
            write_snapshot(&state, &path).unwrap();
            let restored = restore_state(&path).unwrap();
            assert_eq!(state.flows(), restored.flows());
            assert_eq!(state.analysis(), restored.analysis());
            assert_eq!(
                snapshot_to_string(&state),
                snapshot_to_string(&restored),
                "snapshot of restored state differs"
            );
        }
    }

    #[test]
    fn corrupted_files_are_schema_mismatches() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("state.json");
        std::fs::write(&path, "{\"schema_version\": 1, \"garbage\": true}").unwrap();
        assert!(matches!(
            restore_state(&path),
            Err(SnapshotError::SchemaMismatch(_))
        ));
        std::fs::write(&path, "not json at all").unwrap();
        assert!(matches!(
            restore_state(&path),
            Err(SnapshotError::SchemaMismatch(_))
        ));
    }

    #[test]
    fn wrong_schema_version_is_rejected() {
        let state = state_with_flows(1);
        let mut snapshot = snapshot_state(&state);
        snapshot.schema_version = 99;
        let text = serde_json::to_string(&snapshot).unwrap();
        assert!(matches!(
            restore_from_str(&text),
            Err(SnapshotError::SchemaMismatch(_))
        ));
    }
}
