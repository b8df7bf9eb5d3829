//! External surface: JSON wire formats, device configuration records,
//! state snapshots, the HTTP service, and the command-line interface.
//!
//! Wire units differ from the engine's canonical units: rates stay in
//! bits per second, but bursts are bytes and deadlines/bounds are
//! microseconds. Conversion happens here and only here.

pub mod cli;
pub mod config_records;
pub mod http;
pub mod snapshot;
pub mod wire;

pub use config_records::{emit_config, HostConfigRecord, SwitchConfigRecord};
pub use snapshot::{
    restore_state, snapshot_state, snapshot_to_string, write_snapshot, SnapshotError,
    StateSnapshot,
};
pub use wire::{EmbedResultWire, FlowRequestWire};
