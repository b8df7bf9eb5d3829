//! Deterministic networking over low-cost strict-priority Ethernet
//! switches.
//!
//! The controller in this crate admits flows one by one, routes them over
//! VLAN-selected spanning trees, assigns them a priority class, and proves
//! a worst-case end-to-end delay and per-queue backlog for every admitted
//! flow using min-plus network calculus. A packet-level discrete-event
//! simulator replays any admitted state and checks the observed worst
//! cases against the computed bounds.
//!
//! Module map:
//!
//! - [`netcalc`] — arrival/service curves and the bound computations.
//! - [`devicemodel`] — measured switch profiles and the end-host shaper
//!   deviation table.
//! - [`topology`] — physical graph, spanning-tree enumeration, VLANs,
//!   per-class queue-level graphs.
//! - [`routing`] — Dijkstra and Yen path search plus candidate ranking.
//! - [`admission`] — the network state machine: check, embed, remove.
//! - [`sim`] — the validating discrete-event simulator.
//! - [`iface`] — JSON wire formats, config records, snapshots, HTTP
//!   service, and the command-line interface.

pub mod admission;
pub mod devicemodel;
pub mod iface;
pub mod netcalc;
pub mod routing;
pub mod sim;
pub mod topology;

// The book chapters double as doctests so their snippets stay honest.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/curves.md")]
    pub mod curves {}
    #[doc = include_str!("../../../book/src/device-model.md")]
    pub mod device_model {}
    #[doc = include_str!("../../../book/src/topology.md")]
    pub mod topology {}
    #[doc = include_str!("../../../book/src/routing.md")]
    pub mod routing {}
    #[doc = include_str!("../../../book/src/admission.md")]
    pub mod admission {}
    #[doc = include_str!("../../../book/src/simulator.md")]
    pub mod simulator {}
    #[doc = include_str!("../../../book/src/interface.md")]
    pub mod interface {}
}
