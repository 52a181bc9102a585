//! Deterministic discrete-event simulation of transport-layer session
//! handover across VM migration, dynamic WAN-accelerator insertion, and
//! link/device energy accounting.
//!
//! The crate is `no_std` (alloc only); all IO, configuration and the CLI
//! live in the companion `wansim` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod accelerator;
pub mod migration;
pub mod power;
pub mod session;
pub mod sim;
pub mod simcore;
pub mod transport;

pub use accelerator::{
    evaluate_policy, hash_chunks, optimize_payload, AcceleratorPolicy, ChunkStore,
    ContentDescriptor, PolicyDecision, ProxyMode, ProxyPlan,
};
pub use migration::{MigrationError, MigrationEvent, VmSpec};
pub use power::{
    compare_rates, energy_for_scenario, energy_for_transfer, EnergyReport, FleetEnergyReport,
    PowerError, PowerProfile, RateComparison, RateWinner,
};
pub use session::{
    decode_frame_header, encode_frame_header, CtrlKind, HandoverPhase, HandoverReport,
    SessionError, SessionId, StartSpec, SESSION_HEADER_BYTES,
};
pub use sim::{LogRecord, Sim};
pub use simcore::{
    serialization_time, Address, Dir, EngineStats, EventHandle, EventQueue, LinkId, LinkSpec,
    NodeId, RouteError, ScheduleError, SimTime, Topology, TopologyError,
};
pub use transport::{
    steady_state_throughput, ConnId, ConnPhase, ConnectError, ThroughputError, TransportParams,
};
