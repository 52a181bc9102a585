//! Discrete-event engine and network topology primitives.

pub mod engine;
pub mod time;
pub mod topology;

pub use engine::{EngineStats, Event, EventHandle, EventQueue, ScheduleError};
pub use time::{serialization_time, SimTime};
pub use topology::{Address, Dir, LinkId, LinkSpec, NodeId, RouteError, Topology, TopologyError};

/// Per-direction runtime state of a link inside a running simulation.
#[derive(Clone, Copy, Debug)]
pub struct LinkState {
    /// Current one-way delay; frames capture it on entry, so changing it
    /// mid-flight never affects frames already on the wire.
    pub delay: SimTime,
    /// End of the serialization slot last granted, per direction.
    pub busy_until: [SimTime; 2],
    /// Frames injected, per direction.
    pub injected: [u64; 2],
    /// Frames delivered to the far end, per direction.
    pub delivered: [u64; 2],
    /// Frames dropped by explicit injection, per direction.
    pub dropped: [u64; 2],
    /// Pending drop-next-frame requests, per direction.
    pub drop_next: [u32; 2],
}

impl LinkState {
    pub fn new(delay: SimTime) -> Self {
        LinkState {
            delay,
            busy_until: [SimTime::ZERO; 2],
            injected: [0; 2],
            delivered: [0; 2],
            dropped: [0; 2],
            drop_next: [0; 2],
        }
    }
}
