//! The composed simulation world: one engine instance owns the topology,
//! link runtime state, connections, sessions, proxies and migrations, and
//! processes a single deterministic event stream.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use crate::accelerator::{PolicyDecision, ProxyId, ProxyRuntime};
use crate::migration::MigrationState;
use crate::session::{ControlMessage, CtrlKind, HandoverPhase, SessionId, SessionState};
use crate::simcore::{
    serialization_time, Address, Dir, EngineStats, EventQueue, LinkId, LinkState, NodeId,
    SimTime, Topology,
};
use crate::transport::{ConnId, Connection, RawTransfer};

/// Direction of a frame relative to its connection: initiator-to-responder
/// or back.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub(crate) enum FlowDir {
    Fwd,
    Rev,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub(crate) enum FrameKind {
    Syn,
    SynAck,
    SynAckAck,
    Rst,
    Data { off: u64, len: u32 },
    Ack { upto: u64 },
    Fin,
    FinAck,
    Ctrl(ControlMessage),
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Frame {
    pub kind: FrameKind,
    pub wire_bytes: u32,
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum EventKind {
    /// Frame finished traversing `hops_done` links of its route.
    Arrive {
        conn: ConnId,
        fdir: FlowDir,
        hops_done: usize,
        frame: Frame,
    },
    PacedPump {
        conn: ConnId,
    },
    MigrationAnnounce {
        mig: usize,
    },
    MigrationComplete {
        mig: usize,
    },
    StartSessionTransfer {
        sess: SessionId,
    },
}

/// One entry of the replayable event log. Everything the post-processors
/// (metrics, energy, oracles) need is reconstructed from this.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LogRecord {
    Frame {
        link: LinkId,
        dir: Dir,
        wire_bytes: u32,
        ser_start: SimTime,
        ser_end: SimTime,
        arrive: SimTime,
    },
    FrameDropped {
        link: LinkId,
        dir: Dir,
        wire_bytes: u32,
        at: SimTime,
    },
    ConnSyn {
        conn: ConnId,
        at: SimTime,
    },
    ConnEstablished {
        conn: ConnId,
        at: SimTime,
    },
    ConnClosed {
        conn: ConnId,
        at: SimTime,
    },
    Cwnd {
        conn: ConnId,
        cwnd: u64,
        at: SimTime,
    },
    Ctrl {
        sess: SessionId,
        kind: CtrlKind,
        at: SimTime,
    },
    Phase {
        sess: SessionId,
        phase: HandoverPhase,
        at: SimTime,
    },
    Deliver {
        sess: SessionId,
        start: u64,
        end: u64,
        at: SimTime,
    },
    TransferStarted {
        sess: SessionId,
        at: SimTime,
    },
    TransferComplete {
        sess: SessionId,
        at: SimTime,
    },
    PolicyDecision {
        sess: SessionId,
        decision: PolicyDecision,
        rtt: SimTime,
        at: SimTime,
    },
    ProxyInserted {
        sess: SessionId,
        proxy: ProxyId,
        at: SimTime,
    },
    ProxyRemoved {
        sess: SessionId,
        proxy: ProxyId,
        at: SimTime,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum LinkControlError {
    UnknownLink(LinkId),
}

impl core::fmt::Display for LinkControlError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            LinkControlError::UnknownLink(l) => write!(f, "unknown link {}", l.0),
        }
    }
}

/// A single-threaded deterministic simulation instance. Independent
/// instances may run concurrently (one per sweep point); a finished
/// instance and its outputs can be moved across threads.
pub struct Sim {
    pub(crate) queue: EventQueue<EventKind>,
    pub(crate) topology: Topology,
    pub(crate) links: Vec<LinkState>,
    pub(crate) listeners: BTreeSet<Address>,
    pub(crate) conns: Vec<Connection>,
    pub(crate) raw_transfers: Vec<RawTransfer>,
    pub(crate) sessions: Vec<SessionState>,
    pub(crate) proxies: Vec<ProxyRuntime>,
    pub(crate) migrations: Vec<MigrationState>,
    pub(crate) log: Vec<LogRecord>,
}

impl Sim {
    pub fn new(topology: Topology) -> Sim {
        let links = topology
            .links()
            .map(|(_, spec)| LinkState::new(spec.one_way_delay))
            .collect();
        Sim {
            queue: EventQueue::new(),
            topology,
            links,
            listeners: BTreeSet::new(),
            conns: Vec::new(),
            raw_transfers: Vec::new(),
            sessions: Vec::new(),
            proxies: Vec::new(),
            migrations: Vec::new(),
            log: Vec::new(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.queue.now()
    }

    pub fn stats(&self) -> EngineStats {
        self.queue.stats()
    }

    pub fn log(&self) -> &[LogRecord] {
        &self.log
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    /// Marks an address as accepting incoming connections.
    pub fn listen(&mut self, addr: Address) {
        self.listeners.insert(addr);
    }

    /// Changes a link's one-way delay. Frames already on the wire keep the
    /// delay they entered with.
    pub fn set_link_delay(
        &mut self,
        link: LinkId,
        new_delay: SimTime,
    ) -> Result<(), LinkControlError> {
        let idx = link.0 as usize;
        if idx >= self.links.len() {
            return Err(LinkControlError::UnknownLink(link));
        }
        self.links[idx].delay = new_delay;
        Ok(())
    }

    /// Arranges for the next `count` frames entering `link` in `dir` to be
    /// dropped (loss is always an explicit, configured event).
    pub fn inject_drop(
        &mut self,
        link: LinkId,
        dir: Dir,
        count: u32,
    ) -> Result<(), LinkControlError> {
        let idx = link.0 as usize;
        if idx >= self.links.len() {
            return Err(LinkControlError::UnknownLink(link));
        }
        self.links[idx].drop_next[dir.index()] += count;
        Ok(())
    }

    /// (injected, delivered, dropped) frame counts for a link, both
    /// directions summed.
    pub fn link_frame_counts(&self, link: LinkId) -> (u64, u64, u64) {
        let st = &self.links[link.0 as usize];
        (
            st.injected[0] + st.injected[1],
            st.delivered[0] + st.delivered[1],
            st.dropped[0] + st.dropped[1],
        )
    }

    /// Processes every event due at or before `t`, in (time, seq) order,
    /// then advances the clock to exactly `t`.
    pub fn run_until(&mut self, t: SimTime) -> EngineStats {
        while let Some(ev) = self.queue.pop_due(t) {
            self.dispatch(ev.kind);
        }
        self.queue.finish_at(t);
        self.queue.stats()
    }

    /// Runs until the event queue drains or `limit` is reached, whichever
    /// comes first. Returns the final clock value.
    pub fn run_to_quiescence(&mut self, limit: SimTime) -> SimTime {
        while let Some(ev) = self.queue.pop_due(limit) {
            self.dispatch(ev.kind);
        }
        self.queue.now()
    }

    pub(crate) fn schedule_internal(&mut self, at: SimTime, kind: EventKind) {
        self.queue
            .schedule(at, kind)
            .expect("internal events are never scheduled in the past");
    }

    fn dispatch(&mut self, kind: EventKind) {
        match kind {
            EventKind::Arrive {
                conn,
                fdir,
                hops_done,
                frame,
            } => {
                let route_len = self.conns[conn.0 as usize].route.len();
                if hops_done >= route_len {
                    if self.delivery_deferred(conn, fdir, hops_done, frame) {
                        return;
                    }
                    self.deliver_frame(conn, fdir, frame);
                } else {
                    self.forward(conn, fdir, hops_done, frame);
                }
            }
            EventKind::PacedPump { conn } => {
                self.conns[conn.0 as usize].paced_wakeup = None;
                self.pump(conn)
            }
            EventKind::MigrationAnnounce { mig } => self.migration_announce(mig),
            EventKind::MigrationComplete { mig } => self.migration_complete(mig),
            EventKind::StartSessionTransfer { sess } => self.start_transfer_now(sess),
        }
    }

    /// Reschedules deliveries destined for a node that is inside a migration
    /// downtime window. Returns true when the frame was deferred.
    fn delivery_deferred(
        &mut self,
        conn: ConnId,
        fdir: FlowDir,
        hops_done: usize,
        frame: Frame,
    ) -> bool {
        let c = &self.conns[conn.0 as usize];
        let dest_node = match fdir {
            FlowDir::Fwd => c.remote.node,
            FlowDir::Rev => c.local.node,
        };
        let now = self.now();
        let mut defer_until: Option<SimTime> = None;
        for m in &self.migrations {
            if m.downtime_applies(dest_node, now) {
                let end = m.completion_at();
                defer_until = Some(defer_until.map_or(end, |d| d.max(end)));
            }
        }
        if let Some(until) = defer_until {
            self.schedule_internal(
                until,
                EventKind::Arrive {
                    conn,
                    fdir,
                    hops_done,
                    frame,
                },
            );
            true
        } else {
            false
        }
    }

    /// The (link, direction) for hop index `hop` of a connection's route,
    /// honoring travel direction.
    fn hop_link(&self, conn: ConnId, fdir: FlowDir, hop: usize) -> (LinkId, Dir) {
        let route = &self.conns[conn.0 as usize].route;
        match fdir {
            FlowDir::Fwd => route[hop],
            FlowDir::Rev => {
                let (link, dir) = route[route.len() - 1 - hop];
                let flipped = match dir {
                    Dir::AtoB => Dir::BtoA,
                    Dir::BtoA => Dir::AtoB,
                };
                (link, flipped)
            }
        }
    }

    /// Starts a frame on a connection. Zero-hop (same node) routes deliver
    /// at the current timestamp, still through the queue for ordering.
    pub(crate) fn send_frame(
        &mut self,
        conn: ConnId,
        fdir: FlowDir,
        kind: FrameKind,
        wire_bytes: u32,
    ) {
        let frame = Frame { kind, wire_bytes };
        let route_len = self.conns[conn.0 as usize].route.len();
        if route_len == 0 {
            let now = self.now();
            self.schedule_internal(
                now,
                EventKind::Arrive {
                    conn,
                    fdir,
                    hops_done: 0,
                    frame,
                },
            );
        } else {
            self.forward(conn, fdir, 0, frame);
        }
    }

    /// Puts a frame onto the next link of its route: serialization first,
    /// then the propagation delay captured at entry.
    fn forward(&mut self, conn: ConnId, fdir: FlowDir, hop: usize, frame: Frame) {
        let now = self.now();
        let (link, dir) = self.hop_link(conn, fdir, hop);
        let rate = self.topology.link(link).rate_bits_per_s;
        let st = &mut self.links[link.0 as usize];
        let di = dir.index();

        if st.drop_next[di] > 0 {
            st.drop_next[di] -= 1;
            st.injected[di] += 1;
            st.dropped[di] += 1;
            self.log.push(LogRecord::FrameDropped {
                link,
                dir,
                wire_bytes: frame.wire_bytes,
                at: now,
            });
            return;
        }

        let ser = serialization_time(frame.wire_bytes as u64, rate);
        let ser_start = now.max(st.busy_until[di]);
        let ser_end = ser_start + ser;
        let arrive = ser_end + st.delay;
        st.busy_until[di] = ser_end;
        st.injected[di] += 1;
        st.delivered[di] += 1;
        self.log.push(LogRecord::Frame {
            link,
            dir,
            wire_bytes: frame.wire_bytes,
            ser_start,
            ser_end,
            arrive,
        });
        self.schedule_internal(
            arrive,
            EventKind::Arrive {
                conn,
                fdir,
                hops_done: hop + 1,
                frame,
            },
        );
    }

    /// Busy intervals (merged) per node, from the frame log: a node is busy
    /// while any attached link serializes toward or from it.
    pub fn device_busy_intervals(&self) -> BTreeMap<NodeId, Vec<(SimTime, SimTime)>> {
        let mut raw: BTreeMap<NodeId, Vec<(SimTime, SimTime)>> = BTreeMap::new();
        for rec in &self.log {
            if let LogRecord::Frame {
                link,
                dir,
                ser_start,
                ser_end,
                arrive,
                ..
            } = rec
            {
                let spec = self.topology.link(*link);
                let (tx_node, rx_node) = match dir {
                    Dir::AtoB => (spec.a.node, spec.b.node),
                    Dir::BtoA => (spec.b.node, spec.a.node),
                };
                raw.entry(tx_node).or_default().push((*ser_start, *ser_end));
                let ser = *ser_end - *ser_start;
                raw.entry(rx_node).or_default().push((*arrive - ser, *arrive));
            }
        }
        raw.into_iter()
            .map(|(node, intervals)| (node, merge_intervals(intervals)))
            .collect()
    }

    /// Busy intervals (merged) per link, both directions pooled.
    pub fn link_busy_intervals(&self) -> BTreeMap<LinkId, Vec<(SimTime, SimTime)>> {
        let mut raw: BTreeMap<LinkId, Vec<(SimTime, SimTime)>> = BTreeMap::new();
        for rec in &self.log {
            if let LogRecord::Frame {
                link,
                ser_start,
                arrive,
                ..
            } = rec
            {
                raw.entry(*link).or_default().push((*ser_start, *arrive));
            }
        }
        raw.into_iter()
            .map(|(link, intervals)| (link, merge_intervals(intervals)))
            .collect()
    }
}

/// Sorts and merges overlapping or touching intervals.
pub fn merge_intervals(mut intervals: Vec<(SimTime, SimTime)>) -> Vec<(SimTime, SimTime)> {
    intervals.sort();
    let mut out: Vec<(SimTime, SimTime)> = Vec::with_capacity(intervals.len());
    for (start, end) in intervals {
        match out.last_mut() {
            Some((_, prev_end)) if start <= *prev_end => {
                if end > *prev_end {
                    *prev_end = end;
                }
            }
            _ => out.push((start, end)),
        }
    }
    out
}
