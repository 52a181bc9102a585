//! Simplified reliable windowed byte-stream transport: the stand-in for TCP
//! whose RTT-limited throughput the accelerator exists to fix.
//!
//! Payloads are byte counts, not real bytes; sequence numbers, windows and
//! serialization are tracked exactly, so completion times and cwnd traces
//! are faithful while runs stay fast and deterministic.

use alloc::collections::VecDeque;
use alloc::vec::Vec;
use core::fmt;

use crate::accelerator::ProxyId;
use crate::session::{ControlMessage, SessionId};
use crate::sim::{EventKind, FlowDir, Frame, FrameKind, LogRecord, Sim};
use crate::simcore::{Address, Dir, LinkId, RouteError, SimTime};

/// Default maximum segment size, classic Ethernet TCP.
pub const DEFAULT_MSS: u32 = 1460;
/// Default receive-window cap: classic TCP without window scaling. This is
/// what makes long-delay paths slow.
pub const DEFAULT_RWND: u64 = 65_536;
/// Wire overhead charged per frame (headers, acks, control).
pub const FRAME_OVERHEAD: u32 = 40;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct ConnId(pub u32);

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ConnPhase {
    SynSent,
    Established,
    FinWait,
    Closed,
    Failed,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CcPhase {
    SlowStart,
    CongestionAvoidance,
}

#[derive(Clone, Copy, Debug)]
pub struct TransportParams {
    pub mss: u32,
    pub rwnd_cap: u64,
    pub initial_cwnd_segments: u32,
    pub ssthresh: u64,
    /// Optional sender pacing cap in bits of payload per second.
    pub pacing_rate: Option<u64>,
}

impl Default for TransportParams {
    fn default() -> Self {
        TransportParams {
            mss: DEFAULT_MSS,
            rwnd_cap: DEFAULT_RWND,
            initial_cwnd_segments: 10,
            ssthresh: u64::MAX,
            pacing_rate: None,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ConnectError {
    SelfConnect,
    NoRoute(RouteError),
}

impl fmt::Display for ConnectError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConnectError::SelfConnect => write!(f, "cannot connect an address to itself"),
            ConnectError::NoRoute(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ThroughputError {
    Undefined,
}

impl fmt::Display for ThroughputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "throughput undefined for zero rtt and unbounded rate")
    }
}

/// Analytic steady-state throughput: min(link rate, window / RTT), in bits
/// of payload per second. This is the oracle the simulated transport is
/// checked against.
pub fn steady_state_throughput(
    rwnd_cap_bytes: u64,
    rtt: SimTime,
    link_rate_bits_per_s: Option<u64>,
) -> Result<u64, ThroughputError> {
    let window_term = if rtt > SimTime::ZERO {
        Some(rwnd_cap_bytes * 8 * 1_000_000 / rtt.as_micros())
    } else {
        None
    };
    match (window_term, link_rate_bits_per_s) {
        (Some(w), Some(r)) => Ok(w.min(r)),
        (Some(w), None) => Ok(w),
        (None, Some(r)) => Ok(r),
        (None, None) => Err(ThroughputError::Undefined),
    }
}

/// Which end of a connection an event concerns.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub(crate) enum EndOwner {
    Raw,
    SessionClient(SessionId),
    SessionServer(SessionId),
    /// Near proxy receiving the client-side leg.
    ProxyNearRx(ProxyId),
    /// Far proxy receiving the WAN leg.
    ProxyFarRx(ProxyId),
    /// Proxy-originated sending legs (WAN and server-side).
    ProxyTx(ProxyId),
}

#[derive(Clone, Debug)]
pub(crate) struct Connection {
    pub local: Address,
    pub remote: Address,
    pub route: Vec<(LinkId, Dir)>,
    pub params: TransportParams,
    pub phase: ConnPhase,
    pub syn_at: SimTime,
    pub established_at: Option<SimTime>,
    pub closed_at: Option<SimTime>,

    // Sender (initiator) state.
    pub send_next: u64,
    pub acked: u64,
    pub tx_target: u64,
    pub cwnd: u64,
    pub cc_phase: CcPhase,
    pub srtt: Option<SimTime>,
    pub send_times: VecDeque<(u64, SimTime)>,
    pub next_send_at: SimTime,
    /// Fire time of the pending pacing wakeup, if one is queued. Keeps the
    /// event population at one wakeup per connection no matter how often the
    /// connection is pumped while ahead of its pacing clock.
    pub paced_wakeup: Option<SimTime>,
    pub fin_requested: bool,
    pub fin_sent: bool,

    // Receiver (responder) state.
    pub recv_next: u64,

    pub owner_init: EndOwner,
    pub owner_resp: EndOwner,
    /// Session-stream app offset this connection's byte stream resumes at
    /// (the value carried by the 16-byte session framing header).
    pub stream_resume: u64,
    /// Bytes of session framing header at the head of the stream.
    pub stream_header: u64,
}

impl Connection {
    pub fn effective_window(&self) -> u64 {
        self.cwnd.min(self.params.rwnd_cap)
    }

    pub fn in_flight(&self) -> u64 {
        self.send_next - self.acked
    }
}

/// Completion record for a raw (session-less) transfer started with
/// [`Sim::send_raw`].
#[derive(Clone, Copy, Debug)]
pub(crate) struct RawTransfer {
    pub conn: ConnId,
    pub target_end: u64,
    pub completed_at: Option<SimTime>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct RawTransferHandle(pub(crate) u32);

impl Sim {
    /// Opens a connection; the three-way handshake runs in simulated time and
    /// the connection becomes usable 1.5 RTT later.
    pub fn connect(
        &mut self,
        src: Address,
        dst: Address,
        params: TransportParams,
    ) -> Result<ConnId, ConnectError> {
        self.connect_owned(src, dst, params, EndOwner::Raw, EndOwner::Raw)
    }

    pub(crate) fn connect_owned(
        &mut self,
        src: Address,
        dst: Address,
        params: TransportParams,
        owner_init: EndOwner,
        owner_resp: EndOwner,
    ) -> Result<ConnId, ConnectError> {
        if src == dst {
            return Err(ConnectError::SelfConnect);
        }
        let route = self
            .topology
            .route(src, dst)
            .map_err(ConnectError::NoRoute)?;
        let now = self.now();
        let id = ConnId(self.conns.len() as u32);
        let cwnd = params.mss as u64 * params.initial_cwnd_segments as u64;
        self.conns.push(Connection {
            local: src,
            remote: dst,
            route,
            params,
            phase: ConnPhase::SynSent,
            syn_at: now,
            established_at: None,
            closed_at: None,
            send_next: 0,
            acked: 0,
            tx_target: 0,
            cwnd,
            cc_phase: CcPhase::SlowStart,
            srtt: None,
            send_times: VecDeque::new(),
            next_send_at: SimTime::ZERO,
            paced_wakeup: None,
            fin_requested: false,
            fin_sent: false,
            recv_next: 0,
            owner_init,
            owner_resp,
            stream_resume: 0,
            stream_header: 16,
        });
        self.log.push(LogRecord::ConnSyn { conn: id, at: now });
        self.send_frame(id, FlowDir::Fwd, FrameKind::Syn, FRAME_OVERHEAD);
        Ok(id)
    }

    /// Queues `bytes` more payload on a raw connection and returns a handle
    /// whose completion time is recorded when the last byte is delivered.
    pub fn send_raw(&mut self, conn: ConnId, bytes: u64) -> RawTransferHandle {
        let c = &mut self.conns[conn.0 as usize];
        c.stream_header = 0;
        c.tx_target += bytes;
        let target_end = c.tx_target;
        let handle = RawTransferHandle(self.raw_transfers.len() as u32);
        let completed_at = if bytes == 0 || self.conns[conn.0 as usize].recv_next >= target_end {
            Some(self.now())
        } else {
            None
        };
        self.raw_transfers.push(RawTransfer {
            conn,
            target_end,
            completed_at,
        });
        self.pump(conn);
        handle
    }

    pub fn raw_transfer_completed_at(&self, handle: RawTransferHandle) -> Option<SimTime> {
        self.raw_transfers[handle.0 as usize].completed_at
    }

    /// Bytes delivered so far toward a raw transfer's target.
    pub fn raw_transfer_delivered(&self, handle: RawTransferHandle) -> u64 {
        let t = &self.raw_transfers[handle.0 as usize];
        self.conns[t.conn.0 as usize].recv_next.min(t.target_end)
    }

    /// Requests connection close; pending payload is flushed first, then a
    /// FIN/FIN-ACK exchange completes in one RTT. Idempotent.
    pub fn close(&mut self, conn: ConnId) {
        let c = &mut self.conns[conn.0 as usize];
        if matches!(c.phase, ConnPhase::Closed | ConnPhase::Failed) || c.fin_requested {
            return;
        }
        c.fin_requested = true;
        self.maybe_fin(conn);
    }

    pub fn conn_phase(&self, conn: ConnId) -> ConnPhase {
        self.conns[conn.0 as usize].phase
    }

    pub fn conn_srtt(&self, conn: ConnId) -> Option<SimTime> {
        self.conns[conn.0 as usize].srtt
    }

    pub fn conn_cwnd(&self, conn: ConnId) -> u64 {
        self.conns[conn.0 as usize].cwnd
    }

    pub fn conn_established_at(&self, conn: ConnId) -> Option<SimTime> {
        self.conns[conn.0 as usize].established_at
    }

    pub fn conn_delivered_bytes(&self, conn: ConnId) -> u64 {
        self.conns[conn.0 as usize].recv_next
    }

    /// Emits as many data segments as window, pacing and pending payload
    /// allow.
    pub(crate) fn pump(&mut self, conn: ConnId) {
        loop {
            let now = self.now();
            let c = &self.conns[conn.0 as usize];
            if c.phase != ConnPhase::Established {
                break;
            }
            let window = c.effective_window();
            let in_flight = c.in_flight();
            if in_flight >= window {
                break;
            }
            let avail = c.tx_target.saturating_sub(c.send_next);
            if avail == 0 {
                break;
            }
            if let Some(rate) = c.params.pacing_rate {
                if now < c.next_send_at {
                    let at = c.next_send_at;
                    // A pending wakeup at or before `at` will re-pump anyway.
                    let already = c.paced_wakeup.is_some_and(|t| t >= now && t <= at);
                    if !already {
                        self.conns[conn.0 as usize].paced_wakeup = Some(at);
                        self.schedule_internal(at, EventKind::PacedPump { conn });
                    }
                    break;
                }
                let len = (c.params.mss as u64).min(avail).min(window - in_flight) as u32;
                let slot = crate::simcore::serialization_time(len as u64, rate);
                let c = &mut self.conns[conn.0 as usize];
                c.next_send_at = now.max(c.next_send_at) + slot;
                self.emit_segment(conn, len);
            } else {
                let len = (c.params.mss as u64).min(avail).min(window - in_flight) as u32;
                self.emit_segment(conn, len);
            }
        }
        self.maybe_fin(conn);
    }

    fn emit_segment(&mut self, conn: ConnId, len: u32) {
        let now = self.now();
        let c = &mut self.conns[conn.0 as usize];
        let off = c.send_next;
        c.send_next += len as u64;
        c.send_times.push_back((c.send_next, now));
        self.send_frame(conn, FlowDir::Fwd, FrameKind::Data { off, len }, len + FRAME_OVERHEAD);
    }

    fn maybe_fin(&mut self, conn: ConnId) {
        let c = &mut self.conns[conn.0 as usize];
        if c.phase == ConnPhase::Established
            && c.fin_requested
            && !c.fin_sent
            && c.send_next == c.tx_target
            && c.acked == c.send_next
        {
            c.fin_sent = true;
            c.phase = ConnPhase::FinWait;
            self.send_frame(conn, FlowDir::Fwd, FrameKind::Fin, FRAME_OVERHEAD);
        }
    }

    /// Handles a frame that has fully traversed the route and arrived at the
    /// receiving endpoint.
    pub(crate) fn deliver_frame(&mut self, conn: ConnId, fdir: FlowDir, frame: Frame) {
        match frame.kind {
            FrameKind::Syn => {
                let c = &self.conns[conn.0 as usize];
                if !self.listeners.contains(&c.remote) {
                    self.send_frame(conn, FlowDir::Rev, FrameKind::Rst, FRAME_OVERHEAD);
                    return;
                }
                self.send_frame(conn, FlowDir::Rev, FrameKind::SynAck, FRAME_OVERHEAD);
            }
            FrameKind::SynAck => {
                let now = self.now();
                let c = &mut self.conns[conn.0 as usize];
                let sample = now - c.syn_at;
                Self::update_srtt(c, sample);
                self.send_frame(conn, FlowDir::Fwd, FrameKind::SynAckAck, FRAME_OVERHEAD);
            }
            FrameKind::SynAckAck => {
                let now = self.now();
                let c = &mut self.conns[conn.0 as usize];
                if c.phase == ConnPhase::SynSent {
                    c.phase = ConnPhase::Established;
                    c.established_at = Some(now);
                    self.log.push(LogRecord::ConnEstablished { conn, at: now });
                    self.on_conn_established(conn);
                    self.pump(conn);
                }
            }
            FrameKind::Rst => {
                let now = self.now();
                let c = &mut self.conns[conn.0 as usize];
                if !matches!(c.phase, ConnPhase::Closed | ConnPhase::Failed) {
                    c.phase = ConnPhase::Failed;
                    c.closed_at = Some(now);
                    self.on_conn_failed(conn);
                }
            }
            FrameKind::Data { off, len } => {
                debug_assert_eq!(fdir, FlowDir::Fwd);
                let c = &mut self.conns[conn.0 as usize];
                if off != c.recv_next {
                    // Out-of-order arrival only happens under injected loss;
                    // the receiver simply ignores it (no SACK, no rexmit).
                    return;
                }
                c.recv_next += len as u64;
                let recv_next = c.recv_next;
                self.send_frame(conn, FlowDir::Rev, FrameKind::Ack { upto: recv_next }, FRAME_OVERHEAD);
                self.on_conn_delivered(conn, len as u64);
                self.check_raw_transfers(conn);
            }
            FrameKind::Ack { upto } => {
                self.handle_ack(conn, upto);
            }
            FrameKind::Fin => {
                let now = self.now();
                self.send_frame(conn, FlowDir::Rev, FrameKind::FinAck, FRAME_OVERHEAD);
                let c = &mut self.conns[conn.0 as usize];
                if c.closed_at.is_none() {
                    c.closed_at = Some(now);
                }
            }
            FrameKind::FinAck => {
                let now = self.now();
                let c = &mut self.conns[conn.0 as usize];
                if c.phase == ConnPhase::FinWait {
                    c.phase = ConnPhase::Closed;
                    c.closed_at = Some(now);
                    self.log.push(LogRecord::ConnClosed { conn, at: now });
                }
            }
            FrameKind::Ctrl(msg) => {
                self.handle_ctrl(conn, fdir, msg);
            }
        }
    }

    fn handle_ack(&mut self, conn: ConnId, upto: u64) {
        let now = self.now();
        let c = &mut self.conns[conn.0 as usize];
        if upto <= c.acked {
            return;
        }
        let delta = upto - c.acked;
        c.acked = upto;

        // cwnd growth: x2 per RTT in slow start, +1 MSS per RTT afterwards.
        match c.cc_phase {
            CcPhase::SlowStart => {
                c.cwnd += delta;
                if c.cwnd >= c.params.ssthresh {
                    c.cwnd = c.params.ssthresh;
                    c.cc_phase = CcPhase::CongestionAvoidance;
                }
            }
            CcPhase::CongestionAvoidance => {
                let inc = (c.params.mss as u64 * delta) / c.cwnd.max(1);
                c.cwnd += inc.max(1);
            }
        }
        let cwnd = c.cwnd;

        let mut sample = None;
        while let Some(&(seq_end, sent_at)) = c.send_times.front() {
            if seq_end <= upto {
                c.send_times.pop_front();
                sample = Some(now - sent_at);
            } else {
                break;
            }
        }
        if let Some(s) = sample {
            Self::update_srtt(c, s);
        }
        self.log.push(LogRecord::Cwnd { conn, cwnd, at: now });
        self.on_conn_acked(conn, upto);
        self.pump(conn);
    }

    fn update_srtt(c: &mut Connection, sample: SimTime) {
        c.srtt = Some(match c.srtt {
            None => sample,
            Some(prev) => SimTime::from_micros(
                (prev.as_micros() * 7 + sample.as_micros()) / 8,
            ),
        });
    }

    fn check_raw_transfers(&mut self, conn: ConnId) {
        let now = self.now();
        let recv_next = self.conns[conn.0 as usize].recv_next;
        for t in self.raw_transfers.iter_mut() {
            if t.conn == conn && t.completed_at.is_none() && recv_next >= t.target_end {
                t.completed_at = Some(now);
            }
        }
    }

    /// Sends a control message over a connection (either direction). Control
    /// frames ride the route with serialization but are not part of the byte
    /// stream.
    pub(crate) fn send_ctrl(&mut self, conn: ConnId, fdir: FlowDir, msg: ControlMessage) {
        self.send_frame(conn, fdir, FrameKind::Ctrl(msg), FRAME_OVERHEAD);
    }
}
