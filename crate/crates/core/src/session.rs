//! Mobility layer: one application session multiplexed over different
//! transport connections before and after migration, with exactly-once,
//! in-order stream continuity across handover.
//!
//! Session continuity lives entirely here: transport connections die at
//! handover, session sequence numbers do not. On switch the sender resumes
//! from the last session-level acknowledged byte and the receiver suppresses
//! duplicates, which together guarantee each application byte is delivered
//! exactly once.

use alloc::vec::Vec;
use core::fmt;
use core::mem;

use crate::accelerator::{evaluate_policy, AcceleratorPolicy, ContentDescriptor, PolicyDecision, ProxyId, ProxyPlan};
use crate::sim::{EventKind, FlowDir, LogRecord, Sim};
use crate::simcore::{Address, SimTime};
use crate::transport::{ConnId, ConnPhase, ConnectError, EndOwner, TransportParams};

/// Fixed session framing header: 8-byte session id, 8-byte resume sequence,
/// both big-endian. Sent once at the head of each connection's byte stream.
pub const SESSION_HEADER_BYTES: u64 = 16;

pub fn encode_frame_header(session_id: u64, resume_seq: u64) -> [u8; 16] {
    let mut out = [0u8; 16];
    out[..8].copy_from_slice(&session_id.to_be_bytes());
    out[8..].copy_from_slice(&resume_seq.to_be_bytes());
    out
}

pub fn decode_frame_header(bytes: &[u8; 16]) -> (u64, u64) {
    let mut id = [0u8; 8];
    let mut seq = [0u8; 8];
    id.copy_from_slice(&bytes[..8]);
    seq.copy_from_slice(&bytes[8..]);
    (u64::from_be_bytes(id), u64::from_be_bytes(seq))
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct SessionId(pub u32);

/// Handover phases, in the only legal order; after `Switched` the machine
/// returns to `Established`.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum HandoverPhase {
    Established,
    NewAddrKnown,
    MigrationComplete,
    NewConnOpening,
    Switched,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CtrlKind {
    NewAddrNotify,
    /// Announce of the already-current address: recorded, no effect.
    NewAddrNoop,
    MigrationComplete,
    SetPrimary,
    CloseOld,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct ControlMessage {
    pub kind: CtrlKind,
    pub session: SessionId,
    pub new_addr: Option<Address>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SessionError {
    BadPhase(HandoverPhase),
    DuplicateAnnounce,
    TransferAlreadyScheduled,
    NotOnPath,
    NoActiveProxy,
    ProxyAlreadyActive,
    Connect(ConnectError),
}

impl fmt::Display for SessionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SessionError::BadPhase(p) => write!(f, "operation illegal in phase {p:?}"),
            SessionError::DuplicateAnnounce => write!(f, "address announce already pending"),
            SessionError::TransferAlreadyScheduled => write!(f, "session already has a transfer"),
            SessionError::NotOnPath => write!(f, "insertion points not on the active path"),
            SessionError::NoActiveProxy => write!(f, "no accelerator pair inserted"),
            SessionError::ProxyAlreadyActive => write!(f, "accelerator pair already inserted"),
            SessionError::Connect(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SessionFailure {
    OpenFailed,
    HandoverFailed,
}

/// When a scheduled transfer begins streaming.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum StartSpec {
    At(SimTime),
    /// Starts the moment the session settles on its final post-migration
    /// data path (after accelerator insertion, when one happens).
    AfterHandover,
}

#[derive(Clone, Copy, Debug)]
pub struct HandoverReport {
    pub completed_at: SimTime,
    pub duration: SimTime,
    pub bytes_retransmitted: u64,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct SessTransfer {
    pub descriptor: ContentDescriptor,
    pub total: u64,
    pub start_after_handover: bool,
    pub started_at: Option<SimTime>,
    pub completed_at: Option<SimTime>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub(crate) enum DataPath {
    Direct(ConnId),
    Pipeline {
        a: ConnId,
        b: ConnId,
        c: ConnId,
        proxy: ProxyId,
    },
}

impl DataPath {
    pub fn client_leg(self) -> ConnId {
        match self {
            DataPath::Direct(c) => c,
            DataPath::Pipeline { a, .. } => a,
        }
    }

    pub fn conns(self) -> Vec<ConnId> {
        match self {
            DataPath::Direct(c) => alloc::vec![c],
            DataPath::Pipeline { a, b, c, .. } => alloc::vec![a, b, c],
        }
    }

    pub fn proxy(self) -> Option<ProxyId> {
        match self {
            DataPath::Direct(_) => None,
            DataPath::Pipeline { proxy, .. } => Some(proxy),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct PendingPipeline {
    pub a: ConnId,
    pub b: ConnId,
    pub c: ConnId,
    pub proxy: ProxyId,
}

#[derive(Clone, Debug)]
pub(crate) struct SessionState {
    pub client_addr: Address,
    pub server_addr: Address,
    pub params: TransportParams,
    pub phase: HandoverPhase,
    pub announced: Option<Address>,
    pub announce_in_flight: bool,
    pub pending_complete: bool,
    pub primary: DataPath,
    pub pending_new_conn: Option<ConnId>,
    pub pending_pipeline: Option<PendingPipeline>,
    pub pending_remove_conn: Option<ConnId>,

    /// Highest session byte acknowledged end-to-end as far as the sender
    /// knows. Advanced by transport acks on a direct path only; a switch
    /// retransmits from here.
    pub app_acked: u64,
    pub transfer: Option<SessTransfer>,

    /// Receiver: bytes delivered to the application, and the exactly-once
    /// ledger of delivered ranges.
    pub delivered: u64,
    pub ledger: Vec<(u64, u64)>,

    pub policy: Option<AcceleratorPolicy>,
    pub proxy_plan: Option<ProxyPlan>,
    pub proxy: Option<ProxyId>,

    pub established_at: Option<SimTime>,
    pub handover_started: Option<SimTime>,
    pub handover_report: Option<HandoverReport>,
    pub failure: Option<SessionFailure>,
}

impl Sim {
    /// Opens a session over a fresh transport connection. The session is
    /// usable once the handshake completes (1.5 RTT later).
    pub fn open_session(
        &mut self,
        client: Address,
        server: Address,
        params: TransportParams,
    ) -> Result<SessionId, ConnectError> {
        let id = SessionId(self.sessions.len() as u32);
        let conn = self.connect_owned(
            client,
            server,
            params,
            EndOwner::SessionClient(id),
            EndOwner::SessionServer(id),
        )?;
        self.sessions.push(SessionState {
            client_addr: client,
            server_addr: server,
            params,
            phase: HandoverPhase::Established,
            announced: None,
            announce_in_flight: false,
            pending_complete: false,
            primary: DataPath::Direct(conn),
            pending_new_conn: None,
            pending_pipeline: None,
            pending_remove_conn: None,
            app_acked: 0,
            transfer: None,
            delivered: 0,
            ledger: Vec::new(),
            policy: None,
            proxy_plan: None,
            proxy: None,
            established_at: None,
            handover_started: None,
            handover_report: None,
            failure: None,
        });
        Ok(id)
    }

    /// Configures the accelerator insertion policy checked after each
    /// migration, and where the proxy pair goes when it fires.
    pub fn set_session_policy(
        &mut self,
        sess: SessionId,
        policy: Option<AcceleratorPolicy>,
        plan: Option<ProxyPlan>,
    ) {
        let s = &mut self.sessions[sess.0 as usize];
        s.policy = policy;
        s.proxy_plan = plan;
    }

    /// Schedules the session's (single) transfer.
    pub fn schedule_transfer(
        &mut self,
        sess: SessionId,
        descriptor: ContentDescriptor,
        start: StartSpec,
    ) -> Result<(), SessionError> {
        if self.sessions[sess.0 as usize].transfer.is_some() {
            return Err(SessionError::TransferAlreadyScheduled);
        }
        let transfer = SessTransfer {
            descriptor,
            total: descriptor.size_bytes,
            start_after_handover: matches!(start, StartSpec::AfterHandover),
            started_at: None,
            completed_at: None,
        };
        self.sessions[sess.0 as usize].transfer = Some(transfer);
        if let StartSpec::At(t) = start {
            self.queue
                .schedule(t, EventKind::StartSessionTransfer { sess })
                .map_err(|_| SessionError::BadPhase(self.sessions[sess.0 as usize].phase))?;
        }
        Ok(())
    }

    /// The server-side announce of the post-migration address, carried to
    /// the client in-band. The phase transition happens on arrival.
    pub fn announce_new_address(
        &mut self,
        sess: SessionId,
        addr: Address,
    ) -> Result<(), SessionError> {
        let s = &mut self.sessions[sess.0 as usize];
        if s.phase != HandoverPhase::Established {
            return Err(SessionError::BadPhase(s.phase));
        }
        if s.announce_in_flight || s.announced.is_some() {
            return Err(SessionError::DuplicateAnnounce);
        }
        if addr == s.server_addr {
            let now = self.now();
            self.log.push(LogRecord::Ctrl {
                sess,
                kind: CtrlKind::NewAddrNoop,
                at: now,
            });
            return Ok(());
        }
        s.announce_in_flight = true;
        let conn = s.primary.client_leg();
        self.send_ctrl(
            conn,
            FlowDir::Rev,
            ControlMessage {
                kind: CtrlKind::NewAddrNotify,
                session: sess,
                new_addr: Some(addr),
            },
        );
        Ok(())
    }

    /// Out-of-band migration-complete signal; legal only once the new
    /// address is known.
    pub fn signal_migration_complete(&mut self, sess: SessionId) -> Result<(), SessionError> {
        let phase = self.sessions[sess.0 as usize].phase;
        if phase != HandoverPhase::NewAddrKnown {
            return Err(SessionError::BadPhase(phase));
        }
        self.apply_migration_complete(sess);
        Ok(())
    }

    /// Like [`Sim::signal_migration_complete`], but if the announce is still
    /// in flight the signal latches and fires when the announce arrives.
    pub(crate) fn signal_migration_complete_or_defer(&mut self, sess: SessionId) {
        let s = &mut self.sessions[sess.0 as usize];
        match s.phase {
            HandoverPhase::NewAddrKnown => self.apply_migration_complete(sess),
            HandoverPhase::Established if s.announce_in_flight => {
                s.pending_complete = true;
            }
            _ => {
                s.failure = Some(SessionFailure::HandoverFailed);
            }
        }
    }

    fn apply_migration_complete(&mut self, sess: SessionId) {
        let now = self.now();
        {
            let s = &mut self.sessions[sess.0 as usize];
            s.phase = HandoverPhase::MigrationComplete;
            s.handover_started = Some(now);
        }
        self.log.push(LogRecord::Ctrl {
            sess,
            kind: CtrlKind::MigrationComplete,
            at: now,
        });
        self.log.push(LogRecord::Phase {
            sess,
            phase: HandoverPhase::MigrationComplete,
            at: now,
        });

        let (client, target, params) = {
            let s = &mut self.sessions[sess.0 as usize];
            s.phase = HandoverPhase::NewConnOpening;
            (
                s.client_addr,
                s.announced.expect("announced address present"),
                s.params,
            )
        };
        self.log.push(LogRecord::Phase {
            sess,
            phase: HandoverPhase::NewConnOpening,
            at: now,
        });
        match self.connect_owned(
            client,
            target,
            params,
            EndOwner::SessionClient(sess),
            EndOwner::SessionServer(sess),
        ) {
            Ok(conn) => {
                self.sessions[sess.0 as usize].pending_new_conn = Some(conn);
            }
            Err(_) => {
                let s = &mut self.sessions[sess.0 as usize];
                s.failure = Some(SessionFailure::HandoverFailed);
                s.phase = HandoverPhase::Established;
            }
        }
    }

    /// Manual accelerator insertion on an established session; validates the
    /// insertion points against the active path.
    pub fn insert_pair(&mut self, sess: SessionId, plan: ProxyPlan) -> Result<(), SessionError> {
        let (phase, proxy, conn, client, server) = {
            let s = &self.sessions[sess.0 as usize];
            (
                s.phase,
                s.proxy,
                s.primary.client_leg(),
                s.client_addr,
                s.server_addr,
            )
        };
        if phase != HandoverPhase::Established {
            return Err(SessionError::BadPhase(phase));
        }
        if proxy.is_some() {
            return Err(SessionError::ProxyAlreadyActive);
        }
        // Both insertion points must sit on the active route (endpoints
        // included).
        let mut nodes = alloc::vec![client.node];
        for &(link, dir) in &self.conns[conn.0 as usize].route {
            let spec = self.topology.link(link);
            nodes.push(match dir {
                crate::simcore::Dir::AtoB => spec.b.node,
                crate::simcore::Dir::BtoA => spec.a.node,
            });
        }
        let near_pos = nodes.iter().position(|&n| n == plan.near.node);
        let far_pos = nodes.iter().position(|&n| n == plan.far.node);
        match (near_pos, far_pos) {
            (Some(np), Some(fp)) if np <= fp => {}
            _ => return Err(SessionError::NotOnPath),
        }
        self.start_pipeline(sess, plan, server);
        Ok(())
    }

    /// Removes the accelerator pair: the session falls back to a fresh
    /// direct connection once it opens.
    pub fn remove_pair(&mut self, sess: SessionId) -> Result<(), SessionError> {
        let (proxy, client, server, params) = {
            let s = &self.sessions[sess.0 as usize];
            (s.proxy, s.client_addr, s.server_addr, s.params)
        };
        if proxy.is_none() {
            return Err(SessionError::NoActiveProxy);
        }
        let conn = self
            .connect_owned(
                client,
                server,
                params,
                EndOwner::SessionClient(sess),
                EndOwner::SessionServer(sess),
            )
            .map_err(SessionError::Connect)?;
        self.sessions[sess.0 as usize].pending_remove_conn = Some(conn);
        Ok(())
    }

    pub(crate) fn start_pipeline(&mut self, sess: SessionId, plan: ProxyPlan, server: Address) {
        self.listen(plan.near);
        self.listen(plan.far);
        let (client, params) = {
            let s = &self.sessions[sess.0 as usize];
            (s.client_addr, s.params)
        };
        let proxy = self.new_proxy(sess, plan);
        let wan_params = TransportParams {
            mss: params.mss,
            rwnd_cap: plan.wan_window_bytes,
            initial_cwnd_segments: params.initial_cwnd_segments,
            ssthresh: u64::MAX,
            pacing_rate: plan.wan_rate_cap,
        };
        // Leg setup cannot fail: the path was validated (policy insertion
        // happens on a just-established route).
        let a = self
            .connect_owned(
                client,
                plan.near,
                params,
                EndOwner::SessionClient(sess),
                EndOwner::ProxyNearRx(proxy),
            )
            .expect("near leg routable");
        let b = self
            .connect_owned(
                plan.near,
                plan.far,
                wan_params,
                EndOwner::ProxyTx(proxy),
                EndOwner::ProxyFarRx(proxy),
            )
            .expect("wan leg routable");
        let c = self
            .connect_owned(
                plan.far,
                server,
                params,
                EndOwner::ProxyTx(proxy),
                EndOwner::SessionServer(sess),
            )
            .expect("server leg routable");
        self.set_proxy_legs(proxy, a, b, c);
        self.sessions[sess.0 as usize].pending_pipeline =
            Some(PendingPipeline { a, b, c, proxy });
    }

    // ---- notifications from the transport layer ----

    pub(crate) fn on_conn_established(&mut self, conn: ConnId) {
        if let Some(sess) = self.conn_session(conn) {
            self.session_conn_established(sess, conn);
        }
    }

    pub(crate) fn on_conn_failed(&mut self, conn: ConnId) {
        if let Some(sess) = self.conn_session(conn) {
            let s = &mut self.sessions[sess.0 as usize];
            if s.pending_new_conn == Some(conn) {
                s.pending_new_conn = None;
                // Stay on the old connection if it is still alive.
                let old_alive = matches!(
                    self.conns[s.primary.client_leg().0 as usize].phase,
                    ConnPhase::Established | ConnPhase::SynSent
                );
                if !old_alive {
                    s.failure = Some(SessionFailure::HandoverFailed);
                }
                s.phase = HandoverPhase::Established;
            } else if s.primary.client_leg() == conn && s.established_at.is_none() {
                s.failure = Some(SessionFailure::OpenFailed);
            }
        }
    }

    pub(crate) fn on_conn_acked(&mut self, conn: ConnId, upto: u64) {
        let owner = self.conns[conn.0 as usize].owner_init;
        if let EndOwner::SessionClient(sess) = owner {
            self.session_tx_acked(sess, conn, upto);
        }
    }

    pub(crate) fn on_conn_delivered(&mut self, conn: ConnId, n: u64) {
        let owner = self.conns[conn.0 as usize].owner_resp;
        match owner {
            EndOwner::SessionServer(sess) => self.session_rx(sess, conn, n),
            EndOwner::ProxyNearRx(p) => self.proxy_near_rx(p, n),
            EndOwner::ProxyFarRx(p) => self.proxy_far_rx(p, n),
            _ => {}
        }
    }

    fn conn_session(&self, conn: ConnId) -> Option<SessionId> {
        let c = &self.conns[conn.0 as usize];
        for owner in [c.owner_init, c.owner_resp] {
            match owner {
                EndOwner::SessionClient(s) | EndOwner::SessionServer(s) => return Some(s),
                EndOwner::ProxyNearRx(p) | EndOwner::ProxyFarRx(p) | EndOwner::ProxyTx(p) => {
                    return Some(self.proxies[p.0 as usize].sess)
                }
                EndOwner::Raw => {}
            }
        }
        None
    }

    fn session_conn_established(&mut self, sess: SessionId, conn: ConnId) {
        let now = self.now();
        let s = &self.sessions[sess.0 as usize];
        if s.pending_new_conn == Some(conn) {
            self.post_migration_hook(sess, conn);
        } else if s.pending_remove_conn == Some(conn) {
            self.sessions[sess.0 as usize].pending_remove_conn = None;
            self.do_switch(sess, DataPath::Direct(conn));
        } else if let Some(p) = s.pending_pipeline {
            if [p.a, p.b, p.c].contains(&conn) {
                let all_up = [p.a, p.b, p.c].iter().all(|&c| {
                    self.conns[c.0 as usize].phase == ConnPhase::Established
                });
                if all_up {
                    self.sessions[sess.0 as usize].pending_pipeline = None;
                    self.do_switch(
                        sess,
                        DataPath::Pipeline {
                            a: p.a,
                            b: p.b,
                            c: p.c,
                            proxy: p.proxy,
                        },
                    );
                }
            }
        } else if s.primary.client_leg() == conn && s.established_at.is_none() {
            self.sessions[sess.0 as usize].established_at = Some(now);
            self.pump(conn);
        }
    }

    /// Measures the new path's RTT and consults the insertion policy before
    /// the session resumes data.
    fn post_migration_hook(&mut self, sess: SessionId, new_conn: ConnId) {
        let now = self.now();
        let rtt = self.conns[new_conn.0 as usize]
            .srtt
            .unwrap_or(SimTime::ZERO);
        let (policy, plan, inserted, target) = {
            let s = &self.sessions[sess.0 as usize];
            (s.policy, s.proxy_plan, s.proxy.is_some(), s.announced)
        };
        if let Some(policy) = policy {
            let decision = evaluate_policy(&policy, rtt, inserted);
            self.log.push(LogRecord::PolicyDecision {
                sess,
                decision,
                rtt,
                at: now,
            });
            if decision == PolicyDecision::Insert {
                if let Some(plan) = plan {
                    let server = target.unwrap_or(self.sessions[sess.0 as usize].server_addr);
                    self.sessions[sess.0 as usize].pending_new_conn = None;
                    // The probe connection served its purpose (RTT
                    // measurement for the insertion decision); it closes
                    // unused and the pipeline takes over.
                    self.close(new_conn);
                    self.start_pipeline(sess, plan, server);
                    return;
                }
            }
        }
        self.sessions[sess.0 as usize].pending_new_conn = None;
        self.do_switch(sess, DataPath::Direct(new_conn));
    }

    fn do_switch(&mut self, sess: SessionId, new_path: DataPath) {
        let now = self.now();
        let (old_path, resume, retransmitted) = {
            let s = &mut self.sessions[sess.0 as usize];
            let old = mem::replace(&mut s.primary, new_path);
            let resume = s.app_acked;
            let old_leg = &self.conns[old.client_leg().0 as usize];
            let app_sent = old_leg.stream_resume
                + old_leg.send_next.saturating_sub(old_leg.stream_header);
            (old, resume, app_sent.saturating_sub(resume))
        };

        self.send_ctrl(
            new_path.client_leg(),
            FlowDir::Fwd,
            ControlMessage {
                kind: CtrlKind::SetPrimary,
                session: sess,
                new_addr: None,
            },
        );
        self.log.push(LogRecord::Ctrl {
            sess,
            kind: CtrlKind::SetPrimary,
            at: now,
        });

        if let Some(proxy) = new_path.proxy() {
            self.sessions[sess.0 as usize].proxy = Some(proxy);
            self.log.push(LogRecord::ProxyInserted { sess, proxy, at: now });
        }
        if let Some(old_proxy) = old_path.proxy() {
            self.sessions[sess.0 as usize].proxy = new_path.proxy();
            self.log.push(LogRecord::ProxyRemoved {
                sess,
                proxy: old_proxy,
                at: now,
            });
        }

        // Abandon unsent payload on the old path (it is retransmitted on the
        // new one) and close every old connection.
        self.send_ctrl(
            old_path.client_leg(),
            FlowDir::Fwd,
            ControlMessage {
                kind: CtrlKind::CloseOld,
                session: sess,
                new_addr: None,
            },
        );
        self.log.push(LogRecord::Ctrl {
            sess,
            kind: CtrlKind::CloseOld,
            at: now,
        });
        for conn in old_path.conns() {
            let c = &mut self.conns[conn.0 as usize];
            c.tx_target = c.send_next.max(c.tx_target.min(c.send_next));
            self.close(conn);
        }

        {
            let s = &mut self.sessions[sess.0 as usize];
            if let Some(target) = s.announced.take() {
                s.server_addr = target;
            }
            s.announce_in_flight = false;
            s.phase = HandoverPhase::Switched;
        }
        self.log.push(LogRecord::Phase {
            sess,
            phase: HandoverPhase::Switched,
            at: now,
        });
        {
            let s = &mut self.sessions[sess.0 as usize];
            s.phase = HandoverPhase::Established;
            let started = s.handover_started.take();
            s.handover_report = Some(HandoverReport {
                completed_at: now,
                duration: started.map_or(SimTime::ZERO, |t| now - t),
                bytes_retransmitted: retransmitted,
            });
        }
        self.log.push(LogRecord::Phase {
            sess,
            phase: HandoverPhase::Established,
            at: now,
        });

        let _ = resume;
        let (active, waiting) = match self.sessions[sess.0 as usize].transfer {
            Some(t) => (t.started_at.is_some(), t.start_after_handover && t.started_at.is_none()),
            None => (false, false),
        };
        if active {
            self.arm_primary(sess);
        } else if waiting {
            self.start_transfer_now(sess);
        }
    }

    /// Points the active data path at the transfer: session framing on the
    /// client leg, relay mapping on the proxy, resume offset everywhere.
    fn arm_primary(&mut self, sess: SessionId) {
        let (path, resume, total, descriptor) = {
            let s = &self.sessions[sess.0 as usize];
            let t = s.transfer.expect("armed without transfer");
            (s.primary, s.app_acked, t.total, t.descriptor)
        };
        let wire_total = SESSION_HEADER_BYTES + (total - resume);

        let leg = path.client_leg();
        let c = &mut self.conns[leg.0 as usize];
        c.stream_resume = resume;
        c.stream_header = SESSION_HEADER_BYTES;
        c.tx_target = wire_total;

        if let DataPath::Pipeline { c: server_leg, proxy, .. } = path {
            let sc = &mut self.conns[server_leg.0 as usize];
            sc.stream_resume = resume;
            sc.stream_header = SESSION_HEADER_BYTES;
            self.arm_proxy(proxy, descriptor, wire_total);
        }
        self.pump(leg);
    }

    pub(crate) fn start_transfer_now(&mut self, sess: SessionId) {
        let now = self.now();
        let total = {
            let s = &mut self.sessions[sess.0 as usize];
            let t = s.transfer.as_mut().expect("transfer scheduled");
            if t.started_at.is_some() {
                return;
            }
            t.started_at = Some(now);
            t.total
        };
        self.log.push(LogRecord::TransferStarted { sess, at: now });
        if total == 0 {
            let s = &mut self.sessions[sess.0 as usize];
            s.transfer.as_mut().unwrap().completed_at = Some(now);
            self.log.push(LogRecord::TransferComplete { sess, at: now });
            return;
        }
        self.arm_primary(sess);
    }

    fn session_tx_acked(&mut self, sess: SessionId, conn: ConnId, upto: u64) {
        let s = &mut self.sessions[sess.0 as usize];
        if let DataPath::Direct(primary) = s.primary {
            if primary == conn {
                let c = &self.conns[conn.0 as usize];
                let app = c.stream_resume + upto.saturating_sub(c.stream_header);
                let cap = s.transfer.map_or(app, |t| t.total);
                if app.min(cap) > s.app_acked {
                    s.app_acked = app.min(cap);
                }
            }
        }
    }

    fn session_rx(&mut self, sess: SessionId, conn: ConnId, n: u64) {
        let now = self.now();
        let (a0, a1) = {
            let c = &self.conns[conn.0 as usize];
            let w1 = c.recv_next;
            let w0 = w1 - n;
            (
                c.stream_resume + w0.saturating_sub(c.stream_header),
                c.stream_resume + w1.saturating_sub(c.stream_header),
            )
        };
        if a1 <= a0 {
            return;
        }
        let s = &mut self.sessions[sess.0 as usize];
        debug_assert!(a0 <= s.delivered, "delivery gap at session layer");
        if a1 <= s.delivered {
            return; // duplicate of already-delivered bytes
        }
        let start = s.delivered.max(a0);
        s.delivered = a1;
        match s.ledger.last_mut() {
            Some((_, end)) if *end == start => *end = a1,
            _ => s.ledger.push((start, a1)),
        }
        self.log.push(LogRecord::Deliver {
            sess,
            start,
            end: a1,
            at: now,
        });

        let s = &mut self.sessions[sess.0 as usize];
        if let Some(t) = s.transfer.as_mut() {
            if t.completed_at.is_none() && s.delivered >= t.total && t.started_at.is_some() {
                t.completed_at = Some(now);
                self.log.push(LogRecord::TransferComplete { sess, at: now });
            }
        }
    }

    pub(crate) fn handle_ctrl(&mut self, _conn: ConnId, _fdir: FlowDir, msg: ControlMessage) {
        let now = self.now();
        match msg.kind {
            CtrlKind::NewAddrNotify => {
                let sess = msg.session;
                let addr = msg.new_addr.expect("announce carries an address");
                {
                    let s = &mut self.sessions[sess.0 as usize];
                    s.announce_in_flight = false;
                    if s.phase != HandoverPhase::Established {
                        return;
                    }
                    s.announced = Some(addr);
                    s.phase = HandoverPhase::NewAddrKnown;
                }
                self.log.push(LogRecord::Ctrl {
                    sess,
                    kind: CtrlKind::NewAddrNotify,
                    at: now,
                });
                self.log.push(LogRecord::Phase {
                    sess,
                    phase: HandoverPhase::NewAddrKnown,
                    at: now,
                });
                if self.sessions[sess.0 as usize].pending_complete {
                    self.sessions[sess.0 as usize].pending_complete = false;
                    self.apply_migration_complete(sess);
                }
            }
            // SET_PRIMARY / CLOSE_OLD are logged at the moment the switch
            // decides them; their arrival needs no receiver action in this
            // model.
            CtrlKind::SetPrimary | CtrlKind::CloseOld => {}
            CtrlKind::MigrationComplete | CtrlKind::NewAddrNoop => {}
        }
    }

    // ---- accessors ----

    pub fn session_phase(&self, sess: SessionId) -> HandoverPhase {
        self.sessions[sess.0 as usize].phase
    }

    pub fn session_established_at(&self, sess: SessionId) -> Option<SimTime> {
        self.sessions[sess.0 as usize].established_at
    }

    pub fn session_delivered(&self, sess: SessionId) -> u64 {
        self.sessions[sess.0 as usize].delivered
    }

    /// The exactly-once delivery ledger: ordered, disjoint delivered ranges.
    pub fn deliver_stream(&self, sess: SessionId) -> &[(u64, u64)] {
        &self.sessions[sess.0 as usize].ledger
    }

    pub fn session_handover_report(&self, sess: SessionId) -> Option<HandoverReport> {
        self.sessions[sess.0 as usize].handover_report
    }

    pub fn session_transfer_times(
        &self,
        sess: SessionId,
    ) -> Option<(Option<SimTime>, Option<SimTime>)> {
        self.sessions[sess.0 as usize]
            .transfer
            .map(|t| (t.started_at, t.completed_at))
    }

    pub fn session_failure_occurred(&self, sess: SessionId) -> bool {
        self.sessions[sess.0 as usize].failure.is_some()
    }

    pub fn session_proxy(&self, sess: SessionId) -> Option<ProxyId> {
        self.sessions[sess.0 as usize].proxy
    }

    pub fn session_primary_conn(&self, sess: SessionId) -> ConnId {
        self.sessions[sess.0 as usize].primary.client_leg()
    }

    pub fn session_app_acked(&self, sess: SessionId) -> u64 {
        self.sessions[sess.0 as usize].app_acked
    }
}
