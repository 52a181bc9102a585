//! VM relocation orchestration. Migration cost is a black box: a (start,
//! duration) pair. The orchestrator's job is the notification sequence —
//! announce the future address ahead of completion, signal completion, and
//! let the session machinery re-home itself.

use core::fmt;

use crate::session::SessionId;
use crate::sim::{EventKind, Sim};
use crate::simcore::{Address, NodeId, SimTime};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct VmSpec {
    pub vm_id: u32,
    pub current_addr: Address,
    pub alternate_addr: Address,
    pub host: NodeId,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct MigrationEvent {
    pub start_at: SimTime,
    pub duration: SimTime,
    pub destination: NodeId,
    /// How far before completion the new address is announced. Default:
    /// `duration` (announce at migration start — the address is known
    /// "in advance").
    pub announce_lead: SimTime,
    /// Lag between true completion and the completion signal reaching the
    /// orchestrator (default 0).
    pub notify_lag: SimTime,
    /// Stop-and-copy pause: deliveries to the VM's node are deferred during
    /// the final `downtime` of the migration (default 0; live migration
    /// promises near-zero disruption).
    pub downtime: SimTime,
}

impl MigrationEvent {
    pub fn new(start_at: SimTime, duration: SimTime, destination: NodeId) -> MigrationEvent {
        MigrationEvent {
            start_at,
            duration,
            destination,
            announce_lead: duration,
            notify_lag: SimTime::ZERO,
            downtime: SimTime::ZERO,
        }
    }

    pub fn completion_at(&self) -> SimTime {
        self.start_at + self.duration
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum MigrationError {
    /// A migration for this VM already covers an overlapping time window.
    Overlap,
    /// The announce would have to be sent before the migration starts.
    InvalidLead,
    /// The session is not bound to the VM's current address.
    SessionNotBound,
    /// Current and alternate addresses must differ.
    BadVmSpec,
    /// The migration window lies in the simulated past.
    InThePast,
}

impl fmt::Display for MigrationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MigrationError::Overlap => write!(f, "overlapping migration for this VM"),
            MigrationError::InvalidLead => {
                write!(f, "announce lead exceeds migration duration")
            }
            MigrationError::SessionNotBound => {
                write!(f, "session not bound to the VM's current address")
            }
            MigrationError::BadVmSpec => {
                write!(f, "current and alternate addresses must differ")
            }
            MigrationError::InThePast => write!(f, "migration window is in the past"),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct MigrationState {
    pub vm: VmSpec,
    pub ev: MigrationEvent,
    pub sess: SessionId,
    pub announced: bool,
    pub completed: bool,
}

impl MigrationState {
    pub fn completion_at(&self) -> SimTime {
        self.ev.completion_at()
    }

    /// Whether deliveries to `node` at time `now` fall inside this
    /// migration's stop-and-copy pause.
    pub fn downtime_applies(&self, node: NodeId, now: SimTime) -> bool {
        if self.ev.downtime == SimTime::ZERO || node != self.vm.host {
            return false;
        }
        let completion = self.completion_at();
        let pause_start = completion.saturating_sub(self.ev.downtime);
        now >= pause_start && now < completion
    }
}

impl Sim {
    /// Schedules a migration of `vm` and binds its notification sequence to
    /// `sess`: announce at completion − lead, completion signal at
    /// completion + notify_lag.
    pub fn schedule_migration(
        &mut self,
        vm: VmSpec,
        ev: MigrationEvent,
        sess: SessionId,
    ) -> Result<(), MigrationError> {
        if vm.current_addr == vm.alternate_addr {
            return Err(MigrationError::BadVmSpec);
        }
        if ev.announce_lead > ev.duration {
            return Err(MigrationError::InvalidLead);
        }
        if ev.start_at < self.now() {
            return Err(MigrationError::InThePast);
        }
        let completion = ev.completion_at();
        for m in &self.migrations {
            if m.vm.vm_id == vm.vm_id
                && ev.start_at < m.completion_at()
                && m.ev.start_at < completion
            {
                return Err(MigrationError::Overlap);
            }
        }
        if self.sessions[sess.0 as usize].server_addr != vm.current_addr {
            return Err(MigrationError::SessionNotBound);
        }
        let mig = self.migrations.len();
        self.migrations.push(MigrationState {
            vm,
            ev,
            sess,
            announced: false,
            completed: false,
        });
        let announce_at = completion - ev.announce_lead;
        self.queue
            .schedule(announce_at, EventKind::MigrationAnnounce { mig })
            .expect("announce time validated against now");
        self.queue
            .schedule(completion + ev.notify_lag, EventKind::MigrationComplete { mig })
            .expect("completion is after start");
        Ok(())
    }

    pub(crate) fn migration_announce(&mut self, mig: usize) {
        let (sess, addr) = {
            let m = &mut self.migrations[mig];
            m.announced = true;
            (m.sess, m.vm.alternate_addr)
        };
        // A failed announce (session already mid-handover from an earlier
        // event) surfaces through the session's failure flag, not here.
        let _ = self.announce_new_address(sess, addr);
    }

    pub(crate) fn migration_complete(&mut self, mig: usize) {
        let sess = {
            let m = &mut self.migrations[mig];
            m.completed = true;
            m.sess
        };
        self.signal_migration_complete_or_defer(sess);
    }
}
