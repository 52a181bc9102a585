use alloc::collections::{BTreeSet, BinaryHeap};
use core::cmp::Ordering;
use core::fmt;

use super::time::SimTime;

/// Handle returned by [`EventQueue::schedule`], usable for cancellation.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct EventHandle(u64);

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ScheduleError {
    InThePast { now: SimTime, requested: SimTime },
}

impl fmt::Display for ScheduleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleError::InThePast { now, requested } => {
                write!(f, "cannot schedule at {requested} before clock {now}")
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct EngineStats {
    pub scheduled: u64,
    pub processed: u64,
    pub cancelled: u64,
}

/// A due event popped from the queue.
#[derive(Clone, Debug)]
pub struct Event<K> {
    pub fire_at: SimTime,
    pub seq: u64,
    pub kind: K,
}

struct Entry<K> {
    fire_at: SimTime,
    seq: u64,
    kind: K,
}

// Ordering ignores the payload; ties on fire_at break by ascending seq so a
// run is replayable bit-for-bit.
impl<K> PartialEq for Entry<K> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_at == other.fire_at && self.seq == other.seq
    }
}
impl<K> Eq for Entry<K> {}
impl<K> PartialOrd for Entry<K> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<K> Ord for Entry<K> {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; reverse so the earliest event pops first.
        (other.fire_at, other.seq).cmp(&(self.fire_at, self.seq))
    }
}

/// Deterministic future event list: a virtual clock plus a priority queue
/// ordered by (fire_at, seq).
pub struct EventQueue<K> {
    now: SimTime,
    next_seq: u64,
    heap: BinaryHeap<Entry<K>>,
    cancelled: BTreeSet<u64>,
    stats: EngineStats,
}

impl<K> Default for EventQueue<K> {
    fn default() -> Self {
        Self::new()
    }
}

impl<K> EventQueue<K> {
    pub fn new() -> Self {
        EventQueue {
            now: SimTime::ZERO,
            next_seq: 0,
            heap: BinaryHeap::new(),
            cancelled: BTreeSet::new(),
            stats: EngineStats::default(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn stats(&self) -> EngineStats {
        self.stats
    }

    pub fn is_empty(&self) -> bool {
        self.heap.len() == self.cancelled.len()
    }

    pub fn schedule(&mut self, fire_at: SimTime, kind: K) -> Result<EventHandle, ScheduleError> {
        if fire_at < self.now {
            return Err(ScheduleError::InThePast {
                now: self.now,
                requested: fire_at,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry { fire_at, seq, kind });
        self.stats.scheduled += 1;
        Ok(EventHandle(seq))
    }

    /// Returns true if the event was still pending.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        if handle.0 >= self.next_seq {
            return false;
        }
        if self.cancelled.insert(handle.0) {
            self.stats.cancelled += 1;
            true
        } else {
            false
        }
    }

    /// Pops the next event with fire_at <= until, advancing the clock to it.
    /// Returns None when nothing further is due by `until`.
    pub fn pop_due(&mut self, until: SimTime) -> Option<Event<K>> {
        loop {
            let due = match self.heap.peek() {
                Some(entry) if entry.fire_at <= until => true,
                _ => false,
            };
            if !due {
                return None;
            }
            let entry = self.heap.pop().unwrap();
            if self.cancelled.remove(&entry.seq) {
                continue;
            }
            debug_assert!(entry.fire_at >= self.now, "causality violation");
            self.now = entry.fire_at;
            self.stats.processed += 1;
            return Some(Event {
                fire_at: entry.fire_at,
                seq: entry.seq,
                kind: entry.kind,
            });
        }
    }

    /// Advances the clock to `t` without processing anything (used after all
    /// due events have been drained).
    pub fn finish_at(&mut self, t: SimTime) {
        if t > self.now {
            self.now = t;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn drain_until(q: &mut EventQueue<u32>, t: SimTime) -> Vec<(SimTime, u32)> {
        let mut out = Vec::new();
        while let Some(ev) = q.pop_due(t) {
            out.push((ev.fire_at, ev.kind));
        }
        q.finish_at(t);
        out
    }

    #[test]
    fn schedule_at_now_fires_before_later_events() {
        let mut q = EventQueue::new();
        q.schedule(SimTime::from_micros(10), 1).unwrap();
        q.schedule(SimTime::ZERO, 2).unwrap();
        let order = drain_until(&mut q, SimTime::from_micros(100));
        assert_eq!(order, alloc::vec![(SimTime::ZERO, 2), (SimTime::from_micros(10), 1)]);
    }

    #[test]
    fn equal_timestamps_process_in_seq_order() {
        let mut q = EventQueue::new();
        let t = SimTime::from_micros(100);
        q.schedule(t, 5).unwrap();
        q.schedule(t, 6).unwrap();
        let order = drain_until(&mut q, t);
        assert_eq!(order, alloc::vec![(t, 5), (t, 6)]);
    }

    #[test]
    fn cancelled_event_never_fires() {
        let mut q = EventQueue::new();
        let h = q.schedule(SimTime::from_micros(5), 1).unwrap();
        q.schedule(SimTime::from_micros(6), 2).unwrap();
        assert!(q.cancel(h));
        assert!(!q.cancel(h));
        let order = drain_until(&mut q, SimTime::from_micros(10));
        assert_eq!(order, alloc::vec![(SimTime::from_micros(6), 2)]);
        assert_eq!(q.stats().cancelled, 1);
    }

    #[test]
    fn scheduling_in_the_past_is_an_error() {
        let mut q = EventQueue::new();
        q.schedule(SimTime::from_micros(50), 1).unwrap();
        assert!(q.pop_due(SimTime::from_micros(50)).is_some());
        assert!(matches!(
            q.schedule(SimTime::from_micros(10), 2),
            Err(ScheduleError::InThePast { .. })
        ));
    }

    #[test]
    fn run_until_with_empty_queue_advances_clock() {
        let mut q: EventQueue<u32> = EventQueue::new();
        let out = drain_until(&mut q, SimTime::from_secs(1));
        assert!(out.is_empty());
        assert_eq!(q.now(), SimTime::from_secs(1));
        assert_eq!(q.stats().processed, 0);
    }

    #[test]
    fn run_until_now_processes_exactly_due_events() {
        let mut q = EventQueue::new();
        q.schedule(SimTime::ZERO, 1).unwrap();
        q.schedule(SimTime::from_micros(1), 2).unwrap();
        let out = drain_until(&mut q, SimTime::ZERO);
        assert_eq!(out, alloc::vec![(SimTime::ZERO, 1)]);
    }
}
