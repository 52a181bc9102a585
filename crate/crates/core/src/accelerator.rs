//! WAN optimizer proxy pair: dynamic insertion policy, segment splitting
//! with local ACK termination, a content-addressed dedup chunk cache and a
//! parametric compression model.
//!
//! Payloads are descriptors (byte counts plus redundancy/compressibility
//! parameters), not real bytes; a byte-level chunk-hash mode exists to
//! ground the dedup model in real content.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec::Vec;
use core::fmt;

use sha2::{Digest, Sha256};

use crate::session::SessionId;
use crate::sim::Sim;
use crate::simcore::SimTime;
use crate::transport::ConnId;

/// Default dedup chunk size.
pub const DEFAULT_CHUNK_SIZE: u32 = 8192;
/// Wire cost of one dedup chunk reference (hash plus header).
pub const TOKEN_BYTES: u64 = 40;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum DescriptorError {
    ZeroSize,
    BadRedundancy,
    BadCompressibility,
}

impl fmt::Display for DescriptorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DescriptorError::ZeroSize => write!(f, "size_bytes must be positive"),
            DescriptorError::BadRedundancy => write!(f, "redundancy must lie in [0, 1]"),
            DescriptorError::BadCompressibility => {
                write!(f, "compressibility must lie in (0, 1]")
            }
        }
    }
}

/// What a transfer carries: its size, the fraction of chunks the far side
/// has effectively already seen (ρ), and how well novel data compresses (κ).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContentDescriptor {
    pub size_bytes: u64,
    /// ρ: fraction of chunks that dedup to a reference, in [0, 1].
    pub redundancy: f64,
    /// κ: post-compression size ratio of novel data, in (0, 1].
    pub compressibility: f64,
}

impl ContentDescriptor {
    pub fn new(size_bytes: u64, redundancy: f64, compressibility: f64) -> Result<Self, DescriptorError> {
        if size_bytes == 0 {
            return Err(DescriptorError::ZeroSize);
        }
        if !(0.0..=1.0).contains(&redundancy) {
            return Err(DescriptorError::BadRedundancy);
        }
        if !(compressibility > 0.0 && compressibility <= 1.0) {
            return Err(DescriptorError::BadCompressibility);
        }
        Ok(ContentDescriptor {
            size_bytes,
            redundancy,
            compressibility,
        })
    }

    /// A plain transfer: nothing dedups, nothing compresses.
    pub fn opaque(size_bytes: u64) -> Self {
        ContentDescriptor {
            size_bytes,
            redundancy: 0.0,
            compressibility: 1.0,
        }
    }
}

/// Ceiling of a non-negative f64 as u64 (`f64::ceil` needs std).
fn ceil_u64(x: f64) -> u64 {
    let t = x as u64;
    if (t as f64) < x {
        t + 1
    } else {
        t
    }
}

/// Round-half-up of a non-negative f64 as u64 (`f64::round` needs std).
fn round_u64(x: f64) -> u64 {
    (x + 0.5) as u64
}

/// Bytes the optimizer puts on the WAN for a `size`-byte prefix:
/// novel payload shrunk by (1−ρ)·κ, plus one 40-byte reference per chunk.
pub(crate) fn wan_bytes_for(size: u64, rho: f64, kappa: f64, chunk_size: u32) -> u64 {
    if size == 0 {
        return 0;
    }
    let payload = ceil_u64((size as f64) * (1.0 - rho) * kappa);
    let chunks = size.div_ceil(chunk_size as u64);
    payload + TOKEN_BYTES * chunks
}

/// Content-addressed chunk cache: 256-bit hash → chunk id, FIFO eviction
/// when the cached bytes would exceed capacity.
#[derive(Clone, Debug)]
pub struct ChunkStore {
    chunk_size: u32,
    capacity_bytes: u64,
    entries: BTreeMap<[u8; 32], u64>,
    order: VecDeque<[u8; 32]>,
    next_id: u64,
    synthetic_seq: u64,
}

impl ChunkStore {
    pub fn new(chunk_size: u32, capacity_bytes: u64) -> ChunkStore {
        ChunkStore {
            chunk_size,
            capacity_bytes,
            entries: BTreeMap::new(),
            order: VecDeque::new(),
            next_id: 0,
            synthetic_seq: 0,
        }
    }

    pub fn chunk_size(&self) -> u32 {
        self.chunk_size
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, hash: &[u8; 32]) -> bool {
        self.entries.contains_key(hash)
    }

    /// Inserts a hash; returns false when it was already present (a hit).
    /// Evicts oldest entries to stay within capacity.
    pub fn insert(&mut self, hash: [u8; 32]) -> bool {
        if self.entries.contains_key(&hash) {
            return false;
        }
        let id = self.next_id;
        self.next_id += 1;
        self.entries.insert(hash, id);
        self.order.push_back(hash);
        while self.entries.len() as u64 * self.chunk_size as u64 > self.capacity_bytes {
            if let Some(oldest) = self.order.pop_front() {
                self.entries.remove(&oldest);
            } else {
                break;
            }
        }
        true
    }

    /// The stored hashes, ordered; two synchronized stores compare equal
    /// entry sets.
    pub fn entry_set(&self) -> Vec<[u8; 32]> {
        self.entries.keys().copied().collect()
    }

    /// Deterministic stand-in hash for a novel descriptor-mode chunk. Two
    /// stores fed the same insertion sequence produce identical entry sets.
    pub(crate) fn next_synthetic_hash(&mut self) -> [u8; 32] {
        let seq = self.synthetic_seq;
        self.synthetic_seq += 1;
        let mut h = Sha256::new();
        h.update(seq.to_be_bytes());
        h.finalize().into()
    }
}

impl Default for ChunkStore {
    fn default() -> Self {
        ChunkStore::new(DEFAULT_CHUNK_SIZE, u64::MAX)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AcceleratorPolicy {
    pub rtt_threshold: SimTime,
    pub hysteresis: SimTime,
    pub wan_window_bytes: u64,
    pub wan_rate_cap: Option<u64>,
}

impl Default for AcceleratorPolicy {
    fn default() -> Self {
        AcceleratorPolicy {
            rtt_threshold: SimTime::from_millis(100),
            hysteresis: SimTime::from_millis(20),
            wan_window_bytes: 1 << 20,
            wan_rate_cap: None,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PolicyDecision {
    Insert,
    Remove,
    Hold,
}

/// Pure insertion rule with a hysteresis band to prevent flapping: insert
/// at or above the threshold, remove at or below threshold − hysteresis.
pub fn evaluate_policy(
    policy: &AcceleratorPolicy,
    measured_rtt: SimTime,
    currently_inserted: bool,
) -> PolicyDecision {
    if !currently_inserted && measured_rtt >= policy.rtt_threshold {
        PolicyDecision::Insert
    } else if currently_inserted
        && measured_rtt <= policy.rtt_threshold.saturating_sub(policy.hysteresis)
    {
        PolicyDecision::Remove
    } else {
        PolicyDecision::Hold
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ProxyMode {
    /// Byte-transparent relay: segment splitting only.
    Bypass,
    /// Dedup plus compression on the WAN leg.
    Optimizing,
}

/// Where the proxy pair goes and how its WAN leg behaves.
#[derive(Clone, Copy, Debug)]
pub struct ProxyPlan {
    pub near: crate::simcore::Address,
    pub far: crate::simcore::Address,
    pub mode: ProxyMode,
    pub wan_window_bytes: u64,
    pub wan_rate_cap: Option<u64>,
    pub chunk_size: u32,
    pub store_capacity_bytes: u64,
}

impl ProxyPlan {
    pub fn new(near: crate::simcore::Address, far: crate::simcore::Address) -> ProxyPlan {
        ProxyPlan {
            near,
            far,
            mode: ProxyMode::Optimizing,
            wan_window_bytes: 1 << 20,
            wan_rate_cap: None,
            chunk_size: DEFAULT_CHUNK_SIZE,
            store_capacity_bytes: u64::MAX,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct ProxyId(pub u32);

/// The WAN transform for one armed transfer: a monotone map from bytes of
/// the inbound (client-side) stream to bytes on the WAN leg.
#[derive(Clone, Copy, Debug)]
pub(crate) struct WanMap {
    pub total_in: u64,
    pub rho: f64,
    pub kappa: f64,
    pub chunk_size: u32,
    pub wan_total: u64,
    pub n_chunks: u64,
    pub hit_chunks: u64,
}

impl WanMap {
    fn identity(total_in: u64, chunk_size: u32) -> WanMap {
        WanMap {
            total_in,
            rho: 0.0,
            kappa: 1.0,
            chunk_size,
            wan_total: total_in,
            n_chunks: 0,
            hit_chunks: 0,
        }
    }

    fn optimizing(total_in: u64, rho: f64, kappa: f64, chunk_size: u32) -> WanMap {
        let n_chunks = total_in.div_ceil(chunk_size as u64);
        let hit_chunks = round_u64(rho * n_chunks as f64);
        WanMap {
            total_in,
            rho,
            kappa,
            chunk_size,
            wan_total: wan_bytes_for(total_in, rho, kappa, chunk_size),
            n_chunks,
            hit_chunks,
        }
    }

    /// WAN bytes emitted once `prefix` inbound bytes have arrived.
    pub fn wan_prefix(&self, prefix: u64) -> u64 {
        let prefix = prefix.min(self.total_in);
        if self.n_chunks == 0 {
            return prefix; // identity map
        }
        if prefix == self.total_in {
            return self.wan_total;
        }
        wan_bytes_for(prefix, self.rho, self.kappa, self.chunk_size).min(self.wan_total)
    }

    /// Largest inbound prefix fully reconstructible from `wan_in` WAN bytes.
    pub fn inbound_for(&self, wan_in: u64) -> u64 {
        if wan_in >= self.wan_total {
            return self.total_in;
        }
        let (mut lo, mut hi) = (0u64, self.total_in);
        // invariant: wan_prefix(lo) <= wan_in < wan_prefix(hi+..)
        while lo < hi {
            let mid = lo + (hi - lo + 1) / 2;
            if self.wan_prefix(mid) <= wan_in {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        lo
    }

    /// Evenly spread hit pattern: chunk `k` dedups iff the running hit quota
    /// advances at `k`. Exactly `hit_chunks` of `n_chunks` dedup.
    pub fn chunk_is_hit(&self, k: u64) -> bool {
        ((k + 1) * self.hit_chunks) / self.n_chunks > (k * self.hit_chunks) / self.n_chunks
    }
}

#[derive(Clone, Debug)]
pub(crate) struct ProxyRuntime {
    pub sess: SessionId,
    pub plan: ProxyPlan,
    pub near_store: ChunkStore,
    pub far_store: ChunkStore,
    pub leg_a: Option<ConnId>,
    pub leg_b: Option<ConnId>,
    pub leg_c: Option<ConnId>,
    pub map: Option<WanMap>,
    /// Inbound (client-leg) bytes seen at the near proxy.
    pub in_bytes: u64,
    /// WAN-leg bytes seen at the far proxy.
    pub wan_in: u64,
    /// Inbound chunks fully received and cache-processed so far.
    pub chunks_done: u64,
}

/// Optimized size of one transfer through a store, updating the store with
/// the novel chunk hashes.
pub fn optimize_payload(descriptor: ContentDescriptor, store: &mut ChunkStore) -> u64 {
    let size = descriptor.size_bytes;
    let chunk = store.chunk_size();
    let n = size.div_ceil(chunk as u64);
    let hits = round_u64(descriptor.redundancy * n as f64);
    for _ in 0..n.saturating_sub(hits) {
        let h = store.next_synthetic_hash();
        store.insert(h);
    }
    wan_bytes_for(size, descriptor.redundancy, descriptor.compressibility, chunk)
}

/// Byte-level mode: fixed 8 KiB chunking (last chunk short), SHA-256 per
/// chunk.
pub fn hash_chunks(bytes: &[u8]) -> Vec<[u8; 32]> {
    bytes
        .chunks(DEFAULT_CHUNK_SIZE as usize)
        .map(|c| {
            let mut h = Sha256::new();
            h.update(c);
            h.finalize().into()
        })
        .collect()
}

impl Sim {
    pub(crate) fn new_proxy(&mut self, sess: SessionId, plan: ProxyPlan) -> ProxyId {
        let id = ProxyId(self.proxies.len() as u32);
        self.proxies.push(ProxyRuntime {
            sess,
            plan,
            near_store: ChunkStore::new(plan.chunk_size, plan.store_capacity_bytes),
            far_store: ChunkStore::new(plan.chunk_size, plan.store_capacity_bytes),
            leg_a: None,
            leg_b: None,
            leg_c: None,
            map: None,
            in_bytes: 0,
            wan_in: 0,
            chunks_done: 0,
        });
        id
    }

    pub(crate) fn set_proxy_legs(&mut self, proxy: ProxyId, a: ConnId, b: ConnId, c: ConnId) {
        let p = &mut self.proxies[proxy.0 as usize];
        p.leg_a = Some(a);
        p.leg_b = Some(b);
        p.leg_c = Some(c);
    }

    /// Binds the WAN transform for one transfer: `wire_total` bytes will
    /// arrive on the client leg and must come out of the server leg.
    pub(crate) fn arm_proxy(&mut self, proxy: ProxyId, descriptor: ContentDescriptor, wire_total: u64) {
        let p = &mut self.proxies[proxy.0 as usize];
        p.in_bytes = 0;
        p.wan_in = 0;
        p.chunks_done = 0;
        p.map = Some(match p.plan.mode {
            ProxyMode::Bypass => WanMap::identity(wire_total, p.plan.chunk_size),
            ProxyMode::Optimizing => WanMap::optimizing(
                wire_total,
                descriptor.redundancy,
                descriptor.compressibility,
                p.plan.chunk_size,
            ),
        });
    }

    /// Near proxy absorbed `n` more client-leg bytes: update the caches for
    /// every chunk that completed, and release the matching WAN prefix.
    pub(crate) fn proxy_near_rx(&mut self, proxy: ProxyId, n: u64) {
        let (leg_b, target) = {
            let p = &mut self.proxies[proxy.0 as usize];
            p.in_bytes += n;
            let map = match p.map {
                Some(m) => m,
                None => return,
            };
            let chunk = map.chunk_size as u64;
            if map.n_chunks > 0 {
                let complete = if p.in_bytes >= map.total_in {
                    map.n_chunks
                } else {
                    p.in_bytes / chunk
                };
                while p.chunks_done < complete {
                    let k = p.chunks_done;
                    p.chunks_done += 1;
                    if !map.chunk_is_hit(k) {
                        // Synchronized-store model: a chunk crossing the WAN
                        // once lands in both caches.
                        let hn = p.near_store.next_synthetic_hash();
                        p.near_store.insert(hn);
                        let hf = p.far_store.next_synthetic_hash();
                        p.far_store.insert(hf);
                    }
                }
            }
            (p.leg_b.expect("wan leg bound"), map.wan_prefix(p.in_bytes))
        };
        let c = &mut self.conns[leg_b.0 as usize];
        if target > c.tx_target {
            c.tx_target = target;
        }
        self.pump(leg_b);
    }

    /// Far proxy absorbed `n` more WAN bytes: reconstruct and forward the
    /// longest inbound prefix those bytes cover.
    pub(crate) fn proxy_far_rx(&mut self, proxy: ProxyId, n: u64) {
        let (leg_c, out) = {
            let p = &mut self.proxies[proxy.0 as usize];
            p.wan_in += n;
            let map = match p.map {
                Some(m) => m,
                None => return,
            };
            (p.leg_c.expect("server leg bound"), map.inbound_for(p.wan_in))
        };
        let c = &mut self.conns[leg_c.0 as usize];
        if out > c.tx_target {
            c.tx_target = out;
        }
        self.pump(leg_c);
    }

    /// Entry sets of the near and far caches, for the synchronization
    /// invariant.
    pub fn proxy_store_entries(&self, proxy: ProxyId) -> (Vec<[u8; 32]>, Vec<[u8; 32]>) {
        let p = &self.proxies[proxy.0 as usize];
        (p.near_store.entry_set(), p.far_store.entry_set())
    }

    /// Bytes actually carried by the WAN leg of a session's proxy pair, if
    /// one is (or was) active.
    pub fn session_wan_bytes(&self, sess: SessionId) -> Option<u64> {
        self.proxies
            .iter()
            .find(|p| p.sess == sess)
            .and_then(|p| p.leg_b)
            .map(|b| self.conns[b.0 as usize].recv_next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn policy(threshold_ms: u64, hysteresis_ms: u64) -> AcceleratorPolicy {
        AcceleratorPolicy {
            rtt_threshold: SimTime::from_millis(threshold_ms),
            hysteresis: SimTime::from_millis(hysteresis_ms),
            ..AcceleratorPolicy::default()
        }
    }

    #[test]
    fn policy_inserts_above_threshold() {
        let d = evaluate_policy(&policy(100, 20), SimTime::from_millis(600), false);
        assert_eq!(d, PolicyDecision::Insert);
    }

    #[test]
    fn policy_holds_inside_hysteresis_band() {
        // 90 ms is below the threshold but above threshold − hysteresis.
        let d = evaluate_policy(&policy(100, 20), SimTime::from_millis(90), true);
        assert_eq!(d, PolicyDecision::Hold);
    }

    #[test]
    fn policy_removes_below_band() {
        let d = evaluate_policy(&policy(100, 20), SimTime::from_millis(80), true);
        assert_eq!(d, PolicyDecision::Remove);
    }

    #[test]
    fn rtt_sweep_triggers_exactly_one_insert_and_one_remove() {
        let p = policy(100, 20);
        let mut inserted = false;
        let mut inserts = 0;
        let mut removes = 0;
        let sweep: Vec<u64> = (0..=20).map(|i| i * 10).chain((0..20).rev().map(|i| i * 10)).collect();
        for ms in sweep {
            match evaluate_policy(&p, SimTime::from_millis(ms), inserted) {
                PolicyDecision::Insert => {
                    inserted = true;
                    inserts += 1;
                }
                PolicyDecision::Remove => {
                    inserted = false;
                    removes += 1;
                }
                PolicyDecision::Hold => {}
            }
        }
        assert_eq!((inserts, removes), (1, 1));
    }

    #[test]
    fn optimize_single_chunk_incompressible() {
        let mut store = ChunkStore::default();
        let d = ContentDescriptor::new(8192, 0.0, 1.0).unwrap();
        assert_eq!(optimize_payload(d, &mut store), 8192 + 40);
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn optimize_fully_redundant_transfer_sends_tokens_only() {
        let mut store = ChunkStore::default();
        let d = ContentDescriptor::new(50 * 1024 * 1024, 1.0, 0.3).unwrap();
        assert_eq!(optimize_payload(d, &mut store), 40 * 6400);
        assert_eq!(store.len(), 0);
    }

    #[test]
    fn optimize_half_redundant_half_compressible() {
        let mut store = ChunkStore::default();
        let d = ContentDescriptor::new(50 * 1024 * 1024, 0.5, 0.5).unwrap();
        let got = optimize_payload(d, &mut store);
        // 50 MB × 0.5 × 0.5 payload plus 6400 tokens.
        assert_eq!(got, 13_107_200 + 40 * 6400);
        assert_eq!(store.len(), 3200);
    }

    #[test]
    fn descriptor_validation() {
        assert_eq!(
            ContentDescriptor::new(0, 0.0, 1.0),
            Err(DescriptorError::ZeroSize)
        );
        assert_eq!(
            ContentDescriptor::new(1, 1.5, 1.0),
            Err(DescriptorError::BadRedundancy)
        );
        assert_eq!(
            ContentDescriptor::new(1, 0.0, 0.0),
            Err(DescriptorError::BadCompressibility)
        );
        assert!(ContentDescriptor::new(1, 1.0, 1.0).is_ok());
    }

    #[test]
    fn identical_chunks_hash_equal_and_dedup() {
        let bytes = alloc::vec![0xabu8; 16384];
        let hashes = hash_chunks(&bytes);
        assert_eq!(hashes.len(), 2);
        assert_eq!(hashes[0], hashes[1]);
        let mut store = ChunkStore::default();
        assert!(store.insert(hashes[0]));
        assert!(!store.insert(hashes[1]));
        assert_eq!(store.len(), 1);
    }

    #[test]
    fn empty_input_hashes_to_empty_list() {
        assert!(hash_chunks(&[]).is_empty());
    }

    #[test]
    fn hashing_is_deterministic() {
        // Fixed pseudo-random content, hashed twice.
        let mut state = 0x9e3779b97f4a7c15u64;
        let bytes: Vec<u8> = (0..1 << 20)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (state >> 56) as u8
            })
            .collect();
        assert_eq!(hash_chunks(&bytes), hash_chunks(&bytes));
        assert_eq!(hash_chunks(&bytes).len(), 128);
    }

    #[test]
    fn store_evicts_fifo_at_capacity() {
        let mut store = ChunkStore::new(8192, 2 * 8192);
        let hashes = [[1u8; 32], [2u8; 32], [3u8; 32]];
        for h in hashes {
            store.insert(h);
        }
        assert_eq!(store.len(), 2);
        assert!(!store.contains(&hashes[0]));
        assert!(store.contains(&hashes[1]));
        assert!(store.contains(&hashes[2]));
    }

    #[test]
    fn wan_map_prefix_is_monotone_and_invertible() {
        let map = WanMap::optimizing(1_000_000, 0.6, 0.5, 8192);
        let mut prev = 0;
        for a in (0..=1_000_000).step_by(997) {
            let w = map.wan_prefix(a);
            assert!(w >= prev);
            prev = w;
            // inbound_for is the exact inverse on the map's own outputs.
            assert!(map.inbound_for(w) >= a);
        }
        assert_eq!(map.inbound_for(map.wan_total), map.total_in);
        assert_eq!(map.wan_prefix(map.total_in), map.wan_total);
    }

    #[test]
    fn hit_pattern_matches_rho_exactly() {
        let map = WanMap::optimizing(6400 * 8192, 0.6, 0.5, 8192);
        let hits = (0..map.n_chunks).filter(|&k| map.chunk_is_hit(k)).count() as u64;
        assert_eq!(hits, map.hit_chunks);
        assert_eq!(map.hit_chunks, 3840);
    }
}
