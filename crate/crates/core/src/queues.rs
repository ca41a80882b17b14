//! Queue and subqueue bookkeeping.
//!
//! Every queue other than the overflow queues is split into one subqueue per
//! link for which it is an origin or a destination. A joint poison queue is
//! carried as two twin subqueues per link, one tagged with each of its
//! sessions; both twins always receive identical length updates.

use std::collections::HashMap;
use std::fmt;

use smallvec::SmallVec;

use crate::netmodel::{DerivedConstants, NodeId, ProblemInstance, SessionId};
use crate::transfers::{LinkId, TransferPair};

/// Tolerance used when deciding that a subqueue has moved by a full packet.
pub const PACKET_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QueueId {
    /// `U^c`: the source queue fed from the overflow queue.
    SourceU(SessionId),
    /// `Ū^c`: outside the network; never split into subqueues.
    Overflow(SessionId),
    /// `U_i^{cv}`: uncoded session `c` data at `node`, previously at `prev`.
    Uncoded { node: NodeId, session: SessionId, prev: NodeId },
    /// `P_i^{{c,c'}j}` with `pair.0 < pair.1`.
    JointPoison { node: NodeId, pair: (SessionId, SessionId), coder: NodeId },
    /// `P_i^{cc'j}`: poison meant for the sink of `session`.
    IndivPoison { node: NodeId, session: SessionId, other: SessionId, coder: NodeId },
    /// `R_i^{cc'j}`: remedy for `session` data coded with `other` at `coder`.
    Remedy { node: NodeId, session: SessionId, other: SessionId, coder: NodeId },
}

impl QueueId {
    pub fn uncoded(node: NodeId, session: SessionId, prev: NodeId) -> Self {
        QueueId::Uncoded { node, session, prev }
    }

    pub fn joint(node: NodeId, c: SessionId, c2: SessionId, coder: NodeId) -> Self {
        debug_assert_ne!(c, c2);
        let pair = if c < c2 { (c, c2) } else { (c2, c) };
        QueueId::JointPoison { node, pair, coder }
    }

    pub fn indiv(node: NodeId, session: SessionId, other: SessionId, coder: NodeId) -> Self {
        debug_assert_ne!(session, other);
        QueueId::IndivPoison { node, session, other, coder }
    }

    pub fn remedy(node: NodeId, session: SessionId, other: SessionId, coder: NodeId) -> Self {
        debug_assert_ne!(session, other);
        QueueId::Remedy { node, session, other, coder }
    }

    /// Sessions the queue is associated with; two for a joint poison queue.
    pub fn sessions(&self) -> SmallVec<[SessionId; 2]> {
        match *self {
            QueueId::SourceU(c) | QueueId::Overflow(c) => smallvec::smallvec![c],
            QueueId::Uncoded { session, .. }
            | QueueId::IndivPoison { session, .. }
            | QueueId::Remedy { session, .. } => smallvec::smallvec![session],
            QueueId::JointPoison { pair, .. } => smallvec::smallvec![pair.0, pair.1],
        }
    }

    pub fn node(&self) -> Option<NodeId> {
        match *self {
            QueueId::SourceU(_) | QueueId::Overflow(_) => None,
            QueueId::Uncoded { node, .. }
            | QueueId::JointPoison { node, .. }
            | QueueId::IndivPoison { node, .. }
            | QueueId::Remedy { node, .. } => Some(node),
        }
    }

    pub fn is_coded(&self) -> bool {
        matches!(
            self,
            QueueId::JointPoison { .. } | QueueId::IndivPoison { .. } | QueueId::Remedy { .. }
        )
    }
}

impl fmt::Display for QueueId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            QueueId::SourceU(c) => write!(f, "U^{}", c.0),
            QueueId::Overflow(c) => write!(f, "Ubar^{}", c.0),
            QueueId::Uncoded { node, session, prev } => write!(f, "U_{}^{{{},{}}}", node.0, session.0, prev.0),
            QueueId::JointPoison { node, pair, coder } => {
                write!(f, "P_{}^{{{{{},{}}},{}}}", node.0, pair.0 .0, pair.1 .0, coder.0)
            }
            QueueId::IndivPoison { node, session, other, coder } => {
                write!(f, "P_{}^{{{},{},{}}}", node.0, session.0, other.0, coder.0)
            }
            QueueId::Remedy { node, session, other, coder } => {
                write!(f, "R_{}^{{{},{},{}}}", node.0, session.0, other.0, coder.0)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubqueueKey {
    pub queue: QueueId,
    pub link: LinkId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Origin,
    Destination,
}

pub type SlotId = u32;

#[derive(Debug, Clone, PartialEq)]
pub struct SubqueueState {
    pub key: SubqueueKey,
    /// 0, or 1 for the second twin of a joint poison subqueue.
    pub twin: u8,
    pub session: SessionId,
    pub role: Role,
    pub packet: f64,
    pub len: f64,
    /// Approximate length in packets.
    pub approx_k: i64,
    pub len_at_update: f64,
}

impl SubqueueState {
    pub fn new(key: SubqueueKey, twin: u8, session: SessionId, role: Role, packet: f64) -> Self {
        let mut s = SubqueueState { key, twin, session, role, packet, len: 0.0, approx_k: 0, len_at_update: 0.0 };
        update_approx(&mut s);
        s
    }

    pub fn approx(&self) -> f64 {
        self.approx_k as f64 * self.packet
    }

    pub fn delta(&self) -> f64 {
        self.len - self.len_at_update
    }

    /// `p_Q - |δ_Q|`: how far the true length may still move before the
    /// approximate length must be refreshed.
    pub fn headroom(&self) -> f64 {
        self.packet - self.delta().abs()
    }

    pub fn needs_update(&self) -> bool {
        self.delta().abs() >= self.packet - PACKET_TOL
    }

    /// Checks `l - 3p <= approx <= l` (origin) or `l <= approx <= l + 3p`.
    pub fn bracket_ok(&self, tol: f64) -> bool {
        let a = self.approx();
        let p = self.packet;
        match self.role {
            Role::Origin => a >= -tol && a <= self.len + tol && a >= self.len - 3.0 * p - tol,
            Role::Destination => a >= self.len - tol && a <= self.len + 3.0 * p + tol,
        }
    }
}

/// Refreshes the approximate length from the true length. Origin subqueues
/// round down to `floor(l/p - 1)` packets, destinations up to
/// `ceil(l/p + 1)`. Returns `true` when an origin value had to be clamped at
/// zero.
pub fn update_approx(sq: &mut SubqueueState) -> bool {
    let x = sq.len / sq.packet;
    let mut clamped = false;
    sq.approx_k = match sq.role {
        Role::Origin => {
            let k = (x - 1.0).floor() as i64;
            if k < 0 {
                clamped = true;
                0
            } else {
                k
            }
        }
        Role::Destination => ((x + 1.0).ceil() as i64).max(0),
    };
    sq.len_at_update = sq.len;
    clamped
}

/// `φ'_c(l) = α_c e^{α_c l}`.
pub fn phi_prime(alpha: f64, l: f64) -> f64 {
    alpha * (alpha * l).exp()
}

/// `φ_c(l) = e^{α_c l}`.
pub fn phi(alpha: f64, l: f64) -> f64 {
    (alpha * l).exp()
}

/// Potential of an overflow queue of length `l`: `α_c l e^{α_c B r_c}`.
pub fn overflow_potential(alpha: f64, b_times_r: f64, l: f64) -> f64 {
    alpha * l * (alpha * b_times_r).exp()
}

/// Subqueue slot indices of a transfer pair, twins expanded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSlots {
    pub origins: SmallVec<[SlotId; 4]>,
    pub dests: SmallVec<[SlotId; 4]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SinkKind {
    Uncoded(SessionId),
    Poison,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SessionCounters {
    pub overflow: f64,
    pub injected: f64,
    /// Flow moved across the virtual source link.
    pub entered: f64,
    /// Uncoded data removed at the sink.
    pub delivered: f64,
    /// Poison removed at its coding node, counted per twin session.
    pub poison_removed: f64,
}

#[derive(Debug, Clone)]
struct QueueGroup {
    slots: Vec<SlotId>,
}

#[derive(Debug, Clone)]
pub struct Ledger {
    slots: Vec<SubqueueState>,
    key_index: HashMap<(SubqueueKey, u8), SlotId>,
    groups: Vec<QueueGroup>,
    slot_group: Vec<u32>,
    dirty: Vec<bool>,
    sinks: Vec<(u32, SinkKind)>,
    source_slot: Vec<SlotId>,
    entry_group: Vec<Option<u32>>,
    pub counters: Vec<SessionCounters>,
    /// Cumulative flow pushed per link and catalog position.
    pub pair_flow: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    b_times_r: Vec<f64>,
    threshold: Vec<f64>,
    weight_cache: Vec<Vec<f64>>,
    changed_approx: Vec<SlotId>,
    clamp_events: usize,
}

impl Ledger {
    /// Creates an empty ledger with one subqueue per (queue, link)
    /// occurrence in the catalogs, and compiles each catalog to slot indices.
    pub fn new(
        inst: &ProblemInstance,
        consts: &DerivedConstants,
        catalogs: &[Vec<TransferPair>],
    ) -> (Ledger, Vec<Vec<PairSlots>>) {
        let mut ledger = Ledger {
            slots: Vec::new(),
            key_index: HashMap::new(),
            groups: Vec::new(),
            slot_group: Vec::new(),
            dirty: Vec::new(),
            sinks: Vec::new(),
            source_slot: Vec::new(),
            entry_group: vec![None; inst.session_count()],
            counters: vec![SessionCounters::default(); inst.session_count()],
            pair_flow: catalogs.iter().map(|c| vec![0.0; c.len()]).collect(),
            alpha: consts.alpha.clone(),
            b_times_r: consts.b_times_r.clone(),
            threshold: consts.dest_threshold.clone(),
            weight_cache: Vec::new(),
            changed_approx: Vec::new(),
            clamp_events: 0,
        };
        let mut group_index: HashMap<(QueueId, u8), u32> = HashMap::new();
        let mut compiled = Vec::with_capacity(catalogs.len());
        for cat in catalogs {
            let mut out = Vec::with_capacity(cat.len());
            for pair in cat {
                let mut slots = PairSlots { origins: SmallVec::new(), dests: SmallVec::new() };
                for (queues, role) in [(&pair.origins, Role::Origin), (&pair.destinations, Role::Destination)] {
                    for &q in queues {
                        for (twin, c) in q.sessions().into_iter().enumerate() {
                            let key = SubqueueKey { queue: q, link: pair.link };
                            let twin = twin as u8;
                            let id = match ledger.key_index.get(&(key, twin)) {
                                Some(&id) => {
                                    debug_assert_eq!(ledger.slots[id as usize].role, role);
                                    id
                                }
                                None => {
                                    let id = ledger.slots.len() as SlotId;
                                    ledger.slots.push(SubqueueState::new(key, twin, c, role, consts.packet[c.0]));
                                    ledger.key_index.insert((key, twin), id);
                                    let g = *group_index.entry((q, twin)).or_insert_with(|| {
                                        ledger.groups.push(QueueGroup { slots: Vec::new() });
                                        (ledger.groups.len() - 1) as u32
                                    });
                                    ledger.groups[g as usize].slots.push(id);
                                    ledger.slot_group.push(g);
                                    ledger.dirty.push(false);
                                    id
                                }
                            };
                            match role {
                                Role::Origin => slots.origins.push(id),
                                Role::Destination => slots.dests.push(id),
                            }
                        }
                    }
                }
                out.push(slots);
            }
            compiled.push(out);
        }

        for (c, s) in inst.sessions.iter().enumerate() {
            let c = SessionId(c);
            let src = ledger
                .slots
                .iter()
                .position(|s| s.key.queue == QueueId::SourceU(c))
                .expect("every session has a virtual source link");
            ledger.source_slot.push(src as SlotId);
            ledger.entry_group[c.0] = group_index.get(&(QueueId::uncoded(s.src, c, s.src), 0)).copied();
        }
        let mut sinks: Vec<(u32, SinkKind)> = group_index
            .iter()
            .filter_map(|(&(q, _), &g)| {
                let kind = match q {
                    QueueId::Uncoded { node, session, .. } if inst.session(session).dst == node => {
                        SinkKind::Uncoded(session)
                    }
                    QueueId::IndivPoison { node, coder, .. } if node == coder => SinkKind::Poison,
                    QueueId::JointPoison { node, coder, .. } if node == coder => SinkKind::Poison,
                    _ => return None,
                };
                Some((g, kind))
            })
            .collect();
        sinks.sort_by_key(|&(g, _)| g);
        ledger.sinks = sinks;

        let max_k: Vec<usize> = (0..inst.session_count())
            .map(|c| {
                let cap = consts.dest_threshold[c].max(consts.b_times_r[c]);
                (cap / consts.packet[c]).ceil() as usize + 8
            })
            .collect();
        ledger.weight_cache = (0..inst.session_count())
            .map(|c| (0..max_k[c]).map(|k| phi_prime(consts.alpha[c], k as f64 * consts.packet[c])).collect())
            .collect();
        (ledger, compiled)
    }

    pub fn slots(&self) -> &[SubqueueState] {
        &self.slots
    }

    pub fn slot(&self, id: SlotId) -> &SubqueueState {
        &self.slots[id as usize]
    }

    pub fn slot_id(&self, key: SubqueueKey, twin: u8) -> Option<SlotId> {
        self.key_index.get(&(key, twin)).copied()
    }

    pub fn len_of(&self, key: SubqueueKey) -> Option<f64> {
        self.slot_id(key, 0).map(|id| self.slots[id as usize].len)
    }

    pub fn alpha(&self, c: SessionId) -> f64 {
        self.alpha[c.0]
    }

    pub fn source_len(&self, c: SessionId) -> f64 {
        self.slots[self.source_slot[c.0] as usize].len
    }

    pub fn source_slot(&self, c: SessionId) -> SlotId {
        self.source_slot[c.0]
    }

    /// Total length of `U_{s_c}^{c s_c}` over its subqueues.
    pub fn entry_queue_len(&self, c: SessionId) -> f64 {
        self.entry_group[c.0]
            .map(|g| self.groups[g as usize].slots.iter().map(|&s| self.slots[s as usize].len).sum())
            .unwrap_or(0.0)
    }

    /// `φ'` evaluated at the slot's approximate length.
    #[inline]
    pub fn weight_term(&self, id: SlotId) -> f64 {
        let s = &self.slots[id as usize];
        let c = s.session.0;
        match self.weight_cache[c].get(s.approx_k as usize) {
            Some(&w) => w,
            None => phi_prime(self.alpha[c], s.approx_k as f64 * s.packet),
        }
    }

    /// Origin terms minus destination terms at approximate lengths.
    pub fn pair_weight(&self, pair: &PairSlots) -> f64 {
        let mut plus = 0.0;
        for &o in &pair.origins {
            plus += self.weight_term(o);
        }
        let mut minus = 0.0;
        for &d in &pair.dests {
            minus += self.weight_term(d);
        }
        plus - minus
    }

    /// Membership in the eligible subset: every origin has a positive
    /// approximate length and every destination is strictly below its
    /// session threshold.
    pub fn is_eligible(&self, pair: &PairSlots) -> bool {
        pair.origins.iter().all(|&o| self.slots[o as usize].approx_k > 0)
            && pair.dests.iter().all(|&d| {
                let s = &self.slots[d as usize];
                s.approx() < self.threshold[s.session.0]
            })
    }

    /// `min_Q (p_Q - |δ_Q|)` over all slots touched by the pair.
    pub fn pair_headroom(&self, pair: &PairSlots) -> f64 {
        pair.origins
            .iter()
            .chain(&pair.dests)
            .map(|&s| self.slots[s as usize].headroom())
            .fold(f64::INFINITY, f64::min)
    }

    fn set_len(&mut self, id: SlotId, len: f64) {
        self.slots[id as usize].len = len;
        self.dirty[id as usize] = true;
    }

    fn refresh(&mut self, id: SlotId) {
        let s = &mut self.slots[id as usize];
        let before = s.approx_k;
        if update_approx(s) {
            self.clamp_events += 1;
        }
        if s.approx_k != before {
            self.changed_approx.push(id);
        }
    }

    fn refresh_if_due(&mut self, id: SlotId) {
        if self.slots[id as usize].needs_update() {
            self.refresh(id);
        }
    }

    /// Moves `f` units out of every origin slot and into every destination
    /// slot of a pair, then refreshes any slot that has moved a full packet.
    pub fn push(&mut self, link: LinkId, pair_index: usize, pair: &PairSlots, f: f64) {
        for &o in &pair.origins {
            let l = self.slots[o as usize].len - f;
            self.set_len(o, l);
        }
        for &d in &pair.dests {
            let l = self.slots[d as usize].len + f;
            self.set_len(d, l);
        }
        self.pair_flow[link.0][pair_index] += f;
        for &s in pair.origins.iter().chain(&pair.dests) {
            self.refresh_if_due(s);
        }
    }

    /// Adds `(1+ε) r_c` to each overflow queue and moves as much as fits
    /// under the `B r_c` cap into the source queue.
    pub fn inject(&mut self, rates: &[f64], epsilon: f64) {
        for (c, &rate) in rates.iter().enumerate().take(self.counters.len()) {
            let add = (1.0 + epsilon) * rate;
            let ctr = &mut self.counters[c];
            ctr.overflow += add;
            ctr.injected += add;
            let slot = self.source_slot[c];
            let room = (self.b_times_r[c] - self.slots[slot as usize].len).max(0.0);
            let moved = room.min(self.counters[c].overflow);
            if moved > 0.0 {
                self.counters[c].overflow -= moved;
                let l = self.slots[slot as usize].len + moved;
                self.set_len(slot, l);
                self.refresh_if_due(slot);
            }
        }
    }

    /// Places a subqueue at `len`. With `refresh` the approximate length is
    /// recomputed from it; otherwise only a due refresh happens, as after a
    /// push.
    pub fn set_length(&mut self, id: SlotId, len: f64, refresh: bool) {
        self.set_len(id, len);
        if refresh {
            self.refresh(id);
        } else {
            self.refresh_if_due(id);
        }
    }

    pub fn record_entry(&mut self, c: SessionId, f: f64) {
        self.counters[c.0].entered += f;
    }

    /// Slots whose approximate length changed since the last call.
    pub fn take_changed(&mut self) -> Vec<SlotId> {
        std::mem::take(&mut self.changed_approx)
    }

    pub fn clamp_events(&self) -> usize {
        self.clamp_events
    }

    /// Total potential: subqueue potentials at true lengths plus overflow
    /// potentials.
    pub fn total_potential(&self) -> f64 {
        let subqueues: f64 = self.slots.iter().map(|s| phi(self.alpha[s.session.0], s.len)).sum();
        let overflow: f64 = self
            .counters
            .iter()
            .enumerate()
            .map(|(c, ctr)| overflow_potential(self.alpha[c], self.b_times_r[c], ctr.overflow))
            .sum();
        subqueues + overflow
    }

    /// Flow held in network subqueues, excluding source and overflow queues.
    /// A joint poison queue counts once.
    pub fn remaining(&self) -> f64 {
        self.slots
            .iter()
            .filter(|s| s.twin == 0 && !matches!(s.key.queue, QueueId::SourceU(_)))
            .map(|s| s.len)
            .sum()
    }

    pub fn overflow(&self, c: SessionId) -> f64 {
        self.counters[c.0].overflow
    }

    pub fn min_len(&self) -> f64 {
        self.slots.iter().map(|s| s.len).fold(f64::INFINITY, f64::min)
    }

    /// Violated slots of the approximate-length bracket invariant.
    pub fn bracket_violations(&self, tol: f64) -> Vec<SubqueueKey> {
        self.slots.iter().filter(|s| !s.bracket_ok(tol)).map(|s| s.key).collect()
    }

    /// Joint poison subqueues whose twins disagree.
    pub fn twin_lock_violations(&self, tol: f64) -> Vec<SubqueueKey> {
        self.slots
            .iter()
            .filter(|s| s.twin == 1)
            .filter_map(|s| {
                let first = self.key_index[&(s.key, 0)];
                ((self.slots[first as usize].len - s.len).abs() > tol).then_some(s.key)
            })
            .collect()
    }
}

/// Empties every sink subqueue: uncoded data at its session's sink and
/// poison at its coding node. Returns uncoded amounts removed per session.
pub fn remove_at_sinks(ledger: &mut Ledger) -> Vec<f64> {
    let mut removed = vec![0.0; ledger.counters.len()];
    let sinks = std::mem::take(&mut ledger.sinks);
    for &(g, kind) in &sinks {
        let slots = std::mem::take(&mut ledger.groups[g as usize].slots);
        for &s in &slots {
            let l = ledger.slots[s as usize].len;
            if l == 0.0 {
                continue;
            }
            match kind {
                SinkKind::Uncoded(c) => {
                    removed[c.0] += l;
                    ledger.counters[c.0].delivered += l;
                }
                SinkKind::Poison => {
                    let c = ledger.slots[s as usize].session;
                    ledger.counters[c.0].poison_removed += l;
                }
            }
            ledger.set_len(s, 0.0);
            ledger.refresh_if_due(s);
        }
        ledger.groups[g as usize].slots = slots;
    }
    ledger.sinks = sinks;
    removed
}

/// Equalizes the subqueues of every queue that saw any change this round,
/// then refreshes any approximate length that is a packet or more stale.
pub fn rebalance(ledger: &mut Ledger) {
    for g in 0..ledger.groups.len() {
        let slots = std::mem::take(&mut ledger.groups[g].slots);
        if slots.iter().any(|&s| ledger.dirty[s as usize]) {
            if slots.len() > 1 {
                let total: f64 = slots.iter().map(|&s| ledger.slots[s as usize].len).sum();
                let mean = total / slots.len() as f64;
                for &s in &slots {
                    ledger.slots[s as usize].len = mean;
                }
            }
            for &s in &slots {
                ledger.dirty[s as usize] = false;
                ledger.refresh_if_due(s);
            }
        }
        ledger.groups[g].slots = slots;
    }
}
