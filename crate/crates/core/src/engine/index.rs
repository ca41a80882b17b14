//! Incrementally maintained argmax over eligible transfer pairs.
//!
//! Each link keeps its eligible pairs in sorted lists. Coding-link pairs and
//! coded-broadcast pairs are split into one list per session pair; every
//! other pair of a link shares a single list. The lists of a link are ranked
//! by their maximum entry. A change in one subqueue's approximate length
//! only touches the pairs that contain that subqueue.

use std::cmp::Reverse;
use std::collections::{BTreeSet, HashMap};

use ordered_float::OrderedFloat;

use crate::queues::{Ledger, PairSlots, QueueId, SlotId};
use crate::transfers::TransferPair;

type Entry = (Reverse<OrderedFloat<f64>>, u32);

type RankKey = (Reverse<OrderedFloat<f64>>, u32, u32);

#[derive(Debug, Clone)]
struct LinkIndex {
    weight: Vec<f64>,
    eligible: Vec<bool>,
    group: Vec<u32>,
    lists: Vec<BTreeSet<Entry>>,
    group_sizes: Vec<usize>,
    rank: BTreeSet<RankKey>,
    rank_key: Vec<Option<RankKey>>,
}

impl LinkIndex {
    fn refresh_rank(&mut self, g: u32) {
        if let Some(old) = self.rank_key[g as usize].take() {
            self.rank.remove(&old);
        }
        if let Some(&(w, idx)) = self.lists[g as usize].first() {
            let key = (w, idx, g);
            self.rank.insert(key);
            self.rank_key[g as usize] = Some(key);
        }
    }

    fn set(&mut self, i: u32, weight: f64, eligible: bool) {
        let iu = i as usize;
        let g = self.group[iu];
        let was = self.eligible[iu];
        if was == eligible && (!eligible || self.weight[iu].to_bits() == weight.to_bits()) {
            self.weight[iu] = weight;
            return;
        }
        let list = &mut self.lists[g as usize];
        let top_before = list.first().copied();
        if was {
            list.remove(&(Reverse(OrderedFloat(self.weight[iu])), i));
        }
        self.weight[iu] = weight;
        self.eligible[iu] = eligible;
        if eligible {
            list.insert((Reverse(OrderedFloat(weight)), i));
        }
        if list.first().copied() != top_before {
            self.refresh_rank(g);
        }
    }
}

/// Groups coding and coded-broadcast pairs by their session pair.
fn group_key(pair: &TransferPair) -> Option<(usize, usize)> {
    if pair.origins.len() != 2 {
        return None;
    }
    let uncoded = pair.origins.iter().any(|q| matches!(q, QueueId::Uncoded { .. }));
    if !uncoded {
        return None;
    }
    let mut s: Vec<usize> = pair.origins.iter().flat_map(|q| q.sessions()).map(|c| c.0).collect();
    s.sort_unstable();
    Some((s[0], s[1]))
}

#[derive(Debug, Clone)]
pub struct WeightIndex {
    links: Vec<LinkIndex>,
    /// Per slot: the link it belongs to and the pairs of that link using it.
    slot_pairs: Vec<(u32, Vec<u32>)>,
}

impl WeightIndex {
    pub fn new(ledger: &Ledger, catalogs: &[Vec<TransferPair>], compiled: &[Vec<PairSlots>]) -> Self {
        let mut slot_pairs: Vec<(u32, Vec<u32>)> = vec![(u32::MAX, Vec::new()); ledger.slots().len()];
        let mut links = Vec::with_capacity(compiled.len());
        for (e, (cat, pairs)) in catalogs.iter().zip(compiled).enumerate() {
            let mut keys: HashMap<Option<(usize, usize)>, u32> = HashMap::new();
            let group: Vec<u32> = cat
                .iter()
                .map(|p| {
                    let n = keys.len() as u32;
                    *keys.entry(group_key(p)).or_insert(n)
                })
                .collect();
            let ng = keys.len();
            let mut group_sizes = vec![0; ng];
            for &g in &group {
                group_sizes[g as usize] += 1;
            }
            let mut li = LinkIndex {
                weight: vec![0.0; pairs.len()],
                eligible: vec![false; pairs.len()],
                group,
                lists: vec![BTreeSet::new(); ng],
                group_sizes,
                rank: BTreeSet::new(),
                rank_key: vec![None; ng],
            };
            for (i, p) in pairs.iter().enumerate() {
                li.set(i as u32, ledger.pair_weight(p), ledger.is_eligible(p));
                for &s in p.origins.iter().chain(&p.dests) {
                    let entry = &mut slot_pairs[s as usize];
                    entry.0 = e as u32;
                    if entry.1.last() != Some(&(i as u32)) {
                        entry.1.push(i as u32);
                    }
                }
            }
            links.push(li);
        }
        WeightIndex { links, slot_pairs }
    }

    /// Recomputes every pair that involves `slot`.
    pub fn update_slot(&mut self, ledger: &Ledger, compiled: &[Vec<PairSlots>], slot: SlotId) {
        let (e, ref pairs) = self.slot_pairs[slot as usize];
        if e == u32::MAX {
            return;
        }
        let li = &mut self.links[e as usize];
        for &i in pairs {
            let p = &compiled[e as usize][i as usize];
            li.set(i, ledger.pair_weight(p), ledger.is_eligible(p));
        }
    }

    /// Highest-weight eligible pair of a link; ties go to the lowest
    /// catalog position.
    pub fn argmax(&self, link: usize) -> Option<(usize, f64)> {
        self.links[link].rank.first().map(|&(Reverse(w), i, _)| (i as usize, w.0))
    }

    /// Sizes of the sorted lists of a link.
    pub fn group_sizes(&self, link: usize) -> &[usize] {
        &self.links[link].group_sizes
    }
}

/// Reference argmax by linear scan, with the same tie rule as the index.
pub fn naive_argmax(ledger: &Ledger, pairs: &[PairSlots]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in pairs.iter().enumerate() {
        if !ledger.is_eligible(p) {
            continue;
        }
        let w = ledger.pair_weight(p);
        if best.is_none_or(|(_, bw)| w > bw) {
            best = Some((i, w));
        }
    }
    best
}
