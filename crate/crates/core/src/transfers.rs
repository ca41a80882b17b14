//! Real and virtual links and their transfer catalogs.
//!
//! A catalog lists the (origins, destinations) pairs a link can move flow
//! between. Pushing `f` units removes `f` from each origin and adds `f` to
//! each destination. Poison transfers over real links run against the link
//! direction.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use smallvec::SmallVec;

use crate::netmodel::{Mode, NodeId, ProblemInstance, SessionId};
use crate::queues::{Ledger, PairSlots, QueueId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkId(pub usize);

impl fmt::Display for LinkId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LinkKind {
    /// Index into `ProblemInstance::wired_links`.
    WiredReal { index: usize, from: NodeId, to: NodeId },
    /// Index into `ProblemInstance::wireless_links`.
    WirelessReal { index: usize, from: NodeId, dsts: Vec<NodeId> },
    VirtualSource(SessionId),
    VirtualCoding(NodeId),
    VirtualDecoding(NodeId),
    VirtualBranching(NodeId),
}

impl LinkKind {
    pub fn is_real(&self) -> bool {
        matches!(self, LinkKind::WiredReal { .. } | LinkKind::WirelessReal { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkRef {
    pub kind: LinkKind,
    /// Per-round capacity. For wireless real links this is the peak over
    /// rate sets; the per-slice capacity comes from the chosen rate set.
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TransferPair {
    pub link: LinkId,
    /// Sorted, one or two queues.
    pub origins: SmallVec<[QueueId; 2]>,
    /// Sorted, one or two queues.
    pub destinations: SmallVec<[QueueId; 2]>,
}

impl TransferPair {
    fn new(link: LinkId, origins: &[QueueId], destinations: &[QueueId]) -> Self {
        let mut o: SmallVec<[QueueId; 2]> = origins.iter().copied().collect();
        let mut d: SmallVec<[QueueId; 2]> = destinations.iter().copied().collect();
        o.sort();
        d.sort();
        TransferPair { link, origins: o, destinations: d }
    }

    pub fn involves_coded(&self) -> bool {
        self.origins.iter().chain(&self.destinations).any(QueueId::is_coded)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CatalogOptions {
    /// Keep only uncoded transfers; omit coding, decoding and branching links.
    pub routing_only: bool,
}

/// All links of the modified problem in canonical order: real links, then
/// one virtual source link per session, then the per-node virtual links.
pub fn build_links(inst: &ProblemInstance, cbar: f64, opts: CatalogOptions) -> Vec<LinkRef> {
    let mut links = Vec::new();
    match inst.mode {
        Mode::Wired => {
            for (index, l) in inst.wired_links.iter().enumerate() {
                links.push(LinkRef { kind: LinkKind::WiredReal { index, from: l.from, to: l.to }, capacity: l.cap });
            }
        }
        Mode::Wireless => {
            let peak = inst.peak_link_caps();
            for (index, l) in inst.wireless_links.iter().enumerate() {
                links.push(LinkRef {
                    kind: LinkKind::WirelessReal { index, from: l.from, dsts: l.dsts.clone() },
                    capacity: peak[index],
                });
            }
        }
    }
    for c in inst.session_ids() {
        links.push(LinkRef { kind: LinkKind::VirtualSource(c), capacity: cbar });
    }
    if !opts.routing_only && inst.session_count() >= 2 {
        for a in inst.node_ids() {
            links.push(LinkRef { kind: LinkKind::VirtualCoding(a), capacity: cbar / 2.0 });
            links.push(LinkRef { kind: LinkKind::VirtualDecoding(a), capacity: cbar / 2.0 });
            if inst.mode == Mode::Wired {
                links.push(LinkRef { kind: LinkKind::VirtualBranching(a), capacity: cbar / 2.0 });
            }
        }
    }
    links
}

fn ordered_pairs(k: usize) -> impl Iterator<Item = (SessionId, SessionId)> + Clone {
    (0..k).flat_map(move |c| (0..k).filter(move |&d| d != c).map(move |d| (SessionId(c), SessionId(d))))
}

fn unordered_pairs(k: usize) -> impl Iterator<Item = (SessionId, SessionId)> + Clone {
    (0..k).flat_map(move |c| (c + 1..k).map(move |d| (SessionId(c), SessionId(d))))
}

/// The uncoded and poison/remedy forms a point-to-point hop `a -> b` offers.
fn hop_pairs(inst: &ProblemInstance, id: LinkId, a: NodeId, b: NodeId, out: &mut Vec<TransferPair>) {
    let k = inst.session_count();
    for c in inst.session_ids() {
        for v in inst.node_ids() {
            out.push(TransferPair::new(id, &[QueueId::uncoded(a, c, v)], &[QueueId::uncoded(b, c, v)]));
            if v != a {
                out.push(TransferPair::new(id, &[QueueId::uncoded(a, c, v)], &[QueueId::uncoded(b, c, a)]));
            }
        }
    }
    for j in inst.node_ids() {
        for (c, c2) in unordered_pairs(k) {
            out.push(TransferPair::new(id, &[QueueId::joint(b, c, c2, j)], &[QueueId::joint(a, c, c2, j)]));
        }
        for (c, c2) in ordered_pairs(k) {
            out.push(TransferPair::new(id, &[QueueId::indiv(b, c, c2, j)], &[QueueId::indiv(a, c, c2, j)]));
            out.push(TransferPair::new(id, &[QueueId::remedy(a, c, c2, j)], &[QueueId::remedy(b, c, c2, j)]));
        }
    }
}

/// The catalog of one link, sorted and free of duplicates.
pub fn build_catalog(inst: &ProblemInstance, id: LinkId, link: &LinkRef, opts: CatalogOptions) -> Vec<TransferPair> {
    let k = inst.session_count();
    let mut out = Vec::new();
    match &link.kind {
        LinkKind::WiredReal { from, to, .. } => hop_pairs(inst, id, *from, *to, &mut out),
        LinkKind::WirelessReal { from, dsts, .. } => {
            let a = *from;
            for &b in dsts {
                hop_pairs(inst, id, a, b, &mut out);
            }
            for (c, c2) in ordered_pairs(k) {
                for j in inst.node_ids() {
                    for &b in dsts {
                        for &b2 in dsts {
                            for v in inst.node_ids() {
                                out.push(TransferPair::new(
                                    id,
                                    &[QueueId::uncoded(a, c, v), QueueId::remedy(a, c2, c, j)],
                                    &[QueueId::uncoded(b, c, a), QueueId::remedy(b2, c2, c, j)],
                                ));
                            }
                            out.push(TransferPair::new(
                                id,
                                &[QueueId::indiv(b, c, c2, j), QueueId::indiv(b2, c2, c, j)],
                                &[QueueId::joint(a, c, c2, j)],
                            ));
                        }
                    }
                }
            }
        }
        LinkKind::VirtualSource(c) => {
            let s = inst.session(*c).src;
            out.push(TransferPair::new(id, &[QueueId::SourceU(*c)], &[QueueId::uncoded(s, *c, s)]));
        }
        LinkKind::VirtualCoding(a) => {
            let a = *a;
            for (c, c2) in ordered_pairs(k) {
                for v in inst.node_ids().filter(|&v| v != a) {
                    for v2 in inst.node_ids().filter(|&v| v != a) {
                        out.push(TransferPair::new(
                            id,
                            &[QueueId::uncoded(a, c, v), QueueId::uncoded(a, c2, v2)],
                            &[QueueId::remedy(v2, c, c2, a), QueueId::remedy(v, c2, c, a)],
                        ));
                    }
                }
            }
        }
        LinkKind::VirtualDecoding(a) => {
            let a = *a;
            for (c, c2) in ordered_pairs(k) {
                for j in inst.node_ids().filter(|&j| j != a) {
                    out.push(TransferPair::new(
                        id,
                        &[QueueId::remedy(a, c, c2, j)],
                        &[QueueId::indiv(a, c, c2, j), QueueId::uncoded(a, c, j)],
                    ));
                }
            }
        }
        LinkKind::VirtualBranching(a) => {
            let a = *a;
            for (c, c2) in unordered_pairs(k) {
                for j in inst.node_ids().filter(|&j| j != a) {
                    out.push(TransferPair::new(
                        id,
                        &[QueueId::indiv(a, c, c2, j), QueueId::indiv(a, c2, c, j)],
                        &[QueueId::joint(a, c, c2, j)],
                    ));
                }
            }
        }
    }
    if opts.routing_only {
        out.retain(|p| !p.involves_coded());
    }
    out.sort();
    out.dedup();
    out
}

pub fn build_catalogs(inst: &ProblemInstance, links: &[LinkRef], opts: CatalogOptions) -> Vec<Vec<TransferPair>> {
    links.iter().enumerate().map(|(e, l)| build_catalog(inst, LinkId(e), l, opts)).collect()
}

/// Removes pairs with an origin queue that can never hold flow: a queue is
/// live if it is a source queue or a destination of some pair whose origins
/// are all live.
pub fn prune_unreachable(catalogs: &mut [Vec<TransferPair>]) -> usize {
    let mut live: HashSet<QueueId> = HashSet::new();
    for cat in catalogs.iter() {
        for p in cat {
            for q in &p.origins {
                if matches!(q, QueueId::SourceU(_)) {
                    live.insert(*q);
                }
            }
        }
    }
    loop {
        let before = live.len();
        for cat in catalogs.iter() {
            for p in cat {
                if p.origins.iter().all(|q| live.contains(q)) {
                    live.extend(p.destinations.iter().copied());
                }
            }
        }
        if live.len() == before {
            break;
        }
    }
    let mut removed = 0;
    for cat in catalogs.iter_mut() {
        let n = cat.len();
        cat.retain(|p| p.origins.iter().all(|q| live.contains(q)));
        removed += n - cat.len();
    }
    removed
}

/// Pairs of `catalog` currently eligible under the ledger's approximate
/// lengths.
pub fn eligible_pairs<'a>(catalog: &'a [TransferPair], compiled: &[PairSlots], ledger: &Ledger) -> Vec<&'a TransferPair> {
    catalog.iter().zip(compiled).filter(|(_, s)| ledger.is_eligible(s)).map(|(p, _)| p).collect()
}

/// Distinct pairs across all catalogs, as a set.
pub fn catalog_set(catalogs: &[Vec<TransferPair>]) -> BTreeSet<TransferPair> {
    catalogs.iter().flatten().cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::{parse_instance, Session, WiredLink};

    fn two_node_two_session() -> ProblemInstance {
        ProblemInstance::wired(
            vec!["x".into(), "y".into()],
            vec![WiredLink { from: NodeId(0), to: NodeId(1), cap: 1.0 }],
            vec![
                Session { src: NodeId(0), dst: NodeId(1), rate: 1.0 },
                Session { src: NodeId(1), dst: NodeId(0), rate: 1.0 },
            ],
        )
        .unwrap()
    }

    #[test]
    fn virtual_source_has_one_pair() {
        let inst = two_node_two_session();
        let links = build_links(&inst, 1.0, CatalogOptions::default());
        for (e, l) in links.iter().enumerate() {
            if let LinkKind::VirtualSource(_) = l.kind {
                assert_eq!(build_catalog(&inst, LinkId(e), l, CatalogOptions::default()).len(), 1);
            }
        }
    }

    #[test]
    fn branching_pair_count_two_nodes() {
        let inst = two_node_two_session();
        let links = build_links(&inst, 1.0, CatalogOptions::default());
        let (e, l) = links
            .iter()
            .enumerate()
            .find(|(_, l)| l.kind == LinkKind::VirtualBranching(NodeId(0)))
            .unwrap();
        assert_eq!(build_catalog(&inst, LinkId(e), l, CatalogOptions::default()).len(), 1);
    }

    #[test]
    fn wireless_has_no_branching_link() {
        let text = r#"{"mode":"wireless","nodes":["A","B","C"],
            "links":[{"id":"BX","from":"B","dsts":["A","C"]}],
            "rate_sets":[{"BX":1}],
            "sessions":[{"src":"A","dst":"C","rate":0.3},{"src":"C","dst":"A","rate":0.3}]}"#;
        let inst = parse_instance(text).unwrap();
        let links = build_links(&inst, 1.0, CatalogOptions::default());
        assert!(!links.iter().any(|l| matches!(l.kind, LinkKind::VirtualBranching(_))));
        let cat = build_catalog(&inst, LinkId(0), &links[0], CatalogOptions::default());
        let broadcast = cat
            .iter()
            .filter(|p| p.origins.len() == 2 && p.destinations.len() == 2)
            .count();
        // (c, c') ordered: 2, v: 3, j: 3, |Z|^2 = 4
        assert_eq!(broadcast, 2 * 3 * 3 * 4);
    }

    #[test]
    fn routing_only_drops_coded_pairs() {
        let inst = two_node_two_session();
        let opts = CatalogOptions { routing_only: true };
        let links = build_links(&inst, 1.0, opts);
        assert_eq!(links.len(), 3);
        let cats = build_catalogs(&inst, &links, opts);
        assert!(cats.iter().flatten().all(|p| !p.involves_coded()));
    }

    #[test]
    fn catalogs_are_sorted_and_deterministic() {
        let inst = two_node_two_session();
        let links = build_links(&inst, 1.0, CatalogOptions::default());
        let a = build_catalogs(&inst, &links, CatalogOptions::default());
        let b = build_catalogs(&inst, &links, CatalogOptions::default());
        assert_eq!(a, b);
        for cat in &a {
            assert!(cat.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
