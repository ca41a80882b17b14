//! Shared helpers for the integration tests.

use std::collections::BTreeSet;

use xorflow::netmodel::{Mode, ProblemInstance};
use xorflow::queues::QueueId;
use xorflow::transfers::{LinkKind, LinkRef, TransferPair};

/// A transfer pair written out as text: link label, origins, destinations.
pub type PairText = (String, BTreeSet<String>, BTreeSet<String>);

fn u(i: usize, c: usize, v: usize) -> String {
    format!("U{i}.{c}.{v}")
}
fn joint(i: usize, c: usize, c2: usize, j: usize) -> String {
    format!("J{i}.{}.{}.{j}", c.min(c2), c.max(c2))
}
fn poison(i: usize, c: usize, c2: usize, j: usize) -> String {
    format!("P{i}.{c}.{c2}.{j}")
}
fn remedy(i: usize, c: usize, c2: usize, j: usize) -> String {
    format!("R{i}.{c}.{c2}.{j}")
}

fn set<const N: usize>(items: [String; N]) -> BTreeSet<String> {
    items.into_iter().collect()
}

/// Every pair the catalogs should contain, enumerated by brute force over
/// all index tuples straight from the operation definitions.
pub fn enumerate_pairs(inst: &ProblemInstance) -> BTreeSet<PairText> {
    let n = inst.nodes.len();
    let k = inst.sessions.len();
    let mut out = BTreeSet::new();
    let ordered: Vec<(usize, usize)> =
        (0..k).flat_map(|c| (0..k).map(move |c2| (c, c2))).filter(|(c, c2)| c != c2).collect();

    // The five point-to-point forms over a hop a -> b, poison reversed.
    let hop = |label: &str, a: usize, b: usize, out: &mut BTreeSet<PairText>| {
        for c in 0..k {
            for v in 0..n {
                out.insert((label.to_string(), set([u(a, c, v)]), set([u(b, c, v)])));
                out.insert((label.to_string(), set([u(a, c, v)]), set([u(b, c, a)])));
            }
        }
        for &(c, c2) in &ordered {
            for j in 0..n {
                out.insert((label.to_string(), set([joint(b, c, c2, j)]), set([joint(a, c, c2, j)])));
                out.insert((label.to_string(), set([poison(b, c, c2, j)]), set([poison(a, c, c2, j)])));
                out.insert((label.to_string(), set([remedy(a, c, c2, j)]), set([remedy(b, c, c2, j)])));
            }
        }
    };

    match inst.mode {
        Mode::Wired => {
            for l in &inst.wired_links {
                hop(&format!("wired {} {}", l.from.0, l.to.0), l.from.0, l.to.0, &mut out);
            }
        }
        Mode::Wireless => {
            for (e, l) in inst.wireless_links.iter().enumerate() {
                let label = format!("wireless {e}");
                let a = l.from.0;
                for b in &l.dsts {
                    hop(&label, a, b.0, &mut out);
                }
                for b in &l.dsts {
                    for b2 in &l.dsts {
                        for &(c, c2) in &ordered {
                            for j in 0..n {
                                for v in 0..n {
                                    out.insert((
                                        label.clone(),
                                        set([u(a, c, v), remedy(a, c2, c, j)]),
                                        set([u(b.0, c, a), remedy(b2.0, c2, c, j)]),
                                    ));
                                }
                                out.insert((
                                    label.clone(),
                                    set([poison(b.0, c, c2, j), poison(b2.0, c2, c, j)]),
                                    set([joint(a, c, c2, j)]),
                                ));
                            }
                        }
                    }
                }
            }
        }
    }

    for (c, s) in inst.sessions.iter().enumerate() {
        out.insert((format!("source {c}"), set([format!("S{c}")]), set([u(s.src.0, c, s.src.0)])));
    }

    for a in 0..n {
        for &(c, c2) in &ordered {
            for v in (0..n).filter(|&v| v != a) {
                for v2 in (0..n).filter(|&v| v != a) {
                    out.insert((
                        format!("coding {a}"),
                        set([u(a, c, v), u(a, c2, v2)]),
                        set([remedy(v2, c, c2, a), remedy(v, c2, c, a)]),
                    ));
                }
            }
            for j in (0..n).filter(|&j| j != a) {
                out.insert((
                    format!("decoding {a}"),
                    set([remedy(a, c, c2, j)]),
                    set([poison(a, c, c2, j), u(a, c, j)]),
                ));
                if inst.mode == Mode::Wired {
                    out.insert((
                        format!("branching {a}"),
                        set([poison(a, c, c2, j), poison(a, c2, c, j)]),
                        set([joint(a, c, c2, j)]),
                    ));
                }
            }
        }
    }
    out
}

pub fn queue_text(q: &QueueId) -> String {
    match *q {
        QueueId::SourceU(c) => format!("S{}", c.0),
        QueueId::Overflow(c) => format!("O{}", c.0),
        QueueId::Uncoded { node, session, prev } => u(node.0, session.0, prev.0),
        QueueId::JointPoison { node, pair, coder } => joint(node.0, pair.0 .0, pair.1 .0, coder.0),
        QueueId::IndivPoison { node, session, other, coder } => poison(node.0, session.0, other.0, coder.0),
        QueueId::Remedy { node, session, other, coder } => remedy(node.0, session.0, other.0, coder.0),
    }
}

pub fn link_text(link: &LinkRef) -> String {
    match link.kind {
        LinkKind::WiredReal { from, to, .. } => format!("wired {} {}", from.0, to.0),
        LinkKind::WirelessReal { index, .. } => format!("wireless {index}"),
        LinkKind::VirtualSource(c) => format!("source {}", c.0),
        LinkKind::VirtualCoding(a) => format!("coding {}", a.0),
        LinkKind::VirtualDecoding(a) => format!("decoding {}", a.0),
        LinkKind::VirtualBranching(a) => format!("branching {}", a.0),
    }
}

pub fn pair_text(links: &[LinkRef], p: &TransferPair) -> PairText {
    (
        link_text(&links[p.link.0]),
        p.origins.iter().map(queue_text).collect(),
        p.destinations.iter().map(queue_text).collect(),
    )
}

pub fn is_coded_text(q: &str) -> bool {
    matches!(q.as_bytes()[0], b'J' | b'P' | b'R')
}
