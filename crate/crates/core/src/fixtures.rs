//! Named instance generators.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::netmodel::{Mode, NodeId, ProblemInstance, Session, WiredLink, WirelessLink};

pub const FIXTURE_NAMES: [&str; 4] = ["two-unicast-poison", "reverse-carpool", "line", "random"];

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

/// Two sessions `s1 -> d1`, `s2 -> d2` sharing the unit link `a -> b`, with
/// side links `s1 -> d2` and `s2 -> d1` carrying the remedies.
pub fn two_unicast_poison(rates: [f64; 2]) -> ProblemInstance {
    let [s1, s2, a, b, d1, d2] = [0, 1, 2, 3, 4, 5].map(NodeId);
    let link = |from, to| WiredLink { from, to, cap: 1.0 };
    ProblemInstance::wired(
        names(&["s1", "s2", "a", "b", "d1", "d2"]),
        vec![link(s1, a), link(s2, a), link(a, b), link(b, d1), link(b, d2), link(s1, d2), link(s2, d1)],
        vec![Session { src: s1, dst: d1, rate: rates[0] }, Session { src: s2, dst: d2, rate: rates[1] }],
    )
    .expect("fixture is valid")
}

/// Wireless relay `A - B - C` with sessions `A -> C` and `C -> A`. Each rate
/// set lets exactly one node transmit at unit rate; `B` broadcasts to both
/// ends.
pub fn reverse_carpool(rate: f64) -> ProblemInstance {
    let [a, b, c] = [0, 1, 2].map(NodeId);
    ProblemInstance::wireless(
        names(&["A", "B", "C"]),
        vec![
            WirelessLink { id: "AB".into(), from: a, dsts: vec![b] },
            WirelessLink { id: "CB".into(), from: c, dsts: vec![b] },
            WirelessLink { id: "BX".into(), from: b, dsts: vec![a, c] },
        ],
        vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
        vec![Session { src: a, dst: c, rate }, Session { src: c, dst: a, rate }],
    )
    .expect("fixture is valid")
}

/// A path `n0 -> n1 -> ...` with one session end to end.
pub fn line(n: usize, cap: f64, rate: f64) -> Result<ProblemInstance> {
    if n < 2 {
        return Err(Error::InvalidConfig("a line needs at least two nodes".into()));
    }
    let links = (0..n - 1).map(|i| WiredLink { from: NodeId(i), to: NodeId(i + 1), cap }).collect();
    ProblemInstance::wired(
        (0..n).map(|i| format!("n{i}")).collect(),
        links,
        vec![Session { src: NodeId(0), dst: NodeId(n - 1), rate }],
    )
}

/// A random connected-ish instance. Wired instances get a random spanning
/// path plus extra links; wireless ones get one or two generalized links per
/// node and one singleton-transmitter rate set per transmitting node plus a
/// random two-transmitter set.
pub fn random(seed: u64, n: usize, k: usize, mode: Mode) -> Result<ProblemInstance> {
    if n < 2 {
        return Err(Error::InvalidConfig("random instances need at least two nodes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    let sessions: Vec<Session> = (0..k)
        .map(|_| {
            let src = rng.random_range(0..n);
            let mut dst = rng.random_range(0..n - 1);
            if dst >= src {
                dst += 1;
            }
            let rate = (rng.random_range(1..=10) as f64) * 0.05;
            Session { src: NodeId(src), dst: NodeId(dst), rate }
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    match mode {
        Mode::Wired => {
            let mut pairs: Vec<(usize, usize)> = order.windows(2).map(|w| (w[0], w[1])).collect();
            for _ in 0..n {
                let a = rng.random_range(0..n);
                let b = rng.random_range(0..n);
                if a != b && !pairs.contains(&(a, b)) {
                    pairs.push((a, b));
                }
            }
            let links = pairs
                .into_iter()
                .map(|(a, b)| WiredLink { from: NodeId(a), to: NodeId(b), cap: rng.random_range(1..=10) as f64 * 0.1 })
                .collect();
            ProblemInstance::wired(nodes, links, sessions)
        }
        Mode::Wireless => {
            let mut links = Vec::new();
            for a in 0..n {
                for _ in 0..rng.random_range(1..=2) {
                    let mut others: Vec<usize> = (0..n).filter(|&b| b != a).collect();
                    others.shuffle(&mut rng);
                    let z = rng.random_range(1..=2.min(others.len()));
                    let dsts: Vec<NodeId> = others[..z].iter().map(|&b| NodeId(b)).collect();
                    if links.iter().any(|l: &WirelessLink| l.from.0 == a && l.dsts == dsts) {
                        continue;
                    }
                    links.push(WirelessLink { id: format!("w{}", links.len()), from: NodeId(a), dsts });
                }
            }
            let mut rate_sets = Vec::new();
            for a in 0..n {
                let set: Vec<f64> =
                    links.iter().map(|l| if l.from.0 == a { rng.random_range(5..=10) as f64 * 0.1 } else { 0.0 }).collect();
                if set.iter().any(|&c| c > 0.0) {
                    rate_sets.push(set);
                }
            }
            let (x, y) = (order[0], order[1]);
            rate_sets.push(links.iter().map(|l| if l.from.0 == x || l.from.0 == y { 0.5 } else { 0.0 }).collect());
            ProblemInstance::wireless(nodes, links, rate_sets, sessions)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureOptions {
    pub rate: Option<f64>,
    pub nodes: usize,
    pub sessions: usize,
    pub cap: f64,
    pub seed: u64,
    pub mode: Mode,
}

impl Default for FixtureOptions {
    fn default() -> Self {
        FixtureOptions { rate: None, nodes: 3, sessions: 2, cap: 1.0, seed: 0, mode: Mode::Wired }
    }
}

pub fn by_name(name: &str, opts: &FixtureOptions) -> Result<ProblemInstance> {
    match name {
        "two-unicast-poison" => {
            let r = opts.rate.unwrap_or(0.8);
            Ok(two_unicast_poison([r, r]))
        }
        "reverse-carpool" => Ok(reverse_carpool(opts.rate.unwrap_or(0.3))),
        "line" => line(opts.nodes, opts.cap, opts.rate.unwrap_or(0.5)),
        "random" => random(opts.seed, opts.nodes, opts.sessions, opts.mode),
        other => Err(Error::UnknownFixture(other.to_string())),
    }
}
