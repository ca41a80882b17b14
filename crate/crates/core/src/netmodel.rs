//! Problem instances: nodes, wired links or wireless generalized links with
//! rate sets, and unicast sessions. Also the derived algorithm constants.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub usize);

/// Index of a unicast session in instance order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SessionId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Display for SessionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Wired,
    Wireless,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WiredLink {
    pub from: NodeId,
    pub to: NodeId,
    pub cap: f64,
}

/// A generalized link `(a, Z)`: one transmitter, a set of receivers.
#[derive(Debug, Clone, PartialEq)]
pub struct WirelessLink {
    pub id: String,
    pub from: NodeId,
    pub dsts: Vec<NodeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub src: NodeId,
    pub dst: NodeId,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub mode: Mode,
    pub nodes: Vec<String>,
    pub wired_links: Vec<WiredLink>,
    pub wireless_links: Vec<WirelessLink>,
    /// `rate_sets[u][e]` is the capacity of wireless link `e` in rate set `u`.
    pub rate_sets: Vec<Vec<f64>>,
    pub sessions: Vec<Session>,
}

impl ProblemInstance {
    /// Builds a validated wired instance. Capacities above the largest
    /// demanded rate are capped to it.
    pub fn wired(nodes: Vec<String>, links: Vec<WiredLink>, sessions: Vec<Session>) -> Result<Self> {
        let mut inst = ProblemInstance {
            mode: Mode::Wired,
            nodes,
            wired_links: links,
            wireless_links: Vec::new(),
            rate_sets: Vec::new(),
            sessions,
        };
        inst.validate()?;
        let max_rate = inst.max_rate();
        if max_rate > 0.0 {
            for l in &mut inst.wired_links {
                l.cap = l.cap.min(max_rate);
            }
        }
        Ok(inst)
    }

    pub fn wireless(
        nodes: Vec<String>,
        links: Vec<WirelessLink>,
        rate_sets: Vec<Vec<f64>>,
        sessions: Vec<Session>,
    ) -> Result<Self> {
        let inst = ProblemInstance {
            mode: Mode::Wireless,
            nodes,
            wired_links: Vec::new(),
            wireless_links: links,
            rate_sets,
            sessions,
        };
        inst.validate()?;
        Ok(inst)
    }

    fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        let mut seen = HashSet::new();
        for name in &self.nodes {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateNode(name.clone()));
            }
        }
        let check = |v: NodeId| {
            if v.0 < n {
                Ok(())
            } else {
                Err(Error::DanglingNode(v.to_string()))
            }
        };
        for (c, s) in self.sessions.iter().enumerate() {
            check(s.src)?;
            check(s.dst)?;
            if !(s.rate > 0.0) || !s.rate.is_finite() {
                return Err(Error::NonPositiveRate { session: c, rate: s.rate });
            }
            if s.src == s.dst {
                return Err(Error::DegenerateSession(c));
            }
        }
        match self.mode {
            Mode::Wired => {
                let mut pairs = HashSet::new();
                for l in &self.wired_links {
                    check(l.from)?;
                    check(l.to)?;
                    if l.from == l.to {
                        return Err(Error::InvalidLink(format!("self loop at {}", self.nodes[l.from.0])));
                    }
                    if !(l.cap >= 0.0) {
                        return Err(Error::NegativeCapacity(l.cap));
                    }
                    if !pairs.insert((l.from, l.to)) {
                        return Err(Error::InvalidLink(format!(
                            "duplicate link {} -> {}",
                            self.nodes[l.from.0], self.nodes[l.to.0]
                        )));
                    }
                }
                if !self.rate_sets.is_empty() || !self.wireless_links.is_empty() {
                    return Err(Error::ModeMismatch("wired instance carries wireless data".into()));
                }
            }
            Mode::Wireless => {
                let mut ids = HashSet::new();
                for l in &self.wireless_links {
                    check(l.from)?;
                    if !ids.insert(l.id.as_str()) {
                        return Err(Error::InvalidLink(format!("duplicate link id {}", l.id)));
                    }
                    if l.dsts.is_empty() {
                        return Err(Error::InvalidLink(format!("link {} has no receivers", l.id)));
                    }
                    let mut d = HashSet::new();
                    for &b in &l.dsts {
                        check(b)?;
                        if b == l.from {
                            return Err(Error::InvalidLink(format!("link {} transmits to itself", l.id)));
                        }
                        if !d.insert(b) {
                            return Err(Error::InvalidLink(format!("link {} repeats a receiver", l.id)));
                        }
                    }
                }
                if self.rate_sets.is_empty() {
                    return Err(Error::EmptyRateSets);
                }
                for set in &self.rate_sets {
                    if set.len() != self.wireless_links.len() {
                        return Err(Error::InvalidLink("rate set length mismatch".into()));
                    }
                    for &c in set {
                        if !(c >= 0.0) {
                            return Err(Error::NegativeCapacity(c));
                        }
                    }
                }
                if !self.wired_links.is_empty() {
                    return Err(Error::ModeMismatch("wireless instance carries wired links".into()));
                }
            }
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn session_count(&self) -> usize {
        self.sessions.len()
    }

    pub fn link_count(&self) -> usize {
        match self.mode {
            Mode::Wired => self.wired_links.len(),
            Mode::Wireless => self.wireless_links.len(),
        }
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + Clone {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn session_ids(&self) -> impl Iterator<Item = SessionId> + Clone {
        (0..self.sessions.len()).map(SessionId)
    }

    pub fn session(&self, c: SessionId) -> &Session {
        &self.sessions[c.0]
    }

    pub fn node_name(&self, v: NodeId) -> &str {
        &self.nodes[v.0]
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n == name).map(NodeId)
    }

    pub fn max_rate(&self) -> f64 {
        self.sessions.iter().map(|s| s.rate).fold(0.0, f64::max)
    }

    pub fn min_rate(&self) -> f64 {
        self.sessions.iter().map(|s| s.rate).fold(f64::INFINITY, f64::min)
    }

    /// Per-link capacity used for the node capacity bound: the wired
    /// capacity, or the element-wise maximum over rate sets.
    pub fn peak_link_caps(&self) -> Vec<f64> {
        match self.mode {
            Mode::Wired => self.wired_links.iter().map(|l| l.cap).collect(),
            Mode::Wireless => (0..self.wireless_links.len())
                .map(|e| self.rate_sets.iter().map(|s| s[e]).fold(0.0, f64::max))
                .collect(),
        }
    }

    /// Largest total incoming or outgoing capacity over all nodes.
    pub fn node_capacity_bound(&self) -> f64 {
        let n = self.nodes.len();
        let mut inc = vec![0.0; n];
        let mut out = vec![0.0; n];
        let caps = self.peak_link_caps();
        match self.mode {
            Mode::Wired => {
                for (l, &c) in self.wired_links.iter().zip(&caps) {
                    out[l.from.0] += c;
                    inc[l.to.0] += c;
                }
            }
            Mode::Wireless => {
                for (l, &c) in self.wireless_links.iter().zip(&caps) {
                    out[l.from.0] += c;
                    for b in &l.dsts {
                        inc[b.0] += c;
                    }
                }
            }
        }
        inc.iter().chain(&out).copied().fold(0.0, f64::max)
    }
}

// ---------------------------------------------------------------------------
// File format

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceFile {
    mode: Mode,
    nodes: Vec<String>,
    links: Vec<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rate_sets: Option<Vec<BTreeMap<String, f64>>>,
    sessions: Vec<SessionEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WiredEntry {
    from: String,
    to: String,
    cap: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WirelessEntry {
    id: String,
    from: String,
    dsts: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SessionEntry {
    src: String,
    dst: String,
    rate: f64,
}

/// Parses and validates an instance file. Wired capacities are capped at the
/// largest demanded rate.
pub fn parse_instance(text: &str) -> Result<ProblemInstance> {
    let file: InstanceFile = serde_json::from_str(text)?;
    let index: HashMap<&str, NodeId> =
        file.nodes.iter().enumerate().map(|(i, n)| (n.as_str(), NodeId(i))).collect();
    let lookup = |name: &str| index.get(name).copied().ok_or_else(|| Error::DanglingNode(name.to_string()));
    let sessions = file
        .sessions
        .iter()
        .map(|s| Ok(Session { src: lookup(&s.src)?, dst: lookup(&s.dst)?, rate: s.rate }))
        .collect::<Result<Vec<_>>>()?;
    match file.mode {
        Mode::Wired => {
            if file.rate_sets.is_some() {
                return Err(Error::ModeMismatch("`rate_sets` is only valid for wireless instances".into()));
            }
            let mut links = Vec::with_capacity(file.links.len());
            for raw in file.links {
                let e: WiredEntry = serde_json::from_value(raw)?;
                links.push(WiredLink { from: lookup(&e.from)?, to: lookup(&e.to)?, cap: e.cap });
            }
            ProblemInstance::wired(file.nodes.clone(), links, sessions)
        }
        Mode::Wireless => {
            let mut links = Vec::with_capacity(file.links.len());
            for raw in file.links {
                let e: WirelessEntry = serde_json::from_value(raw)?;
                let dsts = e.dsts.iter().map(|d| lookup(d)).collect::<Result<Vec<_>>>()?;
                links.push(WirelessLink { id: e.id, from: lookup(&e.from)?, dsts });
            }
            let link_index: HashMap<&str, usize> =
                links.iter().enumerate().map(|(i, l)| (l.id.as_str(), i)).collect();
            let mut rate_sets = Vec::new();
            for set in file.rate_sets.unwrap_or_default() {
                let mut caps = vec![0.0; links.len()];
                for (id, cap) in set {
                    let e = *link_index.get(id.as_str()).ok_or(Error::UnknownLink(id))?;
                    caps[e] = cap;
                }
                rate_sets.push(caps);
            }
            ProblemInstance::wireless(file.nodes.clone(), links, rate_sets, sessions)
        }
    }
}

/// Serializes an instance in the file format accepted by [`parse_instance`].
pub fn instance_to_json(inst: &ProblemInstance) -> String {
    let name = |v: NodeId| inst.nodes[v.0].clone();
    let links = match inst.mode {
        Mode::Wired => inst
            .wired_links
            .iter()
            .map(|l| serde_json::to_value(WiredEntry { from: name(l.from), to: name(l.to), cap: l.cap }))
            .collect::<std::result::Result<Vec<_>, _>>(),
        Mode::Wireless => inst
            .wireless_links
            .iter()
            .map(|l| {
                serde_json::to_value(WirelessEntry {
                    id: l.id.clone(),
                    from: name(l.from),
                    dsts: l.dsts.iter().map(|&d| name(d)).collect(),
                })
            })
            .collect(),
    }
    .expect("link entries serialize");
    let rate_sets = (inst.mode == Mode::Wireless).then(|| {
        inst.rate_sets
            .iter()
            .map(|set| {
                inst.wireless_links
                    .iter()
                    .zip(set)
                    .filter(|(_, &c)| c > 0.0)
                    .map(|(l, &c)| (l.id.clone(), c))
                    .collect()
            })
            .collect()
    });
    let file = InstanceFile {
        mode: inst.mode,
        nodes: inst.nodes.clone(),
        links,
        rate_sets,
        sessions: inst
            .sessions
            .iter()
            .map(|s| SessionEntry { src: name(s.src), dst: name(s.dst), rate: s.rate })
            .collect(),
    };
    // Round-trip through `Value` so every object's keys come out sorted.
    let value = serde_json::to_value(&file).expect("instance serializes");
    serde_json::to_string_pretty(&value).expect("instance serializes")
}

// ---------------------------------------------------------------------------
// Derived constants

/// User-tunable inputs to [`derive_constants`]. `None` for `big_l` / `big_f`
/// selects the defaults `N - 1` and `4 (N - 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantParams {
    pub epsilon: f64,
    pub big_l: Option<usize>,
    pub big_f: Option<usize>,
    pub kappa: f64,
}

impl Default for ConstantParams {
    fn default() -> Self {
        ConstantParams { epsilon: 0.1, big_l: None, big_f: None, kappa: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivedConstants {
    pub cbar: f64,
    pub rho: f64,
    pub big_l: usize,
    pub big_f: usize,
    pub epsilon: f64,
    pub kappa: f64,
    pub alpha: Vec<f64>,
    pub b_times_r: Vec<f64>,
    pub packet: Vec<f64>,
    /// Strict upper bound on a destination subqueue's approximate length
    /// for a transfer to stay eligible.
    pub dest_threshold: Vec<f64>,
}

pub fn derive_constants(inst: &ProblemInstance, params: ConstantParams) -> Result<DerivedConstants> {
    let ConstantParams { epsilon, big_l, big_f, kappa } = params;
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(Error::EpsilonOutOfRange(epsilon));
    }
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(Error::InvalidConfig(format!("kappa must lie in (0, 1], got {kappa}")));
    }
    let n = inst.node_count().max(2);
    let big_l = big_l.unwrap_or(n - 1);
    let big_f = big_f.unwrap_or(4 * (n - 1));
    if big_l == 0 || big_f == 0 {
        return Err(Error::InvalidConfig("L and F must be at least 1".into()));
    }
    let k = inst.session_count();
    let rho = if k == 0 { 1.0 } else { inst.max_rate() / inst.min_rate() };
    let log_term = (k.max(1) as f64 * (big_l as f64 + 1.0) * (1.0 + 2.0 * epsilon)
        / (epsilon * (1.0 - 2.0 * epsilon)))
        .ln();
    let mut alpha = Vec::with_capacity(k);
    let mut b_times_r = Vec::with_capacity(k);
    let mut packet = Vec::with_capacity(k);
    let mut dest_threshold = Vec::with_capacity(k);
    for s in &inst.sessions {
        let a = kappa * epsilon / (24.0 * big_f as f64 * s.rate);
        let p = (1.0 + epsilon) * s.rate;
        let br = log_term / a + 3.0 * p;
        alpha.push(a);
        packet.push(p);
        b_times_r.push(br);
        dest_threshold.push(br + ((big_l as f64 + 1.0) * rho).ln() / a + 3.0 * p);
    }
    Ok(DerivedConstants {
        cbar: inst.node_capacity_bound(),
        rho,
        big_l,
        big_f,
        epsilon,
        kappa,
        alpha,
        b_times_r,
        packet,
        dest_threshold,
    })
}
