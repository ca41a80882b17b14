//! Solution variables of the original problem and their verification.
//!
//! Flows pushed in the modified problem are averaged over the rounds and
//! mapped back to the original variable families. Poison moves against the
//! link direction in the modified problem, so it is flipped back on export.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::netmodel::{Mode, NodeId, ProblemInstance, SessionId};
use crate::queues::QueueId;
use crate::transfers::{LinkKind, LinkRef, TransferPair};

/// `(a, b, c, v)`.
pub type NuKey = (NodeId, NodeId, SessionId, NodeId);
/// `(a, b, {c, c'}, j)` with `c < c'`.
pub type JointKey = (NodeId, NodeId, (SessionId, SessionId), NodeId);
/// `(a, b, c, c', j)`.
pub type PairLinkKey = (NodeId, NodeId, SessionId, SessionId, NodeId);
/// `(a, (c, v), (c', v'))` with `c < c'`.
pub type GammaKey = (NodeId, (SessionId, NodeId), (SessionId, NodeId));
/// `(a, {c, c'}, j)` with `c < c'`.
pub type SigmaKey = (NodeId, (SessionId, SessionId), NodeId);
/// `(a, c, c', j)`.
pub type EtaKey = (NodeId, SessionId, SessionId, NodeId);

#[derive(Debug, Clone, PartialEq)]
pub struct LinkUsage {
    /// Index into the instance's wireless links.
    pub link: usize,
    pub usage: f64,
    pub capacity: f64,
}

/// Average per-round flows in original orientation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolutionVariables {
    /// `ν_{ab}^{cv}`: `U_a^{cv} -> U_b^{cv}`.
    pub nu: BTreeMap<NuKey, f64>,
    /// `ν_{ab}^{cva}`: `U_a^{cv} -> U_b^{ca}`, keyed by the old tag `v`.
    pub nu_retag: BTreeMap<NuKey, f64>,
    pub pi_joint: BTreeMap<JointKey, f64>,
    pub pi_indiv: BTreeMap<PairLinkKey, f64>,
    pub rho: BTreeMap<PairLinkKey, f64>,
    pub gamma: BTreeMap<GammaKey, f64>,
    pub sigma: BTreeMap<SigmaKey, f64>,
    pub eta: BTreeMap<EtaKey, f64>,
    pub rates: Vec<f64>,
    /// Wireless only: transmissions per generalized link.
    pub link_usage: Vec<LinkUsage>,
    /// Wireless only: average time share of each rate set.
    pub lambda: Vec<f64>,
}

fn canon(c: SessionId, c2: SessionId) -> (SessionId, SessionId) {
    if c < c2 {
        (c, c2)
    } else {
        (c2, c)
    }
}

fn add<K: Ord>(map: &mut BTreeMap<K, f64>, key: K, f: f64) {
    *map.entry(key).or_insert(0.0) += f;
}

impl SolutionVariables {
    /// Maps a single-origin, single-destination hop between `a` and `b`.
    fn add_hop(&mut self, a: NodeId, b: NodeId, origin: QueueId, dest: QueueId, f: f64) -> Result<()> {
        match (origin, dest) {
            (QueueId::Uncoded { session: c, prev: v, .. }, QueueId::Uncoded { prev: w, .. }) => {
                if v == w {
                    add(&mut self.nu, (a, b, c, v), f);
                } else {
                    add(&mut self.nu_retag, (a, b, c, v), f);
                }
            }
            (QueueId::JointPoison { pair, coder, .. }, QueueId::JointPoison { .. }) => {
                add(&mut self.pi_joint, (a, b, pair, coder), f)
            }
            (QueueId::IndivPoison { session, other, coder, .. }, QueueId::IndivPoison { .. }) => {
                add(&mut self.pi_indiv, (a, b, session, other, coder), f)
            }
            (QueueId::Remedy { session, other, coder, .. }, QueueId::Remedy { .. }) => {
                add(&mut self.rho, (a, b, session, other, coder), f)
            }
            _ => return Err(Error::InvariantBreach(format!("unmapped hop {origin} -> {dest}"))),
        }
        Ok(())
    }

    fn hop_from_pair(&mut self, a: NodeId, pair: &TransferPair, f: f64) -> Result<()> {
        let (o, d) = (pair.origins[0], pair.destinations[0]);
        // Poison crosses the link backwards, so the far end is the origin.
        let b = if matches!(o, QueueId::JointPoison { .. } | QueueId::IndivPoison { .. }) { o.node() } else { d.node() };
        self.add_hop(a, b.expect("hop queues live at nodes"), o, d, f)
    }

    fn add_pair(&mut self, link: &LinkRef, pair: &TransferPair, f: f64) -> Result<()> {
        match &link.kind {
            LinkKind::VirtualSource(_) => {}
            LinkKind::WiredReal { from, .. } => self.hop_from_pair(*from, pair, f)?,
            LinkKind::WirelessReal { from, .. } => {
                let a = *from;
                match (pair.origins.len(), pair.destinations.len()) {
                    (1, 1) => self.hop_from_pair(a, pair, f)?,
                    (2, 2) => {
                        let (u, r) = (pair.origins[0], pair.origins[1]);
                        let (ud, rd) = (pair.destinations[0], pair.destinations[1]);
                        self.add_hop(a, ud.node().unwrap(), u, ud, f)?;
                        self.add_hop(a, rd.node().unwrap(), r, rd, f)?;
                    }
                    (2, 1) => {
                        let QueueId::JointPoison { pair: cc, coder, .. } = pair.destinations[0] else {
                            return Err(Error::InvariantBreach("malformed wireless branching pair".into()));
                        };
                        add(&mut self.sigma, (a, cc, coder), f);
                        for o in &pair.origins {
                            if let QueueId::IndivPoison { node, session, other, coder } = *o {
                                add(&mut self.pi_indiv, (a, node, session, other, coder), f);
                            }
                        }
                    }
                    _ => return Err(Error::InvariantBreach("malformed wireless pair".into())),
                }
            }
            LinkKind::VirtualCoding(a) => {
                let (QueueId::Uncoded { session: c, prev: v, .. }, QueueId::Uncoded { session: c2, prev: v2, .. }) =
                    (pair.origins[0], pair.origins[1])
                else {
                    return Err(Error::InvariantBreach("malformed coding pair".into()));
                };
                let key = if c < c2 { (*a, (c, v), (c2, v2)) } else { (*a, (c2, v2), (c, v)) };
                add(&mut self.gamma, key, f);
            }
            LinkKind::VirtualDecoding(a) => {
                let QueueId::Remedy { session, other, coder, .. } = pair.origins[0] else {
                    return Err(Error::InvariantBreach("malformed decoding pair".into()));
                };
                add(&mut self.eta, (*a, session, other, coder), f);
            }
            LinkKind::VirtualBranching(a) => {
                let QueueId::JointPoison { pair: cc, coder, .. } = pair.destinations[0] else {
                    return Err(Error::InvariantBreach("malformed branching pair".into()));
                };
                add(&mut self.sigma, (*a, cc, coder), f);
            }
        }
        Ok(())
    }

    /// All values, in the order of the families above.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.nu
            .values()
            .chain(self.nu_retag.values())
            .chain(self.pi_joint.values())
            .chain(self.pi_indiv.values())
            .chain(self.rho.values())
            .chain(self.gamma.values())
            .chain(self.sigma.values())
            .chain(self.eta.values())
            .copied()
    }

    pub fn variable_count(&self) -> usize {
        self.values().count()
    }
}

/// Averages cumulative per-pair flow over `rounds` and maps it to the
/// original variables. Individual poison removed at its coding node is
/// attributed to a branching operation there.
pub fn average_flows(
    inst: &ProblemInstance,
    links: &[LinkRef],
    catalogs: &[Vec<TransferPair>],
    pair_flow: &[Vec<f64>],
    rounds: usize,
    lambda_total: &[f64],
    rates: &[f64],
) -> Result<SolutionVariables> {
    if rounds == 0 {
        return Err(Error::ZeroRounds);
    }
    let t = rounds as f64;
    let mut sol = SolutionVariables { rates: rates.to_vec(), ..Default::default() };
    let mut usage = vec![0.0; inst.wireless_links.len()];
    for ((link, cat), flows) in links.iter().zip(catalogs).zip(pair_flow) {
        for (pair, &total) in cat.iter().zip(flows) {
            if total == 0.0 {
                continue;
            }
            let f = total / t;
            sol.add_pair(link, pair, f)?;
            if let LinkKind::WirelessReal { index, .. } = link.kind {
                usage[index] += f;
            }
        }
    }

    let nets = constraint_sums(inst, &sol, &vec![0.0; inst.session_count()]);
    let mut branch: BTreeMap<SigmaKey, f64> = BTreeMap::new();
    for (key, v) in &nets {
        if let ConstraintKey::Indiv { node, session, other, coder } = *key {
            if node == coder {
                add(&mut branch, (node, canon(session, other), coder), v / 2.0);
            }
        }
    }
    for (key, v) in branch {
        if v > 0.0 {
            add(&mut sol.sigma, key, v);
        }
    }

    if inst.mode == Mode::Wireless {
        sol.lambda = lambda_total.iter().map(|l| l / t).collect();
        sol.link_usage = usage
            .iter()
            .enumerate()
            .map(|(e, &u)| LinkUsage { link: e, usage: u, capacity: wireless_capacity(inst, &sol.lambda, e) })
            .collect();
    }
    Ok(sol)
}

fn wireless_capacity(inst: &ProblemInstance, lambda: &[f64], e: usize) -> f64 {
    inst.rate_sets.iter().zip(lambda).map(|(caps, l)| l * caps[e]).sum()
}

/// One conservation equality, keyed by node and index tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConstraintKey {
    Uncoded { node: NodeId, session: SessionId, prev: NodeId },
    Joint { node: NodeId, pair: (SessionId, SessionId), coder: NodeId },
    Indiv { node: NodeId, session: SessionId, other: SessionId, coder: NodeId },
    Remedy { node: NodeId, session: SessionId, other: SessionId, coder: NodeId },
}

impl ConstraintKey {
    pub fn node(&self) -> NodeId {
        match *self {
            ConstraintKey::Uncoded { node, .. }
            | ConstraintKey::Joint { node, .. }
            | ConstraintKey::Indiv { node, .. }
            | ConstraintKey::Remedy { node, .. } => node,
        }
    }

    fn family(&self) -> &'static str {
        match self {
            ConstraintKey::Uncoded { .. } => "uncoded",
            ConstraintKey::Joint { .. } => "joint_poison",
            ConstraintKey::Indiv { .. } => "indiv_poison",
            ConstraintKey::Remedy { .. } => "remedy",
        }
    }
}

/// Outflow-plus-consumption minus inflow-plus-production for every
/// constraint a variable touches. Uncoded constraints at a session's sink
/// are not part of the system and are dropped.
fn constraint_sums(inst: &ProblemInstance, sol: &SolutionVariables, rates: &[f64]) -> BTreeMap<ConstraintKey, f64> {
    let mut m: BTreeMap<ConstraintKey, f64> = BTreeMap::new();
    let u = |node, session, prev| ConstraintKey::Uncoded { node, session, prev };
    let ind = |node, session, other, coder| ConstraintKey::Indiv { node, session, other, coder };
    let rem = |node, session, other, coder| ConstraintKey::Remedy { node, session, other, coder };
    for (&(a, b, c, v), &f) in &sol.nu {
        add(&mut m, u(a, c, v), f);
        add(&mut m, u(b, c, v), -f);
    }
    for (&(a, b, c, v), &f) in &sol.nu_retag {
        add(&mut m, u(a, c, v), f);
        add(&mut m, u(b, c, a), -f);
    }
    for (&(a, b, pair, j), &f) in &sol.pi_joint {
        add(&mut m, ConstraintKey::Joint { node: a, pair, coder: j }, f);
        add(&mut m, ConstraintKey::Joint { node: b, pair, coder: j }, -f);
    }
    for (&(a, b, c, c2, j), &f) in &sol.pi_indiv {
        add(&mut m, ind(a, c, c2, j), f);
        add(&mut m, ind(b, c, c2, j), -f);
    }
    for (&(a, b, c, c2, j), &f) in &sol.rho {
        add(&mut m, rem(a, c, c2, j), f);
        add(&mut m, rem(b, c, c2, j), -f);
    }
    for (&(a, (c, v), (c2, v2)), &f) in &sol.gamma {
        add(&mut m, u(a, c, v), f);
        add(&mut m, u(a, c2, v2), f);
        add(&mut m, ConstraintKey::Joint { node: a, pair: canon(c, c2), coder: a }, -f);
        add(&mut m, rem(v2, c, c2, a), -f);
        add(&mut m, rem(v, c2, c, a), -f);
    }
    for (&(a, c, c2, j), &f) in &sol.eta {
        add(&mut m, u(a, c, j), -f);
        add(&mut m, ind(a, c, c2, j), f);
        add(&mut m, rem(a, c, c2, j), f);
    }
    for (&(a, (c, c2), j), &f) in &sol.sigma {
        add(&mut m, ConstraintKey::Joint { node: a, pair: (c, c2), coder: j }, f);
        add(&mut m, ind(a, c, c2, j), -f);
        add(&mut m, ind(a, c2, c, j), -f);
    }
    for (c, s) in inst.sessions.iter().enumerate() {
        let r = rates.get(c).copied().unwrap_or(0.0);
        add(&mut m, u(s.src, SessionId(c), s.src), -r);
    }
    m.retain(|k, _| match *k {
        ConstraintKey::Uncoded { node, session, .. } => inst.session(session).dst != node,
        _ => true,
    });
    m
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub key: ConstraintKey,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacitySlack {
    /// Wired link index or wireless link index, per the instance mode.
    pub link: usize,
    pub used: f64,
    pub capacity: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub residuals: Vec<Residual>,
    pub capacity: Vec<CapacitySlack>,
    pub negative: Vec<String>,
    /// Excess of `Σ_u λ_u` over 1 (wireless).
    pub time_share_excess: f64,
    pub max_residual: f64,
    pub min_slack: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl VerificationReport {
    /// The constraint with the largest absolute residual.
    pub fn worst(&self) -> Option<&Residual> {
        self.residuals.iter().max_by(|a, b| a.value.abs().total_cmp(&b.value.abs()))
    }
}

/// `ε · min_c r_c`.
pub fn default_tolerance(inst: &ProblemInstance, epsilon: f64) -> f64 {
    if inst.session_count() == 0 {
        epsilon
    } else {
        epsilon * inst.min_rate()
    }
}

fn is_link(inst: &ProblemInstance, a: NodeId, b: NodeId) -> bool {
    match inst.mode {
        Mode::Wired => inst.wired_links.iter().any(|l| l.from == a && l.to == b),
        Mode::Wireless => inst.wireless_links.iter().any(|l| l.from == a && l.dsts.contains(&b)),
    }
}

fn check_indices(inst: &ProblemInstance, sol: &SolutionVariables) -> Result<()> {
    let n = inst.node_count();
    let k = inst.session_count();
    let node = |v: NodeId| if v.0 < n { Ok(()) } else { Err(Error::UnknownIndex(format!("node {}", v.0))) };
    let sess = |c: SessionId| if c.0 < k { Ok(()) } else { Err(Error::UnknownIndex(format!("session {}", c.0))) };
    let pair = |c: SessionId, c2: SessionId| {
        sess(c)?;
        sess(c2)?;
        if c == c2 {
            return Err(Error::UnknownIndex(format!("session pair ({}, {})", c.0, c2.0)));
        }
        Ok(())
    };
    let link = |a: NodeId, b: NodeId| {
        node(a)?;
        node(b)?;
        if !is_link(inst, a, b) {
            return Err(Error::UnknownIndex(format!("link {} -> {}", inst.node_name(a), inst.node_name(b))));
        }
        Ok(())
    };
    let ordered = |p: (SessionId, SessionId)| {
        if p.0 < p.1 {
            Ok(())
        } else {
            Err(Error::UnknownIndex(format!("unordered session pair ({}, {})", p.0 .0, p.1 .0)))
        }
    };
    for &(a, b, c, v) in sol.nu.keys().chain(sol.nu_retag.keys()) {
        link(a, b)?;
        sess(c)?;
        node(v)?;
    }
    for &(a, b, p, j) in sol.pi_joint.keys() {
        link(a, b)?;
        pair(p.0, p.1)?;
        ordered(p)?;
        node(j)?;
    }
    for &(a, b, c, c2, j) in sol.pi_indiv.keys().chain(sol.rho.keys()) {
        link(a, b)?;
        pair(c, c2)?;
        node(j)?;
    }
    for &(a, (c, v), (c2, v2)) in sol.gamma.keys() {
        node(a)?;
        pair(c, c2)?;
        ordered((c, c2))?;
        node(v)?;
        node(v2)?;
    }
    for &(a, p, j) in sol.sigma.keys() {
        node(a)?;
        pair(p.0, p.1)?;
        ordered(p)?;
        node(j)?;
    }
    for &(a, c, c2, j) in sol.eta.keys() {
        node(a)?;
        pair(c, c2)?;
        node(j)?;
    }
    if sol.rates.len() > k {
        return Err(Error::UnknownIndex(format!("rate for session {}", sol.rates.len() - 1)));
    }
    for lu in &sol.link_usage {
        if inst.mode != Mode::Wireless || lu.link >= inst.wireless_links.len() {
            return Err(Error::UnknownIndex(format!("link usage entry {}", lu.link)));
        }
    }
    if sol.lambda.len() > inst.rate_sets.len() {
        return Err(Error::UnknownIndex(format!("rate set {}", sol.lambda.len() - 1)));
    }
    Ok(())
}

/// Evaluates every conservation equality and capacity inequality.
pub fn verify(inst: &ProblemInstance, sol: &SolutionVariables, rates: &[f64], tol: f64) -> Result<VerificationReport> {
    check_indices(inst, sol)?;
    let residuals: Vec<Residual> =
        constraint_sums(inst, sol, rates).into_iter().map(|(key, value)| Residual { key, value }).collect();

    let mut capacity = Vec::new();
    let mut time_share_excess = 0.0;
    match inst.mode {
        Mode::Wired => {
            let mut used = vec![0.0; inst.wired_links.len()];
            let mut on = |a: NodeId, b: NodeId, f: f64| {
                if let Some(e) = inst.wired_links.iter().position(|l| l.from == a && l.to == b) {
                    used[e] += f;
                }
            };
            for (&(a, b, ..), &f) in sol.nu.iter().chain(&sol.nu_retag) {
                on(a, b, f);
            }
            for (&(a, b, ..), &f) in &sol.pi_joint {
                on(a, b, f);
            }
            for (&(a, b, ..), &f) in sol.pi_indiv.iter().chain(&sol.rho) {
                on(a, b, f);
            }
            for (e, l) in inst.wired_links.iter().enumerate() {
                capacity.push(CapacitySlack { link: e, used: used[e], capacity: l.cap, slack: l.cap - used[e] });
            }
        }
        Mode::Wireless => {
            let share: f64 = sol.lambda.iter().sum();
            time_share_excess = (share - 1.0).max(0.0);
            for e in 0..inst.wireless_links.len() {
                let used: f64 = sol.link_usage.iter().filter(|lu| lu.link == e).map(|lu| lu.usage).sum();
                let cap = wireless_capacity(inst, &sol.lambda, e);
                capacity.push(CapacitySlack { link: e, used, capacity: cap, slack: cap - used });
            }
        }
    }

    let mut negative = Vec::new();
    if sol.values().any(|v| v < -tol) || sol.lambda.iter().any(|&l| l < -tol) || sol.link_usage.iter().any(|l| l.usage < -tol) {
        let sol_json = to_json_value(inst, sol);
        for (family, entries) in sol_json.as_object().into_iter().flatten() {
            if let Some(arr) = entries.as_array() {
                for e in arr {
                    let v = e.get("val").or_else(|| e.get("usage")).and_then(Value::as_f64).or_else(|| e.as_f64());
                    if v.is_some_and(|v| v < -tol) {
                        negative.push(format!("{family}: {e}"));
                    }
                }
            }
        }
    }

    let max_residual = residuals.iter().map(|r| r.value.abs()).fold(0.0, f64::max);
    let min_slack = capacity.iter().map(|c| c.slack).fold(f64::INFINITY, f64::min);
    let pass = max_residual <= tol
        && capacity.iter().all(|c| c.slack >= -tol)
        && negative.is_empty()
        && time_share_excess <= tol;
    Ok(VerificationReport {
        residuals,
        capacity,
        negative,
        time_share_excess,
        max_residual,
        min_slack: if min_slack.is_finite() { min_slack } else { 0.0 },
        tolerance: tol,
        pass,
    })
}

// ---- JSON ----

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NuEntry {
    a: String,
    b: String,
    c: usize,
    v: String,
    val: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkPairEntry {
    a: String,
    b: String,
    c: usize,
    c2: usize,
    j: String,
    val: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GammaEntry {
    a: String,
    c: usize,
    v: String,
    c2: usize,
    v2: String,
    val: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodePairEntry {
    a: String,
    c: usize,
    c2: usize,
    j: String,
    val: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UsageEntry {
    link: String,
    usage: f64,
    capacity: f64,
}

#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SolutionFile {
    nu: Vec<NuEntry>,
    nu_retag: Vec<NuEntry>,
    pi_joint: Vec<LinkPairEntry>,
    pi_indiv: Vec<LinkPairEntry>,
    rho: Vec<LinkPairEntry>,
    gamma: Vec<GammaEntry>,
    sigma: Vec<NodePairEntry>,
    eta: Vec<NodePairEntry>,
    rates: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    link_usage: Vec<UsageEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    lambda: Vec<f64>,
}

fn to_json_value(inst: &ProblemInstance, sol: &SolutionVariables) -> Value {
    let name = |v: NodeId| inst.nodes.get(v.0).cloned().unwrap_or_else(|| format!("#{}", v.0));
    let nu = |m: &BTreeMap<NuKey, f64>| {
        m.iter()
            .map(|(&(a, b, c, v), &val)| NuEntry { a: name(a), b: name(b), c: c.0, v: name(v), val })
            .collect()
    };
    let link_pair = |m: &BTreeMap<PairLinkKey, f64>| {
        m.iter()
            .map(|(&(a, b, c, c2, j), &val)| LinkPairEntry { a: name(a), b: name(b), c: c.0, c2: c2.0, j: name(j), val })
            .collect()
    };
    let file = SolutionFile {
        nu: nu(&sol.nu),
        nu_retag: nu(&sol.nu_retag),
        pi_joint: sol
            .pi_joint
            .iter()
            .map(|(&(a, b, (c, c2), j), &val)| LinkPairEntry { a: name(a), b: name(b), c: c.0, c2: c2.0, j: name(j), val })
            .collect(),
        pi_indiv: link_pair(&sol.pi_indiv),
        rho: link_pair(&sol.rho),
        gamma: sol
            .gamma
            .iter()
            .map(|(&(a, (c, v), (c2, v2)), &val)| GammaEntry { a: name(a), c: c.0, v: name(v), c2: c2.0, v2: name(v2), val })
            .collect(),
        sigma: sol
            .sigma
            .iter()
            .map(|(&(a, (c, c2), j), &val)| NodePairEntry { a: name(a), c: c.0, c2: c2.0, j: name(j), val })
            .collect(),
        eta: sol
            .eta
            .iter()
            .map(|(&(a, c, c2, j), &val)| NodePairEntry { a: name(a), c: c.0, c2: c2.0, j: name(j), val })
            .collect(),
        rates: sol.rates.iter().enumerate().map(|(c, &r)| (c.to_string(), r)).collect(),
        link_usage: sol
            .link_usage
            .iter()
            .map(|lu| UsageEntry {
                link: inst.wireless_links.get(lu.link).map(|l| l.id.clone()).unwrap_or_else(|| format!("#{}", lu.link)),
                usage: lu.usage,
                capacity: lu.capacity,
            })
            .collect(),
        lambda: sol.lambda.clone(),
    };
    serde_json::to_value(file).expect("solution serializes")
}

/// Pretty JSON with sorted keys; nodes by name, sessions by 0-based index.
pub fn solution_to_json(inst: &ProblemInstance, sol: &SolutionVariables) -> String {
    serde_json::to_string_pretty(&to_json_value(inst, sol)).expect("value serializes")
}

pub fn solution_from_json(inst: &ProblemInstance, text: &str) -> Result<SolutionVariables> {
    let file: SolutionFile = serde_json::from_str(text)?;
    let node = |s: &str| inst.node_by_name(s).ok_or_else(|| Error::UnknownIndex(format!("node `{s}`")));
    let mut sol = SolutionVariables::default();
    for (entries, map) in [(&file.nu, &mut sol.nu), (&file.nu_retag, &mut sol.nu_retag)] {
        for e in entries {
            map.insert((node(&e.a)?, node(&e.b)?, SessionId(e.c), node(&e.v)?), e.val);
        }
    }
    for e in &file.pi_joint {
        sol.pi_joint.insert((node(&e.a)?, node(&e.b)?, (SessionId(e.c), SessionId(e.c2)), node(&e.j)?), e.val);
    }
    for (entries, map) in [(&file.pi_indiv, &mut sol.pi_indiv), (&file.rho, &mut sol.rho)] {
        for e in entries {
            map.insert((node(&e.a)?, node(&e.b)?, SessionId(e.c), SessionId(e.c2), node(&e.j)?), e.val);
        }
    }
    for e in &file.gamma {
        sol.gamma.insert((node(&e.a)?, (SessionId(e.c), node(&e.v)?), (SessionId(e.c2), node(&e.v2)?)), e.val);
    }
    for e in &file.sigma {
        sol.sigma.insert((node(&e.a)?, (SessionId(e.c), SessionId(e.c2)), node(&e.j)?), e.val);
    }
    for e in &file.eta {
        sol.eta.insert((node(&e.a)?, SessionId(e.c), SessionId(e.c2), node(&e.j)?), e.val);
    }
    let mut rates = vec![0.0; inst.session_count()];
    for (c, &r) in &file.rates {
        let idx: usize = c.parse().map_err(|_| Error::UnknownIndex(format!("session `{c}`")))?;
        if idx >= rates.len() {
            return Err(Error::UnknownIndex(format!("session {idx}")));
        }
        rates[idx] = r;
    }
    sol.rates = rates;
    for lu in &file.link_usage {
        let link = inst
            .wireless_links
            .iter()
            .position(|l| l.id == lu.link)
            .ok_or_else(|| Error::UnknownIndex(format!("link `{}`", lu.link)))?;
        sol.link_usage.push(LinkUsage { link, usage: lu.usage, capacity: lu.capacity });
    }
    sol.lambda = file.lambda;
    check_indices(inst, &sol)?;
    Ok(sol)
}

pub fn report_to_json(inst: &ProblemInstance, report: &VerificationReport) -> String {
    let name = |v: NodeId| inst.node_name(v).to_string();
    let residuals: Vec<Value> = report
        .residuals
        .iter()
        .map(|r| {
            let mut obj = serde_json::json!({ "family": r.key.family(), "node": name(r.key.node()), "value": r.value });
            let extra = match r.key {
                ConstraintKey::Uncoded { session, prev, .. } => serde_json::json!({ "c": session.0, "v": name(prev) }),
                ConstraintKey::Joint { pair, coder, .. } => {
                    serde_json::json!({ "c": pair.0 .0, "c2": pair.1 .0, "j": name(coder) })
                }
                ConstraintKey::Indiv { session, other, coder, .. } | ConstraintKey::Remedy { session, other, coder, .. } => {
                    serde_json::json!({ "c": session.0, "c2": other.0, "j": name(coder) })
                }
            };
            obj.as_object_mut().unwrap().extend(extra.as_object().unwrap().clone());
            obj
        })
        .collect();
    let capacity: Vec<Value> = report
        .capacity
        .iter()
        .map(|c| {
            let link = match inst.mode {
                Mode::Wired => {
                    let l = &inst.wired_links[c.link];
                    format!("{}->{}", name(l.from), name(l.to))
                }
                Mode::Wireless => inst.wireless_links[c.link].id.clone(),
            };
            serde_json::json!({ "link": link, "used": c.used, "capacity": c.capacity, "slack": c.slack })
        })
        .collect();
    let v = serde_json::json!({
        "pass": report.pass,
        "tolerance": report.tolerance,
        "max_residual": report.max_residual,
        "min_slack": report.min_slack,
        "time_share_excess": report.time_share_excess,
        "negative": report.negative,
        "residuals": residuals,
        "capacity": capacity,
    });
    serde_json::to_string_pretty(&v).expect("value serializes")
}
