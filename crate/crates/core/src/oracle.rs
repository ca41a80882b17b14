//! Brute-force feasibility check for tiny wired instances.
//!
//! A solution is searched for as a nonnegative integer combination, in grid
//! units, of elementary structures: routing paths, and pairwise-coded
//! structures in which two sessions are coded at one node, the joint poison
//! travels to a branching node, individual poison and remedies meet at a
//! decoding node per session and the decoded data continues to the sink.
//! Decomposing into structures instead of gridding raw variables keeps the
//! search small; routing-only search over paths is complete.

use std::collections::HashMap;

use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::netmodel::{Mode, NodeId, ProblemInstance, SessionId};
use crate::solution::{verify, SolutionVariables};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    pub routing_only: bool,
    /// Refuse when the estimated number of assignments exceeds this.
    pub cap: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { routing_only: false, cap: 1e8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum OracleOutcome {
    Feasible(SolutionVariables),
    InfeasibleAtGrid,
}

impl OracleOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, OracleOutcome::Feasible(_))
    }
}

type Path = Vec<NodeId>;

#[derive(Debug, Clone)]
enum Shape {
    Route { c: SessionId, path: Path },
    Coded(Box<CodedShape>),
}

#[derive(Debug, Clone)]
struct CodedShape {
    c: SessionId,
    c2: SessionId,
    to_coder: Path,
    to_coder2: Path,
    joint: Path,
    indiv: Path,
    indiv2: Path,
    remedy: Path,
    remedy2: Path,
    out: Path,
    out2: Path,
}

#[derive(Debug, Clone)]
struct Structure {
    sessions: SmallVec<[SessionId; 2]>,
    usage: Vec<u32>,
    shape: Shape,
}

/// Bound on enumerated candidate structures before dominance pruning.
const ENUM_LIMIT: usize = 2_000_000;

struct Graph<'a> {
    inst: &'a ProblemInstance,
    link_of: HashMap<(NodeId, NodeId), usize>,
    paths: HashMap<(NodeId, NodeId), Vec<Path>>,
}

impl<'a> Graph<'a> {
    fn new(inst: &'a ProblemInstance) -> Self {
        let link_of = inst.wired_links.iter().enumerate().map(|(e, l)| ((l.from, l.to), e)).collect();
        let mut g = Graph { inst, link_of, paths: HashMap::new() };
        for s in inst.node_ids() {
            let mut stack = vec![s];
            g.dfs_paths(&mut stack);
        }
        g
    }

    fn dfs_paths(&mut self, stack: &mut Path) {
        let (s, t) = (stack[0], *stack.last().unwrap());
        self.paths.entry((s, t)).or_default().push(stack.clone());
        let next: Vec<NodeId> = self.inst.wired_links.iter().filter(|l| l.from == t).map(|l| l.to).collect();
        for b in next {
            if !stack.contains(&b) {
                stack.push(b);
                self.dfs_paths(stack);
                stack.pop();
            }
        }
    }

    fn paths(&self, s: NodeId, t: NodeId) -> &[Path] {
        self.paths.get(&(s, t)).map(Vec::as_slice).unwrap_or(&[])
    }

    fn add_usage(&self, usage: &mut [u32], path: &Path) {
        for w in path.windows(2) {
            usage[self.link_of[&(w[0], w[1])]] += 1;
        }
    }
}

fn enumerate(g: &Graph, inst: &ProblemInstance, routing_only: bool, limit_per_unit: &[u32]) -> Result<Vec<Structure>> {
    let m = inst.wired_links.len();
    let mut out = Vec::new();
    let fits = |u: &[u32]| u.iter().zip(limit_per_unit).all(|(a, b)| a <= b);
    for c in inst.session_ids() {
        let s = inst.session(c);
        for path in g.paths(s.src, s.dst) {
            let mut usage = vec![0; m];
            g.add_usage(&mut usage, path);
            if fits(&usage) {
                out.push(Structure { sessions: smallvec::smallvec![c], usage, shape: Shape::Route { c, path: path.clone() } });
            }
        }
    }
    if routing_only {
        return Ok(out);
    }
    let mut visited = 0usize;
    let nodes: Vec<NodeId> = inst.node_ids().collect();
    for c in inst.session_ids() {
        for c2 in inst.session_ids().filter(|&c2| c2 > c) {
            let (sc, sc2) = (inst.session(c), inst.session(c2));
            for &a in &nodes {
                for p1 in g.paths(sc.src, a).iter().filter(|p| p.len() >= 2) {
                    let v = p1[p1.len() - 2];
                    for p2 in g.paths(sc2.src, a).iter().filter(|p| p.len() >= 2) {
                        let v2 = p2[p2.len() - 2];
                        let mut base = vec![0; m];
                        g.add_usage(&mut base, p1);
                        g.add_usage(&mut base, p2);
                        if !fits(&base) {
                            continue;
                        }
                        for &x in &nodes {
                            for j in g.paths(a, x) {
                                let mut u_j = base.clone();
                                g.add_usage(&mut u_j, j);
                                if !fits(&u_j) {
                                    continue;
                                }
                                for &w in nodes.iter().filter(|&&w| w != a) {
                                    for &w2 in nodes.iter().filter(|&&w| w != a) {
                                        for i1 in g.paths(x, w) {
                                            for i2 in g.paths(x, w2) {
                                                let mut u_i = u_j.clone();
                                                g.add_usage(&mut u_i, i1);
                                                g.add_usage(&mut u_i, i2);
                                                if !fits(&u_i) {
                                                    continue;
                                                }
                                                for r1 in g.paths(v2, w) {
                                                    for r2 in g.paths(v, w2) {
                                                        let mut u_r = u_i.clone();
                                                        g.add_usage(&mut u_r, r1);
                                                        g.add_usage(&mut u_r, r2);
                                                        if !fits(&u_r) {
                                                            continue;
                                                        }
                                                        for o1 in g.paths(w, sc.dst) {
                                                            for o2 in g.paths(w2, sc2.dst) {
                                                                visited += 1;
                                                                if visited > ENUM_LIMIT {
                                                                    return Err(Error::SearchTooLarge {
                                                                        estimate: visited as f64,
                                                                        cap: ENUM_LIMIT as f64,
                                                                    });
                                                                }
                                                                let mut usage = u_r.clone();
                                                                g.add_usage(&mut usage, o1);
                                                                g.add_usage(&mut usage, o2);
                                                                if !fits(&usage) {
                                                                    continue;
                                                                }
                                                                out.push(Structure {
                                                                    sessions: smallvec::smallvec![c, c2],
                                                                    usage,
                                                                    shape: Shape::Coded(Box::new(CodedShape {
                                                                        c,
                                                                        c2,
                                                                        to_coder: p1.clone(),
                                                                        to_coder2: p2.clone(),
                                                                        joint: j.clone(),
                                                                        indiv: i1.clone(),
                                                                        indiv2: i2.clone(),
                                                                        remedy: r1.clone(),
                                                                        remedy2: r2.clone(),
                                                                        out: o1.clone(),
                                                                        out2: o2.clone(),
                                                                    })),
                                                                });
                                                            }
                                                        }
                                                    }
                                                }
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Keeps one structure per (sessions, usage) and drops any structure whose
/// usage is dominated by another structure serving the same sessions.
fn prune_dominated(structs: Vec<Structure>) -> Vec<Structure> {
    let mut seen: HashMap<(SmallVec<[SessionId; 2]>, Vec<u32>), ()> = HashMap::new();
    let unique: Vec<Structure> =
        structs.into_iter().filter(|s| seen.insert((s.sessions.clone(), s.usage.clone()), ()).is_none()).collect();
    let dominated = |s: &Structure, t: &Structure| {
        s.sessions == t.sessions && s.usage != t.usage && t.usage.iter().zip(&s.usage).all(|(a, b)| a <= b)
    };
    unique.iter().filter(|s| !unique.iter().any(|t| dominated(s, t))).cloned().collect()
}

/// Walks uncoded data along `path`, starting with tag `tag` at its first
/// node; every hop retags with the node just left.
fn add_uncoded(sol: &mut SolutionVariables, c: SessionId, path: &Path, mut tag: NodeId, f: f64) {
    for w in path.windows(2) {
        let (a, b) = (w[0], w[1]);
        let map = if tag == a { &mut sol.nu } else { &mut sol.nu_retag };
        *map.entry((a, b, c, tag)).or_insert(0.0) += f;
        tag = a;
    }
}

fn build_solution(structs: &[Structure], counts: &[u32], grid: f64, k: usize) -> SolutionVariables {
    let mut sol = SolutionVariables { rates: vec![0.0; k], ..Default::default() };
    for (s, &n) in structs.iter().zip(counts) {
        if n == 0 {
            continue;
        }
        let f = n as f64 * grid;
        for c in &s.sessions {
            sol.rates[c.0] += f;
        }
        match &s.shape {
            Shape::Route { c, path } => add_uncoded(&mut sol, *c, path, path[0], f),
            Shape::Coded(cs) => {
                let (c, c2) = (cs.c, cs.c2);
                let a = *cs.joint.first().unwrap();
                let x = *cs.joint.last().unwrap();
                let v = cs.to_coder[cs.to_coder.len() - 2];
                let v2 = cs.to_coder2[cs.to_coder2.len() - 2];
                let (w, w2) = (*cs.indiv.last().unwrap(), *cs.indiv2.last().unwrap());
                add_uncoded(&mut sol, c, &cs.to_coder, cs.to_coder[0], f);
                add_uncoded(&mut sol, c2, &cs.to_coder2, cs.to_coder2[0], f);
                *sol.gamma.entry((a, (c, v), (c2, v2))).or_insert(0.0) += f;
                for h in cs.joint.windows(2) {
                    *sol.pi_joint.entry((h[0], h[1], (c, c2), a)).or_insert(0.0) += f;
                }
                *sol.sigma.entry((x, (c, c2), a)).or_insert(0.0) += f;
                for h in cs.indiv.windows(2) {
                    *sol.pi_indiv.entry((h[0], h[1], c, c2, a)).or_insert(0.0) += f;
                }
                for h in cs.indiv2.windows(2) {
                    *sol.pi_indiv.entry((h[0], h[1], c2, c, a)).or_insert(0.0) += f;
                }
                for h in cs.remedy.windows(2) {
                    *sol.rho.entry((h[0], h[1], c, c2, a)).or_insert(0.0) += f;
                }
                for h in cs.remedy2.windows(2) {
                    *sol.rho.entry((h[0], h[1], c2, c, a)).or_insert(0.0) += f;
                }
                *sol.eta.entry((w, c, c2, a)).or_insert(0.0) += f;
                *sol.eta.entry((w2, c2, c, a)).or_insert(0.0) += f;
                add_uncoded(&mut sol, c, &cs.out, a, f);
                add_uncoded(&mut sol, c2, &cs.out2, a, f);
            }
        }
    }
    sol
}

struct Search<'a> {
    structs: &'a [Structure],
    caps: Vec<f64>,
    grid: f64,
    /// Last structure index serving each session.
    last: Vec<Option<usize>>,
    counts: Vec<u32>,
}

impl Search<'_> {
    fn dfs(&mut self, idx: usize, demand: &mut [u32], left: &mut [f64]) -> bool {
        if demand.iter().all(|&d| d == 0) {
            return true;
        }
        for (c, &d) in demand.iter().enumerate() {
            if d > 0 && self.last[c].is_none_or(|l| l < idx) {
                return false;
            }
        }
        if idx == self.structs.len() {
            return false;
        }
        let s = &self.structs[idx];
        let mut max = s.sessions.iter().map(|c| demand[c.0]).min().unwrap_or(0);
        for (e, &u) in s.usage.iter().enumerate() {
            if u > 0 {
                let fit = ((left[e] + 1e-9) / (u as f64 * self.grid)).floor().max(0.0) as u32;
                max = max.min(fit);
            }
        }
        for n in (0..=max).rev() {
            let f = n as f64 * self.grid;
            for c in &s.sessions {
                demand[c.0] -= n;
            }
            for (e, &u) in s.usage.iter().enumerate() {
                left[e] -= u as f64 * f;
            }
            self.counts[idx] = n;
            if self.dfs(idx + 1, demand, left) {
                return true;
            }
            for c in &s.sessions {
                demand[c.0] += n;
            }
            for (e, &u) in s.usage.iter().enumerate() {
                left[e] += u as f64 * f;
            }
        }
        self.counts[idx] = 0;
        false
    }
}

/// Searches grid-valued combinations of elementary structures that carry
/// exactly `rates` and respect every link capacity. A feasible result is
/// confirmed with [`verify`] at tolerance `grid`.
pub fn oracle_search(inst: &ProblemInstance, rates: &[f64], grid: f64, opts: OracleOptions) -> Result<OracleOutcome> {
    if inst.mode != Mode::Wired {
        return Err(Error::InvalidConfig("the oracle handles wired instances only".into()));
    }
    if !(grid > 0.0) {
        return Err(Error::InvalidConfig(format!("grid must be positive, got {grid}")));
    }
    if rates.len() != inst.session_count() {
        return Err(Error::InvalidConfig(format!("expected {} rates, got {}", inst.session_count(), rates.len())));
    }
    let mut demand = Vec::with_capacity(rates.len());
    for &r in rates {
        let units = (r / grid).round();
        if (units * grid - r).abs() > 1e-9 || r < 0.0 {
            return Err(Error::OffGrid { rate: r, grid });
        }
        demand.push(units as u32);
    }
    let limit: Vec<u32> = inst.wired_links.iter().map(|l| ((l.cap + 1e-9) / grid).floor() as u32).collect();
    let g = Graph::new(inst);
    let mut structs = prune_dominated(enumerate(&g, inst, opts.routing_only, &limit)?);
    // Coded structures first: they carry two sessions per unit.
    structs.sort_by_key(|s| std::cmp::Reverse(s.sessions.len()));

    let estimate: f64 = structs
        .iter()
        .map(|s| (s.sessions.iter().map(|c| demand[c.0]).min().unwrap_or(0) as f64 + 1.0).ln())
        .sum::<f64>()
        .exp();
    if estimate > opts.cap {
        return Err(Error::SearchTooLarge { estimate, cap: opts.cap });
    }
    log::debug!("oracle: {} structures, estimate {estimate:.3e}", structs.len());

    let mut last = vec![None; inst.session_count()];
    for (i, s) in structs.iter().enumerate() {
        for c in &s.sessions {
            last[c.0] = Some(i);
        }
    }
    let mut search = Search {
        structs: &structs,
        caps: inst.wired_links.iter().map(|l| l.cap).collect(),
        grid,
        last,
        counts: vec![0; structs.len()],
    };
    let mut left = search.caps.clone();
    if !search.dfs(0, &mut demand, &mut left) {
        return Ok(OracleOutcome::InfeasibleAtGrid);
    }
    let sol = build_solution(&structs, &search.counts, grid, inst.session_count());
    let report = verify(inst, &sol, rates, grid)?;
    if !report.pass {
        return Err(Error::InvariantBreach(format!("oracle assignment fails verification ({})", report.max_residual)));
    }
    Ok(OracleOutcome::Feasible(sol))
}
