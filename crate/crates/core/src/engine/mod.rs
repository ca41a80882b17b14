//! Round execution.
//!
//! A round injects demand, greedily pushes flow over every link, removes
//! flow that reached its sink and finally rebalances subqueues. Wireless
//! instances timeshare the real links across rate sets within one round.

pub mod index;

use std::io::Write;

use crate::error::{Error, Result};
use crate::netmodel::{derive_constants, ConstantParams, DerivedConstants, Mode, ProblemInstance, SessionId};
use crate::queues::{rebalance, remove_at_sinks, Ledger, PairSlots, SlotId};
use crate::solution::{average_flows, SolutionVariables};
use crate::transfers::{build_catalogs, build_links, prune_unreachable, CatalogOptions, LinkId, LinkKind, LinkRef, TransferPair};

pub use index::{naive_argmax, WeightIndex};

/// Remaining capacity or time budget below which a link counts as exhausted.
const EXHAUSTED: f64 = 1e-12;
const CHECK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct RoundConfig {
    pub constants: ConstantParams,
    pub max_rounds: usize,
    /// Defaults to the constants' epsilon.
    pub stop_fraction: Option<f64>,
    pub greedy_nonnegative_only: bool,
    pub fast_index: bool,
    pub routing_only: bool,
    pub prune_unreachable: bool,
    /// Record a [`RoundStats`] every this many rounds; 0 disables.
    pub stats_every: usize,
    pub check_invariants: bool,
}

impl Default for RoundConfig {
    fn default() -> Self {
        RoundConfig {
            constants: ConstantParams::default(),
            max_rounds: 100_000,
            stop_fraction: None,
            greedy_nonnegative_only: true,
            fast_index: true,
            routing_only: false,
            prune_unreachable: false,
            stats_every: 1,
            check_invariants: false,
        }
    }
}

impl RoundConfig {
    pub fn stop_fraction(&self) -> f64 {
        self.stop_fraction.unwrap_or(self.constants.epsilon)
    }

    fn validate(&self) -> Result<()> {
        let sf = self.stop_fraction();
        if !(sf > 0.0 && sf < 1.0) {
            return Err(Error::InvalidConfig(format!("stop fraction must lie in (0, 1), got {sf}")));
        }
        if self.max_rounds == 0 {
            return Err(Error::InvalidConfig("max_rounds must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundStats {
    pub round: usize,
    /// Cumulative per session.
    pub injected: Vec<f64>,
    /// Cumulative per session.
    pub delivered: Vec<f64>,
    /// Cumulative per session.
    pub entered: Vec<f64>,
    pub overflow: Vec<f64>,
    pub total_potential: f64,
    pub remaining: f64,
    /// Pushed this round, per link.
    pub pushed: Vec<f64>,
    /// Time share given to each rate set this round (wireless).
    pub lambda: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    Bracket,
    TwinLock,
    Capacity,
    TimeShare,
    NegativeLength,
    PotentialIncrease,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub round: usize,
    pub kind: ViolationKind,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub solution: SolutionVariables,
    pub stats: Vec<RoundStats>,
    pub converged: bool,
    pub rounds: usize,
    pub violations: Vec<Violation>,
    pub clamp_events: usize,
}

pub struct Engine {
    inst: ProblemInstance,
    consts: DerivedConstants,
    config: RoundConfig,
    links: Vec<LinkRef>,
    catalogs: Vec<Vec<TransferPair>>,
    compiled: Vec<Vec<PairSlots>>,
    ledger: Ledger,
    index: Option<WeightIndex>,
    rates: Vec<f64>,
    rounds: usize,
    lambda_total: Vec<f64>,
    stats: Vec<RoundStats>,
    violations: Vec<Violation>,
}

impl Engine {
    pub fn new(inst: &ProblemInstance, config: RoundConfig) -> Result<Self> {
        config.validate()?;
        let consts = derive_constants(inst, config.constants)?;
        let opts = CatalogOptions { routing_only: config.routing_only };
        let links = build_links(inst, consts.cbar, opts);
        let mut catalogs = build_catalogs(inst, &links, opts);
        if config.prune_unreachable {
            let removed = prune_unreachable(&mut catalogs);
            log::debug!("pruned {removed} unreachable transfer pairs");
        }
        let (ledger, compiled) = Ledger::new(inst, &consts, &catalogs);
        let index = config.fast_index.then(|| WeightIndex::new(&ledger, &catalogs, &compiled));
        log::info!(
            "{} links, {} transfer pairs, {} subqueues",
            links.len(),
            catalogs.iter().map(Vec::len).sum::<usize>(),
            ledger.slots().len()
        );
        Ok(Engine {
            rates: inst.sessions.iter().map(|s| s.rate).collect(),
            lambda_total: vec![0.0; inst.rate_sets.len()],
            inst: inst.clone(),
            consts,
            config,
            links,
            catalogs,
            compiled,
            ledger,
            index,
            rounds: 0,
            stats: Vec::new(),
            violations: Vec::new(),
        })
    }

    pub fn constants(&self) -> &DerivedConstants {
        &self.consts
    }

    pub fn links(&self) -> &[LinkRef] {
        &self.links
    }

    pub fn catalogs(&self) -> &[Vec<TransferPair>] {
        &self.catalogs
    }

    pub fn compiled(&self) -> &[Vec<PairSlots>] {
        &self.compiled
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn index(&self) -> Option<&WeightIndex> {
        self.index.as_ref()
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn stats(&self) -> &[RoundStats] {
        &self.stats
    }

    pub fn violations(&self) -> &[Violation] {
        &self.violations
    }

    pub fn lambda_total(&self) -> &[f64] {
        &self.lambda_total
    }

    fn sync_index(&mut self) {
        let changed = self.ledger.take_changed();
        if let Some(index) = self.index.as_mut() {
            for s in changed {
                index.update_slot(&self.ledger, &self.compiled, s);
            }
        }
    }

    fn best_pair(&self, e: usize) -> Option<(usize, f64)> {
        match &self.index {
            Some(index) => index.argmax(e),
            None => naive_argmax(&self.ledger, &self.compiled[e]),
        }
    }

    fn push(&mut self, e: usize, i: usize, f: f64) -> Result<()> {
        let pair = &self.compiled[e][i];
        self.ledger.push(LinkId(e), i, pair, f);
        for &o in &pair.origins {
            let l = self.ledger.slot(o).len;
            if l < -CHECK_TOL {
                return Err(Error::InvariantBreach(format!(
                    "round {}: {} on {} went negative ({l})",
                    self.rounds,
                    self.ledger.slot(o).key.queue,
                    LinkId(e)
                )));
            }
        }
        if let LinkKind::VirtualSource(c) = self.links[e].kind {
            self.ledger.record_entry(c, f);
        }
        self.sync_index();
        Ok(())
    }

    /// Sets a subqueue length directly, keeping the weight index in sync.
    pub fn set_length(&mut self, slot: SlotId, len: f64, refresh: bool) {
        self.ledger.set_length(slot, len, refresh);
        self.sync_index();
    }

    /// The highest-weight eligible pair of link `e`.
    pub fn best(&self, e: usize) -> Option<(usize, f64)> {
        self.best_pair(e)
    }

    /// Greedy pushes over one link until `capacity` is used up, no
    /// eligible pair is left or the best weight is not positive. Returns the
    /// amount pushed.
    pub fn push_greedy(&mut self, e: usize, capacity: f64) -> Result<f64> {
        let mut left = capacity;
        while left > EXHAUSTED {
            let Some((i, w)) = self.best_pair(e) else { break };
            if self.config.greedy_nonnegative_only && w <= 0.0 {
                break;
            }
            let headroom = self.ledger.pair_headroom(&self.compiled[e][i]);
            if headroom <= 0.0 {
                return Err(Error::InvariantBreach(format!("pair {i} on {} has no headroom", LinkId(e))));
            }
            let f = left.min(headroom);
            self.push(e, i, f)?;
            left -= f;
        }
        Ok(capacity - left)
    }

    fn phase1(&mut self) {
        self.ledger.inject(&self.rates, self.consts.epsilon);
        self.sync_index();
    }

    fn phase2_wired(&mut self, pushed: &mut [f64]) -> Result<()> {
        for (e, out) in pushed.iter_mut().enumerate() {
            *out = self.push_greedy(e, self.links[e].capacity)?;
        }
        Ok(())
    }

    fn phase2_wireless(&mut self, pushed: &mut [f64], lambda: &mut [f64]) -> Result<()> {
        let real: Vec<usize> = (0..self.links.len()).filter(|&e| self.links[e].kind.is_real()).collect();
        for (e, out) in pushed.iter_mut().enumerate() {
            if !self.links[e].kind.is_real() {
                *out = self.push_greedy(e, self.links[e].capacity)?;
            }
        }
        let mut t = 1.0;
        while t > EXHAUSTED {
            let active: Vec<(usize, usize, f64)> = real
                .iter()
                .filter_map(|&e| {
                    let (i, w) = self.best_pair(e)?;
                    (!self.config.greedy_nonnegative_only || w > 0.0).then_some((e, i, w))
                })
                .collect();
            let mut best: Option<(usize, f64)> = None;
            for (u, caps) in self.inst.rate_sets.iter().enumerate() {
                let y: f64 = active.iter().map(|&(e, _, w)| w * caps[e]).sum();
                if best.is_none_or(|(_, by)| y > by) {
                    best = Some((u, y));
                }
            }
            let Some((u, y)) = best else { break };
            if y <= 0.0 {
                break;
            }
            let caps = &self.inst.rate_sets[u];
            let mut slice = t;
            for &(e, i, _) in &active {
                if caps[e] > 0.0 {
                    slice = slice.min(self.ledger.pair_headroom(&self.compiled[e][i]) / caps[e]);
                }
            }
            if slice <= 0.0 {
                return Err(Error::InvariantBreach("wireless slice without headroom".into()));
            }
            let amounts: Vec<(usize, usize, f64)> =
                active.iter().filter(|a| caps[a.0] > 0.0).map(|&(e, i, _)| (e, i, slice * caps[e])).collect();
            for (e, i, f) in amounts {
                self.push(e, i, f)?;
                pushed[e] += f;
            }
            lambda[u] += slice;
            t -= slice;
        }
        Ok(())
    }

    fn record(&mut self, kind: ViolationKind, detail: String) {
        self.violations.push(Violation { round: self.rounds + 1, kind, detail });
    }

    fn check_state(&mut self, phase: &str) {
        let brackets = self.ledger.bracket_violations(CHECK_TOL);
        for k in brackets {
            self.record(ViolationKind::Bracket, format!("{phase}: {} on {}", k.queue, k.link));
        }
        let twins = self.ledger.twin_lock_violations(CHECK_TOL);
        for k in twins {
            self.record(ViolationKind::TwinLock, format!("{phase}: {} on {}", k.queue, k.link));
        }
        let min = self.ledger.min_len();
        if min < -CHECK_TOL {
            self.record(ViolationKind::NegativeLength, format!("{phase}: minimum length {min}"));
        }
    }

    fn check_potential(&mut self, phase: &str, before: f64, after: f64) {
        if after > before + CHECK_TOL * before.abs().max(1.0) {
            self.record(ViolationKind::PotentialIncrease, format!("{phase}: {before} -> {after}"));
        }
    }

    fn check_capacity(&mut self, pushed: &[f64], lambda: &[f64]) {
        let share: f64 = lambda.iter().sum();
        if share > 1.0 + CHECK_TOL || lambda.iter().any(|&l| l < 0.0) {
            self.record(ViolationKind::TimeShare, format!("lambda {lambda:?}"));
        }
        for (e, link) in self.links.iter().enumerate() {
            let cap = match link.kind {
                LinkKind::WirelessReal { .. } => {
                    self.inst.rate_sets.iter().zip(lambda).map(|(caps, l)| l * caps[e]).sum()
                }
                _ => link.capacity,
            };
            if pushed[e] > cap + CHECK_TOL {
                let detail = format!("{}: pushed {} > {}", LinkId(e), pushed[e], cap);
                self.violations.push(Violation { round: self.rounds + 1, kind: ViolationKind::Capacity, detail });
            }
        }
    }

    /// Runs one round.
    pub fn step(&mut self) -> Result<()> {
        let check = self.config.check_invariants;
        let mut pushed = vec![0.0; self.links.len()];
        let mut lambda = vec![0.0; self.inst.rate_sets.len()];

        self.phase1();
        if check {
            self.check_state("phase 1");
        }

        match self.inst.mode {
            Mode::Wired => self.phase2_wired(&mut pushed)?,
            Mode::Wireless => self.phase2_wireless(&mut pushed, &mut lambda)?,
        }
        if check {
            self.check_state("phase 2");
            self.check_capacity(&pushed, &lambda);
        }

        let before3 = if check { self.ledger.total_potential() } else { 0.0 };
        remove_at_sinks(&mut self.ledger);
        self.sync_index();
        let before4 = if check { self.ledger.total_potential() } else { 0.0 };
        if check {
            self.check_potential("phase 3", before3, before4);
            self.check_state("phase 3");
        }

        rebalance(&mut self.ledger);
        self.sync_index();
        if check {
            let after = self.ledger.total_potential();
            self.check_potential("phase 4", before4, after);
            self.check_state("phase 4");
        }

        for (tot, l) in self.lambda_total.iter_mut().zip(&lambda) {
            *tot += l;
        }
        self.rounds += 1;
        if self.config.stats_every > 0 && self.rounds.is_multiple_of(self.config.stats_every) {
            let stats = self.snapshot(pushed, lambda);
            self.stats.push(stats);
        }
        Ok(())
    }

    fn snapshot(&self, pushed: Vec<f64>, lambda: Vec<f64>) -> RoundStats {
        let ctr = &self.ledger.counters;
        RoundStats {
            round: self.rounds,
            injected: ctr.iter().map(|c| c.injected).collect(),
            delivered: ctr.iter().map(|c| c.delivered).collect(),
            entered: ctr.iter().map(|c| c.entered).collect(),
            overflow: ctr.iter().map(|c| c.overflow).collect(),
            total_potential: self.ledger.total_potential(),
            remaining: self.ledger.remaining(),
            pushed,
            lambda,
        }
    }

    /// Flow that has passed the source queue of each session, per round.
    pub fn achieved_rates(&self) -> Vec<f64> {
        let t = self.rounds.max(1) as f64;
        self.inst
            .session_ids()
            .map(|c| (self.ledger.counters[c.0].entered - self.ledger.entry_queue_len(c)) / t)
            .collect()
    }

    /// The termination test: what is left in the network is at most a
    /// `stop_fraction` of what entered, and every session is admitted at
    /// `(1 - stop_fraction)` of its demand.
    pub fn converged(&self) -> bool {
        if self.inst.session_count() == 0 {
            return true;
        }
        if self.rounds == 0 {
            return false;
        }
        let sf = self.config.stop_fraction();
        let entered: f64 = self.ledger.counters.iter().map(|c| c.entered).sum();
        if entered <= 0.0 || self.ledger.remaining() > sf * entered {
            return false;
        }
        self.achieved_rates().iter().zip(&self.rates).all(|(&a, &r)| a >= (1.0 - sf) * r)
    }

    pub fn solution(&self) -> Result<SolutionVariables> {
        if self.inst.session_count() == 0 && self.rounds == 0 {
            return Ok(SolutionVariables::default());
        }
        let rates: Vec<f64> = self.achieved_rates();
        average_flows(&self.inst, &self.links, &self.catalogs, &self.ledger.pair_flow, self.rounds, &self.lambda_total, &rates)
    }

    /// Steps until converged or `max_rounds` is reached.
    pub fn run_to_end(&mut self) -> Result<bool> {
        while !self.converged() && self.rounds < self.config.max_rounds {
            self.step()?;
        }
        Ok(self.converged())
    }

    pub fn into_outcome(self) -> Result<RunOutcome> {
        let solution = self.solution()?;
        Ok(RunOutcome {
            converged: self.converged(),
            rounds: self.rounds,
            clamp_events: self.ledger.clamp_events(),
            solution,
            stats: self.stats,
            violations: self.violations,
        })
    }

    pub fn overflow(&self, c: SessionId) -> f64 {
        self.ledger.overflow(c)
    }
}

/// Runs the algorithm to convergence or the round cap.
pub fn run(inst: &ProblemInstance, config: RoundConfig) -> Result<RunOutcome> {
    let mut engine = Engine::new(inst, config)?;
    engine.run_to_end()?;
    engine.into_outcome()
}

/// Writes round statistics as CSV. Columns: `round`, then per session
/// `injected_c`, `delivered_c`, `entered_c`, `overflow_c`, then
/// `total_potential`, `remaining`, then `pushed_e` per link and `lambda_u`
/// per rate set.
pub fn write_stats_csv<W: Write>(mut out: W, stats: &[RoundStats]) -> std::io::Result<()> {
    let Some(first) = stats.first() else {
        return writeln!(out, "round,total_potential,remaining");
    };
    let k = first.injected.len();
    let mut header = vec!["round".to_string()];
    for field in ["injected", "delivered", "entered", "overflow"] {
        header.extend((0..k).map(|c| format!("{field}_{c}")));
    }
    header.push("total_potential".into());
    header.push("remaining".into());
    header.extend((0..first.pushed.len()).map(|e| format!("pushed_{e}")));
    header.extend((0..first.lambda.len()).map(|u| format!("lambda_{u}")));
    writeln!(out, "{}", header.join(","))?;
    for s in stats {
        let mut row = vec![s.round.to_string()];
        for v in [&s.injected, &s.delivered, &s.entered, &s.overflow] {
            row.extend(v.iter().map(f64::to_string));
        }
        row.push(s.total_potential.to_string());
        row.push(s.remaining.to_string());
        row.extend(s.pushed.iter().map(f64::to_string));
        row.extend(s.lambda.iter().map(f64::to_string));
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
