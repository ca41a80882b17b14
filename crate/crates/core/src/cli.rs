//! Command-line front end.
//!
//! Exit codes: 0 success or verification pass, 1 verification failure,
//! 2 usage or input error, 3 run finished without converging.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::engine::{write_stats_csv, Engine, RoundConfig};
use crate::error::{Error, Result};
use crate::fixtures::{self, FixtureOptions};
use crate::netmodel::{instance_to_json, parse_instance, ConstantParams, Mode, ProblemInstance};
use crate::oracle::{oracle_search, OracleOptions, OracleOutcome};
use crate::solution::{default_tolerance, report_to_json, solution_from_json, solution_to_json, verify};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "xorflow", version, about = "Back-pressure solver for pairwise XOR coding across unicast sessions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate rounds and write rounds.csv, solution.json and report.json.
    Run(RunArgs),
    /// Check a solution file against an instance; writes verification.json.
    Verify(VerifyArgs),
    /// Grid search for a feasible solution on a tiny wired instance.
    Oracle(OracleArgs),
    /// Write a named fixture instance.
    Gen(GenArgs),
}

#[derive(Debug, Args)]
pub struct ConstantArgs {
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    /// Longest primary path bound (default N - 1).
    #[arg(long)]
    pub big_l: Option<usize>,
    /// Maximum links per elementary flow (default 4 (N - 1)).
    #[arg(long)]
    pub big_f: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub kappa: f64,
}

impl ConstantArgs {
    fn params(&self) -> ConstantParams {
        ConstantParams { epsilon: self.epsilon, big_l: self.big_l, big_f: self.big_f, kappa: self.kappa }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub instance: PathBuf,
    #[command(flatten)]
    pub constants: ConstantArgs,
    #[arg(long, default_value_t = 200_000)]
    pub max_rounds: usize,
    /// Termination fraction (default epsilon).
    #[arg(long)]
    pub stop_fraction: Option<f64>,
    /// Use the linear scan instead of the sorted weight index.
    #[arg(long)]
    pub no_fast_index: bool,
    /// Disable coding, decoding and branching.
    #[arg(long)]
    pub routing_only: bool,
    /// Push pairs even when their weight is not positive.
    #[arg(long)]
    pub exhaust_capacity: bool,
    /// Write a CSV row every this many rounds.
    #[arg(long, default_value_t = 1)]
    pub stats_every: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub instance: PathBuf,
    pub solution: PathBuf,
    /// Verification tolerance (default epsilon * min rate).
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    /// Check against the instance's demanded rates instead of the rates in
    /// the solution file.
    #[arg(long)]
    pub demanded: bool,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    pub instance: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub grid: f64,
    /// Comma-separated rates (default: the instance's demands).
    #[arg(long, value_delimiter = ',')]
    pub rates: Option<Vec<f64>>,
    #[arg(long)]
    pub routing_only: bool,
    #[arg(long, default_value_t = 1e8)]
    pub cap: f64,
    /// Write the found solution here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// two-unicast-poison, reverse-carpool, line or random.
    pub name: String,
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long, default_value_t = 3)]
    pub nodes: usize,
    #[arg(long, default_value_t = 2)]
    pub sessions: usize,
    #[arg(long, default_value_t = 1.0)]
    pub cap: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub wireless: bool,
    /// Output file (default stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn read_instance(path: &Path) -> Result<ProblemInstance> {
    parse_instance(&fs::read_to_string(path)?)
}

fn write(dir: &Path, name: &str, body: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), body)?;
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<i32> {
    let inst = read_instance(&args.instance)?;
    let config = RoundConfig {
        constants: args.constants.params(),
        max_rounds: args.max_rounds,
        stop_fraction: args.stop_fraction,
        greedy_nonnegative_only: !args.exhaust_capacity,
        fast_index: !args.no_fast_index,
        routing_only: args.routing_only,
        prune_unreachable: false,
        stats_every: args.stats_every,
        check_invariants: false,
    };
    let mut engine = Engine::new(&inst, config)?;
    let converged = engine.run_to_end()?;
    let consts = engine.constants().clone();
    let achieved = engine.achieved_rates();
    let remaining = engine.ledger().remaining();
    let counters = engine.ledger().counters.clone();
    let rounds = engine.rounds();
    let outcome = engine.into_outcome()?;

    let mut csv = Vec::new();
    write_stats_csv(&mut csv, &outcome.stats)?;
    write(&args.out, "rounds.csv", &String::from_utf8(csv).expect("csv is utf-8"))?;
    write(&args.out, "solution.json", &solution_to_json(&inst, &outcome.solution))?;
    let report = json!({
        "converged": converged,
        "rounds": rounds,
        "achieved_rates": achieved,
        "demanded_rates": inst.sessions.iter().map(|s| s.rate).collect::<Vec<_>>(),
        "entered": counters.iter().map(|c| c.entered).collect::<Vec<_>>(),
        "delivered": counters.iter().map(|c| c.delivered).collect::<Vec<_>>(),
        "overflow": counters.iter().map(|c| c.overflow).collect::<Vec<_>>(),
        "remaining": remaining,
        "clamp_events": outcome.clamp_events,
        "constants": {
            "epsilon": consts.epsilon,
            "kappa": consts.kappa,
            "big_l": consts.big_l,
            "big_f": consts.big_f,
            "cbar": consts.cbar,
            "rho": consts.rho,
            "alpha": consts.alpha,
            "b_times_r": consts.b_times_r,
            "packet": consts.packet,
            "dest_threshold": consts.dest_threshold,
        },
    });
    write(&args.out, "report.json", &serde_json::to_string_pretty(&report)?)?;
    log::info!("{} after {rounds} rounds", if converged { "converged" } else { "not converged" });
    println!("{} rounds={rounds}", if converged { "converged" } else { "not-converged" });
    Ok(if converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn cmd_verify(args: &VerifyArgs) -> Result<i32> {
    let inst = read_instance(&args.instance)?;
    let sol = solution_from_json(&inst, &fs::read_to_string(&args.solution)?)?;
    let rates: Vec<f64> = if args.demanded { inst.sessions.iter().map(|s| s.rate).collect() } else { sol.rates.clone() };
    let tol = args.tolerance.unwrap_or_else(|| default_tolerance(&inst, args.epsilon));
    let report = verify(&inst, &sol, &rates, tol)?;
    write(&args.out, "verification.json", &report_to_json(&inst, &report))?;
    println!("{} max_residual={:e} min_slack={:e}", if report.pass { "pass" } else { "fail" }, report.max_residual, report.min_slack);
    if let (false, Some(w)) = (report.pass, report.worst()) {
        eprintln!("worst residual {:e} at node {}", w.value, inst.node_name(w.key.node()));
    }
    Ok(if report.pass { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

fn cmd_oracle(args: &OracleArgs) -> Result<i32> {
    let inst = read_instance(&args.instance)?;
    let rates = args.rates.clone().unwrap_or_else(|| inst.sessions.iter().map(|s| s.rate).collect());
    let opts = OracleOptions { routing_only: args.routing_only, cap: args.cap };
    match oracle_search(&inst, &rates, args.grid, opts)? {
        OracleOutcome::Feasible(sol) => {
            println!("feasible");
            if let Some(path) = &args.out {
                fs::write(path, solution_to_json(&inst, &sol))?;
            }
        }
        OracleOutcome::InfeasibleAtGrid => println!("infeasible-at-grid"),
    }
    Ok(EXIT_OK)
}

fn cmd_gen(args: &GenArgs) -> Result<i32> {
    let opts = FixtureOptions {
        rate: args.rate,
        nodes: args.nodes,
        sessions: args.sessions,
        cap: args.cap,
        seed: args.seed,
        mode: if args.wireless { Mode::Wireless } else { Mode::Wired },
    };
    let inst = fixtures::by_name(&args.name, &opts)?;
    let text = instance_to_json(&inst);
    match &args.out {
        Some(path) => fs::write(path, text)?,
        None => println!("{text}"),
    }
    Ok(EXIT_OK)
}

pub fn execute(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Gen(a) => cmd_gen(a),
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvariantBreach(_) => EXIT_VERIFY_FAILED,
                _ => EXIT_USAGE,
            }
        }
    }
}
