//! `noma-harq`: command-line front end for the figure sweeps, the
//! single-point allocation solvers, and the closed-form self-test.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use noma_harq_cli::{
    emit_csv, parse_env_seed, parse_grid, resolve_spec, run_sweep, write_csv_file, Experiment,
    Method, Settings,
};
use noma_harq_core::allocation::{solve_power, solve_rate, PowerMethod, RateMethod};
use noma_harq_core::errormodel::SinrValue;
use noma_harq_core::fading::{db_to_linear, linear_to_db};
use noma_harq_core::selftest::run_selftest;
use noma_harq_core::specfun::Probability;

/// Simulator and analysis toolkit for error-constrained uplink NOMA with
/// HARQ under finite-blocklength coding.
#[derive(Debug, Parser)]
#[command(name = "noma-harq", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Expected cell-center rates vs the common transmit power in dB.
    Fig2(FigArgs),
    /// Expected cell-center rates vs codeword length.
    Fig3a(FigArgs),
    /// Expected cell-center rates vs the common error budget.
    Fig3b(FigArgs),
    /// Expected retransmission-slot power vs the target rate.
    Fig4(FigArgs),
    /// Expected retransmission-slot power vs codeword length, fixed rate.
    Fig5(FigArgs),
    /// Expected retransmission-slot power vs codeword length, fixed
    /// payload of --k information nats (rate k/l per point).
    Fig6(FigArgs),
    /// Solve the rate allocation for one channel draw.
    SolveRate(SolveRateArgs),
    /// Solve the power allocation for one target rate.
    SolvePower(SolvePowerArgs),
    /// Cross-validate every closed form against its numerical oracle.
    Selftest(SelftestArgs),
}

/// Scalar model parameters shared by every subcommand.
#[derive(Debug, Args)]
struct CommonArgs {
    /// Codeword length in channel uses.
    #[arg(long)]
    l: Option<u32>,
    /// Cell-center decoding error budget.
    #[arg(long)]
    theta1: Option<f64>,
    /// Cell-edge decoding error budget.
    #[arg(long)]
    theta2: Option<f64>,
    /// Cell-center transmit power in dB (noise normalized to one).
    #[arg(long = "p1-db")]
    p1_db: Option<f64>,
    /// Cell-edge transmit power in dB (noise normalized to one).
    #[arg(long = "p2-db")]
    p2_db: Option<f64>,
    /// Cell-center fading rate parameter (mean gain 1/lambda1).
    #[arg(long)]
    lambda1: Option<f64>,
    /// Cell-edge fading rate parameter (mean gain 1/lambda2).
    #[arg(long)]
    lambda2: Option<f64>,
    /// Monte Carlo trials per grid point.
    #[arg(long)]
    trials: Option<u64>,
    /// RNG seed; falls back to NOMA_HARQ_SEED, then 42.
    #[arg(long)]
    seed: Option<u64>,
    /// Flat key=value config file; flags take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl CommonArgs {
    fn to_settings(&self) -> Settings {
        Settings {
            l: self.l,
            theta1: self.theta1,
            theta2: self.theta2,
            p1_db: self.p1_db,
            p2_db: self.p2_db,
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            trials: self.trials,
            seed: self.seed,
            ..Settings::default()
        }
    }

    /// Flag settings over config-file settings, unknown keys rejected.
    fn merged_settings(&self, extra: Settings) -> Result<Settings> {
        let mut flags = self.to_settings().or(extra);
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config file {}", path.display()))?;
            let file = Settings::from_config_text(&text)
                .with_context(|| format!("parsing config file {}", path.display()))?;
            flags = flags.or(file);
        }
        Ok(flags)
    }
}

#[derive(Debug, Args)]
struct FigArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Axis grid: start:step:stop (inclusive) or a comma-separated list.
    #[arg(long)]
    grid: Option<String>,
    /// Comma-separated methods: closed-form, quadrature, monte-carlo,
    /// linearized-q (rate sweeps only). Empty string for none.
    #[arg(long)]
    methods: Option<String>,
    /// Information nats per codeword (fig6).
    #[arg(long)]
    k: Option<f64>,
    /// Fixed target rate in npcu (fig5).
    #[arg(long)]
    rate: Option<f64>,
    /// Worker threads for the Monte Carlo backend.
    #[arg(long)]
    workers: Option<usize>,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SolveRateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Cell-center channel gain for this draw.
    #[arg(long)]
    g1: f64,
    /// Cell-edge channel gain for this draw (0 for a clean slot).
    #[arg(long, default_value_t = 0.0)]
    g2: f64,
    /// Comma-separated solvers: closed-form, quadratic, bisection.
    #[arg(long)]
    methods: Option<String>,
}

#[derive(Debug, Args)]
struct SolvePowerArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Target rate in npcu the slot must carry.
    #[arg(long)]
    rate: f64,
    /// Channel gain the power acts through.
    #[arg(long, default_value_t = 1.0)]
    g1: f64,
    /// Comma-separated solvers: closed-form, bisection.
    #[arg(long)]
    methods: Option<String>,
}

#[derive(Debug, Args)]
struct SelftestArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Random evaluation points per comparison grid.
    #[arg(long, default_value_t = 1000)]
    points: usize,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Cmd::Fig2(args) => run_fig(Experiment::Fig2RateVsPower, args),
        Cmd::Fig3a(args) => run_fig(Experiment::Fig3aRateVsL, args),
        Cmd::Fig3b(args) => run_fig(Experiment::Fig3bRateVsTheta, args),
        Cmd::Fig4(args) => run_fig(Experiment::Fig4PowerVsRate, args),
        Cmd::Fig5(args) => run_fig(Experiment::Fig5PowerVsL, args),
        Cmd::Fig6(args) => run_fig(Experiment::Fig6PowerVsLFixedK, args),
        Cmd::SolveRate(args) => run_solve_rate(args),
        Cmd::SolvePower(args) => run_solve_power(args),
        Cmd::Selftest(args) => run_selftest_cmd(args),
    }
}

fn env_seed() -> Result<Option<u64>> {
    parse_env_seed(std::env::var("NOMA_HARQ_SEED").ok().as_deref())
}

fn run_fig(experiment: Experiment, args: FigArgs) -> Result<()> {
    let extra = Settings {
        k: args.k,
        rate: args.rate,
        grid: args.grid.as_deref().map(parse_grid).transpose()?,
        methods: args
            .methods
            .as_deref()
            .map(Method::parse_list)
            .transpose()?,
        workers: args.workers,
        out: args.out,
        ..Settings::default()
    };
    let settings = args.common.merged_settings(extra)?;
    let spec = resolve_spec(experiment, &settings, env_seed()?)?;
    let result = match settings.workers {
        Some(workers) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .context("building the worker pool")?;
            pool.install(|| run_sweep(&spec))?
        }
        None => run_sweep(&spec)?,
    };
    match &settings.out {
        Some(path) => write_csv_file(&result, path),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            emit_csv(&result, &mut lock)?;
            lock.flush()?;
            Ok(())
        }
    }
}

fn run_solve_rate(args: SolveRateArgs) -> Result<()> {
    let settings = args.common.merged_settings(Settings::default())?;
    let spec = resolve_spec(Experiment::Fig2RateVsPower, &settings, env_seed()?)?;
    let b = &spec.base;
    let methods: Vec<(&str, RateMethod)> = match &args.methods {
        None => vec![
            ("closed-form", RateMethod::ClosedFormQinv),
            ("quadratic", RateMethod::ClosedFormQuadratic),
            ("bisection", RateMethod::Bisection),
        ],
        Some(text) => text
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| match t {
                "closed-form" => Ok(("closed-form", RateMethod::ClosedFormQinv)),
                "quadratic" => Ok(("quadratic", RateMethod::ClosedFormQuadratic)),
                "bisection" => Ok(("bisection", RateMethod::Bisection)),
                other => bail!(
                    "unknown rate method {other:?} (expected closed-form, \
                     quadratic, or bisection)"
                ),
            })
            .collect::<Result<_>>()?,
    };
    let sinr = args.g1 * db_to_linear(b.p1_db) / (1.0 + args.g2 * db_to_linear(b.p2_db));
    println!(
        "rate allocation: l={} theta1={:e} g1={:e} g2={:e} sinr={:.6e}",
        b.l, b.theta1, args.g1, args.g2, sinr
    );
    for (name, method) in methods {
        match solve_rate(
            b.l,
            Probability::new(b.theta1),
            SinrValue::new(sinr),
            method,
        ) {
            Ok(sol) => println!(
                "  {name:<12} rate {:.12} npcu  (residual {:.3e})",
                sol.rate, sol.residual
            ),
            Err(e) => println!("  {name:<12} infeasible: {e}"),
        }
    }
    Ok(())
}

fn run_solve_power(args: SolvePowerArgs) -> Result<()> {
    let settings = args.common.merged_settings(Settings::default())?;
    let spec = resolve_spec(Experiment::Fig2RateVsPower, &settings, env_seed()?)?;
    let b = &spec.base;
    let methods: Vec<(&str, PowerMethod)> = match &args.methods {
        None => vec![
            ("closed-form", PowerMethod::ClosedFormLambertW),
            ("bisection", PowerMethod::Bisection),
        ],
        Some(text) => text
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| match t {
                "closed-form" => Ok(("closed-form", PowerMethod::ClosedFormLambertW)),
                "bisection" => Ok(("bisection", PowerMethod::Bisection)),
                other => {
                    bail!("unknown power method {other:?} (expected closed-form or bisection)")
                }
            })
            .collect::<Result<_>>()?,
    };
    println!(
        "power allocation: l={} theta1={:e} rate={:e} g1={:e}",
        b.l, b.theta1, args.rate, args.g1
    );
    for (name, method) in methods {
        match solve_power(b.l, Probability::new(b.theta1), args.rate, args.g1, method) {
            Ok(sol) => println!(
                "  {name:<12} power {:.12} ({:.6} dB)  (residual {:.3e})",
                sol.power,
                linear_to_db(sol.power),
                sol.residual
            ),
            Err(e) => println!("  {name:<12} infeasible: {e}"),
        }
    }
    Ok(())
}

fn run_selftest_cmd(args: SelftestArgs) -> Result<()> {
    let settings = args.common.merged_settings(Settings::default())?;
    let seed = settings.seed.or(env_seed()?).unwrap_or(42);
    let report = run_selftest(args.points, seed);
    print!("{}", report.render());
    if !report.all_passed() {
        bail!("closed-form cross-validation failed");
    }
    Ok(())
}
