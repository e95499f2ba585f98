//! Experiment orchestration: resolves run settings from flags, config
//! files, and the environment; sweeps the figure experiments across their
//! axes by dispatching to the analytic and Monte Carlo backends; and emits
//! deterministic CSV.
//!
//! The CSV contract: a `# meta:` block (sorted `key=value` lines carrying
//! the fully resolved configuration, a 16-hex-digit configuration hash,
//! and the package version) precedes the header; every float is rendered
//! with 17 significant digits; identical resolved settings produce
//! byte-identical files regardless of worker count. Per-point solver
//! failures render as `NaN` cells and never abort a sweep.
//!
//! # Example
//!
//! ```
//! use noma_harq_cli::{emit_csv, resolve_spec, run_sweep, Experiment, Method, Settings};
//!
//! let settings = Settings {
//!     trials: Some(500),
//!     grid: Some(vec![1e-3, 1e-2]),
//!     methods: Some(vec![Method::ClosedForm]),
//!     ..Settings::default()
//! };
//! let spec = resolve_spec(Experiment::Fig3bRateVsTheta, &settings, None).unwrap();
//! let result = run_sweep(&spec).unwrap();
//! let mut csv = Vec::new();
//! emit_csv(&result, &mut csv).unwrap();
//! let text = String::from_utf8(csv).unwrap();
//! assert!(text.starts_with("# meta: config_hash="));
//! assert!(text.contains("theta,standard_closed_form,proposed_closed_form"));
//! ```

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use noma_harq_core::allocation::{solve_power, solve_rate, PowerMethod, RateMethod};
use noma_harq_core::errormodel::{CodeParams, SinrValue};
use noma_harq_core::expectation::{
    expected_power_ue1_slot2, expected_power_ue1_slot2_mc, expected_rate_ue1_slot1,
    expected_rate_ue1_slot2, ExpectationMethod,
};
use noma_harq_core::fading::{db_to_linear, sample_gains, FadingParams, LinkConfig};
use noma_harq_core::numerics::{integrate, RunningMoments};
use noma_harq_core::simengine::{run_batch, Adaptation, SchemePolicy, SchemeVariant};
use noma_harq_core::specfun::Probability;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

// ---------------------------------------------------------------------------
// Experiments and methods
// ---------------------------------------------------------------------------

/// The study sweeps, one per figure command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    /// Expected cell-center rates vs the common transmit power in dB.
    Fig2RateVsPower,
    /// Expected cell-center rates vs codeword length at fixed power.
    Fig3aRateVsL,
    /// Expected cell-center rates vs the common error budget.
    Fig3bRateVsTheta,
    /// Expected retransmission-slot power vs the target rate.
    Fig4PowerVsRate,
    /// Expected retransmission-slot power vs codeword length, fixed rate.
    Fig5PowerVsL,
    /// Expected retransmission-slot power vs codeword length at a fixed
    /// payload of `K` information nats, so the rate is `K / L` per point.
    Fig6PowerVsLFixedK,
}

impl Experiment {
    /// The subcommand spelling, also recorded in the CSV meta block.
    pub fn command_name(self) -> &'static str {
        match self {
            Experiment::Fig2RateVsPower => "fig2",
            Experiment::Fig3aRateVsL => "fig3a",
            Experiment::Fig3bRateVsTheta => "fig3b",
            Experiment::Fig4PowerVsRate => "fig4",
            Experiment::Fig5PowerVsL => "fig5",
            Experiment::Fig6PowerVsLFixedK => "fig6",
        }
    }

    /// Name of the CSV axis column.
    pub fn axis_name(self) -> &'static str {
        match self {
            Experiment::Fig2RateVsPower => "p_db",
            Experiment::Fig3aRateVsL
            | Experiment::Fig5PowerVsL
            | Experiment::Fig6PowerVsLFixedK => "l",
            Experiment::Fig3bRateVsTheta => "theta",
            Experiment::Fig4PowerVsRate => "rate",
        }
    }

    /// Whether the sweep reports expected powers rather than rates.
    pub fn is_power_experiment(self) -> bool {
        matches!(
            self,
            Experiment::Fig4PowerVsRate | Experiment::Fig5PowerVsL | Experiment::Fig6PowerVsLFixedK
        )
    }

    /// The axis grid used when none is configured.
    pub fn default_grid(self) -> Vec<f64> {
        match self {
            Experiment::Fig2RateVsPower => arithmetic_grid(10.0, 5.0, 50.0),
            Experiment::Fig3aRateVsL
            | Experiment::Fig5PowerVsL
            | Experiment::Fig6PowerVsLFixedK => vec![
                100.0, 200.0, 300.0, 500.0, 700.0, 1000.0, 1500.0, 2000.0, 3000.0, 5000.0,
            ],
            Experiment::Fig3bRateVsTheta => vec![1e-5, 1e-4, 1e-3, 1e-2, 1e-1],
            Experiment::Fig4PowerVsRate => arithmetic_grid(0.5, 0.25, 3.0),
        }
    }

    /// The estimation methods used when none are configured.
    pub fn default_methods(self) -> Vec<Method> {
        if self.is_power_experiment() {
            vec![Method::ClosedForm, Method::Quadrature, Method::MonteCarlo]
        } else {
            vec![
                Method::ClosedForm,
                Method::Quadrature,
                Method::MonteCarlo,
                Method::LinearizedQ,
            ]
        }
    }
}

/// Inclusive arithmetic progression `start, start+step, ..., stop`.
fn arithmetic_grid(start: f64, step: f64, stop: f64) -> Vec<f64> {
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    (0..count).map(|i| start + step * i as f64).collect()
}

/// How a curve is estimated. Declaration order is column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    /// Exact analytic expectation.
    ClosedForm,
    /// Independent numerical integration of the same expectation.
    Quadrature,
    /// Seeded Monte Carlo over the fading (for rate experiments, through
    /// the full protocol engine).
    MonteCarlo,
    /// Monte Carlo over the fading with per-draw rates from the
    /// linearized-decay approximation; rate experiments only.
    LinearizedQ,
}

impl Method {
    /// CSV column suffix.
    pub fn column_suffix(self) -> &'static str {
        match self {
            Method::ClosedForm => "closed_form",
            Method::Quadrature => "quadrature",
            Method::MonteCarlo => "monte_carlo",
            Method::LinearizedQ => "linearized_q",
        }
    }

    /// Whether the estimate carries a standard error and an infeasible
    /// fraction.
    pub fn is_stochastic(self) -> bool {
        matches!(self, Method::MonteCarlo | Method::LinearizedQ)
    }

    /// Parses one method token in its command-line spelling.
    pub fn parse(token: &str) -> Result<Method> {
        match token {
            "closed-form" => Ok(Method::ClosedForm),
            "quadrature" => Ok(Method::Quadrature),
            "monte-carlo" => Ok(Method::MonteCarlo),
            "linearized-q" => Ok(Method::LinearizedQ),
            other => bail!(
                "unknown method {other:?} (expected closed-form, quadrature, \
                 monte-carlo, or linearized-q)"
            ),
        }
    }

    /// Parses a comma-separated method list; duplicates collapse and the
    /// result is ordered canonically. An empty string is a valid empty set.
    pub fn parse_list(text: &str) -> Result<Vec<Method>> {
        let mut methods = text
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(Method::parse)
            .collect::<Result<Vec<_>>>()?;
        methods.sort();
        methods.dedup();
        Ok(methods)
    }
}

// ---------------------------------------------------------------------------
// Settings resolution
// ---------------------------------------------------------------------------

/// One layer of run settings. Every field is optional; layers combine with
/// [`Settings::or`] (flags over config file), and [`resolve_spec`] fills
/// the remaining holes with the study defaults.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub l: Option<u32>,
    pub theta1: Option<f64>,
    pub theta2: Option<f64>,
    pub p1_db: Option<f64>,
    pub p2_db: Option<f64>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub k: Option<f64>,
    pub rate: Option<f64>,
    pub grid: Option<Vec<f64>>,
    pub methods: Option<Vec<Method>>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

impl Settings {
    /// Parses a flat `key=value` config file. `#` starts a comment; blank
    /// lines are skipped; unknown keys are rejected.
    pub fn from_config_text(text: &str) -> Result<Self> {
        let mut s = Settings::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("line {}: expected key=value, got {raw:?}", idx + 1))?;
            let key = key.trim();
            let value = value.trim();
            let ctx = || format!("line {}: invalid value for {key}", idx + 1);
            match key {
                "l" => s.l = Some(value.parse().with_context(ctx)?),
                "theta1" => s.theta1 = Some(value.parse().with_context(ctx)?),
                "theta2" => s.theta2 = Some(value.parse().with_context(ctx)?),
                "p1_db" => s.p1_db = Some(value.parse().with_context(ctx)?),
                "p2_db" => s.p2_db = Some(value.parse().with_context(ctx)?),
                "lambda1" => s.lambda1 = Some(value.parse().with_context(ctx)?),
                "lambda2" => s.lambda2 = Some(value.parse().with_context(ctx)?),
                "trials" => s.trials = Some(value.parse().with_context(ctx)?),
                "seed" => s.seed = Some(value.parse().with_context(ctx)?),
                "k" => s.k = Some(value.parse().with_context(ctx)?),
                "rate" => s.rate = Some(value.parse().with_context(ctx)?),
                "grid" => s.grid = Some(parse_grid(value).with_context(ctx)?),
                "methods" => s.methods = Some(Method::parse_list(value).with_context(ctx)?),
                "workers" => s.workers = Some(value.parse().with_context(ctx)?),
                "out" => s.out = Some(PathBuf::from(value)),
                other => bail!("line {}: unknown config key {other:?}", idx + 1),
            }
        }
        Ok(s)
    }

    /// Field-wise precedence merge: `self` wins, `weaker` fills holes.
    pub fn or(self, weaker: Settings) -> Settings {
        Settings {
            l: self.l.or(weaker.l),
            theta1: self.theta1.or(weaker.theta1),
            theta2: self.theta2.or(weaker.theta2),
            p1_db: self.p1_db.or(weaker.p1_db),
            p2_db: self.p2_db.or(weaker.p2_db),
            lambda1: self.lambda1.or(weaker.lambda1),
            lambda2: self.lambda2.or(weaker.lambda2),
            trials: self.trials.or(weaker.trials),
            seed: self.seed.or(weaker.seed),
            k: self.k.or(weaker.k),
            rate: self.rate.or(weaker.rate),
            grid: self.grid.or(weaker.grid),
            methods: self.methods.or(weaker.methods),
            workers: self.workers.or(weaker.workers),
            out: self.out.or(weaker.out),
        }
    }
}

/// Parses the `NOMA_HARQ_SEED` environment value, when present.
pub fn parse_env_seed(value: Option<&str>) -> Result<Option<u64>> {
    match value {
        None => Ok(None),
        Some(v) => Ok(Some(v.trim().parse().with_context(|| {
            format!("NOMA_HARQ_SEED must be an unsigned integer, got {v:?}")
        })?)),
    }
}

/// Parses an axis grid: either an inclusive `start:step:stop` range or a
/// comma-separated value list.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    ensure!(!text.is_empty(), "empty grid");
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        ensure!(
            parts.len() == 3,
            "grid ranges are start:step:stop, got {text:?}"
        );
        let start: f64 = parts[0].trim().parse().context("grid start")?;
        let step: f64 = parts[1].trim().parse().context("grid step")?;
        let stop: f64 = parts[2].trim().parse().context("grid stop")?;
        ensure!(
            start.is_finite() && step.is_finite() && stop.is_finite() && step != 0.0,
            "grid range must be finite with a nonzero step"
        );
        ensure!(
            (stop - start) / step >= 0.0,
            "grid range never reaches its stop value"
        );
        Ok(arithmetic_grid(start, step, stop))
    } else {
        text.split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .with_context(|| format!("grid value {p:?}"))
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Sweep specification
// ---------------------------------------------------------------------------

/// Fully resolved scalar parameters shared by every grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseParams {
    pub l: u32,
    pub theta1: f64,
    pub theta2: f64,
    pub p1_db: f64,
    pub p2_db: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub trials: u64,
    pub seed: u64,
}

/// A validated, fully resolved sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub experiment: Experiment,
    pub base: BaseParams,
    /// Ordered axis grid.
    pub grid: Vec<f64>,
    /// Estimation methods, in canonical column order. May be empty.
    pub methods: Vec<Method>,
    /// Information nats per codeword (power-vs-length sweeps at fixed
    /// payload only).
    pub info_nats: Option<f64>,
    /// Fixed target rate (power-vs-length sweeps at fixed rate only).
    pub target_rate: Option<f64>,
}

/// Applies the study defaults on top of the merged settings layers and
/// validates the result. Seed precedence: settings (flag or file), then
/// the environment fallback, then 42.
pub fn resolve_spec(
    experiment: Experiment,
    settings: &Settings,
    env_seed: Option<u64>,
) -> Result<SweepSpec> {
    let default_p2 = match experiment {
        Experiment::Fig4PowerVsRate | Experiment::Fig6PowerVsLFixedK => 40.0,
        _ => 30.0,
    };
    let base = BaseParams {
        l: settings.l.unwrap_or(1000),
        theta1: settings.theta1.unwrap_or(1e-3),
        theta2: settings.theta2.unwrap_or(1e-3),
        p1_db: settings.p1_db.unwrap_or(30.0),
        p2_db: settings.p2_db.unwrap_or(default_p2),
        lambda1: settings.lambda1.unwrap_or(0.1),
        lambda2: settings.lambda2.unwrap_or(1.0),
        trials: settings.trials.unwrap_or(100_000),
        seed: settings.seed.or(env_seed).unwrap_or(42),
    };
    let spec = SweepSpec {
        experiment,
        base,
        grid: settings
            .grid
            .clone()
            .unwrap_or_else(|| experiment.default_grid()),
        methods: settings
            .methods
            .clone()
            .unwrap_or_else(|| experiment.default_methods()),
        info_nats: match experiment {
            Experiment::Fig6PowerVsLFixedK => Some(settings.k.unwrap_or(100.0)),
            _ => None,
        },
        target_rate: match experiment {
            Experiment::Fig5PowerVsL => Some(settings.rate.unwrap_or(2.0)),
            _ => None,
        },
    };
    spec.validate()?;
    Ok(spec)
}

impl SweepSpec {
    /// Checks every structural invariant the sweep engine relies on.
    pub fn validate(&self) -> Result<()> {
        let b = &self.base;
        ensure!(b.l >= 100, "blocklength must be at least 100, got {}", b.l);
        for (name, theta) in [("theta1", b.theta1), ("theta2", b.theta2)] {
            ensure!(
                theta > 0.0 && theta <= 0.5,
                "{name} must lie in (0, 0.5], got {theta}"
            );
        }
        for (name, lambda) in [("lambda1", b.lambda1), ("lambda2", b.lambda2)] {
            ensure!(
                lambda.is_finite() && lambda > 0.0,
                "{name} must be finite and positive, got {lambda}"
            );
        }
        ensure!(
            b.p1_db.is_finite() && b.p2_db.is_finite(),
            "transmit powers must be finite"
        );
        ensure!(b.trials >= 1, "trials must be at least 1");
        ensure!(!self.grid.is_empty(), "grid is empty");
        let increasing = self.grid.windows(2).all(|w| w[0] < w[1]);
        let decreasing = self.grid.windows(2).all(|w| w[0] > w[1]);
        ensure!(
            increasing || decreasing,
            "grid must be strictly monotone: {:?}",
            self.grid
        );
        match self.experiment {
            Experiment::Fig2RateVsPower => {
                for &v in &self.grid {
                    ensure!(v.is_finite(), "power grid value must be finite, got {v}");
                }
            }
            Experiment::Fig3aRateVsL
            | Experiment::Fig5PowerVsL
            | Experiment::Fig6PowerVsLFixedK => {
                for &v in &self.grid {
                    ensure!(
                        (v - v.round()).abs() <= 1e-6 && v.round() >= 100.0 && v <= u32::MAX as f64,
                        "blocklength grid values must be integers of at least 100, got {v}"
                    );
                }
            }
            Experiment::Fig3bRateVsTheta => {
                for &v in &self.grid {
                    ensure!(
                        v > 0.0 && v <= 0.5,
                        "error-budget grid values must lie in (0, 0.5], got {v}"
                    );
                }
            }
            Experiment::Fig4PowerVsRate => {
                for &v in &self.grid {
                    ensure!(
                        v.is_finite() && v > 0.0,
                        "rate grid values must be positive, got {v}"
                    );
                }
            }
        }
        if self.experiment == Experiment::Fig6PowerVsLFixedK {
            let k = self
                .info_nats
                .context("the fixed-payload sweep needs a positive k")?;
            ensure!(k.is_finite() && k > 0.0, "k must be positive, got {k}");
        }
        if self.experiment == Experiment::Fig5PowerVsL {
            let r = self
                .target_rate
                .context("the fixed-rate power sweep needs a positive rate")?;
            ensure!(r.is_finite() && r > 0.0, "rate must be positive, got {r}");
        }
        if self.experiment.is_power_experiment() && self.methods.contains(&Method::LinearizedQ) {
            bail!("the linearized-q method applies only to rate experiments");
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Sweep execution
// ---------------------------------------------------------------------------

/// One estimate: the value, plus spread and exclusion metadata for
/// stochastic methods. Failures are `NaN` values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveCell {
    pub value: f64,
    pub se: Option<f64>,
    pub infeasible: Option<f64>,
}

/// One grid point: the axis value and a cell per value column.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis: f64,
    pub cells: Vec<CurveCell>,
}

/// A finished sweep, ready for CSV emission.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis_name: String,
    /// Value column names paired with whether they carry `_se` and
    /// `_infeasible` companions.
    pub value_columns: Vec<(String, bool)>,
    pub rows: Vec<SweepRow>,
    /// Sorted `key=value` metadata emitted ahead of the header.
    pub meta: Vec<(String, String)>,
}

/// Runs the sweep point by point. Per-point estimation failures become
/// `NaN` cells; the sweep itself only fails on an invalid spec.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let mut value_columns = Vec::with_capacity(2 * spec.methods.len());
    for &method in &spec.methods {
        for curve in ["standard", "proposed"] {
            value_columns.push((
                format!("{curve}_{}", method.column_suffix()),
                method.is_stochastic(),
            ));
        }
    }
    let mut rows = Vec::with_capacity(spec.grid.len());
    for (index, &axis) in spec.grid.iter().enumerate() {
        let point_seed = spec.base.seed.wrapping_add(index as u64);
        let (cfg, target) = point_setup(spec, axis);
        let mut cells = Vec::with_capacity(value_columns.len());
        for &method in &spec.methods {
            if spec.experiment.is_power_experiment() {
                for scheme in [
                    SchemeVariant::StandardNomaHarq,
                    SchemeVariant::ProposedOrderSwap,
                ] {
                    cells.push(power_cell(
                        &cfg,
                        method,
                        scheme,
                        target,
                        spec.base.trials,
                        point_seed,
                    ));
                }
            } else if method == Method::LinearizedQ {
                let (standard, proposed) = linearized_rate_pair(&cfg, spec.base.trials, point_seed);
                cells.push(standard);
                cells.push(proposed);
            } else {
                for scheme in [
                    SchemeVariant::StandardNomaHarq,
                    SchemeVariant::ProposedOrderSwap,
                ] {
                    cells.push(rate_cell(
                        &cfg,
                        method,
                        scheme,
                        spec.base.trials,
                        point_seed,
                    ));
                }
            }
        }
        rows.push(SweepRow { axis, cells });
    }
    Ok(SweepResult {
        axis_name: spec.experiment.axis_name().to_owned(),
        value_columns,
        rows,
        meta: build_meta(spec),
    })
}

/// Builds the per-point link configuration and, for power experiments, the
/// target rate the retransmission slot must carry.
fn point_setup(spec: &SweepSpec, axis: f64) -> (LinkConfig, f64) {
    let b = &spec.base;
    let (l, theta1, theta2, p1_db, p2_db, target) = match spec.experiment {
        Experiment::Fig2RateVsPower => (b.l, b.theta1, b.theta2, axis, axis, 1.0),
        Experiment::Fig3aRateVsL => (
            axis.round() as u32,
            b.theta1,
            b.theta2,
            b.p1_db,
            b.p2_db,
            1.0,
        ),
        Experiment::Fig3bRateVsTheta => (b.l, axis, axis, b.p1_db, b.p2_db, 1.0),
        Experiment::Fig4PowerVsRate => (b.l, b.theta1, b.theta2, b.p1_db, b.p2_db, axis),
        Experiment::Fig5PowerVsL => (
            axis.round() as u32,
            b.theta1,
            b.theta2,
            b.p1_db,
            b.p2_db,
            spec.target_rate.expect("validated"),
        ),
        Experiment::Fig6PowerVsLFixedK => (
            axis.round() as u32,
            b.theta1,
            b.theta2,
            b.p1_db,
            b.p2_db,
            spec.info_nats.expect("validated") / axis,
        ),
    };
    let code_rate = if spec.experiment.is_power_experiment() {
        target
    } else {
        1.0
    };
    let code = CodeParams::new(l, code_rate);
    let cfg = LinkConfig::new(
        FadingParams::new(b.lambda1, b.lambda2),
        db_to_linear(p1_db),
        db_to_linear(p2_db),
        code,
        code,
        theta1,
        theta2,
    );
    (cfg, target)
}

fn nan_cell() -> CurveCell {
    CurveCell {
        value: f64::NAN,
        se: None,
        infeasible: None,
    }
}

/// Expected cell-center rate: slot-one expectation for the standard
/// curve (its retransmission slot repeats the slot-one allocation),
/// slot-two expectation for the proposed curve.
fn rate_cell(
    cfg: &LinkConfig,
    method: Method,
    scheme: SchemeVariant,
    trials: u64,
    seed: u64,
) -> CurveCell {
    match method {
        Method::ClosedForm | Method::Quadrature => {
            let m = if method == Method::ClosedForm {
                ExpectationMethod::ClosedForm
            } else {
                ExpectationMethod::Quadrature
            };
            let outcome = match scheme {
                SchemeVariant::StandardNomaHarq => expected_rate_ue1_slot1(cfg, m),
                SchemeVariant::ProposedOrderSwap => expected_rate_ue1_slot2(cfg, m),
            };
            match outcome {
                Ok(e) => CurveCell {
                    value: e.value,
                    se: None,
                    infeasible: None,
                },
                Err(_) => nan_cell(),
            }
        }
        Method::MonteCarlo => {
            let stats = run_batch(
                cfg,
                SchemePolicy {
                    scheme,
                    adaptation: Adaptation::RateAdapt,
                },
                trials,
                seed,
            );
            let value = if stats.ue1_slot2_trials == 0 {
                f64::NAN
            } else {
                stats.mean_rate_ue1_slot2()
            };
            CurveCell {
                value,
                se: Some(stats.se_rate_ue1_slot2()),
                infeasible: Some(stats.ue1_infeasible_trials as f64 / stats.trials as f64),
            }
        }
        Method::LinearizedQ => unreachable!("handled pairwise by the caller"),
    }
}

/// Both linearized-approximation curves from one pass over shared gain
/// draws: the standard curve re-solves at the interference-limited SINR,
/// the proposed curve at the clean SINR of the retransmission slot.
fn linearized_rate_pair(cfg: &LinkConfig, trials: u64, seed: u64) -> (CurveCell, CurveCell) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let theta1 = Probability::new(cfg.theta1());
    let l = cfg.code1().blocklength();
    let mut standard = RunningMoments::new();
    let mut proposed = RunningMoments::new();
    let mut standard_infeasible = 0u64;
    let mut proposed_infeasible = 0u64;
    for _ in 0..trials {
        let draw = sample_gains(cfg.fading(), &mut rng);
        let clean = draw.g1 * cfg.p1();
        let interfered = clean / (1.0 + draw.g2 * cfg.p2());
        match solve_rate(
            l,
            theta1,
            SinrValue::new(interfered),
            RateMethod::ClosedFormQuadratic,
        ) {
            Ok(sol) => standard.push(sol.rate),
            Err(_) => standard_infeasible += 1,
        }
        match solve_rate(
            l,
            theta1,
            SinrValue::new(clean),
            RateMethod::ClosedFormQuadratic,
        ) {
            Ok(sol) => proposed.push(sol.rate),
            Err(_) => proposed_infeasible += 1,
        }
    }
    let cell = |moments: &RunningMoments, infeasible: u64| CurveCell {
        value: if moments.count() == 0 {
            f64::NAN
        } else {
            moments.mean()
        },
        se: Some(moments.std_error_of_mean()),
        infeasible: Some(infeasible as f64 / trials as f64),
    };
    (
        cell(&standard, standard_infeasible),
        cell(&proposed, proposed_infeasible),
    )
}

/// Expected retransmission-slot power, reported as required received SNR.
fn power_cell(
    cfg: &LinkConfig,
    method: Method,
    scheme: SchemeVariant,
    target_rate: f64,
    trials: u64,
    seed: u64,
) -> CurveCell {
    match method {
        Method::ClosedForm => CurveCell {
            value: expected_power_ue1_slot2(cfg, scheme, target_rate).value,
            se: None,
            infeasible: None,
        },
        Method::Quadrature => {
            let solved = solve_power(
                cfg.code1().blocklength(),
                Probability::new(cfg.theta1()),
                target_rate,
                1.0,
                PowerMethod::ClosedFormLambertW,
            );
            let Ok(sol) = solved else { return nan_cell() };
            let u_star = sol.power;
            let value = match scheme {
                // The required received SNR does not depend on the fading,
                // so its average over the density is the point value.
                SchemeVariant::ProposedOrderSwap => u_star,
                SchemeVariant::StandardNomaHarq => {
                    let lambda2 = cfg.fading().lambda2();
                    let p2 = cfg.p2();
                    let cutoff = 80.0 / lambda2;
                    let factor = integrate(
                        |g| (1.0 + g * p2) * lambda2 * (-lambda2 * g).exp(),
                        0.0,
                        cutoff,
                        1e-8,
                    )
                    .value;
                    u_star * factor
                }
            };
            CurveCell {
                value,
                se: None,
                infeasible: None,
            }
        }
        Method::MonteCarlo => {
            let e = expected_power_ue1_slot2_mc(cfg, scheme, target_rate, trials, seed);
            CurveCell {
                value: e.value,
                se: Some(e.std_error),
                infeasible: Some(e.infeasible_fraction),
            }
        }
        Method::LinearizedQ => unreachable!("rejected by validation"),
    }
}

// ---------------------------------------------------------------------------
// CSV emission
// ---------------------------------------------------------------------------

/// Renders a float with 17 significant digits, enough to round-trip f64.
fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn build_meta(spec: &SweepSpec) -> Vec<(String, String)> {
    let b = &spec.base;
    let mut meta: BTreeMap<String, String> = BTreeMap::new();
    meta.insert("experiment".into(), spec.experiment.command_name().into());
    meta.insert("l".into(), b.l.to_string());
    meta.insert("theta1".into(), fmt_float(b.theta1));
    meta.insert("theta2".into(), fmt_float(b.theta2));
    meta.insert("p1_db".into(), fmt_float(b.p1_db));
    meta.insert("p2_db".into(), fmt_float(b.p2_db));
    meta.insert("lambda1".into(), fmt_float(b.lambda1));
    meta.insert("lambda2".into(), fmt_float(b.lambda2));
    meta.insert("trials".into(), b.trials.to_string());
    meta.insert("seed".into(), b.seed.to_string());
    meta.insert(
        "grid".into(),
        spec.grid
            .iter()
            .map(|&x| fmt_float(x))
            .collect::<Vec<_>>()
            .join(","),
    );
    meta.insert(
        "methods".into(),
        spec.methods
            .iter()
            .map(|m| m.column_suffix())
            .collect::<Vec<_>>()
            .join(","),
    );
    if let Some(k) = spec.info_nats {
        meta.insert("k".into(), fmt_float(k));
    }
    if let Some(rate) = spec.target_rate {
        meta.insert("rate".into(), fmt_float(rate));
    }
    meta.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    let mut hasher = Sha256::new();
    for (key, value) in &meta {
        hasher.update(key.as_bytes());
        hasher.update(b"=");
        hasher.update(value.as_bytes());
        hasher.update(b"\n");
    }
    let digest = hasher.finalize();
    let hash: String = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();
    meta.insert("config_hash".into(), hash);
    meta.into_iter().collect()
}

/// Writes the sweep as CSV: the sorted `# meta:` block, the header, then
/// one row per grid point. Stochastic columns are followed by their `_se`
/// and `_infeasible` companions, grouped after all value columns.
pub fn emit_csv<W: Write>(result: &SweepResult, out: &mut W) -> std::io::Result<()> {
    for (key, value) in &result.meta {
        writeln!(out, "# meta: {key}={value}")?;
    }
    let mut header = Vec::with_capacity(1 + 3 * result.value_columns.len());
    header.push(result.axis_name.clone());
    for (name, _) in &result.value_columns {
        header.push(name.clone());
    }
    for (name, stochastic) in &result.value_columns {
        if *stochastic {
            header.push(format!("{name}_se"));
        }
    }
    for (name, stochastic) in &result.value_columns {
        if *stochastic {
            header.push(format!("{name}_infeasible"));
        }
    }
    writeln!(out, "{}", header.join(","))?;
    for row in &result.rows {
        let mut fields = Vec::with_capacity(header.len());
        fields.push(fmt_float(row.axis));
        for cell in &row.cells {
            fields.push(fmt_float(cell.value));
        }
        for (cell, (_, stochastic)) in row.cells.iter().zip(&result.value_columns) {
            if *stochastic {
                fields.push(fmt_float(cell.se.unwrap_or(f64::NAN)));
            }
        }
        for (cell, (_, stochastic)) in row.cells.iter().zip(&result.value_columns) {
            if *stochastic {
                fields.push(fmt_float(cell.infeasible.unwrap_or(f64::NAN)));
            }
        }
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}

/// Emits the CSV to a file, reporting the path on failure.
pub fn write_csv_file(result: &SweepResult, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    emit_csv(result, &mut buf).expect("in-memory CSV emission cannot fail");
    std::fs::write(path, &buf).with_context(|| format!("writing CSV to {}", path.display()))
}
