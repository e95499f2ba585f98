//! Randomized cross-validation of every closed form against an
//! independent numerical oracle.
//!
//! Each solver in this crate has two faces: an algebraic closed form used
//! in production and a defining equation it claims to invert. This module
//! re-solves the defining equations with its *own* plain bisection (not
//! the solvers' internal one) or with adaptive quadrature, over randomized
//! parameter grids, and reports the worst relative disagreement.
//!
//! The report also carries a set of diagnostics: every closed form here
//! has nearby algebraic variants — a sign flipped under an
//! exponential-integral identity, the conjugate root of the quadratic, a
//! mirrored exponent inside the Lambert-W argument — that look plausible
//! but are wrong. The diagnostics evaluate those neighbor forms and log
//! how far off they are, so a future "simplification" that lands on one
//! of them is caught by a glance at the report (their residuals must stay
//! large) rather than by a downstream regression.

use crate::allocation::{solve_power, solve_rate, LinearizedQParams, PowerMethod, RateMethod};
use crate::errormodel::{fbl_error, CodeParams, SinrValue};
use crate::expectation::{expected_rate_ue1_slot1, expected_rate_ue1_slot2, ExpectationMethod};
use crate::fading::{FadingParams, LinkConfig};
use crate::specfun::{gaussian_q_inv, gaussian_q_raw, lambert_w, scaled_e1, Probability, WBranch};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Relative tolerance every closed-form-vs-oracle grid must meet.
pub const GRID_TOLERANCE: f64 = 1e-6;

/// Rates below this are considered degenerate for relative comparison and
/// their draws are resampled.
const MIN_COMPARABLE: f64 = 1e-2;

/// Outcome of one randomized cross-validation grid.
#[derive(Debug, Clone)]
pub struct GridCheck {
    /// What was compared.
    pub name: &'static str,
    /// Accepted (non-degenerate) points evaluated.
    pub points: usize,
    /// Worst relative disagreement observed.
    pub max_rel_error: f64,
    /// Tolerance the grid is held to.
    pub tolerance: f64,
}

impl GridCheck {
    /// Whether the grid met its tolerance.
    pub fn passed(&self) -> bool {
        self.max_rel_error <= self.tolerance
    }
}

/// Residual of a deliberately wrong neighbor form, logged for regression
/// tripwiring; these are expected to stay large.
#[derive(Debug, Clone)]
pub struct AltFormResidual {
    /// Which neighbor form was evaluated.
    pub name: &'static str,
    /// Its relative deviation from the trusted oracle value.
    pub residual: f64,
}

/// Full cross-validation report.
#[derive(Debug, Clone)]
pub struct SelftestReport {
    /// Seed the grids were drawn from.
    pub seed: u64,
    /// Points requested per grid.
    pub points_per_grid: usize,
    /// The five closed-form-vs-oracle grids.
    pub checks: Vec<GridCheck>,
    /// Neighbor-form tripwire residuals.
    pub diagnostics: Vec<AltFormResidual>,
}

impl SelftestReport {
    /// True iff every grid met its tolerance.
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(GridCheck::passed)
    }

    /// Human-readable rendering, one line per check plus the diagnostics.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "closed-form cross-validation: {} points per grid, seed {}\n",
            self.points_per_grid, self.seed
        ));
        for check in &self.checks {
            out.push_str(&format!(
                "  {}  {:<58} max rel err {:9.3e} (tol {:.0e}, {} points)\n",
                if check.passed() { "PASS" } else { "FAIL" },
                check.name,
                check.max_rel_error,
                check.tolerance,
                check.points,
            ));
        }
        out.push_str(
            "  alt-form residuals (diagnostic; wrong-neighbor tripwires, expected large):\n",
        );
        for diag in &self.diagnostics {
            out.push_str(&format!(
                "    {:<60} rel residual {:9.3e}\n",
                diag.name, diag.residual
            ));
        }
        out.push_str(if self.all_passed() {
            "all checks passed\n"
        } else {
            "SELFTEST FAILED\n"
        });
        out
    }
}

// ---------------------------------------------------------------------------
// Independent oracles
// ---------------------------------------------------------------------------

/// Plain bisection, independent of the solvers' internal root-finding.
/// Requires `f(lo) <= 0 < f(hi)`.
fn own_bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    assert!(f(lo) <= 0.0 && f(hi) > 0.0, "own_bisect: bad bracket");
    for _ in 0..140 {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The decoding-error model solved by the plain closed form, evaluated
/// through the public error-model API.
fn error_at_rate(l: u32, rate: f64, u: f64) -> f64 {
    fbl_error(&CodeParams::new(l, rate), SinrValue::new(u)).value()
}

/// The piecewise-linear error ramp the quadratic closed form inverts.
fn ramp_at_rate(l: u32, rate: f64, u: f64) -> f64 {
    LinearizedQParams::for_code(l, rate).evaluate(u)
}

/// The power-law error curve the Lambert-W closed form inverts: the same
/// Gaussian tail with the dispersion simplified to u/(1+u). Written out
/// here from scratch so the oracle does not share the solver's code path.
fn power_curve_error(l: u32, rate: f64, u: f64) -> f64 {
    debug_assert!(u > 0.0);
    gaussian_q_raw(f64::from(l).sqrt() * (u.ln_1p() - rate) * (1.0 + u) / u)
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (rng.random::<f64>() * (hi / lo).ln() + lo.ln()).exp()
}

fn rel_err(candidate: f64, oracle: f64) -> f64 {
    (candidate - oracle).abs() / oracle.abs()
}

// ---------------------------------------------------------------------------
// Grids
// ---------------------------------------------------------------------------

fn check_rate_closed_form(points: usize, rng: &mut ChaCha12Rng) -> GridCheck {
    let mut max_rel = 0.0f64;
    let mut accepted = 0;
    while accepted < points {
        let l = rng.random_range(100..=2000);
        let theta = log_uniform(rng, 1e-6, 0.4);
        let u = log_uniform(rng, 1e-3, 1e6);
        let Ok(sol) = solve_rate(
            l,
            Probability::new(theta),
            SinrValue::new(u),
            RateMethod::ClosedFormQinv,
        ) else {
            continue;
        };
        if sol.rate < MIN_COMPARABLE {
            continue;
        }
        let oracle = own_bisect(|r| error_at_rate(l, r, u) - theta, 1e-12, u.ln_1p());
        max_rel = max_rel.max(rel_err(sol.rate, oracle));
        accepted += 1;
    }
    GridCheck {
        name: "rate allocation: closed form vs bisection on the error model",
        points: accepted,
        max_rel_error: max_rel,
        tolerance: GRID_TOLERANCE,
    }
}

fn check_quadratic_rate(points: usize, rng: &mut ChaCha12Rng) -> GridCheck {
    let mut max_rel = 0.0f64;
    let mut accepted = 0;
    while accepted < points {
        let l = rng.random_range(100..=2000);
        let theta = log_uniform(rng, 1e-6, 0.4);
        let u = log_uniform(rng, 1e-2, 1e6);
        let Ok(sol) = solve_rate(
            l,
            Probability::new(theta),
            SinrValue::new(u),
            RateMethod::ClosedFormQuadratic,
        ) else {
            continue;
        };
        if sol.rate < MIN_COMPARABLE {
            continue;
        }
        let oracle = own_bisect(|r| ramp_at_rate(l, r, u) - theta, 1e-12, u.ln_1p() + 1.0);
        max_rel = max_rel.max(rel_err(sol.rate, oracle));
        accepted += 1;
    }
    GridCheck {
        name: "ramp-model rate: quadratic closed form vs bisection on the ramp",
        points: accepted,
        max_rel_error: max_rel,
        tolerance: GRID_TOLERANCE,
    }
}

fn check_lambert_power(points: usize, rng: &mut ChaCha12Rng) -> GridCheck {
    let mut max_rel = 0.0f64;
    let mut accepted = 0;
    while accepted < points {
        let l = rng.random_range(100..=2000);
        let theta = log_uniform(rng, 1e-6, 0.4);
        let rate = log_uniform(rng, 0.05, 5.0);
        let gain = log_uniform(rng, 1e-3, 1e3);
        let sol = solve_power(
            l,
            Probability::new(theta),
            rate,
            gain,
            PowerMethod::ClosedFormLambertW,
        )
        .expect("positive rate and gain are always solvable");
        // Bracket the SNR, then bisect the defining curve directly.
        let g = |x: f64| theta - power_curve_error(l, rate, x * gain);
        let mut hi = (rate + 2.0).exp_m1() / gain;
        while g(hi) <= 0.0 {
            hi *= 2.0;
        }
        let oracle = own_bisect(g, 1e-300, hi);
        max_rel = max_rel.max(rel_err(sol.power, oracle));
        accepted += 1;
    }
    GridCheck {
        name: "power control: Lambert-W closed form vs bisection on its curve",
        points: accepted,
        max_rel_error: max_rel,
        tolerance: GRID_TOLERANCE,
    }
}

fn random_link_config<R: Rng>(rng: &mut R, need_offband_ratio: bool) -> LinkConfig {
    loop {
        let lambda1 = log_uniform(rng, 0.01, 1.0);
        let lambda2 = log_uniform(rng, 0.1, 10.0);
        let p1 = crate::fading::db_to_linear(rng.random_range(10.0..50.0));
        let p2 = crate::fading::db_to_linear(rng.random_range(10.0..50.0));
        let theta = log_uniform(rng, 1e-6, 0.4);
        let l = rng.random_range(100..=2000);
        let code = CodeParams::new(l, 1.0);
        let cfg = LinkConfig::new(
            FadingParams::new(lambda1, lambda2),
            p1,
            p2,
            code,
            code,
            theta,
            theta,
        );
        // Stay clear of the ratio-one manifold where the closed form
        // intentionally hands off to quadrature: comparing it there would
        // be vacuous.
        if need_offband_ratio && (cfg.kappa() - 1.0).abs() < 2e-3 {
            continue;
        }
        return cfg;
    }
}

fn check_expected_rate_slot1(points: usize, rng: &mut ChaCha12Rng) -> GridCheck {
    let mut max_rel = 0.0f64;
    let mut accepted = 0;
    while accepted < points {
        let cfg = random_link_config(rng, true);
        let Ok(closed) = expected_rate_ue1_slot1(&cfg, ExpectationMethod::ClosedForm) else {
            continue;
        };
        if closed.value < MIN_COMPARABLE || closed.method != ExpectationMethod::ClosedForm {
            continue;
        }
        let oracle = expected_rate_ue1_slot1(&cfg, ExpectationMethod::Quadrature)
            .expect("quadrature is feasible wherever the closed form is");
        max_rel = max_rel.max(rel_err(closed.value, oracle.value));
        accepted += 1;
    }
    GridCheck {
        name: "slot-one expected rate: closed form vs adaptive quadrature",
        points: accepted,
        max_rel_error: max_rel,
        tolerance: GRID_TOLERANCE,
    }
}

fn check_expected_rate_slot2(points: usize, rng: &mut ChaCha12Rng) -> GridCheck {
    let mut max_rel = 0.0f64;
    let mut accepted = 0;
    while accepted < points {
        let cfg = random_link_config(rng, false);
        let Ok(closed) = expected_rate_ue1_slot2(&cfg, ExpectationMethod::ClosedForm) else {
            continue;
        };
        if closed.value < MIN_COMPARABLE {
            continue;
        }
        let oracle = expected_rate_ue1_slot2(&cfg, ExpectationMethod::Quadrature)
            .expect("quadrature is feasible wherever the closed form is");
        max_rel = max_rel.max(rel_err(closed.value, oracle.value));
        accepted += 1;
    }
    GridCheck {
        name: "slot-two expected rate: closed form vs adaptive quadrature",
        points: accepted,
        max_rel_error: max_rel,
        tolerance: GRID_TOLERANCE,
    }
}

// ---------------------------------------------------------------------------
// Wrong-neighbor diagnostics
// ---------------------------------------------------------------------------

/// Reference operating point for the diagnostics: the library defaults.
fn default_config() -> LinkConfig {
    let code = CodeParams::new(1000, 1.0);
    LinkConfig::new(
        FadingParams::new(0.1, 1.0),
        1000.0,
        1000.0,
        code,
        code,
        1e-3,
        1e-3,
    )
}

fn diagnostics() -> Vec<AltFormResidual> {
    let cfg = default_config();
    let a = cfg.fading().lambda1() / cfg.p1();
    let b = cfg.fading().lambda2() / cfg.p2();
    let kappa = cfg.kappa();
    let q = gaussian_q_inv(Probability::new(cfg.theta1()))
        / f64::from(cfg.code1().blocklength()).sqrt();
    // e^x Ei(-x) for positive x, via the stable scaled form.
    let x_tilde = -scaled_e1(a);
    let y_tilde = -scaled_e1(b);
    let mut diags = Vec::new();

    // Slot-one expected rate with both brackets' signs scrambled the way
    // a careless Ei(-x) = -E1(x) substitution scrambles them.
    let slot1_oracle = expected_rate_ue1_slot1(&cfg, ExpectationMethod::Quadrature)
        .unwrap()
        .value;
    let slot1_alt = (y_tilde - x_tilde) / (kappa - 1.0)
        - q * ((a * (kappa - 1.0) + kappa) * x_tilde + kappa * y_tilde + (kappa - 1.0))
            / ((kappa - 1.0) * (kappa - 1.0));
    diags.push(AltFormResidual {
        name: "slot-one expected rate, sign-scrambled Ei variant",
        residual: rel_err(slot1_alt, slot1_oracle),
    });

    // Slot-two expected rate with a spurious power factor (and hence sign)
    // on the leading Ei term.
    let slot2_oracle = expected_rate_ue1_slot2(&cfg, ExpectationMethod::Quadrature)
        .unwrap()
        .value;
    let slot2_alt = cfg.p1() * x_tilde - q * (1.0 + a * x_tilde);
    diags.push(AltFormResidual {
        name: "slot-two expected rate, power-scaled leading-term variant",
        residual: rel_err(slot2_alt, slot2_oracle),
    });

    // Quadratic rate with the conjugate root and a beta^2 dropped from the
    // discriminant, at the reference point (L=1000, theta=1e-3, u=10).
    let (l, theta, u) = (1000u32, 1e-3, 10.0);
    let alpha = 0.5 - theta;
    let beta2 = f64::from(l) / (2.0 * std::f64::consts::PI);
    let gamma = 1.0 + u;
    let disc =
        gamma * gamma * beta2 * beta2 - (beta2 - alpha * alpha) * (alpha * alpha + gamma * gamma);
    let v_alt = (gamma * beta2 + disc.sqrt()) / (beta2 - alpha * alpha);
    let quad_oracle = own_bisect(|r| ramp_at_rate(l, r, u) - theta, 1e-12, u.ln_1p() + 1.0);
    diags.push(AltFormResidual {
        name: "ramp-model rate, conjugate-root variant",
        residual: rel_err(v_alt.ln(), quad_oracle),
    });

    // Lambert-W power with the exponent's sign mirrored inside the W
    // argument, at the reference point (L=1000, theta=1e-3, r=1, G=1).
    let (l, theta, rate, gain) = (1000u32, 1e-3, 1.0, 1.0);
    let aa = gaussian_q_inv(Probability::new(theta)) / f64::from(l).sqrt();
    let w = lambert_w(-aa * (aa - rate).exp(), WBranch::Principal);
    let power_alt = (aa + w) / (gain * w);
    let g = |x: f64| theta - power_curve_error(l, rate, x * gain);
    let mut hi = (rate + 2.0).exp_m1() / gain;
    while g(hi) <= 0.0 {
        hi *= 2.0;
    }
    let power_oracle = own_bisect(g, 1e-300, hi);
    diags.push(AltFormResidual {
        name: "power control, mirrored-exponent Lambert-W variant",
        residual: rel_err(power_alt, power_oracle),
    });

    diags
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

/// Runs all five cross-validation grids plus the neighbor-form
/// diagnostics. Deterministic in `(points_per_grid, seed)`.
pub fn run_selftest(points_per_grid: usize, seed: u64) -> SelftestReport {
    assert!(points_per_grid > 0, "run_selftest: need at least one point");
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let checks = vec![
        check_rate_closed_form(points_per_grid, &mut rng),
        check_quadratic_rate(points_per_grid, &mut rng),
        check_lambert_power(points_per_grid, &mut rng),
        check_expected_rate_slot1(points_per_grid, &mut rng),
        check_expected_rate_slot2(points_per_grid, &mut rng),
    ];
    SelftestReport {
        seed,
        points_per_grid,
        checks,
        diagnostics: diagnostics(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_grids_pass_all_checks() {
        let report = run_selftest(60, 42);
        assert_eq!(report.checks.len(), 5);
        for check in &report.checks {
            assert!(
                check.passed(),
                "{}: max rel err {:.3e}",
                check.name,
                check.max_rel_error
            );
            assert_eq!(check.points, 60);
        }
    }

    #[test]
    fn neighbor_forms_stay_far_from_the_oracles() {
        let report = run_selftest(1, 1);
        assert_eq!(report.diagnostics.len(), 4);
        for diag in &report.diagnostics {
            assert!(
                diag.residual > 1e-2,
                "{} unexpectedly close: {:.3e}",
                diag.name,
                diag.residual
            );
        }
    }

    #[test]
    fn report_renders_every_line() {
        let report = run_selftest(10, 5);
        let text = report.render();
        assert!(text.contains("PASS"));
        assert!(text.contains("alt-form residuals"));
        assert!(text.contains("all checks passed"));
        assert_eq!(text.matches("rel residual").count(), 4);
    }

    #[test]
    fn selftest_is_deterministic() {
        let a = run_selftest(25, 9).render();
        let b = run_selftest(25, 9).render();
        assert_eq!(a, b);
    }
}
