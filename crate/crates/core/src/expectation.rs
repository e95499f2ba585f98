//! Closed-form and quadrature expectations over the fading distribution.
//!
//! The design-stage analysis needs two averages of the per-draw rate
//! allocation, both for user 1 with blocklength `L` and budget `theta1`:
//!
//! * the **slot-one** expected rate, where user 1 decodes behind user 2's
//!   interference and its SINR `U1 = G1 P1 / (1 + G2 P2)` follows the CDF
//!   in the fading module, and
//! * the **slot-two** expected rate of the order-swapping scheme, where
//!   user 1 decodes interference-free at `G1 P1`.
//!
//! In both cases the averaged allocation is `ln(1 + u) - (Qinv(theta1) /
//! sqrt(L)) * u / (1 + u)`, whose two parts integrate against the survival
//! function in closed form through the exponential integral. Each closed
//! form has a quadrature twin that integrates the survival function
//! directly, and the two are required to agree to well below `1e-6`
//! relative.
//!
//! The module also averages the slot-two *power* adaptation. Because the
//! required transmit power scales as `1 / G1` and `E[1/G1]` diverges for
//! exponential gains, the meaningful average is the required *received*
//! SNR, `power * G1`, which is what both the analytic and the Monte Carlo
//! estimators report.
//!
//! # Example
//!
//! ```
//! use noma_harq_core::errormodel::CodeParams;
//! use noma_harq_core::expectation::{expected_rate_ue1_slot1, ExpectationMethod};
//! use noma_harq_core::fading::{FadingParams, LinkConfig};
//!
//! let code = CodeParams::new(1000, 1.0);
//! let cfg = LinkConfig::new(FadingParams::new(0.1, 1.0), 1000.0, 1000.0,
//!                           code, code, 1e-3, 1e-3);
//! let e = expected_rate_ue1_slot1(&cfg, ExpectationMethod::ClosedForm).unwrap();
//! assert!((e.value - 2.4705654105446357).abs() < 1e-9);
//! ```

use crate::allocation::{solve_power, PowerMethod};
use crate::fading::{sample_gains, LinkConfig};
use crate::numerics::{integrate, QuadratureResult, RunningMoments};
use crate::simengine::SchemeVariant;
use crate::specfun::{gaussian_q_inv, scaled_e1, Probability};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

/// How an expected rate was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpectationMethod {
    /// Exact evaluation through exponential integrals.
    ClosedForm,
    /// Adaptive Gauss–Kronrod integration of the survival function.
    Quadrature,
}

/// An averaged rate allocation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedRate {
    /// The expected rate in nats per channel use.
    pub value: f64,
    /// The method that actually produced the value (a closed-form request
    /// falls back to quadrature inside the confluent guard band).
    pub method: ExpectationMethod,
    /// Conservative absolute error bound; `None` for closed forms.
    pub abs_error_estimate: Option<f64>,
}

/// How an expected power was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerExpectationMethod {
    /// Exact average over the fading distribution.
    Analytic,
    /// Seeded Monte Carlo average.
    MonteCarlo,
}

/// An averaged slot-two power adaptation, reported as required received SNR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedPower {
    /// Expected required received SNR `E[power * G1]`.
    pub value: f64,
    /// The method that produced the value.
    pub method: PowerExpectationMethod,
    /// Standard error of the Monte Carlo mean; zero for the analytic form.
    pub std_error: f64,
    /// Fraction of Monte Carlo draws with a dead channel (`G1 = 0`), which
    /// no finite power can serve; zero for the analytic form.
    pub infeasible_fraction: f64,
}

/// Failure modes of the expectation evaluators.
#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum ExpectationError {
    /// The averaged allocation is not positive: at this operating point the
    /// dispersion penalty outweighs the expected capacity term.
    #[error("expected rate is not positive ({value}); the operating point cannot sustain the error budget on average")]
    NegativeExpectedRate { value: f64 },
}

// ---------------------------------------------------------------------------
// Shared pieces
// ---------------------------------------------------------------------------

/// Requested tolerance for each survival-function integral.
const QUAD_TOL: f64 = 1e-9;

/// Half-width of the guard band around `kappa = 1` inside which quadrature
/// takes over from the two-pole closed form. The partial fractions lose
/// roughly `(kappa - 1)^{-2}` digits to cancellation near confluence, so a
/// band of 1e-3 keeps the closed form's error comfortably below 1e-9
/// relative wherever it is used.
const KAPPA_GUARD: f64 = 1e-3;

/// Dispersion penalty coefficient `Qinv(theta1) / sqrt(L)` of user 1.
fn penalty_coefficient(config: &LinkConfig) -> f64 {
    gaussian_q_inv(Probability::new(config.theta1())) / (config.code1().blocklength() as f64).sqrt()
}

/// Upper integration cutoff for `int_0^inf e^{-a x} (...) dx`: beyond
/// `36.84 / a` the exponential alone is below 1e-16.
fn tail_cutoff(a: f64) -> f64 {
    (36.84 / a).max(10.0)
}

/// Integrates `f` over `[0, cutoff]` as a sum of adaptive panels split at
/// the integrand's characteristic scales (`knees`). The domain can span
/// ten orders of magnitude when the decay constant is small, and a single
/// adaptive call would exhaust its refinement depth before resolving a
/// knee sitting many decades below the cutoff.
fn integrate_with_knees(
    f: impl Fn(f64) -> f64 + Copy,
    knees: &[f64],
    cutoff: f64,
) -> QuadratureResult {
    let mut cuts: Vec<f64> = knees
        .iter()
        .copied()
        .filter(|&s| s.is_finite() && s > 0.0 && s < cutoff)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.push(cutoff);
    let mut total = QuadratureResult {
        value: 0.0,
        abs_error_estimate: 0.0,
        evaluations: 0,
    };
    let mut lo = 0.0;
    for cut in cuts {
        let piece = integrate(f, lo, cut, QUAD_TOL);
        total.value += piece.value;
        total.abs_error_estimate += piece.abs_error_estimate;
        total.evaluations += piece.evaluations;
        lo = cut;
    }
    total
}

fn finish_rate(
    value: f64,
    method: ExpectationMethod,
    abs_error_estimate: Option<f64>,
) -> Result<ExpectedRate, ExpectationError> {
    assert!(value.is_finite(), "expected rate evaluated to {value}");
    if value <= 0.0 {
        return Err(ExpectationError::NegativeExpectedRate { value });
    }
    Ok(ExpectedRate {
        value,
        method,
        abs_error_estimate,
    })
}

// ---------------------------------------------------------------------------
// Expected rates
// ---------------------------------------------------------------------------

/// Expected slot-one rate of user 1, averaged over the interference-limited
/// SINR `U1 = G1 P1 / (1 + G2 P2)`.
///
/// With `a = lambda1 / p1`, `kappa` from the link configuration, and
/// `X = e^a Ei(-a)`, `Y = e^{lambda2/p2} Ei(-lambda2/p2)`, the two survival
/// integrals are
///
/// ```text
/// I1 = (X - Y) / (kappa - 1)
/// I2 = [ (kappa - a (kappa - 1)) X - kappa Y - (kappa - 1) ] / (kappa - 1)^2
/// ```
///
/// and the expected rate is `I1 - (Qinv(theta1)/sqrt(L)) I2`. Inside the
/// guard band `|kappa - 1| < 1e-3` the partial fractions become confluent
/// and the evaluator silently switches to quadrature (reflected in the
/// returned method).
///
/// # Errors
///
/// Returns [`ExpectationError::NegativeExpectedRate`] when the penalty term
/// outweighs the capacity term.
pub fn expected_rate_ue1_slot1(
    config: &LinkConfig,
    method: ExpectationMethod,
) -> Result<ExpectedRate, ExpectationError> {
    let a = config.fading().lambda1() / config.p1();
    let kappa = config.kappa();
    let q = penalty_coefficient(config);
    if method == ExpectationMethod::ClosedForm && (kappa - 1.0).abs() >= KAPPA_GUARD {
        let x = -scaled_e1(a);
        let y = -scaled_e1(config.fading().lambda2() / config.p2());
        let km1 = kappa - 1.0;
        let i1 = (x - y) / km1;
        let i2 = ((kappa - a * km1) * x - kappa * y - km1) / (km1 * km1);
        return finish_rate(i1 - q * i2, ExpectationMethod::ClosedForm, None);
    }
    // Quadrature twin: integrate the survival function of U1 against the
    // derivatives of ln(1 + x) and x / (1 + x). Knees sit at the
    // interference scale 1/kappa, the unit scale, and the decay scale 1/a.
    let cutoff = tail_cutoff(a);
    let knees = [1.0 / kappa, 1.0, 1.0 / a];
    let i1 = integrate_with_knees(
        |x| (-a * x).exp() / ((1.0 + kappa * x) * (1.0 + x)),
        &knees,
        cutoff,
    );
    let i2 = integrate_with_knees(
        |x| (-a * x).exp() / ((1.0 + kappa * x) * (1.0 + x) * (1.0 + x)),
        &knees,
        cutoff,
    );
    // Both integrands at the cutoff are below e^{-a x}, so each tail is
    // bounded by e^{-a cutoff} / a.
    let tail = (-a * cutoff).exp() / a;
    let estimate = i1.abs_error_estimate + q * i2.abs_error_estimate + (1.0 + q) * tail;
    finish_rate(
        i1.value - q * i2.value,
        ExpectationMethod::Quadrature,
        Some(estimate),
    )
}

/// Expected slot-two rate of user 1 under the order-swapping scheme, where
/// the retransmission slot decodes user 1 interference-free at `G1 P1`.
///
/// With `a = lambda1 / p1` and `Z = e^a E1(a)`:
///
/// ```text
/// E = Z - (Qinv(theta1)/sqrt(L)) (1 - a Z)
/// ```
///
/// # Errors
///
/// Returns [`ExpectationError::NegativeExpectedRate`] when the penalty term
/// outweighs the capacity term.
pub fn expected_rate_ue1_slot2(
    config: &LinkConfig,
    method: ExpectationMethod,
) -> Result<ExpectedRate, ExpectationError> {
    let a = config.fading().lambda1() / config.p1();
    let q = penalty_coefficient(config);
    match method {
        ExpectationMethod::ClosedForm => {
            let z = scaled_e1(a);
            finish_rate(z - q * (1.0 - a * z), ExpectationMethod::ClosedForm, None)
        }
        ExpectationMethod::Quadrature => {
            let cutoff = tail_cutoff(a);
            let knees = [1.0, 1.0 / a];
            let j1 = integrate_with_knees(|x| (-a * x).exp() / (1.0 + x), &knees, cutoff);
            let j2 =
                integrate_with_knees(|x| (-a * x).exp() / ((1.0 + x) * (1.0 + x)), &knees, cutoff);
            let tail = (-a * cutoff).exp() / a;
            let estimate = j1.abs_error_estimate + q * j2.abs_error_estimate + (1.0 + q) * tail;
            finish_rate(
                j1.value - q * j2.value,
                ExpectationMethod::Quadrature,
                Some(estimate),
            )
        }
    }
}

// ---------------------------------------------------------------------------
// Expected power
// ---------------------------------------------------------------------------

/// Received SNR that user 1's slot-two power adaptation must reach for a
/// given target rate: the Lambert-W power solution at unit gain.
fn required_sinr(config: &LinkConfig, target_rate: f64) -> f64 {
    solve_power(
        config.code1().blocklength(),
        Probability::new(config.theta1()),
        target_rate,
        1.0,
        PowerMethod::ClosedFormLambertW,
    )
    .expect("a positive target rate is always reachable at some finite power")
    .required_sinr
}

/// Exact expected required received SNR of user 1's slot-two power
/// adaptation.
///
/// Under the order-swapping scheme user 1 retransmits interference-free,
/// so the required received SNR equals the deterministic `u*` solving the
/// error budget at the target rate. Under the conventional schedule user 1
/// is decoded behind user 2's interference and must overcome it:
/// `E[u* (1 + G2 P2)] = u* (1 + P2 / lambda2)`.
///
/// # Example
///
/// ```
/// use noma_harq_core::errormodel::CodeParams;
/// use noma_harq_core::expectation::expected_power_ue1_slot2;
/// use noma_harq_core::fading::{FadingParams, LinkConfig};
/// use noma_harq_core::simengine::SchemeVariant;
///
/// let code = CodeParams::new(1000, 1.0);
/// let cfg = LinkConfig::new(FadingParams::new(0.1, 1.0), 1000.0, 1000.0,
///                           code, code, 1e-3, 1e-3);
/// let p = expected_power_ue1_slot2(&cfg, SchemeVariant::ProposedOrderSwap, 1.0);
/// assert!((p.value - 1.8979414565160457).abs() < 1e-9);
/// ```
pub fn expected_power_ue1_slot2(
    config: &LinkConfig,
    scheme: SchemeVariant,
    target_rate: f64,
) -> ExpectedPower {
    let u_star = required_sinr(config, target_rate);
    let value = match scheme {
        SchemeVariant::ProposedOrderSwap => u_star,
        SchemeVariant::StandardNomaHarq => u_star * (1.0 + config.p2() / config.fading().lambda2()),
    };
    ExpectedPower {
        value,
        method: PowerExpectationMethod::Analytic,
        std_error: 0.0,
        infeasible_fraction: 0.0,
    }
}

/// Monte Carlo twin of [`expected_power_ue1_slot2`]: averages the required
/// received SNR over seeded channel draws.
///
/// Draw `i` uses stream `i` of a counter-based generator seeded with
/// `seed`, so results are reproducible and independent of iteration order.
/// Draws with a dead channel are excluded from the mean and reported in
/// [`ExpectedPower::infeasible_fraction`].
///
/// # Panics
///
/// Panics if `trials` is zero.
pub fn expected_power_ue1_slot2_mc(
    config: &LinkConfig,
    scheme: SchemeVariant,
    target_rate: f64,
    trials: u64,
    seed: u64,
) -> ExpectedPower {
    assert!(
        trials > 0,
        "expected_power_ue1_slot2_mc: trials must be positive"
    );
    let u_star = required_sinr(config, target_rate);
    let base = ChaCha12Rng::seed_from_u64(seed);
    let mut moments = RunningMoments::new();
    let mut infeasible = 0u64;
    for trial in 0..trials {
        let mut rng = base.clone();
        rng.set_stream(trial);
        let draw = sample_gains(config.fading(), &mut rng);
        if draw.g1 == 0.0 {
            infeasible += 1;
            continue;
        }
        let sample = match scheme {
            SchemeVariant::ProposedOrderSwap => u_star,
            SchemeVariant::StandardNomaHarq => u_star * (1.0 + draw.g2 * config.p2()),
        };
        moments.push(sample);
    }
    assert!(
        moments.count() > 0,
        "expected_power_ue1_slot2_mc: every draw was infeasible"
    );
    let std_error = if moments.count() < 2 {
        0.0
    } else {
        moments.std_error_of_mean()
    };
    ExpectedPower {
        value: moments.mean(),
        method: PowerExpectationMethod::MonteCarlo,
        std_error,
        infeasible_fraction: infeasible as f64 / trials as f64,
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
