//! Rate and power allocation under a decoding-error budget.
//!
//! Every solver in this module answers one of two questions about a single
//! finite-blocklength link:
//!
//! * **Rate**: given an SINR, what is the largest rate whose decoding error
//!   does not exceed the budget `theta`?
//! * **Power**: given a rate and a channel gain, what transmit power meets
//!   the budget?
//!
//! Each question is answered both by guarded bisection on the error model
//! and by a closed form, and the two are required to agree: a closed form
//! here is an algebraic inversion of the same model the bisection searches,
//! not an extra approximation. Two model variants appear. The exact normal
//! approximation is inverted in rate by [`RateMethod::ClosedFormQinv`];
//! the piecewise-linear ramp is inverted by
//! [`RateMethod::ClosedFormQuadratic`]; and the power solvers work on the
//! variant whose dispersion is `u / (1 + u)`, which is what makes the
//! Lambert-W form exact.
//!
//! Infeasibility is a first-class outcome, never silently clamped: a rate
//! target that cannot be met at any positive rate, or a power target on a
//! dead channel, comes back as [`AllocationError::Infeasible`].
//!
//! # Example
//!
//! ```
//! use noma_harq_core::allocation::{solve_rate, RateMethod};
//! use noma_harq_core::errormodel::SinrValue;
//! use noma_harq_core::specfun::Probability;
//!
//! let sol = solve_rate(1000, Probability::new(1e-3), SinrValue::new(10.0),
//!                      RateMethod::ClosedFormQinv).unwrap();
//! assert!((sol.rate - 2.300579).abs() < 1e-6);
//! ```

use crate::errormodel::{fbl_error_linearized_raw, fbl_error_raw, SinrValue};
use crate::fading::{ChannelDraw, LinkConfig};
use crate::numerics::bisect;
use crate::specfun::{gaussian_q_inv, gaussian_q_raw, lambert_w, Probability, WBranch};

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

/// How a rate solution was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateMethod {
    /// Guarded bisection on the exact normal-approximation error.
    Bisection,
    /// Closed-form inversion of the exact normal approximation via the
    /// inverse Gaussian tail.
    ClosedFormQinv,
    /// Closed-form root of the quadratic obtained from the linearized
    /// (ramp) error model. Solves a different model than the other two
    /// methods, so its rates differ from theirs by the linearization gap.
    ClosedFormQuadratic,
}

/// How a power solution was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerMethod {
    /// Guarded bisection on the error model in the transmit power.
    Bisection,
    /// Closed form via the principal branch of the Lambert W function.
    ClosedFormLambertW,
}

/// A solved rate allocation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSolution {
    /// The allocated rate in nats per channel use. Always positive.
    pub rate: f64,
    /// The method that produced it.
    pub method: RateMethod,
    /// Absolute residual in the probability domain, measured against the
    /// model the method solves.
    pub residual: f64,
}

/// A solved power allocation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerSolution {
    /// The required transmit power (linear scale, noise normalized to one).
    pub power: f64,
    /// The received SNR this power produces, `power * gain`.
    pub required_sinr: f64,
    /// The method that produced it.
    pub method: PowerMethod,
    /// Absolute residual in the probability domain.
    pub residual: f64,
}

/// Midpoint, slope, and transition band of the linearized (ramp) error
/// model for one code.
///
/// The ramp equals `1/2` at `midpoint = e^r - 1`, falls with `slope` in the
/// SINR, and saturates at `1` below `lower_break` and at `0` above
/// `upper_break`; the band is symmetric because `slope * half-width = 1/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearizedQParams {
    /// SINR at which the ramp crosses one half.
    pub midpoint: f64,
    /// Magnitude of the ramp's slope in the SINR.
    pub slope: f64,
    /// SINR below which the ramp saturates at one.
    pub lower_break: f64,
    /// SINR above which the ramp saturates at zero.
    pub upper_break: f64,
}

impl LinearizedQParams {
    /// Computes the ramp parameters for blocklength `l` and rate `rate`.
    ///
    /// # Panics
    ///
    /// Panics if `rate` is not finite and positive.
    pub fn for_code(l: u32, rate: f64) -> Self {
        assert!(
            rate.is_finite() && rate > 0.0,
            "LinearizedQParams: rate must be finite and positive, got {rate}"
        );
        let midpoint = rate.exp_m1();
        let slope = (l as f64 / (2.0 * std::f64::consts::PI * (2.0 * rate).exp_m1())).sqrt();
        let half_width = 0.5 / slope;
        Self {
            midpoint,
            slope,
            lower_break: midpoint - half_width,
            upper_break: midpoint + half_width,
        }
    }

    /// Evaluates the ramp at SINR `u`; identical to the linearized error
    /// model in the error module.
    pub fn evaluate(&self, u: f64) -> f64 {
        (0.5 - self.slope * (u - self.midpoint)).clamp(0.0, 1.0)
    }
}

/// Failure modes of the allocation solvers.
#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum AllocationError {
    /// The error budget cannot be met: even the most conservative feasible
    /// choice leaves a decoding error of `floor`, above the `target`.
    #[error("error budget {target} is unreachable: the decoding error cannot fall below {floor}")]
    Infeasible { floor: f64, target: f64 },
    /// The root search terminated without meeting its residual contract.
    #[error("root search failed to converge: residual {residual} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: u32 },
}

// ---------------------------------------------------------------------------
// Shared guards
// ---------------------------------------------------------------------------

/// Smallest rate the bisection solvers will consider; a root below this is
/// reported as infeasible rather than resolved.
const RATE_FLOOR: f64 = 1e-9;

/// Residual (probability domain) beyond which a finished bisection is
/// deemed not converged.
const RESIDUAL_LIMIT: f64 = 1e-6;

fn check_theta(theta: Probability) -> f64 {
    let t = theta.value();
    assert!(
        t > 0.0 && t <= 0.5,
        "allocation: error budget must lie in (0, 0.5], got {t}"
    );
    t
}

fn check_blocklength(l: u32) -> f64 {
    assert!(
        l >= 100,
        "allocation: blocklength must be at least 100, got {l}"
    );
    l as f64
}

fn check_sinr_finite(sinr: SinrValue) -> f64 {
    let u = sinr.value();
    assert!(
        u.is_finite(),
        "allocation: solvers require a finite SINR, got {u}"
    );
    u
}

/// Dispersion of the exact model, `sqrt(1 - 1/(1+u)^2)`, in the
/// cancellation-free form.
fn dispersion_exact(u: f64) -> f64 {
    if u > 1e150 {
        1.0
    } else {
        (u * (u + 2.0)).sqrt() / (1.0 + u)
    }
}

/// Error of the power-solver model at SINR `u`: the normal approximation
/// with dispersion `u / (1 + u)`.
fn fbl_error_g_raw(l: f64, r: f64, u: f64) -> f64 {
    if u == 0.0 {
        return 1.0;
    }
    let arg = l.sqrt() * (u.ln_1p() - r) * (1.0 + u) / u;
    gaussian_q_raw(arg)
}

/// Infimum of the exact decoding error over positive rates at SINR `u`.
fn rate_floor_error(l: f64, u: f64) -> f64 {
    if u == 0.0 {
        1.0
    } else {
        gaussian_q_raw(l.sqrt() * u.ln_1p() / dispersion_exact(u))
    }
}

// ---------------------------------------------------------------------------
// Single-link rate
// ---------------------------------------------------------------------------

/// Largest rate whose decoding error at SINR `sinr` does not exceed
/// `theta`, for a code of blocklength `l`.
///
/// All three methods return a strictly positive rate or
/// [`AllocationError::Infeasible`]. [`RateMethod::Bisection`] and
/// [`RateMethod::ClosedFormQinv`] solve the exact normal approximation and
/// agree to the bisection tolerance;
/// [`RateMethod::ClosedFormQuadratic`] solves the linearized ramp model.
///
/// # Panics
///
/// Panics if `theta` is outside `(0, 0.5]`, `l < 100`, or `sinr` is not
/// finite.
///
/// # Example
///
/// ```
/// use noma_harq_core::allocation::{solve_rate, RateMethod};
/// use noma_harq_core::errormodel::SinrValue;
/// use noma_harq_core::specfun::Probability;
///
/// // A dead channel is infeasible, not a zero rate.
/// let res = solve_rate(1000, Probability::new(1e-3), SinrValue::new(0.0),
///                      RateMethod::ClosedFormQinv);
/// assert!(res.is_err());
/// ```
pub fn solve_rate(
    l: u32,
    theta: Probability,
    sinr: SinrValue,
    method: RateMethod,
) -> Result<RateSolution, AllocationError> {
    let t = check_theta(theta);
    let lf = check_blocklength(l);
    let u = check_sinr_finite(sinr);
    match method {
        RateMethod::ClosedFormQinv => {
            let rate = u.ln_1p() - gaussian_q_inv(theta) / lf.sqrt() * dispersion_exact(u);
            if rate <= 0.0 {
                return Err(AllocationError::Infeasible {
                    floor: rate_floor_error(lf, u),
                    target: t,
                });
            }
            Ok(RateSolution {
                rate,
                method,
                residual: (fbl_error_raw(lf, rate, u) - t).abs(),
            })
        }
        RateMethod::Bisection => {
            solve_rate_bisection_on(|r| fbl_error_raw(lf, r, u), t, u, RateMethod::Bisection)
        }
        RateMethod::ClosedFormQuadratic => solve_rate_quadratic(lf, t, u),
    }
}

/// Bisection for any error curve that is increasing in the rate, shared by
/// the single-link and mixture solvers. `u_scale` only seeds the upper
/// bracket.
fn solve_rate_bisection_on<F: Fn(f64) -> f64>(
    error_at: F,
    theta: f64,
    u_scale: f64,
    method: RateMethod,
) -> Result<RateSolution, AllocationError> {
    let floor = error_at(RATE_FLOOR);
    if floor > theta {
        return Err(AllocationError::Infeasible {
            floor,
            target: theta,
        });
    }
    // At r = ln(1 + u) the error is at least 1/2 >= theta for every branch
    // of every mixture used here, so this bracket almost always holds on
    // the first try; the doubling loop covers the theta = 1/2 boundary.
    let mut hi = u_scale.ln_1p() + 1e-6;
    let g = |r: f64| error_at(r) - theta;
    let mut expansions = 0;
    while g(hi) <= 0.0 {
        hi = RATE_FLOOR + 2.0 * (hi - RATE_FLOOR);
        expansions += 1;
        assert!(expansions <= 60, "rate bracket expansion failed");
    }
    let res = bisect(g, RATE_FLOOR, hi, 1e-13);
    let residual = g(res.root).abs();
    if residual > RESIDUAL_LIMIT {
        return Err(AllocationError::NoConvergence {
            residual,
            iterations: res.iterations,
        });
    }
    Ok(RateSolution {
        rate: res.root,
        method,
        residual,
    })
}

/// Closed-form root of the ramp model: with `alpha = 1/2 - theta`,
/// `beta = sqrt(L / (2 pi))`, and `gamma = 1 + u`, the feasible codeword
/// "capacity" `v = e^r` is the smaller root of
/// `(beta^2 - alpha^2) v^2 - 2 beta^2 gamma v + beta^2 gamma^2 + alpha^2 = 0`.
fn solve_rate_quadratic(lf: f64, theta: f64, u: f64) -> Result<RateSolution, AllocationError> {
    let alpha = 0.5 - theta;
    let beta2 = lf / (2.0 * std::f64::consts::PI);
    let gamma = 1.0 + u;
    // beta >= sqrt(100 / 2pi) ~= 3.99 while alpha <= 1/2, so the leading
    // coefficient is safely positive.
    let discriminant_half = alpha * (beta2 * (gamma * gamma - 1.0) + alpha * alpha).sqrt();
    let v = (beta2 * gamma - discriminant_half) / (beta2 - alpha * alpha);
    if v <= 1.0 + 1e-12 {
        return Err(AllocationError::Infeasible {
            floor: fbl_error_linearized_raw(lf, f64::MIN_POSITIVE.max(RATE_FLOOR), u),
            target: theta,
        });
    }
    let rate = v.ln();
    Ok(RateSolution {
        rate,
        method: RateMethod::ClosedFormQuadratic,
        residual: (fbl_error_linearized_raw(lf, rate, u) - theta).abs(),
    })
}

// ---------------------------------------------------------------------------
// Two-point mixture rates
// ---------------------------------------------------------------------------

/// Largest slot-one rate for user 2 whose *average* decoding error meets
/// `config.theta2()`.
///
/// User 2's slot-one error averages two SIC outcomes: with probability
/// `1 - theta1_effective` user 1 is cancelled and user 2 decodes at the
/// clean SINR `g2 p2`; otherwise it decodes behind residual interference at
/// `g2 p2 / (1 + g1 p1)`. `theta1_effective` is the designed probability of
/// the second branch — pass the slot-one budget of user 1, or zero when
/// user 1 is silent in this cycle.
///
/// # Panics
///
/// Panics if the draw's gains are not finite and non-negative.
pub fn solve_rate_slot1_ue2(
    config: &LinkConfig,
    draw: &ChannelDraw,
    theta1_effective: Probability,
) -> Result<RateSolution, AllocationError> {
    let clean = draw.g2 * config.p2();
    let interfered = clean / (1.0 + draw.g1 * config.p1());
    solve_rate_mixture(
        config.code2().blocklength(),
        Probability::new(config.theta2()),
        SinrValue::new(clean),
        SinrValue::new(interfered),
        theta1_effective,
    )
}

/// Largest slot-two rate for user 1's fresh codeword whose average
/// decoding error meets `config.theta1()`, accounting for the chance that
/// user 2's combined retransmission fails to cancel.
///
/// This is the exact counterpart of the design rule that allocates user 1's
/// slot-two rate at the clean SINR `g1 p1`: with `theta2_tilde = 0` it
/// reduces to that clean allocation, and with `theta2_tilde = 1` it matches
/// a slot-one style allocation behind full interference `g2 p2`.
pub fn solve_rate_slot2_ue1_exact(
    config: &LinkConfig,
    draw: &ChannelDraw,
    theta2_tilde: Probability,
) -> Result<RateSolution, AllocationError> {
    let clean = draw.g1 * config.p1();
    let interfered = clean / (1.0 + draw.g2 * config.p2());
    solve_rate_mixture(
        config.code1().blocklength(),
        Probability::new(config.theta1()),
        SinrValue::new(clean),
        SinrValue::new(interfered),
        theta2_tilde,
    )
}

/// Bisection on the two-branch mixture error
/// `(1 - w) F(r, u_primary) + w F(r, u_degraded) = theta`.
fn solve_rate_mixture(
    l: u32,
    theta: Probability,
    u_primary: SinrValue,
    u_degraded: SinrValue,
    weight_degraded: Probability,
) -> Result<RateSolution, AllocationError> {
    let t = check_theta(theta);
    let lf = check_blocklength(l);
    let up = check_sinr_finite(u_primary);
    let ud = check_sinr_finite(u_degraded);
    let w = weight_degraded.value();
    let mix = |r: f64| (1.0 - w) * fbl_error_raw(lf, r, up) + w * fbl_error_raw(lf, r, ud);
    solve_rate_bisection_on(mix, t, up, RateMethod::Bisection)
}

// ---------------------------------------------------------------------------
// Power
// ---------------------------------------------------------------------------

/// Transmit power that meets the error budget `theta` at rate
/// `target_rate` over a channel with power gain `gain`.
///
/// Solves the model with dispersion `u / (1 + u)`, for which the
/// Lambert-W form is the exact inversion: with `a = Qinv(theta) / sqrt(L)`
/// the required received SNR is `u* = a / (-W0(-a e^{-a-r})) - 1`, and the
/// power is `u* / gain`. Both methods therefore report
/// [`PowerSolution::required_sinr`] `= power * gain`, which is independent
/// of the gain; doubling the gain exactly halves the power.
///
/// A target is always reachable at some finite power for a positive rate,
/// so the only failure is a dead channel.
///
/// # Panics
///
/// Panics if `theta` is outside `(0, 0.5]`, `l < 100`, `target_rate` is not
/// finite and positive, or `gain` is negative, NaN, or zero.
///
/// # Example
///
/// ```
/// use noma_harq_core::allocation::{solve_power, PowerMethod};
/// use noma_harq_core::specfun::Probability;
///
/// let sol = solve_power(1000, Probability::new(1e-3), 1.0, 1.0,
///                       PowerMethod::ClosedFormLambertW).unwrap();
/// assert!((sol.power - 1.8979414565160457).abs() < 1e-9);
/// ```
pub fn solve_power(
    l: u32,
    theta: Probability,
    target_rate: f64,
    gain: f64,
    method: PowerMethod,
) -> Result<PowerSolution, AllocationError> {
    let t = check_theta(theta);
    let lf = check_blocklength(l);
    assert!(
        target_rate.is_finite() && target_rate > 0.0,
        "solve_power: target rate must be finite and positive, got {target_rate}"
    );
    assert!(
        gain > 0.0 && gain.is_finite(),
        "solve_power: channel gain must be finite and positive, got {gain}"
    );
    match method {
        PowerMethod::ClosedFormLambertW => {
            let a = gaussian_q_inv(theta) / lf.sqrt();
            let required_sinr = if a == 0.0 {
                // theta = 1/2 puts the target exactly at capacity.
                target_rate.exp_m1()
            } else {
                // a e^{-a-r} <= a e^{-a} <= 1/e, so the argument stays on
                // the principal branch.
                let z = -a * (-a - target_rate).exp();
                a / -lambert_w(z, WBranch::Principal) - 1.0
            };
            let power = required_sinr / gain;
            Ok(PowerSolution {
                power,
                required_sinr,
                method,
                residual: (fbl_error_g_raw(lf, target_rate, required_sinr) - t).abs(),
            })
        }
        PowerMethod::Bisection => {
            // The error is strictly decreasing in the power, from 1 at zero
            // power toward 0, so g(x) = theta - error is increasing with
            // g(0) < 0.
            let g = |x: f64| t - fbl_error_g_raw(lf, target_rate, gain * x);
            let a = gaussian_q_inv(theta) / lf.sqrt();
            let mut hi = (target_rate + 10.0 * a + 10.0 / lf.sqrt()).exp_m1() / gain;
            let mut expansions = 0;
            while g(hi) <= 0.0 {
                hi *= 2.0;
                expansions += 1;
                assert!(expansions <= 60, "power bracket expansion failed");
            }
            let res = bisect(g, 0.0, hi, 1e-13);
            let residual = g(res.root).abs();
            if residual > RESIDUAL_LIMIT {
                return Err(AllocationError::NoConvergence {
                    residual,
                    iterations: res.iterations,
                });
            }
            Ok(PowerSolution {
                power: res.root,
                required_sinr: res.root * gain,
                method: PowerMethod::Bisection,
                residual,
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
