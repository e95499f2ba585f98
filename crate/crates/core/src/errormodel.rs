//! Finite-blocklength decoding error model.
//!
//! For a code of blocklength `L` and rate `r` (nats per channel use)
//! received at SINR `u`, the decoding error probability is approximated by
//! the normal approximation
//!
//! ```text
//! F(r, u) = Q( sqrt(L) * (ln(1 + u) - r) / sqrt(1 - 1/(1 + u)^2) )
//! ```
//!
//! with `F(r, 0) = 1`. This module provides that map, a linearized variant
//! used by the closed-form allocators, the two-copy combined error for the
//! retransmission scheme (where maximal-ratio combining of two copies of
//! the same codeword accumulates their SINRs), and the slot-one error pair
//! for the two-user uplink under successive interference cancellation.
//!
//! # Example
//!
//! ```
//! use noma_harq_core::errormodel::{fbl_error, CodeParams, SinrValue};
//!
//! let code = CodeParams::new(1000, 2.300579);
//! let err = fbl_error(&code, SinrValue::new(10.0));
//! assert!((err.value() - 1e-3).abs() < 1e-6);
//! ```

use crate::specfun::{gaussian_q_raw, Probability};

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

/// Blocklength and rate of a codeword.
///
/// Rates are measured in nats per channel use throughout the crate, so a
/// codeword of blocklength `l` carries `l * r` nats of information.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodeParams {
    l: u32,
    r: f64,
}

impl CodeParams {
    /// Creates code parameters from a blocklength and a rate.
    ///
    /// # Panics
    ///
    /// Panics if `l < 100` (the normal approximation degrades below
    /// moderate blocklengths) or if `r` is not finite and positive.
    pub fn new(l: u32, r: f64) -> Self {
        assert!(
            l >= 100,
            "CodeParams: blocklength must be at least 100, got {l}"
        );
        assert!(
            r.is_finite() && r > 0.0,
            "CodeParams: rate must be finite and positive, got {r}"
        );
        Self { l, r }
    }

    /// Creates code parameters from a blocklength and a payload of `k`
    /// information nats, so the rate is `k / l`.
    ///
    /// # Panics
    ///
    /// Panics under the same conditions as [`CodeParams::new`].
    pub fn from_info_nats(l: u32, k: f64) -> Self {
        assert!(
            k.is_finite() && k > 0.0,
            "CodeParams: payload must be finite and positive, got {k}"
        );
        Self::new(l, k / l as f64)
    }

    /// Blocklength in channel uses.
    pub fn blocklength(&self) -> u32 {
        self.l
    }

    /// Code rate in nats per channel use.
    pub fn rate(&self) -> f64 {
        self.r
    }

    /// Payload size in information nats (`l * r`).
    pub fn info_nats(&self) -> f64 {
        self.l as f64 * self.r
    }

    /// A copy of these parameters with a different rate.
    pub fn with_rate(&self, r: f64) -> Self {
        Self::new(self.l, r)
    }
}

/// A signal-to-interference-plus-noise ratio in linear scale.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SinrValue(f64);

impl SinrValue {
    /// Wraps a linear SINR.
    ///
    /// # Panics
    ///
    /// Panics if `value` is negative or NaN (positive infinity is allowed
    /// and decodes error-free).
    pub fn new(value: f64) -> Self {
        assert!(
            value >= 0.0 && !value.is_nan(),
            "SinrValue: value must be non-negative, got {value}"
        );
        Self(value)
    }

    /// Returns the wrapped linear SINR.
    pub fn value(self) -> f64 {
        self.0
    }
}

// ---------------------------------------------------------------------------
// Error probabilities
// ---------------------------------------------------------------------------

/// Decoding error probability of a single codeword at SINR `u`.
///
/// Returns exactly `1` at `u = 0` and decreases monotonically in `u`,
/// approaching `0` once `ln(1 + u)` clears the rate by a few standard
/// deviations of the dispersion term.
///
/// # Example
///
/// ```
/// use noma_harq_core::errormodel::{fbl_error, CodeParams, SinrValue};
///
/// let code = CodeParams::new(500, 1.0);
/// assert_eq!(fbl_error(&code, SinrValue::new(0.0)).value(), 1.0);
/// ```
pub fn fbl_error(code: &CodeParams, sinr: SinrValue) -> Probability {
    Probability::new(fbl_error_raw(code.l as f64, code.r, sinr.0))
}

/// Unwrapped kernel behind [`fbl_error`], shared with the solvers.
pub(crate) fn fbl_error_raw(l: f64, r: f64, u: f64) -> f64 {
    if u == 0.0 {
        return 1.0;
    }
    // Dispersion sqrt(1 - 1/(1+u)^2) computed as sqrt(u(u+2))/(1+u) to
    // avoid cancellation at small u; at astronomically large u the product
    // u*(u+2) would overflow while the true value is 1 to machine
    // precision.
    let dispersion = if u > 1e150 {
        1.0
    } else {
        (u * (u + 2.0)).sqrt() / (1.0 + u)
    };
    let arg = l.sqrt() * (u.ln_1p() - r) / dispersion;
    gaussian_q_raw(arg)
}

/// Linearized decoding error probability, the piecewise-linear ramp used by
/// the quadratic closed-form rate allocator.
///
/// The ramp takes the value `1/2` exactly at `u = e^r - 1`, falls off with
/// slope `sqrt(L / (2 pi (e^{2r} - 1)))` in `u`, and is clamped to `[0, 1]`
/// outside the transition band.
///
/// # Example
///
/// ```
/// use noma_harq_core::errormodel::{fbl_error_linearized, CodeParams, SinrValue};
///
/// let code = CodeParams::new(1000, 1.0);
/// let mid = SinrValue::new(1.0_f64.exp_m1());
/// assert_eq!(fbl_error_linearized(&code, mid).value(), 0.5);
/// ```
pub fn fbl_error_linearized(code: &CodeParams, sinr: SinrValue) -> Probability {
    Probability::new(fbl_error_linearized_raw(code.l as f64, code.r, sinr.0))
}

/// Unwrapped kernel behind [`fbl_error_linearized`].
pub(crate) fn fbl_error_linearized_raw(l: f64, r: f64, u: f64) -> f64 {
    let mid = r.exp_m1();
    let slope = (l / (2.0 * std::f64::consts::PI * (2.0 * r).exp_m1())).sqrt();
    (0.5 - slope * (u - mid)).clamp(0.0, 1.0)
}

/// Combined decoding error after a retransmission of the same codeword.
///
/// With repetition of the identical codeword and maximal-ratio combining at
/// the receiver, the two copies' SINRs add, so the combined error is the
/// single-codeword error evaluated at `u1 + u2`.
///
/// # Example
///
/// ```
/// use noma_harq_core::errormodel::{fbl_error, rtd_combined_error, CodeParams, SinrValue};
///
/// let code = CodeParams::new(400, 1.2);
/// let single = fbl_error(&code, SinrValue::new(2.0));
/// let combined = rtd_combined_error(&code, SinrValue::new(2.0), SinrValue::new(2.0));
/// assert!(combined.value() <= single.value());
/// ```
pub fn rtd_combined_error(code: &CodeParams, first: SinrValue, second: SinrValue) -> Probability {
    Probability::new(fbl_error_raw(code.l as f64, code.r, first.0 + second.0))
}

/// Slot-one error probabilities for the two-user uplink with SIC.
///
/// The receiver decodes user 1 first, treating user 2 as noise, so user 1
/// sees SINR `g1p1 / (1 + g2p2)`. User 2 is decoded error-free on top of a
/// successful cancellation (SINR `g2p2`) and behind residual interference
/// (SINR `g2p2 / (1 + g1p1)`) otherwise; its average error weights the two
/// branches by the probability of each cancellation outcome.
///
/// `g1p1` and `g2p2` are the received powers (channel gain times transmit
/// power, noise normalized to one).
pub fn sic_slot1_error_pair(
    code1: &CodeParams,
    code2: &CodeParams,
    g1p1: SinrValue,
    g2p2: SinrValue,
) -> (Probability, Probability) {
    let l1 = code1.l as f64;
    let l2 = code2.l as f64;
    let theta1 = fbl_error_raw(l1, code1.r, g1p1.0 / (1.0 + g2p2.0));
    let clean = fbl_error_raw(l2, code2.r, g2p2.0);
    let interfered = fbl_error_raw(l2, code2.r, g2p2.0 / (1.0 + g1p1.0));
    let theta2 = (1.0 - theta1) * clean + theta1 * interfered;
    (Probability::new(theta1), Probability::new(theta2))
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn code(l: u32, r: f64) -> CodeParams {
        CodeParams::new(l, r)
    }

    #[test]
    fn zero_sinr_always_fails() {
        for &(l, r) in &[(100u32, 0.1), (1000, 2.0), (5000, 5.0)] {
            assert_eq!(fbl_error(&code(l, r), SinrValue::new(0.0)).value(), 1.0);
        }
    }

    #[test]
    fn reference_rate_hits_target_error() {
        // At L = 1000 and SINR 10, rate 2.300579 yields an error of 1e-3.
        let err = fbl_error(&code(1000, 2.300579), SinrValue::new(10.0));
        assert!((err.value() - 1e-3).abs() < 1e-6, "error = {}", err.value());
    }

    #[test]
    fn error_decreases_with_sinr() {
        let c = code(1000, 1.5);
        let mut prev = 1.0;
        for i in 0..200 {
            let u = 0.05 * i as f64;
            let e = fbl_error(&c, SinrValue::new(u)).value();
            assert!(e <= prev + 1e-15, "not monotone at u = {u}");
            prev = e;
        }
    }

    #[test]
    fn error_increases_with_rate() {
        let u = SinrValue::new(3.0);
        let mut prev = 0.0;
        for i in 1..100 {
            let r = 0.05 * i as f64;
            let e = fbl_error(&code(800, r), u).value();
            assert!(e >= prev - 1e-15, "not monotone at r = {r}");
            prev = e;
        }
    }

    #[test]
    fn longer_blocklength_sharpens_the_transition() {
        // Above capacity the error shrinks with L; below capacity it grows.
        let good = SinrValue::new(4.0); // ln(5) > 1.2
        let bad = SinrValue::new(2.0); // ln(3) < 1.2
        let short = 200u32;
        let long = 2000u32;
        assert!(
            fbl_error(&code(long, 1.2), good).value() < fbl_error(&code(short, 1.2), good).value()
        );
        assert!(
            fbl_error(&code(long, 1.2), bad).value() > fbl_error(&code(short, 1.2), bad).value()
        );
    }

    #[test]
    fn tiny_sinr_is_certain_failure_without_overflow() {
        let e = fbl_error(&code(1000, 1.0), SinrValue::new(1e-300)).value();
        assert_eq!(e, 1.0);
    }

    #[test]
    fn huge_sinr_is_certain_success() {
        let e = fbl_error(&code(1000, 1.0), SinrValue::new(1e200)).value();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn linearized_is_one_half_at_the_midpoint() {
        for &r in &[0.3, 1.0, 2.5] {
            let c = code(1000, r);
            let mid = SinrValue::new(r.exp_m1());
            assert_eq!(fbl_error_linearized(&c, mid).value(), 0.5);
        }
    }

    #[test]
    fn linearized_clamps_to_unit_interval() {
        let c = code(1000, 1.0);
        assert_eq!(fbl_error_linearized(&c, SinrValue::new(0.0)).value(), 1.0);
        assert_eq!(fbl_error_linearized(&c, SinrValue::new(50.0)).value(), 0.0);
    }

    #[test]
    fn combined_error_never_exceeds_single_copy() {
        let c = code(600, 1.4);
        for i in 0..60 {
            let u = 0.1 + 0.2 * i as f64;
            let single = fbl_error(&c, SinrValue::new(u)).value();
            let combined = rtd_combined_error(&c, SinrValue::new(u), SinrValue::new(u)).value();
            assert!(combined <= single + 1e-15, "failed at u = {u}");
        }
    }

    #[test]
    fn sic_pair_with_silent_second_user_reduces_to_single_link() {
        let c1 = code(1000, 1.0);
        let c2 = code(1000, 0.5);
        let (t1, t2) = sic_slot1_error_pair(&c1, &c2, SinrValue::new(8.0), SinrValue::new(0.0));
        let direct = fbl_error(&c1, SinrValue::new(8.0));
        assert_eq!(t1.value(), direct.value());
        // With no received power, user 2 fails with certainty.
        assert_eq!(t2.value(), 1.0);
    }

    #[test]
    fn sic_pair_interference_hurts_user_one() {
        let c1 = code(1000, 1.0);
        let c2 = code(1000, 0.5);
        let (with_interference, _) =
            sic_slot1_error_pair(&c1, &c2, SinrValue::new(8.0), SinrValue::new(4.0));
        let (without, _) = sic_slot1_error_pair(&c1, &c2, SinrValue::new(8.0), SinrValue::new(0.0));
        assert!(with_interference.value() > without.value());
    }

    #[test]
    fn payload_round_trips_through_rate() {
        let c = CodeParams::from_info_nats(500, 100.0);
        assert!((c.info_nats() - 100.0).abs() < 1e-9);
        assert!((c.rate() - 0.2).abs() < 1e-15);
    }

    #[test]
    #[should_panic(expected = "blocklength")]
    fn rejects_tiny_blocklength() {
        CodeParams::new(50, 1.0);
    }
}
