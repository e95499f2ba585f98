//! Scalar special functions used throughout the crate.
//!
//! Everything here is pure `f64` math with no allocation: the Gaussian tail
//! probability and its inverse, the exponential integral on the negative
//! real axis, and the two real branches of the Lambert W function. These are
//! the primitives behind the finite-blocklength error model and the
//! closed-form rate/power allocations, so each routine documents its
//! accuracy target and asserts its domain.
//!
//! # Example
//!
//! ```
//! use noma_harq_core::specfun::{gaussian_q, gaussian_q_inv};
//!
//! let p = gaussian_q(1.2815515655446004);
//! assert!((p.value() - 0.1).abs() < 1e-13);
//! assert!((gaussian_q_inv(p) - 1.2815515655446004).abs() < 1e-10);
//! ```

// ---------------------------------------------------------------------------
// Constants
// ---------------------------------------------------------------------------

/// Euler–Mascheroni constant.
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
/// `1 / sqrt(2 * pi)`.
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
/// `sqrt(pi)`.
const SQRT_PI: f64 = 1.772_453_850_905_516;
/// `-1 / e`, the branch point of the Lambert W function.
const NEG_INV_E: f64 = -0.367_879_441_171_442_33;

// ---------------------------------------------------------------------------
// Public types
// ---------------------------------------------------------------------------

/// A probability, guaranteed finite and inside `[0, 1]`.
///
/// The wrapper keeps error probabilities honest as they flow between the
/// error model, the solvers, and the simulation engine: constructing one
/// from a NaN or an out-of-range value panics at the source instead of
/// corrupting a downstream statistic.
///
/// # Example
///
/// ```
/// use noma_harq_core::specfun::Probability;
///
/// let p = Probability::new(0.25);
/// assert_eq!(p.value(), 0.25);
/// ```
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Probability(f64);

impl Probability {
    /// Wraps `value` as a probability.
    ///
    /// # Panics
    ///
    /// Panics if `value` is NaN, infinite, or outside `[0, 1]`.
    pub fn new(value: f64) -> Self {
        assert!(
            value.is_finite() && (0.0..=1.0).contains(&value),
            "Probability::new: value must be finite and in [0, 1], got {value}"
        );
        Self(value)
    }

    /// Returns the wrapped value.
    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

impl std::fmt::Display for Probability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Selects a real branch of the Lambert W function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WBranch {
    /// The principal branch `W0`, defined on `[-1/e, +inf)` with values in
    /// `[-1, +inf)`.
    Principal,
    /// The lower branch `W-1`, defined on `[-1/e, 0)` with values in
    /// `(-inf, -1]`.
    Negative,
}

// ---------------------------------------------------------------------------
// Gaussian tail probability
// ---------------------------------------------------------------------------

/// Gaussian tail probability `Q(x) = P(N(0,1) > x)`.
///
/// Relative error is below `1e-12` for `|x| <= 8`; beyond that the result is
/// correct to better than `1e-300` absolute error, underflowing to zero in
/// the far right tail (around `x > 38.5`) where the true value is not
/// representable.
///
/// # Example
///
/// ```
/// use noma_harq_core::specfun::gaussian_q;
///
/// assert_eq!(gaussian_q(0.0).value(), 0.5);
/// assert!(gaussian_q(40.0).value() < 1e-300);
/// ```
pub fn gaussian_q(x: f64) -> Probability {
    assert!(!x.is_nan(), "gaussian_q: x must not be NaN");
    Probability::new(gaussian_q_raw(x))
}

/// `gaussian_q` without the `Probability` wrapper, for hot loops.
pub(crate) fn gaussian_q_raw(x: f64) -> f64 {
    0.5 * erfc(x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Complementary error function, accurate to ~1e-14 relative for `z >= 0`.
fn erfc(z: f64) -> f64 {
    if z < 0.0 {
        return 2.0 - erfc(-z);
    }
    if z <= 2.0 {
        1.0 - erf_series(z)
    } else {
        erfc_continued_fraction(z)
    }
}

/// Positive-term power series for `erf(z)`, converging quickly for
/// `0 <= z <= 2`:
/// `erf(z) = (2 z e^{-z^2} / sqrt(pi)) * sum_{n>=0} (2 z^2)^n / (1*3*...*(2n+1))`.
fn erf_series(z: f64) -> f64 {
    let z2 = z * z;
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..200u32 {
        term *= 2.0 * z2 / (2 * n + 1) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    2.0 * z * (-z2).exp() / SQRT_PI * sum
}

/// Continued fraction for `erfc(z)`, `z > 2` (modified Lentz):
/// `erfc(z) = e^{-z^2}/sqrt(pi) * 1/(z + (1/2)/(z + (2/2)/(z + (3/2)/(z + ...))))`.
fn erfc_continued_fraction(z: f64) -> f64 {
    let gauss = (-z * z).exp();
    if gauss == 0.0 {
        // The prefactor already underflows; the true value is below the
        // smallest subnormal.
        return 0.0;
    }
    const TINY: f64 = 1e-300;
    let mut f = z;
    let mut c = f;
    let mut d = 0.0;
    for n in 1..200u32 {
        let a = 0.5 * n as f64;
        d = z + a * d;
        if d == 0.0 {
            d = TINY;
        }
        c = z + a / c;
        if c == 0.0 {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    gauss / (SQRT_PI * f)
}

// ---------------------------------------------------------------------------
// Inverse Gaussian tail probability
// ---------------------------------------------------------------------------

/// Inverse of [`gaussian_q`]: returns `x` such that `Q(x) = p`.
///
/// The result round-trips through `gaussian_q` to a relative error of
/// `1e-10` or better. Antisymmetry is exact by construction:
/// `gaussian_q_inv(1 - p) == -gaussian_q_inv(p)`.
///
/// # Panics
///
/// Panics if `p` is `0` or `1` (the inverse is unbounded there).
///
/// # Example
///
/// ```
/// use noma_harq_core::specfun::{gaussian_q_inv, Probability};
///
/// assert_eq!(gaussian_q_inv(Probability::new(0.5)), 0.0);
/// let x = gaussian_q_inv(Probability::new(1e-3));
/// assert!((x - 3.090232306167813).abs() < 1e-9);
/// ```
pub fn gaussian_q_inv(p: Probability) -> f64 {
    let p = p.value();
    assert!(
        p > 0.0 && p < 1.0,
        "gaussian_q_inv: p must lie strictly inside (0, 1), got {p}"
    );
    if p == 0.5 {
        0.0
    } else if p > 0.5 {
        // 1 - p is exact for p in [0.5, 1] (Sterbenz), so antisymmetry holds
        // to the last bit.
        -gaussian_q_inv_upper(1.0 - p)
    } else {
        gaussian_q_inv_upper(p)
    }
}

/// Inverse tail for `0 < p < 0.5` (positive abscissa).
fn gaussian_q_inv_upper(p: f64) -> f64 {
    // Rational initial approximation (about 3 decimal digits), then Halley
    // steps on f(x) = Q(x) - p, which converge to full precision in two
    // iterations almost everywhere.
    let t = (-2.0 * p.ln()).sqrt();
    let mut x = t - (2.30753 + 0.27061 * t) / (1.0 + t * (0.99229 + 0.04481 * t));
    for _ in 0..4 {
        let f = gaussian_q_raw(x) - p;
        let phi = FRAC_1_SQRT_2PI * (-0.5 * x * x).exp();
        if phi == 0.0 {
            break;
        }
        let dx = 2.0 * f / (2.0 * phi - f * x);
        x += dx;
        if dx.abs() <= 1e-14 * x.abs().max(1.0) {
            break;
        }
    }
    // Round-trip verification with a bisection rescue. The rescue virtually
    // never runs; it exists so the accuracy contract survives pathological
    // rounding.
    let q = gaussian_q_raw(x);
    if (q - p).abs() > 1e-11 * p {
        let (mut lo, mut hi) = (0.0_f64, 45.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if gaussian_q_raw(mid) > p {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi.max(1.0) {
                break;
            }
        }
        x = 0.5 * (lo + hi);
    }
    x
}

// ---------------------------------------------------------------------------
// Exponential integral
// ---------------------------------------------------------------------------

/// Exponential integral `Ei(x)` for strictly negative arguments.
///
/// For `x < 0`, `Ei(x) = -E1(-x)` where `E1` is the principal exponential
/// integral; the value is always negative and increases monotonically toward
/// zero as `x -> -inf`. Accuracy is ~1e-14 relative across the domain.
///
/// # Panics
///
/// Panics if `x >= 0` or `x` is NaN.
///
/// # Example
///
/// ```
/// use noma_harq_core::specfun::exp_integral_ei;
///
/// assert!((exp_integral_ei(-1.0) - (-0.21938393439552026)).abs() < 1e-13);
/// ```
pub fn exp_integral_ei(x: f64) -> f64 {
    assert!(
        x < 0.0,
        "exp_integral_ei: argument must be strictly negative, got {x}"
    );
    -e1(-x)
}

/// Principal exponential integral `E1(t)` for `t > 0`.
fn e1(t: f64) -> f64 {
    if t <= 1.0 {
        // Alternating power series:
        // E1(t) = -gamma - ln t + sum_{k>=1} (-1)^{k+1} t^k / (k * k!).
        let mut sum = 0.0;
        let mut pow = 1.0; // t^k / k!
        let mut sign = 1.0;
        for k in 1..=80u32 {
            pow *= t / k as f64;
            let term = sign * pow / k as f64;
            sum += term;
            sign = -sign;
            if term.abs() < 1e-18 {
                break;
            }
        }
        -EULER_GAMMA - t.ln() + sum
    } else {
        (-t).exp() * e1_continued_fraction(t)
    }
}

/// The scaled tail `e^t E1(t)` via its continued fraction, for `t > 1`:
/// `e^t E1(t) = 1 / (t + 1 - 1^2/(t + 3 - 2^2/(t + 5 - ...)))`,
/// evaluated backward at fixed depth.
fn e1_continued_fraction(t: f64) -> f64 {
    let mut tail = 0.0;
    for k in (1..=160u32).rev() {
        let kk = (k as f64) * (k as f64);
        tail = kk / (t + (2 * k + 1) as f64 - tail);
    }
    1.0 / (t + 1.0 - tail)
}

/// Scaled exponential integral `e^t E1(t)` for `t > 0`.
///
/// Stable for arbitrarily large `t`, where the two factors overflow and
/// underflow separately; the expectation formulas are built from this
/// quantity.
pub(crate) fn scaled_e1(t: f64) -> f64 {
    assert!(
        t > 0.0 && !t.is_nan(),
        "scaled_e1: argument must be strictly positive, got {t}"
    );
    if t <= 1.0 {
        t.exp() * e1(t)
    } else {
        e1_continued_fraction(t)
    }
}

// ---------------------------------------------------------------------------
// Lambert W
// ---------------------------------------------------------------------------

/// Real Lambert W function: solves `w * e^w = z` on the requested branch.
///
/// The result satisfies the defining equation with residual at most
/// `1e-12 * max(1, |z|)`. At the branch point `z = -1/e` both branches
/// return exactly `-1`.
///
/// # Panics
///
/// Panics if `z` lies outside the branch domain: `[-1/e, +inf)` for
/// [`WBranch::Principal`], `[-1/e, 0)` for [`WBranch::Negative`].
///
/// # Example
///
/// ```
/// use noma_harq_core::specfun::{lambert_w, WBranch};
///
/// assert_eq!(lambert_w(0.0, WBranch::Principal), 0.0);
/// let w = lambert_w(-0.2, WBranch::Negative);
/// assert!((w * w.exp() - (-0.2)).abs() < 1e-12);
/// ```
pub fn lambert_w(z: f64, branch: WBranch) -> f64 {
    assert!(z.is_finite(), "lambert_w: z must be finite, got {z}");
    // Accept arguments within a couple of ulps below the representable
    // branch point: callers that compute z = -t*e^{-t} can land there.
    let z = if (NEG_INV_E * (1.0 + 8.0 * f64::EPSILON)..NEG_INV_E).contains(&z) {
        NEG_INV_E
    } else {
        z
    };
    match branch {
        WBranch::Principal => assert!(
            z >= NEG_INV_E,
            "lambert_w: principal branch requires z >= -1/e, got {z}"
        ),
        WBranch::Negative => assert!(
            (NEG_INV_E..0.0).contains(&z),
            "lambert_w: lower branch requires -1/e <= z < 0, got {z}"
        ),
    }
    if z == 0.0 {
        return 0.0;
    }

    // Square-root expansion around the branch point, used both as the final
    // answer very close to -1/e and as an initial guess nearby.
    let p2 = 2.0 * (1.0 + std::f64::consts::E * z).max(0.0);
    let p = p2.sqrt();
    let near_branch = |sign: f64| -> f64 {
        -1.0 + sign * p - p2 / 6.0 + sign * 11.0 / 72.0 * p2 * p - 43.0 / 540.0 * p2 * p2
    };

    let mut w = match branch {
        WBranch::Principal => {
            if z < -0.25 {
                near_branch(1.0)
            } else if z < 2.0 {
                z.ln_1p()
            } else {
                let l1 = z.ln();
                let l2 = l1.ln();
                l1 - l2 + l2 / l1
            }
        }
        WBranch::Negative => {
            if z < -0.25 {
                near_branch(-1.0)
            } else {
                let l1 = (-z).ln();
                let l2 = (-l1).ln();
                l1 - l2 + l2 / l1
            }
        }
    };

    // Halley refinement. Near the branch point the series value is already
    // accurate and the Halley denominator degenerates, so it is skipped.
    if p2 > 1e-6 {
        for _ in 0..40 {
            let ew = w.exp();
            let f = w * ew - z;
            if f == 0.0 {
                break;
            }
            let wp1 = w + 1.0;
            if wp1.abs() < 1e-8 {
                break;
            }
            let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
            let dw = f / denom;
            w -= dw;
            if dw.abs() <= 1e-16 * w.abs().max(1e-3) {
                break;
            }
        }
    }

    // Bisection rescue on the rare failure of the iteration to meet the
    // residual contract.
    let tol = 1e-12 * z.abs().max(1.0);
    if (w * w.exp() - z).abs() > tol {
        w = lambert_w_bisect(z, branch);
    }
    debug_assert!(
        (w * w.exp() - z).abs() <= tol,
        "lambert_w: residual contract violated at z = {z}"
    );
    w
}

/// Plain bisection fallback for [`lambert_w`]; `g(w) = w e^w - z` is
/// monotone on each branch.
fn lambert_w_bisect(z: f64, branch: WBranch) -> f64 {
    let g = |w: f64| w * w.exp() - z;
    let (mut lo, mut hi) = match branch {
        WBranch::Principal => {
            // g is increasing on [-1, inf); grow hi until g(hi) >= 0.
            let mut hi = 1.0_f64;
            while g(hi) < 0.0 {
                hi *= 2.0;
            }
            (-1.0, hi)
        }
        WBranch::Negative => {
            // g is decreasing on (-inf, -1]; push lo down until g(lo) >= 0.
            let mut lo = -2.0_f64;
            while g(lo) < 0.0 {
                lo *= 2.0;
            }
            (lo, -1.0)
        }
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let gm = g(mid);
        let positive_side_is_hi = matches!(branch, WBranch::Principal);
        if (gm <= 0.0) == positive_side_is_hi {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() <= f64::EPSILON * hi.abs().max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_at_zero_is_one_half() {
        assert_eq!(gaussian_q(0.0).value(), 0.5);
    }

    #[test]
    fn q_far_tail_underflows_cleanly() {
        let v = gaussian_q(40.0).value();
        assert!((0.0..1e-300).contains(&v));
    }

    #[test]
    fn q_known_values() {
        // Reference values for Q at a few abscissas (standard normal tail).
        let cases = [
            (0.5, 0.3085375387259869),
            (1.0, 0.15865525393145705),
            (2.0, 0.022750131948179195),
            (3.090232306167813, 1e-3),
            (5.0, 2.866515718791939e-7),
            (8.0, 6.22096057427178e-16),
        ];
        for (x, q) in cases {
            let got = gaussian_q(x).value();
            assert!(((got - q) / q).abs() < 1e-12, "Q({x}): got {got}, want {q}");
        }
    }

    #[test]
    fn q_symmetry() {
        for &x in &[0.1, 0.7, 1.5, 3.3, 6.0] {
            let s = gaussian_q(x).value() + gaussian_q(-x).value();
            assert!((s - 1.0).abs() < 1e-14, "symmetry failed at {x}");
        }
    }

    #[test]
    fn q_inv_at_one_half_is_exactly_zero() {
        assert_eq!(gaussian_q_inv(Probability::new(0.5)), 0.0);
    }

    #[test]
    fn q_inv_round_trips() {
        for &p in &[1e-300, 1e-12, 1e-6, 1e-3, 0.05, 0.3, 0.499, 0.73, 0.999] {
            let x = gaussian_q_inv(Probability::new(p));
            let q = gaussian_q(x).value();
            assert!(
                ((q - p) / p).abs() < 1e-10,
                "round trip failed at p = {p}: x = {x}, Q(x) = {q}"
            );
        }
    }

    #[test]
    fn q_inv_matches_reference_point() {
        let x = gaussian_q_inv(Probability::new(1e-3));
        assert!((x - 3.090232306167813).abs() < 1e-9);
    }

    #[test]
    fn q_inv_is_antisymmetric_exactly() {
        // For p >= 0.5 the complement 1 - p is exact, so the two halves
        // must agree to the last bit.
        for &p_hi in &[0.9999, 0.99, 0.8, 0.55] {
            let upper = gaussian_q_inv(Probability::new(p_hi));
            let lower = gaussian_q_inv(Probability::new(1.0 - p_hi));
            assert_eq!(upper, -lower);
        }
    }

    #[test]
    #[should_panic(expected = "strictly inside")]
    fn q_inv_rejects_zero() {
        gaussian_q_inv(Probability::new(0.0));
    }

    #[test]
    fn ei_reference_values() {
        assert!((exp_integral_ei(-1.0) - (-0.21938393439552026)).abs() < 1e-14);
        let v = exp_integral_ei(-10.0);
        assert!(
            ((v - (-4.156968929685324e-6)) / 4.156968929685324e-6).abs() < 1e-11,
            "Ei(-10) = {v}"
        );
        assert!(exp_integral_ei(-1e-12) < -20.0);
    }

    #[test]
    fn ei_is_monotone_on_negative_axis() {
        // Ei(x) -> 0- as x -> -inf and Ei(x) -> -inf as x -> 0-, so it
        // decreases as x increases through the negative axis.
        let mut prev = exp_integral_ei(-30.0);
        for &x in &[-10.0, -3.0, -1.0, -0.3, -0.01, -1e-6] {
            let v = exp_integral_ei(x);
            assert!(v < 0.0);
            assert!(v < prev, "Ei must decrease toward 0-, failed at {x}");
            prev = v;
        }
    }

    #[test]
    #[should_panic(expected = "strictly negative")]
    fn ei_rejects_nonnegative() {
        exp_integral_ei(0.0);
    }

    #[test]
    fn scaled_e1_is_stable_far_beyond_exp_overflow() {
        // e^t E1(t) ~ 1/t (1 - 1/t + 2/t^2 - ...) for large t.
        let v = scaled_e1(1000.0);
        let asymptotic = (1.0 - 1e-3 + 2e-6 - 6e-9) / 1000.0;
        assert!(
            ((v - asymptotic) / asymptotic).abs() < 1e-9,
            "scaled_e1(1000) = {v}"
        );
        assert!(scaled_e1(1e12).is_finite());
        // Consistency with the unscaled value where both are representable.
        let t = 5.0;
        assert!((scaled_e1(t) - (-t.exp() * exp_integral_ei(-t))).abs() < 1e-15);
    }

    #[test]
    fn lambert_w_basics() {
        assert_eq!(lambert_w(0.0, WBranch::Principal), 0.0);
        assert_eq!(lambert_w(NEG_INV_E, WBranch::Principal), -1.0);
        assert_eq!(lambert_w(NEG_INV_E, WBranch::Negative), -1.0);
        // W0(1) is the omega constant.
        let w = lambert_w(1.0, WBranch::Principal);
        assert!((w - 0.5671432904097838).abs() < 1e-13);
    }

    #[test]
    fn lambert_w_satisfies_defining_equation() {
        let zs = [
            -0.367, -0.35, -0.2, -0.05, -1e-4, 1e-4, 0.3, 1.0, 5.0, 1e3, 1e12,
        ];
        for &z in &zs {
            let w = lambert_w(z, WBranch::Principal);
            assert!(
                (w * w.exp() - z).abs() <= 1e-12 * z.abs().max(1.0),
                "principal residual too large at z = {z}"
            );
        }
        for &z in &[-0.367, -0.3, -0.1, -1e-3, -1e-9, -1e-100] {
            let w = lambert_w(z, WBranch::Negative);
            assert!(w <= -1.0);
            assert!(
                (w * w.exp() - z).abs() <= 1e-12 * z.abs().max(1.0),
                "lower-branch residual too large at z = {z}"
            );
        }
    }

    #[test]
    fn lambert_w_solver_reference_point() {
        // Point exercised by the slot-2 power solver.
        let w = lambert_w(-0.0327, WBranch::Principal);
        assert!((w - (-0.0338)).abs() < 1e-3);
        assert!((w * w.exp() + 0.0327).abs() < 1e-15);
    }

    #[test]
    #[should_panic(expected = "principal branch requires")]
    fn lambert_w_rejects_below_branch_point() {
        lambert_w(-0.5, WBranch::Principal);
    }
}
