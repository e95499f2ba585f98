//! Root bracketing and adaptive quadrature.
//!
//! Two small, dependency-free workhorses shared by the allocation solvers
//! and the expectation integrals: a guarded bisection with a fixed sign
//! convention, and an adaptive 7/15-point Gauss–Kronrod rule. Both report
//! enough diagnostics (iteration counts, error estimates) for callers to
//! enforce their own accuracy contracts.

// ---------------------------------------------------------------------------
// Bisection
// ---------------------------------------------------------------------------

/// Outcome of a bisection search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectionResult {
    /// Midpoint of the final bracket.
    pub root: f64,
    /// Number of interval halvings performed.
    pub iterations: u32,
    /// Width of the final bracket.
    pub bracket_width: f64,
}

/// Bisection on a bracketing interval with the convention `g(lo) <= 0 < g(hi)`.
///
/// The update rule keeps `g(lo) <= 0`: a midpoint with `g(mid) <= 0` moves
/// `lo` up. If `g` has a flat region at zero, the search therefore converges
/// to the *upper* edge of that region — callers that treat "equal to the
/// target" as acceptable get the largest acceptable argument.
///
/// Stops when the bracket width falls below `rel_tol * max(1, |mid|)` or
/// after 200 halvings, whichever comes first.
///
/// # Panics
///
/// Panics if the initial bracket does not satisfy `lo < hi`,
/// `g(lo) <= 0`, and `g(hi) > 0`.
///
/// # Example
///
/// ```
/// use noma_harq_core::numerics::bisect;
///
/// let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-13);
/// assert!((r.root - std::f64::consts::SQRT_2).abs() < 1e-12);
/// ```
pub fn bisect<F: Fn(f64) -> f64>(g: F, lo: f64, hi: f64, rel_tol: f64) -> BisectionResult {
    assert!(
        lo < hi && lo.is_finite() && hi.is_finite(),
        "bisect: invalid interval [{lo}, {hi}]"
    );
    assert!(
        g(lo) <= 0.0,
        "bisect: bracket violated, g(lo) > 0 at lo = {lo}"
    );
    assert!(
        g(hi) > 0.0,
        "bisect: bracket violated, g(hi) <= 0 at hi = {hi}"
    );
    let (mut lo, mut hi) = (lo, hi);
    let mut iterations = 0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // The bracket no longer contains a representable interior point.
            break;
        }
        iterations += 1;
        if g(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= rel_tol * mid.abs().max(1.0) {
            break;
        }
    }
    BisectionResult {
        root: 0.5 * (lo + hi),
        iterations,
        bracket_width: hi - lo,
    }
}

// ---------------------------------------------------------------------------
// Adaptive Gauss–Kronrod quadrature
// ---------------------------------------------------------------------------

/// Outcome of an adaptive quadrature pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    /// The integral estimate.
    pub value: f64,
    /// Conservative absolute error estimate (sum of per-panel
    /// Kronrod-minus-Gauss differences).
    pub abs_error_estimate: f64,
    /// Total number of integrand evaluations.
    pub evaluations: u64,
}

/// 15-point Kronrod abscissas on `[0, 1]` (symmetric about the origin).
/// Odd indices are the embedded 7-point Gauss abscissas.
const XGK: [f64; 7] = [
    0.991_455_371_120_813,
    0.949_107_912_342_759,
    0.864_864_423_359_769,
    0.741_531_185_599_394,
    0.586_087_235_467_691,
    0.405_845_151_377_397,
    0.207_784_955_007_898,
];

/// Kronrod weights for [`XGK`]; the last entry weights the midpoint.
const WGK: [f64; 8] = [
    0.022_935_322_010_529,
    0.063_092_092_629_979,
    0.104_790_010_322_250,
    0.140_653_259_715_525,
    0.169_004_726_639_267,
    0.190_350_578_064_785,
    0.204_432_940_075_298,
    0.209_482_141_084_728,
];

/// 7-point Gauss weights; the last entry weights the midpoint.
const WG: [f64; 4] = [
    0.129_484_966_168_870,
    0.279_705_391_489_277,
    0.381_830_050_505_119,
    0.417_959_183_673_469,
];

/// Single Gauss–Kronrod 7/15 panel on `[a, b]`: returns the Kronrod
/// estimate and `|Kronrod - Gauss|` as its error proxy.
fn gk15_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (j, (&x, &wk)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let dx = h * x;
        let pair = f(c - dx) + f(c + dx);
        kronrod += wk * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    kronrod *= h;
    gauss *= h;
    (kronrod, (kronrod - gauss).abs())
}

/// Adaptive quadrature of `f` over the finite interval `[a, b]`.
///
/// Panels whose Kronrod-minus-Gauss difference exceeds their share of
/// `abs_tol` are split in half, each half inheriting half the tolerance, up
/// to a depth of 40. The returned [`QuadratureResult::abs_error_estimate`]
/// is the sum of per-panel differences and is typically a large
/// overestimate of the true error for smooth integrands.
///
/// # Panics
///
/// Panics if `a >= b`, either endpoint is non-finite, or `abs_tol <= 0`.
///
/// # Example
///
/// ```
/// use noma_harq_core::numerics::integrate;
///
/// let r = integrate(|x| x.sin(), 0.0, std::f64::consts::PI, 1e-12);
/// assert!((r.value - 2.0).abs() < 1e-12);
/// assert!(r.abs_error_estimate <= 1e-12);
/// ```
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64) -> QuadratureResult {
    assert!(
        a < b && a.is_finite() && b.is_finite(),
        "integrate: invalid interval [{a}, {b}]"
    );
    assert!(abs_tol > 0.0, "integrate: abs_tol must be positive");
    let mut evaluations = 0;
    let (value, abs_error_estimate) = adapt(&f, a, b, abs_tol, 0, &mut evaluations);
    QuadratureResult {
        value,
        abs_error_estimate,
        evaluations,
    }
}

fn adapt<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    depth: u32,
    evaluations: &mut u64,
) -> (f64, f64) {
    let (value, err) = gk15_panel(f, a, b);
    *evaluations += 15;
    let width_exhausted = (b - a).abs() <= f64::EPSILON * a.abs().max(b.abs()).max(1.0);
    if err <= tol || depth >= 40 || width_exhausted {
        return (value, err);
    }
    let mid = 0.5 * (a + b);
    let (v1, e1) = adapt(f, a, mid, 0.5 * tol, depth + 1, evaluations);
    let (v2, e2) = adapt(f, mid, b, 0.5 * tol, depth + 1, evaluations);
    (v1 + v2, e1 + e2)
}

// ---------------------------------------------------------------------------
// Running moments
// ---------------------------------------------------------------------------

/// Numerically stable running mean and variance (Welford's algorithm) with
/// an exact pairwise merge.
///
/// Both the sequential and the data-parallel simulation paths accumulate
/// per-chunk moments with [`push`](RunningMoments::push) and then combine
/// chunks in a fixed order with [`merge`](RunningMoments::merge), so the
/// two paths perform bit-identical floating-point work.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunningMoments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningMoments {
    /// An empty accumulator.
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one observation.
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Absorbs another accumulator, as if its observations had been pushed
    /// after this one's.
    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let total = self.count + other.count;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / total as f64;
        self.m2 +=
            other.m2 + delta * delta * (self.count as f64 * other.count as f64) / total as f64;
        self.count = total;
    }

    /// Number of observations.
    pub fn count(&self) -> u64 {
        self.count
    }

    /// Sample mean; NaN when empty.
    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.mean
        }
    }

    /// Standard error of the mean, `sqrt(m2 / (n (n - 1)))`; NaN below two
    /// observations.
    pub fn std_error_of_mean(&self) -> f64 {
        if self.count < 2 {
            f64::NAN
        } else {
            (self.m2 / (self.count as f64 * (self.count - 1) as f64)).sqrt()
        }
    }
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_sqrt_two() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14);
        assert!((r.root - std::f64::consts::SQRT_2).abs() < 1e-13);
        assert!(r.iterations <= 200);
    }

    #[test]
    fn bisect_converges_to_upper_edge_of_flat_region() {
        // g is exactly zero on [1, 2]; the convention picks the upper edge.
        let g = |x: f64| {
            if x < 1.0 {
                -1.0
            } else if x <= 2.0 {
                0.0
            } else {
                1.0
            }
        };
        let r = bisect(g, 0.0, 4.0, 1e-12);
        assert!((r.root - 2.0).abs() < 1e-9, "root = {}", r.root);
    }

    #[test]
    #[should_panic(expected = "bracket violated")]
    fn bisect_rejects_bad_bracket() {
        bisect(|x| x, 1.0, 2.0, 1e-12);
    }

    #[test]
    fn integrate_polynomial_is_near_exact() {
        // Kronrod-15 integrates low-degree polynomials exactly; the error
        // estimate must reflect that.
        let r = integrate(|x| x * x, 0.0, 1.0, 1e-12);
        assert!((r.value - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.evaluations, 15);
    }

    #[test]
    fn integrate_sine_over_half_period() {
        let r = integrate(|x| x.sin(), 0.0, std::f64::consts::PI, 1e-13);
        assert!((r.value - 2.0).abs() < 1e-13);
    }

    #[test]
    fn integrate_decide_to_refine_on_sharp_peak() {
        // A narrow Lorentzian forces subdivision; the estimate must still
        // land within the requested tolerance of the analytic value.
        let w = 1e-3;
        let f = |x: f64| w / (w * w + (x - 0.3) * (x - 0.3));
        let exact = ((1.0 - 0.3) / w).atan() + (0.3 / w).atan();
        let r = integrate(f, 0.0, 1.0, 1e-10);
        assert!((r.value - exact).abs() < 1e-9, "value = {}", r.value);
        assert!(r.evaluations > 15);
    }

    #[test]
    fn integrate_exponential_tail_segment() {
        // e^{-x} over [0, 40]: effectively the full Laplace integral.
        let r = integrate(|x| (-x).exp(), 0.0, 40.0, 1e-12);
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn moments_match_direct_formulas() {
        let xs = [1.0, 2.5, -0.5, 4.0, 4.0, 0.0, 7.25];
        let mut m = RunningMoments::new();
        for &x in &xs {
            m.push(x);
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        assert!((m.mean() - mean).abs() < 1e-14);
        assert!((m.std_error_of_mean() - (var / n).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn merged_moments_equal_sequentially_pushed_moments() {
        // Chunked accumulation with ordered merges must reproduce the exact
        // result of one pass, which is what makes the parallel and
        // sequential engines bit-identical.
        let xs: Vec<f64> = (0..1000)
            .map(|i| ((i * 2654435761_u64) % 997) as f64)
            .collect();
        let chunked = {
            let mut total = RunningMoments::new();
            for chunk in xs.chunks(128) {
                let mut part = RunningMoments::new();
                for &x in chunk {
                    part.push(x);
                }
                total.merge(&part);
            }
            total
        };
        let mut chunked_again = RunningMoments::new();
        for chunk in xs.chunks(128) {
            let mut part = RunningMoments::new();
            for &x in chunk {
                part.push(x);
            }
            chunked_again.merge(&part);
        }
        assert_eq!(chunked, chunked_again);
        // And the statistics agree with a direct one-pass fold to near
        // machine precision.
        let mut direct = RunningMoments::new();
        for &x in &xs {
            direct.push(x);
        }
        assert!((chunked.mean() - direct.mean()).abs() < 1e-12);
        assert!((chunked.std_error_of_mean() - direct.std_error_of_mean()).abs() < 1e-12);
        assert_eq!(chunked.count(), direct.count());
    }

    #[test]
    fn empty_moments_are_nan() {
        let m = RunningMoments::new();
        assert!(m.mean().is_nan());
        assert!(m.std_error_of_mean().is_nan());
        assert_eq!(m.count(), 0);
    }
}
