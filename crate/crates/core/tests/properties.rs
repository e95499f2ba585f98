//! Property-based and statistical invariants of the model layer.
//!
//! Randomized checks complement the frozen-value oracle tests: every
//! qualitative statement the analysis relies on (monotonicity, symmetry,
//! dominance between schemes, distributional correctness of the sampler,
//! agreement between closed forms and bisection) is asserted over broad
//! randomized grids rather than at hand-picked points.

use noma_harq_core::allocation::{
    solve_power, solve_rate, LinearizedQParams, PowerMethod, RateMethod,
};
use noma_harq_core::errormodel::{fbl_error, rtd_combined_error, CodeParams, SinrValue};
use noma_harq_core::fading::{sample_gains, FadingParams, LinkConfig};
use noma_harq_core::simengine::{
    run_batch, run_batch_sequential, run_trial, run_trial_deterministic, Adaptation,
    DecodeUniforms, SchemePolicy, SchemeVariant,
};
use noma_harq_core::specfun::{
    exp_integral_ei, gaussian_q, gaussian_q_inv, lambert_w, Probability, WBranch,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn theta_strategy() -> impl Strategy<Value = f64> {
    // Log-uniform over the supported error-budget range.
    (-6.0..-0.39794f64).prop_map(|e| 10f64.powf(e))
}

fn sinr_strategy() -> impl Strategy<Value = f64> {
    (-2.0..5.0f64).prop_map(|e| 10f64.powf(e))
}

proptest! {
    #[test]
    fn gaussian_tail_is_symmetric(x in -8.0..8.0f64) {
        let total = gaussian_q(x).value() + gaussian_q(-x).value();
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn gaussian_inverse_round_trips(e in -9.0..-0.31f64) {
        let p = 10f64.powf(e);
        let x = gaussian_q_inv(Probability::new(p));
        let back = gaussian_q(x).value();
        prop_assert!(
            (back - p).abs() <= 1e-9 * p,
            "Q(Qinv({p})) = {back}"
        );
    }

    #[test]
    fn lambert_w_satisfies_its_defining_equation(
        z in prop_oneof![-0.36..-1e-3f64, 1e-3..1e6f64],
    ) {
        let w = lambert_w(z, WBranch::Principal);
        prop_assert!((w * w.exp() - z).abs() <= 1e-10 * z.abs().max(1e-12));
        if z < 0.0 {
            let w_low = lambert_w(z, WBranch::Negative);
            prop_assert!(w_low <= -1.0);
            prop_assert!((w_low * w_low.exp() - z).abs() <= 1e-10 * z.abs());
        }
    }

    #[test]
    fn exponential_integral_rises_toward_zero(
        t1 in 1e-3..50.0f64,
        factor in 1.001..10.0f64,
    ) {
        let t2 = t1 * factor;
        let lo = exp_integral_ei(-t2);
        let hi = exp_integral_ei(-t1);
        prop_assert!(lo < 0.0 && hi < 0.0);
        prop_assert!(lo > hi, "Ei(-{t2}) = {lo} should exceed Ei(-{t1}) = {hi}");
    }

    #[test]
    fn decoding_error_grows_with_rate(
        l in 100..2000u32,
        u in sinr_strategy(),
        r1 in 0.01..8.0f64,
        factor in 1.001..5.0f64,
    ) {
        let r2 = r1 * factor;
        let low = fbl_error(&CodeParams::new(l, r1), SinrValue::new(u)).value();
        let high = fbl_error(&CodeParams::new(l, r2), SinrValue::new(u)).value();
        prop_assert!(high >= low);
    }

    #[test]
    fn decoding_error_falls_with_sinr(
        l in 100..2000u32,
        r in 0.01..8.0f64,
        u1 in sinr_strategy(),
        factor in 1.001..5.0f64,
    ) {
        let u2 = u1 * factor;
        let weak = fbl_error(&CodeParams::new(l, r), SinrValue::new(u1)).value();
        let strong = fbl_error(&CodeParams::new(l, r), SinrValue::new(u2)).value();
        prop_assert!(strong <= weak);
    }

    #[test]
    fn blocklength_sharpens_the_decoding_threshold(
        l in 100..1000u32,
        u in sinr_strategy(),
    ) {
        // Longer codes push the error toward 0 below capacity and toward 1
        // above it.
        let capacity = u.ln_1p();
        let below = CodeParams::new(l, 0.5 * capacity);
        let below_long = CodeParams::new(2 * l, 0.5 * capacity);
        prop_assert!(
            fbl_error(&below_long, SinrValue::new(u)).value()
                <= fbl_error(&below, SinrValue::new(u)).value()
        );
        let above = CodeParams::new(l, 1.5 * capacity + 0.1);
        let above_long = CodeParams::new(2 * l, 1.5 * capacity + 0.1);
        prop_assert!(
            fbl_error(&above_long, SinrValue::new(u)).value()
                >= fbl_error(&above, SinrValue::new(u)).value()
        );
    }

    #[test]
    fn chase_combining_never_hurts(
        l in 100..2000u32,
        r in 0.01..8.0f64,
        ua in 0.0..1e4f64,
        ub in 0.0..1e4f64,
    ) {
        let code = CodeParams::new(l, r);
        let combined = rtd_combined_error(
            &code,
            SinrValue::new(ua),
            SinrValue::new(ub),
        )
        .value();
        prop_assert!(combined <= fbl_error(&code, SinrValue::new(ua)).value());
        prop_assert!(combined <= fbl_error(&code, SinrValue::new(ub)).value());
    }

    #[test]
    fn linearized_ramp_behaves_like_a_cdf_complement(
        l in 100..2000u32,
        r in 0.05..8.0f64,
        u1 in 0.0..1e6f64,
        u2 in 0.0..1e6f64,
    ) {
        let ramp = LinearizedQParams::for_code(l, r);
        // Exactly one half at the midpoint, monotone nonincreasing, and
        // clamped into the unit interval with a hard zero far above it.
        prop_assert_eq!(ramp.evaluate(r.exp_m1()), 0.5);
        let (lo, hi) = if u1 <= u2 { (u1, u2) } else { (u2, u1) };
        let at_hi = ramp.evaluate(hi);
        let at_lo = ramp.evaluate(lo);
        prop_assert!(at_hi <= at_lo);
        prop_assert!((0.0..=1.0).contains(&at_lo) && (0.0..=1.0).contains(&at_hi));
        prop_assert_eq!(ramp.evaluate(r.exp_m1() * (1.0 + 1e9) + 1e12), 0.0);
    }

    #[test]
    fn interference_limited_cdf_is_a_distribution(
        lambda1 in 0.01..1.0f64,
        lambda2 in 0.1..10.0f64,
        p1_db in 10.0..50.0f64,
        p2_db in 10.0..50.0f64,
        x1 in 0.0..1e3f64,
        factor in 1.001..10.0f64,
    ) {
        let code = CodeParams::new(1000, 1.0);
        let cfg = LinkConfig::new(
            FadingParams::new(lambda1, lambda2),
            10f64.powf(p1_db / 10.0),
            10f64.powf(p2_db / 10.0),
            code,
            code,
            1e-3,
            1e-3,
        );
        prop_assert_eq!(noma_harq_core::fading::sinr_cdf_u1(&cfg, 0.0), 0.0);
        let lo = noma_harq_core::fading::sinr_cdf_u1(&cfg, x1);
        let hi = noma_harq_core::fading::sinr_cdf_u1(&cfg, x1 * factor + 1e-9);
        prop_assert!((0.0..=1.0).contains(&lo));
        prop_assert!(hi >= lo);
        let far = noma_harq_core::fading::sinr_cdf_u1(&cfg, 1e12);
        prop_assert!(far > 1.0 - 1e-6);
    }

    #[test]
    fn closed_form_rate_matches_bisection(
        l in 100..2000u32,
        theta in theta_strategy(),
        u in sinr_strategy(),
    ) {
        let closed = solve_rate(
            l,
            Probability::new(theta),
            SinrValue::new(u),
            RateMethod::ClosedFormQinv,
        );
        let bisect = solve_rate(
            l,
            Probability::new(theta),
            SinrValue::new(u),
            RateMethod::Bisection,
        );
        match (closed, bisect) {
            (Ok(c), Ok(b)) => {
                prop_assume!(c.rate > 1e-9);
                prop_assert!(
                    (c.rate - b.rate).abs() <= 1e-8 * c.rate,
                    "closed {} vs bisection {}",
                    c.rate,
                    b.rate
                );
            }
            (Err(_), Err(_)) => {}
            // A root within rounding of zero may land on either side of
            // feasibility; anything larger is a genuine disagreement.
            (Ok(c), Err(_)) => prop_assume!(c.rate <= 1e-9),
            (Err(_), Ok(b)) => prop_assume!(b.rate <= 1e-9),
        }
    }

    #[test]
    fn closed_form_power_matches_bisection(
        l in 100..2000u32,
        theta in theta_strategy(),
        rate in 0.05..5.0f64,
        gain in prop_oneof![1e-3..1.0f64, 1.0..1e3f64],
    ) {
        let closed = solve_power(
            l,
            Probability::new(theta),
            rate,
            gain,
            PowerMethod::ClosedFormLambertW,
        )
        .unwrap();
        let bisect = solve_power(
            l,
            Probability::new(theta),
            rate,
            gain,
            PowerMethod::Bisection,
        )
        .unwrap();
        prop_assert!(
            (closed.power - bisect.power).abs() <= 1e-8 * closed.power,
            "closed {} vs bisection {}",
            closed.power,
            bisect.power
        );
    }
}

// ---------------------------------------------------------------------------
// Distributional checks of the gain sampler
// ---------------------------------------------------------------------------

/// One-sample Kolmogorov–Smirnov distance against an exponential CDF.
fn ks_distance(sorted: &[f64], lambda: f64) -> f64 {
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let cdf = -(-lambda * x).exp_m1();
        d = d.max(cdf - i as f64 / n).max((i + 1) as f64 / n - cdf);
    }
    d
}

#[test]
fn gain_sampler_matches_the_exponential_law() {
    const N: usize = 100_000;
    // 1% critical value for the one-sample KS statistic.
    let critical = 1.62762 / (N as f64).sqrt();
    for (lambda1, lambda2, seed) in [(0.1, 1.0, 1u64), (0.5, 2.0, 2), (1.0, 0.25, 3)] {
        let params = FadingParams::new(lambda1, lambda2);
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut g1 = Vec::with_capacity(N);
        let mut g2 = Vec::with_capacity(N);
        for _ in 0..N {
            let draw = sample_gains(&params, &mut rng);
            g1.push(draw.g1);
            g2.push(draw.g2);
        }
        g1.sort_by(f64::total_cmp);
        g2.sort_by(f64::total_cmp);
        let d1 = ks_distance(&g1, lambda1);
        let d2 = ks_distance(&g2, lambda2);
        assert!(
            d1 < critical,
            "g1 KS distance {d1} >= {critical} (seed {seed})"
        );
        assert!(
            d2 < critical,
            "g2 KS distance {d2} >= {critical} (seed {seed})"
        );
    }
}

// ---------------------------------------------------------------------------
// Scheme dominance and simulation invariants
// ---------------------------------------------------------------------------

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

#[test]
fn proposed_scheme_dominates_standard_on_every_draw() {
    let cfg = default_config();
    // Force a retransmission on every trial: user 1's slot-one decode
    // fails (uniform 0 is below any positive error probability), which
    // leaves user 2 interference-limited so its decode fails too.
    let uniforms = DecodeUniforms {
        ue1_slot1: 0.0,
        ue2_slot1: 0.0,
        ue2_combined: 0.5,
        ue1_slot2: 0.5,
    };
    let mut rng = ChaCha12Rng::seed_from_u64(99);
    let mut rate_comparisons = 0u32;
    let mut power_comparisons = 0u32;
    for _ in 0..500 {
        let draw = sample_gains(cfg.fading(), &mut rng);
        let standard_rate = run_trial_deterministic(
            &cfg,
            SchemePolicy {
                scheme: SchemeVariant::StandardNomaHarq,
                adaptation: Adaptation::RateAdapt,
            },
            &draw,
            &uniforms,
        );
        let proposed_rate = run_trial_deterministic(
            &cfg,
            SchemePolicy {
                scheme: SchemeVariant::ProposedOrderSwap,
                adaptation: Adaptation::RateAdapt,
            },
            &draw,
            &uniforms,
        );
        if let (Some(s), Some(p)) = (
            standard_rate.slot2.and_then(|s| s.rate_ue1),
            proposed_rate.slot2.and_then(|s| s.rate_ue1),
        ) {
            assert!(p >= s, "proposed rate {p} below standard {s} on {draw:?}");
            rate_comparisons += 1;
        }
        let power_policy = |scheme| SchemePolicy {
            scheme,
            adaptation: Adaptation::PowerAdapt { target_rate: 1.0 },
        };
        let standard_power = run_trial_deterministic(
            &cfg,
            power_policy(SchemeVariant::StandardNomaHarq),
            &draw,
            &uniforms,
        );
        let proposed_power = run_trial_deterministic(
            &cfg,
            power_policy(SchemeVariant::ProposedOrderSwap),
            &draw,
            &uniforms,
        );
        if let (Some(s), Some(p)) = (
            standard_power.slot2.and_then(|s| s.power_ue1),
            proposed_power.slot2.and_then(|s| s.power_ue1),
        ) {
            assert!(p <= s, "proposed power {p} above standard {s} on {draw:?}");
            // Freeing user 1 from the interferer saves exactly the
            // interference-plus-noise factor.
            let expected_ratio = 1.0 + draw.g2 * cfg.p2();
            assert!((s / p - expected_ratio).abs() <= 1e-9 * expected_ratio);
            power_comparisons += 1;
        }
    }
    assert!(
        rate_comparisons > 450,
        "only {rate_comparisons} rate comparisons"
    );
    assert!(
        power_comparisons > 450,
        "only {power_comparisons} power comparisons"
    );
}

#[test]
fn trial_records_stay_coherent_across_policies() {
    let cfg = default_config();
    let policies = [
        SchemePolicy {
            scheme: SchemeVariant::StandardNomaHarq,
            adaptation: Adaptation::RateAdapt,
        },
        SchemePolicy {
            scheme: SchemeVariant::ProposedOrderSwap,
            adaptation: Adaptation::RateAdapt,
        },
        SchemePolicy {
            scheme: SchemeVariant::ProposedOrderSwap,
            adaptation: Adaptation::PowerAdapt { target_rate: 1.0 },
        },
    ];
    for (i, policy) in policies.into_iter().enumerate() {
        let mut rng = ChaCha12Rng::seed_from_u64(1000 + i as u64);
        for _ in 0..1500 {
            let record = run_trial(&cfg, policy, &mut rng);
            assert!(record.is_coherent(), "incoherent record: {record:?}");
            if record.ue2_served && record.draw.g2 > 0.0 {
                assert!(record.rate_ue2.is_some());
            }
        }
    }
}

#[test]
fn parallel_and_sequential_agree_at_odd_sizes() {
    let cfg = default_config();
    let policy = SchemePolicy {
        scheme: SchemeVariant::ProposedOrderSwap,
        adaptation: Adaptation::RateAdapt,
    };
    for trials in [1u64, 8191, 8192, 8193, 20000] {
        let par = run_batch(&cfg, policy, trials, 2026);
        let seq = run_batch_sequential(&cfg, policy, trials, 2026);
        assert_eq!(par, seq, "divergence at {trials} trials");
    }
}

#[test]
fn combined_decoding_recovers_when_the_edge_budget_is_tighter() {
    // With the cell-edge budget an order of magnitude below the
    // cell-center budget, slot-one failures happen at rates the combined
    // decode can still serve, so most retransmissions succeed.
    let code = CodeParams::new(200, 1.0);
    let cfg = LinkConfig::new(
        FadingParams::new(0.1, 1.0),
        1000.0,
        1000.0,
        code,
        code,
        1e-2,
        1e-3,
    );
    let policy = SchemePolicy {
        scheme: SchemeVariant::ProposedOrderSwap,
        adaptation: Adaptation::RateAdapt,
    };
    let stats = run_batch(&cfg, policy, 100_000, 5);
    assert!(stats.ue2_slot1_errors > 50);
    assert!(
        2 * stats.ue2_slot2_errors < stats.ue2_slot1_errors,
        "residual {} vs slot-one {}",
        stats.ue2_slot2_errors,
        stats.ue2_slot1_errors
    );
}
