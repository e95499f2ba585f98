//! Monte Carlo engine for the two-user HARQ cycle.
//!
//! One *trial* is one transmission cycle of at most two slots over a single
//! quasi-static channel draw. In slot one both users transmit; the receiver
//! decodes user 1 first (behind user 2's interference), cancels it on
//! success, then decodes user 2. Rates are allocated per draw so that each
//! user's slot-one decoding error equals its budget exactly. If user 2's
//! slot-one decode fails, the cycle enters slot two: user 2 retransmits the
//! identical codeword (the receiver combines the two copies so their SINRs
//! add) while user 1 piggybacks *new* data on the retransmission slot.
//!
//! The two [`SchemeVariant`]s differ only in the slot-two decoding order.
//! The conventional schedule again decodes user 1 first, behind
//! interference. The order-swapping schedule decodes user 2's combined
//! copies first — they are nearly always decodable — and then user 1
//! interference-free, which is what lets user 1 carry a far higher rate or
//! a far lower power in that slot (the [`Adaptation`] picks which).
//!
//! # Determinism
//!
//! Trial `i` of a batch draws from stream `i` of a counter-based generator
//! seeded by the caller, and every trial consumes exactly two uniforms for
//! the channel and four for the decode outcomes, whether or not each
//! outcome is reached. Batch statistics are accumulated in fixed-size
//! chunks that are combined in index order, so [`run_batch`] returns
//! bit-identical results for any worker count — including the
//! single-threaded [`run_batch_sequential`] fallback.
//!
//! # Example
//!
//! ```
//! use noma_harq_core::errormodel::CodeParams;
//! use noma_harq_core::fading::{FadingParams, LinkConfig};
//! use noma_harq_core::simengine::{
//!     run_batch, Adaptation, SchemePolicy, SchemeVariant,
//! };
//!
//! let code = CodeParams::new(1000, 1.0);
//! let cfg = LinkConfig::new(FadingParams::new(0.1, 1.0), 1000.0, 1000.0,
//!                           code, code, 1e-3, 1e-3);
//! let policy = SchemePolicy {
//!     scheme: SchemeVariant::ProposedOrderSwap,
//!     adaptation: Adaptation::RateAdapt,
//! };
//! let stats = run_batch(&cfg, policy, 10_000, 42);
//! assert_eq!(stats.trials, 10_000);
//! ```

use crate::allocation::{solve_power, solve_rate, solve_rate_slot1_ue2, PowerMethod, RateMethod};
use crate::errormodel::{fbl_error, rtd_combined_error, SinrValue};
use crate::fading::{sample_gains, ChannelDraw, LinkConfig};
use crate::numerics::RunningMoments;
use crate::specfun::Probability;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

// ---------------------------------------------------------------------------
// Policies
// ---------------------------------------------------------------------------

/// Which receiver schedule the simulated system runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeVariant {
    /// Conventional schedule: user 1 is decoded first in every slot,
    /// always behind user 2's interference.
    StandardNomaHarq,
    /// Proposed schedule: in a retransmission slot the receiver first
    /// decodes user 2's combined copies, then user 1 interference-free on
    /// success.
    ProposedOrderSwap,
}

/// How user 1 adapts its slot-two transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Adaptation {
    /// Keep the power, adapt the rate to the slot-two channel.
    RateAdapt,
    /// Keep this target rate, adapt the power to the slot-two channel.
    PowerAdapt {
        /// Rate (nats per channel use) the power must sustain.
        target_rate: f64,
    },
}

/// A scheme variant paired with a slot-two adaptation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemePolicy {
    /// The receiver schedule.
    pub scheme: SchemeVariant,
    /// User 1's slot-two behavior.
    pub adaptation: Adaptation,
}

/// The four uniforms deciding the decode outcomes of one trial, in the
/// fixed order they are drawn from the trial's stream. An outcome with
/// error probability `p` fails iff its uniform is below `p`; unreached
/// outcomes leave their uniform unused.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodeUniforms {
    /// User 1's slot-one decode.
    pub ue1_slot1: f64,
    /// User 2's slot-one decode.
    pub ue2_slot1: f64,
    /// User 2's combined decode after the retransmission.
    pub ue2_combined: f64,
    /// User 1's slot-two decode.
    pub ue1_slot2: f64,
}

// ---------------------------------------------------------------------------
// Trial records
// ---------------------------------------------------------------------------

/// What happened in the retransmission slot of one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotTwoRecord {
    /// Rate of user 1's fresh slot-two codeword; `None` when user 1 stayed
    /// silent in this slot.
    pub rate_ue1: Option<f64>,
    /// Transmit power user 1 used in this slot; present iff the rate is.
    pub power_ue1: Option<f64>,
    /// Outcome of user 1's slot-two decode; present iff the rate is.
    pub ue1_ok: Option<bool>,
    /// Outcome of user 2's combined two-copy decode.
    pub ue2_combined_ok: bool,
}

/// Complete account of one transmission cycle.
///
/// Structural invariants, upheld by [`run_trial_deterministic`] and
/// checkable with [`HarqTrialRecord::is_coherent`]:
///
/// * slot-two fields are present iff `slot1_ue2_ok` is `Some(false)` — a
///   retransmission happens exactly when user 2 was served and failed;
/// * each `*_ok` field is present iff the transmission it judges happened.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarqTrialRecord {
    /// The channel draw this cycle ran on.
    pub draw: ChannelDraw,
    /// User 1's slot-one rate; `None` when the allocation was infeasible
    /// and user 1 stayed silent for the whole cycle.
    pub rate_ue1_slot1: Option<f64>,
    /// Outcome of user 1's slot-one decode; present iff user 1 transmitted.
    pub slot1_ue1_ok: Option<bool>,
    /// Whether user 2 transmitted this cycle. A served user 2 may still
    /// lack a rate: on a dead channel (`g2 = 0`) no rate is allocatable and
    /// both of its decodes fail with certainty.
    pub ue2_served: bool,
    /// User 2's slot-one rate, when one was allocatable.
    pub rate_ue2: Option<f64>,
    /// Outcome of user 2's slot-one decode; present iff served.
    pub slot1_ue2_ok: Option<bool>,
    /// The retransmission slot; present iff user 2 was served and failed.
    pub slot2: Option<SlotTwoRecord>,
}

impl HarqTrialRecord {
    /// Verifies the structural invariants listed on the type.
    pub fn is_coherent(&self) -> bool {
        let ue1_fields_match = self.rate_ue1_slot1.is_some() == self.slot1_ue1_ok.is_some();
        let ue2_fields_match = self.ue2_served == self.slot1_ue2_ok.is_some()
            && (self.rate_ue2.is_none() || self.ue2_served);
        let slot2_iff_failed = self.slot2.is_some() == (self.slot1_ue2_ok == Some(false));
        let slot2_internal = self.slot2.is_none_or(|s| {
            s.rate_ue1.is_some() == s.power_ue1.is_some()
                && s.rate_ue1.is_some() == s.ue1_ok.is_some()
        });
        ue1_fields_match && ue2_fields_match && slot2_iff_failed && slot2_internal
    }
}

// ---------------------------------------------------------------------------
// Aggregate statistics
// ---------------------------------------------------------------------------

/// Batch-level tallies and moments, mergeable across chunks.
///
/// Error *rates* are exposed as methods; the raw counts are public so
/// callers can form their own ratios. "Served" trials are the denominator
/// for user 2's statistics: cycles where no slot-one rate could meet its
/// budget (`ue2_infeasible_trials`) leave user 2 unserved and run user 1
/// alone on a clean channel.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AggregateStats {
    /// Total trials accumulated.
    pub trials: u64,
    /// Trials where user 1's slot-one allocation was infeasible.
    pub ue1_infeasible_trials: u64,
    /// Trials where user 2 could not be served at its budget.
    pub ue2_infeasible_trials: u64,
    /// Trials in which user 1 transmitted in slot one.
    pub ue1_slot1_trials: u64,
    /// ... and how many of those decodes failed.
    pub ue1_slot1_errors: u64,
    /// Trials in which user 2 transmitted (served).
    pub ue2_slot1_trials: u64,
    /// ... and how many of its slot-one decodes failed.
    pub ue2_slot1_errors: u64,
    /// Retransmission slots run (equals `ue2_slot1_errors`).
    pub retransmissions: u64,
    /// Retransmissions where user 1 had succeeded in slot one.
    pub retrans_after_ue1_ok: u64,
    /// Retransmissions where user 1 had also failed in slot one.
    pub retrans_after_ue1_fail: u64,
    /// Cycles where user 1 failed slot one but user 2 succeeded, so no
    /// retransmission was run and user 1's message is simply lost.
    pub ue1_failed_ue2_ok: u64,
    /// Slot-two transmissions by user 1.
    pub ue1_slot2_trials: u64,
    /// ... and how many of those decodes failed.
    pub ue1_slot2_errors: u64,
    /// Retransmissions whose combined decode still failed: user 2's
    /// message is undelivered after the full cycle.
    pub ue2_slot2_errors: u64,
    rate_ue1_slot1: RunningMoments,
    rate_ue1_slot2: RunningMoments,
    power_ue1_slot2: RunningMoments,
}

impl AggregateStats {
    /// Absorbs another accumulator; chunk order must be fixed for
    /// bit-identical results.
    fn merge(&mut self, other: &Self) {
        self.trials += other.trials;
        self.ue1_infeasible_trials += other.ue1_infeasible_trials;
        self.ue2_infeasible_trials += other.ue2_infeasible_trials;
        self.ue1_slot1_trials += other.ue1_slot1_trials;
        self.ue1_slot1_errors += other.ue1_slot1_errors;
        self.ue2_slot1_trials += other.ue2_slot1_trials;
        self.ue2_slot1_errors += other.ue2_slot1_errors;
        self.retransmissions += other.retransmissions;
        self.retrans_after_ue1_ok += other.retrans_after_ue1_ok;
        self.retrans_after_ue1_fail += other.retrans_after_ue1_fail;
        self.ue1_failed_ue2_ok += other.ue1_failed_ue2_ok;
        self.ue1_slot2_trials += other.ue1_slot2_trials;
        self.ue1_slot2_errors += other.ue1_slot2_errors;
        self.ue2_slot2_errors += other.ue2_slot2_errors;
        self.rate_ue1_slot1.merge(&other.rate_ue1_slot1);
        self.rate_ue1_slot2.merge(&other.rate_ue1_slot2);
        self.power_ue1_slot2.merge(&other.power_ue1_slot2);
    }

    /// Folds one trial record into the tallies.
    fn accumulate(&mut self, rec: &HarqTrialRecord) {
        self.trials += 1;
        match (rec.rate_ue1_slot1, rec.slot1_ue1_ok) {
            (Some(rate), Some(ok)) => {
                self.ue1_slot1_trials += 1;
                self.ue1_slot1_errors += u64::from(!ok);
                self.rate_ue1_slot1.push(rate);
            }
            _ => self.ue1_infeasible_trials += 1,
        }
        if !rec.ue2_served {
            self.ue2_infeasible_trials += 1;
        } else {
            self.ue2_slot1_trials += 1;
            let ue2_ok = rec.slot1_ue2_ok.expect("served user has an outcome");
            self.ue2_slot1_errors += u64::from(!ue2_ok);
            if ue2_ok && rec.slot1_ue1_ok == Some(false) {
                self.ue1_failed_ue2_ok += 1;
            }
        }
        if let Some(slot2) = rec.slot2 {
            self.retransmissions += 1;
            match rec.slot1_ue1_ok {
                Some(true) => self.retrans_after_ue1_ok += 1,
                Some(false) => self.retrans_after_ue1_fail += 1,
                None => {}
            }
            if let (Some(rate), Some(power), Some(ok)) =
                (slot2.rate_ue1, slot2.power_ue1, slot2.ue1_ok)
            {
                self.ue1_slot2_trials += 1;
                self.ue1_slot2_errors += u64::from(!ok);
                self.rate_ue1_slot2.push(rate);
                self.power_ue1_slot2.push(power);
            }
            self.ue2_slot2_errors += u64::from(!slot2.ue2_combined_ok);
        }
    }

    /// Mean slot-one rate of user 1 over its transmissions.
    pub fn mean_rate_ue1_slot1(&self) -> f64 {
        self.rate_ue1_slot1.mean()
    }

    /// Standard error of [`Self::mean_rate_ue1_slot1`].
    pub fn se_rate_ue1_slot1(&self) -> f64 {
        self.rate_ue1_slot1.std_error_of_mean()
    }

    /// Mean slot-two rate of user 1 over its slot-two transmissions.
    pub fn mean_rate_ue1_slot2(&self) -> f64 {
        self.rate_ue1_slot2.mean()
    }

    /// Standard error of [`Self::mean_rate_ue1_slot2`].
    pub fn se_rate_ue1_slot2(&self) -> f64 {
        self.rate_ue1_slot2.std_error_of_mean()
    }

    /// Mean transmit power of user 1 in slot two.
    pub fn mean_power_ue1_slot2(&self) -> f64 {
        self.power_ue1_slot2.mean()
    }

    /// Standard error of [`Self::mean_power_ue1_slot2`].
    pub fn se_power_ue1_slot2(&self) -> f64 {
        self.power_ue1_slot2.std_error_of_mean()
    }

    /// Fraction of served cycles that needed a retransmission; by design
    /// this estimates user 2's slot-one error budget.
    pub fn retransmission_fraction(&self) -> f64 {
        self.retransmissions as f64 / self.ue2_slot1_trials as f64
    }

    /// Realized slot-one error rate of user 1.
    pub fn ue1_slot1_error_rate(&self) -> f64 {
        self.ue1_slot1_errors as f64 / self.ue1_slot1_trials as f64
    }

    /// Realized slot-two error rate of user 1.
    pub fn ue1_slot2_error_rate(&self) -> f64 {
        self.ue1_slot2_errors as f64 / self.ue1_slot2_trials as f64
    }

    /// Realized slot-one error rate of user 2 over served cycles.
    pub fn ue2_slot1_error_rate(&self) -> f64 {
        self.ue2_slot1_errors as f64 / self.ue2_slot1_trials as f64
    }

    /// Fraction of served cycles whose message was still undelivered after
    /// the full cycle (slot-one failure and combined-decode failure).
    pub fn ue2_residual_error_rate(&self) -> f64 {
        self.ue2_slot2_errors as f64 / self.ue2_slot1_trials as f64
    }

    /// Binomial standard error for a rate with `events` successes out of
    /// `n` observations.
    pub fn proportion_se(p_hat: f64, n: u64) -> f64 {
        (p_hat * (1.0 - p_hat) / n as f64).sqrt()
    }
}

// ---------------------------------------------------------------------------
// Single trial
// ---------------------------------------------------------------------------

/// Runs one trial, drawing the channel and the decode uniforms from `rng`.
///
/// Consumes exactly six uniforms regardless of the cycle's path: two for
/// the gains, then the four of [`DecodeUniforms`] in field order.
pub fn run_trial<R: Rng + ?Sized>(
    config: &LinkConfig,
    policy: SchemePolicy,
    rng: &mut R,
) -> HarqTrialRecord {
    let draw = sample_gains(config.fading(), rng);
    let uniforms = DecodeUniforms {
        ue1_slot1: rng.random(),
        ue2_slot1: rng.random(),
        ue2_combined: rng.random(),
        ue1_slot2: rng.random(),
    };
    run_trial_deterministic(config, policy, &draw, &uniforms)
}

/// Runs one trial on a fixed channel draw with fixed decode uniforms.
///
/// This is the deterministic kernel behind [`run_trial`], exposed so tests
/// can steer every branch of the cycle.
pub fn run_trial_deterministic(
    config: &LinkConfig,
    policy: SchemePolicy,
    draw: &ChannelDraw,
    uniforms: &DecodeUniforms,
) -> HarqTrialRecord {
    let l1 = config.code1().blocklength();
    let theta1 = Probability::new(config.theta1());
    let g1p1 = draw.g1 * config.p1();
    let g2p2 = draw.g2 * config.p2();
    let u1_interfered = g1p1 / (1.0 + g2p2);

    // --- Allocation cascade -----------------------------------------------
    // User 1 first, at its slot-one (interference-limited) SINR.
    let r1 = solve_rate(
        l1,
        theta1,
        SinrValue::new(u1_interfered),
        RateMethod::ClosedFormQinv,
    )
    .ok();
    let ue1_active = r1.is_some();
    // User 2's rate balances the two cancellation outcomes, weighted by the
    // probability that user 1's decode fails — zero if user 1 is silent.
    let theta1_effective = if ue1_active { config.theta1() } else { 0.0 };
    let r2 = solve_rate_slot1_ue2(config, draw, Probability::new(theta1_effective));

    let (ue2_served, rate_ue2) = match r2 {
        Ok(sol) => (true, Some(sol.rate)),
        // A dead channel cannot be served at any rate, but user 2 still
        // transmits and fails both slots with certainty; it creates no
        // interference.
        Err(_) if g2p2 == 0.0 => (true, None),
        // Otherwise user 2 sits this cycle out and user 1, if active, runs
        // alone on a clean channel with a re-allocated rate.
        Err(_) => (false, None),
    };

    if !ue2_served {
        let record = if let Some(_interfered) = r1 {
            // Feasibility at the interfered SINR implies feasibility at the
            // clean one (the rate allocation crosses zero once, from
            // below, in the SINR).
            let clean = solve_rate(l1, theta1, SinrValue::new(g1p1), RateMethod::ClosedFormQinv)
                .expect("clean allocation is feasible whenever the interfered one is");
            let fail = fbl_error(&config.code1().with_rate(clean.rate), SinrValue::new(g1p1));
            HarqTrialRecord {
                draw: *draw,
                rate_ue1_slot1: Some(clean.rate),
                slot1_ue1_ok: Some(uniforms.ue1_slot1 >= fail.value()),
                ue2_served: false,
                rate_ue2: None,
                slot1_ue2_ok: None,
                slot2: None,
            }
        } else {
            HarqTrialRecord {
                draw: *draw,
                rate_ue1_slot1: None,
                slot1_ue1_ok: None,
                ue2_served: false,
                rate_ue2: None,
                slot1_ue2_ok: None,
                slot2: None,
            }
        };
        debug_assert!(record.is_coherent());
        return record;
    }

    // --- Slot one -----------------------------------------------------------
    let slot1_ue1_ok = r1.as_ref().map(|sol| {
        let fail = fbl_error(
            &config.code1().with_rate(sol.rate),
            SinrValue::new(u1_interfered),
        );
        uniforms.ue1_slot1 >= fail.value()
    });
    // SIC: user 2 decodes clean if user 1 is out of the way (silent or
    // cancelled), behind residual interference otherwise.
    let u2_slot1 = if slot1_ue1_ok.unwrap_or(true) {
        g2p2
    } else {
        g2p2 / (1.0 + g1p1)
    };
    let slot1_ue2_ok = match rate_ue2 {
        Some(rate) => {
            let fail = fbl_error(&config.code2().with_rate(rate), SinrValue::new(u2_slot1));
            uniforms.ue2_slot1 >= fail.value()
        }
        None => false, // dead channel: certain failure
    };

    if slot1_ue2_ok {
        let record = HarqTrialRecord {
            draw: *draw,
            rate_ue1_slot1: r1.map(|s| s.rate),
            slot1_ue1_ok,
            ue2_served: true,
            rate_ue2,
            slot1_ue2_ok: Some(true),
            slot2: None,
        };
        debug_assert!(record.is_coherent());
        return record;
    }

    // --- Slot two -----------------------------------------------------------
    // User 2 retransmits the same codeword; the receiver will combine this
    // copy with the slot-one copy received at u2_slot1. User 1, if active,
    // sends new data alongside.
    let ue1_slot2_plan: Option<(f64, f64)> = if !ue1_active {
        None
    } else {
        match policy.adaptation {
            Adaptation::RateAdapt => match policy.scheme {
                // Order swap: user 1 will be decoded after cancellation,
                // so its rate is allocated at the clean SINR.
                SchemeVariant::ProposedOrderSwap => {
                    solve_rate(l1, theta1, SinrValue::new(g1p1), RateMethod::ClosedFormQinv)
                        .ok()
                        .map(|sol| (sol.rate, config.p1()))
                }
                // Conventional: user 1 faces the same interfered SINR as in
                // slot one, so the slot-one rate is already the allocation.
                SchemeVariant::StandardNomaHarq => r1.as_ref().map(|sol| (sol.rate, config.p1())),
            },
            Adaptation::PowerAdapt { target_rate } => {
                if draw.g1 == 0.0 {
                    None
                } else {
                    let effective_gain = match policy.scheme {
                        SchemeVariant::ProposedOrderSwap => draw.g1,
                        SchemeVariant::StandardNomaHarq => draw.g1 / (1.0 + g2p2),
                    };
                    let sol = solve_power(
                        l1,
                        theta1,
                        target_rate,
                        effective_gain,
                        PowerMethod::ClosedFormLambertW,
                    )
                    .expect("a positive target rate is always reachable");
                    Some((target_rate, sol.power))
                }
            }
        }
    };

    let ue1_power_slot2 = ue1_slot2_plan.map_or(0.0, |(_, p)| p);
    let ue1_in_slot2 = ue1_slot2_plan.is_some();

    // The retransmitted copy as received during slot two, before any
    // cancellation of user 1.
    let copy2_interfered = if ue1_in_slot2 {
        g2p2 / (1.0 + draw.g1 * ue1_power_slot2)
    } else {
        g2p2
    };

    let combined_fail_prob = |second_copy: f64| -> f64 {
        match rate_ue2 {
            Some(rate) => rtd_combined_error(
                &config.code2().with_rate(rate),
                SinrValue::new(u2_slot1),
                SinrValue::new(second_copy),
            )
            .value(),
            None => 1.0, // dead channel: certain failure
        }
    };

    let ue1_fail_prob_at = |rate: f64, sinr: f64| -> f64 {
        fbl_error(&config.code1().with_rate(rate), SinrValue::new(sinr)).value()
    };

    let (ue2_combined_ok, slot2_ue1_ok) = match policy.scheme {
        SchemeVariant::ProposedOrderSwap => {
            // Combined decode first, treating user 1's new signal as noise;
            // user 1 is then decoded clean on success, interfered on failure.
            let combined_ok = uniforms.ue2_combined >= combined_fail_prob(copy2_interfered);
            let ue1_ok = ue1_slot2_plan.map(|(rate, power)| {
                let sinr = if combined_ok {
                    draw.g1 * power
                } else {
                    draw.g1 * power / (1.0 + g2p2)
                };
                uniforms.ue1_slot2 >= ue1_fail_prob_at(rate, sinr)
            });
            (combined_ok, ue1_ok)
        }
        SchemeVariant::StandardNomaHarq => {
            // User 1 first, always interfered; its cancellation decides
            // whether the second copy combines clean.
            let ue1_ok = ue1_slot2_plan.map(|(rate, power)| {
                let sinr = draw.g1 * power / (1.0 + g2p2);
                uniforms.ue1_slot2 >= ue1_fail_prob_at(rate, sinr)
            });
            let second_copy = match ue1_ok {
                Some(true) | None => g2p2,
                Some(false) => copy2_interfered,
            };
            let combined_ok = uniforms.ue2_combined >= combined_fail_prob(second_copy);
            (combined_ok, ue1_ok)
        }
    };

    let record = HarqTrialRecord {
        draw: *draw,
        rate_ue1_slot1: r1.map(|s| s.rate),
        slot1_ue1_ok,
        ue2_served: true,
        rate_ue2,
        slot1_ue2_ok: Some(false),
        slot2: Some(SlotTwoRecord {
            rate_ue1: ue1_slot2_plan.map(|(r, _)| r),
            power_ue1: ue1_slot2_plan.map(|(_, p)| p),
            ue1_ok: slot2_ue1_ok,
            ue2_combined_ok,
        }),
    };
    debug_assert!(record.is_coherent());
    record
}

// ---------------------------------------------------------------------------
// Batches
// ---------------------------------------------------------------------------

/// Trials per accumulation chunk; fixed so the merge order (and therefore
/// every floating-point operation) is independent of the worker count.
const CHUNK_TRIALS: u64 = 8192;

fn chunk_stats(
    config: &LinkConfig,
    policy: SchemePolicy,
    seed: u64,
    start: u64,
    end: u64,
) -> AggregateStats {
    let base = ChaCha12Rng::seed_from_u64(seed);
    let mut stats = AggregateStats::default();
    for trial in start..end {
        let mut rng = base.clone();
        rng.set_stream(trial);
        let record = run_trial(config, policy, &mut rng);
        stats.accumulate(&record);
    }
    stats
}

fn chunk_ranges(trials: u64) -> Vec<(u64, u64)> {
    (0..trials.div_ceil(CHUNK_TRIALS))
        .map(|c| {
            let start = c * CHUNK_TRIALS;
            (start, (start + CHUNK_TRIALS).min(trials))
        })
        .collect()
}

/// Runs `trials` independent cycles and aggregates their statistics,
/// in parallel when the `parallel` feature is enabled (the default).
///
/// Trial `i` always uses stream `i` seeded by `seed`, and chunk results are
/// folded in index order, so the output is bit-identical across worker
/// counts and to [`run_batch_sequential`]. To pin the worker count, call
/// inside a configured `rayon` thread pool's `install`.
///
/// # Panics
///
/// Panics if `trials` is zero.
pub fn run_batch(
    config: &LinkConfig,
    policy: SchemePolicy,
    trials: u64,
    seed: u64,
) -> AggregateStats {
    assert!(trials > 0, "run_batch: trials must be positive");
    #[cfg(feature = "parallel")]
    {
        let chunks: Vec<AggregateStats> = chunk_ranges(trials)
            .into_par_iter()
            .map(|(start, end)| chunk_stats(config, policy, seed, start, end))
            .collect();
        let mut total = AggregateStats::default();
        for chunk in &chunks {
            total.merge(chunk);
        }
        total
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_batch_sequential(config, policy, trials, seed)
    }
}

/// Single-threaded twin of [`run_batch`]; always available, and
/// bit-identical to it because both fold the same chunks in the same order.
///
/// # Panics
///
/// Panics if `trials` is zero.
pub fn run_batch_sequential(
    config: &LinkConfig,
    policy: SchemePolicy,
    trials: u64,
    seed: u64,
) -> AggregateStats {
    assert!(trials > 0, "run_batch_sequential: trials must be positive");
    let mut total = AggregateStats::default();
    for (start, end) in chunk_ranges(trials) {
        let chunk = chunk_stats(config, policy, seed, start, end);
        total.merge(&chunk);
    }
    total
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
