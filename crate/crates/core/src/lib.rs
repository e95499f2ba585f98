//! # noma-harq-core
//!
//! Link-level model of a two-user uplink NOMA pair with HARQ under
//! finite-blocklength coding, together with the closed-form rate and power
//! allocation machinery needed to drive it.
//!
//! The system served by this crate:
//!
//! * Two user equipments share the same uplink resource. UE1 is the
//!   cell-center user (strong mean channel gain), UE2 is the cell-edge user
//!   (weak mean channel gain). The base station runs successive interference
//!   cancellation: UE1 is decoded first while UE2's signal is treated as
//!   noise, then UE2 is decoded on the cleaned signal.
//! * Channels are quasi-static Rayleigh: squared gains are exponential with
//!   per-user rate parameters, constant within an HARQ cycle.
//! * Codewords are short, so decoding error probabilities follow the
//!   finite-blocklength normal approximation instead of the asymptotic
//!   capacity law.
//! * UE2 uses repetition-based HARQ with at most one retransmission per
//!   cycle; the receiver maximum-ratio-combines the two copies, modeled as
//!   SINR accumulation. When UE2's first transmission fails, the second slot
//!   may either keep the standard decoding order or swap it: decode UE2
//!   first from the combined copies, cancel it, then decode UE1 free of
//!   interference. The swap lets UE1 raise its rate (or cut its power) in
//!   the retransmission slot.
//!
//! Modules mirror that pipeline: [`specfun`] holds scalar special functions,
//! [`errormodel`] the finite-blocklength error probabilities, [`fading`] the
//! channel model, [`allocation`] the per-draw rate/power solvers,
//! [`expectation`] fading-averaged closed forms and quadrature references,
//! [`simengine`] the Monte Carlo engine, and [`selftest`] grid-based
//! cross-checks between independent evaluation paths.
//!
//! Monte Carlo batches are deterministic: every trial derives its own
//! counter-based RNG stream from the batch seed, so results are identical
//! across thread counts and across the parallel/sequential paths.

pub mod allocation;
pub mod errormodel;
pub mod expectation;
pub mod fading;
pub mod numerics;
pub mod selftest;
pub mod simengine;
pub mod specfun;
