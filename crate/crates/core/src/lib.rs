//! Geometric dephasing of a driven qubit under slow classical noise.
//!
//! A field of fixed strength sweeps cones on the Bloch sphere; the two
//! eigenstates pick up a Berry phase difference, and echo pulses cancel the
//! dynamic part. Slow noise along the field axis still randomizes the
//! geometric part. This crate simulates that and predicts it:
//!
//! - [`noise`]: Ornstein-Uhlenbeck noise with an exact discrete update.
//! - [`schedule`]: cone trajectories, the built-in echo sequences and the
//!   two modified ones that balance the noise coupling.
//! - [`propagator`]: step-wise exact unitaries, ideal swap pulses and
//!   eigenbasis readout.
//! - [`analytics`]: filter functions, closed-form dephasing exponents and an
//!   exact linear-response oracle.
//! - [`ensemble`]: parallel Monte Carlo averages with bootstrap errors.
//! - [`cli`]: the `berrydd` command line.
//!
//! Units: B₀ = 1, so times are in 1/B₀ and κ = B₀/ω_B.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod cli;
pub mod ensemble;
pub mod noise;
pub mod propagator;
pub mod rng;
pub mod schedule;
