//! # broyden-lab
//!
//! A laboratory for Broyden-family quasi-Newton methods on square nonlinear
//! systems `F(x) = 0`, centered on greedy and randomized choices of the
//! rank-one update direction.
//!
//! The crate provides:
//!
//! * [`densealg`] — small dense column-major kernels (LU with partial
//!   pivoting, power-iteration norms, condition numbers) sized for
//!   desk-scale experiments;
//! * [`broyden`] — the rank-one secant updates (classical, "bad", greedy,
//!   randomized) with an explicitly maintained inverse via Sherman–Morrison;
//! * [`problems`] — benchmark systems (seeded linear systems, a regularized
//!   log-sum-exp gradient system, the Chandrasekhar H-equation) with analytic
//!   Jacobians, finite-difference checks and constant estimation;
//! * [`solver`] — a status-driven iteration driver that records per-iteration
//!   traces and serializes them as CSV plus a JSON metadata sidecar;
//! * [`theory`] — closed-form convergence-rate evaluators and audits that
//!   compare recorded runs against the rates;
//! * [`verify`] — named, seeded check suites gluing the above together
//!   (also exposed by the CLI's `verify` subcommand).
//!
//! Everything is deterministic given a 64-bit seed: randomness flows through
//! named ChaCha8 streams (see [`rng`]), and traces written twice from the
//! same configuration are bitwise identical.

pub mod broyden;
pub mod cli;
pub mod densealg;
pub mod error;
pub mod problems;
pub mod rng;
pub mod solver;
pub mod theory;
pub mod verify;

pub use error::{Error, Result};
