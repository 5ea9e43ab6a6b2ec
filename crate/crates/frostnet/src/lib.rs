//! Simulation library for decentralized first-order optimization over
//! directed graphs.
//!
//! The library provides:
//!
//! * [`digraph`] — directed graphs with mandatory self-loops, strong
//!   connectivity checks, and seeded generators;
//! * [`weights`] — row-/column-/doubly-stochastic weight matrices with
//!   Perron eigenvectors and contraction estimates;
//! * [`problems`] — per-agent objectives (quadratic suite, distributed
//!   logistic regression) with analytic gradients;
//! * [`algorithms`] — synchronous-round iteration engines: FROST and the
//!   baselines (DGD, doubly-stochastic gradient tracking, push-sum,
//!   subgradient-push, ADD-OPT, AB, row-stochastic diminishing-step);
//! * [`oracle`] — centralized ground truth, finite-difference gradient
//!   checks, contraction checks, linear-rate fitting, and the small LTI
//!   step-size certificate;
//! * [`harness`] — experiment orchestration, step-size tuning, sparsity
//!   sweeps, and CSV trace export.

pub mod algorithms;
pub mod digraph;
pub mod error;
pub mod harness;
pub mod oracle;
pub mod problems;
pub mod weights;

pub use error::FrostError;

// The public API traffics in nalgebra types; re-export so downstream
// crates stay version-matched.
pub use nalgebra;
