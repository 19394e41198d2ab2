//! flexmg — algebraic multigrid with flexible, grammar-generated cycles.
//!
//! The solve phase of a classical AMG method is expressed as a small
//! program over a fixed level hierarchy: a sequence of smoothing steps,
//! restrictions, and scaled coarse-grid corrections that may move up and
//! down the top levels in any balanced order. A context-free grammar
//! generates only valid cycle programs, and a two-objective (μ+λ)
//! genetic optimizer with NSGA-II selection searches for cycles that are
//! simultaneously cheap per iteration and fast to converge. Programs run
//! either as standalone stationary solvers or as preconditioners inside
//! conjugate gradient.
//!
//! Start with the crate examples (`cargo run --example ...`) or the
//! `flexmg` binary for the file-based workflow.

pub mod cli;
pub mod cycle;
pub mod error;
pub mod evo;
pub mod rng;
pub mod setup;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};
