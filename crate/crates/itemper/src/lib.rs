//! Interacting tempering: an adaptive MCMC sampler built from a ladder of
//! tempered distributions, where each chain proposes states from the recorded
//! history of the next-hotter chain.
//!
//! The crate provides:
//! - a model zoo (Ising, Potts, Curie-Weiss Potts, Edwards-Anderson spin
//!   glass, edge-triangle ERGM, needle-in-a-haystack) behind a common
//!   sufficient-statistic interface ([`models`]),
//! - the local-move kernels and their couplings ([`kernels`]),
//! - the interacting tempering engine with its activation/collection
//!   schedule and history buffers ([`engine`]),
//! - a coupled-pair construction with coalescence instrumentation
//!   ([`coupling`]),
//! - estimators and convergence diagnostics: exact TV distance, event-based
//!   TV lower bounds, d(t)/d-bar(t), PSRF, uniformity tests ([`analysis`]),
//! - a config-driven experiment runner ([`config`], [`experiments`]).

pub mod analysis;
pub mod config;
pub mod coupling;
pub mod engine;
pub mod experiments;
pub mod kernels;
pub mod models;
pub mod state;
pub mod streams;

use thiserror::Error;

/// Crate-wide error type. `Config` errors map to CLI exit code 2,
/// `Guard` errors to exit code 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error("guard: {0}")]
    Guard(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
