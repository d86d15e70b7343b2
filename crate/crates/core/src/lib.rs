//! Exact Age-of-Information analysis for discrete-time dual-queue (DTDQ)
//! status-update systems with transmission freezing.
//!
//! A single source samples a physical process on demand and transmits
//! status updates over two servers with discrete phase-type (DPH) service
//! times. After every sample the source is frozen for `k` slots. The crate
//! builds the absorbing Markov chain that tracks one update cycle, solves
//! the companion recurrent chain for the initial state distribution, and
//! evaluates the exact AoI and peak-AoI distributions and moments. A
//! slot-level Monte Carlo simulator cross-validates the analysis and covers
//! the zero-wait (`k = 0`) benchmark, and a sweep layer searches for the
//! AoI-optimal freezing parameter.

pub mod amc;
pub mod cli;
pub mod config;
pub mod dph;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod optimizer;
pub mod output;
pub mod reproduce;
pub mod rmc;
pub mod sim;
pub mod state_space;

pub use amc::{AmcModel, BaseSystem, PriorityPolicy, SystemConfig};
pub use dph::DphDistribution;
pub use error::{Error, Result};
pub use metrics::AoiReport;
pub use sim::SimResult;
pub use state_space::{AmcState, RmcState, StateSpace};
