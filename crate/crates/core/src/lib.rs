//! Heterogeneous distributed zeroth-order optimization with compressed
//! communication.
//!
//! `n` agents cooperatively minimize `f(x) = (1/n) Σ f_i(x)` over an
//! undirected graph. Each agent only evaluates its own stochastic cost at two
//! points per round and only transmits a compressed difference
//! `q_i = C(x_i − y_i)` to its neighbours. The crate provides
//!
//! - [`graph`]: topology, Laplacian spectrum and the analysis matrices `E`, `F_M`;
//! - [`compressors`]: the bounded-relative-error compressor class;
//! - [`estimators`]: two-point, coordinate-wise and Gaussian ZO estimators;
//! - [`problems`]: synthetic heterogeneous objective families;
//! - [`algorithm`]: the primal-dual round, schedules and the run loop;
//! - [`analysis`]: the constants calculator and Lyapunov diagnostics;
//! - [`harness`]: configuration, CSV traces, sweeps and rate fitting.

pub mod algorithm;
pub mod analysis;
pub mod compressors;
pub mod error;
pub mod estimators;
pub mod graph;
pub mod harness;
pub mod problems;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
