//! Simulation and verification toolkit for random walks driven by
//! Markovian dynamic environments on a torus.
//!
//! The library is organised bottom-up:
//!
//! * [`lattice`]: torus geometry, configurations, local functions and their seminorms.
//! * [`environments`]: environment dynamics with shared-draw self couplings.
//! * [`coupling`]: the two-walker coupling with sandwich walkers and decoupling time.
//! * [`env_process`]: the environment seen from the walker.
//! * [`limits`]: speed, Einstein relation, diffusivity, tails and recurrence diagnostics.
//! * [`martingale`]: backwards martingales, generators, quadratic variation and bounds.
//! * [`ctmc`]: exact finite-state chains used as an oracle.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::excessive_precision, clippy::redundant_guards)]

pub mod coupling;
pub mod ctmc;
pub mod env_process;
pub mod environments;
pub mod error;
pub mod grid;
pub mod lattice;
pub mod limits;
pub mod martingale;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
