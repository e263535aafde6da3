//! Exact finite-state continuous-time Markov chains.
//!
//! `P_t` is evaluated by uniformization,
//! `P_t f = Σ_n Pois(Λt)(n) P̃^n f` with `P̃ = I + Q/Λ`, truncated once the
//! remaining Poisson mass falls below the chain's tail tolerance.

mod chain;
mod paths;

pub use chain::{poisson_weights, FiniteChain, PoissonWeights};
pub use paths::{enumerate_paths, feynman_kac, occupation_tail, EnumeratedPath, PathSet, VolterraSolver};
