//! The environment as seen from the walker, `θ_{−X_t} η_t`: ergodic
//! averages, semigroup-difference integrals and the rate-continuity check.

mod continuity;
mod difference;
mod ergodic;

pub use continuity::{continuity_bound_check, never_decouple_lower_bound, semigroup_constant, ContinuityRecord};
pub use difference::{phi_weighted_integral, semigroup_difference_integral, DifferenceIntegral, DifferenceOptions, DifferenceRow};
pub use ergodic::{estimate_mu_ep, estimate_mu_ep_snapshots, ErgodicAverage, ErgodicOptions, InitialLaw};
