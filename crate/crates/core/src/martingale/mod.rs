//! Backwards martingales `M(t) = P_{T−t} f(Y_t) − P_T f(Y_0)` and the
//! concentration and moment bounds built on them, for any process exposing
//! its semigroup.

mod bounds;
mod exponential;
mod generator;
mod provider;
mod qv;

pub use bounds::{
    additive_functional_bound, additive_tail_value, certify_additive_constants, certify_point_constants, exact_additive_tail, moment_bound, point_tail_value, tail_bound,
    verify_tail_bound, AdditiveReport, Constants, MomentReport, StartLaw, TailReport,
};
pub use exponential::{expected_exponential, exponential_supermartingale, jump_oscillation, psi_series, ExponentialPath, SeriesOptions, SeriesValue};
pub use generator::{centered_moment, centered_power, increment_moment, ladder_limit, precondition_ladder, upper_lower_generator, GeneratorLimit, LadderOptions, PreconditionLadder};
pub use provider::{obs, vector_obs, LadderOnly, Obs, SampledProvider, SemigroupProvider};
pub use qv::{carre_du_champ, expected_qv, martingale_defect, BackwardsMartingale, JumpPath};
