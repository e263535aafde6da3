//! Environment dynamics and their shared-draw self couplings.
//!
//! Every model is simulated by a graphical construction: each site carries a
//! Poisson clock of the same rate, and every ring comes with two uniforms.
//! Two copies driven by the same rings and uniforms form the coupling.

mod decay;
mod model;
mod trajectory;

pub use decay::{measure_coupling_decay, DecayCurve, DecayOptions, PhiSpec};
pub use model::{EnvState, EnvironmentKind, EnvironmentModel, RefreshLaw, SiteDraw};
pub use trajectory::{simulate_env, simulate_env_coupled, CoupledEnvTrajectory, EnvEvent, EnvTrajectory};
pub(crate) use trajectory::coupled_ring;
