//! Two environments, two walkers and the sandwich walkers `Y±`, all driven
//! by one event queue with shared clocks and shared uniforms.

mod decoupling;
mod engine;
mod single;

pub use crate::lattice::RateFamily;
pub use decoupling::{coupling_constant, estimate_decoupling, ConstantValue, DecouplingReport};
pub use engine::{
    recompute_tau, simulate_coupled_walk, CoupledEvent, CoupledRates, CoupledState, CoupledWalk, EventKind, RestartMode,
};
pub use single::{simulate_walk, SingleWalk};
