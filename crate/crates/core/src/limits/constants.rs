use crate::coupling::{coupling_constant, ConstantValue};
use crate::env_process::{never_decouple_lower_bound, semigroup_constant};
use crate::environments::{DecayCurve, EnvironmentKind, EnvironmentModel};
use crate::error::Result;
use crate::lattice::{rate_norms, RateFamily};
use serde::Serialize;

/// `R^E` with `Γ^E(f) ≤ R^E |||f|||²`: the largest rate at which one site
/// can change. Refresh: `r`; spin flips: `r e^{2dβ}`; the deterministic
/// flow has no jumps and `Γ^E = 0`.
pub fn environment_r(model: &EnvironmentModel) -> ConstantValue {
    let (value, source) = match model.kind() {
        EnvironmentKind::IndependentRefresh { rate, .. } => (rate, "refresh rate"),
        EnvironmentKind::WeakGlauber { rate, beta } => (rate * (2.0 * model.geometry().dim() as f64 * beta).exp(), "largest flip rate"),
        EnvironmentKind::DeterministicRelaxation { .. } => (0.0, "deterministic flow"),
    };
    ConstantValue { value, certified: true, source: source.into() }
}

/// The constants entering the walker bounds, with their provenance.
#[derive(Debug, Clone, Serialize)]
pub struct ProcessConstants {
    pub coupling: ConstantValue,
    pub p_alpha: ConstantValue,
    pub c_a: ConstantValue,
    /// `C_b = C + C_a |||α||| C`.
    pub c_b: ConstantValue,
    pub r_e: ConstantValue,
    /// `R^EP = R^E + |||α||| + 2‖α‖₀`.
    pub r_ep: f64,
    pub triple_alpha: f64,
    pub triple_alpha_1: f64,
    pub alpha_0: f64,
    pub max_jump: f64,
    pub certified: bool,
}

pub fn process_constants(model: &EnvironmentModel, alpha: &RateFamily, measured: Option<&DecayCurve>) -> Result<ProcessConstants> {
    let norms = rate_norms(alpha, 1.0)?;
    let coupling = coupling_constant(model, alpha, measured);
    let p_alpha = never_decouple_lower_bound(model, alpha, measured)?;
    let c_a = semigroup_constant(model, alpha, measured)?;
    let c_b = ConstantValue {
        value: coupling.value + c_a.value * norms.triple_alpha * coupling.value,
        certified: coupling.certified && c_a.certified,
        source: "C + C_a |||alpha||| C".into(),
    };
    let r_e = environment_r(model);
    let r_ep = r_e.value + norms.triple_alpha + 2.0 * norms.alpha_0;
    let certified = c_a.certified && c_b.certified && r_e.certified;
    Ok(ProcessConstants {
        coupling,
        p_alpha,
        c_a,
        c_b,
        r_e,
        r_ep,
        triple_alpha: norms.triple_alpha,
        triple_alpha_1: norms.triple_alpha_1,
        alpha_0: norms.alpha_0,
        max_jump: alpha.max_jump(),
        certified,
    })
}
