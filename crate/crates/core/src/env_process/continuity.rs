use super::ergodic::{estimate_mu_ep, ErgodicOptions};
use crate::coupling::{coupling_constant, ConstantValue, DecouplingReport};
use crate::environments::{DecayCurve, EnvironmentModel};
use crate::error::Result;
use crate::lattice::{rate_norms, LocalFunction, RateFamily};
use crate::stats::Estimate;
use serde::Serialize;

/// Lower bound on the probability that the coupled walkers never decouple:
/// `1` for rates independent of the environment, `exp(−|||α||| C(α))` otherwise.
pub fn never_decouple_lower_bound(model: &EnvironmentModel, alpha: &RateFamily, measured: Option<&DecayCurve>) -> Result<ConstantValue> {
    let triple = rate_norms(alpha, 1.0)?.triple_alpha;
    if triple == 0.0 {
        return Ok(ConstantValue { value: 1.0, certified: true, source: "rates independent of the environment".into() });
    }
    let c = coupling_constant(model, alpha, measured);
    Ok(ConstantValue { value: (-triple * c.value).exp(), certified: c.certified, source: format!("exp(-|||alpha||| C), C from {}", c.source) })
}

/// `C_a = C(α) / p(α)`: bounds `sup ∫ |S_t^EP f(η) − S_t^EP f(ξ)| dt / |||f|||`.
pub fn semigroup_constant(model: &EnvironmentModel, alpha: &RateFamily, measured: Option<&DecayCurve>) -> Result<ConstantValue> {
    let c = coupling_constant(model, alpha, measured);
    let p = never_decouple_lower_bound(model, alpha, measured)?;
    Ok(ConstantValue { value: c.value / p.value, certified: c.certified && p.certified, source: format!("C from {}; p from {}", c.source, p.source) })
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuityRecord {
    pub mu_alpha: Estimate,
    pub mu_alpha_prime: Estimate,
    pub lhs: Estimate,
    pub rhs: Option<f64>,
    pub distance_0: f64,
    pub triple_f: f64,
    pub coupling: ConstantValue,
    pub p_alpha: ConstantValue,
    pub holds: Option<bool>,
    pub label: Option<String>,
}

/// `|μ_α^EP(f) − μ_{α'}^EP(f)|` against `C(α)/p(α) · ‖α − α'‖₀ · |||f|||`.
/// `p(α)` is the empirical never-decouple probability when a decoupling
/// report is given, else the analytic lower bound.
pub fn continuity_bound_check(
    model: &EnvironmentModel,
    alpha: &RateFamily,
    alpha_prime: &RateFamily,
    f: &LocalFunction,
    opts: &ErgodicOptions,
    decoupling: Option<&DecouplingReport>,
    measured: Option<&DecayCurve>,
) -> Result<ContinuityRecord> {
    let a = estimate_mu_ep(model, alpha, f, opts)?.value;
    let b = estimate_mu_ep(model, alpha_prime, f, opts)?.value;
    let lhs = Estimate { mean: (a.mean - b.mean).abs(), se: a.joint_se(&b), n: a.n, seed: Some(opts.seed) };
    let distance_0 = alpha.distance_0(alpha_prime)?;
    let triple_f = f.triple_norm(&model.space())?;
    let coupling = coupling_constant(model, alpha, measured);
    let p_alpha = match (alpha.is_env_independent(), decoupling) {
        (true, _) => ConstantValue { value: 1.0, certified: true, source: "rates independent of the environment".into() },
        (false, Some(r)) => ConstantValue { value: r.p_stay_coupled.mean, certified: false, source: "empirical never-decouple probability".into() },
        (false, None) => never_decouple_lower_bound(model, alpha, measured)?,
    };
    let rhs_value = if distance_0 == 0.0 || triple_f == 0.0 { 0.0 } else { coupling.value / p_alpha.value * distance_0 * triple_f };
    let certified = coupling.certified || distance_0 == 0.0 || triple_f == 0.0;
    let (rhs, holds, label) = if rhs_value.is_finite() {
        let holds = lhs.mean <= rhs_value + 3.0 * lhs.se;
        (Some(rhs_value), Some(holds), (!certified).then(|| "uncertified".to_string()))
    } else {
        (None, None, Some("uncertified".to_string()))
    };
    Ok(ContinuityRecord { mu_alpha: a, mu_alpha_prime: b, lhs, rhs, distance_0, triple_f, coupling, p_alpha, holds, label })
}
