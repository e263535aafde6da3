use super::engine::{CoupledRates, CoupledWalk, RestartMode};
use crate::environments::{DecayCurve, EnvironmentModel};
use crate::error::{domain, Result};
use crate::grid::shifted_poly_exp_integral;
use crate::lattice::{rate_norms, Point, RateFamily};
use crate::rng::replicate;
use crate::stats::Estimate;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantValue {
    pub value: f64,
    pub certified: bool,
    pub source: String,
}

/// `∫₀^∞ (‖γ⁺ − γ⁻‖_∞ t + 1)^d · decay(t) dt`, from the closed-form decay
/// rate when the model has one, otherwise from a measured curve.
pub fn coupling_constant(model: &EnvironmentModel, alpha: &RateFamily, measured: Option<&DecayCurve>) -> ConstantValue {
    let g = alpha.gamma_spread();
    let d = model.geometry().dim() as i32;
    if let Some(c) = model.closed_form_decay_rate() {
        return ConstantValue { value: shifted_poly_exp_integral(g, d as u32, c), certified: true, source: "closed form".into() };
    }
    match measured {
        Some(curve) => {
            let wi = curve.integrate(|t| (g * t + 1.0).powi(d), 0.0);
            ConstantValue {
                value: wi.estimate.mean,
                certified: curve.certified && !wi.divergent,
                source: "measured decay curve".into(),
            }
        }
        None => ConstantValue { value: f64::NAN, certified: false, source: "uncertified".into() },
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DecouplingReport {
    pub horizon: f64,
    /// Worst case over the initial pairs.
    pub p_stay_coupled: Estimate,
    pub per_pair: Vec<((f64, f64), Estimate)>,
    pub decay_integral: ConstantValue,
    pub lower_bound: Option<f64>,
    pub holds: Option<bool>,
}

/// Empirical `P(τ > T)` from single-site discrepancies at the origin versus
/// `exp(−|||α||| ∫ (‖γ⁺−γ⁻‖_∞ t + 1)^d decay(t) dt)`.
pub fn estimate_decoupling(
    model: &EnvironmentModel,
    alpha: &RateFamily,
    horizon: f64,
    replicas: usize,
    seed: u64,
    measured: Option<&DecayCurve>,
) -> Result<DecouplingReport> {
    if replicas < 2 {
        return Err(domain("need at least two replicas"));
    }
    let (lo, hi) = model.space().endpoints();
    let pairs = [(hi, lo), (lo, hi)];
    let rates = CoupledRates::same(alpha);
    let runs: Vec<Result<Vec<f64>>> = replicate(seed, "decoupling", replicas, |_, rng| {
        let bg = model.sample_initial(rng);
        pairs
            .iter()
            .map(|&(a, b)| {
                let mut e1 = bg.clone();
                let mut e2 = bg.clone();
                e1.values_mut()[0] = a;
                e2.values_mut()[0] = b;
                let mut w = CoupledWalk::new(
                    model,
                    rates.clone(),
                    ((e1, Point::ORIGIN), (e2, Point::ORIGIN)),
                    horizon,
                    rng.clone(),
                    RestartMode::None,
                )?;
                Ok(if w.advance_until_decoupled(horizon)?.is_none() { 1.0 } else { 0.0 })
            })
            .collect()
    });
    let runs: Vec<Vec<f64>> = runs.into_iter().collect::<Result<_>>()?;
    let per_pair: Vec<((f64, f64), Estimate)> = pairs
        .iter()
        .enumerate()
        .map(|(k, &p)| (p, Estimate::from_samples(&runs.iter().map(|r| r[k]).collect::<Vec<_>>()).with_seed(seed)))
        .collect();
    let worst = per_pair.iter().map(|p| p.1).min_by(|a, b| a.mean.total_cmp(&b.mean)).expect("two pairs");
    let triple = rate_norms(alpha, 1.0)?.triple_alpha;
    let decay_integral = if triple == 0.0 {
        ConstantValue { value: 0.0, certified: true, source: "rates independent of the environment".into() }
    } else {
        coupling_constant(model, alpha, measured)
    };
    let lower_bound = decay_integral.certified.then(|| (-triple * decay_integral.value).exp());
    let holds = lower_bound.map(|b| worst.mean >= b - 3.0 * worst.se);
    Ok(DecouplingReport { horizon, p_stay_coupled: worst, per_pair, decay_integral, lower_bound, holds })
}
