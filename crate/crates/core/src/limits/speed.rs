use crate::coupling::SingleWalk;
use crate::env_process::{estimate_mu_ep, ErgodicOptions};
use crate::environments::EnvironmentModel;
use crate::error::{domain, Result};
use crate::lattice::{LocalFunction, Point, RateFamily};
use crate::rng::replicate;
use crate::stats::Estimate;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct SpeedReport {
    /// `X_T / T` per coordinate.
    pub v_hat: Vec<Estimate>,
    /// `μ^EP(Σ_z z_i α(·, z))` per coordinate.
    pub formula_speed: Vec<Estimate>,
    pub horizon: f64,
    pub replicas: usize,
    pub agree: bool,
}

pub(crate) fn axis(d: usize, i: usize) -> Vec<f64> {
    (0..d).map(|k| if k == i { 1.0 } else { 0.0 }).collect()
}

/// `μ^EP(g)`, exact when `g` does not look at the environment.
pub(crate) fn mu_ep_or_exact(model: &EnvironmentModel, alpha: &RateFamily, g: &LocalFunction, opts: &ErgodicOptions) -> Result<Estimate> {
    if g.window().is_empty() {
        return Ok(Estimate::exact(g.eval_window(&[])));
    }
    Ok(estimate_mu_ep(model, alpha, g, opts)?.value)
}

pub(crate) fn check_run(horizon: f64, replicas: usize) -> Result<()> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(domain("horizon must be positive"));
    }
    if replicas < 2 {
        return Err(domain("need at least two replicas"));
    }
    Ok(())
}

/// Positions `X_T` of independent walkers started at the origin in the
/// environment's initial law.
pub(crate) fn final_positions(model: &EnvironmentModel, alpha: &RateFamily, horizon: f64, replicas: usize, seed: u64, tag: &str) -> Result<Vec<Point>> {
    replicate(seed, tag, replicas, |_, rng| -> Result<Point> {
        let init = model.sample_initial(rng);
        let mut w = SingleWalk::new(model, alpha, init, Point::ORIGIN, horizon, rng.clone())?;
        w.advance_to(horizon)?;
        Ok(w.position())
    })
    .into_iter()
    .collect()
}

pub fn estimate_speed(model: &EnvironmentModel, alpha: &RateFamily, horizon: f64, replicas: usize, seed: u64) -> Result<SpeedReport> {
    check_run(horizon, replicas)?;
    let d = model.geometry().dim();
    let xs = final_positions(model, alpha, horizon, replicas, seed, "speed")?;
    let v_hat: Vec<Estimate> = (0..d)
        .map(|i| Estimate::from_samples(&xs.iter().map(|x| x.0[i] as f64 / horizon).collect::<Vec<_>>()).with_seed(seed))
        .collect();
    let opts = ErgodicOptions::new(0.1 * horizon, horizon, replicas, seed);
    let formula_speed = (0..d)
        .map(|i| mu_ep_or_exact(model, alpha, &alpha.drift(&axis(d, i)), &opts))
        .collect::<Result<Vec<_>>>()?;
    let agree = v_hat.iter().zip(&formula_speed).all(|(a, b)| (a.mean - b.mean).abs() <= 3.0 * a.joint_se(b));
    Ok(SpeedReport { v_hat, formula_speed, horizon, replicas, agree })
}
