use super::speed::check_run;
use crate::coupling::SingleWalk;
use crate::environments::EnvironmentModel;
use crate::error::{domain, Result};
use crate::lattice::{Point, RateFamily};
use crate::rng::replicate;
use crate::stats::Estimate;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct HorizonEvidence {
    pub t: f64,
    /// Visits to the origin after a jump, up to `t`.
    pub returns: Estimate,
    pub returns_over_sqrt_t: f64,
    pub last_return: Estimate,
    /// Share of walkers with a return in `(t/2, t]`.
    pub late_return_fraction: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransienceReport {
    pub speed: Vec<Estimate>,
    pub nearest_neighbor: bool,
    pub regime: String,
    pub evidence: Vec<HorizonEvidence>,
}

/// Finite-horizon evidence only: a non-zero speed points to transience,
/// a vanishing speed with unit jumps in one dimension to recurrence.
pub fn transience_recurrence_diagnostic(model: &EnvironmentModel, alpha: &RateFamily, horizons: &[f64], replicas: usize, seed: u64) -> Result<TransienceReport> {
    let mut grid = horizons.to_vec();
    grid.sort_by(f64::total_cmp);
    let horizon = *grid.last().ok_or_else(|| domain("empty horizon grid"))?;
    check_run(horizon, replicas)?;
    if grid[0] <= 0.0 {
        return Err(domain("horizons must be positive"));
    }
    let d = model.geometry().dim();
    let runs = replicate(seed, "transience", replicas, |_, rng| -> Result<(Vec<f64>, Point)> {
        let init = model.sample_initial(rng);
        let mut w = SingleWalk::new(model, alpha, init, Point::ORIGIN, horizon, rng.clone())?;
        let mut visits = Vec::new();
        w.advance_tracking(horizon, |t, x| {
            if x == Point::ORIGIN {
                visits.push(t);
            }
        })?;
        Ok((visits, w.position()))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let speed: Vec<Estimate> = (0..d)
        .map(|i| Estimate::from_samples(&runs.iter().map(|r| r.1 .0[i] as f64 / horizon).collect::<Vec<_>>()).with_seed(seed))
        .collect();
    let evidence = grid
        .iter()
        .map(|&t| {
            let counts: Vec<f64> = runs.iter().map(|r| r.0.iter().filter(|&&s| s <= t).count() as f64).collect();
            let last: Vec<f64> = runs.iter().map(|r| r.0.iter().copied().filter(|&s| s <= t).fold(0.0, f64::max)).collect();
            let late = runs.iter().filter(|r| r.0.iter().any(|&s| s > 0.5 * t && s <= t)).count() as f64 / replicas as f64;
            let returns = Estimate::from_samples(&counts);
            HorizonEvidence { t, returns, returns_over_sqrt_t: returns.mean / t.sqrt(), last_return: Estimate::from_samples(&last), late_return_fraction: late }
        })
        .collect();
    let nearest_neighbor = alpha.jumps().iter().all(|j| j.z.0.iter().map(|c| c.abs()).sum::<i64>() == 1);
    let moving = speed.iter().any(|v| (v.se > 0.0 && v.mean.abs() > 3.0 * v.se) || (v.se == 0.0 && v.mean != 0.0));
    let regime = if moving {
        "transient"
    } else if d == 1 && nearest_neighbor {
        "recurrent"
    } else {
        "undetermined"
    };
    Ok(TransienceReport { speed, nearest_neighbor, regime: regime.into(), evidence })
}
