use super::model::EnvironmentModel;
use super::trajectory::CoupledEnvTrajectory;
use crate::error::{domain, Result};
use crate::grid::{gauss_legendre, TimeGrid};
use crate::rng::replicate;
use crate::stats::{fit_exponential, Estimate, ExpFit};
use serde::Serialize;

/// Weight family `φ`: `e^{λ s}` or `(1 + s)^λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum PhiSpec {
    Exp(f64),
    Poly(f64),
}

impl PhiSpec {
    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            PhiSpec::Exp(l) => (l * s).exp(),
            PhiSpec::Poly(l) => (1.0 + s).powf(l),
        }
    }

    /// Exponential growth rate of `t ↦ φ(t/K)`.
    pub fn growth(&self, k: f64) -> f64 {
        match *self {
            PhiSpec::Exp(l) => l / k,
            PhiSpec::Poly(_) => 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DecayOptions {
    pub replicas: usize,
    pub seed: u64,
    pub phi: Option<(PhiSpec, f64)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct WeightedIntegral {
    pub estimate: Estimate,
    pub head: f64,
    pub tail: f64,
    pub divergent: bool,
}

/// Measured `Σ_x E ρ(η¹_t(x), η²_t(x)) / ρ(η(0), ξ(0))` for the worst
/// single-site pair at the origin.
#[derive(Debug, Clone, Serialize)]
pub struct DecayCurve {
    pub t: Vec<f64>,
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
    /// Initial values at the origin of the two copies.
    pub pair: (f64, f64),
    pub fit: Option<ExpFit>,
    pub integral_td: WeightedIntegral,
    pub weighted: Option<WeightedIntegral>,
    pub certified: bool,
    pub flag: Option<String>,
    #[serde(skip)]
    grid: Option<TimeGrid>,
    #[serde(skip)]
    per_replica: Vec<Vec<f64>>,
}

impl DecayCurve {
    pub fn grid(&self) -> &TimeGrid {
        self.grid.as_ref().expect("grid set at construction")
    }

    /// `∫ w(t) decay(t) dt`: trapezoid over the grid plus the fitted
    /// exponential tail. `growth` is the exponential growth rate of `w`.
    pub fn integrate(&self, w: impl Fn(f64) -> f64, growth: f64) -> WeightedIntegral {
        let grid = self.grid();
        let tw = grid.trapezoid_weights();
        let coef: Vec<f64> = tw.iter().zip(&self.t).map(|(a, &t)| a * w(t)).collect();
        let per: Vec<f64> = self.per_replica.iter().map(|c| c.iter().zip(&coef).map(|(x, k)| x * k).sum()).collect();
        let mut est = Estimate::from_samples(&per);
        let head = est.mean;
        let t_end = grid.last();
        let tail_zero = self.mean[grid.last_third()..].iter().all(|&m| m == 0.0);
        let (tail, divergent) = if tail_zero {
            (0.0, false)
        } else {
            match self.fit {
                Some(f) if f.rate - growth > 0.0 => {
                    let b = f.rate - growth;
                    let span = 60.0 / b;
                    (gauss_legendre(|t| w(t) * f.amplitude * (-f.rate * t).exp(), t_end, t_end + span, 200), false)
                }
                _ => (f64::INFINITY, true),
            }
        };
        est.mean += tail;
        WeightedIntegral { estimate: est, head, tail, divergent }
    }
}

/// Runs the environment coupling from every worst-case single-site pair at
/// the origin (both orientations of the two extreme values) on a common
/// background and common random numbers, and keeps the pair with the larger
/// `∫ t^d` integral.
pub fn measure_coupling_decay(model: &EnvironmentModel, grid: &TimeGrid, opts: &DecayOptions) -> Result<DecayCurve> {
    if opts.replicas < 2 {
        return Err(domain("need at least two replicas"));
    }
    let (lo, hi) = model.space().endpoints();
    let pairs = [(hi, lo), (lo, hi)];
    let g = model.geometry();
    let n = g.num_sites();
    let t_end = grid.last();
    let pts = grid.points().to_vec();
    let runs: Vec<Vec<Vec<f64>>> = replicate(opts.seed, "coupling-decay", opts.replicas, |_, rng| {
        let background = model.sample_initial(rng);
        let base_rng = rng.clone();
        pairs
            .iter()
            .map(|&(a, b)| {
                let mut e1 = background.clone();
                let mut e2 = background.clone();
                e1.values_mut()[0] = a;
                e2.values_mut()[0] = b;
                let norm = model.space().rho(a, b);
                let mut c = CoupledEnvTrajectory::with_rng(model, (e1, e2), t_end, base_rng.clone()).expect("valid pair");
                pts.iter()
                    .map(|&t| {
                        c.advance_to(t).expect("inside horizon");
                        (0..n).map(|s| c.discrepancy(s)).sum::<f64>() / norm
                    })
                    .collect()
            })
            .collect()
    });
    let d = g.dim() as i32;
    let mut best: Option<DecayCurve> = None;
    for (k, &pair) in pairs.iter().enumerate() {
        let per_replica: Vec<Vec<f64>> = runs.iter().map(|r| r[k].clone()).collect();
        let (mean, se): (Vec<f64>, Vec<f64>) = (0..pts.len())
            .map(|i| {
                let col: Vec<f64> = per_replica.iter().map(|c| c[i]).collect();
                let e = Estimate::from_samples(&col);
                (e.mean, e.se)
            })
            .unzip();
        let lt = grid.last_third();
        let fit = fit_exponential(&pts[lt..], &mean[lt..]);
        let mut curve = DecayCurve {
            t: pts.clone(),
            mean,
            se,
            pair,
            fit,
            integral_td: WeightedIntegral { estimate: Estimate::exact(0.0), head: 0.0, tail: 0.0, divergent: false },
            weighted: None,
            certified: true,
            flag: None,
            grid: Some(grid.clone()),
            per_replica,
        };
        let tail_zero = curve.mean[lt..].iter().all(|&m| m == 0.0);
        let decreasing = tail_zero || fit.is_some_and(|f| f.rate - 2.0 * f.rate_se > 0.0);
        if !decreasing {
            curve.certified = false;
            curve.flag = Some("integrability not certified".into());
        }
        curve.integral_td = curve.integrate(|t| t.powi(d), 0.0);
        if let Some((phi, kk)) = opts.phi {
            let wi = curve.integrate(|t| phi.eval(t / kk) * t.powi(d), phi.growth(kk));
            if wi.divergent {
                curve.flag.get_or_insert_with(|| "divergent weighted integral".into());
            }
            curve.weighted = Some(wi);
        }
        if best.as_ref().is_none_or(|b| curve.integral_td.estimate.mean > b.integral_td.estimate.mean) {
            best = Some(curve);
        }
    }
    Ok(best.expect("two pairs"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::{EnvironmentKind, RefreshLaw};
    use crate::lattice::TorusGeometry;

    #[test]
    fn relaxation_is_exact() {
        let g = TorusGeometry::new(1, 6).unwrap();
        let m = EnvironmentModel::new(EnvironmentKind::DeterministicRelaxation { kappa: 2.0, fixed_point: 0.3 }, g).unwrap();
        let grid = TimeGrid::geometric(0.01, 5.0, 64).unwrap();
        let c = measure_coupling_decay(&m, &grid, &DecayOptions { replicas: 4, seed: 1, phi: None }).unwrap();
        for (t, v) in c.t.iter().zip(&c.mean) {
            assert!((v - (-2.0 * t).exp()).abs() < 1e-10);
        }
        assert!(c.se.iter().all(|&s| s < 1e-12));
        // ∫ t e^{-2t} = 1/4
        assert!((c.integral_td.estimate.mean - 0.25).abs() < 1e-3);
        assert!(c.certified);
    }

    #[test]
    fn glauber_at_zero_coupling_decays_at_twice_the_rate() {
        let g = TorusGeometry::new(1, 8).unwrap();
        let m = EnvironmentModel::new(EnvironmentKind::WeakGlauber { rate: 1.0, beta: 0.0 }, g).unwrap();
        let grid = TimeGrid::geometric(0.02, 2.5, 16).unwrap();
        let c = measure_coupling_decay(&m, &grid, &DecayOptions { replicas: 4000, seed: 2, phi: None }).unwrap();
        for i in 0..c.t.len() {
            let target = (-2.0 * c.t[i]).exp();
            assert!((c.mean[i] - target).abs() <= 4.0 * c.se[i] + 1e-12, "t={} {} vs {}", c.t[i], c.mean[i], target);
        }
    }

    #[test]
    fn refresh_weighted_integral_and_divergence() {
        let g = TorusGeometry::new(1, 4).unwrap();
        let m = EnvironmentModel::new(EnvironmentKind::IndependentRefresh { rate: 1.0, law: RefreshLaw::Bernoulli(0.5) }, g).unwrap();
        let grid = TimeGrid::geometric(0.01, 5.0, 32).unwrap();
        let c = measure_coupling_decay(&m, &grid, &DecayOptions { replicas: 4000, seed: 3, phi: Some((PhiSpec::Exp(1.0), 0.5)) }).unwrap();
        assert!(c.weighted.as_ref().unwrap().divergent);
        assert!(c.flag.is_some());
    }
}
