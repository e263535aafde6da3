use super::speed::{check_run, mu_ep_or_exact};
use crate::coupling::{CoupledRates, CoupledWalk, RestartMode, SingleWalk};
use crate::env_process::ErgodicOptions;
use crate::environments::{EnvironmentKind, EnvironmentModel, RefreshLaw};
use crate::error::{domain, Result};
use crate::lattice::{rate_norms, Configuration, LocalFunction, Point, RateFamily};
use crate::rng::{replicate, SimRng};
use crate::stats::{ks_normal, Estimate, Welford};
use rand::{Rng, SeedableRng};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct CltOptions {
    /// Observation times; the largest is the CLT horizon.
    pub horizons: Vec<f64>,
    pub replicas: usize,
    pub seed: u64,
    /// Outer samples of `η ~ μ^EP` for the covariance formula.
    pub formula_samples: usize,
    /// Coupled runs per difference integral.
    pub inner_replicas: usize,
    /// `T_A`: difference integrals are cut here.
    pub truncation: f64,
    /// Environment changes are taken within this sup-distance of the walker.
    pub site_radius: usize,
    /// Time spent before an environment is taken as a `μ^EP` sample.
    pub burn_in: f64,
}

impl CltOptions {
    pub fn new(horizon: f64, replicas: usize, seed: u64) -> Self {
        CltOptions {
            horizons: vec![horizon / 8.0, horizon / 4.0, horizon / 2.0, horizon],
            replicas,
            seed,
            formula_samples: 400,
            inner_replicas: 64,
            truncation: 12.0,
            site_radius: 6,
            burn_in: 10.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DyadicRow {
    pub t: f64,
    /// `E⟨X_t − vt, u⟩² / t`.
    pub variance_rate: Estimate,
    pub ks_p: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CltReport {
    pub direction: Vec<f64>,
    pub horizon: f64,
    /// Speed used for centering: `μ^EP` of the drift.
    pub v_formula: Estimate,
    pub v_empirical: Estimate,
    /// `E⟨X_T − vT, u⟩² / T` with `v` the formula speed.
    pub sigma2_empirical: Estimate,
    /// Sample variance of `⟨X_T, u⟩ / √T`.
    pub sigma2_sample: Estimate,
    pub sigma2_formula: Estimate,
    /// Environment and jump parts of the formula.
    pub formula_parts: (Estimate, Estimate),
    pub truncation: f64,
    /// Share of the difference integrals accrued over `[T_A/2, T_A]`.
    pub late_fraction: f64,
    pub ks_statistic: f64,
    pub ks_p: f64,
    pub dyadic: Vec<DyadicRow>,
    /// Largest jump over `√T`.
    pub jump_size: f64,
    pub agree: bool,
    pub flag: Option<String>,
}

/// Sample variance as an estimate: mean of `n/(n−1) (y − ȳ)²` with the SE
/// of that mean.
fn sample_variance(ys: &[f64]) -> Estimate {
    let m = ys.iter().sum::<f64>() / ys.len() as f64;
    let k = ys.len() as f64 / (ys.len() as f64 - 1.0);
    Estimate::from_samples(&ys.iter().map(|y| k * (y - m).powi(2)).collect::<Vec<_>>())
}

struct Diff {
    mean: f64,
    var_of_mean: f64,
    late: f64,
}

/// `∫_0^{T_A} S_t^EP g(a) − S_t^EP g(b) dt` from `m` coupled runs.
fn coupled_integral(model: &EnvironmentModel, rates: &CoupledRates, g: &LocalFunction, a: &Configuration, b: &Configuration, opts: &CltOptions, rng: &mut SimRng) -> Result<Diff> {
    let (mut total, mut late) = (Welford::default(), 0.0);
    for _ in 0..opts.inner_replicas {
        let child = SimRng::seed_from_u64(rng.random());
        let mut w = CoupledWalk::new(model, rates.clone(), ((a.clone(), Point::ORIGIN), (b.clone(), Point::ORIGIN)), opts.truncation, child, RestartMode::RecoupleOnDecouple)?;
        let mut acc = [0.0; 2];
        w.advance_integrating(0.5 * opts.truncation, g, &mut acc, true)?;
        let head = acc[0] - acc[1];
        w.advance_integrating(opts.truncation, g, &mut acc, true)?;
        let d = acc[0] - acc[1];
        total.push(d);
        late += d - head;
    }
    let e = total.estimate();
    Ok(Diff { mean: e.mean, var_of_mean: e.se * e.se, late: late / opts.inner_replicas as f64 })
}

/// Rate at which the environment moves site `x` of `xi` to each new value,
/// as `(new value, rate)`; for a continuous refresh law one value is drawn
/// and carries the full rate.
fn site_moves(model: &EnvironmentModel, xi: &Configuration, site: usize, rng: &mut SimRng) -> Vec<(f64, f64)> {
    let cur = xi.values()[site];
    match model.kind() {
        EnvironmentKind::IndependentRefresh { rate, law: RefreshLaw::Bernoulli(p) } => {
            let (to, w) = if cur == 1.0 { (0.0, 1.0 - p) } else { (1.0, p) };
            if w > 0.0 {
                vec![(to, rate * w)]
            } else {
                vec![]
            }
        }
        EnvironmentKind::IndependentRefresh { rate, law: RefreshLaw::Uniform } => vec![(rng.random::<f64>(), rate)],
        EnvironmentKind::WeakGlauber { rate, beta } => {
            let g = xi.geometry();
            let h: f64 = g.neighbors(site).map(|y| 2.0 * xi.values()[y] - 1.0).sum();
            let s = 2.0 * cur - 1.0;
            vec![(1.0 - cur, rate * (-beta * s * h).exp())]
        }
        EnvironmentKind::DeterministicRelaxation { .. } => vec![],
    }
}

fn nearby_sites(model: &EnvironmentModel, radius: usize) -> Vec<usize> {
    let g = model.geometry();
    let l = g.side() as i64;
    (0..g.num_sites())
        .filter(|&s| {
            let p = g.point(s);
            p.0.iter().take(g.dim()).all(|&c| {
                let c = c.rem_euclid(l);
                c.min(l - c) <= radius as i64
            })
        })
        .collect()
}

/// One outer sample of `L[(A_η + id)·u]²(η, 0)` split into environment and
/// jump parts. Squares of estimated integrals are debiased by their variance.
fn formula_sample(model: &EnvironmentModel, alpha: &RateFamily, u: &[f64], sites: &[usize], opts: &CltOptions, rng: &mut SimRng) -> Result<(f64, f64, f64, f64)> {
    let init = model.sample_initial(rng);
    let mut w = SingleWalk::new(model, alpha, init, Point::ORIGIN, opts.burn_in, rng.clone())?;
    w.advance_to(opts.burn_in)?;
    let xi = w.env().snapshot().shifted(-w.position());
    let g = alpha.drift(u);
    let rates = CoupledRates::same(alpha);
    let (mut late, mut mass) = (0.0, 0.0);
    let mut jump = 0.0;
    for j in alpha.jumps() {
        let a = j.rate.eval_at(&xi, Point::ORIGIN);
        let shifted = xi.shifted(-j.z);
        let d = coupled_integral(model, &rates, &g, &shifted, &xi, opts, rng)?;
        let zu = j.z.dot(u);
        jump += a * (zu * zu + 2.0 * zu * d.mean + d.mean * d.mean - d.var_of_mean);
        late += d.late.abs();
        mass += d.mean.abs();
    }
    let mut env = 0.0;
    for &s in sites {
        for (to, rate) in site_moves(model, &xi, s, rng) {
            let mut moved = xi.clone();
            moved.values_mut()[s] = to;
            let d = coupled_integral(model, &rates, &g, &moved, &xi, opts, rng)?;
            env += rate * (d.mean * d.mean - d.var_of_mean);
            late += d.late.abs();
            mass += d.mean.abs();
        }
    }
    Ok((env, jump, late, mass))
}

/// Empirical and formula-side diffusivity along `u`.
pub fn clt_report(model: &EnvironmentModel, alpha: &RateFamily, u: &[f64], opts: &CltOptions) -> Result<CltReport> {
    let mut horizons = opts.horizons.clone();
    horizons.sort_by(f64::total_cmp);
    let horizon = *horizons.last().ok_or_else(|| domain("empty horizon grid"))?;
    check_run(horizon, opts.replicas)?;
    if horizons[0] <= 0.0 {
        return Err(domain("horizons must be positive"));
    }
    if u.len() != model.geometry().dim() {
        return Err(domain("direction has the wrong dimension"));
    }
    let norm2 = rate_norms(alpha, 2.0)?.alpha_p;
    if !norm2.is_finite() {
        return Err(domain("second moment of the jumps is infinite"));
    }

    let g = alpha.drift(u);
    let v_formula = mu_ep_or_exact(model, alpha, &g, &ErgodicOptions::new(0.1 * horizon, horizon, opts.replicas.min(400), opts.seed))?;
    let v = v_formula.mean;

    // ⟨X_t, u⟩ + jitter at each horizon, per replica
    let paths = replicate(opts.seed, "clt", opts.replicas, |_, rng| -> Result<Vec<f64>> {
        let mut jitter = SimRng::seed_from_u64(rng.random());
        let init = model.sample_initial(rng);
        let mut w = SingleWalk::new(model, alpha, init, Point::ORIGIN, horizon, rng.clone())?;
        horizons
            .iter()
            .map(|&t| {
                w.advance_to(t)?;
                Ok(w.position().dot(u) + jitter.random::<f64>() - 0.5)
            })
            .collect()
    })
    .into_iter()
    .collect::<Result<Vec<Vec<f64>>>>()?;

    let dyadic: Vec<DyadicRow> = horizons
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let ys: Vec<f64> = paths.iter().map(|p| (p[k] - v * t) / t.sqrt()).collect();
            DyadicRow {
                t,
                variance_rate: Estimate::from_samples(&ys.iter().map(|y| y * y).collect::<Vec<_>>()).with_seed(opts.seed),
                ks_p: ks_normal(&ys).1,
            }
        })
        .collect();
    let last: Vec<f64> = paths.iter().map(|p| *p.last().unwrap()).collect();
    let centered: Vec<f64> = last.iter().map(|x| (x - v * horizon) / horizon.sqrt()).collect();
    let (ks_statistic, ks_p) = ks_normal(&centered);
    let sigma2_empirical = dyadic.last().unwrap().variance_rate;
    let sigma2_sample = sample_variance(&last.iter().map(|x| x / horizon.sqrt()).collect::<Vec<_>>()).with_seed(opts.seed);
    let v_empirical = Estimate::from_samples(&last.iter().map(|x| x / horizon).collect::<Vec<_>>());

    let jump_part_exact: f64 = alpha.jumps().iter().map(|j| j.z.dot(u).powi(2) * j.envelope).sum();
    let (sigma2_formula, formula_parts, late_fraction) = if alpha.is_env_independent() {
        (Estimate::exact(jump_part_exact), (Estimate::exact(0.0), Estimate::exact(jump_part_exact)), 0.0)
    } else {
        if opts.formula_samples < 2 || opts.inner_replicas < 2 || !(opts.truncation > 0.0) {
            return Err(domain("formula needs at least two outer and inner samples and a positive truncation"));
        }
        let sites = nearby_sites(model, opts.site_radius);
        let samples = replicate(opts.seed, "clt-formula", opts.formula_samples, |_, rng| formula_sample(model, alpha, u, &sites, opts, rng))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let env: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let jump: Vec<f64> = samples.iter().map(|s| s.1).collect();
        let total: Vec<f64> = samples.iter().map(|s| s.0 + s.1).collect();
        let late: f64 = samples.iter().map(|s| s.2).sum();
        let mass: f64 = samples.iter().map(|s| s.3).sum();
        (
            Estimate::from_samples(&total).with_seed(opts.seed),
            (Estimate::from_samples(&env), Estimate::from_samples(&jump)),
            if mass > 0.0 { late / mass } else { 0.0 },
        )
    };
    let agree = (sigma2_empirical.mean - sigma2_formula.mean).abs() <= 3.0 * sigma2_empirical.joint_se(&sigma2_formula);
    let flag = (sigma2_formula.se > 0.25 * sigma2_formula.mean.abs()).then(|| "formula variance large; interval widened".to_string());
    Ok(CltReport {
        direction: u.to_vec(),
        horizon,
        v_formula,
        v_empirical,
        sigma2_empirical,
        sigma2_sample,
        sigma2_formula,
        formula_parts,
        truncation: opts.truncation,
        late_fraction,
        ks_statistic,
        ks_p,
        dyadic,
        jump_size: alpha.max_jump() / horizon.sqrt(),
        agree,
        flag,
    })
}
