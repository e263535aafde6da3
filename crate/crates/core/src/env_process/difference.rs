use crate::coupling::{CoupledRates, CoupledWalk, RestartMode, SingleWalk};
use crate::environments::{EnvironmentModel, PhiSpec};
use crate::error::{domain, Result};
use crate::grid::{gauss_legendre, TimeGrid};
use crate::lattice::{Configuration, LocalFunction, Point, RateFamily};
use crate::rng::replicate;
use crate::stats::{fit_exponential, Estimate};
use serde::Serialize;

#[derive(Debug, Clone)]
pub struct DifferenceOptions {
    pub grid: TimeGrid,
    pub replicas: usize,
    pub seed: u64,
    /// Weight `φ(t/K)`.
    pub phi: Option<(PhiSpec, f64)>,
    /// Also estimate the two semigroups from independent runs.
    pub independent: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DifferenceRow {
    pub t: f64,
    pub mean_diff: f64,
    pub se: f64,
    pub weight: f64,
    pub partial_integral: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DifferenceIntegral {
    pub rows: Vec<DifferenceRow>,
    /// Trapezoid over the grid plus the fitted tail, coupled runs.
    pub integral: Estimate,
    pub head: f64,
    pub tail: f64,
    pub truncation: f64,
    pub independent: Option<Estimate>,
    /// `"divergent"` or `"inconclusive"`.
    pub flag: Option<String>,
    pub certificate: Option<f64>,
    pub holds: Option<bool>,
}

/// Per-replica differences `f(θ_{−X¹_t} η¹_t) − f(θ_{−X²_t} η²_t)` on the
/// grid under the walker-frame coupling; runs stop once the copies coalesce.
fn coupled_differences(model: &EnvironmentModel, alpha: &RateFamily, f: &LocalFunction, init: &(Configuration, Configuration), opts: &DifferenceOptions) -> Result<Vec<Vec<f64>>> {
    let rates = CoupledRates::same(alpha);
    let pts = opts.grid.points();
    let horizon = opts.grid.last();
    replicate(opts.seed, "sg-diff", opts.replicas, |_, rng| -> Result<Vec<f64>> {
        let mut w = CoupledWalk::new(model, rates.clone(), ((init.0.clone(), Point::ORIGIN), (init.1.clone(), Point::ORIGIN)), horizon, rng.clone(), RestartMode::RecoupleOnDecouple)?;
        let mut out = Vec::with_capacity(pts.len());
        for &t in pts {
            if w.is_coalesced() {
                out.push(0.0);
                continue;
            }
            w.advance_to(t)?;
            let [a, b] = w.observe(f);
            out.push(a - b);
        }
        Ok(out)
    })
    .into_iter()
    .collect()
}

fn independent_differences(model: &EnvironmentModel, alpha: &RateFamily, f: &LocalFunction, init: &(Configuration, Configuration), opts: &DifferenceOptions) -> Result<Vec<Vec<f64>>> {
    let pts = opts.grid.points();
    let horizon = opts.grid.last();
    let run = |tag: &str, c: &Configuration| -> Result<Vec<Vec<f64>>> {
        replicate(opts.seed, tag, opts.replicas, |_, rng| -> Result<Vec<f64>> {
            let mut w = SingleWalk::new(model, alpha, c.clone(), Point::ORIGIN, horizon, rng.clone())?;
            pts.iter()
                .map(|&t| {
                    w.advance_to(t)?;
                    Ok(w.observe(f))
                })
                .collect()
        })
        .into_iter()
        .collect()
    };
    let a = run("sg-indep-a", &init.0)?;
    let b = run("sg-indep-b", &init.1)?;
    Ok(a.iter().zip(&b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect()).collect())
}

struct Assembled {
    rows: Vec<DifferenceRow>,
    integral: Estimate,
    head: f64,
    tail: f64,
    flag: Option<String>,
}

/// `∫ w(t) |mean_i d_i(t)| dt`. The standard error linearizes `|·|` at the
/// sign of each grid mean; the tail beyond the grid is an exponential fitted
/// to the significant points of the last third.
fn assemble(grid: &TimeGrid, diffs: &[Vec<f64>], phi: Option<(PhiSpec, f64)>) -> Assembled {
    let pts = grid.points();
    let n = diffs.len() as f64;
    let cols: Vec<Estimate> = (0..pts.len()).map(|k| Estimate::from_samples(&diffs.iter().map(|d| d[k]).collect::<Vec<_>>())).collect();
    let weight = |t: f64| phi.map_or(1.0, |(p, k)| p.eval(t / k));
    let growth = phi.map_or(0.0, |(p, k)| p.growth(k));
    let tw = grid.trapezoid_weights();
    let coef: Vec<f64> = pts.iter().zip(&tw).zip(&cols).map(|((&t, a), c)| a * weight(t) * c.mean.signum()).collect();
    let per: Vec<f64> = diffs.iter().map(|d| d.iter().zip(&coef).map(|(x, k)| x * k).sum()).collect();
    let mut integral = Estimate::from_samples(&per);
    let head = integral.mean;
    let mut acc = 0.0;
    let rows = pts
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            acc += tw[k] * weight(t) * cols[k].mean.abs();
            DifferenceRow { t, mean_diff: cols[k].mean, se: cols[k].se, weight: weight(t), partial_integral: acc }
        })
        .collect();
    let from = grid.last_third();
    let sig: Vec<(f64, f64)> = (from..pts.len()).filter(|&k| cols[k].mean.abs() > 2.0 * cols[k].se).map(|k| (pts[k], cols[k].mean.abs())).collect();
    let all_zero = (from..pts.len()).all(|k| cols[k].mean == 0.0 && cols[k].se == 0.0);
    let (t_sig, y_sig): (Vec<f64>, Vec<f64>) = sig.into_iter().unzip();
    let t_end = grid.last();
    let mut flag = None;
    let tail = if all_zero {
        0.0
    } else {
        match fit_exponential(&t_sig, &y_sig) {
            Some(fit) if fit.rate - growth > 0.0 => {
                let span = 60.0 / (fit.rate - growth);
                gauss_legendre(|t| weight(t) * fit.amplitude * (-fit.rate * t).exp(), t_end, t_end + span, 200)
            }
            Some(_) => {
                flag = Some("divergent".to_string());
                f64::INFINITY
            }
            None => 0.0,
        }
    };
    integral.mean += tail;
    if flag.is_none() {
        // noise floor: what the same integral would read if every mean were pure noise
        let noise: f64 = pts.iter().zip(&tw).zip(&cols).map(|((&t, a), c)| a * weight(t) * c.se).sum();
        if noise > 0.5 * head.abs().max(f64::MIN_POSITIVE) && n > 1.0 && head.abs() > 0.0 {
            flag = Some("inconclusive".to_string());
        }
    }
    Assembled { rows, integral, head, tail, flag }
}

/// `∫_0^T |S_t^EP f(η) − S_t^EP f(ξ)| dt` (optionally weighted by `φ(t/K)`),
/// with both copies started at the origin. `certificate` is `C_a |||f|||`
/// when a certified `C_a` is available.
pub fn semigroup_difference_integral(
    model: &EnvironmentModel,
    alpha: &RateFamily,
    f: &LocalFunction,
    init: (Configuration, Configuration),
    opts: &DifferenceOptions,
    certificate: Option<f64>,
) -> Result<DifferenceIntegral> {
    if opts.replicas < 2 {
        return Err(domain("need at least two replicas"));
    }
    let diffs = coupled_differences(model, alpha, f, &init, opts)?;
    let a = assemble(&opts.grid, &diffs, opts.phi);
    let independent = if opts.independent {
        let d = independent_differences(model, alpha, f, &init, opts)?;
        Some(assemble(&opts.grid, &d, opts.phi).integral)
    } else {
        None
    };
    let holds = certificate.map(|c| a.integral.mean - 3.0 * a.integral.se <= c);
    Ok(DifferenceIntegral {
        rows: a.rows,
        integral: a.integral.with_seed(opts.seed),
        head: a.head,
        tail: a.tail,
        truncation: opts.grid.last(),
        independent,
        flag: a.flag,
        certificate,
        holds,
    })
}

/// Same integral with weight `φ(t/K)`; a fitted tail decaying no faster than
/// `φ` grows is flagged divergent and the partial value kept in `head`.
pub fn phi_weighted_integral(
    model: &EnvironmentModel,
    alpha: &RateFamily,
    f: &LocalFunction,
    init: (Configuration, Configuration),
    phi: PhiSpec,
    k: f64,
    opts: &DifferenceOptions,
) -> Result<DifferenceIntegral> {
    if !(k > 0.0) {
        return Err(domain("K must be positive"));
    }
    let o = DifferenceOptions { phi: Some((phi, k)), ..opts.clone() };
    semigroup_difference_integral(model, alpha, f, init, &o, None)
}
