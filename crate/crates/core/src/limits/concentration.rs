use super::constants::{process_constants, ProcessConstants};
use super::speed::{check_run, final_positions};
use crate::environments::{DecayCurve, EnvironmentModel};
use crate::error::{domain, Result};
use crate::lattice::{rate_norms, Point, RateFamily};
use crate::stats::Estimate;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct OneSided {
    pub direction: Vec<f64>,
    pub threshold: f64,
    pub empirical_tail: Estimate,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TailRecord {
    pub r: f64,
    /// `c₁ r + 2d C_a |||α|||₁`.
    pub threshold: f64,
    pub empirical_tail: Estimate,
    /// `2d exp(−½ r² / (T c₂ + r/3))`.
    pub bound: f64,
    /// Per direction `±e_i`: `P(⟨X_T − m, e⟩ > b r + a)` against
    /// `exp(−½ r² / (T k + r/3))` with `Ā(⟨x,e⟩ − ⟨x₀,e⟩)^k ≤ k c^k`.
    pub one_sided: Vec<OneSided>,
    pub holds: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentRecord {
    pub r: f64,
    pub empirical_tail: Estimate,
    /// `c_p c^p (T^{p/2} + 1) / r^p`.
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConcentrationReport {
    pub horizon: f64,
    pub replicas: usize,
    pub constants: ProcessConstants,
    /// Per-direction constants `(k, c)` of the point bound.
    pub point_constants: (f64, f64),
    pub c1: f64,
    pub c2: f64,
    pub records: Vec<TailRecord>,
    pub moment_p: Option<(f64, f64)>,
    pub moment_c: Option<f64>,
    pub moments: Vec<MomentRecord>,
    /// `"reference only"` when a constant is not certified; the moment
    /// comparison is always a shape check.
    pub label: Option<String>,
}

fn tail(values: &[f64], threshold: f64) -> Estimate {
    Estimate::from_samples(&values.iter().map(|&v| if v > threshold { 1.0 } else { 0.0 }).collect::<Vec<_>>())
}

/// Empirical tails of `X_T − E X_T` against the exponential bound assembled
/// from `C_a`, `C_b` and `R^EP`, and optionally against the `p`-th moment
/// bound with a supplied `c_p`.
#[allow(clippy::too_many_arguments)]
pub fn concentration_tail_check(
    model: &EnvironmentModel,
    alpha: &RateFamily,
    r_grid: &[f64],
    horizon: f64,
    replicas: usize,
    seed: u64,
    moment: Option<(f64, f64)>,
    measured: Option<&DecayCurve>,
) -> Result<ConcentrationReport> {
    check_run(horizon, replicas)?;
    if r_grid.iter().any(|&r| !(r >= 0.0)) {
        return Err(domain("r must be non-negative"));
    }
    let k = process_constants(model, alpha, measured)?;
    let d = model.geometry().dim();
    let zmax = k.max_jump;
    // Ā(S_t f_v − S_t f_v(η,x))^k ≤ pk · pc^k
    let (pk, pc) = if k.triple_alpha_1 == 0.0 {
        (k.alpha_0, zmax)
    } else {
        (k.r_ep * (k.c_b.value / k.c_a.value).powi(2) + k.alpha_0, (2.0 * k.c_a.value * k.triple_alpha_1).max(2.0 * zmax))
    };
    let a = if k.triple_alpha_1 == 0.0 { 0.0 } else { k.c_a.value * k.triple_alpha_1 };
    let c1 = 2.0 * d as f64 * pc;
    let c2 = pk;
    let finite = c1.is_finite() && c2.is_finite() && a.is_finite();
    let certified = finite && (k.certified || k.triple_alpha_1 == 0.0);

    let xs = final_positions(model, alpha, horizon, replicas, seed, "concentration")?;
    let mean: Vec<f64> = (0..d).map(|i| xs.iter().map(|x| x.0[i] as f64).sum::<f64>() / xs.len() as f64).collect();
    let dev = |x: &Point| -> Vec<f64> { (0..d).map(|i| x.0[i] as f64 - mean[i]).collect() };
    let norms: Vec<f64> = xs.iter().map(|x| dev(x).iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let exponent = |r: f64| (-0.5 * r * r / (horizon * c2 + r / 3.0)).exp();

    let records = r_grid
        .iter()
        .map(|&r| {
            let threshold = c1 * r + 2.0 * d as f64 * a;
            let empirical_tail = tail(&norms, threshold);
            let bound = 2.0 * d as f64 * exponent(r);
            let one_sided: Vec<OneSided> = (0..2 * d)
                .map(|j| {
                    let sign = if j < d { 1.0 } else { -1.0 };
                    let i = j % d;
                    let proj: Vec<f64> = xs.iter().map(|x| sign * dev(x)[i]).collect();
                    let threshold = pc * r + a;
                    let mut e = vec![0.0; d];
                    e[i] = sign;
                    OneSided { direction: e, threshold, empirical_tail: tail(&proj, threshold), bound: exponent(r) }
                })
                .collect();
            let ok = |t: &Estimate, b: f64| t.mean <= b + 3.0 * t.se;
            let holds = certified.then(|| ok(&empirical_tail, bound) && one_sided.iter().all(|o| ok(&o.empirical_tail, o.bound)));
            TailRecord { r, threshold, empirical_tail, bound, one_sided, holds }
        })
        .collect();

    let (moment_c, moments) = match moment {
        Some((p, c_p)) => {
            if !(p > 1.0) {
                return Err(domain("moment order must exceed 1"));
            }
            let n = rate_norms(alpha, 2.0)?.alpha_p;
            let np = rate_norms(alpha, p)?.alpha_p;
            let t1 = k.c_b.value * k.triple_alpha_1;
            let (t1, ta) = if k.triple_alpha_1 == 0.0 { (0.0, 0.0) } else { (t1, a) };
            let big_a = 2f64.sqrt() * ((t1 * k.r_ep).powf(p) + n.powf(p)).powf(1.0 / p);
            let big_b = 2.0 * (t1.powf(p) + np.powf(p)).powf(1.0 / p);
            let c = big_a.max((big_b.powf(p) + ta.powf(p)).powf(1.0 / p));
            let recs = r_grid
                .iter()
                .filter(|&&r| r > 0.0)
                .map(|&r| {
                    let empirical_tail = tail(&norms, r);
                    let bound = c_p * c.powf(p) * (horizon.powf(p / 2.0) + 1.0) / r.powf(p);
                    MomentRecord { r, empirical_tail, bound, holds: empirical_tail.mean <= bound + 3.0 * empirical_tail.se }
                })
                .collect();
            (Some(c), recs)
        }
        None => (None, Vec::new()),
    };
    Ok(ConcentrationReport {
        horizon,
        replicas,
        constants: k,
        point_constants: (pk, pc),
        c1,
        c2,
        records,
        moment_p: moment,
        moment_c,
        moments,
        label: (!certified).then(|| "reference only".to_string()),
    })
}
