use super::generator::{centered_power, upper_lower_generator, LadderOptions};
use super::provider::{obs, Obs, SemigroupProvider};
use super::qv::JumpPath;
use crate::ctmc::{FiniteChain, VolterraSolver};
use crate::error::{domain, Error, Result};
use crate::grid::gauss_legendre_nodes;
use serde::Serialize;
use std::cell::RefCell;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SeriesOptions {
    pub k_max: usize,
    /// Largest acceptable truncation remainder.
    pub tol: f64,
    /// Scale `λ` in `exp(λ M − ∫ψ_λ)`.
    pub lambda: f64,
    pub ladder: LadderOptions,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        SeriesOptions { k_max: 20, tol: 1e-12, lambda: 1.0, ladder: LadderOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesValue {
    pub upper: f64,
    pub lower: f64,
    /// Bound on the dropped terms `k > k_max`.
    pub remainder: f64,
    pub k_max: usize,
}

/// Tail of `Σ_{k>K} osc^{k−2} Γ / k!`, dominated by a geometric series.
fn remainder_bound(gamma: f64, osc: f64, k_max: usize) -> Option<f64> {
    let ratio = osc / (k_max as f64 + 2.0);
    if ratio >= 1.0 {
        return None;
    }
    let log_fact: f64 = (2..=k_max + 1).map(|k| (k as f64).ln()).sum();
    let lead = if osc == 0.0 { 0.0 } else { ((k_max as f64 - 1.0) * osc.ln() - log_fact).exp() };
    Some(gamma.max(0.0) * lead / (1.0 - ratio))
}

/// `Σ_{k≥2} Ā (g − g(x))^k (x) / k!` truncated at `k_max`, where
/// `g = λ h` and `osc` bounds `|g(y) − g(x)|` over reachable `y`.
/// `k_max` is raised until the remainder is below tolerance; refused if the
/// geometric bound never applies.
pub fn psi_series<P: SemigroupProvider>(p: &P, h: &Obs<P::State>, x: &P::State, osc: f64, opts: &SeriesOptions) -> Result<SeriesValue> {
    let lam = opts.lambda;
    let h2 = h.clone();
    let g = obs(move |y: &P::State| lam * h2(y));
    let moment = |k: usize| -> Result<(f64, f64)> {
        let gk = centered_power(&g, x, k as i32);
        match p.generator_exact(&gk, x) {
            Some(v) => Ok((v, v)),
            None => {
                let lim = upper_lower_generator(p, &gk, x, &opts.ladder)?;
                Ok((lim.upper, lim.lower))
            }
        }
    };
    let (gamma, _) = moment(2)?;
    let mut k_max = opts.k_max.max(2);
    let remainder = loop {
        match remainder_bound(gamma, osc, k_max) {
            Some(r) if r <= opts.tol => break r,
            _ if k_max >= 200 => return Err(Error::Refused(format!("series remainder not controlled for osc {osc}"))),
            _ => k_max *= 2,
        }
    };
    let mut upper = 0.0;
    let mut lower = 0.0;
    let mut fact = 1.0;
    for k in 2..=k_max {
        fact *= k as f64;
        let (u, l) = moment(k)?;
        upper += u / fact;
        lower += l / fact;
    }
    Ok(SeriesValue { upper, lower, remainder, k_max })
}

/// `max |g(y) − g(x)|` over jumps out of `x`, or the full oscillation on a
/// finite state space.
pub fn jump_oscillation<P: SemigroupProvider>(p: &P, g: &Obs<P::State>, x: &P::State) -> Result<f64> {
    let gx = g(x);
    if let Some(js) = p.jumps(x) {
        return Ok(js.iter().map(|(y, _)| (g(y) - gx).abs()).fold(0.0, f64::max));
    }
    match p.states() {
        Some(all) => Ok(all.iter().map(|y| (g(y) - gx).abs()).fold(0.0, f64::max)),
        None => Err(Error::Refused("no oscillation bound for an infinite state space".into())),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExponentialPath {
    pub t: Vec<f64>,
    pub m: Vec<f64>,
    /// `N̄` with the series remainder charged against it.
    pub upper: Vec<f64>,
    /// `N̲` with the series remainder credited to it.
    pub lower: Vec<f64>,
    pub max_remainder: f64,
}

/// `N̄(t) = exp(λM(t) − ∫_0^t ψ̄)` and `N̲(t)` at `times` along a jump path.
pub fn exponential_supermartingale<P: SemigroupProvider>(
    p: &P,
    f: &Obs<P::State>,
    path: &JumpPath<P::State>,
    times: &[f64],
    horizon: f64,
    opts: &SeriesOptions,
) -> Result<ExponentialPath> {
    if times.iter().any(|&t| !(0.0..=horizon).contains(&t)) {
        return Err(domain("times must lie in [0, T]"));
    }
    let y0 = path[0].1.clone();
    let p_t = p.semigroup(horizon, f)?;
    let start = p_t(&y0);
    let mut max_rem: f64 = 0.0;
    let mut psi = |s: f64, y: &P::State| -> Result<(f64, f64)> {
        let h = p.semigroup(horizon - s, f)?;
        let osc = opts.lambda.abs() * jump_oscillation(p, &h, y)?;
        let v = psi_series(p, &h, y, osc, opts)?;
        max_rem = max_rem.max(v.remainder);
        Ok((v.upper + v.remainder, v.lower - v.remainder))
    };
    let mut out = ExponentialPath { t: times.to_vec(), m: vec![], upper: vec![], lower: vec![], max_remainder: 0.0 };
    for &t in times {
        let mut iu = 0.0;
        let mut il = 0.0;
        for (k, (a, y)) in path.iter().enumerate() {
            let b = path.get(k + 1).map_or(t, |n| n.0.min(t));
            if *a >= t {
                break;
            }
            for (s, w) in gauss_legendre_nodes(*a, b, 2) {
                let (u, l) = psi(s, y)?;
                iu += w * u;
                il += w * l;
            }
        }
        let yt = &path[path.partition_point(|(s, _)| *s <= t).saturating_sub(1)].1;
        let m = p.semigroup(horizon - t, f)?(yt) - start;
        out.m.push(m);
        out.upper.push((opts.lambda * m - iu).exp());
        out.lower.push((opts.lambda * m - il).exp());
    }
    out.max_remainder = max_rem;
    Ok(out)
}

/// `E_x N̄(t)` for a finite chain, summed over every uniformized event
/// sequence with at most `n_max` events; returns `(value, error_bound)`.
#[allow(clippy::too_many_arguments)]
pub fn expected_exponential(chain: &FiniteChain, f: &[f64], x: usize, horizon: f64, t: f64, n_max: usize, steps: usize, opts: &SeriesOptions) -> Result<(f64, f64)> {
    if !(0.0..=horizon).contains(&t) {
        return Err(domain("t must lie in [0, T]"));
    }
    let lam = opts.lambda;
    let cache: RefCell<Option<(f64, Vec<f64>)>> = RefCell::new(None);
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let psi = |s: f64, y: usize| -> f64 {
        let mut c = cache.borrow_mut();
        if c.as_ref().map(|(cs, _)| *cs) != Some(s) {
            let row = chain.semigroup(horizon - s, f).and_then(|g| {
                let h = super::provider::vector_obs(&g);
                (0..chain.n())
                    .map(|z| {
                        let osc = lam.abs() * jump_oscillation(chain, &h, &z)?;
                        psi_series(chain, &h, &z, osc, opts).map(|v| v.upper + v.remainder)
                    })
                    .collect::<Result<Vec<f64>>>()
            });
            match row {
                Ok(r) => *c = Some((s, r)),
                Err(e) => {
                    *failure.borrow_mut() = Some(e);
                    *c = Some((s, vec![0.0; chain.n()]));
                }
            }
        }
        c.as_ref().unwrap().1[y]
    };
    let solver = VolterraSolver::new(chain, x, t, n_max, steps, psi)?;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let later = chain.semigroup(horizon - t, f)?;
    let start = chain.semigroup(horizon, f)?[x];
    solver.expect(|y| (lam * (later[y] - start)).exp())
}

#[cfg(test)]
mod tests {
    use super::super::provider::vector_obs;
    use super::*;

    #[test]
    fn series_matches_closed_form() {
        let c = FiniteChain::two_state(1.0, 2.0);
        let h = vector_obs(&[0.4, -0.9]);
        let osc = jump_oscillation(&c, &h, &0).unwrap();
        let v = psi_series(&c, &h, &0, osc, &SeriesOptions::default()).unwrap();
        let d: f64 = -1.3;
        let closed = d.exp() - 1.0 - d;
        assert!((v.upper - closed).abs() < 1e-12, "{} vs {closed}", v.upper);
        assert_eq!(v.upper, v.lower);
    }

    #[test]
    fn constant_observable_gives_unit_processes() {
        let c = FiniteChain::two_state(1.0, 1.0);
        let f = vector_obs(&[2.0, 2.0]);
        let path = [(0.0, 0), (0.5, 1)];
        let e = exponential_supermartingale(&c, &f, &path, &[0.0, 0.7, 1.0], 1.0, &SeriesOptions::default()).unwrap();
        assert!(e.upper.iter().chain(&e.lower).all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn two_state_expectation_is_one() {
        let c = FiniteChain::two_state(1.0, 1.0);
        let (v, err) = expected_exponential(&c, &[0.0, 1.0], 0, 1.0, 1.0, 12, 2000, &SeriesOptions::default()).unwrap();
        assert!(v <= 1.0 + 1e-9 + err, "{v} {err}");
        assert!((v - 1.0).abs() < 1e-9 + err, "{v} {err}");
    }
}
