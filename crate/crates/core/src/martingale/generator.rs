use super::provider::{obs, Obs, SemigroupProvider};
use crate::error::{domain, Result};
use serde::Serialize;

/// ε ladder `{2^-first, …, 2^-last} · time_scale` with two-point Richardson.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LadderOptions {
    pub first: i32,
    pub last: i32,
    pub tol: f64,
}

impl Default for LadderOptions {
    fn default() -> Self {
        LadderOptions { first: 3, last: 14, tol: 1e-6 }
    }
}

impl LadderOptions {
    fn epsilons(&self, scale: f64) -> Vec<f64> {
        (self.first..=self.last).map(|i| scale * 2f64.powi(-i)).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GeneratorLimit {
    pub upper: f64,
    pub lower: f64,
    /// Jump-structure value when the provider knows it.
    pub exact: Option<f64>,
    pub converged: bool,
    /// `(ε, quotient, standard error of the quotient)`.
    pub ladder: Vec<(f64, f64, f64)>,
    pub extrapolated: Vec<f64>,
}

impl GeneratorLimit {
    pub fn value(&self) -> f64 {
        self.exact.unwrap_or(0.5 * (self.upper + self.lower))
    }
}

/// Limits of `q(ε)` along the ladder. Upper/lower are the extremes of the
/// last three Richardson values `2 q(ε/2) − q(ε)`; "converged" means they
/// agree within tolerance (plus three standard errors for sampled quotients).
pub fn ladder_limit(opts: &LadderOptions, scale: f64, mut q: impl FnMut(f64) -> Result<(f64, f64)>) -> Result<GeneratorLimit> {
    if opts.last - opts.first < 3 {
        return Err(domain("ladder needs at least four rungs"));
    }
    let ladder = opts
        .epsilons(scale)
        .into_iter()
        .map(|e| q(e).map(|(v, se)| (e, v, se)))
        .collect::<Result<Vec<_>>>()?;
    let extrapolated: Vec<f64> = ladder.windows(2).map(|w| 2.0 * w[1].1 - w[0].1).collect();
    let tail = &extrapolated[extrapolated.len() - 3..];
    let upper = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lower = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    let se = ladder.last().map(|l| l.2).unwrap_or(0.0);
    let mid = 0.5 * (upper + lower);
    let converged = upper.is_finite() && lower.is_finite() && upper - lower <= opts.tol * (1.0 + mid.abs()) + 3.0 * se;
    Ok(GeneratorLimit { upper, lower, exact: None, converged, ladder, extrapolated })
}

/// `Ā g(x)` and `A̲ g(x)` as limits of `(P_ε g(x) − g(x)) / ε`.
pub fn upper_lower_generator<P: SemigroupProvider>(p: &P, g: &Obs<P::State>, x: &P::State, opts: &LadderOptions) -> Result<GeneratorLimit> {
    let gx = g(x);
    let mut lim = ladder_limit(opts, p.time_scale(), |e| {
        let est = p.semigroup_at(e, g, x)?;
        Ok(((est.mean - gx) / e, est.se / e))
    })?;
    lim.exact = p.generator_exact(g, x);
    Ok(lim)
}

/// `(f − f(x))^k` as an observable.
pub fn centered_power<S: Clone + Send + Sync + 'static>(f: &Obs<S>, x: &S, k: i32) -> Obs<S> {
    let f = f.clone();
    let fx = f(x);
    obs(move |y: &S| (f(y) - fx).powi(k))
}

/// `Ā (f − f(x))^k (x)`; exact from the jump structure when known, ladder otherwise.
pub fn centered_moment<P: SemigroupProvider>(p: &P, f: &Obs<P::State>, x: &P::State, k: i32, opts: &LadderOptions) -> Result<f64> {
    let g = centered_power(f, x, k);
    match p.generator_exact(&g, x) {
        Some(v) => Ok(v),
        None => Ok(upper_lower_generator(p, &g, x, opts)?.upper),
    }
}

/// Ladder for `(1/ε) E_x (P_{T−t−ε} f(Y_ε) − P_{T−t} f(x))^k`, the scaled
/// conditional moment of a martingale increment. Its limit is
/// `Ā (P_{T−t} f − P_{T−t} f(x))^k (x)`.
pub fn increment_moment<P: SemigroupProvider>(p: &P, f: &Obs<P::State>, horizon: f64, t: f64, x: &P::State, k: i32, opts: &LadderOptions) -> Result<GeneratorLimit> {
    let u = horizon - t;
    let base = p.semigroup(u, f)?;
    let bx = base(x);
    let mut lim = ladder_limit(opts, p.time_scale().min(u.max(f64::MIN_POSITIVE)), |e| {
        let inner = p.semigroup(u - e, f)?;
        let h = obs(move |y: &P::State| (inner(y) - bx).powi(k));
        let est = p.semigroup_at(e, &h, x)?;
        Ok((est.mean / e, est.se / e))
    })?;
    lim.exact = p.generator_exact(&centered_power(&base, x, k), x);
    Ok(lim)
}

#[derive(Debug, Clone, Serialize)]
pub struct PreconditionLadder {
    pub t: f64,
    pub values: Vec<(f64, f64)>,
    pub holds: bool,
}

/// `(1/ε) E_x (P_{t−ε} f(Y_ε) − P_t f(Y_ε))^k` along the ladder; the
/// condition holds when the Richardson limit vanishes within tolerance.
pub fn precondition_ladder<P: SemigroupProvider>(p: &P, f: &Obs<P::State>, t: f64, x: &P::State, k: i32, opts: &LadderOptions) -> Result<PreconditionLadder> {
    if !(t > 0.0) {
        return Err(domain("precondition is checked for t > 0"));
    }
    let pt = p.semigroup(t, f)?;
    let lim = ladder_limit(opts, p.time_scale().min(t), |e| {
        let pe = p.semigroup(t - e, f)?;
        let pt = pt.clone();
        let h = obs(move |y: &P::State| (pe(y) - pt(y)).powi(k));
        let est = p.semigroup_at(e, &h, x)?;
        Ok((est.mean / e, est.se / e))
    })?;
    let se = lim.ladder.last().map(|l| l.2).unwrap_or(0.0);
    let holds = lim.upper.abs().max(lim.lower.abs()) <= opts.tol + 3.0 * se;
    Ok(PreconditionLadder { t, values: lim.ladder.iter().map(|l| (l.0, l.1)).collect(), holds })
}

#[cfg(test)]
mod tests {
    use super::super::provider::{vector_obs, LadderOnly};
    use super::*;
    use crate::ctmc::FiniteChain;
    use crate::rng::stream;

    #[test]
    fn squared_indicator_generator() {
        let c = FiniteChain::two_state(1.0, 1.0);
        let f = vector_obs(&[0.0, 1.0]);
        let g = centered_power(&f, &0, 2);
        let lim = upper_lower_generator(&c, &g, &0, &LadderOptions::default()).unwrap();
        assert!(lim.converged);
        assert!((lim.upper - 1.0).abs() < 1e-6 && (lim.lower - 1.0).abs() < 1e-6);
        assert_eq!(lim.exact, Some(1.0));
    }

    #[test]
    fn zero_function() {
        let c = FiniteChain::two_state(1.0, 1.0);
        let lim = upper_lower_generator(&LadderOnly(&c), &obs(|_: &usize| 0.0), &1, &LadderOptions::default()).unwrap();
        assert_eq!((lim.upper, lim.lower), (0.0, 0.0));
        assert_eq!(lim.exact, None);
    }

    #[test]
    fn ladder_matches_matrix_generator_on_random_chains() {
        let mut rng = stream(3, "ladder", 0);
        for _ in 0..20 {
            let c = FiniteChain::random(5, 2.0, &mut rng);
            let v: Vec<f64> = (0..5).map(|i| (i as f64 * 1.7).sin()).collect();
            let f = vector_obs(&v);
            for x in 0..5 {
                let lim = upper_lower_generator(&LadderOnly(&c), &f, &x, &LadderOptions::default()).unwrap();
                let exact = c.generator_at(&v, x);
                assert!(lim.converged);
                assert!((lim.value() - exact).abs() < 1e-6, "{} vs {exact}", lim.value());
            }
        }
    }

    #[test]
    fn increment_moment_converges_to_centered_generator() {
        let c = FiniteChain::two_state(1.0, 2.0);
        let f = vector_obs(&[1.0, -0.5]);
        for k in 2..=4 {
            let lim = increment_moment(&LadderOnly(&c), &f, 1.0, 0.3, &0, k, &LadderOptions::default()).unwrap();
            let pf = c.semigroup(0.7, &[1.0, -0.5]).unwrap();
            let exact = 1.0 * (pf[1] - pf[0]).powi(k);
            assert!((lim.value() - exact).abs() < 1e-6, "k={k}: {} vs {exact}", lim.value());
        }
    }

    #[test]
    fn precondition_holds_on_finite_chains() {
        let c = FiniteChain::two_state(1.0, 1.0);
        let f = vector_obs(&[0.0, 1.0]);
        let pl = precondition_ladder(&c, &f, 0.5, &0, 2, &LadderOptions::default()).unwrap();
        assert!(pl.holds, "{:?}", pl.values);
    }
}
