use super::provider::{Obs, SemigroupProvider};
use super::qv::carre_du_champ;
use crate::ctmc::{enumerate_paths, occupation_tail, FiniteChain};
use crate::error::{domain, Error, Result};
use crate::grid::gauss_legendre_nodes;
use crate::rng::replicate;
use crate::stats::Estimate;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Constants {
    pub c1: f64,
    pub c2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum StartLaw {
    Dirac(usize),
    /// `(ν₁, ν₂)` as weight vectors.
    Pair(Vec<f64>, Vec<f64>),
}

impl StartLaw {
    fn nu1(&self, n: usize) -> Vec<f64> {
        match self {
            StartLaw::Dirac(x) => (0..n).map(|y| if y == *x { 1.0 } else { 0.0 }).collect(),
            StartLaw::Pair(a, _) => a.clone(),
        }
    }

    fn nu2(&self, n: usize) -> Vec<f64> {
        match self {
            StartLaw::Dirac(x) => (0..n).map(|y| if y == *x { 1.0 } else { 0.0 }).collect(),
            StartLaw::Pair(_, b) => b.clone(),
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let ok = |v: &[f64]| v.len() == n && v.iter().all(|w| *w >= 0.0) && (v.iter().sum::<f64>() - 1.0).abs() < 1e-9;
        match self {
            StartLaw::Dirac(x) if *x < n => Ok(()),
            StartLaw::Pair(a, b) if ok(a) && ok(b) => Ok(()),
            _ => Err(domain("start law does not match the state space")),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[allow(clippy::type_complexity)]
fn states_and_jumps<P: SemigroupProvider>(p: &P) -> Result<Vec<(P::State, Vec<(P::State, f64)>)>> {
    let states = p.states().ok_or_else(|| Error::Refused("certification needs a finite state space".into()))?;
    states
        .into_iter()
        .map(|x| {
            let js = p.jumps(&x).ok_or_else(|| Error::Refused("certification needs the jump structure".into()))?;
            Ok((x, js))
        })
        .collect()
}

/// `c₁, c₂` with `Ā(P_t f − P_t f(x))^k(x) ≤ c₁ c₂^k` for all `k ≥ 2`,
/// `t ∈ [0,T]`, `x`. With `c₂ ≥ max |P_t f(y) − P_t f(x)|` over jumps and
/// `c₁ c₂² ≥ Σ_y Q(x,y)(P_t f(y) − P_t f(x))²` every moment is dominated.
/// The scan runs on `grid` equally spaced times; between them each
/// difference moves by at most `h · ‖A f‖_∞`, which is added.
pub fn certify_point_constants<P: SemigroupProvider>(p: &P, f: &Obs<P::State>, horizon: f64, grid: usize) -> Result<Constants> {
    let sj = states_and_jumps(p)?;
    let h = horizon / grid.max(1) as f64;
    let af = sj.iter().map(|(x, js)| js.iter().map(|(y, r)| r * (f(y) - f(x))).sum::<f64>().abs()).fold(0.0, f64::max);
    let margin = h * af;
    let mut c2: f64 = 0.0;
    let mut gamma: f64 = 0.0;
    for i in 0..=grid.max(1) {
        let g = p.semigroup(i as f64 * h, f)?;
        for (x, js) in &sj {
            let gx = g(x);
            let mut s = 0.0;
            for (y, r) in js {
                let d = (g(y) - gx).abs() + margin;
                c2 = c2.max(d);
                s += r * d * d;
            }
            gamma = gamma.max(s);
        }
    }
    if c2 == 0.0 {
        return Ok(Constants { c1: 0.0, c2: 0.0 });
    }
    Ok(Constants { c1: gamma / (c2 * c2), c2 })
}

/// `exp(−½(r/c₂)² / (T c₁ + r/(3c₂)))`.
pub fn point_tail_value(c: Constants, horizon: f64, r: f64) -> f64 {
    if r <= 0.0 {
        return 1.0;
    }
    if c.c2 == 0.0 {
        return 0.0;
    }
    let a = r / c.c2;
    (-0.5 * a * a / (horizon * c.c1 + a / 3.0)).exp()
}

#[derive(Debug, Clone, Serialize)]
pub struct TailReport {
    pub constants: Constants,
    pub certified: bool,
    /// Level the deviation `f(Y_T) − ν₂(P_T f)` is compared against.
    pub threshold: f64,
    pub bound: f64,
    pub exact: Option<f64>,
    pub holds: Option<bool>,
}

/// Bound on `P_{ν₁}(f(Y_T) − ν₂(P_T f) > r + ‖P_T f‖_osc)`, or on
/// `P_x(f(Y_T) − E_x f(Y_T) > r)` for a Dirac start.
pub fn tail_bound<P: SemigroupProvider<State = usize>>(p: &P, f: &Obs<usize>, start: &StartLaw, horizon: f64, r: f64, constants: Option<Constants>) -> Result<TailReport> {
    let states = p.states().ok_or_else(|| Error::Refused("tail bound needs a finite state space".into()))?;
    start.validate(states.len())?;
    let (constants, certified) = match constants {
        Some(c) => (c, false),
        None => (certify_point_constants(p, f, horizon, 2000)?, true),
    };
    let pt = p.semigroup(horizon, f)?;
    let ptv: Vec<f64> = states.iter().map(|x| pt(x)).collect();
    let centre = dot(&start.nu2(states.len()), &ptv);
    let offset = match start {
        StartLaw::Dirac(_) => 0.0,
        StartLaw::Pair(..) => ptv.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - ptv.iter().cloned().fold(f64::INFINITY, f64::min),
    };
    Ok(TailReport { constants, certified, threshold: centre + r + offset, bound: point_tail_value(constants, horizon, r), exact: None, holds: None })
}

/// Tail bound plus the exact probability from the chain's law at `T`.
pub fn verify_tail_bound(chain: &FiniteChain, f: &[f64], start: &StartLaw, horizon: f64, r: f64, constants: Option<Constants>) -> Result<TailReport> {
    let fo = super::provider::vector_obs(f);
    let mut rep = tail_bound(chain, &fo, start, horizon, r, constants)?;
    let law = chain.distribution(&start.nu1(chain.n()), horizon)?;
    // values within round-off of the level are ties, not exceedances
    let level = rep.threshold + 1e-9 * (1.0 + rep.threshold.abs());
    let exact: f64 = law.iter().zip(f).filter(|(_, v)| **v > level).map(|(w, _)| w).sum();
    rep.exact = Some(exact);
    rep.holds = Some(exact <= rep.bound + 1e-12);
    Ok(rep)
}

/// `exp(−½ r² / (T c₂ + r/3))`.
pub fn additive_tail_value(c: Constants, horizon: f64, r: f64) -> f64 {
    if r <= 0.0 {
        return 1.0;
    }
    (-0.5 * r * r / (horizon * c.c2 + r / 3.0)).exp()
}

/// `∫_0^{T'} P_t f dt` on `grid + 1` equally spaced `T'`, exact up to Gauss–Legendre error.
fn integrated_semigroup(chain: &FiniteChain, f: &[f64], horizon: f64, grid: usize) -> Result<Vec<Vec<f64>>> {
    let h = horizon / grid as f64;
    let mut acc = vec![0.0; chain.n()];
    let mut out = vec![acc.clone()];
    for i in 0..grid {
        for (s, w) in gauss_legendre_nodes(i as f64 * h, (i + 1) as f64 * h, 1) {
            let v = chain.semigroup(s, f)?;
            acc.iter_mut().zip(&v).for_each(|(a, b)| *a += w * b);
        }
        out.push(acc.clone());
    }
    Ok(out)
}

/// Certificates for the additive functional: `c₁ ≥ sup ∫_0^{T'} P_t f(x) − P_t f(y) dt`
/// and `c₂ c₁² ≥ Σ_y Q(x,y)(G(y) − G(x))²` with `G = ∫_0^{T'} P_t f`.
/// Off-grid `T'` move each difference by at most `h ‖f‖_osc`, which is added.
pub fn certify_additive_constants(chain: &FiniteChain, f: &[f64], horizon: f64, grid: usize) -> Result<Constants> {
    let osc = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - f.iter().cloned().fold(f64::INFINITY, f64::min);
    let margin = horizon / grid as f64 * osc;
    let gs = integrated_semigroup(chain, f, horizon, grid)?;
    let mut c1: f64 = 0.0;
    let mut gamma: f64 = 0.0;
    for g in &gs {
        let hi = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = g.iter().cloned().fold(f64::INFINITY, f64::min);
        c1 = c1.max(hi - lo + margin);
        for x in 0..chain.n() {
            let s: f64 = (0..chain.n()).filter(|&y| y != x).map(|y| chain.rate(x, y) * ((g[y] - g[x]).abs() + margin).powi(2)).sum();
            gamma = gamma.max(s);
        }
    }
    if c1 == 0.0 {
        return Ok(Constants { c1: 0.0, c2: 0.0 });
    }
    Ok(Constants { c1, c2: gamma / (c1 * c1) })
}

#[derive(Debug, Clone, Serialize)]
pub struct AdditiveReport {
    pub constants: Constants,
    pub certified: bool,
    pub threshold: f64,
    pub bound: f64,
    pub exact: Option<(f64, f64)>,
    pub holds: Option<bool>,
}

/// Bound on `P_{ν₁}(∫_0^T f(Y_t) dt > c₁(r+1) + ∫_0^T ν₂(P_t f) dt)`; for a
/// Dirac start `c₁ r` replaces `c₁(r+1)`. When `f` takes two values the exact
/// tail is enclosed by summing over event sequences (`n_max` events).
pub fn additive_functional_bound(chain: &FiniteChain, f: &[f64], start: &StartLaw, horizon: f64, r: f64, constants: Option<Constants>, n_max: Option<usize>) -> Result<AdditiveReport> {
    start.validate(chain.n())?;
    let (constants, certified) = match constants {
        Some(c) => (c, false),
        None => (certify_additive_constants(chain, f, horizon, 1000)?, true),
    };
    let nu2 = start.nu2(chain.n());
    let comparison: f64 = gauss_legendre_nodes(0.0, horizon, 16).into_iter().try_fold(0.0, |acc, (s, w)| -> Result<f64> { Ok(acc + w * dot(&nu2, &chain.semigroup(s, f)?)) })?;
    let shift = if matches!(start, StartLaw::Dirac(_)) { r } else { r + 1.0 };
    let threshold = constants.c1 * shift + comparison;
    let bound = additive_tail_value(constants, horizon, r);
    let exact = match n_max {
        Some(n) => Some(exact_additive_tail(chain, f, &start.nu1(chain.n()), horizon, threshold, n)?),
        None => None,
    };
    let holds = exact.map(|(_, hi)| hi <= bound + 1e-12);
    Ok(AdditiveReport { constants, certified, threshold, bound, exact, holds })
}

/// `P_{ν}(∫_0^T f(Y_t) dt > a)` for two-valued `f`, enclosed as `(lower, upper)`.
pub fn exact_additive_tail(chain: &FiniteChain, f: &[f64], nu: &[f64], horizon: f64, a: f64, n_max: usize) -> Result<(f64, f64)> {
    let lo = f.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = f.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if f.iter().any(|v| *v != lo && *v != hi) {
        return Err(Error::Refused("exact occupation law needs a two-valued observable".into()));
    }
    if hi == lo {
        let p = if lo * horizon > a { 1.0 } else { 0.0 };
        return Ok((p, p));
    }
    let in_set: Vec<bool> = f.iter().map(|v| *v == hi).collect();
    // ∫f = lo T + (hi − lo) · occupation of the set.
    let level = (a - lo * horizon) / (hi - lo);
    let (mut l, mut u) = (0.0, 0.0);
    for (x, w) in nu.iter().enumerate().filter(|(_, w)| **w > 0.0) {
        let ps = enumerate_paths(chain, x, horizon, n_max)?;
        let (pl, pu) = ps.expect(|p| occupation_tail(&p.states, &in_set, horizon, level), 1.0);
        l += w * pl.max(0.0);
        u += w * pu.min(1.0);
    }
    Ok((l, u))
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentReport {
    pub p: f64,
    pub c_p: f64,
    pub qv_term: Estimate,
    pub jump_term: f64,
    pub initial_term: f64,
    pub bound: f64,
    pub moment: f64,
    pub holds: bool,
}

/// `C_p [ (E⟨M⟩_T^{p/2})^{1/p} + (E sup|ΔM|^p)^{1/p} ] + (∫|P_T f − ν₂(P_T f)|^p dν₁)^{1/p}`
/// against the exact `(E_{ν₁}|f(Y_T) − ν₂(P_T f)|^p)^{1/p}`.
/// For `p = 2` the first term is exact; otherwise it is sampled from
/// `replicas` chain paths. The jump term uses the largest possible jump, an
/// upper bound on the supremum along any path.
#[allow(clippy::too_many_arguments)]
pub fn moment_bound(chain: &FiniteChain, f: &[f64], start: &StartLaw, horizon: f64, p: f64, c_p: f64, replicas: usize, seed: u64) -> Result<MomentReport> {
    if p < 2.0 {
        return Err(domain("moment order must be at least 2"));
    }
    start.validate(chain.n())?;
    let n = chain.n();
    let (nu1, nu2) = (start.nu1(n), start.nu2(n));
    let pt = chain.semigroup(horizon, f)?;
    let centre = dot(&nu2, &pt);
    let initial_term = nu1.iter().zip(&pt).map(|(w, v)| w * (v - centre).abs().powf(p)).sum::<f64>().powf(1.0 / p);
    let law = chain.distribution(&nu1, horizon)?;
    let moment = law.iter().zip(f).map(|(w, v)| w * (v - centre).abs().powf(p)).sum::<f64>().powf(1.0 / p);
    let jump_term = certify_point_constants(chain, &super::provider::vector_obs(f), horizon, 2000)?.c2;

    let qv_term = if p == 2.0 {
        let e: f64 = nu1.iter().enumerate().filter(|(_, w)| **w > 0.0).try_fold(0.0, |acc, (x, w)| -> Result<f64> { Ok(acc + w * super::qv::expected_qv(chain, f, x, horizon, 16)?) })?;
        Estimate::exact(e.sqrt())
    } else {
        // Cumulative Γ_{T−s}(y) on a fine grid; ⟨M⟩_T along a path is a sum of differences.
        let steps = 4000;
        let h = horizon / steps as f64;
        let gam: Vec<Vec<f64>> = (0..=steps).map(|i| carre_du_champ(chain, f, horizon - i as f64 * h)).collect::<Result<_>>()?;
        let mut cum = vec![vec![0.0; n]];
        for i in 0..steps {
            let prev = cum[i].clone();
            cum.push((0..n).map(|y| prev[y] + 0.5 * h * (gam[i][y] + gam[i + 1][y])).collect());
        }
        let at = |s: f64, y: usize| -> f64 {
            let pos = (s / h).min(steps as f64);
            let i = (pos.floor() as usize).min(steps - 1);
            let frac = pos - i as f64;
            cum[i][y] + frac * (cum[i + 1][y] - cum[i][y])
        };
        let cdf: Vec<f64> = nu1.iter().scan(0.0, |a, w| {
            *a += w;
            Some(*a)
        }).collect();
        let samples = replicate(seed, "moment-qv", replicas, |_, rng| {
            let u: f64 = rand::Rng::random(rng);
            let x = cdf.iter().position(|c| u < *c).unwrap_or(n - 1);
            let path = chain.sample_path(x, horizon, rng);
            let qv: f64 = path.iter().enumerate().map(|(k, (a, y))| at(path.get(k + 1).map_or(horizon, |nx| nx.0), *y) - at(*a, *y)).sum();
            qv.powf(p / 2.0)
        });
        let e = Estimate::from_samples(&samples);
        // delta method for the 1/p power
        let v = e.mean.max(0.0).powf(1.0 / p);
        let se = if e.mean > 0.0 { v / (p * e.mean) * e.se } else { 0.0 };
        Estimate { mean: v, se, n: e.n, seed: Some(seed) }
    };
    let bound = c_p * (qv_term.mean + jump_term) + initial_term;
    Ok(MomentReport { p, c_p, qv_term, jump_term, initial_term, bound, moment, holds: moment <= bound + 1e-12 })
}

#[cfg(test)]
mod tests {
    use super::super::provider::vector_obs;
    use super::*;

    #[test]
    fn poisson_proxy_tail() {
        let c = FiniteChain::birth(60);
        let f: Vec<f64> = (0..=60).map(|i| i as f64).collect();
        let given = verify_tail_bound(&c, &f, &StartLaw::Dirac(0), 1.0, 3.0, Some(Constants { c1: 1.0, c2: 1.0 })).unwrap();
        assert!((given.bound - (-2.25f64).exp()).abs() < 1e-12);
        // P(Y₁ ≥ 5) for Poisson(1)
        let e1 = (-1f64).exp();
        let exact = 1.0 - e1 * (1.0 + 1.0 + 0.5 + 1.0 / 6.0 + 1.0 / 24.0);
        assert!((given.exact.unwrap() - exact).abs() < 1e-12, "{given:?} {exact}");
        assert_eq!(given.holds, Some(true));
        let auto = verify_tail_bound(&c, &f, &StartLaw::Dirac(0), 1.0, 3.0, None).unwrap();
        assert!(auto.certified && auto.constants.c2 <= 1.001 && auto.constants.c1 <= 1.0 + 1e-9, "{:?}", auto.constants);
    }

    #[test]
    fn zero_radius_gives_trivial_bound() {
        assert_eq!(point_tail_value(Constants { c1: 1.0, c2: 1.0 }, 1.0, 0.0), 1.0);
        assert_eq!(additive_tail_value(Constants { c1: 1.0, c2: 1.0 }, 1.0, 0.0), 1.0);
    }

    #[test]
    fn bounded_observable_has_no_tail_past_its_range() {
        let c = FiniteChain::two_state(1.0, 1.0);
        for r in [1.0, 1.5, 3.0] {
            let rep = verify_tail_bound(&c, &[0.0, 1.0], &StartLaw::Dirac(0), 1.0, r, None).unwrap();
            assert_eq!(rep.exact, Some(0.0));
        }
        let two = StartLaw::Pair(vec![0.5, 0.5], vec![1.0, 0.0]);
        let rep = verify_tail_bound(&c, &[0.0, 1.0], &two, 1.0, 0.2, None).unwrap();
        assert!(rep.holds.unwrap());
    }

    #[test]
    fn centered_indicator_certificates() {
        let c = FiniteChain::two_state(1.0, 1.0);
        let k = certify_additive_constants(&c, &[-0.5, 0.5], 5.0, 1000).unwrap();
        assert!((k.c1 - 0.5).abs() < 0.01, "{k:?}");
        assert!((k.c2 - 1.0).abs() < 0.03, "{k:?}");
        let mut last = 1.0;
        for r in [0.5, 1.0, 2.0, 4.0, 8.0] {
            let rep = additive_functional_bound(&c, &[-0.5, 0.5], &StartLaw::Dirac(0), 5.0, r, None, Some(40)).unwrap();
            assert!(rep.holds.unwrap(), "{rep:?}");
            assert!(rep.bound < last);
            last = rep.bound;
        }
    }

    #[test]
    fn zero_observable_never_exceeds() {
        let c = FiniteChain::two_state(1.0, 1.0);
        let rep = additive_functional_bound(&c, &[0.0, 0.0], &StartLaw::Dirac(1), 2.0, 0.5, None, Some(20)).unwrap();
        assert_eq!(rep.exact, Some((0.0, 0.0)));
    }

    #[test]
    fn second_moment_is_the_quadratic_variation() {
        let c = FiniteChain::two_state(1.0, 1.0);
        let rep = moment_bound(&c, &[0.0, 1.0], &StartLaw::Dirac(0), 0.5, 2.0, 2.0, 0, 1).unwrap();
        let var = (1.0 - (-2f64).exp()) / 4.0;
        assert!((rep.moment.powi(2) - var).abs() < 1e-12);
        assert!((rep.qv_term.mean.powi(2) - var).abs() < 1e-10);
        assert!(rep.holds);
        let birth = FiniteChain::birth(40);
        let f: Vec<f64> = (0..=40).map(|i| i as f64).collect();
        let rep = moment_bound(&birth, &f, &StartLaw::Dirac(5), 1.5, 2.0, 2.0, 0, 1).unwrap();
        assert!((rep.qv_term.mean.powi(2) - 1.5).abs() < 1e-9);
        assert!((rep.moment.powi(2) - 1.5).abs() < 1e-9);
    }

    #[test]
    fn constant_observable_moment_terms_vanish() {
        let c = FiniteChain::two_state(2.0, 1.0);
        let rep = moment_bound(&c, &[1.0, 1.0], &StartLaw::Pair(vec![0.3, 0.7], vec![0.5, 0.5]), 1.0, 4.0, 256.0, 200, 2).unwrap();
        assert_eq!((rep.qv_term.mean, rep.jump_term, rep.initial_term, rep.moment), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn refuses_without_finite_structure() {
        let p = super::super::provider::SampledProvider::new(|x: &usize, _, _| *x, 10, 1, 1.0);
        let f = vector_obs(&[0.0, 1.0]);
        assert!(matches!(certify_point_constants(&p, &f, 1.0, 10), Err(Error::Refused(_))));
    }
}
