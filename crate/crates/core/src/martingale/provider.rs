use crate::ctmc::FiniteChain;
use crate::error::{domain, Result};
use crate::rng::{replicate, SimRng};
use crate::stats::Estimate;
use std::sync::Arc;

/// Observable on a provider's state space.
pub type Obs<S> = Arc<dyn Fn(&S) -> f64 + Send + Sync>;

pub fn obs<S, F: Fn(&S) -> f64 + Send + Sync + 'static>(f: F) -> Obs<S> {
    Arc::new(f)
}

/// Access to `P_t` and, when the rate structure is known, to `A`.
pub trait SemigroupProvider: Send + Sync {
    type State: Clone + Send + Sync + 'static;

    /// `P_t f` as a function (means only).
    fn semigroup(&self, t: f64, f: &Obs<Self::State>) -> Result<Obs<Self::State>>;

    /// `P_t f(x)` with a standard error; zero for exact providers.
    fn semigroup_at(&self, t: f64, f: &Obs<Self::State>, x: &Self::State) -> Result<Estimate>;

    /// Jump targets and rates out of `x`, when the process is a known pure-jump process.
    fn jumps(&self, _x: &Self::State) -> Option<Vec<(Self::State, f64)>> {
        None
    }

    /// Full state list, for finite state spaces.
    fn states(&self) -> Option<Vec<Self::State>> {
        None
    }

    /// Time scale the ε ladder is expressed in.
    fn time_scale(&self) -> f64 {
        1.0
    }

    fn is_exact(&self) -> bool;

    /// `(A g)(x)` when the jump structure is available.
    fn generator_exact(&self, g: &Obs<Self::State>, x: &Self::State) -> Option<f64> {
        let gx = g(x);
        self.jumps(x).map(|js| js.iter().map(|(y, r)| r * (g(y) - gx)).sum())
    }
}

impl SemigroupProvider for FiniteChain {
    type State = usize;

    fn semigroup(&self, t: f64, f: &Obs<usize>) -> Result<Obs<usize>> {
        let v: Vec<f64> = (0..self.n()).map(|x| f(&x)).collect();
        let p = FiniteChain::semigroup(self, t, &v)?;
        Ok(Arc::new(move |x: &usize| p[*x]))
    }

    fn semigroup_at(&self, t: f64, f: &Obs<usize>, x: &usize) -> Result<Estimate> {
        if *x >= self.n() {
            return Err(domain("state out of range"));
        }
        let v: Vec<f64> = (0..self.n()).map(|y| f(&y)).collect();
        Ok(Estimate::exact(FiniteChain::semigroup(self, t, &v)?[*x]))
    }

    fn jumps(&self, x: &usize) -> Option<Vec<(usize, f64)>> {
        Some((0..self.n()).filter(|y| y != x && self.rate(*x, *y) > 0.0).map(|y| (y, self.rate(*x, y))).collect())
    }

    fn states(&self) -> Option<Vec<usize>> {
        Some((0..self.n()).collect())
    }

    fn time_scale(&self) -> f64 {
        if self.lambda() > 0.0 {
            1.0 / self.lambda()
        } else {
            1.0
        }
    }

    fn is_exact(&self) -> bool {
        true
    }
}

type Simulator<S> = Arc<dyn Fn(&S, f64, &mut SimRng) -> S + Send + Sync>;

/// Monte Carlo provider: `P_t f(x)` is the replica mean of `f(Y_t)` with
/// `Y_0 = x`. Replica streams are fixed by the seed, so calls at different
/// `t` share random numbers.
#[derive(Clone)]
pub struct SampledProvider<S> {
    simulate: Simulator<S>,
    replicas: usize,
    seed: u64,
    scale: f64,
}

impl<S: Clone + Send + Sync + 'static> SampledProvider<S> {
    pub fn new(simulate: impl Fn(&S, f64, &mut SimRng) -> S + Send + Sync + 'static, replicas: usize, seed: u64, scale: f64) -> Self {
        SampledProvider { simulate: Arc::new(simulate), replicas, seed, scale }
    }

    fn sample(&self, t: f64, f: &Obs<S>, x: &S) -> Estimate {
        let xs = replicate(self.seed, "provider", self.replicas, |_, rng| f(&(self.simulate)(x, t, rng)));
        Estimate::from_samples(&xs).with_seed(self.seed)
    }
}

impl<S: Clone + Send + Sync + 'static> SemigroupProvider for SampledProvider<S> {
    type State = S;

    fn semigroup(&self, t: f64, f: &Obs<S>) -> Result<Obs<S>> {
        let me = self.clone();
        let f = f.clone();
        Ok(Arc::new(move |x: &S| me.sample(t, &f, x).mean))
    }

    fn semigroup_at(&self, t: f64, f: &Obs<S>, x: &S) -> Result<Estimate> {
        if !(t >= 0.0) {
            return Err(domain("time must be non-negative"));
        }
        Ok(self.sample(t, f, x))
    }

    fn time_scale(&self) -> f64 {
        self.scale
    }

    fn is_exact(&self) -> bool {
        false
    }
}

/// Chain provider restricted to `P_t`: hides the jump structure so every
/// generator value has to come from the ε ladder.
pub struct LadderOnly<'a>(pub &'a FiniteChain);

impl SemigroupProvider for LadderOnly<'_> {
    type State = usize;

    fn semigroup(&self, t: f64, f: &Obs<usize>) -> Result<Obs<usize>> {
        SemigroupProvider::semigroup(self.0, t, f)
    }

    fn semigroup_at(&self, t: f64, f: &Obs<usize>, x: &usize) -> Result<Estimate> {
        self.0.semigroup_at(t, f, x)
    }

    fn time_scale(&self) -> f64 {
        SemigroupProvider::time_scale(self.0)
    }

    fn is_exact(&self) -> bool {
        true
    }
}

/// Chain observables from a vector.
pub fn vector_obs(v: &[f64]) -> Obs<usize> {
    let v = v.to_vec();
    Arc::new(move |x: &usize| v[*x])
}
