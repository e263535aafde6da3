use super::chain::{poisson_weights, FiniteChain};
use crate::error::{domain, Error, Result};
use serde::Serialize;
use statrs::distribution::{Beta, ContinuousCDF};

const MAX_PATHS: usize = 2_000_000;

/// One uniformized event sequence `x_0, …, x_n` (self-jumps included) with
/// its exact probability `Pois(ΛT)(n) Π P̃(x_{k−1}, x_k)`. Given the
/// sequence, event times are the order statistics of `n` uniforms on `[0,T]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnumeratedPath {
    pub states: Vec<usize>,
    pub prob: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PathSet {
    pub horizon: f64,
    pub paths: Vec<EnumeratedPath>,
    /// Probability of more than `n_max` uniformized events.
    pub tail_mass: f64,
}

impl PathSet {
    pub fn total_mass(&self) -> f64 {
        self.paths.iter().map(|p| p.prob).sum()
    }

    /// `E[F(path)]` as `(lower, upper)`, with the missing mass charged at
    /// `±bound`, where `bound ≥ sup |F|`.
    pub fn expect(&self, f: impl Fn(&EnumeratedPath) -> f64, bound: f64) -> (f64, f64) {
        let v: f64 = self.paths.iter().map(|p| p.prob * f(p)).sum();
        (v - self.tail_mass * bound, v + self.tail_mass * bound)
    }
}

pub fn enumerate_paths(chain: &FiniteChain, start: usize, t: f64, n_max: usize) -> Result<PathSet> {
    if start >= chain.n() {
        return Err(domain("start state out of range"));
    }
    if !(t >= 0.0) {
        return Err(domain("horizon must be non-negative"));
    }
    let lam = chain.lambda();
    let pw = poisson_weights(lam * t, 0.0, Some(n_max));
    let mut paths = Vec::new();
    let mut stack: Vec<(Vec<usize>, f64)> = vec![(vec![start], 1.0)];
    while let Some((states, p)) = stack.pop() {
        let k = states.len() - 1;
        paths.push(EnumeratedPath { prob: p * pw.weights[k], states: states.clone() });
        if paths.len() > MAX_PATHS {
            return Err(Error::Refused(format!("more than {MAX_PATHS} event sequences")));
        }
        if k == n_max || lam == 0.0 {
            continue;
        }
        let last = states[k];
        for y in (0..chain.n()).rev() {
            let q = chain.jump_prob(last, y);
            if q > 0.0 {
                let mut s = states.clone();
                s.push(y);
                stack.push((s, p * q));
            }
        }
    }
    let tail_mass = if lam == 0.0 { 0.0 } else { pw.tail };
    Ok(PathSet { horizon: t, paths, tail_mass })
}

/// `P(occupation time of `in_set` over [0,T] > a)` for one uniformized
/// sequence. The `n+1` sojourn fractions are Dirichlet(1,…,1), so the time
/// spent in the set is `T · Beta(m, n+1−m)` with `m` the number of sojourns
/// in the set.
pub fn occupation_tail(states: &[usize], in_set: &[bool], t: f64, a: f64) -> f64 {
    let total = states.len();
    let m = states.iter().filter(|&&s| in_set[s]).count();
    if m == 0 {
        return if a < 0.0 { 1.0 } else { 0.0 };
    }
    if m == total {
        return if a < t { 1.0 } else { 0.0 };
    }
    let x = a / t;
    if x <= 0.0 {
        return 1.0;
    }
    if x >= 1.0 {
        return 0.0;
    }
    let b = Beta::new(m as f64, (total - m) as f64).expect("positive shape parameters");
    1.0 - b.cdf(x)
}

/// Exact `E_x[exp(−∫₀ᵗ ψ(s, Y_s) ds) F(Y_t)]` by summing over all
/// uniformized event sequences with at most `n_max` events. For each
/// sequence prefix `x_0…x_k` the sub-probability density
/// `G_k(s) = E[e^{−∫ψ}; prefix followed exactly up to s]` solves
/// `G_k' = Λ P̃(x_{k−1}, x_k) G_{k−1} − (Λ + ψ(s, x_k)) G_k`, integrated on
/// a uniform grid with an integrating factor and a fourth-order interval rule.
/// Prefixes of equal length ending in the same state obey the same equation,
/// so they are aggregated level by level.
pub struct VolterraSolver<'a> {
    chain: &'a FiniteChain,
    start: usize,
    t: f64,
    n_max: usize,
    steps: usize,
    psi: Vec<Vec<f64>>,
}

impl<'a> VolterraSolver<'a> {
    pub fn new(chain: &'a FiniteChain, start: usize, t: f64, n_max: usize, steps: usize, psi: impl Fn(f64, usize) -> f64) -> Result<Self> {
        if steps < 4 {
            return Err(domain("need at least four grid steps"));
        }
        if start >= chain.n() {
            return Err(domain("start state out of range"));
        }
        let psi = (0..=steps).map(|i| (0..chain.n()).map(|x| psi(t * i as f64 / steps as f64, x)).collect()).collect();
        Ok(VolterraSolver { chain, start, t, n_max, steps, psi })
    }

    fn cumulative(&self, y: &[f64]) -> Vec<f64> {
        let n = self.steps;
        let h = self.t / n as f64;
        let mut out = vec![0.0; n + 1];
        for i in 0..n {
            let piece = if i == 0 {
                h / 24.0 * (9.0 * y[0] + 19.0 * y[1] - 5.0 * y[2] + y[3])
            } else if i == n - 1 {
                h / 24.0 * (y[n - 3] - 5.0 * y[n - 2] + 19.0 * y[n - 1] + 9.0 * y[n])
            } else {
                h / 24.0 * (-y[i - 1] + 13.0 * y[i] + 13.0 * y[i + 1] - y[i + 2])
            };
            out[i + 1] = out[i] + piece;
        }
        out
    }

    fn level(&self, x: usize, forcing: Option<&[f64]>) -> Vec<f64> {
        let lam = self.chain.lambda();
        let a: Vec<f64> = self.psi.iter().map(|row| lam + row[x]).collect();
        let e = self.cumulative(&a);
        match forcing {
            None => e.iter().map(|v| (-v).exp()).collect(),
            Some(b) => {
                let integrand: Vec<f64> = b.iter().zip(&e).map(|(bb, ee)| bb * ee.exp()).collect();
                let h = self.cumulative(&integrand);
                h.iter().zip(&e).map(|(hh, ee)| hh * (-ee).exp()).collect()
            }
        }
    }

    /// Returns `(value, error_bound)`; the bound charges the mass of
    /// sequences with more than `n_max` events at `sup |F| · e^{t · max(0, −ψ)}`.
    pub fn expect(&self, terminal: impl Fn(usize) -> f64) -> Result<(f64, f64)> {
        let lam = self.chain.lambda();
        let n = self.chain.n();
        let mut g: Vec<Option<Vec<f64>>> = vec![None; n];
        g[self.start] = Some(self.level(self.start, None));
        let mut value = 0.0;
        for depth in 0..=self.n_max {
            value += g.iter().enumerate().filter_map(|(x, gx)| gx.as_ref().map(|v| v[self.steps] * terminal(x))).sum::<f64>();
            if depth == self.n_max || lam == 0.0 {
                break;
            }
            g = (0..n)
                .map(|y| {
                    let mut forcing: Option<Vec<f64>> = None;
                    for (x, gx) in g.iter().enumerate() {
                        let p = self.chain.jump_prob(x, y);
                        if let (Some(v), true) = (gx, p > 0.0) {
                            let f = forcing.get_or_insert_with(|| vec![0.0; self.steps + 1]);
                            f.iter_mut().zip(v).for_each(|(a, b)| *a += lam * p * b);
                        }
                    }
                    forcing.map(|f| self.level(y, Some(&f)))
                })
                .collect();
        }
        let sup_f = (0..n).map(|x| terminal(x).abs()).fold(0.0, f64::max);
        let min_psi = self.psi.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
        let growth = (self.t * (-min_psi).max(0.0)).exp();
        let tail = if lam == 0.0 { 0.0 } else { poisson_weights(lam * self.t, 0.0, Some(self.n_max)).tail };
        Ok((value, tail * sup_f * growth))
    }
}

/// `E_x[exp(−∫₀ᵗ ψ(s, Y_s) ds) F(Y_t)]` for every `x` from the backward
/// equation `∂_s v + Q v − ψ v = 0`, `v(t) = F`, by classical RK4.
pub fn feynman_kac(chain: &FiniteChain, t: f64, steps: usize, psi: impl Fn(f64, usize) -> f64, terminal: &[f64]) -> Vec<f64> {
    let n = chain.n();
    let h = t / steps as f64;
    let rhs = |s: f64, v: &[f64]| -> Vec<f64> {
        // dv/ds = −Q v + ψ v
        (0..n).map(|x| -chain.generator_at(v, x) + psi(s, x) * v[x]).collect()
    };
    let mut v = terminal.to_vec();
    for k in (0..steps).rev() {
        let s1 = (k + 1) as f64 * h;
        let add = |a: &[f64], b: &[f64], c: f64| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + c * y).collect() };
        let k1 = rhs(s1, &v);
        let k2 = rhs(s1 - h / 2.0, &add(&v, &k1, -h / 2.0));
        let k3 = rhs(s1 - h / 2.0, &add(&v, &k2, -h / 2.0));
        let k4 = rhs(s1 - h, &add(&v, &k3, -h));
        v = (0..n).map(|x| v[x] - h / 6.0 * (k1[x] + 2.0 * k2[x] + 2.0 * k3[x] + k4[x])).collect();
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use approx::assert_relative_eq;

    #[test]
    fn no_jump_path_probability() {
        let c = FiniteChain::two_state(1.0, 1.0);
        let ps = enumerate_paths(&c, 0, 1.0, 0).unwrap();
        assert_eq!(ps.paths.len(), 1);
        assert_relative_eq!(ps.paths[0].prob, (-1f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn enumerated_mass_plus_tail_covers_one() {
        let c = FiniteChain::two_state(2.0, 2.0);
        let ps = enumerate_paths(&c, 0, 1.0, 12).unwrap();
        assert!(ps.total_mass() + ps.tail_mass >= 1.0 - 1e-9);
        assert!(ps.total_mass() <= 1.0 + 1e-12);
    }

    #[test]
    fn enumeration_matches_uniformization() {
        let c = FiniteChain::two_state(0.7, 1.3);
        let f = [0.5, 2.0];
        let t = 1.0 / c.lambda();
        let ps = enumerate_paths(&c, 1, t, 16).unwrap();
        let (lo, hi) = ps.expect(|p| f[*p.states.last().unwrap()], 2.0);
        let exact = c.semigroup(t, &f).unwrap()[1];
        assert!(lo - 1e-12 <= exact && exact <= hi + 1e-12);
        assert!(hi - lo < 2e-9);
    }

    #[test]
    fn volterra_without_potential_is_the_semigroup() {
        let c = FiniteChain::two_state(1.0, 3.0);
        let v = VolterraSolver::new(&c, 0, 1.0, 25, 800, |_, _| 0.0).unwrap();
        let (val, err) = v.expect(|x| [1.0, -2.0][x]).unwrap();
        let exact = c.semigroup(1.0, &[1.0, -2.0]).unwrap()[0];
        assert!((val - exact).abs() < 1e-10 + err, "{val} {exact} {err}");
    }

    #[test]
    fn volterra_agrees_with_feynman_kac() {
        let mut rng = stream(9, "fk", 0);
        let c = FiniteChain::random(3, 1.0, &mut rng);
        let psi = |s: f64, x: usize| 0.3 * x as f64 + 0.2 * s.sin();
        let t = 1.5;
        let f = [1.0, 0.5, -0.25];
        let fk = feynman_kac(&c, t, 2000, psi, &f);
        let v = VolterraSolver::new(&c, 2, t, 30, 2000, psi).unwrap();
        let (val, err) = v.expect(|x| f[x]).unwrap();
        assert!((val - fk[2]).abs() < 1e-9 + err, "{val} vs {}", fk[2]);
    }

    #[test]
    fn occupation_of_two_state_chain() {
        // Total time in the set is T when every sojourn is in it, 0 when none is.
        assert_eq!(occupation_tail(&[1, 1], &[false, true], 2.0, 1.9), 1.0);
        assert_eq!(occupation_tail(&[0, 0], &[false, true], 2.0, 0.1), 0.0);
        // One of two sojourns: uniform fraction.
        assert_relative_eq!(occupation_tail(&[0, 1], &[false, true], 2.0, 0.5), 0.75, epsilon = 1e-12);
    }
}
