use crate::error::{domain, model, Result};
use crate::rng::{exp_time, SimRng};
use rand::Rng;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

/// Truncated Poisson(`m`) weights together with the mass left out.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoissonWeights {
    pub weights: Vec<f64>,
    pub tail: f64,
}

/// Weights `w_n = e^{−m} mⁿ/n!` for `n = 0..=N`, computed in log space, with
/// `N` the first index past the mode at which the remaining mass is below
/// `tol`. With `n_max` given, truncation happens there instead.
pub fn poisson_weights(m: f64, tol: f64, n_max: Option<usize>) -> PoissonWeights {
    if m == 0.0 {
        return PoissonWeights { weights: vec![1.0], tail: 0.0 };
    }
    let lm = m.ln();
    let w = |n: usize| (-m + n as f64 * lm - ln_gamma(n as f64 + 1.0)).exp();
    let mut weights = Vec::new();
    let mut n = 0usize;
    loop {
        let wn = w(n);
        weights.push(wn);
        if let Some(k) = n_max {
            if n >= k {
                break;
            }
        } else if n as f64 > m && tail_above(m, n, wn) < tol {
            break;
        }
        n += 1;
    }
    PoissonWeights { tail: rigorous_tail(m, n, weights[n]), weights }
}

/// Upper bound on `Σ_{k>n} w_k` from the geometric ratio bound
/// `w_{k+1}/w_k = m/(k+1) ≤ m/(n+2)` for `k > n`; valid once `n + 2 > m`.
fn tail_above(m: f64, n: usize, wn: f64) -> f64 {
    let q = m / (n as f64 + 2.0);
    if q >= 1.0 {
        return 1.0;
    }
    wn * (m / (n as f64 + 1.0)) / (1.0 - q)
}

fn rigorous_tail(m: f64, n: usize, wn: f64) -> f64 {
    let q = m / (n as f64 + 2.0);
    if q >= 1.0 {
        // Fall back on the complementary regularized gamma function.
        statrs::function::gamma::gamma_lr(n as f64 + 1.0, m)
    } else {
        wn * (m / (n as f64 + 1.0)) / (1.0 - q)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiniteChain {
    q: Vec<Vec<f64>>,
    lambda: f64,
    tail_tol: f64,
}

impl FiniteChain {
    pub const DEFAULT_TAIL_TOL: f64 = 1e-14;

    pub fn new(q: Vec<Vec<f64>>) -> Result<Self> {
        let n = q.len();
        if n == 0 {
            return Err(model("chain needs at least one state"));
        }
        for (i, row) in q.iter().enumerate() {
            if row.len() != n {
                return Err(model(format!("row {i} has {} entries, expected {n}", row.len())));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(model(format!("row {i} has a non-finite rate")));
            }
            if row.iter().enumerate().any(|(j, &v)| j != i && v < 0.0) {
                return Err(model(format!("row {i} has a negative off-diagonal rate")));
            }
            let s: f64 = row.iter().sum();
            if s.abs() > 1e-12 * (1.0 + row[i].abs()) {
                return Err(model(format!("row {i} sums to {s}")));
            }
        }
        let lambda = (0..n).map(|i| q[i][i].abs()).fold(0.0, f64::max);
        Ok(FiniteChain { q, lambda, tail_tol: Self::DEFAULT_TAIL_TOL })
    }

    /// Builds `Q` from off-diagonal rates; diagonals are filled in.
    pub fn from_rates(rates: Vec<Vec<f64>>) -> Result<Self> {
        let mut q = rates;
        for i in 0..q.len() {
            if q[i].len() != q.len() {
                return Err(model("rate matrix must be square"));
            }
            q[i][i] = 0.0;
            let s: f64 = q[i].iter().sum();
            q[i][i] = -s;
        }
        FiniteChain::new(q)
    }

    pub fn two_state(a: f64, b: f64) -> Self {
        FiniteChain::from_rates(vec![vec![0.0, a], vec![b, 0.0]]).expect("valid rates")
    }

    /// States `0..=n`, unit rate up, absorbing at `n`.
    pub fn birth(n: usize) -> Self {
        let q = (0..=n).map(|i| (0..=n).map(|j| if j == i + 1 { 1.0 } else { 0.0 }).collect()).collect();
        FiniteChain::from_rates(q).expect("valid rates")
    }

    pub fn random(n: usize, max_rate: f64, rng: &mut SimRng) -> Self {
        let q = (0..n).map(|i| (0..n).map(|j| if i == j { 0.0 } else { rng.random::<f64>() * max_rate }).collect()).collect();
        FiniteChain::from_rates(q).expect("valid rates")
    }

    pub fn with_tail_tolerance(mut self, tol: f64) -> Self {
        self.tail_tol = tol;
        self
    }

    pub fn tail_tolerance(&self) -> f64 {
        self.tail_tol
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        self.q[i][j]
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.q
    }

    /// Uniformization constant `Λ = max_i |Q_ii|`.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `P̃(i, j) = δ_ij + Q_ij / Λ`.
    pub fn jump_prob(&self, i: usize, j: usize) -> f64 {
        let d = if i == j { 1.0 } else { 0.0 };
        if self.lambda == 0.0 {
            d
        } else {
            d + self.q[i][j] / self.lambda
        }
    }

    /// `(Q f)(x)` for every state.
    pub fn generator(&self, f: &[f64]) -> Vec<f64> {
        self.q.iter().map(|row| row.iter().zip(f).map(|(a, b)| a * b).sum()).collect()
    }

    /// `(Q f)(x) = Σ_y Q(x,y)(f(y) − f(x))`, free of cancellation against the diagonal.
    pub fn generator_at(&self, f: &[f64], x: usize) -> f64 {
        self.q[x].iter().enumerate().filter(|(y, _)| *y != x).map(|(y, &r)| r * (f[y] - f[x])).sum()
    }

    fn apply_ptilde(&self, g: &[f64]) -> Vec<f64> {
        // P̃ g(x) = g(x) + (1/Λ) Σ_{y≠x} Q(x,y)(g(y) − g(x))
        (0..self.n()).map(|x| g[x] + self.generator_at(g, x) / self.lambda).collect()
    }

    /// `P_t f`. The increments `P̃ⁿ f − f` are accumulated instead of the raw
    /// powers so small `t` keeps full relative precision.
    pub fn semigroup(&self, t: f64, f: &[f64]) -> Result<Vec<f64>> {
        if !(t >= 0.0) {
            return Err(domain(format!("time {t} must be non-negative")));
        }
        if f.len() != self.n() {
            return Err(domain("observable length does not match the state space"));
        }
        if t == 0.0 || self.lambda == 0.0 {
            return Ok(f.to_vec());
        }
        let pw = poisson_weights(self.lambda * t, self.tail_tol, None);
        let mut cur = f.to_vec();
        let mut acc = vec![0.0; self.n()];
        for &w in pw.weights.iter().skip(1) {
            cur = self.apply_ptilde(&cur);
            for x in 0..self.n() {
                acc[x] += w * (cur[x] - f[x]);
            }
        }
        Ok((0..self.n()).map(|x| f[x] + acc[x]).collect())
    }

    /// Law of `Y_t` given `Y_0 ~ p0`.
    pub fn distribution(&self, p0: &[f64], t: f64) -> Result<Vec<f64>> {
        if !(t >= 0.0) {
            return Err(domain(format!("time {t} must be non-negative")));
        }
        if t == 0.0 || self.lambda == 0.0 {
            return Ok(p0.to_vec());
        }
        let n = self.n();
        let pw = poisson_weights(self.lambda * t, self.tail_tol, None);
        let mut cur = p0.to_vec();
        let mut acc: Vec<f64> = cur.iter().map(|v| v * pw.weights[0]).collect();
        for &w in pw.weights.iter().skip(1) {
            let mut next = vec![0.0; n];
            for i in 0..n {
                if cur[i] == 0.0 {
                    continue;
                }
                for (j, nx) in next.iter_mut().enumerate() {
                    *nx += cur[i] * self.jump_prob(i, j);
                }
            }
            cur = next;
            acc.iter_mut().zip(&cur).for_each(|(a, c)| *a += w * c);
        }
        Ok(acc)
    }

    pub fn point_mass(&self, x: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.n()];
        p[x] = 1.0;
        p
    }

    /// Gillespie path on `[0, t]`: `(jump time, new state)` pairs, starting with `(0, x)`.
    pub fn sample_path(&self, x: usize, t: f64, rng: &mut SimRng) -> Vec<(f64, usize)> {
        let mut path = vec![(0.0, x)];
        let mut s = 0.0;
        let mut cur = x;
        loop {
            let out = -self.q[cur][cur];
            if out <= 0.0 {
                return path;
            }
            s += exp_time(rng, out);
            if s > t {
                return path;
            }
            let mut pick = rng.random::<f64>() * out;
            let mut next = cur;
            for j in 0..self.n() {
                if j == cur {
                    continue;
                }
                next = j;
                if pick < self.q[cur][j] {
                    break;
                }
                pick -= self.q[cur][j];
            }
            cur = next;
            path.push((s, cur));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn poisson_weights_sum_to_one() {
        for m in [0.1, 2.0, 17.0, 250.0] {
            let pw = poisson_weights(m, 1e-14, None);
            let s: f64 = pw.weights.iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "m = {m}: {s}");
            assert!(pw.tail < 1e-14);
        }
        let pw = poisson_weights(2.0, 0.0, Some(12));
        let s: f64 = pw.weights.iter().sum();
        assert!(s + pw.tail >= 1.0 - 1e-12);
        assert!(pw.tail < 1e-5);
    }

    #[test]
    fn identity_at_time_zero() {
        let c = FiniteChain::two_state(1.0, 1.0);
        assert_eq!(c.semigroup(0.0, &[0.3, -2.0]).unwrap(), vec![0.3, -2.0]);
        assert!(c.semigroup(-1.0, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn two_state_closed_form() {
        let c = FiniteChain::two_state(1.0, 1.0);
        let t = 2f64.ln() / 2.0;
        let p = c.semigroup(t, &[0.0, 1.0]).unwrap();
        assert_relative_eq!(p[0], 0.25, epsilon = 1e-14);
        for t in [0.01, 0.5, 3.0, 40.0] {
            let p = c.semigroup(t, &[0.0, 1.0]).unwrap();
            assert_relative_eq!(p[0], (1.0 - (-2.0 * t).exp()) / 2.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn birth_chain_is_poisson() {
        let c = FiniteChain::birth(60);
        let d = c.distribution(&c.point_mass(0), 5.0).unwrap();
        for (k, p) in d.iter().take(25).enumerate() {
            let exact = (-5.0f64).exp() * 5f64.powi(k as i32) / (1..=k).map(|i| i as f64).product::<f64>();
            assert_relative_eq!(*p, exact, epsilon = 1e-13);
        }
    }

    #[test]
    fn rejects_invalid_rates() {
        assert!(FiniteChain::new(vec![vec![-1.0, 2.0], vec![1.0, -1.0]]).is_err());
        assert!(FiniteChain::new(vec![vec![1.0, -1.0], vec![1.0, -1.0]]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn semigroup_property(seed in 0u64..10_000, s in 0.0f64..2.0, t in 0.0f64..2.0) {
            let mut rng = stream(seed, "chain", 0);
            let c = FiniteChain::random(6, 2.0, &mut rng);
            let f: Vec<f64> = (0..6).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let direct = c.semigroup(s + t, &f).unwrap();
            let split = c.semigroup(s, &c.semigroup(t, &f).unwrap()).unwrap();
            for x in 0..6 {
                prop_assert!((direct[x] - split[x]).abs() < 1e-10);
            }
            let p = c.distribution(&c.point_mass(2), t).unwrap();
            let ef: f64 = p.iter().zip(&f).map(|(a, b)| a * b).sum();
            prop_assert!((ef - c.semigroup(t, &f).unwrap()[2]).abs() < 1e-10);
        }
    }
}
