//! Estimates, running moments and the two goodness-of-fit tests used by the
//! marginal and normality checks.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
    pub seed: Option<u64>,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { mean: value, se: 0.0, n: 0, seed: None }
    }

    pub fn from_samples(xs: &[f64]) -> Self {
        let mut w = Welford::default();
        xs.iter().for_each(|&x| w.push(x));
        w.estimate()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// SE of the difference of two independent estimates.
    pub fn joint_se(&self, other: &Estimate) -> f64 {
        self.se.hypot(other.se)
    }

    pub fn minus(&self, other: &Estimate) -> Estimate {
        Estimate { mean: self.mean - other.mean, se: self.joint_se(other), n: self.n.min(other.n), seed: self.seed }
    }

    pub fn scaled(&self, c: f64) -> Estimate {
        Estimate { mean: self.mean * c, se: self.se * c.abs(), ..*self }
    }

    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.se
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, o: &Welford) {
        if o.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *o;
            return;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        self.mean += d * o.n as f64 / n as f64;
        self.m2 += o.m2 + d * d * (self.n as f64) * (o.n as f64) / n as f64;
        self.n = n;
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn estimate(&self) -> Estimate {
        let se = if self.n < 2 { 0.0 } else { (self.variance() / self.n as f64).sqrt() };
        Estimate { mean: self.mean, se, n: self.n, seed: None }
    }
}

/// Splits `[0, len)` into `batches` contiguous blocks and averages each.
pub fn batch_means(series: &[f64], batches: usize) -> Vec<f64> {
    let b = batches.max(1).min(series.len().max(1));
    let size = series.len() / b;
    if size == 0 {
        return Vec::new();
    }
    (0..b).map(|k| series[k * size..(k + 1) * size].iter().sum::<f64>() / size as f64).collect()
}

/// Pearson homogeneity test for two samples of integer-valued draws.
/// Adjacent categories are pooled until each pooled cell holds at least
/// `min_cell` observations across both samples. Returns the p-value.
pub fn chi_square_two_sample(a: &[i64], b: &[i64]) -> f64 {
    const MIN_CELL: usize = 20;
    let mut counts: BTreeMap<i64, (usize, usize)> = BTreeMap::new();
    a.iter().for_each(|&v| counts.entry(v).or_default().0 += 1);
    b.iter().for_each(|&v| counts.entry(v).or_default().1 += 1);
    let mut cells: Vec<(usize, usize)> = Vec::new();
    let mut acc = (0usize, 0usize);
    for &(ca, cb) in counts.values() {
        acc.0 += ca;
        acc.1 += cb;
        if acc.0 + acc.1 >= MIN_CELL {
            cells.push(acc);
            acc = (0, 0);
        }
    }
    if acc.0 + acc.1 > 0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => cells.push(acc),
        }
    }
    if cells.len() < 2 {
        return 1.0;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let n = na + nb;
    let stat: f64 = cells
        .iter()
        .map(|&(ca, cb)| {
            let col = (ca + cb) as f64;
            let (ea, eb) = (na * col / n, nb * col / n);
            (ca as f64 - ea).powi(2) / ea + (cb as f64 - eb).powi(2) / eb
        })
        .sum();
    let dist = ChiSquared::new((cells.len() - 1) as f64).expect("df > 0");
    1.0 - dist.cdf(stat)
}

/// Asymptotic Kolmogorov survival function with the Stephens small-sample
/// adjustment.
pub fn kolmogorov_p(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lam = (sn + 0.12 + 0.11 / sn) * d;
    if lam < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = 2.0 * (-2.0 * kf * kf * lam * lam).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// One-sample KS test against a normal law with the sample's own mean and
/// variance. Returns `(statistic, p_value)`.
pub fn ks_normal(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n < 2 {
        return (0.0, 1.0);
    }
    let est = Estimate::from_samples(xs);
    let sd = (est.se * (n as f64).sqrt()).max(f64::MIN_POSITIVE);
    let normal = Normal::new(est.mean, sd).expect("finite parameters");
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = normal.cdf(x);
            (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
        })
        .fold(0.0, f64::max);
    (d, kolmogorov_p(d, n))
}

/// Least-squares fit `y ≈ A e^{-b t}` on the log scale over points with
/// `y > 0`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExpFit {
    pub amplitude: f64,
    pub rate: f64,
    pub rate_se: f64,
    pub residual: f64,
    pub points: usize,
}

pub fn fit_exponential(t: &[f64], y: &[f64]) -> Option<ExpFit> {
    let pts: Vec<(f64, f64)> = t.iter().zip(y).filter(|(_, &v)| v > 0.0).map(|(&a, &v)| (a, v.ln())).collect();
    let n = pts.len();
    if n < 3 {
        return None;
    }
    let nf = n as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let icpt = my - slope * mt;
    let rss: f64 = pts.iter().map(|p| (p.1 - icpt - slope * p.0).powi(2)).sum();
    let s2 = rss / (nf - 2.0);
    Some(ExpFit {
        amplitude: icpt.exp(),
        rate: -slope,
        rate_se: (s2 / sxx).sqrt(),
        residual: (rss / nf).sqrt(),
        points: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.0, 4.0, 2.5, -3.0, 7.25];
        let m = xs.iter().sum::<f64>() / 5.0;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 4.0;
        let e = Estimate::from_samples(&xs);
        assert_relative_eq!(e.mean, m, epsilon = 1e-12);
        assert_relative_eq!(e.se, (v / 5.0).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn kolmogorov_reference_points() {
        // Q(1.36) ~ 0.049, Q(1.63) ~ 0.010 for large n.
        let n = 1_000_000;
        let q = |lam: f64| kolmogorov_p(lam / (n as f64).sqrt(), n);
        assert!((q(1.358) - 0.05).abs() < 2e-3);
        assert!((q(1.628) - 0.01).abs() < 1e-3);
    }

    #[test]
    fn chi_square_identical_samples() {
        let a: Vec<i64> = (0..1000).map(|i| i % 7).collect();
        assert!(chi_square_two_sample(&a, &a) > 0.99);
        let b: Vec<i64> = (0..1000).map(|i| (i % 7) + 3).collect();
        assert!(chi_square_two_sample(&a, &b) < 1e-6);
    }

    #[test]
    fn exp_fit_recovers_rate() {
        let t: Vec<f64> = (0..20).map(|i| i as f64 * 0.3).collect();
        let y: Vec<f64> = t.iter().map(|&s| 2.0 * (-1.5 * s).exp()).collect();
        let f = fit_exponential(&t, &y).unwrap();
        assert_relative_eq!(f.rate, 1.5, epsilon = 1e-10);
        assert_relative_eq!(f.amplitude, 2.0, epsilon = 1e-10);
    }

    proptest! {
        #[test]
        fn welford_merge_is_concatenation(xs in prop::collection::vec(-1e3f64..1e3, 0..40), ys in prop::collection::vec(-1e3f64..1e3, 0..40)) {
            let mut a = Welford::default();
            xs.iter().for_each(|&x| a.push(x));
            let mut b = Welford::default();
            ys.iter().for_each(|&x| b.push(x));
            a.merge(&b);
            let mut c = Welford::default();
            xs.iter().chain(&ys).for_each(|&x| c.push(x));
            prop_assert_eq!(a.count(), c.count());
            prop_assert!((a.mean() - c.mean()).abs() < 1e-9);
            prop_assert!((a.variance() - c.variance()).abs() < 1e-6 * (1.0 + c.variance()));
        }
    }
}
