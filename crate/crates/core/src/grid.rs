//! Time grids and one-dimensional quadrature.

use crate::error::{domain, Result};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(domain("empty time grid"));
        }
        if points.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(domain("grid times must be finite and non-negative"));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(domain("grid times must be strictly increasing"));
        }
        Ok(TimeGrid { points })
    }

    /// `t = 0` followed by `n - 1` geometrically spaced points from `t_first`
    /// to `t_max`.
    pub fn geometric(t_first: f64, t_max: f64, n: usize) -> Result<Self> {
        if n < 3 || t_first <= 0.0 || t_max <= t_first {
            return Err(domain("geometric grid needs n >= 3 and 0 < t_first < t_max"));
        }
        let m = n - 1;
        let q = (t_max / t_first).powf(1.0 / (m - 1) as f64);
        let mut pts = Vec::with_capacity(n);
        pts.push(0.0);
        pts.extend((0..m).map(|k| if k == m - 1 { t_max } else { t_first * q.powi(k as i32) }));
        TimeGrid::new(pts)
    }

    pub fn uniform(t_max: f64, n: usize) -> Result<Self> {
        if n < 2 || t_max <= 0.0 {
            return Err(domain("uniform grid needs n >= 2 and t_max > 0"));
        }
        TimeGrid::new((0..n).map(|k| t_max * k as f64 / (n - 1) as f64).collect())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> f64 {
        *self.points.last().expect("non-empty")
    }

    /// Trapezoid weights so that `Σ w_i y_i ≈ ∫ y` over the grid.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let p = &self.points;
        let n = p.len();
        let mut w = vec![0.0; n];
        for i in 0..n.saturating_sub(1) {
            let h = p[i + 1] - p[i];
            w[i] += 0.5 * h;
            w[i + 1] += 0.5 * h;
        }
        w
    }

    pub fn trapezoid(&self, y: &[f64]) -> f64 {
        self.trapezoid_weights().iter().zip(y).map(|(w, v)| w * v).sum()
    }

    /// Running trapezoid integral, one entry per grid point.
    pub fn cumulative(&self, y: &[f64]) -> Vec<f64> {
        let p = &self.points;
        let mut out = Vec::with_capacity(p.len());
        let mut acc = 0.0;
        out.push(0.0);
        for i in 1..p.len() {
            acc += 0.5 * (p[i] - p[i - 1]) * (y[i] + y[i - 1]);
            out.push(acc);
        }
        out
    }

    /// Index where the last third of the grid begins.
    pub fn last_third(&self) -> usize {
        self.points.len() - self.points.len() / 3
    }
}

const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329_0,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_3,
    0.222_381_034_453_374_5,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362_0,
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Composite 8-point Gauss–Legendre rule on `[a, b]` with `panels` panels.
pub fn gauss_legendre<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, panels: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let h = (b - a) / panels.max(1) as f64;
    let mut total = 0.0;
    for k in 0..panels.max(1) {
        let lo = a + k as f64 * h;
        let mid = lo + 0.5 * h;
        total += GL_NODES.iter().zip(GL_WEIGHTS).map(|(x, w)| w * f(mid + 0.5 * h * x)).sum::<f64>() * 0.5 * h;
    }
    total
}

/// Nodes and weights of the composite 8-point rule, for vector integrands.
pub fn gauss_legendre_nodes(a: f64, b: f64, panels: usize) -> Vec<(f64, f64)> {
    if b <= a {
        return Vec::new();
    }
    let h = (b - a) / panels.max(1) as f64;
    (0..panels.max(1))
        .flat_map(|k| {
            let mid = a + (k as f64 + 0.5) * h;
            GL_NODES.iter().zip(GL_WEIGHTS).map(move |(x, w)| (mid + 0.5 * h * x, 0.5 * h * w))
        })
        .collect()
}

/// `∫_T^∞ t^d e^{-b t} dt` for integer `d ≥ 0`, `b > 0`.
pub fn poly_exp_tail(d: u32, b: f64, t0: f64) -> f64 {
    let mut sum = 0.0;
    let mut fall = 1.0;
    for k in 0..=d {
        if k > 0 {
            fall *= (d - k + 1) as f64;
        }
        sum += fall * t0.powi((d - k) as i32) / b.powi(k as i32 + 1);
    }
    (-b * t0).exp() * sum
}

/// `∫_0^∞ (g t + 1)^d e^{-c t} dt`.
pub fn shifted_poly_exp_integral(g: f64, d: u32, c: f64) -> f64 {
    let mut sum = 0.0;
    let mut binom = 1.0;
    let mut fact = 1.0;
    for k in 0..=d {
        if k > 0 {
            binom *= (d - k + 1) as f64 / k as f64;
            fact *= k as f64;
        }
        sum += binom * g.powi(k as i32) * fact / c.powi(k as i32 + 1);
    }
    sum
}
