//! Torus geometry, site spaces and configurations.

mod local;
mod rates;

pub use local::{FunctionNorms, LocalFunction};
pub use rates::{rate_norms, Jump, RateFamily, RateNorms};

use crate::error::{model, Result};
use serde::Serialize;
use std::ops::{Add, Neg, Sub};

pub const MAX_DIM: usize = 3;

/// A lattice point in Z^d, stored in a fixed array; coordinates past `d` are 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord, Serialize)]
pub struct Point(pub [i64; MAX_DIM]);

impl Point {
    pub const ORIGIN: Point = Point([0; MAX_DIM]);

    pub fn new(coords: &[i64]) -> Result<Self> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(model(format!("point needs 1..={MAX_DIM} coordinates, got {}", coords.len())));
        }
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Ok(Point(c))
    }

    pub fn axis(i: usize) -> Self {
        let mut c = [0; MAX_DIM];
        c[i] = 1;
        Point(c)
    }

    pub fn euclidean(&self) -> f64 {
        self.0.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt()
    }

    pub fn positive_part(&self) -> Point {
        Point(self.0.map(|v| v.max(0)))
    }

    pub fn negative_part(&self) -> Point {
        Point(self.0.map(|v| v.min(0)))
    }

    /// Coordinate-wise `self <= other`.
    pub fn le(&self, other: &Point) -> bool {
        self.0.iter().zip(other.0.iter()).all(|(a, b)| a <= b)
    }

    pub fn dot(&self, u: &[f64]) -> f64 {
        self.0.iter().zip(u).map(|(&a, b)| a as f64 * b).sum()
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point(std::array::from_fn(|i| self.0[i] + o.0[i]))
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point(std::array::from_fn(|i| self.0[i] - o.0[i]))
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point(self.0.map(|v| -v))
    }
}

/// Z_L^d with periodic wraparound. Sites are indexed `0..L^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TorusGeometry {
    d: usize,
    side: usize,
}

impl TorusGeometry {
    pub fn new(d: usize, side: usize) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(model(format!("dimension must be in 1..={MAX_DIM}")));
        }
        if side == 0 {
            return Err(model("side length must be positive"));
        }
        if (side as f64).powi(d as i32) > 1e8 {
            return Err(model("torus too large"));
        }
        Ok(TorusGeometry { d, side })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn num_sites(&self) -> usize {
        self.side.pow(self.d as u32)
    }

    #[inline]
    pub fn site(&self, p: Point) -> usize {
        let l = self.side as i64;
        let mut idx = 0usize;
        for i in (0..self.d).rev() {
            idx = idx * self.side + p.0[i].rem_euclid(l) as usize;
        }
        idx
    }

    pub fn point(&self, mut site: usize) -> Point {
        let mut c = [0; MAX_DIM];
        for v in c.iter_mut().take(self.d) {
            *v = (site % self.side) as i64;
            site /= self.side;
        }
        Point(c)
    }

    pub fn shift_site(&self, site: usize, by: Point) -> usize {
        self.site(self.point(site) + by)
    }

    /// Nearest neighbours of a site (2d entries; repeated when L ≤ 2).
    pub fn neighbors(&self, site: usize) -> impl Iterator<Item = usize> + '_ {
        let p = self.point(site);
        (0..self.d).flat_map(move |i| [self.site(p + Point::axis(i)), self.site(p - Point::axis(i))])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SiteSpace {
    Binary,
    /// `[0,1]` with suprema taken on a grid of `steps + 1` points.
    UnitInterval { steps: usize },
}

impl SiteSpace {
    pub const DEFAULT_STEPS: usize = 64;

    pub fn unit_interval() -> Self {
        SiteSpace::UnitInterval { steps: Self::DEFAULT_STEPS }
    }

    pub fn rho(&self, a: f64, b: f64) -> f64 {
        match self {
            SiteSpace::Binary => {
                if a == b {
                    0.0
                } else {
                    1.0
                }
            }
            SiteSpace::UnitInterval { .. } => (a - b).abs().min(1.0),
        }
    }

    /// Values used for exhaustive/grid suprema.
    pub fn grid(&self) -> Vec<f64> {
        match *self {
            SiteSpace::Binary => vec![0.0, 1.0],
            SiteSpace::UnitInterval { steps } => (0..=steps).map(|k| k as f64 / steps as f64).collect(),
        }
    }

    pub fn grid_step(&self) -> Option<f64> {
        match *self {
            SiteSpace::Binary => None,
            SiteSpace::UnitInterval { steps } => Some(1.0 / steps as f64),
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        match self {
            SiteSpace::Binary => v == 0.0 || v == 1.0,
            SiteSpace::UnitInterval { .. } => (0.0..=1.0).contains(&v),
        }
    }

    /// The two extreme values of E.
    pub fn endpoints(&self) -> (f64, f64) {
        (0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    geometry: TorusGeometry,
    values: Vec<f64>,
}

impl Configuration {
    pub fn constant(geometry: TorusGeometry, v: f64) -> Self {
        Configuration { geometry, values: vec![v; geometry.num_sites()] }
    }

    pub fn from_values(geometry: TorusGeometry, values: Vec<f64>) -> Result<Self> {
        if values.len() != geometry.num_sites() {
            return Err(model(format!("expected {} site values, got {}", geometry.num_sites(), values.len())));
        }
        Ok(Configuration { geometry, values })
    }

    pub fn from_fn(geometry: TorusGeometry, f: impl FnMut(usize) -> f64) -> Self {
        Configuration { geometry, values: (0..geometry.num_sites()).map(f).collect() }
    }

    pub fn geometry(&self) -> TorusGeometry {
        self.geometry
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn at(&self, p: Point) -> f64 {
        self.values[self.geometry.site(p)]
    }

    pub fn set(&mut self, p: Point, v: f64) {
        let s = self.geometry.site(p);
        self.values[s] = v;
    }

    /// `θ_x η` with `(θ_x η)(y) = η(y − x)`.
    pub fn shifted(&self, x: Point) -> Configuration {
        let g = self.geometry;
        Configuration::from_fn(g, |s| self.at(g.point(s) - x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn site_count_and_roundtrip() {
        let g = TorusGeometry::new(2, 5).unwrap();
        assert_eq!(g.num_sites(), 25);
        for s in 0..25 {
            assert_eq!(g.site(g.point(s)), s);
        }
        assert_eq!(g.site(Point::new(&[-1, 0]).unwrap()), g.site(Point::new(&[4, 0]).unwrap()));
    }

    #[test]
    fn rho_is_a_bounded_metric() {
        for sp in [SiteSpace::Binary, SiteSpace::unit_interval()] {
            let vals = sp.grid();
            for &a in &vals {
                assert_eq!(sp.rho(a, a), 0.0);
                for &b in &vals {
                    assert_eq!(sp.rho(a, b), sp.rho(b, a));
                    assert!(sp.rho(a, b) <= 1.0);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn shift_is_a_bijection(d in 1usize..=3, l in 1usize..6, x in prop::array::uniform3(-20i64..20)) {
            let g = TorusGeometry::new(d, l).unwrap();
            let mut xp = Point(x);
            for v in xp.0.iter_mut().skip(d) { *v = 0; }
            let eta = Configuration::from_fn(g, |s| s as f64);
            let back = eta.shifted(xp).shifted(-xp);
            prop_assert_eq!(&back, &eta);
            let sh = eta.shifted(xp);
            let mut seen = sh.values().to_vec();
            seen.sort_by(f64::total_cmp);
            prop_assert_eq!(seen, eta.values().to_vec());
            for s in 0..g.num_sites() {
                let y = g.point(s);
                prop_assert_eq!(sh.at(y), eta.at(y - xp));
            }
        }
    }
}
