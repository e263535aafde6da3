#![allow(dead_code)]

use rwde::environments::{EnvironmentKind, EnvironmentModel, RefreshLaw};
use rwde::lattice::{Point, RateFamily, SiteSpace, TorusGeometry};

pub fn e1() -> Point {
    Point([1, 0, 0])
}

pub fn refresh(r: f64, p: f64, l: usize) -> EnvironmentModel {
    EnvironmentModel::new(
        EnvironmentKind::IndependentRefresh { rate: r, law: RefreshLaw::Bernoulli(p) },
        TorusGeometry::new(1, l).unwrap(),
    )
    .unwrap()
}

/// `α(η, ±1) = 1 ± ε η(0)`.
pub fn running_rates(eps: f64) -> RateFamily {
    RateFamily::affine(1, SiteSpace::Binary, &[(e1(), 1.0, eps, Point::ORIGIN), (-e1(), 1.0, -eps, Point::ORIGIN)]).unwrap()
}

pub fn constant_rates(p: f64, q: f64) -> RateFamily {
    let mut v = Vec::new();
    if p > 0.0 {
        v.push((e1(), p));
    }
    if q > 0.0 {
        v.push((-e1(), q));
    }
    RateFamily::constant(1, SiteSpace::Binary, &v).unwrap()
}
