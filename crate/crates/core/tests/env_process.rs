mod common;

use common::{constant_rates, refresh, running_rates};
use rwde::env_process::*;
use rwde::environments::PhiSpec;
use rwde::grid::TimeGrid;
use rwde::lattice::{Configuration, LocalFunction, Point, RateFamily, SiteSpace};

fn eta0() -> LocalFunction {
    LocalFunction::projection(Point::ORIGIN)
}

fn pair_at_origin(l: usize) -> (Configuration, Configuration) {
    let m = refresh(1.0, 0.5, l);
    let base = Configuration::from_fn(m.geometry(), |s| (s % 2) as f64);
    let mut a = base.clone();
    let mut b = base;
    a.values_mut()[0] = 1.0;
    b.values_mut()[0] = 0.0;
    (a, b)
}

fn diff_opts(t_max: f64, replicas: usize, seed: u64) -> DifferenceOptions {
    DifferenceOptions { grid: TimeGrid::geometric(0.01, t_max, 64).unwrap(), replicas, seed, phi: None, independent: false }
}

#[test]
fn environment_blind_walker_sees_the_environment_law() {
    let m = refresh(1.0, 0.3, 32);
    let a = constant_rates(1.0, 1.0);
    let est = estimate_mu_ep(&m, &a, &eta0(), &ErgodicOptions::new(2.0, 42.0, 200, 1)).unwrap();
    assert!(est.value.within(0.3, 3.0), "{:?}", est.value);
    let c = estimate_mu_ep(&m, &a, &LocalFunction::constant(0.7), &ErgodicOptions::new(1.0, 5.0, 4, 1)).unwrap();
    assert!((c.value.mean - 0.7).abs() < 1e-12 && c.value.se < 1e-12);
}

#[test]
fn two_estimators_and_two_starts_agree() {
    let m = refresh(1.0, 0.5, 32);
    let a = running_rates(0.2);
    let opts = ErgodicOptions::new(5.0, 105.0, 100, 2);
    let avg = estimate_mu_ep(&m, &a, &eta0(), &opts).unwrap().value;
    let snap = estimate_mu_ep_snapshots(&m, &a, &eta0(), &opts, 0.5).unwrap().value;
    assert!((avg.mean - snap.mean).abs() <= 3.0 * avg.joint_se(&snap), "{avg:?} {snap:?}");
    let zeros = ErgodicOptions { initial: InitialLaw::Constant(0.0), seed: 3, ..opts.clone() };
    let ones = ErgodicOptions { initial: InitialLaw::Constant(1.0), seed: 4, ..opts };
    let z = estimate_mu_ep(&m, &a, &eta0(), &zeros).unwrap().value;
    let o = estimate_mu_ep(&m, &a, &eta0(), &ones).unwrap().value;
    assert!((z.mean - o.mean).abs() <= 3.0 * z.joint_se(&o), "{z:?} {o:?}");
}

#[test]
fn horizon_must_exceed_burn_in() {
    let m = refresh(1.0, 0.5, 8);
    let r = estimate_mu_ep(&m, &constant_rates(1.0, 0.0), &eta0(), &ErgodicOptions::new(5.0, 5.0, 2, 1));
    assert!(matches!(r, Err(rwde::Error::Config(_))));
}

#[test]
fn pure_environment_difference_integral_is_one_over_r() {
    let m = refresh(1.0, 0.5, 16);
    let none = RateFamily::empty(1, SiteSpace::Binary);
    let mut o = diff_opts(8.0, 10_000, 5);
    o.independent = true;
    let r = semigroup_difference_integral(&m, &none, &eta0(), pair_at_origin(16), &o, None).unwrap();
    assert!(r.integral.within(1.0, 3.0), "{:?}", r.integral);
    assert!(r.flag.is_none());
    let ind = r.independent.unwrap();
    assert!(ind.se > r.integral.se);
    assert!(r.rows.windows(2).all(|w| w[1].partial_integral >= w[0].partial_integral));
}

#[test]
fn trivial_difference_integrals_vanish() {
    let m = refresh(1.0, 0.5, 16);
    let a = running_rates(0.2);
    let (x, y) = pair_at_origin(16);
    let c = semigroup_difference_integral(&m, &a, &LocalFunction::constant(2.0), (x.clone(), y), &diff_opts(4.0, 50, 6), None).unwrap();
    assert_eq!(c.integral.mean, 0.0);
    let same = semigroup_difference_integral(&m, &a, &eta0(), (x.clone(), x), &diff_opts(4.0, 50, 6), None).unwrap();
    assert_eq!(same.integral.mean, 0.0);
    assert!(same.rows.iter().all(|r| r.mean_diff == 0.0));
}

#[test]
fn exponential_weight_shifts_the_rate_and_diverges_below_threshold() {
    let m = refresh(1.0, 0.5, 16);
    let none = RateFamily::empty(1, SiteSpace::Binary);
    let o = diff_opts(8.0, 10_000, 7);
    let w = phi_weighted_integral(&m, &none, &eta0(), pair_at_origin(16), PhiSpec::Exp(1.0), 2.0, &o).unwrap();
    assert!(w.flag.is_none());
    assert!((w.integral.mean - 2.0).abs() <= 3.0 * w.integral.se + 0.1, "{:?}", w.integral);
    let zero = phi_weighted_integral(&m, &none, &eta0(), pair_at_origin(16), PhiSpec::Exp(0.0), 1.0, &o).unwrap();
    let plain = semigroup_difference_integral(&m, &none, &eta0(), pair_at_origin(16), &o, None).unwrap();
    assert!((zero.integral.mean - plain.integral.mean).abs() < 1e-12);
    let flags: Vec<bool> = [0.5, 0.8, 1.5, 3.0]
        .iter()
        .map(|&k| phi_weighted_integral(&m, &none, &eta0(), pair_at_origin(16), PhiSpec::Exp(1.0), k, &o).unwrap().flag.as_deref() == Some("divergent"))
        .collect();
    assert_eq!(flags, vec![true, true, false, false]);
}

#[test]
fn semigroup_constant_bounds_the_running_example() {
    let m = refresh(1.0, 0.5, 16);
    let a = running_rates(0.2);
    let ca = semigroup_constant(&m, &a, None).unwrap();
    assert!(ca.certified);
    assert!((ca.value - 3.2 * 1.28f64.exp()).abs() < 1e-9);
    let r = semigroup_difference_integral(&m, &a, &eta0(), pair_at_origin(16), &diff_opts(10.0, 4000, 8), Some(ca.value)).unwrap();
    assert_eq!(r.holds, Some(true));
}

#[test]
fn continuity_check() {
    let m = refresh(1.0, 0.5, 32);
    let opts = ErgodicOptions::new(5.0, 85.0, 80, 9);
    let a = running_rates(0.2);
    let same = continuity_bound_check(&m, &a, &a, &eta0(), &opts, None, None).unwrap();
    assert_eq!(same.lhs.mean, 0.0);
    assert_eq!(same.holds, Some(true));
    let p = constant_rates(1.0, 0.5);
    let q = constant_rates(0.8, 0.5);
    let blind = continuity_bound_check(&m, &p, &q, &eta0(), &opts, None, None).unwrap();
    assert_eq!(blind.p_alpha.value, 1.0);
    assert_eq!(blind.holds, Some(true));
    let b = RateFamily::affine(1, SiteSpace::Binary, &[(common::e1(), 1.0, 0.25, Point::ORIGIN), (-common::e1(), 1.0, -0.2, Point::ORIGIN)]).unwrap();
    let run = continuity_bound_check(&m, &a, &b, &eta0(), &opts, None, None).unwrap();
    assert!((run.distance_0 - 0.05).abs() < 1e-12);
    assert_eq!(run.holds, Some(true), "{run:?}");
}
