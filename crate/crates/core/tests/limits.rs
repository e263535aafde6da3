mod common;

use common::{constant_rates, e1, refresh, running_rates};
use rwde::lattice::{Point, RateFamily, SiteSpace};
use rwde::limits::*;
use std::time::Instant;

#[test]
fn speeds_of_simple_walkers() {
    let m = refresh(1.0, 0.5, 16);
    let poisson = estimate_speed(&m, &constant_rates(1.0, 0.0), 50.0, 2000, 1).unwrap();
    assert!(poisson.v_hat[0].within(1.0, 3.0), "{:?}", poisson.v_hat);
    assert_eq!(poisson.formula_speed[0].mean, 1.0);
    assert_eq!(poisson.formula_speed[0].se, 0.0);
    let pq = estimate_speed(&m, &constant_rates(0.7, 0.4), 50.0, 2000, 2).unwrap();
    assert!(pq.v_hat[0].within(0.3, 3.0), "{:?}", pq.v_hat);
    assert!(pq.agree);
}

#[test]
fn running_example_speed_near_first_order_prediction() {
    let m = refresh(1.0, 0.5, 32);
    let r = estimate_speed(&m, &running_rates(0.2), 100.0, 1000, 3).unwrap();
    let v = r.v_hat[0];
    assert!((v.mean - 0.2).abs() <= 0.04 + 3.0 * v.se, "{v:?}");
    assert!(r.agree, "{r:?}");
}

fn family(slope: f64) -> impl Fn(f64) -> rwde::Result<RateFamily> + Sync {
    move |eps| RateFamily::affine(1, SiteSpace::Binary, &[(e1(), 1.0, slope * eps, Point::ORIGIN), (-e1(), 1.0, -slope * eps, Point::ORIGIN)])
}

#[test]
fn einstein_relation_holds_and_fails() {
    let m = refresh(1.0, 0.5, 32);
    let holds = einstein_relation_check(&m, family(2.0), &[0.1], &[1.0], 100.0, 2000, 4).unwrap();
    assert!((holds.rhs_condition - 2.0).abs() < 1e-9);
    assert_eq!(holds.sigma0_sq, 2.0);
    assert_eq!(holds.v0, 0.0);
    assert!(holds.er_holds);
    assert!(holds.derivative.within(2.0, 3.0), "{:?}", holds.derivative);
    assert!((holds.rows[0].lipschitz_ratio - 4.0).abs() < 1e-9);
    let fails = einstein_relation_check(&m, family(1.0), &[0.1], &[1.0], 100.0, 2000, 5).unwrap();
    assert!((fails.rhs_condition - 1.0).abs() < 1e-9);
    assert!(!fails.er_holds);
    assert_eq!(fails.verdict, "ER fails");
    assert!(fails.derivative.within(1.0, 3.0), "{:?}", fails.derivative);
    assert!(!fails.derivative.within(2.0, 3.0));
}

#[test]
fn einstein_needs_environment_blind_base_rates() {
    let m = refresh(1.0, 0.5, 8);
    let shifted = |eps: f64| RateFamily::affine(1, SiteSpace::Binary, &[(e1(), 1.0, 0.1 + eps, Point::ORIGIN)]);
    assert!(einstein_relation_check(&m, shifted, &[0.1], &[1.0], 10.0, 10, 1).is_err());
}

#[test]
fn clt_for_environment_blind_walkers() {
    let m = refresh(1.0, 0.5, 16);
    let p = clt_report(&m, &constant_rates(1.0, 0.0), &[1.0], &CltOptions::new(100.0, 2000, 6)).unwrap();
    assert_eq!(p.sigma2_formula.mean, 1.0);
    assert_eq!(p.sigma2_formula.se, 0.0);
    assert!(p.sigma2_empirical.within(1.0, 3.0), "{:?}", p.sigma2_empirical);
    assert!(p.ks_p > 0.01);
    let pq = clt_report(&m, &constant_rates(0.7, 0.4), &[1.0], &CltOptions::new(100.0, 2000, 7)).unwrap();
    assert!((pq.sigma2_formula.mean - 1.1).abs() < 1e-12);
    assert!(pq.sigma2_empirical.within(1.1, 3.0), "{:?}", pq.sigma2_empirical);
}

#[test]
fn clt_formula_matches_empirical_variance() {
    let m = refresh(1.0, 0.5, 32);
    let start = Instant::now();
    let mut o = CltOptions::new(100.0, 1000, 8);
    o.formula_samples = 200;
    let r = clt_report(&m, &running_rates(0.2), &[1.0], &o).unwrap();
    eprintln!("{:?} {:?} {:?} late {} ks {} in {:?}", r.sigma2_empirical, r.sigma2_formula, r.formula_parts, r.late_fraction, r.ks_p, start.elapsed());
    assert!(r.agree);
    assert!(r.sigma2_formula.mean - 3.0 * r.sigma2_formula.se > 0.0);
    assert!(r.ks_p > 0.01);
}

#[test]
fn poisson_tails_under_bennett_bound() {
    let m = refresh(1.0, 0.5, 16);
    let rep = concentration_tail_check(&m, &constant_rates(1.0, 0.0), &[0.0, 5.0, 10.0, 20.0], 100.0, 4000, 9, Some((2.0, 16.0)), None).unwrap();
    assert!(rep.label.is_none());
    assert_eq!(rep.point_constants, (1.0, 1.0));
    for rec in &rep.records {
        assert_eq!(rec.holds, Some(true), "{rec:?}");
        let up = &rec.one_sided[0];
        assert_eq!(up.threshold, rec.r);
        assert!((up.bound - (-0.5 * rec.r * rec.r / (100.0 + rec.r / 3.0)).exp()).abs() < 1e-15);
    }
    assert!(rep.records[0].bound >= 1.0);
    assert!(rep.moments.iter().all(|m| m.holds));
}

#[test]
fn running_example_tails_under_assembled_bound() {
    let m = refresh(1.0, 0.5, 32);
    let rep = concentration_tail_check(&m, &running_rates(0.2), &[5.0, 10.0, 20.0], 100.0, 1000, 10, None, None).unwrap();
    assert!(rep.label.is_none());
    assert!((rep.constants.r_ep - 5.8).abs() < 1e-12);
    assert!(rep.records.iter().all(|r| r.holds == Some(true)));
}

#[test]
fn transience_and_recurrence_regimes() {
    let m = refresh(1.0, 0.5, 16);
    let p = transience_recurrence_diagnostic(&m, &constant_rates(1.0, 0.0), &[10.0, 40.0], 200, 11).unwrap();
    assert_eq!(p.regime, "transient");
    assert!(p.evidence.iter().all(|e| e.returns.mean == 0.0));
    let s = transience_recurrence_diagnostic(&m, &constant_rates(1.0, 1.0), &[25.0, 100.0, 400.0], 400, 12).unwrap();
    assert_eq!(s.regime, "recurrent");
    let ratios: Vec<f64> = s.evidence.iter().map(|e| e.returns_over_sqrt_t).collect();
    assert!(s.evidence.windows(2).all(|w| w[1].returns.mean > w[0].returns.mean));
    assert!(ratios.iter().all(|&r| (r / ratios[0] - 1.0).abs() < 0.3), "{ratios:?}");
    let r = transience_recurrence_diagnostic(&refresh(1.0, 0.5, 32), &running_rates(0.2), &[50.0, 200.0], 400, 13).unwrap();
    assert_eq!(r.regime, "transient");
}
