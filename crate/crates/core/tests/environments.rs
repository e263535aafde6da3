use rand::Rng;
use rwde::environments::*;
use rwde::grid::TimeGrid;
use rwde::lattice::{Configuration, TorusGeometry};
use rwde::rng::replicate;
use rwde::stats::chi_square_two_sample;

const N: usize = 10_000;

fn models() -> Vec<EnvironmentModel> {
    let g = TorusGeometry::new(1, 8).unwrap();
    [
        EnvironmentKind::IndependentRefresh { rate: 1.0, law: RefreshLaw::Bernoulli(0.3) },
        EnvironmentKind::IndependentRefresh { rate: 1.0, law: RefreshLaw::Uniform },
        EnvironmentKind::WeakGlauber { rate: 1.0, beta: 0.2 },
        EnvironmentKind::DeterministicRelaxation { kappa: 1.0, fixed_point: 0.3 },
    ]
    .into_iter()
    .map(|k| EnvironmentModel::new(k, g).unwrap())
    .collect()
}

/// Fixed initial pair differing at the origin.
fn pair(m: &EnvironmentModel) -> (Configuration, Configuration) {
    let (lo, hi) = m.space().endpoints();
    let a = Configuration::from_fn(m.geometry(), |s| if s % 3 == 0 { hi } else { lo });
    let mut b = a.clone();
    b.values_mut()[0] = lo;
    (a, b)
}

fn bin(v: f64) -> i64 {
    (v * 10.0).floor().min(9.0) as i64
}

/// Four models, two times, two copies: the 0.01 level is held family-wise.
const TESTS: f64 = 16.0;

#[test]
fn coupled_marginals_match_single_copies() {
    for m in models() {
        let init = pair(&m);
        for t in [0.5, 2.0] {
            let coupled: Vec<(i64, i64)> = replicate(1, "env-marg-c", N, |_, rng| {
                let mut c = CoupledEnvTrajectory::with_rng(&m, init.clone(), t, rng.clone()).unwrap();
                c.advance_to(t).unwrap();
                let (a, b) = c.states();
                (bin(a.value(0)), bin(b.value(0)))
            });
            for (k, cfg) in [&init.0, &init.1].into_iter().enumerate() {
                let single: Vec<i64> = replicate(1, &format!("env-marg-s{k}"), N, |_, rng| {
                    let mut s = simulate_env(&m, cfg.clone(), t, rng.random()).unwrap();
                    bin(s.advance_to(t).unwrap().value(0))
                });
                let c: Vec<i64> = coupled.iter().map(|p| if k == 0 { p.0 } else { p.1 }).collect();
                let p = chi_square_two_sample(&c, &single);
                assert!(p > 0.01 / TESTS, "{:?} t={t} copy {k}: p = {p}", m.kind());
            }
        }
    }
}

#[test]
fn decay_curves_in_closed_form() {
    let g = TorusGeometry::new(1, 16).unwrap();
    let refresh = EnvironmentModel::new(EnvironmentKind::IndependentRefresh { rate: 1.0, law: RefreshLaw::Bernoulli(0.5) }, g).unwrap();
    let grid = TimeGrid::uniform(8.0, 64).unwrap();
    let c = measure_coupling_decay(&refresh, &grid, &DecayOptions { replicas: N, seed: 2, phi: None }).unwrap();
    let misses = c.t.iter().zip(c.mean.iter().zip(&c.se)).filter(|(t, (m, s))| (*m - (-**t).exp()).abs() > 3.0 * s.max(1e-12)).count();
    assert!(misses <= 1, "{misses} grid points outside 3 SE");
    assert!(c.integral_td.estimate.within(1.0, 3.0), "{:?}", c.integral_td);
    let flow = EnvironmentModel::new(EnvironmentKind::DeterministicRelaxation { kappa: 2.0, fixed_point: 0.0 }, g).unwrap();
    let f = measure_coupling_decay(&flow, &grid, &DecayOptions { replicas: 4, seed: 3, phi: None }).unwrap();
    assert!(f.t.iter().zip(&f.mean).all(|(t, m)| (m - (-2.0 * t).exp()).abs() < 1e-10));
}
