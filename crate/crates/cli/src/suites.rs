//! One runner per experiment kind. Each returns tables, assertions and the
//! full library report.

use crate::config::{Config, ConfigError, Kind};
use crate::output::{cell, Assertion, Outcome, Table};
use rand::Rng;
use rwde::coupling::estimate_decoupling;
use rwde::ctmc::FiniteChain;
use rwde::env_process::{continuity_bound_check, estimate_mu_ep, estimate_mu_ep_snapshots, semigroup_difference_integral, DifferenceOptions, ErgodicOptions};
use rwde::environments::{measure_coupling_decay, DecayOptions, EnvironmentModel};
use rwde::grid::gauss_legendre;
use rwde::lattice::{Configuration, Point};
use rwde::limits::{clt_report, concentration_tail_check, einstein_relation_check, estimate_speed, process_constants, transience_recurrence_diagnostic, CltOptions};
use rwde::martingale::{centered_moment, expected_exponential, expected_qv, martingale_defect, vector_obs, verify_tail_bound, Constants, LadderOptions, SeriesOptions, StartLaw};
use rwde::rng::stream;
use rwde::stats::Estimate;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Library(#[from] rwde::Error),
}

type Run = Result<Outcome, RunError>;

fn json(v: &impl Serialize) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

fn est_cells(e: &Estimate) -> [String; 2] {
    [cell(e.mean), cell(e.se)]
}

pub fn run(cfg: &Config) -> Run {
    match cfg.kind {
        Kind::CouplingDecay => coupling_decay(cfg),
        Kind::Decoupling => decoupling(cfg),
        Kind::MuEp => mu_ep(cfg),
        Kind::SemigroupIntegral => semigroup_integral(cfg),
        Kind::Continuity => continuity(cfg),
        Kind::Lln => lln(cfg),
        Kind::Einstein => einstein(cfg),
        Kind::Clt => clt(cfg),
        Kind::Concentration => concentration(cfg),
        Kind::Transience => transience(cfg),
        Kind::AppendixSuite => appendix(cfg),
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

fn coupling_decay(cfg: &Config) -> Run {
    let model = cfg.model()?;
    let grid = cfg.time_grid()?;
    let curve = measure_coupling_decay(&model, &grid, &DecayOptions { replicas: cfg.replicas, seed: cfg.seed, phi: cfg.phi()? })?;
    let tol = &cfg.tolerances;
    let exact = model.closed_form_decay_rate();
    let mut table = Table::new("decay", &["t", "mean", "se", "exact"]);
    let mut out = Outcome::default();
    for ((&t, &m), &se) in curve.t.iter().zip(&curve.mean).zip(&curve.se) {
        let e = exact.map_or(f64::NAN, |c| (-c * t).exp());
        table.push_f64(&[t, m, se, e]);
        if exact.is_some() {
            let est = Estimate { mean: m, se, n: cfg.replicas, seed: Some(cfg.seed) };
            out.assertions.push(Assertion::within(format!("decay(t={t})"), est, e, tol.se_multiple, tol.exact));
        }
    }
    let d = model.geometry().dim();
    match exact {
        // ∫ t^d e^{−ct} dt = d! / c^{d+1}; the window adds the grid's own
        // trapezoid error on the exact curve
        Some(c) => {
            let f = |t: f64| t.powi(d as i32) * (-c * t).exp();
            let y: Vec<f64> = grid.points().iter().map(|&t| f(t)).collect();
            let quadrature = (grid.trapezoid(&y) - gauss_legendre(f, 0.0, grid.last(), 64)).abs();
            out.assertions.push(Assertion::within("integral t^d decay", curve.integral_td.estimate, factorial(d) / c.powi(d as i32 + 1), tol.se_multiple, tol.exact + quadrature));
        }
        None => out.assertions.push(Assertion::equals("integrability certified", curve.certified, true).reference(true)),
    }
    out.tables.push(table);
    out.report = json(&curve);
    Ok(out)
}

fn decoupling(cfg: &Config) -> Run {
    let model = cfg.model()?;
    let alpha = cfg.walker()?;
    let rep = estimate_decoupling(&model, &alpha, cfg.horizon()?, cfg.replicas, cfg.seed, None)?;
    let mut table = Table::new("pairs", &["eta0", "xi0", "p_stay_coupled", "se"]);
    for ((a, b), e) in &rep.per_pair {
        table.push_f64(&[*a, *b, e.mean, e.se]);
    }
    let mut out = Outcome { tables: vec![table], ..Default::default() };
    if let Some(lb) = rep.lower_bound {
        let p = rep.p_stay_coupled;
        out.assertions.push(Assertion::at_least("P(tau > T) >= bound", p.mean, lb, cfg.tolerances.se_multiple * p.se).reference(!rep.decay_integral.certified));
    }
    out.report = json(&rep);
    Ok(out)
}

fn ergodic(cfg: &Config) -> Result<ErgodicOptions, ConfigError> {
    let h = cfg.horizon()?;
    Ok(ErgodicOptions::new(cfg.options.burn_in.unwrap_or(0.1 * h), h, cfg.replicas, cfg.seed))
}

fn mu_ep(cfg: &Config) -> Run {
    let model = cfg.model()?;
    let alpha = cfg.walker()?;
    let f = cfg.observable()?;
    let opts = ergodic(cfg)?;
    let avg = estimate_mu_ep(&model, &alpha, &f, &opts)?;
    let tol = &cfg.tolerances;
    let mut table = Table::new("replicas", &["replica", "time_average"]);
    for (i, m) in avg.replica_means.iter().enumerate() {
        table.push([i.to_string(), cell(*m)]);
    }
    let mut out = Outcome { tables: vec![table], ..Default::default() };
    if let Some(e) = cfg.options.expected {
        out.assertions.push(Assertion::within("mu_EP(f)", avg.value, e, tol.se_multiple, tol.window));
    }
    let snapshots = match cfg.options.snapshot_spacing {
        Some(dt) => {
            let s = estimate_mu_ep_snapshots(&model, &alpha, &f, &opts, dt)?;
            let diff = avg.value.minus(&s.value);
            out.assertions.push(Assertion::within("time average vs snapshots", diff, 0.0, tol.se_multiple, tol.window));
            Some(s)
        }
        None => None,
    };
    out.report = serde_json::json!({ "time_average": json(&avg), "snapshots": json(&snapshots) });
    Ok(out)
}

/// Single-site discrepancy at the origin between the extreme values.
fn extreme_pair(model: &EnvironmentModel) -> (Configuration, Configuration) {
    let (lo, hi) = model.space().endpoints();
    let a = Configuration::constant(model.geometry(), lo);
    let mut b = a.clone();
    b.set(Point::ORIGIN, hi);
    (b, a)
}

fn semigroup_integral(cfg: &Config) -> Run {
    let model = cfg.model()?;
    let alpha = cfg.walker()?;
    let f = cfg.observable()?;
    let opts = DifferenceOptions { grid: cfg.time_grid()?, replicas: cfg.replicas, seed: cfg.seed, phi: cfg.phi()?, independent: true };
    let constants = process_constants(&model, &alpha, None)?;
    let certificate = if constants.c_a.certified { Some(constants.c_a.value * f.triple_norm(&model.space())?) } else { None };
    let rep = semigroup_difference_integral(&model, &alpha, &f, extreme_pair(&model), &opts, certificate)?;
    let tol = &cfg.tolerances;
    let mut table = Table::new("difference", &["t", "mean_diff", "se", "weight", "partial_integral"]);
    for r in &rep.rows {
        table.push_f64(&[r.t, r.mean_diff, r.se, r.weight, r.partial_integral]);
    }
    let mut out = Outcome { tables: vec![table], ..Default::default() };
    let i = rep.integral;
    match certificate {
        Some(c) if opts.phi.is_none() => out.assertions.push(Assertion::at_most("integral <= C_a |||f|||", i.mean, c, tol.se_multiple * i.se)),
        _ => {}
    }
    if let Some(e) = cfg.options.expected {
        out.assertions.push(Assertion::within("integral", i, e, tol.se_multiple, tol.window));
    }
    if let Some(ind) = rep.independent {
        out.assertions.push(Assertion::within("coupled vs independent", i.minus(&ind), 0.0, tol.se_multiple, tol.window).reference(true));
    }
    out.assertions.push(Assertion::equals("integral converges", rep.flag.is_none(), true).reference(true));
    out.report = serde_json::json!({ "integral": json(&rep), "constants": json(&constants) });
    Ok(out)
}

fn continuity(cfg: &Config) -> Run {
    let model = cfg.model()?;
    let alpha = cfg.walker()?;
    let prime = cfg.rates(cfg.walker_prime.as_ref().ok_or(ConfigError::Missing { key: "walker_prime", kind: "continuity" })?, 1.0)?;
    let f = cfg.observable()?;
    let rec = continuity_bound_check(&model, &alpha, &prime, &f, &ergodic(cfg)?, None, None)?;
    let mut table = Table::new("continuity", &["mu_alpha", "se_alpha", "mu_alpha_prime", "se_alpha_prime", "lhs", "se", "rhs", "distance_0"]);
    let [a, sa] = est_cells(&rec.mu_alpha);
    let [b, sb] = est_cells(&rec.mu_alpha_prime);
    let [l, sl] = est_cells(&rec.lhs);
    table.push([a, sa, b, sb, l, sl, cell(rec.rhs.unwrap_or(f64::NAN)), cell(rec.distance_0)]);
    let mut out = Outcome { tables: vec![table], ..Default::default() };
    let rhs = rec.rhs.unwrap_or(f64::INFINITY);
    out.assertions.push(Assertion::at_most("|mu_alpha(f) - mu_alpha'(f)| <= bound", rec.lhs.mean, rhs, cfg.tolerances.se_multiple * rec.lhs.se).reference(rec.label.is_some()));
    out.report = json(&rec);
    Ok(out)
}

fn lln(cfg: &Config) -> Run {
    let model = cfg.model()?;
    let alpha = cfg.walker()?;
    let rep = estimate_speed(&model, &alpha, cfg.horizon()?, cfg.replicas, cfg.seed)?;
    let tol = &cfg.tolerances;
    let mut table = Table::new("speed", &["coordinate", "v_hat", "se", "formula", "formula_se"]);
    let mut out = Outcome::default();
    let expected = cfg.options.expected_speed.clone();
    if expected.as_ref().is_some_and(|e| e.len() != rep.v_hat.len()) {
        return Err(ConfigError::Invalid { key: "options.expected_speed", msg: format!("expected {} components", rep.v_hat.len()) }.into());
    }
    for (i, (v, f)) in rep.v_hat.iter().zip(&rep.formula_speed).enumerate() {
        table.push([i.to_string(), cell(v.mean), cell(v.se), cell(f.mean), cell(f.se)]);
        match &expected {
            Some(e) => out.assertions.push(Assertion::within(format!("v_hat[{i}]"), *v, e[i], tol.se_multiple, tol.window)),
            // rates blind to the environment: the drift is exact
            None if alpha.is_env_independent() => out.assertions.push(Assertion::within(format!("v_hat[{i}]"), *v, f.mean, tol.se_multiple, tol.window)),
            None => {}
        }
    }
    out.assertions.push(Assertion::equals("v_hat agrees with mu_EP(drift)", rep.agree, true).reference(!alpha.is_env_independent()));
    out.tables.push(table);
    out.report = json(&rep);
    Ok(out)
}

fn einstein(cfg: &Config) -> Run {
    let model = cfg.model()?;
    let w = cfg.walker.clone().ok_or(ConfigError::Missing { key: "walker", kind: "einstein" })?;
    let eps = cfg.grids.eps.clone().ok_or(ConfigError::Missing { key: "grids.eps", kind: "einstein" })?;
    let family = |e: f64| cfg.rates(&w, e).map_err(|err| rwde::Error::Config(err.to_string()));
    let rec = einstein_relation_check(&model, family, &eps, &cfg.direction()?, cfg.horizon()?, cfg.replicas, cfg.seed)?;
    let tol = &cfg.tolerances;
    let mut table = Table::new("derivative", &["eps", "derivative", "se", "lipschitz_ratio"]);
    for r in &rec.rows {
        table.push_f64(&[r.eps, r.derivative.mean, r.derivative.se, r.lipschitz_ratio]);
    }
    let mut out = Outcome { tables: vec![table], ..Default::default() };
    if let Some(e) = cfg.options.expected {
        out.assertions.push(Assertion::within("derivative", rec.derivative, e, tol.se_multiple, tol.window));
    }
    match cfg.options.expected_er {
        Some(want) => out.assertions.push(Assertion::equals("einstein relation holds", rec.er_holds, want)),
        None => out.assertions.push(Assertion::within("derivative vs sigma0^2", rec.derivative, rec.sigma0_sq, tol.se_multiple, tol.window).reference(true)),
    }
    out.report = json(&rec);
    Ok(out)
}

fn clt(cfg: &Config) -> Run {
    let model = cfg.model()?;
    let alpha = cfg.walker()?;
    let o = &cfg.options;
    let mut opts = CltOptions::new(cfg.horizon()?, cfg.replicas, cfg.seed);
    if let Some(h) = cfg.grids.horizons.as_ref().filter(|h| h.len() > 1) {
        let mut h = h.clone();
        h.sort_by(f64::total_cmp);
        opts.horizons = h;
    }
    opts.formula_samples = o.formula_samples.unwrap_or(opts.formula_samples);
    opts.inner_replicas = o.inner_replicas.unwrap_or(opts.inner_replicas);
    opts.truncation = o.truncation.unwrap_or(opts.truncation);
    opts.site_radius = o.site_radius.unwrap_or(opts.site_radius);
    opts.burn_in = o.burn_in.unwrap_or(opts.burn_in);
    let rep = clt_report(&model, &alpha, &cfg.direction()?, &opts)?;
    let tol = &cfg.tolerances;
    let mut table = Table::new("dyadic", &["t", "variance_rate", "se", "ks_p"]);
    for r in &rep.dyadic {
        table.push_f64(&[r.t, r.variance_rate.mean, r.variance_rate.se, r.ks_p]);
    }
    let mut out = Outcome { tables: vec![table], ..Default::default() };
    if let Some(e) = o.expected {
        out.assertions.push(Assertion::within("sigma2_empirical", rep.sigma2_empirical, e, tol.se_multiple, tol.window));
        out.assertions.push(Assertion::within("sigma2_formula", rep.sigma2_formula, e, tol.se_multiple, tol.exact));
    }
    out.assertions.push(Assertion::within("sigma2_empirical vs sigma2_formula", rep.sigma2_empirical.minus(&rep.sigma2_formula), 0.0, tol.se_multiple, tol.window));
    out.assertions.push(Assertion::at_least("KS p-value", rep.ks_p, tol.significance, 0.0));
    out.report = json(&rep);
    Ok(out)
}

fn concentration(cfg: &Config) -> Run {
    let model = cfg.model()?;
    let alpha = cfg.walker()?;
    let r_grid = cfg.grids.r.clone().ok_or(ConfigError::Missing { key: "grids.r", kind: "concentration" })?;
    let moment = cfg.options.p.map(|p| (p, cfg.options.c_p.unwrap_or(4f64.powf(p))));
    let rep = concentration_tail_check(&model, &alpha, &r_grid, cfg.horizon()?, cfg.replicas, cfg.seed, moment, None)?;
    let k = cfg.tolerances.se_multiple;
    let mut tails = Table::new("tails", &["r", "threshold", "empirical_tail", "se", "bound"]);
    let mut sides = Table::new("one_sided", &["r", "direction", "threshold", "empirical_tail", "se", "bound"]);
    let mut moments = Table::new("moments", &["r", "empirical_tail", "se", "bound"]);
    let mut out = Outcome::default();
    for rec in &rep.records {
        tails.push_f64(&[rec.r, rec.threshold, rec.empirical_tail.mean, rec.empirical_tail.se, rec.bound]);
        for s in &rec.one_sided {
            let dir = s.direction.iter().map(|v| cell(*v)).collect::<Vec<_>>().join(" ");
            sides.push([cell(rec.r), dir, cell(s.threshold), cell(s.empirical_tail.mean), cell(s.empirical_tail.se), cell(s.bound)]);
        }
        let reference = rep.label.is_some() || rec.holds.is_none();
        out.assertions.push(Assertion::at_most(format!("tail(r={})", rec.r), rec.empirical_tail.mean, rec.bound, k * rec.empirical_tail.se).reference(reference));
    }
    for m in &rep.moments {
        moments.push_f64(&[m.r, m.empirical_tail.mean, m.empirical_tail.se, m.bound]);
        out.assertions.push(Assertion::at_most(format!("moment tail(r={})", m.r), m.empirical_tail.mean, m.bound, k * m.empirical_tail.se).reference(true));
    }
    out.tables = vec![tails, sides];
    if !rep.moments.is_empty() {
        out.tables.push(moments);
    }
    out.report = json(&rep);
    Ok(out)
}

fn transience(cfg: &Config) -> Run {
    let model = cfg.model()?;
    let alpha = cfg.walker()?;
    let horizons = cfg.grids.horizons.clone().ok_or(ConfigError::Missing { key: "grids.T", kind: "transience" })?;
    let rep = transience_recurrence_diagnostic(&model, &alpha, &horizons, cfg.replicas, cfg.seed)?;
    let mut table = Table::new("evidence", &["t", "returns", "se", "returns_over_sqrt_t", "last_return", "late_return_fraction"]);
    for e in &rep.evidence {
        table.push_f64(&[e.t, e.returns.mean, e.returns.se, e.returns_over_sqrt_t, e.last_return.mean, e.late_return_fraction]);
    }
    let mut out = Outcome { tables: vec![table], ..Default::default() };
    let a = match &cfg.options.expected_regime {
        Some(want) => Assertion::equals(format!("regime is {want}"), rep.regime == *want, true),
        None => Assertion::equals(format!("regime determined ({})", rep.regime), rep.regime != "undetermined", true).reference(true),
    };
    out.assertions.push(a);
    out.report = json(&rep);
    Ok(out)
}

/// Exact checks on finite chains: quadratic variation, martingale
/// increments, the exponential martingale, generator moment inequalities
/// on random chains and the birth-chain tail.
fn appendix(cfg: &Config) -> Run {
    let tol = cfg.tolerances.exact;
    let (chain, f, fixture) = match &cfg.chain {
        Some(c) => (FiniteChain::from_rates(c.rates.clone())?, c.f.clone(), false),
        None => (FiniteChain::two_state(1.0, 1.0), vec![0.0, 1.0], true),
    };
    if f.len() != chain.n() {
        return Err(ConfigError::Invalid { key: "chain.f", msg: format!("expected {} values", chain.n()) }.into());
    }
    let mut out = Outcome::default();
    let horizons = cfg.grids.horizons.clone().unwrap_or_else(|| vec![0.25, 0.5, 1.0]);
    let mut qv = Table::new("qv", &["T", "expected_qv", "variance", "closed_form"]);
    for &t in &horizons {
        let q = expected_qv(&chain, &f, 0, t, 16)?;
        let law = chain.distribution(&chain.point_mass(0), t)?;
        let mean: f64 = law.iter().zip(&f).map(|(p, v)| p * v).sum();
        let var: f64 = law.iter().zip(&f).map(|(p, v)| p * (v - mean).powi(2)).sum();
        let closed = if fixture { (1.0 - (-4.0 * t).exp()) / 4.0 } else { f64::NAN };
        qv.push_f64(&[t, q, var, closed]);
        out.assertions.push(Assertion::within(format!("E<M>_T = Var f(Y_T) (T={t})"), Estimate::exact(q), var, 0.0, tol));
        if fixture {
            out.assertions.push(Assertion::within(format!("Var f(Y_T) closed form (T={t})"), Estimate::exact(var), closed, 0.0, tol));
        }
    }
    let big_t = horizons.iter().cloned().fold(0.0, f64::max);
    let s = 0.5 / chain.lambda();
    let defect = (0..chain.n())
        .map(|y| martingale_defect(&chain, &f, big_t, 0.5 * big_t, s, y, 12).map(|(lo, hi)| lo.abs().max(hi.abs())))
        .collect::<rwde::Result<Vec<_>>>()?;
    out.assertions.push(Assertion::at_most("martingale increments vanish", defect.iter().cloned().fold(0.0, f64::max), 0.0, 1e-9));
    let (en, err) = expected_exponential(&chain, &f, 0, 1.0, 1.0, 12, 2000, &SeriesOptions::default())?;
    out.assertions.push(Assertion::at_most("E N(1) <= 1", en, 1.0, 1e-9));

    let mut lemmas = Table::new("lemmas", &["chain", "cauchy_schwarz_violations", "oscillation_violations"]);
    let (mut cs_bad, mut osc_bad) = (0usize, 0usize);
    let opts = LadderOptions::default();
    for i in 0..100u64 {
        let mut rng = stream(cfg.seed, "appendix-chain", i);
        let c = FiniteChain::random(5, 1.5, &mut rng);
        let g: Vec<f64> = (0..5).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let h: Vec<f64> = (0..5).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let jm = |a: &[f64], b: &[f64], x: usize| -> f64 { (0..5).filter(|&y| y != x).map(|y| c.rate(x, y) * (a[y] - a[x]) * (b[y] - b[x])).sum() };
        let osc = g.iter().cloned().fold(f64::MIN, f64::max) - g.iter().cloned().fold(f64::MAX, f64::min);
        let go = vector_obs(&g);
        let (mut cs, mut os) = (0usize, 0usize);
        for x in 0..5 {
            let (gh, gg, hh) = (jm(&g, &h, x), jm(&g, &g, x), jm(&h, &h, x));
            if gh * gh > gg * hh * (1.0 + 1e-12) + 1e-15 {
                cs += 1;
            }
            let two = centered_moment(&c, &go, &x, 2, &opts)?;
            for k in 3..=6 {
                if centered_moment(&c, &go, &x, k, &opts)? > osc.powi(k - 2) * two + 1e-12 {
                    os += 1;
                }
            }
        }
        lemmas.push([i.to_string(), cs.to_string(), os.to_string()]);
        cs_bad += cs;
        osc_bad += os;
    }
    out.assertions.push(Assertion::at_most("Cauchy-Schwarz for the jump form", cs_bad as f64, 0.0, 0.0));
    out.assertions.push(Assertion::at_most("higher moments dominated by oscillation", osc_bad as f64, 0.0, 0.0));

    let birth = FiniteChain::birth(80);
    let id: Vec<f64> = (0..=80).map(|i| i as f64).collect();
    let r_grid = cfg.grids.r.clone().unwrap_or_else(|| (1..=6).map(f64::from).collect());
    let mut tails = Table::new("birth_tail", &["T", "r", "exact", "poisson", "bound"]);
    for t in [1.0, 5.0] {
        for &r in &r_grid {
            let rep = verify_tail_bound(&birth, &id, &StartLaw::Dirac(0), t, r, Some(Constants { c1: 1.0, c2: 1.0 }))?;
            let exact = rep.exact.unwrap_or(f64::NAN);
            let p = poisson_tail(t, t + r);
            tails.push_f64(&[t, r, exact, p, rep.bound]);
            out.assertions.push(Assertion::within(format!("birth law is Poisson (T={t}, r={r})"), Estimate::exact(exact), p, 0.0, tol));
            out.assertions.push(Assertion::at_most(format!("birth tail bound (T={t}, r={r})"), exact, rep.bound, 1e-12));
        }
    }
    out.tables = vec![qv, lemmas, tails];
    out.report = serde_json::json!({ "martingale_defect": defect, "expected_exponential": [en, err] });
    Ok(out)
}

/// `P(N > a)` for `N ~ Poisson(m)`, by summing the lower tail.
fn poisson_tail(m: f64, a: f64) -> f64 {
    let (mut term, mut acc) = ((-m).exp(), 0.0);
    let mut k = 0u32;
    while (k as f64) <= a {
        acc += term;
        k += 1;
        term *= m / k as f64;
    }
    (1.0 - acc).max(0.0)
}
