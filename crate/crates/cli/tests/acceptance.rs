//! End-to-end acceptance run: one PASS/FAIL line per criterion, written
//! straight to stderr so it shows without `--nocapture`.

use rand::Rng;
use rwde::coupling::{CoupledRates, CoupledWalk, RestartMode, SingleWalk};
use rwde::environments::{EnvironmentKind, EnvironmentModel, RefreshLaw};
use rwde::lattice::{Configuration, Point, RateFamily, SiteSpace, TorusGeometry};
use rwde::rng::{replicate, stream};
use rwde::stats::chi_square_two_sample;
use serde_json::Value;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

const SEED: &str = "20261019";

struct Run {
    code: i32,
    summary: Value,
    dir: PathBuf,
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn rwde(config: &str, out: &Path, extra: &[&str]) -> Run {
    let dir = out.join(config);
    let status = Command::new(env!("CARGO_BIN_EXE_rwde"))
        .arg("--config")
        .arg(configs().join(format!("{config}.toml")))
        .args(["--seed", SEED, "--out"])
        .arg(&dir)
        .args(extra)
        .output()
        .expect("binary runs");
    let summary = std::fs::read_dir(&dir)
        .ok()
        .and_then(|mut d| d.find_map(|e| e.ok().map(|e| e.path()).filter(|p| p.to_string_lossy().ends_with("_summary.json"))))
        .and_then(|p| std::fs::read_to_string(p).ok())
        .and_then(|s| serde_json::from_str(&s).ok())
        .unwrap_or(Value::Null);
    if status.status.code() != Some(0) {
        let _ = writeln!(std::io::stderr(), "{config}: {}{}", String::from_utf8_lossy(&status.stdout), String::from_utf8_lossy(&status.stderr));
    }
    Run { code: status.status.code().unwrap_or(-1), summary, dir }
}

/// Non-reference assertions whose name passes `filter` all hold.
fn assertions_pass(r: &Run, filter: impl Fn(&str) -> bool) -> bool {
    let Some(list) = r.summary["assertions"].as_array() else { return false };
    let chosen: Vec<&Value> = list.iter().filter(|a| filter(a["name"].as_str().unwrap_or(""))).collect();
    !chosen.is_empty() && chosen.iter().all(|a| a["pass"].as_bool() == Some(true) || a["reference_only"].as_bool() == Some(true))
}

fn all_pass(r: &Run) -> bool {
    r.code == 0 && assertions_pass(r, |_| true)
}

fn assertion(r: &Run, name: &str) -> Option<Value> {
    r.summary["assertions"].as_array()?.iter().find(|a| a["name"] == name).cloned()
}

struct Ledger {
    lines: Vec<(usize, bool)>,
}

impl Ledger {
    fn record(&mut self, n: usize, what: &str, ok: bool, elapsed: Duration, limit: Duration) {
        let pass = ok && elapsed < limit;
        let _ = writeln!(
            std::io::stderr(),
            "criterion {n:2}: {} {what} ({:.1}s, limit {}s)",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
        self.lines.push((n, pass));
    }
}

fn running_model(l: usize) -> EnvironmentModel {
    EnvironmentModel::new(EnvironmentKind::IndependentRefresh { rate: 1.0, law: RefreshLaw::Bernoulli(0.5) }, TorusGeometry::new(1, l).unwrap()).unwrap()
}

fn running_rates() -> RateFamily {
    let e = Point([1, 0, 0]);
    RateFamily::affine(1, SiteSpace::Binary, &[(e, 1.0, 0.2, Point::ORIGIN), (Point([-1, 0, 0]), 1.0, -0.2, Point::ORIGIN)]).unwrap()
}

/// Two-sample tests of `X_T` and `η_T(X_T)` between a coupled copy and a
/// single walker, and the sandwich invariant on logged coupled paths.
fn marginals_and_sandwich() -> (f64, f64, usize) {
    let m = running_model(16);
    let alpha = running_rates();
    let (t, n) = (4.0, 10_000);
    let a = Configuration::constant(m.geometry(), 0.0);
    let mut b = a.clone();
    b.set(Point::ORIGIN, 1.0);
    let coupled: Vec<(i64, i64)> = replicate(20261019, "acceptance-coupled", n, |_, rng| {
        let mut w = CoupledWalk::new(&m, CoupledRates::same(&alpha), ((b.clone(), Point::ORIGIN), (a.clone(), Point::ORIGIN)), t, rng.clone(), RestartMode::None).unwrap();
        w.advance_to(t).unwrap();
        let x = w.state().x[0];
        (x.0[0], w.state().env[0].value_at(x) as i64)
    });
    let single: Vec<(i64, i64)> = replicate(20261019, "acceptance-single", n, |_, rng| {
        let mut w = SingleWalk::new(&m, &alpha, b.clone(), Point::ORIGIN, t, rng.clone()).unwrap();
        w.advance_to(t).unwrap();
        let x = w.position();
        (x.0[0], w.env().value_at(x) as i64)
    });
    let col = |v: &[(i64, i64)], i: usize| v.iter().map(|c| if i == 0 { c.0 } else { c.1 }).collect::<Vec<_>>();
    let p_x = chi_square_two_sample(&col(&coupled, 0), &col(&single, 0));
    let p_e = chi_square_two_sample(&col(&coupled, 1), &col(&single, 1));
    let mut violations = 0;
    for seed in 0..1000u64 {
        let mut rng = stream(seed, "acceptance-sandwich", 0);
        let a = m.sample_initial(&mut rng);
        let mut b = a.clone();
        b.values_mut()[0] = 1.0 - b.values()[0];
        let x0 = Point([rng.random_range(-3..3), 0, 0]);
        let mut w = CoupledWalk::new(&m, CoupledRates::same(&alpha), ((a, x0), (b, x0)), 10.0, stream(seed, "acceptance-sandwich", 1), RestartMode::RecoupleOnDecouple)
            .unwrap()
            .with_log();
        w.advance_to(10.0).unwrap();
        violations += w
            .log()
            .unwrap()
            .iter()
            .flat_map(|e| e.x.iter().map(move |x| (*x - x0, e)))
            .filter(|(dx, e)| !(e.y_minus.le(dx) && dx.le(&e.y_plus)))
            .count();
    }
    (p_x, p_e, violations)
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .map(|d| {
            d.filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
                .collect()
        })
        .unwrap_or_default();
    v.sort();
    v
}

/// Same cell count and every numeric cell within `rel` relative difference.
fn csv_close(a: &[u8], b: &[u8], rel: f64) -> bool {
    let (a, b) = (String::from_utf8_lossy(a), String::from_utf8_lossy(b));
    let cells = |s: &str| s.split(['\n', ',']).map(str::to_string).collect::<Vec<_>>();
    let (ca, cb) = (cells(&a), cells(&b));
    ca.len() == cb.len()
        && ca.iter().zip(&cb).all(|(x, y)| match (x.parse::<f64>(), y.parse::<f64>()) {
            (Ok(x), Ok(y)) => (x - y).abs() <= rel * x.abs().max(y.abs()).max(1e-300) || x == y,
            _ => x == y,
        })
}

#[test]
fn acceptance_criteria() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    let mut ledger = Ledger { lines: Vec::new() };
    let secs = Duration::from_secs;

    let t = Instant::now();
    let app = rwde("appendix", out, &[]);
    let el = t.elapsed();
    ledger.record(1, "exact appendix suite on the two-state chain", app.code != 3 && assertions_pass(&app, |n| !n.starts_with("birth")), el, secs(10));
    ledger.record(2, "Bernstein bound dominates the Poisson tail", app.code != 3 && assertions_pass(&app, |n| n.starts_with("birth")), el, secs(5));

    let t = Instant::now();
    let refresh = rwde("decay_refresh", out, &[]);
    let relax = rwde("decay_relaxation", out, &[]);
    ledger.record(3, "coupling decay closed forms", all_pass(&refresh) && all_pass(&relax), t.elapsed(), secs(120));

    let t = Instant::now();
    let dec = rwde("decoupling_running", out, &[]);
    ledger.record(4, "decoupling lower bound, P(tau > 20)", all_pass(&dec) && assertion(&dec, "P(tau > T) >= bound").is_some_and(|a| a["reference_only"] == false), t.elapsed(), secs(120));

    let t = Instant::now();
    let ok = ["lln_poisson", "lln_pq", "lln_running"].iter().all(|c| all_pass(&rwde(c, out, &[])));
    ledger.record(5, "law of large numbers", ok, t.elapsed(), secs(180));

    let t = Instant::now();
    let holds = rwde("einstein_slope2", out, &[]);
    let fails = rwde("einstein_slope1", out, &[]);
    let verdict = fails.summary["report"]["verdict"] == "ER fails" && holds.summary["report"]["verdict"] == "ER holds";
    ledger.record(6, "Einstein relation holds and fails", all_pass(&holds) && all_pass(&fails) && verdict, t.elapsed(), secs(300));

    let t = Instant::now();
    let pois = rwde("clt_poisson", out, &[]);
    let run = rwde("clt_running", out, &[]);
    let exact = pois.summary["report"]["sigma2_formula"]["mean"].as_f64() == Some(1.0);
    ledger.record(7, "central limit theorem", all_pass(&pois) && all_pass(&run) && exact, t.elapsed(), secs(900));

    let t = Instant::now();
    let certified = |r: &Run| r.summary["report"]["label"].is_null();
    let cp = rwde("concentration_poisson", out, &[]);
    let cr = rwde("concentration_running", out, &[]);
    ledger.record(8, "walker tails under assembled bounds", all_pass(&cp) && all_pass(&cr) && certified(&cp) && certified(&cr), t.elapsed(), secs(300));

    let t = Instant::now();
    let (p_x, p_e, violations) = marginals_and_sandwich();
    let _ = writeln!(std::io::stderr(), "              marginal p-values X_T {p_x:.3}, eta_T(X_T) {p_e:.3}; sandwich violations {violations}");
    ledger.record(9, "coupled marginals and sandwich invariant", p_x > 0.01 && p_e > 0.01 && violations == 0, t.elapsed(), secs(300));

    let t = Instant::now();
    let mut identical = true;
    let mut close = true;
    for c in ["decay_refresh", "lln_running", "concentration_running"] {
        let a = rwde(c, &out.join("first"), &["--threads", "1"]);
        let b = rwde(c, &out.join("second"), &["--threads", "1"]);
        let m = rwde(c, &out.join("multi"), &["--threads", "4"]);
        let (fa, fb, fm) = (csv_files(&a.dir), csv_files(&b.dir), csv_files(&m.dir));
        identical &= !fa.is_empty() && fa == fb;
        close &= fa.len() == fm.len() && fa.iter().zip(&fm).all(|(x, y)| x.0 == y.0 && csv_close(&x.1, &y.1, 1e-10));
    }
    ledger.record(10, "byte-identical reruns; multi-thread within 1e-10", identical && close, t.elapsed(), secs(300));

    let failed: Vec<usize> = ledger.lines.iter().filter(|l| !l.1).map(|l| l.0).collect();
    assert!(failed.is_empty(), "criteria failed: {failed:?}");
}
