//! `rwde`: run one verification experiment described by a TOML file.
//!
//! Exit status: 0 when every assertion passes or is reference only,
//! 1 on a failed assertion, 2 on a configuration error, 3 on a runtime error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod builders;
mod config;
mod output;
mod suites;

use clap::Parser;
use config::Format;
use output::Metadata;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;
use suites::RunError;

#[derive(Debug, Parser)]
#[command(name = "rwde", version, about = "Run a random-walk verification experiment")]
struct Cli {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

const PASS: u8 = 0;
const FAIL: u8 = 1;
const CONFIG: u8 = 2;
const RUNTIME: u8 = 3;

fn main() -> ExitCode {
    ExitCode::from(run(Cli::parse()))
}

fn run(cli: Cli) -> u8 {
    let started = Instant::now();
    let mut cfg = match config::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return CONFIG;
        }
    };
    cfg.seed = cli.seed.unwrap_or(cfg.seed);
    cfg.replicas = cli.replicas.unwrap_or(cfg.replicas);
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return CONFIG;
    }
    let threads = cli.threads.or(cfg.threads).unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if threads == 0 {
        eprintln!("error: --threads must be at least 1");
        return CONFIG;
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
        eprintln!("error: cannot start the worker pool: {e}");
        return RUNTIME;
    }
    let outcome = match suites::run(&cfg) {
        Ok(o) => o,
        Err(RunError::Config(e)) => {
            eprintln!("error: {e}");
            return CONFIG;
        }
        Err(RunError::Library(rwde::Error::Config(e))) => {
            eprintln!("error: config error: {e}");
            return CONFIG;
        }
        Err(RunError::Library(e)) => {
            eprintln!("error: {e}");
            return RUNTIME;
        }
    };
    let meta = Metadata {
        kind: cfg.kind.name().into(),
        seed: cfg.seed,
        replicas: cfg.replicas,
        threads,
        git_describe: output::git_describe(),
        wall_time_s: started.elapsed().as_secs_f64(),
    };
    let dir = cli.out.or(cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let format = cli.format.or(cfg.output.format).unwrap_or_default();
    if let Err(e) = output::write(&dir, format, &outcome, &meta) {
        eprintln!("error: {e}");
        return RUNTIME;
    }
    for a in &outcome.assertions {
        let status = match (a.pass, a.reference_only) {
            (true, _) => "pass",
            (false, true) => "reference",
            (false, false) => "FAIL",
        };
        println!("{status:9} {}: lhs {} rhs {} tol {}", a.name, a.lhs, a.rhs, a.tolerance);
    }
    if outcome.passed() {
        PASS
    } else {
        FAIL
    }
}
