//! Experiment configuration: one TOML file, unknown keys rejected.

use rwde::environments::{EnvironmentKind, EnvironmentModel, PhiSpec, RefreshLaw};
use rwde::grid::TimeGrid;
use rwde::lattice::{LocalFunction, Point, RateFamily, TorusGeometry};
use serde::Deserialize;
use crate::builders;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("missing key `{key}` required by kind `{kind}`")]
    Missing { key: &'static str, kind: &'static str },
    #[error("invalid value for `{key}`: {msg}")]
    Invalid { key: &'static str, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    CouplingDecay,
    Decoupling,
    MuEp,
    SemigroupIntegral,
    Continuity,
    Lln,
    Einstein,
    Clt,
    Concentration,
    Transience,
    AppendixSuite,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::CouplingDecay => "coupling_decay",
            Kind::Decoupling => "decoupling",
            Kind::MuEp => "mu_ep",
            Kind::SemigroupIntegral => "semigroup_integral",
            Kind::Continuity => "continuity",
            Kind::Lln => "lln",
            Kind::Einstein => "einstein",
            Kind::Clt => "clt",
            Kind::Concentration => "concentration",
            Kind::Transience => "transience",
            Kind::AppendixSuite => "appendix_suite",
        }
    }

    fn needs_environment(self) -> bool {
        self != Kind::AppendixSuite
    }

    fn needs_walker(self) -> bool {
        !matches!(self, Kind::AppendixSuite | Kind::CouplingDecay)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    #[default]
    Both,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub kind: Kind,
    pub seed: u64,
    #[serde(default = "one")]
    pub replicas: usize,
    pub horizon: Option<f64>,
    pub threads: Option<usize>,
    pub environment: Option<EnvironmentBlock>,
    pub walker: Option<WalkerBlock>,
    pub walker_prime: Option<WalkerBlock>,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default)]
    pub output: Output,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub options: Options,
    pub chain: Option<ChainBlock>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentBlock {
    pub kind: String,
    pub r: Option<f64>,
    pub beta_int: Option<f64>,
    pub kappa: Option<f64>,
    pub a_star: Option<f64>,
    /// Bernoulli refresh parameter; omit for a uniform refresh law.
    pub nu_p: Option<f64>,
    #[serde(rename = "L")]
    pub l: usize,
    pub d: usize,
}

/// `α(η, z) = base + slope · η(site)`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpBlock {
    pub z: Vec<i64>,
    #[serde(alias = "rate")]
    pub base: f64,
    #[serde(default)]
    pub slope: f64,
    #[serde(default)]
    pub site: Option<Vec<i64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkerBlock {
    #[serde(default)]
    pub jumps: Vec<JumpBlock>,
    /// Builder strings `affine_rate(base, slope, site, jump)`.
    #[serde(default)]
    pub rates: Vec<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    pub t: Option<Vec<f64>>,
    pub t_max: Option<f64>,
    pub t_points: Option<usize>,
    pub r: Option<Vec<f64>>,
    pub eps: Option<Vec<f64>>,
    #[serde(rename = "T")]
    pub horizons: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    pub dir: Option<PathBuf>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Multiple of the standard error allowed in statistical assertions.
    #[serde(default = "three")]
    pub se_multiple: f64,
    /// Extra absolute window, e.g. for second-order effects.
    #[serde(default)]
    pub window: f64,
    /// Significance level of goodness-of-fit tests.
    #[serde(default = "one_percent")]
    pub significance: f64,
    /// Absolute tolerance for exact comparisons.
    #[serde(default = "exact")]
    pub exact: f64,
}

fn three() -> f64 {
    3.0
}
fn one_percent() -> f64 {
    0.01
}
fn exact() -> f64 {
    1e-8
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { se_multiple: 3.0, window: 0.0, significance: 0.01, exact: 1e-8 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    pub horizon: Option<f64>,
    pub burn_in: Option<f64>,
    pub direction: Option<Vec<f64>>,
    /// Builder string `projection(site)` or `product(sites...)`.
    pub observable: Option<String>,
    pub snapshot_spacing: Option<f64>,
    pub phi: Option<String>,
    pub phi_lambda: Option<f64>,
    #[serde(rename = "K")]
    pub k: Option<f64>,
    pub truncation: Option<f64>,
    pub inner_replicas: Option<usize>,
    pub formula_samples: Option<usize>,
    pub site_radius: Option<usize>,
    pub p: Option<f64>,
    pub c_p: Option<f64>,
    pub expected_speed: Option<Vec<f64>>,
    pub expected_regime: Option<String>,
    pub expected_er: Option<bool>,
    /// Scalar target of the suite's main assertion.
    pub expected: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainBlock {
    pub rates: Vec<Vec<f64>>,
    pub f: Vec<f64>,
}

pub fn load(path: &Path) -> Result<Config, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<Config, ConfigError> {
    let cfg: Config = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn invalid(key: &'static str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key, msg: msg.into() }
}

fn point(key: &'static str, c: &[i64], d: usize) -> Result<Point, ConfigError> {
    if c.len() != d {
        return Err(invalid(key, format!("expected {d} coordinates, got {}", c.len())));
    }
    Point::new(c).map_err(|e| invalid(key, e.to_string()))
}

impl Config {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let kind = self.kind.name();
        if self.replicas < 1 {
            return Err(invalid("replicas", "must be at least 1"));
        }
        if self.kind.needs_environment() && self.environment.is_none() {
            return Err(ConfigError::Missing { key: "environment", kind });
        }
        if self.kind.needs_walker() && self.walker.is_none() {
            return Err(ConfigError::Missing { key: "walker", kind });
        }
        if self.kind == Kind::Continuity && self.walker_prime.is_none() {
            return Err(ConfigError::Missing { key: "walker_prime", kind });
        }
        if self.kind == Kind::Einstein && self.grids.eps.is_none() {
            return Err(ConfigError::Missing { key: "grids.eps", kind });
        }
        if self.kind == Kind::Concentration && self.grids.r.is_none() {
            return Err(ConfigError::Missing { key: "grids.r", kind });
        }
        if matches!(self.kind, Kind::Transience | Kind::Clt) && self.grids.horizons.is_none() {
            return Err(ConfigError::Missing { key: "grids.T", kind });
        }
        for (key, g) in [("grids.t", &self.grids.t), ("grids.r", &self.grids.r), ("grids.eps", &self.grids.eps), ("grids.T", &self.grids.horizons)] {
            if let Some(g) = g {
                if g.is_empty() || g.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(invalid(key, "grid must be non-empty, finite and non-negative"));
                }
            }
        }
        if let Some(t) = &self.grids.t {
            if t.windows(2).any(|w| w[1] <= w[0]) {
                return Err(invalid("grids.t", "grid must be increasing"));
            }
        }
        if self.kind.needs_environment() {
            self.model()?;
        }
        if let Some(w) = &self.walker {
            // einstein slopes are per unit of ε
            let scale = match (self.kind, &self.grids.eps) {
                (Kind::Einstein, Some(e)) => e.iter().cloned().fold(0.0, f64::max),
                _ => 1.0,
            };
            self.rates(w, scale)?;
            if self.kind == Kind::Einstein {
                self.rates(w, -scale)?;
            }
        }
        if let Some(w) = &self.walker_prime {
            self.rates(w, 1.0)?;
        }
        if self.options.observable.is_some() {
            self.observable()?;
        }
        self.phi()?;
        Ok(())
    }

    pub fn model(&self) -> Result<EnvironmentModel, ConfigError> {
        let e = self.environment.as_ref().ok_or(ConfigError::Missing { key: "environment", kind: self.kind.name() })?;
        let need = |v: Option<f64>, key: &'static str| v.ok_or(ConfigError::Missing { key, kind: self.kind.name() });
        let kind = match e.kind.as_str() {
            "independent_refresh" => EnvironmentKind::IndependentRefresh {
                rate: need(e.r, "environment.r")?,
                law: e.nu_p.map_or(RefreshLaw::Uniform, RefreshLaw::Bernoulli),
            },
            "weak_glauber" => EnvironmentKind::WeakGlauber { rate: need(e.r, "environment.r")?, beta: e.beta_int.unwrap_or(0.0) },
            "deterministic_relaxation" => EnvironmentKind::DeterministicRelaxation {
                kappa: need(e.kappa, "environment.kappa")?,
                fixed_point: e.a_star.unwrap_or(0.0),
            },
            other => return Err(invalid("environment.kind", format!("unknown environment `{other}`"))),
        };
        let geometry = TorusGeometry::new(e.d, e.l).map_err(|err| invalid("environment", err.to_string()))?;
        EnvironmentModel::new(kind, geometry).map_err(|err| invalid("environment", err.to_string()))
    }

    pub fn dim(&self) -> usize {
        self.environment.as_ref().map_or(1, |e| e.d)
    }

    /// Rates with every slope multiplied by `scale`.
    pub fn rates(&self, w: &WalkerBlock, scale: f64) -> Result<RateFamily, ConfigError> {
        let model = self.model()?;
        let d = self.dim();
        let mut specs = w
            .jumps
            .iter()
            .map(|j| {
                let z = point("walker.jumps.z", &j.z, d)?;
                let site = match &j.site {
                    Some(s) => point("walker.jumps.site", s, d)?,
                    None => Point::ORIGIN,
                };
                Ok((z, j.base, j.slope, site))
            })
            .collect::<Result<Vec<_>, ConfigError>>()?;
        for b in &w.rates {
            specs.push(builders::affine_rate(b, d).map_err(|m| invalid("walker.rates", m))?);
        }
        if specs.is_empty() {
            return Err(invalid("walker", "no jumps given"));
        }
        let jumps = specs
            .into_iter()
            .map(|(z, base, slope, site)| {
                let s = slope * scale;
                (z, if s == 0.0 { LocalFunction::constant(base) } else { LocalFunction::affine(base, s, site) })
            })
            .collect();
        RateFamily::new(d, model.space(), jumps).map_err(|e| invalid("walker", e.to_string()))
    }

    pub fn walker(&self) -> Result<RateFamily, ConfigError> {
        let w = self.walker.as_ref().ok_or(ConfigError::Missing { key: "walker", kind: self.kind.name() })?;
        self.rates(w, 1.0)
    }

    pub fn time_grid(&self) -> Result<TimeGrid, ConfigError> {
        match (&self.grids.t, self.grids.t_max) {
            (Some(t), _) => TimeGrid::new(t.clone()).map_err(|e| invalid("grids.t", e.to_string())),
            (None, Some(m)) => TimeGrid::uniform(m, self.grids.t_points.unwrap_or(64)).map_err(|e| invalid("grids.t_max", e.to_string())),
            (None, None) => Err(ConfigError::Missing { key: "grids.t", kind: self.kind.name() }),
        }
    }

    pub fn horizon(&self) -> Result<f64, ConfigError> {
        self.horizon
            .or(self.options.horizon)
            .or_else(|| self.grids.horizons.as_ref().and_then(|h| h.iter().cloned().reduce(f64::max)))
            .filter(|h| *h > 0.0)
            .ok_or(ConfigError::Missing { key: "horizon", kind: self.kind.name() })
    }

    pub fn direction(&self) -> Result<Vec<f64>, ConfigError> {
        let d = self.dim();
        let u = self.options.direction.clone().unwrap_or_else(|| (0..d).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect());
        if u.len() != d {
            return Err(invalid("options.direction", format!("expected {d} components")));
        }
        let n = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(n > 0.0) {
            return Err(invalid("options.direction", "must be non-zero"));
        }
        Ok(u.iter().map(|v| v / n).collect())
    }

    pub fn observable(&self) -> Result<LocalFunction, ConfigError> {
        match &self.options.observable {
            Some(b) => builders::local_function(b, self.dim()).map_err(|m| invalid("options.observable", m)),
            None => Ok(LocalFunction::projection(Point::ORIGIN)),
        }
    }

    pub fn phi(&self) -> Result<Option<(PhiSpec, f64)>, ConfigError> {
        let Some(name) = &self.options.phi else { return Ok(None) };
        let l = self.options.phi_lambda.unwrap_or(1.0);
        let k = self.options.k.unwrap_or(1.0);
        if !(k > 0.0) {
            return Err(invalid("options.K", "must be positive"));
        }
        match name.as_str() {
            "exp" => Ok(Some((PhiSpec::Exp(l), k))),
            "poly" => Ok(Some((PhiSpec::Poly(l), k))),
            other => Err(invalid("options.phi", format!("unknown weight `{other}`"))),
        }
    }
}
