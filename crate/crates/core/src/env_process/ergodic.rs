use crate::coupling::SingleWalk;
use crate::environments::EnvironmentModel;
use crate::error::{Error, Result};
use crate::lattice::{Configuration, LocalFunction, Point, RateFamily};
use crate::rng::{replicate, SimRng};
use crate::stats::{batch_means, Estimate, Welford};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum InitialLaw {
    /// The environment's own initial law (stationary where one is known).
    Stationary,
    /// Every site set to one value.
    Constant(f64),
}

impl InitialLaw {
    pub fn sample(&self, model: &EnvironmentModel, rng: &mut SimRng) -> Configuration {
        match *self {
            InitialLaw::Stationary => model.sample_initial(rng),
            InitialLaw::Constant(v) => Configuration::constant(model.geometry(), v),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ErgodicOptions {
    pub burn_in: f64,
    pub horizon: f64,
    pub replicas: usize,
    pub seed: u64,
    /// Batches per replica; at least 20.
    pub batches: usize,
    pub initial: InitialLaw,
}

impl ErgodicOptions {
    pub fn new(burn_in: f64, horizon: f64, replicas: usize, seed: u64) -> Self {
        ErgodicOptions { burn_in, horizon, replicas, seed, batches: 20, initial: InitialLaw::Stationary }
    }

    fn validate(&self) -> Result<()> {
        if !(self.horizon > self.burn_in) || self.burn_in < 0.0 {
            return Err(Error::Config(format!("horizon {} must exceed burn-in {}", self.horizon, self.burn_in)));
        }
        if self.batches < 20 {
            return Err(Error::Config("at least 20 batches are needed".into()));
        }
        if self.replicas == 0 {
            return Err(Error::Config("replicas must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ErgodicAverage {
    pub observable: String,
    pub value: Estimate,
    pub burn_in: f64,
    pub horizon: f64,
    pub replicas: usize,
    pub batches: usize,
    /// Per-replica time averages.
    pub replica_means: Vec<f64>,
}

fn pooled(label: &str, opts: &ErgodicOptions, runs: Vec<Vec<f64>>) -> ErgodicAverage {
    let mut w = Welford::default();
    runs.iter().flatten().for_each(|&b| w.push(b));
    let value = w.estimate().with_seed(opts.seed);
    ErgodicAverage {
        observable: label.to_string(),
        value,
        burn_in: opts.burn_in,
        horizon: opts.horizon,
        replicas: opts.replicas,
        batches: opts.batches,
        replica_means: runs.iter().map(|r| r.iter().sum::<f64>() / r.len() as f64).collect(),
    }
}

/// `μ^EP(f)` as the time average of `f(θ_{−X_t} η_t)` over `[burn_in, horizon]`.
/// Each replica's window is cut into equal batches; the standard error comes
/// from the pooled batch means.
pub fn estimate_mu_ep(model: &EnvironmentModel, alpha: &RateFamily, f: &LocalFunction, opts: &ErgodicOptions) -> Result<ErgodicAverage> {
    opts.validate()?;
    let len = (opts.horizon - opts.burn_in) / opts.batches as f64;
    let runs = replicate(opts.seed, "mu-ep", opts.replicas, |_, rng| -> Result<Vec<f64>> {
        let init = opts.initial.sample(model, rng);
        let mut w = SingleWalk::new(model, alpha, init, Point::ORIGIN, opts.horizon, rng.clone())?;
        w.advance_to(opts.burn_in)?;
        (1..=opts.batches)
            .map(|k| {
                let end = if k == opts.batches { opts.horizon } else { opts.burn_in + k as f64 * len };
                let start = w.time();
                Ok(w.advance_integrating(end, f)? / (end - start))
            })
            .collect()
    });
    Ok(pooled(f.label(), opts, runs.into_iter().collect::<Result<_>>()?))
}

/// Second estimator of `μ^EP(f)`: point samples of `f(θ_{−X_t} η_t)` every
/// `spacing` after burn-in, on streams independent of [`estimate_mu_ep`].
pub fn estimate_mu_ep_snapshots(model: &EnvironmentModel, alpha: &RateFamily, f: &LocalFunction, opts: &ErgodicOptions, spacing: f64) -> Result<ErgodicAverage> {
    opts.validate()?;
    if !(spacing > 0.0) {
        return Err(Error::Config("snapshot spacing must be positive".into()));
    }
    let count = ((opts.horizon - opts.burn_in) / spacing).floor() as usize;
    if count < opts.batches {
        return Err(Error::Config("fewer snapshots than batches".into()));
    }
    let runs = replicate(opts.seed, "mu-ep-snapshot", opts.replicas, |_, rng| -> Result<Vec<f64>> {
        let init = opts.initial.sample(model, rng);
        let mut w = SingleWalk::new(model, alpha, init, Point::ORIGIN, opts.horizon, rng.clone())?;
        let samples = (1..=count)
            .map(|k| {
                w.advance_to(opts.burn_in + k as f64 * spacing)?;
                Ok(w.observe(f))
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(batch_means(&samples, opts.batches))
    });
    Ok(pooled(f.label(), opts, runs.into_iter().collect::<Result<_>>()?))
}
