use super::model::{EnvState, EnvironmentModel, SiteDraw};
use crate::error::{self, domain, Result};
use crate::lattice::Configuration;
use crate::rng::{exp_time, stream, SimRng};
use rand::Rng;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvEvent {
    pub time: f64,
    pub site: usize,
    pub draw: SiteDraw,
}

/// Single-copy sampler. Queries must be made at non-decreasing times.
#[derive(Debug, Clone)]
pub struct EnvTrajectory {
    model: EnvironmentModel,
    state: EnvState,
    time: f64,
    horizon: f64,
    next_event: f64,
    rng: SimRng,
    log: Option<Vec<EnvEvent>>,
}

pub fn simulate_env(model: &EnvironmentModel, init: Configuration, horizon: f64, seed: u64) -> Result<EnvTrajectory> {
    if !(horizon >= 0.0) {
        return Err(domain("horizon must be non-negative"));
    }
    let state = model.state(init)?;
    let mut rng = stream(seed, "env", 0);
    let total = model.total_clock_rate();
    let next_event = if total > 0.0 { exp_time(&mut rng, total) } else { f64::INFINITY };
    Ok(EnvTrajectory { model: *model, state, time: 0.0, horizon, next_event, rng, log: None })
}

impl EnvTrajectory {
    pub fn with_log(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    pub fn log(&self) -> Option<&[EnvEvent]> {
        self.log.as_deref()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn advance_to(&mut self, t: f64) -> Result<&EnvState> {
        if t < self.time || t > self.horizon {
            return Err(domain(format!("query time {t} outside [{}, {}]", self.time, self.horizon)));
        }
        let n = self.model.geometry().num_sites();
        let total = self.model.total_clock_rate();
        while self.next_event <= t {
            let site = self.rng.random_range(0..n);
            let draw = SiteDraw::sample(&mut self.rng);
            if let Some(v) = self.model.update(&self.state, site, draw) {
                self.state.set(site, v);
            }
            if let Some(log) = self.log.as_mut() {
                log.push(EnvEvent { time: self.next_event, site, draw });
            }
            self.next_event += exp_time(&mut self.rng, total);
        }
        if let Some(k) = self.model.flow_rate() {
            self.state.contract((-k * (t - self.time)).exp());
        }
        self.time = t;
        Ok(&self.state)
    }
}

/// Applies one shared ring to site `sa` of copy `a` and site `sb` of copy `b`.
#[inline]
pub(crate) fn coupled_ring(m: &EnvironmentModel, a: &mut EnvState, b: &mut EnvState, sa: usize, sb: usize, d: SiteDraw) {
    let na = m.update(a, sa, d);
    let nb = m.update(b, sb, d);
    if let Some(v) = na {
        a.set(sa, v);
    }
    if let Some(v) = nb {
        b.set(sb, v);
    }
}

/// Two copies driven by the same rings and draws.
#[derive(Debug, Clone)]
pub struct CoupledEnvTrajectory {
    model: EnvironmentModel,
    a: EnvState,
    b: EnvState,
    time: f64,
    horizon: f64,
    next_event: f64,
    rng: SimRng,
}

pub fn simulate_env_coupled(
    model: &EnvironmentModel,
    init: (Configuration, Configuration),
    horizon: f64,
    seed: u64,
) -> Result<CoupledEnvTrajectory> {
    CoupledEnvTrajectory::with_rng(model, init, horizon, stream(seed, "env-coupled", 0))
}

impl CoupledEnvTrajectory {
    pub fn with_rng(
        model: &EnvironmentModel,
        init: (Configuration, Configuration),
        horizon: f64,
        mut rng: SimRng,
    ) -> Result<Self> {
        if init.0.geometry() != init.1.geometry() {
            return Err(error::model("coupled initial configurations live on different tori"));
        }
        if !(horizon >= 0.0) {
            return Err(domain("horizon must be non-negative"));
        }
        let a = model.state(init.0)?;
        let b = model.state(init.1)?;
        let total = model.total_clock_rate();
        let next_event = if total > 0.0 { exp_time(&mut rng, total) } else { f64::INFINITY };
        Ok(CoupledEnvTrajectory { model: *model, a, b, time: 0.0, horizon, next_event, rng })
    }

    pub fn states(&self) -> (&EnvState, &EnvState) {
        (&self.a, &self.b)
    }

    pub fn discrepancy(&self, site: usize) -> f64 {
        self.model.space().rho(self.a.value(site), self.b.value(site))
    }

    pub fn total_discrepancy(&self) -> f64 {
        (0..self.model.geometry().num_sites()).map(|s| self.discrepancy(s)).sum()
    }

    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        if t < self.time || t > self.horizon {
            return Err(domain(format!("query time {t} outside [{}, {}]", self.time, self.horizon)));
        }
        let n = self.model.geometry().num_sites();
        let total = self.model.total_clock_rate();
        while self.next_event <= t {
            let site = self.rng.random_range(0..n);
            let d = SiteDraw::sample(&mut self.rng);
            coupled_ring(&self.model, &mut self.a, &mut self.b, site, site, d);
            self.next_event += exp_time(&mut self.rng, total);
        }
        if let Some(k) = self.model.flow_rate() {
            let c = (-k * (t - self.time)).exp();
            self.a.contract(c);
            self.b.contract(c);
        }
        self.time = t;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::{EnvironmentKind, RefreshLaw};
    use crate::lattice::TorusGeometry;
    use crate::stats::Estimate;

    fn refresh(l: usize) -> EnvironmentModel {
        EnvironmentModel::new(
            EnvironmentKind::IndependentRefresh { rate: 1.0, law: RefreshLaw::Bernoulli(0.5) },
            TorusGeometry::new(1, l).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn time_zero_returns_init() {
        let m = refresh(8);
        let init = Configuration::from_fn(m.geometry(), |s| (s % 2) as f64);
        let mut tr = simulate_env(&m, init.clone(), 5.0, 1).unwrap();
        assert_eq!(tr.advance_to(0.0).unwrap().snapshot(), init);
    }

    #[test]
    fn relaxation_flow_halves_at_ln2() {
        let g = TorusGeometry::new(2, 3).unwrap();
        let m = EnvironmentModel::new(EnvironmentKind::DeterministicRelaxation { kappa: 1.0, fixed_point: 0.0 }, g).unwrap();
        let mut tr = simulate_env(&m, Configuration::constant(g, 1.0), 1.0, 0).unwrap();
        let st = tr.advance_to(2f64.ln()).unwrap();
        for s in 0..9 {
            assert!((st.value(s) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn refresh_survival_mean() {
        let m = refresh(4);
        let xs: Vec<f64> = (0..10_000)
            .map(|i| {
                let mut tr = simulate_env(&m, Configuration::constant(m.geometry(), 1.0), 1.0, 1000 + i).unwrap();
                tr.advance_to(1.0).unwrap().value(0)
            })
            .collect();
        let e = Estimate::from_samples(&xs);
        assert!(e.within(0.5 + 0.5 * (-1f64).exp(), 3.0), "{e:?}");
    }

    #[test]
    fn replay_is_deterministic() {
        let m = refresh(6);
        let init = Configuration::constant(m.geometry(), 0.0);
        let mut a = simulate_env(&m, init.clone(), 3.0, 99).unwrap().with_log();
        let mut b = simulate_env(&m, init, 3.0, 99).unwrap().with_log();
        a.advance_to(3.0).unwrap();
        b.advance_to(3.0).unwrap();
        assert_eq!(format!("{:?}", a.log()), format!("{:?}", b.log()));
        assert!(!a.log().unwrap().is_empty());
    }

    #[test]
    fn identical_inits_never_separate() {
        let m = refresh(10);
        let init = Configuration::from_fn(m.geometry(), |s| (s % 3 == 0) as u8 as f64);
        let mut c = simulate_env_coupled(&m, (init.clone(), init), 10.0, 5).unwrap();
        for k in 0..=100 {
            c.advance_to(k as f64 * 0.1).unwrap();
            assert_eq!(c.total_discrepancy(), 0.0);
        }
    }

    #[test]
    fn refresh_discrepancy_stays_put_and_is_absorbed() {
        let m = refresh(10);
        let a = Configuration::constant(m.geometry(), 0.0);
        let mut b = a.clone();
        b.values_mut()[0] = 1.0;
        for seed in 0..200 {
            let mut c = simulate_env_coupled(&m, (a.clone(), b.clone()), 5.0, seed).unwrap();
            let mut gone = false;
            for k in 0..=50 {
                c.advance_to(k as f64 * 0.1).unwrap();
                for s in 1..10 {
                    assert_eq!(c.discrepancy(s), 0.0);
                }
                if gone {
                    assert_eq!(c.discrepancy(0), 0.0);
                }
                gone |= c.discrepancy(0) == 0.0;
            }
        }
    }

    #[test]
    fn horizon_is_enforced() {
        let m = refresh(4);
        let mut tr = simulate_env(&m, Configuration::constant(m.geometry(), 0.0), 1.0, 0).unwrap();
        assert!(tr.advance_to(2.0).is_err());
    }
}
