use crate::environments::{EnvState, EnvironmentModel, SiteDraw};
use crate::error::{domain, model, Result};
use crate::grid::gauss_legendre;
use crate::lattice::{Configuration, LocalFunction, Point, RateFamily};
use crate::rng::{exp_time, stream, SimRng};
use rand::Rng;

/// One walker in one environment, simulated with its own thinning clock.
/// Written separately from the coupled engine so the two can be compared.
#[derive(Debug, Clone)]
pub struct SingleWalk {
    model: EnvironmentModel,
    alpha: RateFamily,
    env: EnvState,
    x: Point,
    time: f64,
    horizon: f64,
    rng: SimRng,
    next_env: f64,
    next_walk: f64,
    jumps: u64,
}

pub fn simulate_walk(model: &EnvironmentModel, alpha: &RateFamily, init: Configuration, x0: Point, horizon: f64, seed: u64) -> Result<SingleWalk> {
    SingleWalk::new(model, alpha, init, x0, horizon, stream(seed, "walk", 0))
}

impl SingleWalk {
    pub fn new(model: &EnvironmentModel, alpha: &RateFamily, init: Configuration, x0: Point, horizon: f64, mut rng: SimRng) -> Result<Self> {
        if !(horizon >= 0.0) {
            return Err(domain("horizon must be non-negative"));
        }
        let env = model.state(init)?;
        let re = model.total_clock_rate();
        let next_env = if re > 0.0 { exp_time(&mut rng, re) } else { f64::INFINITY };
        let lw = alpha.total_envelope();
        let next_walk = if lw > 0.0 { exp_time(&mut rng, lw) } else { f64::INFINITY };
        Ok(SingleWalk { model: *model, alpha: alpha.clone(), env, x: x0, time: 0.0, horizon, rng, next_env, next_walk, jumps: 0 })
    }

    pub fn position(&self) -> Point {
        self.x
    }

    pub fn env(&self) -> &EnvState {
        &self.env
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn jumps(&self) -> u64 {
        self.jumps
    }

    /// `f(θ_{−X} η)`.
    pub fn observe(&self, f: &LocalFunction) -> f64 {
        self.env.eval(f, self.x)
    }

    fn flow_to(&mut self, t: f64) {
        if let Some(k) = self.model.flow_rate() {
            self.env.contract((-k * (t - self.time)).exp());
        }
        self.time = t;
    }

    /// One clock ring; returns whether the walker moved.
    fn step(&mut self) -> Result<bool> {
        let mut moved = false;
        if self.next_env <= self.next_walk {
            self.flow_to(self.next_env);
            let n = self.model.geometry().num_sites();
            let s = self.rng.random_range(0..n);
            let d = SiteDraw::sample(&mut self.rng);
            if let Some(v) = self.model.update(&self.env, s, d) {
                self.env.set(s, v);
            }
            self.next_env += exp_time(&mut self.rng, self.model.total_clock_rate());
        } else {
            self.flow_to(self.next_walk);
            let total = self.alpha.total_envelope();
            let mut pick = self.rng.random::<f64>() * total;
            let jumps = self.alpha.jumps();
            let mut k = jumps.len() - 1;
            for (i, j) in jumps.iter().enumerate() {
                if pick < j.envelope {
                    k = i;
                    break;
                }
                pick -= j.envelope;
            }
            let j = &jumps[k];
            let a = self.env.eval(&j.rate, self.x);
            if a > j.envelope * (1.0 + 1e-9) {
                return Err(model(format!("rate {a} above envelope {}", j.envelope)));
            }
            if self.rng.random::<f64>() * j.envelope < a {
                self.x = self.x + j.z;
                self.jumps += 1;
                moved = true;
            }
            self.next_walk += exp_time(&mut self.rng, total);
        }
        Ok(moved)
    }

    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        if t < self.time || t > self.horizon {
            return Err(domain(format!("query time {t} outside [{}, {}]", self.time, self.horizon)));
        }
        while self.next_env.min(self.next_walk) <= t {
            self.step()?;
        }
        self.flow_to(t);
        Ok(())
    }

    /// Like [`advance_to`](Self::advance_to), calling `on_jump(time, position)`
    /// after every accepted walker jump.
    pub fn advance_tracking(&mut self, t: f64, mut on_jump: impl FnMut(f64, Point)) -> Result<()> {
        if t < self.time || t > self.horizon {
            return Err(domain(format!("query time {t} outside [{}, {}]", self.time, self.horizon)));
        }
        while self.next_env.min(self.next_walk) <= t {
            if self.step()? {
                on_jump(self.time, self.x);
            }
        }
        self.flow_to(t);
        Ok(())
    }

    /// Advances to `t` and returns `∫ f(θ_{−X_s} η_s) ds` over the elapsed time.
    pub fn advance_integrating(&mut self, t: f64, f: &LocalFunction) -> Result<f64> {
        if t < self.time || t > self.horizon {
            return Err(domain("integration target outside horizon"));
        }
        let mut acc = 0.0;
        loop {
            let next = self.next_env.min(self.next_walk).min(t);
            let dt = next - self.time;
            if dt > 0.0 {
                acc += match self.model.flow_rate() {
                    None => self.observe(f) * dt,
                    Some(k) => gauss_legendre(|s| self.env.eval_contracted(f, self.x, (-k * s).exp()), 0.0, dt, 1),
                };
            }
            if next >= t {
                self.flow_to(t);
                return Ok(acc);
            }
            self.step()?;
        }
    }
}
