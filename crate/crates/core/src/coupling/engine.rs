use crate::environments::{EnvState, EnvironmentModel, SiteDraw};
use crate::error::{model as model_err, Result};
use crate::grid::gauss_legendre;
use crate::lattice::{Configuration, LocalFunction, Point, RateFamily};
use crate::rng::{exp_time, stream, SimRng};
use rand::Rng;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RestartMode {
    None,
    RecoupleOnDecouple,
}

#[derive(Debug, Clone)]
struct CJump {
    z: Point,
    rates: [Option<LocalFunction>; 2],
    lambda: f64,
}

/// Jump rates of the two walkers over a common envelope
/// `λ_z = max(λ¹_z, λ²_z)`.
#[derive(Debug, Clone)]
pub struct CoupledRates {
    jumps: Vec<CJump>,
    cumulative: Vec<f64>,
    total: f64,
    same: bool,
}

impl CoupledRates {
    pub fn same(alpha: &RateFamily) -> Self {
        Self::build(alpha, alpha, true)
    }

    pub fn pair(a: &RateFamily, b: &RateFamily) -> Self {
        Self::build(a, b, false)
    }

    fn build(a: &RateFamily, b: &RateFamily, same: bool) -> Self {
        let mut jumps: Vec<CJump> = Vec::new();
        for (i, fam) in [a, b].into_iter().enumerate() {
            for j in fam.jumps() {
                match jumps.iter_mut().find(|c| c.z == j.z) {
                    Some(c) => {
                        c.rates[i] = Some(j.rate.clone());
                        c.lambda = c.lambda.max(j.envelope);
                    }
                    None => {
                        let mut rates = [None, None];
                        rates[i] = Some(j.rate.clone());
                        jumps.push(CJump { z: j.z, rates, lambda: j.envelope });
                    }
                }
            }
        }
        jumps.retain(|j| j.lambda > 0.0);
        let mut acc = 0.0;
        let cumulative = jumps
            .iter()
            .map(|j| {
                acc += j.lambda;
                acc
            })
            .collect();
        CoupledRates { jumps, cumulative, total: acc, same }
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn envelopes(&self) -> Vec<(Point, f64)> {
        self.jumps.iter().map(|j| (j.z, j.lambda)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum EventKind {
    Env { frame_site: usize, draw: SiteDraw },
    Walker { jump: Point, u: f64, accept: [bool; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupledEvent {
    pub time: f64,
    pub kind: EventKind,
    pub x: [Point; 2],
    pub y_plus: Point,
    pub y_minus: Point,
}

#[derive(Debug, Clone)]
pub struct CoupledState {
    pub env: [EnvState; 2],
    pub x: [Point; 2],
    pub x0: [Point; 2],
    pub y_plus: Point,
    pub y_minus: Point,
    pub tau: Option<f64>,
    pub decouple_count: u64,
    /// Copy `i` site of frame site `u` is `u + offset[i]`.
    pub offset: [Point; 2],
    pub time: f64,
}

/// First discordant jump decision in an event log.
pub fn recompute_tau(log: &[CoupledEvent]) -> Option<f64> {
    log.iter().find_map(|e| match e.kind {
        EventKind::Walker { accept, .. } if accept[0] != accept[1] => Some(e.time),
        _ => None,
    })
}

#[derive(Debug, Clone)]
pub struct CoupledWalk {
    model: EnvironmentModel,
    rates: CoupledRates,
    state: CoupledState,
    restart: RestartMode,
    rng: SimRng,
    next_env: f64,
    next_walk: f64,
    horizon: f64,
    discrepant: usize,
    log: Option<Vec<CoupledEvent>>,
}

pub fn simulate_coupled_walk(
    model: &EnvironmentModel,
    alpha: &RateFamily,
    init: ((Configuration, Point), (Configuration, Point)),
    horizon: f64,
    seed: u64,
    restart: RestartMode,
) -> Result<CoupledWalk> {
    CoupledWalk::new(model, CoupledRates::same(alpha), init, horizon, stream(seed, "coupled-walk", 0), restart)
}

impl CoupledWalk {
    pub fn new(
        model: &EnvironmentModel,
        rates: CoupledRates,
        init: ((Configuration, Point), (Configuration, Point)),
        horizon: f64,
        mut rng: SimRng,
        restart: RestartMode,
    ) -> Result<Self> {
        let ((e1, x1), (e2, x2)) = init;
        if e1.geometry() != e2.geometry() {
            return Err(model_err("coupled initial configurations live on different tori"));
        }
        if !(horizon >= 0.0) {
            return Err(crate::error::domain("horizon must be non-negative"));
        }
        let env = [model.state(e1)?, model.state(e2)?];
        let re = model.total_clock_rate();
        let next_env = if re > 0.0 { exp_time(&mut rng, re) } else { f64::INFINITY };
        let next_walk = if rates.total > 0.0 { exp_time(&mut rng, rates.total) } else { f64::INFINITY };
        let mut w = CoupledWalk {
            model: *model,
            rates,
            state: CoupledState {
                env,
                x: [x1, x2],
                x0: [x1, x2],
                y_plus: Point::ORIGIN,
                y_minus: Point::ORIGIN,
                tau: None,
                decouple_count: 0,
                offset: [Point::ORIGIN; 2],
                time: 0.0,
            },
            restart,
            rng,
            next_env,
            next_walk,
            horizon,
            discrepant: 0,
            log: None,
        };
        w.recount();
        Ok(w)
    }

    pub fn with_log(mut self) -> Self {
        self.log = Some(Vec::new());
        self
    }

    pub fn log(&self) -> Option<&[CoupledEvent]> {
        self.log.as_deref()
    }

    pub fn state(&self) -> &CoupledState {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.state.time
    }

    fn frame_site(&self, u: usize, i: usize) -> usize {
        let g = self.model.geometry();
        g.site(g.point(u) + self.state.offset[i])
    }

    fn frame_discrepant(&self, u: usize) -> bool {
        let (a, b) = (self.frame_site(u, 0), self.frame_site(u, 1));
        self.state.env[0].value(a) != self.state.env[1].value(b)
    }

    fn recount(&mut self) {
        self.discrepant = (0..self.model.geometry().num_sites()).filter(|&u| self.frame_discrepant(u)).count();
    }

    /// Both copies are identical in the walker frame and always will be.
    pub fn is_coalesced(&self) -> bool {
        self.rates.same
            && self.discrepant == 0
            && self.state.x[0] - self.state.offset[0] == self.state.x[1] - self.state.offset[1]
    }

    /// `f(θ_{−X^i} η^i)` for both copies.
    pub fn observe(&self, f: &LocalFunction) -> [f64; 2] {
        [self.state.env[0].eval(f, self.state.x[0]), self.state.env[1].eval(f, self.state.x[1])]
    }

    fn flow(&mut self, to: f64) {
        if let Some(k) = self.model.flow_rate() {
            let c = (-k * (to - self.state.time)).exp();
            self.state.env[0].contract(c);
            self.state.env[1].contract(c);
        }
        self.state.time = to;
    }

    fn env_event(&mut self) {
        let n = self.model.geometry().num_sites();
        let u = self.rng.random_range(0..n);
        let draw = SiteDraw::sample(&mut self.rng);
        let before = self.frame_discrepant(u);
        let (sa, sb) = (self.frame_site(u, 0), self.frame_site(u, 1));
        let [a, b] = &mut self.state.env;
        crate::environments::coupled_ring(&self.model, a, b, sa, sb, draw);
        let after = self.frame_discrepant(u);
        match (before, after) {
            (true, false) => self.discrepant -= 1,
            (false, true) => self.discrepant += 1,
            _ => {}
        }
        if self.log.is_some() {
            let ev = self.event(EventKind::Env { frame_site: u, draw });
            if let Some(log) = &mut self.log {
                log.push(ev);
            }
        }
    }

    fn event(&self, kind: EventKind) -> CoupledEvent {
        CoupledEvent {
            time: self.state.time,
            kind,
            x: self.state.x,
            y_plus: self.state.y_plus,
            y_minus: self.state.y_minus,
        }
    }

    fn walker_event(&mut self) -> Result<()> {
        let pick = self.rng.random::<f64>() * self.rates.total;
        let k = self.rates.cumulative.partition_point(|&c| c <= pick).min(self.rates.jumps.len() - 1);
        let u: f64 = self.rng.random();
        let j = &self.rates.jumps[k];
        let mut accept = [false; 2];
        for (i, acc) in accept.iter_mut().enumerate() {
            if let Some(f) = &j.rates[i] {
                let a = self.state.env[i].eval(f, self.state.x[i]);
                if a > j.lambda * (1.0 + 1e-9) || a < 0.0 {
                    return Err(model_err(format!("rate {a} outside [0, λ = {}] for jump {:?}", j.lambda, j.z.0)));
                }
                *acc = u * j.lambda < a;
            }
        }
        let z = j.z;
        self.state.y_plus = self.state.y_plus + z.positive_part();
        self.state.y_minus = self.state.y_minus + z.negative_part();
        for i in 0..2 {
            if accept[i] {
                self.state.x[i] = self.state.x[i] + z;
            }
            let dx = self.state.x[i] - self.state.x0[i];
            if !(self.state.y_minus.le(&dx) && dx.le(&self.state.y_plus)) {
                return Err(model_err(format!("sandwich violated at t = {}", self.state.time)));
            }
        }
        if accept[0] != accept[1] {
            self.state.decouple_count += 1;
            self.state.tau.get_or_insert(self.state.time);
            if self.restart == RestartMode::RecoupleOnDecouple {
                self.state.offset = self.state.x;
                self.recount();
            }
        }
        if self.log.is_some() {
            let ev = self.event(EventKind::Walker { jump: z, u, accept });
            if let Some(log) = &mut self.log {
                log.push(ev);
            }
        }
        Ok(())
    }

    fn step(&mut self) -> Result<()> {
        if self.next_env <= self.next_walk {
            self.flow(self.next_env);
            self.env_event();
            self.next_env += exp_time(&mut self.rng, self.model.total_clock_rate());
        } else {
            self.flow(self.next_walk);
            self.walker_event()?;
            self.next_walk += exp_time(&mut self.rng, self.rates.total);
        }
        Ok(())
    }

    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        if t < self.state.time || t > self.horizon {
            return Err(crate::error::domain(format!("query time {t} outside [{}, {}]", self.state.time, self.horizon)));
        }
        while self.next_env.min(self.next_walk) <= t {
            self.step()?;
        }
        self.flow(t);
        Ok(())
    }

    /// Runs until the first discordant decision or `t`, whichever is first.
    pub fn advance_until_decoupled(&mut self, t: f64) -> Result<Option<f64>> {
        if t > self.horizon {
            return Err(crate::error::domain("target beyond horizon"));
        }
        while self.state.tau.is_none() && self.next_env.min(self.next_walk) <= t {
            self.step()?;
        }
        if self.state.tau.is_none() {
            self.flow(t);
        }
        Ok(self.state.tau)
    }

    /// Advances to `t`, adding `∫ f(θ_{−X^i_s} η^i_s) ds` of each copy into
    /// `acc`. With `stop_on_coalescence` the run halts early once the copies
    /// agree in the walker frame, in which case the returned time is earlier
    /// than `t` and the remaining integrand difference is exactly zero.
    pub fn advance_integrating(&mut self, t: f64, f: &LocalFunction, acc: &mut [f64; 2], stop_on_coalescence: bool) -> Result<f64> {
        if t < self.state.time || t > self.horizon {
            return Err(crate::error::domain("integration target outside horizon"));
        }
        loop {
            if stop_on_coalescence && self.is_coalesced() {
                return Ok(self.state.time);
            }
            let next = self.next_env.min(self.next_walk).min(t);
            self.integrate_segment(f, next, acc);
            if next >= t {
                self.flow(t);
                return Ok(t);
            }
            self.step()?;
        }
    }

    fn integrate_segment(&self, f: &LocalFunction, to: f64, acc: &mut [f64; 2]) {
        let dt = to - self.state.time;
        if dt <= 0.0 {
            return;
        }
        match self.model.flow_rate() {
            None => {
                let v = self.observe(f);
                acc[0] += v[0] * dt;
                acc[1] += v[1] * dt;
            }
            Some(k) => {
                for i in 0..2 {
                    let (st, x) = (&self.state.env[i], self.state.x[i]);
                    acc[i] += gauss_legendre(|s| st.eval_contracted(f, x, (-k * s).exp()), 0.0, dt, 1);
                }
            }
        }
    }
}
