use crate::error::{model, Result};
use crate::lattice::{Configuration, LocalFunction, Point, SiteSpace, TorusGeometry};
use crate::rng::SimRng;
use rand::Rng;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum RefreshLaw {
    Bernoulli(f64),
    Uniform,
}

impl RefreshLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            RefreshLaw::Bernoulli(p) => p,
            RefreshLaw::Uniform => 0.5,
        }
    }

    /// Inverse-CDF draw from a single uniform.
    #[inline]
    pub fn quantile(&self, u: f64) -> f64 {
        match *self {
            RefreshLaw::Bernoulli(p) => {
                if u < p {
                    1.0
                } else {
                    0.0
                }
            }
            RefreshLaw::Uniform => u,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum EnvironmentKind {
    IndependentRefresh { rate: f64, law: RefreshLaw },
    /// Heat-bath spin dynamics: spin at `x` flips at rate
    /// `r·exp(−β σ_x Σ_{y∼x} σ_y)` with `σ = 2η − 1`.
    WeakGlauber { rate: f64, beta: f64 },
    DeterministicRelaxation { kappa: f64, fixed_point: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvironmentModel {
    kind: EnvironmentKind,
    geometry: TorusGeometry,
}

/// The two uniforms attached to one clock ring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SiteDraw {
    pub u: f64,
    pub v: f64,
}

impl SiteDraw {
    pub fn sample(rng: &mut SimRng) -> Self {
        SiteDraw { u: rng.random(), v: rng.random() }
    }
}

/// One environment copy. Jump models store site values directly; the
/// relaxation flow stores the initial values plus a global contraction
/// factor `e^{−κt}` so that reads are exact at any time.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    base: Configuration,
    factor: f64,
    fixed_point: f64,
}

impl EnvState {
    pub fn new(config: Configuration, fixed_point: f64) -> Self {
        EnvState { base: config, factor: 1.0, fixed_point }
    }

    #[inline]
    pub fn value(&self, site: usize) -> f64 {
        let b = self.base.values()[site];
        if self.factor == 1.0 {
            b
        } else {
            self.fixed_point + self.factor * (b - self.fixed_point)
        }
    }

    #[inline]
    pub fn value_at(&self, p: Point) -> f64 {
        self.value(self.base.geometry().site(p))
    }

    #[inline]
    pub(crate) fn set(&mut self, site: usize, v: f64) {
        debug_assert!(self.factor == 1.0);
        self.base.values_mut()[site] = v;
    }

    pub(crate) fn contract(&mut self, by: f64) {
        self.factor *= by;
    }

    pub fn geometry(&self) -> TorusGeometry {
        self.base.geometry()
    }

    /// `f(θ_{−x} η)`.
    #[inline]
    pub fn eval(&self, f: &LocalFunction, x: Point) -> f64 {
        f.eval_with(x, |p| self.value_at(p))
    }

    /// `f(θ_{−x} η)` after a further contraction of the flow by `extra`.
    #[inline]
    pub fn eval_contracted(&self, f: &LocalFunction, x: Point, extra: f64) -> f64 {
        let g = self.geometry();
        let c = self.factor * extra;
        f.eval_with(x, |p| {
            let b = self.base.values()[g.site(p)];
            self.fixed_point + c * (b - self.fixed_point)
        })
    }

    pub fn snapshot(&self) -> Configuration {
        let g = self.geometry();
        Configuration::from_fn(g, |s| self.value(s))
    }
}

impl EnvironmentModel {
    pub fn new(kind: EnvironmentKind, geometry: TorusGeometry) -> Result<Self> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        match kind {
            EnvironmentKind::IndependentRefresh { rate, law } => {
                if !ok(rate) {
                    return Err(model("refresh rate must be positive"));
                }
                if let RefreshLaw::Bernoulli(p) = law {
                    if !(0.0..=1.0).contains(&p) {
                        return Err(model("Bernoulli parameter must lie in [0,1]"));
                    }
                }
            }
            EnvironmentKind::WeakGlauber { rate, beta } => {
                if !ok(rate) {
                    return Err(model("spin-flip rate must be positive"));
                }
                if !(beta.is_finite() && beta >= 0.0) {
                    return Err(model("interaction strength must be non-negative"));
                }
            }
            EnvironmentKind::DeterministicRelaxation { kappa, fixed_point } => {
                if !ok(kappa) {
                    return Err(model("relaxation rate must be positive"));
                }
                if !(0.0..=1.0).contains(&fixed_point) {
                    return Err(model("fixed point must lie in [0,1]"));
                }
            }
        }
        Ok(EnvironmentModel { kind, geometry })
    }

    pub fn kind(&self) -> EnvironmentKind {
        self.kind
    }

    pub fn geometry(&self) -> TorusGeometry {
        self.geometry
    }

    pub fn with_geometry(&self, geometry: TorusGeometry) -> Self {
        EnvironmentModel { kind: self.kind, geometry }
    }

    pub fn space(&self) -> SiteSpace {
        match self.kind {
            EnvironmentKind::IndependentRefresh { law: RefreshLaw::Bernoulli(_), .. } => SiteSpace::Binary,
            EnvironmentKind::IndependentRefresh { law: RefreshLaw::Uniform, .. } => SiteSpace::unit_interval(),
            EnvironmentKind::WeakGlauber { .. } => SiteSpace::Binary,
            EnvironmentKind::DeterministicRelaxation { .. } => SiteSpace::unit_interval(),
        }
    }

    /// Clock rate of a single site (0 for the deterministic flow).
    pub fn site_clock_rate(&self) -> f64 {
        match self.kind {
            EnvironmentKind::IndependentRefresh { rate, .. } => rate,
            EnvironmentKind::WeakGlauber { rate, beta } => {
                2.0 * rate * (2.0 * self.geometry.dim() as f64 * beta).cosh()
            }
            EnvironmentKind::DeterministicRelaxation { .. } => 0.0,
        }
    }

    pub fn total_clock_rate(&self) -> f64 {
        self.site_clock_rate() * self.geometry.num_sites() as f64
    }

    pub fn flow_rate(&self) -> Option<f64> {
        match self.kind {
            EnvironmentKind::DeterministicRelaxation { kappa, .. } => Some(kappa),
            _ => None,
        }
    }

    pub fn fixed_point(&self) -> f64 {
        match self.kind {
            EnvironmentKind::DeterministicRelaxation { fixed_point, .. } => fixed_point,
            _ => 0.0,
        }
    }

    pub fn state(&self, config: Configuration) -> Result<EnvState> {
        if config.geometry() != self.geometry {
            return Err(model("configuration geometry does not match the model"));
        }
        let sp = self.space();
        if let Some(v) = config.values().iter().find(|v| !sp.contains(**v)) {
            return Err(model(format!("site value {v} outside the single-site space")));
        }
        Ok(EnvState::new(config, self.fixed_point()))
    }

    /// Closed-form single-site coupling decay `sup E ρ(η¹_t(0), η²_t(0))`, when known.
    pub fn closed_form_decay_rate(&self) -> Option<f64> {
        match self.kind {
            EnvironmentKind::IndependentRefresh { rate, .. } => Some(rate),
            EnvironmentKind::WeakGlauber { rate, beta } if beta == 0.0 => Some(2.0 * rate),
            EnvironmentKind::DeterministicRelaxation { kappa, .. } => Some(kappa),
            _ => None,
        }
    }

    /// Initial configurations: i.i.d. from ν for refresh models, fair spins
    /// for Glauber, uniform values for the relaxation flow.
    pub fn sample_initial(&self, rng: &mut SimRng) -> Configuration {
        let law = match self.kind {
            EnvironmentKind::IndependentRefresh { law, .. } => law,
            EnvironmentKind::WeakGlauber { .. } => RefreshLaw::Bernoulli(0.5),
            EnvironmentKind::DeterministicRelaxation { .. } => RefreshLaw::Uniform,
        };
        Configuration::from_fn(self.geometry, |_| law.quantile(rng.random()))
    }

    /// Whether the sampled initial law is already stationary.
    pub fn initial_is_stationary(&self) -> bool {
        match self.kind {
            EnvironmentKind::IndependentRefresh { .. } => true,
            EnvironmentKind::WeakGlauber { beta, .. } => beta == 0.0,
            EnvironmentKind::DeterministicRelaxation { .. } => false,
        }
    }

    /// New value of `site` after a ring with draw `d`, or `None` when the
    /// ring leaves it unchanged.
    #[inline]
    pub fn update(&self, state: &EnvState, site: usize, d: SiteDraw) -> Option<f64> {
        match self.kind {
            EnvironmentKind::IndependentRefresh { law, .. } => Some(law.quantile(d.u)),
            EnvironmentKind::WeakGlauber { beta, .. } => {
                let h: f64 = self.geometry.neighbors(site).map(|y| 2.0 * state.value(y) - 1.0).sum();
                let dd = 2.0 * self.geometry.dim() as f64;
                if d.u < (beta * h).cosh() / (beta * dd).cosh() {
                    let p_up = (beta * h).exp() / (2.0 * (beta * h).cosh());
                    Some(if d.v < p_up { 1.0 } else { 0.0 })
                } else {
                    None
                }
            }
            EnvironmentKind::DeterministicRelaxation { .. } => None,
        }
    }

    /// Exact `μ^E(f)` for product stationary laws, Monte Carlo otherwise.
    pub fn stationary_expectation(&self, f: &LocalFunction, rng: &mut SimRng, samples: usize) -> Result<f64> {
        match self.kind {
            EnvironmentKind::IndependentRefresh { law: RefreshLaw::Bernoulli(p), .. } => {
                let mut acc = 0.0;
                f.for_each_window_config(&SiteSpace::Binary, |v| {
                    let w: f64 = v.iter().map(|&b| if b == 1.0 { p } else { 1.0 - p }).product();
                    acc += w * f.eval_window(v);
                    Ok(())
                })?;
                Ok(acc)
            }
            EnvironmentKind::DeterministicRelaxation { fixed_point, .. } => {
                Ok(f.eval_window(&vec![fixed_point; f.window().len()]))
            }
            EnvironmentKind::WeakGlauber { beta, .. } if beta == 0.0 => {
                let mut acc = 0.0;
                f.for_each_window_config(&SiteSpace::Binary, |v| {
                    acc += 0.5f64.powi(v.len() as i32) * f.eval_window(v);
                    Ok(())
                })?;
                Ok(acc)
            }
            _ => {
                let mut acc = 0.0;
                for _ in 0..samples {
                    let mut traj = super::simulate_env(self, self.sample_initial(rng), 20.0, rng.random())?;
                    traj.advance_to(20.0)?;
                    acc += traj.state().eval(f, Point::ORIGIN);
                }
                Ok(acc / samples.max(1) as f64)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn glauber_flip_rates_match_definition() {
        // Rate of actually flipping = clock · P(update) · P(new ≠ old).
        let g = TorusGeometry::new(1, 5).unwrap();
        let (r, beta) = (0.7, 0.3);
        let m = EnvironmentModel::new(EnvironmentKind::WeakGlauber { rate: r, beta }, g).unwrap();
        for neigh in [(0.0, 0.0), (0.0, 1.0), (1.0, 1.0)] {
            for own in [0.0, 1.0] {
                let cfg = Configuration::from_values(g, vec![own, neigh.0, 0.0, 0.0, neigh.1]).unwrap();
                let st = EnvState::new(cfg, 0.0);
                let h = (2.0 * neigh.0 - 1.0) + (2.0 * neigh.1 - 1.0);
                let sx = 2.0 * own - 1.0;
                let expect = r * (-beta * sx * h).exp();
                // integrate over the draw square on a fine grid
                let n = 400;
                let mut flips = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        let d = SiteDraw { u: (i as f64 + 0.5) / n as f64, v: (j as f64 + 0.5) / n as f64 };
                        if let Some(v) = m.update(&st, 0, d) {
                            if v != own {
                                flips += 1.0;
                            }
                        }
                    }
                }
                let rate = m.site_clock_rate() * flips / (n * n) as f64;
                assert!((rate - expect).abs() < 2e-2 * expect.max(0.1), "{rate} vs {expect}");
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let g = TorusGeometry::new(1, 4).unwrap();
        assert!(EnvironmentModel::new(EnvironmentKind::IndependentRefresh { rate: 0.0, law: RefreshLaw::Uniform }, g).is_err());
        assert!(EnvironmentModel::new(EnvironmentKind::WeakGlauber { rate: 1.0, beta: -0.1 }, g).is_err());
        assert!(EnvironmentModel::new(EnvironmentKind::DeterministicRelaxation { kappa: -1.0, fixed_point: 0.0 }, g).is_err());
    }
}
