use super::{LocalFunction, Point, SiteSpace};
use crate::error::{model, Result};
use serde::Serialize;

#[derive(Debug, Clone)]
pub struct Jump {
    pub z: Point,
    pub rate: LocalFunction,
    /// `λ_z = sup_η α(η, z)`.
    pub envelope: f64,
    pub triple: f64,
}

/// Jump rates `α(·, z)` of the walker with their envelopes.
#[derive(Debug, Clone)]
pub struct RateFamily {
    dim: usize,
    space: SiteSpace,
    jumps: Vec<Jump>,
    total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateNorms {
    pub p: f64,
    pub alpha_p: f64,
    pub triple_alpha: f64,
    pub triple_alpha_1: f64,
    pub alpha_0: f64,
    pub grid_step: Option<f64>,
}

impl RateFamily {
    pub fn new(dim: usize, space: SiteSpace, jumps: Vec<(Point, LocalFunction)>) -> Result<Self> {
        let mut out: Vec<Jump> = Vec::with_capacity(jumps.len());
        for (z, rate) in jumps {
            if z == Point::ORIGIN {
                return Err(model("jump z = 0 is not a move"));
            }
            if z.0.iter().skip(dim).any(|&c| c != 0) {
                return Err(model(format!("jump {:?} has coordinates beyond d = {dim}", z.0)));
            }
            if out.iter().any(|j| j.z == z) {
                return Err(model(format!("jump {:?} listed twice", z.0)));
            }
            let n = rate.norms(&space)?;
            if n.inf < 0.0 {
                return Err(model(format!("negative rate {} for jump {:?}", n.inf, z.0)));
            }
            out.push(Jump { z, envelope: n.sup, triple: n.triple, rate });
        }
        let total = out.iter().map(|j| j.envelope).sum();
        Ok(RateFamily { dim, space, jumps: out, total })
    }

    /// Environment-independent rates.
    pub fn constant(dim: usize, space: SiteSpace, rates: &[(Point, f64)]) -> Result<Self> {
        RateFamily::new(dim, space, rates.iter().map(|&(z, c)| (z, LocalFunction::constant(c))).collect())
    }

    /// `α(η, z) = base_z + slope_z · η(site_z)`.
    pub fn affine(dim: usize, space: SiteSpace, spec: &[(Point, f64, f64, Point)]) -> Result<Self> {
        RateFamily::new(
            dim,
            space,
            spec.iter().map(|&(z, b, s, site)| (z, LocalFunction::affine(b, s, site))).collect(),
        )
    }

    pub fn empty(dim: usize, space: SiteSpace) -> Self {
        RateFamily { dim, space, jumps: Vec::new(), total: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn space(&self) -> SiteSpace {
        self.space
    }

    pub fn jumps(&self) -> &[Jump] {
        &self.jumps
    }

    /// `Σ_z λ_z`.
    pub fn total_envelope(&self) -> f64 {
        self.total
    }

    pub fn rate_of(&self, z: Point) -> Option<&LocalFunction> {
        self.jumps.iter().find(|j| j.z == z).map(|j| &j.rate)
    }

    pub fn is_env_independent(&self) -> bool {
        self.jumps.iter().all(|j| j.triple == 0.0)
    }

    /// `γ⁺ = Σ_z λ_z max(z, 0)` per coordinate.
    pub fn gamma_plus(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.jumps.iter().map(|j| j.envelope * j.z.0[i].max(0) as f64).sum()).collect()
    }

    pub fn gamma_minus(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.jumps.iter().map(|j| j.envelope * j.z.0[i].min(0) as f64).sum()).collect()
    }

    /// `‖γ⁺ − γ⁻‖_∞`.
    pub fn gamma_spread(&self) -> f64 {
        self.gamma_plus().iter().zip(self.gamma_minus()).map(|(a, b)| a - b).fold(0.0, f64::max)
    }

    pub fn max_jump(&self) -> f64 {
        self.jumps.iter().map(|j| j.z.euclidean()).fold(0.0, f64::max)
    }

    /// `g(η) = Σ_z ⟨z, u⟩ α(η, z)`.
    pub fn drift(&self, u: &[f64]) -> LocalFunction {
        self.jumps.iter().fold(LocalFunction::constant(0.0), |acc, j| {
            let c = j.z.dot(u);
            if c == 0.0 {
                acc
            } else {
                acc.sum(&j.rate.scaled(c))
            }
        })
    }

    /// `‖α − α'‖_0 = Σ_z sup_η |α(η,z) − α'(η,z)|` over the union of jump sets.
    pub fn distance_0(&self, other: &RateFamily) -> Result<f64> {
        let mut zs: Vec<Point> = self.jumps.iter().map(|j| j.z).collect();
        for j in &other.jumps {
            if !zs.contains(&j.z) {
                zs.push(j.z);
            }
        }
        let zero = LocalFunction::constant(0.0);
        zs.iter()
            .map(|&z| {
                let a = self.rate_of(z).unwrap_or(&zero);
                let b = other.rate_of(z).unwrap_or(&zero);
                let (lo, hi) = a.combine(b, |x, y| x - y).range(&self.space)?;
                Ok(lo.abs().max(hi.abs()))
            })
            .sum()
    }

    /// `Σ_x sup Σ_z |α(η,z) − α(η^x,z)| / ρ` over single-site changes at `x`.
    pub fn joint_lipschitz_sum(&self) -> Result<f64> {
        let combined = self
            .jumps
            .iter()
            .map(|j| j.rate.clone())
            .reduce(|a, b| a.combine(&b, |x, y| x + y));
        let Some(combined) = combined else { return Ok(0.0) };
        let window = combined.window().to_vec();
        let grid = self.space.grid();
        let mut sites: Vec<Point> = Vec::new();
        for w in &window {
            if !sites.contains(w) {
                sites.push(*w);
            }
        }
        let mut total = 0.0;
        for &x in &sites {
            let slots: Vec<usize> = window.iter().enumerate().filter(|(_, w)| **w == x).map(|(i, _)| i).collect();
            let mut best = 0.0f64;
            combined.for_each_window_config(&self.space, |vals| {
                if vals[slots[0]] != grid[0] {
                    return Ok(());
                }
                let at = |a: f64| -> Vec<f64> {
                    let mut v = vals.to_vec();
                    slots.iter().for_each(|&s| v[s] = a);
                    v
                };
                for (i, &a) in grid.iter().enumerate() {
                    for &b in &grid[i + 1..] {
                        let va = at(a);
                        let vb = at(b);
                        let s: f64 = self
                            .jumps
                            .iter()
                            .map(|j| {
                                let pick = |v: &[f64]| -> Vec<f64> {
                                    j.rate.window().iter().map(|w| v[window.iter().position(|u| u == w).unwrap()]).collect()
                                };
                                (j.rate.eval_window(&pick(&va)) - j.rate.eval_window(&pick(&vb))).abs()
                            })
                            .sum();
                        best = best.max(s / self.space.rho(a, b));
                    }
                }
                Ok(())
            })?;
            total += best;
        }
        Ok(total)
    }
}

/// `‖α‖_p`, `|||α|||`, `|||α|||₁` and `‖α‖₀`, with Euclidean `‖z‖`.
pub fn rate_norms(alpha: &RateFamily, p: f64) -> Result<RateNorms> {
    if p < 1.0 {
        return Err(model("p must be at least 1"));
    }
    let js = alpha.jumps();
    Ok(RateNorms {
        p,
        alpha_p: js.iter().map(|j| j.z.euclidean().powf(p) * j.envelope).sum::<f64>().powf(1.0 / p),
        triple_alpha: js.iter().map(|j| j.triple).sum(),
        triple_alpha_1: js.iter().map(|j| j.z.euclidean() * j.triple).sum(),
        alpha_0: js.iter().map(|j| j.envelope).sum(),
        grid_step: alpha.space().grid_step(),
    })
}
