use super::{Configuration, Point, SiteSpace};
use crate::error::{Error, Result};
use serde::Serialize;
use smallvec::SmallVec;
use std::fmt;
use std::sync::Arc;

type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Largest number of window evaluations a grid supremum may take.
const ENUMERATION_BUDGET: f64 = 5e7;

/// A function of the configuration that reads a finite window of sites
/// around the origin.
#[derive(Clone)]
pub struct LocalFunction {
    window: Vec<Point>,
    eval: Evaluator,
    label: String,
}

impl fmt::Debug for LocalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LocalFunction").field("label", &self.label).field("window", &self.window).finish()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FunctionNorms {
    pub lipschitz: Vec<(Point, f64)>,
    pub triple: f64,
    pub osc: f64,
    pub sup: f64,
    pub inf: f64,
    pub grid_step: Option<f64>,
}

impl LocalFunction {
    /// `eval` receives the site values at `window`, in order.
    pub fn new(window: Vec<Point>, label: impl Into<String>, eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        LocalFunction { window, eval: Arc::new(eval), label: label.into() }
    }

    pub fn constant(c: f64) -> Self {
        LocalFunction::new(Vec::new(), format!("constant({c})"), move |_| c)
    }

    pub fn projection(site: Point) -> Self {
        LocalFunction::new(vec![site], format!("projection({:?})", site.0), |v| v[0])
    }

    pub fn product(sites: &[Point]) -> Self {
        LocalFunction::new(sites.to_vec(), format!("product({} sites)", sites.len()), |v| v.iter().product())
    }

    /// `base + slope · η(site)`.
    pub fn affine(base: f64, slope: f64, site: Point) -> Self {
        LocalFunction::new(vec![site], format!("affine({base}, {slope}, {:?})", site.0), move |v| base + slope * v[0])
    }

    /// `c + Σ coeff_i η(site_i)`.
    pub fn linear(c: f64, terms: &[(Point, f64)]) -> Self {
        let coeffs: Vec<f64> = terms.iter().map(|t| t.1).collect();
        LocalFunction::new(terms.iter().map(|t| t.0).collect(), "linear", move |v| {
            c + v.iter().zip(&coeffs).map(|(a, b)| a * b).sum::<f64>()
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn window(&self) -> &[Point] {
        &self.window
    }

    #[inline]
    pub fn eval_window(&self, vals: &[f64]) -> f64 {
        (self.eval)(vals)
    }

    /// `f(θ_{−x} η)`: the function read from the point of view of `x`.
    #[inline]
    pub fn eval_at(&self, eta: &Configuration, x: Point) -> f64 {
        let vals: SmallVec<[f64; 16]> = self.window.iter().map(|&w| eta.at(x + w)).collect();
        (self.eval)(&vals)
    }

    /// Same as `eval_at`, with site values supplied by a closure.
    #[inline]
    pub fn eval_with(&self, x: Point, mut value: impl FnMut(Point) -> f64) -> f64 {
        let vals: SmallVec<[f64; 16]> = self.window.iter().map(|&w| value(x + w)).collect();
        (self.eval)(&vals)
    }

    /// `f ∘ θ_x`.
    pub fn shifted(&self, x: Point) -> Self {
        LocalFunction {
            window: self.window.iter().map(|&w| w + x).collect(),
            eval: self.eval.clone(),
            label: format!("{}∘θ{:?}", self.label, x.0),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        let f = self.eval.clone();
        LocalFunction { window: self.window.clone(), eval: Arc::new(move |v| c * f(v)), label: format!("{c}·{}", self.label) }
    }

    /// Pointwise combination `op(f, g)` on the union of the two windows.
    pub fn combine(&self, other: &LocalFunction, op: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        let mut window = self.window.clone();
        for w in &other.window {
            if !window.contains(w) {
                window.push(*w);
            }
        }
        let ia: Vec<usize> = self.window.iter().map(|w| window.iter().position(|u| u == w).unwrap()).collect();
        let ib: Vec<usize> = other.window.iter().map(|w| window.iter().position(|u| u == w).unwrap()).collect();
        let (fa, fb) = (self.eval.clone(), other.eval.clone());
        LocalFunction {
            window,
            eval: Arc::new(move |v| {
                let a: SmallVec<[f64; 16]> = ia.iter().map(|&i| v[i]).collect();
                let b: SmallVec<[f64; 16]> = ib.iter().map(|&i| v[i]).collect();
                op(fa(&a), fb(&b))
            }),
            label: format!("({} ∘ {})", self.label, other.label),
        }
    }

    pub fn sum(&self, other: &LocalFunction) -> Self {
        self.combine(other, |a, b| a + b)
    }

    fn checked(&self, vals: &[f64]) -> Result<f64> {
        let v = (self.eval)(vals);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Evaluation(format!("{} returned {v} at {vals:?}", self.label)))
        }
    }

    /// Calls `visit` on every window configuration drawn from the space's grid.
    pub(crate) fn for_each_window_config(
        &self,
        space: &SiteSpace,
        mut visit: impl FnMut(&[f64]) -> Result<()>,
    ) -> Result<()> {
        let grid = space.grid();
        let k = self.window.len();
        if (grid.len() as f64).powi(k as i32 + 1) > ENUMERATION_BUDGET {
            return Err(Error::Refused(format!("window of {k} sites too large for grid enumeration")));
        }
        let mut idx = vec![0usize; k];
        let mut vals: Vec<f64> = vec![grid[0]; k];
        loop {
            visit(&vals)?;
            let mut i = 0;
            loop {
                if i == k {
                    return Ok(());
                }
                idx[i] += 1;
                if idx[i] < grid.len() {
                    vals[i] = grid[idx[i]];
                    break;
                }
                idx[i] = 0;
                vals[i] = grid[0];
                i += 1;
            }
        }
    }

    /// `δ_f(x)`: sup of `|f(η) − f(ξ)| / ρ(η(x), ξ(x))` over pairs that differ
    /// only at `x`.
    pub fn lipschitz_constant(&self, space: &SiteSpace, x: Point) -> Result<f64> {
        let positions: Vec<usize> = self.window.iter().enumerate().filter(|(_, w)| **w == x).map(|(i, _)| i).collect();
        if positions.is_empty() {
            return Ok(0.0);
        }
        let grid = space.grid();
        let mut best = 0.0f64;
        let mut scratch = vec![0.0; self.window.len()];
        self.for_each_window_config(space, |vals| {
            // Only visit each "rest of the window" once: require the x-slot at its first grid value.
            if vals[positions[0]] != grid[0] {
                return Ok(());
            }
            scratch.copy_from_slice(vals);
            let fa: Vec<f64> = grid
                .iter()
                .map(|&a| {
                    positions.iter().for_each(|&p| scratch[p] = a);
                    self.checked(&scratch)
                })
                .collect::<Result<_>>()?;
            for i in 0..grid.len() {
                for j in i + 1..grid.len() {
                    let r = space.rho(grid[i], grid[j]);
                    if r > 0.0 {
                        best = best.max((fa[i] - fa[j]).abs() / r);
                    }
                }
            }
            Ok(())
        })?;
        Ok(best)
    }

    pub fn range(&self, space: &SiteSpace) -> Result<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        self.for_each_window_config(space, |vals| {
            let v = self.checked(vals)?;
            lo = lo.min(v);
            hi = hi.max(v);
            Ok(())
        })?;
        Ok((lo, hi))
    }

    pub fn osc(&self, space: &SiteSpace) -> Result<f64> {
        let (lo, hi) = self.range(space)?;
        Ok(hi - lo)
    }

    pub fn triple_norm(&self, space: &SiteSpace) -> Result<f64> {
        Ok(self.norms(space)?.triple)
    }

    pub fn norms(&self, space: &SiteSpace) -> Result<FunctionNorms> {
        let mut sites: Vec<Point> = Vec::new();
        for w in &self.window {
            if !sites.contains(w) {
                sites.push(*w);
            }
        }
        let lipschitz: Vec<(Point, f64)> =
            sites.iter().map(|&x| Ok((x, self.lipschitz_constant(space, x)?))).collect::<Result<_>>()?;
        let (inf, sup) = self.range(space)?;
        Ok(FunctionNorms {
            triple: lipschitz.iter().map(|p| p.1).sum(),
            lipschitz,
            osc: sup - inf,
            sup,
            inf,
            grid_step: space.grid_step(),
        })
    }
}
