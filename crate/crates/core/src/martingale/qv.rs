use super::generator::{centered_moment, precondition_ladder, LadderOptions};
use super::provider::{Obs, SemigroupProvider};
use crate::ctmc::{enumerate_paths, FiniteChain};
use crate::error::{domain, Error, Result};
use crate::grid::gauss_legendre_nodes;

/// Piecewise-constant path: `(jump time, new state)` with the start at time 0.
pub type JumpPath<S> = [(f64, S)];

fn state_at<S>(path: &JumpPath<S>, t: f64) -> &S {
    let i = path.partition_point(|(s, _)| *s <= t);
    &path[i.saturating_sub(1)].1
}

/// `M(t) = P_{T−t} f(Y_t) − P_T f(Y_0)`.
pub struct BackwardsMartingale<'a, P: SemigroupProvider> {
    provider: &'a P,
    f: Obs<P::State>,
    horizon: f64,
}

impl<'a, P: SemigroupProvider> BackwardsMartingale<'a, P> {
    pub fn new(provider: &'a P, f: Obs<P::State>, horizon: f64) -> Result<Self> {
        if !(horizon >= 0.0) {
            return Err(domain("horizon must be non-negative"));
        }
        Ok(BackwardsMartingale { provider, f, horizon })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn value(&self, t: f64, y: &P::State, y0: &P::State) -> Result<f64> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(domain(format!("time {t} outside [0, {}]", self.horizon)));
        }
        let a = self.provider.semigroup(self.horizon - t, &self.f)?;
        let b = self.provider.semigroup(self.horizon, &self.f)?;
        Ok(a(y) - b(y0))
    }

    pub fn along_path(&self, path: &JumpPath<P::State>, times: &[f64]) -> Result<Vec<f64>> {
        let y0 = &path[0].1;
        times.iter().map(|&t| self.value(t, state_at(path, t), y0)).collect()
    }

    /// Rate of the predictable quadratic variation at time `s` in state `y`:
    /// `Ā (P_{T−s} f − P_{T−s} f(y))² (y)`.
    pub fn qv_rate(&self, s: f64, y: &P::State, opts: &LadderOptions) -> Result<f64> {
        let g = self.provider.semigroup(self.horizon - s, &self.f)?;
        centered_moment(self.provider, &g, y, 2, opts)
    }

    /// `⟨M⟩_t` at each of `times` along a jump path, by Gauss–Legendre on
    /// every stretch between jumps. Refuses when the short-time condition
    /// fails at the path's start.
    pub fn predictable_qv(&self, path: &JumpPath<P::State>, times: &[f64], opts: &LadderOptions) -> Result<Vec<f64>> {
        for frac in [0.25, 0.5, 1.0] {
            let t = frac * self.horizon;
            if t > 0.0 {
                let pl = precondition_ladder(self.provider, &self.f, t, &path[0].1, 2, opts)?;
                if !pl.holds {
                    return Err(Error::Refused(format!("short-time condition fails at t = {t}: ladder {:?}", pl.values)));
                }
            }
        }
        let mut cuts: Vec<f64> = path.iter().map(|p| p.0).chain(times.iter().cloned()).filter(|&t| t <= self.horizon).collect();
        cuts.push(0.0);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut cum = vec![0.0];
        for w in cuts.windows(2) {
            let y = state_at(path, w[0]);
            let mut piece = 0.0;
            for (s, wt) in gauss_legendre_nodes(w[0], w[1], 1) {
                piece += wt * self.qv_rate(s, y, opts)?;
            }
            cum.push(cum.last().unwrap() + piece);
        }
        Ok(times
            .iter()
            .map(|&t| {
                let i = cuts.partition_point(|&c| c < t);
                cum[i.min(cum.len() - 1)]
            })
            .collect())
    }
}

/// `Γ_u(y) = Σ_z Q(y,z)(P_u f(z) − P_u f(y))²` for every state.
pub fn carre_du_champ(chain: &FiniteChain, f: &[f64], u: f64) -> Result<Vec<f64>> {
    let g = chain.semigroup(u, f)?;
    Ok((0..chain.n()).map(|y| (0..chain.n()).filter(|&z| z != y).map(|z| chain.rate(y, z) * (g[z] - g[y]).powi(2)).sum()).collect())
}

/// `E_x ⟨M⟩_T = ∫_0^T P_s Γ_{T−s}(x) ds` for a finite chain.
pub fn expected_qv(chain: &FiniteChain, f: &[f64], x: usize, horizon: f64, panels: usize) -> Result<f64> {
    gauss_legendre_nodes(0.0, horizon, panels).into_iter().try_fold(0.0, |acc, (s, w)| {
        let gamma = carre_du_champ(chain, f, horizon - s)?;
        Ok(acc + w * chain.semigroup(s, &gamma)?[x])
    })
}

/// `E[M(t+s) | Y_t = y] − M(t)` summed exactly over the uniformized event
/// sequences of `[t, t+s]`; returns `(lower, upper)` of the enclosure.
pub fn martingale_defect(chain: &FiniteChain, f: &[f64], horizon: f64, t: f64, s: f64, y: usize, n_max: usize) -> Result<(f64, f64)> {
    if t + s > horizon {
        return Err(domain("t + s exceeds the horizon"));
    }
    let later = chain.semigroup(horizon - t - s, f)?;
    let now = chain.semigroup(horizon - t, f)?[y];
    let sup = later.iter().map(|v| (v - now).abs()).fold(0.0, f64::max);
    let ps = enumerate_paths(chain, y, s, n_max)?;
    Ok(ps.expect(|p| later[*p.states.last().unwrap()] - now, sup))
}
