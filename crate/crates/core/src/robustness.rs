//! Monte-Carlo estimation of the random-noise robustness radius: the
//! smallest scaling `α` such that `label(x + αv) ≠ label(x)` with probability
//! at least `ε` over noise directions `v`.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{check_dim, check_finite, invalid, Error, Result};
use crate::models::Classifier;
use crate::noise::NoiseModel;
use crate::rng::substream;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// Default number of noise draws per probability estimate.
pub const DEFAULT_SAMPLES: usize = 10_000;

/// Maximum number of doublings of the upper search bound.
pub const MAX_DOUBLINGS: usize = 20;

/// 95% Wilson score interval for `successes` out of `n` trials.
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// A fixed set of `n` noise directions. Trial `i` is drawn from the
/// sub-stream `(seed, i)`, so the bank does not depend on how trials are
/// scheduled. Reusing one bank across `α` gives common random numbers.
#[derive(Debug, Clone)]
pub struct DirectionBank {
    dim: usize,
    draws: Vec<f64>,
}

impl DirectionBank {
    pub fn new(noise: &NoiseModel, dim: usize, n: usize, seed: u64) -> Result<Self> {
        if let Some(d) = noise.dim() {
            check_dim(d, dim)?;
        }
        if dim == 0 {
            return Err(invalid("dim", "must be at least 1"));
        }
        let mut draws = vec![0.0; n * dim];
        let fill = |(i, row): (usize, &mut [f64])| noise.sample_into(&mut substream(seed, i as u64), row);
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            draws.par_chunks_mut(dim).enumerate().try_for_each(fill)?;
        }
        #[cfg(not(feature = "parallel"))]
        draws.chunks_mut(dim).enumerate().try_for_each(fill)?;
        Ok(DirectionBank { dim, draws })
    }

    pub fn len(&self) -> usize {
        self.draws.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn direction(&self, i: usize) -> &[f64] {
        &self.draws[i * self.dim..(i + 1) * self.dim]
    }

    /// Number of directions with `label(x + αv) ≠ reference`.
    pub fn count_flips<M: Classifier + Sync + ?Sized>(
        &self,
        model: &M,
        x: &[f64],
        reference: usize,
        alpha: f64,
    ) -> Result<usize> {
        check_dim(self.dim, x.len())?;
        if alpha == 0.0 {
            return Ok(0);
        }
        let flipped = |v: &[f64]| -> Result<usize> {
            let z: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + alpha * b).collect();
            Ok(usize::from(model.label(&z)? != reference))
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            self.draws.par_chunks(self.dim).map(flipped).sum()
        }
        #[cfg(not(feature = "parallel"))]
        self.draws.chunks(self.dim).map(flipped).sum()
    }
}

/// A flip-probability estimate at one scaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlipEstimate {
    pub alpha: f64,
    pub p_hat: f64,
    pub ci: (f64, f64),
    pub n: usize,
}

impl FlipEstimate {
    fn new(alpha: f64, flips: usize, n: usize) -> Self {
        FlipEstimate {
            alpha,
            p_hat: if n == 0 { 0.0 } else { flips as f64 / n as f64 },
            ci: wilson_interval(flips, n),
            n,
        }
    }
}

/// Fraction of `n` noise draws `v` with `label(x + αv) ≠ label(x)`, and its
/// Wilson interval.
pub fn flip_probability<M: Classifier + Sync + ?Sized>(
    model: &M,
    x: &[f64],
    noise: &NoiseModel,
    alpha: f64,
    n: usize,
    seed: u64,
) -> Result<(f64, (f64, f64))> {
    check_dim(model.dim(), x.len())?;
    check_finite(x, "input")?;
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(invalid("alpha", "must be finite and non-negative"));
    }
    if n == 0 {
        return Err(invalid("n", "must be positive"));
    }
    let bank = DirectionBank::new(noise, x.len(), n, seed)?;
    let reference = model.label(x)?;
    let est = FlipEstimate::new(alpha, bank.count_flips(model, x, reference, alpha)?, n);
    Ok((est.p_hat, est.ci))
}

/// How the radius is located.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SearchMode {
    /// Bisection on `α`; sound when the flip probability is monotone in `α`
    /// (linear models).
    Bisection { alpha_lo: f64, alpha_hi: f64, tol: f64 },
    /// Linear scan of `[alpha_min, alpha_max]` followed by refinement of the
    /// bracketing cell.
    Grid {
        alpha_min: f64,
        alpha_max: f64,
        steps: usize,
        refine_rounds: usize,
    },
}

impl SearchMode {
    pub fn bisection(alpha_lo: f64, alpha_hi: f64) -> Self {
        SearchMode::Bisection {
            alpha_lo,
            alpha_hi,
            tol: 1e-3,
        }
    }

    pub fn grid(alpha_min: f64, alpha_max: f64) -> Self {
        SearchMode::Grid {
            alpha_min,
            alpha_max,
            steps: 50,
            refine_rounds: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessQuery {
    pub x: Vec<f64>,
    pub noise: NoiseModel,
    pub epsilon: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub search: SearchMode,
}

impl RobustnessQuery {
    pub fn validate(&self) -> Result<()> {
        check_finite(&self.x, "input")?;
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(invalid("epsilon", "must lie in (0, 1)"));
        }
        if self.n_samples < 100 {
            return Err(invalid("n_samples", "must be at least 100"));
        }
        match self.search {
            SearchMode::Bisection { alpha_lo, alpha_hi, tol } => {
                if !(alpha_lo > 0.0 && alpha_hi > alpha_lo && alpha_hi.is_finite()) {
                    return Err(invalid("alpha", "bounds must be positive and ordered"));
                }
                if !(tol > 0.0 && tol < 1.0) {
                    return Err(invalid("tol", "must lie in (0, 1)"));
                }
            }
            SearchMode::Grid {
                alpha_min,
                alpha_max,
                steps,
                ..
            } => {
                if !(alpha_min > 0.0 && alpha_max > alpha_min && alpha_max.is_finite()) {
                    return Err(invalid("alpha", "bounds must be positive and ordered"));
                }
                if steps < 2 {
                    return Err(invalid("steps", "must be at least 2"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub alpha: f64,
    pub p_hat: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessResult {
    /// `+∞` when `ε` was not reached within the doubling cap.
    pub radius: f64,
    pub p_hat_at_radius: f64,
    pub wilson_ci: (f64, f64),
    /// Every evaluated scaling, sorted by strictly increasing `α`.
    pub trace: Vec<TracePoint>,
}

impl RobustnessResult {
    pub fn is_finite(&self) -> bool {
        self.radius.is_finite()
    }
}

struct Search<'a, M: ?Sized> {
    model: &'a M,
    x: &'a [f64],
    reference: usize,
    bank: &'a DirectionBank,
    epsilon: f64,
    evaluated: Vec<FlipEstimate>,
}

impl<M: Classifier + Sync + ?Sized> Search<'_, M> {
    fn eval(&mut self, alpha: f64) -> Result<FlipEstimate> {
        if let Some(e) = self.evaluated.iter().find(|e| e.alpha == alpha) {
            return Ok(*e);
        }
        let flips = self.bank.count_flips(self.model, self.x, self.reference, alpha)?;
        let e = FlipEstimate::new(alpha, flips, self.bank.len());
        self.evaluated.push(e);
        Ok(e)
    }

    fn hits(&mut self, alpha: f64) -> Result<bool> {
        Ok(self.eval(alpha)?.p_hat >= self.epsilon)
    }

    fn finish(mut self, radius: Option<f64>) -> RobustnessResult {
        self.evaluated
            .sort_by(|a, b| a.alpha.partial_cmp(&b.alpha).unwrap_or(core::cmp::Ordering::Equal));
        let at = match radius {
            Some(r) => self.evaluated.iter().find(|e| e.alpha == r).copied(),
            None => self.evaluated.last().copied(),
        }
        .unwrap_or(FlipEstimate::new(0.0, 0, self.bank.len()));
        RobustnessResult {
            radius: radius.unwrap_or(f64::INFINITY),
            p_hat_at_radius: at.p_hat,
            wilson_ci: at.ci,
            trace: self
                .evaluated
                .iter()
                .map(|e| TracePoint {
                    alpha: e.alpha,
                    p_hat: e.p_hat,
                    n: e.n,
                })
                .collect(),
        }
    }

    fn bisection(mut self, lo: f64, hi: f64, tol: f64) -> Result<RobustnessResult> {
        if self.hits(lo)? {
            return Ok(self.finish(Some(lo)));
        }
        let (mut lo, mut hi) = (lo, hi);
        let mut doublings = 0;
        while !self.hits(hi)? {
            if doublings == MAX_DOUBLINGS {
                return Ok(self.finish(None));
            }
            lo = hi;
            hi *= 2.0;
            doublings += 1;
        }
        while hi - lo > tol * hi {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.hits(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(self.finish(Some(hi)))
    }

    /// First point of `lo + k·(hi − lo)/cells`, `k = 1..=cells`, that reaches `ε`,
    /// together with its predecessor.
    fn scan(&mut self, lo: f64, hi: f64, cells: usize) -> Result<Option<(f64, f64)>> {
        let mut prev = lo;
        for k in 1..=cells {
            let a = if k == cells { hi } else { lo + (hi - lo) * k as f64 / cells as f64 };
            if self.hits(a)? {
                return Ok(Some((prev, a)));
            }
            prev = a;
        }
        Ok(None)
    }

    fn grid(mut self, min: f64, max: f64, steps: usize, rounds: usize) -> Result<RobustnessResult> {
        let mut bracket = if self.hits(min)? {
            Some((0.0, min))
        } else {
            self.scan(min, max, steps - 1)?
        };
        let mut top = max;
        let mut doublings = 0;
        while bracket.is_none() {
            if doublings == MAX_DOUBLINGS {
                return Ok(self.finish(None));
            }
            bracket = self.scan(top, 2.0 * top, steps - 1)?;
            top *= 2.0;
            doublings += 1;
        }
        let (mut lo, mut hi) = bracket.unwrap_or((0.0, min));
        for _ in 0..rounds {
            if let Some((l, h)) = self.scan(lo, hi, 10)? {
                lo = l;
                hi = h;
            }
        }
        Ok(self.finish(Some(hi)))
    }
}

/// Estimates `r_{ν,ε}(x)` over non-negative scalings (both noise families are
/// symmetric, so negative `α` adds nothing).
pub fn robustness_radius<M: Classifier + Sync + ?Sized>(
    model: &M,
    query: &RobustnessQuery,
) -> Result<RobustnessResult> {
    query.validate()?;
    check_dim(model.dim(), query.x.len())?;
    let bank = DirectionBank::new(&query.noise, query.x.len(), query.n_samples, query.seed)?;
    radius_with_bank(model, &query.x, &bank, query.epsilon, query.search)
}

/// [`robustness_radius`] on a prepared bank, so that several `ε` or search
/// settings can share draws.
pub fn radius_with_bank<M: Classifier + Sync + ?Sized>(
    model: &M,
    x: &[f64],
    bank: &DirectionBank,
    epsilon: f64,
    search: SearchMode,
) -> Result<RobustnessResult> {
    check_dim(model.dim(), x.len())?;
    if bank.is_empty() {
        return Err(Error::Degenerate("empty direction bank"));
    }
    let reference = model.label(x)?;
    let state = Search {
        model,
        x,
        reference,
        bank,
        epsilon,
        evaluated: Vec::new(),
    };
    match search {
        SearchMode::Bisection { alpha_lo, alpha_hi, tol } => state.bisection(alpha_lo, alpha_hi, tol),
        SearchMode::Grid {
            alpha_min,
            alpha_max,
            steps,
            refine_rounds,
        } => state.grid(alpha_min, alpha_max, steps.max(2), refine_rounds),
    }
}
