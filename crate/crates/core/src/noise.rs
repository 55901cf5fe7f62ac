//! Noise direction samplers: uniform on the unit ℓp ball and centered
//! Gaussian with arbitrary PSD covariance.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};

use crate::covariance::CovarianceSpec;
use crate::error::{check_finite, invalid, Error, Result};
use crate::norm::Exponent;

/// Distribution `ν` of the noise direction `v`.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseModel {
    /// Uniform on `{‖v‖_p ≤ 1}`.
    Lp(Exponent),
    /// `N(0, Σ)`.
    Gaussian(Arc<CovarianceSpec>),
}

impl NoiseModel {
    pub fn gaussian(sigma: CovarianceSpec) -> Self {
        NoiseModel::Gaussian(Arc::new(sigma))
    }

    /// Fills `out` with one draw.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) -> Result<()> {
        match self {
            NoiseModel::Lp(p) => sample_lp_ball_into(*p, rng, out),
            NoiseModel::Gaussian(sigma) => {
                if sigma.dim() != out.len() {
                    return Err(Error::DimensionMismatch {
                        expected: sigma.dim(),
                        got: out.len(),
                    });
                }
                sample_gaussian_into(sigma, rng, out);
                Ok(())
            }
        }
    }

    /// Dimension fixed by the model, if any.
    pub fn dim(&self) -> Option<usize> {
        match self {
            NoiseModel::Lp(_) => None,
            NoiseModel::Gaussian(s) => Some(s.dim()),
        }
    }
}

/// Uniform draw from the unit ℓp ball of `R^d`.
///
/// Finite `p`: `gᵢ` has density `∝ exp(−|t|^p)` (built as `±Γ(1/p)^{1/p}`),
/// `Z ~ Exp(1)`, and `v = g / (Σ|gᵢ|^p + Z)^{1/p}` is exactly uniform on the
/// ball. `p = ∞` draws each coordinate uniformly on `[−1, 1]`.
pub fn sample_lp_ball<R: Rng + ?Sized>(p: Exponent, d: usize, rng: &mut R) -> Result<Vec<f64>> {
    let mut v = vec![0.0; d];
    sample_lp_ball_into(p, rng, &mut v)?;
    Ok(v)
}

pub fn sample_lp_ball_into<R: Rng + ?Sized>(p: Exponent, rng: &mut R, out: &mut [f64]) -> Result<()> {
    if out.is_empty() {
        return Err(invalid("d", "dimension must be at least 1"));
    }
    match p {
        Exponent::Infinity => {
            out.iter_mut().for_each(|v| *v = rng.random_range(-1.0..=1.0));
        }
        Exponent::Finite(p) => {
            if !(p >= 1.0) || !p.is_finite() {
                return Err(invalid("p", "must satisfy p >= 1"));
            }
            let shape = 1.0 / p;
            let gamma = Gamma::new(shape, 1.0).map_err(|_| invalid("p", "bad gamma shape"))?;
            let mut total = 0.0;
            for v in out.iter_mut() {
                let g: f64 = gamma.sample(rng);
                total += g;
                let magnitude = if p == 1.0 { g } else { g.powf(shape) };
                *v = if rng.random::<bool>() { magnitude } else { -magnitude };
            }
            let z: f64 = Exp1.sample(rng);
            let scale = (total + z).powf(shape);
            out.iter_mut().for_each(|v| *v /= scale);
        }
    }
    Ok(())
}

/// `√Σ · z` with `z` standard normal.
pub fn sample_gaussian<R: Rng + ?Sized>(sigma: &CovarianceSpec, rng: &mut R) -> Vec<f64> {
    let mut v = vec![0.0; sigma.dim()];
    sample_gaussian_into(sigma, rng, &mut v);
    v
}

fn sample_gaussian_into<R: Rng + ?Sized>(sigma: &CovarianceSpec, rng: &mut R, out: &mut [f64]) {
    let z: Vec<f64> = (0..sigma.dim()).map(|_| StandardNormal.sample(rng)).collect();
    sigma.apply_root(&z, out);
}

/// A signal-dependent covariance and the whiteness of the signal that built it.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalDependentNoise {
    pub sigma: CovarianceSpec,
    /// `W(x) = Σᵢ 1{xᵢ ≥ t}·xᵢ`.
    pub whiteness: f64,
}

/// Diagonal `Σ(x)` with `Σᵢᵢ ∝ 1{xᵢ ≥ t}·xᵢ`, normalized to unit trace.
pub fn signal_dependent_sigma(x: &[f64], threshold: f64) -> Result<SignalDependentNoise> {
    check_finite(x, "signal")?;
    let diag: Vec<f64> = x
        .iter()
        .map(|&v| if v >= threshold && v > 0.0 { v } else { 0.0 })
        .collect();
    let whiteness: f64 = x.iter().filter(|&&v| v >= threshold).sum();
    let mass: f64 = diag.iter().sum();
    if !(mass > 0.0) {
        return Err(Error::EmptySupport);
    }
    let sigma = CovarianceSpec::from_diagonal(diag.iter().map(|v| v / mass).collect())?;
    Ok(SignalDependentNoise { sigma, whiteness })
}
