//! Closed-form bounds on the robustness radius, the asymptotic point estimate,
//! the quantization predictor, and calibration of their constants.

use core::f64::consts::{E, PI, SQRT_2};

#[allow(unused_imports)]
use num_traits::Float;

use crate::covariance::CovarianceSpec;
use crate::error::{check_finite, invalid, Error, Result};
use crate::geometry::multiclass_linear_min_perturbation;
use crate::models::{Classifier, MulticlassLinearModel};
use crate::norm::{l2_norm, Exponent};

/// Default estimate constant.
pub const DEFAULT_ZETA0: f64 = 0.72;

/// Constants of the ℓp bounds: the moment constants `C₀, c₀` and the estimate
/// constant `ζ₀`. Everything else is derived: `C = 1/(√2·C₀)`, `c = c₀²`,
/// `c′ = 512·C₀⁴`, `ε₀ = c²/c′`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundConstants {
    #[cfg_attr(feature = "serde", serde(rename = "C0"))]
    pub big_c0: f64,
    #[cfg_attr(feature = "serde", serde(rename = "c0"))]
    pub small_c0: f64,
    #[cfg_attr(feature = "serde", serde(default = "default_zeta0"))]
    pub zeta0: f64,
}

#[cfg(feature = "serde")]
fn default_zeta0() -> f64 {
    DEFAULT_ZETA0
}

impl Default for BoundConstants {
    fn default() -> Self {
        BoundConstants {
            big_c0: 1.0,
            small_c0: 1.0,
            zeta0: DEFAULT_ZETA0,
        }
    }
}

impl BoundConstants {
    pub fn new(big_c0: f64, small_c0: f64, zeta0: f64) -> Result<Self> {
        let k = BoundConstants {
            big_c0,
            small_c0,
            zeta0,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("C0", self.big_c0), ("c0", self.small_c0), ("zeta0", self.zeta0)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, "must be positive and finite"));
            }
        }
        Ok(())
    }

    pub fn big_c(&self) -> f64 {
        1.0 / (SQRT_2 * self.big_c0)
    }

    pub fn c(&self) -> f64 {
        self.small_c0 * self.small_c0
    }

    pub fn c_prime(&self) -> f64 {
        512.0 * self.big_c0.powi(4)
    }

    pub fn eps0(&self) -> f64 {
        self.c() * self.c() / self.c_prime()
    }

    /// `ζ₁(ε) = C√ε`.
    pub fn zeta1(&self, epsilon: f64) -> f64 {
        self.big_c() * epsilon.sqrt()
    }

    /// `C′/√(ln(3/ε))·(1 − 1/min(p, 2))` with `C′ = 1/(2e²C₀²)`; zero for `p = 1`.
    pub fn zeta1_alt(&self, epsilon: f64, p: Exponent) -> f64 {
        let shrink = 1.0 - 1.0 / p.value().min(2.0);
        let c = 1.0 / (2.0 * E * E * self.big_c0 * self.big_c0);
        c / (3.0 / epsilon).ln().sqrt() * shrink
    }

    /// `ζ₂(ε) = 1/√(c − √(c′ε))`, `+∞` once the radicand is not positive.
    pub fn zeta2(&self, epsilon: f64) -> f64 {
        let radicand = self.c() - (self.c_prime() * epsilon).sqrt();
        if radicand > 0.0 {
            1.0 / radicand.sqrt()
        } else {
            f64::INFINITY
        }
    }

    /// Tightest constants whose band `[ζ₁(ε), ζ₂(ε)]` contains every
    /// normalized ratio (radius / ‖r*‖ / ℓp factor) widened by `margin`.
    ///
    /// `C₀` puts `ζ₁(ε)` at `min/(1+margin)` and `c₀` puts `ζ₂(ε)` at
    /// `max·(1+margin)`; the result always has `ε < ε₀`.
    pub fn calibrate(normalized_ratios: &[f64], epsilon: f64, margin: f64, zeta0: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        check_finite(normalized_ratios, "ratios")?;
        if !(margin >= 0.0) {
            return Err(invalid("margin", "must be non-negative"));
        }
        let lo = normalized_ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = normalized_ratios.iter().copied().fold(0.0, f64::max);
        if !(lo > 0.0) || normalized_ratios.is_empty() {
            return Err(Error::Degenerate("calibration needs positive ratios"));
        }
        let lower = lo / (1.0 + margin);
        let upper = hi * (1.0 + margin);
        let big_c0 = epsilon.sqrt() / (SQRT_2 * lower);
        let c_sq = 1.0 / (upper * upper) + 16.0 * SQRT_2 * big_c0 * big_c0 * epsilon.sqrt();
        BoundConstants::new(big_c0, c_sq.sqrt(), zeta0)
    }
}

/// Lower/upper bounds on the normalized radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub lower: f64,
    pub upper: f64,
    pub estimate: Option<f64>,
    /// The geometry factor the `ζ` constants multiply.
    pub factor: f64,
    pub epsilon: f64,
    /// Whether `ε` (and `η`, for the LAF variants) lies where the bounds are
    /// guaranteed to hold.
    pub valid: bool,
    pub eta_required: Option<f64>,
}

impl BoundReport {
    pub fn contains(&self, ratio: f64) -> bool {
        self.lower <= ratio && ratio <= self.upper
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid("epsilon", "must lie in (0, 1)"));
    }
    Ok(())
}

fn nonzero(w: &[f64]) -> Result<()> {
    check_finite(w, "weights")?;
    if w.is_empty() {
        return Err(invalid("w", "must be non-empty"));
    }
    if w.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroWeight);
    }
    Ok(())
}

/// `d^{1/p}·‖w‖_{p′}/‖w‖₂`.
pub fn lp_factor(w: &[f64], p: Exponent) -> Result<f64> {
    nonzero(w)?;
    let d = w.len() as f64;
    let scale = match p {
        Exponent::Infinity => 1.0,
        Exponent::Finite(pv) => d.powf(1.0 / pv),
    };
    Ok(scale * p.conjugate().norm(w) / l2_norm(w))
}

fn sandwich(zeta1: f64, zeta2: f64, factor: f64, epsilon: f64, constants: &BoundConstants) -> BoundReport {
    let lower = zeta1 * factor;
    let upper = zeta2 * factor;
    BoundReport {
        lower,
        upper,
        estimate: None,
        factor,
        epsilon,
        valid: epsilon < constants.eps0() && upper.is_finite() && lower <= upper,
        eta_required: None,
    }
}

/// Bounds on `r_{p,ε}(x)/‖r*_p(x)‖_p` for uniform ℓp noise around a
/// hyperplane with normal `w`.
pub fn lp_bounds(
    w: &[f64],
    p: Exponent,
    epsilon: f64,
    constants: &BoundConstants,
    alt_lower: bool,
) -> Result<BoundReport> {
    check_epsilon(epsilon)?;
    constants.validate()?;
    let factor = lp_factor(w, p)?;
    let mut zeta1 = constants.zeta1(epsilon);
    if alt_lower && p.value() > 1.0 {
        zeta1 = zeta1.max(constants.zeta1_alt(epsilon, p));
    }
    Ok(sandwich(zeta1, constants.zeta2(epsilon), factor, epsilon, constants))
}

/// Large-`d` limit of `lp_factor(w, p)/√d` for `w` uniform on the sphere:
/// `√2·(Γ((2p−1)/(2(p−1)))/√π)^{1−1/p}` for `p > 1`, and `√(2 ln d)` for `p = 1`.
pub fn asymptotic_factor(p: Exponent, d: usize) -> Result<f64> {
    if d < 2 {
        return Err(invalid("d", "must be at least 2"));
    }
    Ok(match p {
        Exponent::Infinity => (2.0 / PI).sqrt(),
        Exponent::Finite(1.0) => (2.0 * (d as f64).ln()).sqrt(),
        Exponent::Finite(pv) => {
            let g = libm::tgamma((2.0 * pv - 1.0) / (2.0 * (pv - 1.0)));
            SQRT_2 * (g / PI.sqrt()).powf(1.0 - 1.0 / pv)
        }
    })
}

/// Point estimate `ζ₀·√d·asymptotic_factor(p, d)·‖r*_p‖_p` of the radius.
pub fn robustness_estimate(p: Exponent, d: usize, r_star_norm: f64, zeta0: f64) -> Result<f64> {
    if !(r_star_norm > 0.0 && r_star_norm.is_finite()) {
        return Err(invalid("r_star_norm", "must be positive and finite"));
    }
    if !(zeta0 > 0.0) {
        return Err(invalid("zeta0", "must be positive"));
    }
    Ok(zeta0 * (d as f64).sqrt() * asymptotic_factor(p, d)? * r_star_norm)
}

/// `‖w‖₂/‖√Σ·w‖₂`.
pub fn gaussian_factor(w: &[f64], sigma: &CovarianceSpec) -> Result<f64> {
    nonzero(w)?;
    if w.len() != sigma.dim() {
        return Err(Error::DimensionMismatch {
            expected: sigma.dim(),
            got: w.len(),
        });
    }
    let mut root_w = alloc::vec![0.0; w.len()];
    sigma.apply_root(w, &mut root_w);
    let denom = l2_norm(&root_w);
    let factor = l2_norm(w) / denom;
    if !(denom > 0.0) || !factor.is_finite() {
        return Err(Error::NullDirection);
    }
    Ok(factor)
}

/// `ζ′₁(ε) = √(1/(2 ln(1/ε)))`.
pub fn gaussian_zeta1(epsilon: f64) -> f64 {
    (1.0 / (2.0 * (1.0 / epsilon).ln())).sqrt()
}

/// `ζ′₂(ε) = √(1/(1 − √(3ε)))`, `+∞` for `ε ≥ 1/3`.
pub fn gaussian_zeta2(epsilon: f64) -> f64 {
    let radicand = 1.0 - (3.0 * epsilon).sqrt();
    if radicand > 0.0 {
        (1.0 / radicand).sqrt()
    } else {
        f64::INFINITY
    }
}

fn gaussian_band(zeta1: f64, zeta2: f64, factor: f64, epsilon: f64, valid: bool) -> BoundReport {
    let lower = zeta1 * factor;
    let upper = zeta2 * factor;
    BoundReport {
        lower,
        upper,
        estimate: None,
        factor,
        epsilon,
        valid: valid && upper.is_finite(),
        eta_required: None,
    }
}

/// Bounds on `r_{Σ,ε}(x)/‖r*₂(x)‖₂` for Gaussian noise `N(0, Σ)`; valid for
/// `ε < 1/3`.
pub fn gaussian_bounds(w: &[f64], sigma: &CovarianceSpec, epsilon: f64) -> Result<BoundReport> {
    check_epsilon(epsilon)?;
    let factor = gaussian_factor(w, sigma)?;
    Ok(gaussian_band(
        gaussian_zeta1(epsilon),
        gaussian_zeta2(epsilon),
        factor,
        epsilon,
        epsilon < 1.0 / 3.0,
    ))
}

fn check_laf(gamma: f64, eta: f64, r_star_norm: f64) -> Result<()> {
    if !(0.0..1.0).contains(&gamma) {
        return Err(invalid("gamma", "must lie in [0, 1)"));
    }
    if !(eta >= 0.0) {
        return Err(invalid("eta", "must be non-negative"));
    }
    if !(r_star_norm >= 0.0 && r_star_norm.is_finite()) {
        return Err(invalid("r_star_norm", "must be finite and non-negative"));
    }
    Ok(())
}

/// ℓp bounds for a boundary that is `(γ, η)`-locally approximately flat at
/// `x* = x + r*`, with `grad_at_xstar` the boundary normal there.
pub fn laf_lp_bounds(
    grad_at_xstar: &[f64],
    p: Exponent,
    epsilon: f64,
    gamma: f64,
    eta: f64,
    r_star_norm: f64,
    constants: &BoundConstants,
) -> Result<BoundReport> {
    check_laf(gamma, eta, r_star_norm)?;
    let mut report = lp_bounds(grad_at_xstar, p, epsilon, constants, false)?;
    let eta_required = (1.0 + gamma) * constants.zeta2(epsilon) * report.factor * r_star_norm;
    report.lower *= 1.0 - gamma;
    report.upper *= 1.0 + gamma;
    report.valid &= eta >= eta_required;
    report.eta_required = Some(eta_required);
    Ok(report)
}

/// Gaussian analogue of [`laf_lp_bounds`]; `ε` is split as `ε/2` (lower) and
/// `3ε/2` (upper), and `η` must also cover the norm overshoot `ψ(ε)`.
pub fn laf_gaussian_bounds(
    grad_at_xstar: &[f64],
    sigma: &CovarianceSpec,
    epsilon: f64,
    gamma: f64,
    eta: f64,
    r_star_norm: f64,
) -> Result<BoundReport> {
    check_epsilon(epsilon)?;
    check_laf(gamma, eta, r_star_norm)?;
    let lower = gaussian_bounds(grad_at_xstar, sigma, epsilon / 2.0)?;
    let upper = gaussian_bounds(grad_at_xstar, sigma, 1.5 * epsilon)?;
    let psi = psi(sigma, epsilon);
    let eta_required =
        (1.0 + gamma) * (1.0 + psi) * gaussian_zeta2(1.5 * epsilon) * upper.factor * r_star_norm;
    Ok(BoundReport {
        lower: (1.0 - gamma) * lower.lower,
        upper: (1.0 + gamma) * upper.upper,
        estimate: None,
        factor: upper.factor,
        epsilon,
        valid: epsilon < 1.0 / 6.0 && upper.valid && eta >= eta_required,
        eta_required: Some(eta_required),
    })
}

/// `ψ(ε) = 8·Tr(Σ²)·ln(4/ε)`.
pub fn psi(sigma: &CovarianceSpec, epsilon: f64) -> f64 {
    8.0 * sigma.trace_of_square() * (4.0 / epsilon).ln()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailBound {
    /// Deviation `t′ = 2.5·t` the bound refers to.
    pub t_prime: f64,
    /// Upper bound on `P{|(‖w‖₂/‖√Σw‖₂)² − d| ≥ t′}`, capped at 1.
    pub prob_bound: f64,
    /// Whether `t ≤ (√π/8)·d`, the range where the bound is proven.
    pub within_validity: bool,
}

/// Concentration of the squared Gaussian factor for a uniformly random unit
/// direction `w`.
pub fn gaussian_factor_tail_bound(d: usize, sigma: &CovarianceSpec, t: f64) -> Result<TailBound> {
    if d == 0 {
        return Err(invalid("d", "must be positive"));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(invalid("t", "must be positive and finite"));
    }
    let d = d as f64;
    let tr2 = sigma.trace_of_square();
    let bound = 2.0 * (-t * t / (8.0 * d)).exp()
        + 2.0 * (-t * t / (8.0 * d * d * tr2)).exp()
        + 2.0 * (-1.0 / (200.0 * tr2)).exp();
    Ok(TailBound {
        t_prime: 2.5 * t,
        prob_bound: bound.min(1.0),
        within_validity: t <= PI.sqrt() / 8.0 * d,
    })
}

/// ℓp bounds for a one-vs-all linear classifier: the upper bound follows the
/// nearest pairwise boundary, the lower bound the pair with the smallest
/// factor at the union-bound level `ε/(L−1)`.
pub fn multiclass_lp_bounds(
    model: &MulticlassLinearModel,
    x: &[f64],
    p: Exponent,
    epsilon: f64,
    constants: &BoundConstants,
) -> Result<BoundReport> {
    check_epsilon(epsilon)?;
    constants.validate()?;
    let nearest = multiclass_linear_min_perturbation(model, x, p)?;
    let k = model.strict_label(x)?;
    let upper_factor = lp_factor(&model.weight_difference(k, nearest.target_class), p)?;
    let mut lower_factor = f64::INFINITY;
    for l in (0..model.num_classes()).filter(|&l| l != k) {
        let f = lp_factor(&model.weight_difference(k, l), p)?;
        if f < lower_factor {
            lower_factor = f;
        }
    }
    let classes = model.num_classes() as f64;
    let lower = constants.zeta1(epsilon / (classes - 1.0)) * lower_factor;
    let upper = constants.zeta2(epsilon) * upper_factor;
    Ok(BoundReport {
        lower,
        upper,
        estimate: None,
        factor: upper_factor,
        epsilon,
        valid: epsilon < constants.eps0() && upper.is_finite() && lower <= upper,
        eta_required: None,
    })
}

/// Predicted tolerable quantization for an 8-bit image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizationPrediction {
    /// Largest uniform quantization step `Δ` the label should survive.
    pub delta: f64,
    /// `L_q = 255/Δ`.
    pub levels: f64,
    /// `log₂ L_q`.
    pub bits: f64,
}

impl QuantizationPrediction {
    /// `⌈bits⌉` clamped to `[1, 8]`.
    pub fn depth(&self) -> u32 {
        if self.bits.is_nan() {
            return 8;
        }
        self.bits.ceil().clamp(1.0, 8.0) as u32
    }
}

/// `Δ = (2ζ₀/√π)·√d·‖r*_∞‖_∞`.
pub fn quantization_prediction(r_star_inf: f64, d: usize, zeta0: f64) -> Result<QuantizationPrediction> {
    if !(r_star_inf > 0.0 && r_star_inf.is_finite()) {
        return Err(invalid("r_star_inf", "must be positive and finite"));
    }
    if d == 0 || !(zeta0 > 0.0) {
        return Err(invalid("d", "d and zeta0 must be positive"));
    }
    let delta = 2.0 * zeta0 / PI.sqrt() * (d as f64).sqrt() * r_star_inf;
    let levels = 255.0 / delta;
    Ok(QuantizationPrediction {
        delta,
        levels,
        bits: levels.log2(),
    })
}

/// One observation for [`calibrate_zeta0`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationPair {
    pub empirical_radius: f64,
    pub p: Exponent,
    pub d: usize,
    pub r_star_norm: f64,
}

/// Least-squares `ζ₀` for the point estimate over observed radii.
pub fn calibrate_zeta0(pairs: &[CalibrationPair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(invalid("pairs", "must be non-empty"));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for pair in pairs {
        if !pair.empirical_radius.is_finite() {
            return Err(Error::NonFinite("empirical radius"));
        }
        let e = robustness_estimate(pair.p, pair.d, pair.r_star_norm, 1.0)?;
        num += e * pair.empirical_radius;
        den += e * e;
    }
    if !(den > 0.0) {
        return Err(Error::Degenerate("all estimates vanish"));
    }
    Ok(num / den)
}
