//! Uniform 8-bit image quantization with optional dithering, and the search
//! for the coarsest depth that keeps a classifier's label.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::bounds::quantization_prediction;
use crate::error::{check_finite, invalid, Result};
use crate::models::Classifier;
use crate::rng::substream;

/// Depth reported when even 8 bits change the label.
pub const NO_DEPTH: u32 = 9;

/// A quantized image.
#[derive(Debug, Clone, PartialEq)]
pub struct Quantized {
    pub values: Vec<f64>,
    /// Some input coordinate lay outside `[0, 255]` and was clamped.
    pub clamped: bool,
}

/// Step between adjacent levels at the given depth.
pub fn step(bits: u32) -> f64 {
    255.0 / ((1u64 << bits) - 1) as f64
}

fn level(k: u64, top: u64) -> f64 {
    (k * 255) as f64 / top as f64
}

fn snap(v: f64, top: u64) -> f64 {
    let delta = 255.0 / top as f64;
    let guess = (v / delta).round().clamp(0.0, top as f64) as u64;
    let mut best = guess;
    let mut best_err = (v - level(guess, top)).abs();
    for k in [guess.saturating_sub(1), (guess + 1).min(top)] {
        let err = (v - level(k, top)).abs();
        if err < best_err || (err == best_err && k < best) {
            best = k;
            best_err = err;
        }
    }
    level(best, top)
}

/// Snaps every coordinate to the nearest of `2^bits` evenly spaced levels on
/// `[0, 255]`. With `dither`, uniform noise on `[−Δ/2, Δ/2)` drawn from the
/// sub-stream `(seed, bits)` is added first.
pub fn quantize_image(x: &[f64], bits: u32, dither: bool, seed: u64) -> Result<Quantized> {
    if !(1..=8).contains(&bits) {
        return Err(invalid("bits", "must lie in 1..=8"));
    }
    check_finite(x, "image")?;
    let top = (1u64 << bits) - 1;
    let delta = step(bits);
    let mut rng = substream(seed, bits as u64);
    let mut clamped = false;
    let values = x
        .iter()
        .map(|&v| {
            if !(0.0..=255.0).contains(&v) {
                clamped = true;
            }
            let mut v = v.clamp(0.0, 255.0);
            if dither {
                v = (v + rng.random_range(-delta / 2.0..delta / 2.0)).clamp(0.0, 255.0);
            }
            snap(v, top)
        })
        .collect();
    Ok(Quantized { values, clamped })
}

/// Smallest depth in `1..=8` whose quantized image keeps `label(x)`, or
/// [`NO_DEPTH`]. The scan stops at the first preserving depth.
pub fn measure_min_bits<M: Classifier + ?Sized>(model: &M, x: &[f64], dither: bool, seed: u64) -> Result<u32> {
    let reference = model.label(x)?;
    for bits in 1..=8 {
        let q = quantize_image(x, bits, dither, seed)?;
        if model.label(&q.values)? == reference {
            return Ok(bits);
        }
    }
    Ok(NO_DEPTH)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizationReport {
    pub predicted_bits: f64,
    pub predicted_levels: f64,
    /// Integer depth derived from the prediction, in `1..=8`.
    pub predicted_depth: u32,
    pub measured_bits: u32,
    pub r_star_inf: f64,
    pub agreed_within_one_bit: bool,
}

/// Compares the predicted depth for a point at ℓ∞ boundary distance
/// `r_star_inf` with the measured one.
pub fn min_bits_preserving_label<M: Classifier + ?Sized>(
    model: &M,
    x: &[f64],
    r_star_inf: f64,
    zeta0: f64,
    dither: bool,
    seed: u64,
) -> Result<QuantizationReport> {
    let prediction = quantization_prediction(r_star_inf, x.len(), zeta0)?;
    let measured = measure_min_bits(model, x, dither, seed)?;
    let predicted_depth = prediction.depth();
    Ok(QuantizationReport {
        predicted_bits: prediction.bits,
        predicted_levels: prediction.levels,
        predicted_depth,
        measured_bits: measured,
        r_star_inf,
        agreed_within_one_bit: predicted_depth.abs_diff(measured) <= 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::LinearModel;
    use alloc::vec;

    #[test]
    fn examples() {
        let x = [0.0, 0.4, 100.5, 100.49, 254.6, 255.0];
        let q = quantize_image(&x, 8, false, 0).unwrap();
        assert_eq!(q.values, vec![0.0, 0.0, 100.0, 100.0, 255.0, 255.0]);
        let q = quantize_image(&[100.0, 3.0, 200.0], 2, false, 0).unwrap();
        assert_eq!(q.values, vec![85.0, 0.0, 170.0]);
        let q = quantize_image(&[10.0, 128.0, 127.0], 1, true, 5).unwrap();
        assert!(q.values.iter().all(|&v| v == 0.0 || v == 255.0));
    }

    #[test]
    fn clamps_with_flag() {
        let q = quantize_image(&[-3.0, 300.0], 3, false, 0).unwrap();
        assert!(q.clamped);
        assert_eq!(q.values, vec![0.0, 255.0]);
        assert!(quantize_image(&[1.0], 0, false, 0).is_err());
        assert!(quantize_image(&[1.0], 9, false, 0).is_err());
    }

    #[test]
    fn dither_is_seeded() {
        let x: Vec<f64> = (0..64).map(|i| i as f64 * 3.7).collect();
        let a = quantize_image(&x, 3, true, 9).unwrap();
        assert_eq!(a, quantize_image(&x, 3, true, 9).unwrap());
        assert_ne!(a, quantize_image(&x, 3, true, 10).unwrap());
    }

    #[test]
    fn huge_margin_needs_one_bit() {
        let m = LinearModel::new(vec![1.0, 1.0], -1000.0).unwrap();
        let r = min_bits_preserving_label(&m, &[10.0, 20.0], 700.0, 0.72, false, 0).unwrap();
        assert_eq!(r.measured_bits, 1);
        assert_eq!(r.predicted_depth, 1);
        assert!(r.agreed_within_one_bit);
    }

    struct Exact(f64);

    impl Classifier for Exact {
        fn dim(&self) -> usize {
            1
        }

        fn num_classes(&self) -> usize {
            2
        }

        fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![0.0, if x[0] == self.0 { 1.0 } else { -1.0 }])
        }
    }

    #[test]
    fn sentinel_when_nothing_preserves() {
        assert_eq!(measure_min_bits(&Exact(100.3), &[100.3], false, 0).unwrap(), NO_DEPTH);
        assert_eq!(measure_min_bits(&Exact(85.0), &[85.0], false, 0).unwrap(), 2);
    }
}
