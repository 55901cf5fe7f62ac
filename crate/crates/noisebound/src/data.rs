//! Seeded synthetic datasets.

use noisebound_core::models::Dataset;
use noisebound_core::rng::{derive_seed, substream};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Side length of the synthetic images.
pub const IMAGE_SIDE: usize = 16;

fn unit_vector<R: Rng>(rng: &mut R, d: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.0 {
            return g.into_iter().map(|v| v / n).collect();
        }
    }
}

/// Two unit-variance isotropic Gaussian clusters centred at `±(separation/2)·u`
/// for a seeded random unit vector `u`; labels alternate `0, 1, 0, ...`.
pub fn make_blobs(d: usize, n: usize, separation: f64, seed: u64) -> Result<Dataset> {
    make_multiclass_blobs(d, n, 2, separation, seed)
}

/// `classes` unit-variance clusters. Two classes sit at `±(separation/2)·u`;
/// more classes get independent random centres at distance `separation/2`
/// from the origin. Point `i` has label `i mod classes`.
pub fn make_multiclass_blobs(d: usize, n: usize, classes: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if d < 2 || n < 2 {
        return Err(Error::config("blobs need d >= 2 and n >= 2"));
    }
    if classes < 2 {
        return Err(Error::config("blobs need at least 2 classes"));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::config("separation must be finite and non-negative"));
    }
    let mut rng = substream(seed, 0);
    let centres: Vec<Vec<f64>> = if classes == 2 {
        let u = unit_vector(&mut rng, d);
        [-0.5, 0.5].iter().map(|s| u.iter().map(|v| s * separation * v).collect()).collect()
    } else {
        (0..classes)
            .map(|_| unit_vector(&mut rng, d).into_iter().map(|v| 0.5 * separation * v).collect())
            .collect()
    };
    let mut points = substream(seed, 1);
    let mut samples = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % classes;
        samples.push(
            centres[label]
                .iter()
                .map(|c| c + points.sample::<f64, _>(StandardNormal))
                .collect(),
        );
        labels.push(label);
    }
    Dataset::new(samples, labels, classes).map_err(Error::data)
}

/// 16×16 grayscale images in `[0, 255]`: a bright Gaussian blob on a dim,
/// noisy background. Class 0 places the blob left of the vertical midline,
/// class 1 right of it, at a horizontal offset drawn uniformly from
/// `[0.25, 4)` pixels, so some images sit close to the class boundary.
/// Height, width and brightness are jittered per image.
pub fn blob_images(n: usize, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::config("need at least 2 images"));
    }
    let side = IMAGE_SIDE as f64;
    let mut rng = substream(derive_seed(seed, 0x1a6e), 0);
    let mut samples = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % 2;
        let offset: f64 = rng.random_range(0.25..4.0);
        let cx = 0.5 * side + if label == 0 { -offset } else { offset };
        let cy = rng.random_range(0.3 * side..0.7 * side);
        let width: f64 = rng.random_range(1.6..2.6);
        let peak: f64 = rng.random_range(170.0..230.0);
        let mut img = Vec::with_capacity(IMAGE_SIDE * IMAGE_SIDE);
        for row in 0..IMAGE_SIDE {
            for col in 0..IMAGE_SIDE {
                let (dx, dy) = (col as f64 + 0.5 - cx, row as f64 + 0.5 - cy);
                let blob = peak * (-(dx * dx + dy * dy) / (2.0 * width * width)).exp();
                let noise = 8.0 * rng.sample::<f64, _>(StandardNormal);
                img.push((25.0 + blob + noise).clamp(0.0, 255.0));
            }
        }
        samples.push(img);
        labels.push(label);
    }
    Dataset::new(samples, labels, 2).map_err(Error::data)
}
