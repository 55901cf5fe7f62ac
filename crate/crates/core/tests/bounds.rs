use noisebound_core::bounds::{
    asymptotic_factor, calibrate_zeta0, gaussian_factor, gaussian_factor_tail_bound, lp_bounds, lp_factor,
    robustness_estimate, CalibrationPair,
};
use noisebound_core::norm::{dot, l2_norm};
use noisebound_core::{BoundConstants, CovarianceSpec, Exponent};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn unit_vector(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let n = l2_norm(&g);
    g.iter().map(|v| v / n).collect()
}

#[test]
fn factor_concentrates_on_its_limit() {
    let d = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let ws: Vec<Vec<f64>> = (0..100).map(|_| unit_vector(&mut rng, d)).collect();
    for (p, tol) in [
        (Exponent::Finite(1.5), 0.02),
        (Exponent::TWO, 0.02),
        (Exponent::Finite(4.0), 0.02),
        (Exponent::Infinity, 0.02),
        (Exponent::ONE, 0.15),
    ] {
        let mean = ws.iter().map(|w| lp_factor(w, p).unwrap()).sum::<f64>() / 100.0 / (d as f64).sqrt();
        let limit = asymptotic_factor(p, d).unwrap();
        assert!((mean / limit - 1.0).abs() <= tol, "p={p}: {mean} vs {limit}");
    }
}

fn random_covariance(rng: &mut ChaCha8Rng, d: usize, rank: usize) -> CovarianceSpec {
    let a: Vec<f64> = (0..d * rank).map(|_| rng.sample(StandardNormal)).collect();
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            m[i * d + j] = (0..rank).map(|k| a[i * rank + k] * a[j * rank + k]).sum();
        }
    }
    CovarianceSpec::from_dense(d, m).unwrap().normalized().unwrap()
}

#[test]
fn gaussian_factor_equals_eigen_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..100 {
        let d = 2 + case % 7;
        let sigma = random_covariance(&mut rng, d, d);
        let w = unit_vector(&mut rng, d);
        let weighted: f64 = sigma
            .eigenvalues()
            .iter()
            .enumerate()
            .map(|(i, l)| l * dot(&sigma.eigenvector(i), &w).powi(2))
            .sum();
        let eigen_form = 1.0 / weighted.sqrt();
        let direct = gaussian_factor(&w, &sigma).unwrap();
        assert!((direct - eigen_form).abs() <= 1e-9 * eigen_form, "case {case}");
    }
}

#[test]
fn white_noise_factor_is_root_d() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for d in [3, 17, 64] {
        let sigma = CovarianceSpec::white(d).unwrap();
        let w: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        assert!((gaussian_factor(&w, &sigma).unwrap() - (d as f64).sqrt()).abs() < 1e-12);
    }
}

#[test]
fn tail_bound_dominates_simulation() {
    let d = 50;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for sigma in [CovarianceSpec::white(d).unwrap(), random_covariance(&mut rng, d, d)] {
        let t = d as f64 / 2.0;
        let bound = gaussian_factor_tail_bound(d, &sigma, t).unwrap();
        let hits = (0..10_000)
            .filter(|_| {
                let w = unit_vector(&mut rng, d);
                (gaussian_factor(&w, &sigma).unwrap().powi(2) - d as f64).abs() >= bound.t_prime
            })
            .count();
        assert!(hits as f64 / 10_000.0 <= bound.prob_bound);
    }
}

#[test]
fn zeta0_recovered_from_synthetic_radii() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let exps = [Exponent::ONE, Exponent::Finite(1.5), Exponent::TWO, Exponent::Infinity];
    let pairs: Vec<CalibrationPair> = (0..200)
        .map(|i| {
            let p = exps[i % 4];
            let d = 10 + i;
            let r = rng.random_range(0.05..2.0);
            let noise = 1.0 + 0.01 * rng.sample::<f64, _>(StandardNormal);
            CalibrationPair {
                empirical_radius: robustness_estimate(p, d, r, 0.5).unwrap() * noise,
                p,
                d,
                r_star_norm: r,
            }
        })
        .collect();
    let z = calibrate_zeta0(&pairs).unwrap();
    assert!((z - 0.51).abs() <= 0.02, "{z}");
}

#[test]
fn small_epsilon_limits() {
    let k = BoundConstants::default();
    let w = [1.0, -2.0, 0.5];
    let r = lp_bounds(&w, Exponent::Finite(3.0), 1e-14, &k, false).unwrap();
    assert!(r.lower < 1e-6);
    assert!((r.upper - r.factor / k.c().sqrt()).abs() < 1e-5);
}

#[test]
fn estimate_is_coherent_with_the_upper_bound() {
    let k = BoundConstants::default();
    let d = 400;
    let w = vec![1.0; d];
    let r = lp_bounds(&w, Exponent::TWO, 1e-3, &k, false).unwrap();
    let estimate = robustness_estimate(Exponent::TWO, d, 1.0, k.zeta0).unwrap();
    assert!(r.lower <= estimate && estimate <= r.upper);
    assert!(r.upper / estimate <= 3.0);
}

proptest! {
    #[test]
    fn band_is_ordered_below_eps0(
        big in 0.05f64..3.0,
        small in 0.05f64..3.0,
        frac in 0.0f64..1.0,
        w in prop::collection::vec(-3.0f64..3.0, 2..8),
    ) {
        prop_assume!(w.iter().any(|v| v.abs() > 1e-3));
        let k = BoundConstants::new(big, small, 0.72).unwrap();
        let eps = (k.eps0() * frac).max(1e-300);
        prop_assume!(eps < 1.0);
        for p in [Exponent::ONE, Exponent::Finite(2.5), Exponent::Infinity] {
            let r = lp_bounds(&w, p, eps, &k, true).unwrap();
            if r.valid {
                prop_assert!(r.lower <= r.upper);
                prop_assert!(r.lower > 0.0 && r.upper.is_finite());
            }
        }
    }

    #[test]
    fn calibration_covers_its_inputs(
        ratios in prop::collection::vec(0.05f64..5.0, 1..20),
        eps in 1e-4f64..0.3,
        margin in 0.0f64..0.5,
    ) {
        let k = BoundConstants::calibrate(&ratios, eps, margin, 0.72).unwrap();
        prop_assert!(eps < k.eps0());
        for r in ratios {
            prop_assert!(k.zeta1(eps) <= r * (1.0 + 1e-12));
            prop_assert!(r <= k.zeta2(eps) * (1.0 + 1e-12));
        }
    }
}
