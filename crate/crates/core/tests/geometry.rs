use noisebound_core::geometry::{
    iterative_min_perturbation, linear_min_perturbation, multiclass_linear_min_perturbation, IterativeConfig,
};
use noisebound_core::models::{train_mlp, Dataset, MlpConfig};
use noisebound_core::norm::{dot, l2_norm};
use noisebound_core::{Classifier, Exponent, LinearModel, MulticlassLinearModel};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn subgradient(r: &[f64], p: Exponent) -> Vec<f64> {
    match p {
        Exponent::Infinity => {
            let mut best = 0;
            for i in 0..r.len() {
                if r[i].abs() > r[best].abs() {
                    best = i;
                }
            }
            let mut g = vec![0.0; r.len()];
            g[best] = r[best].signum();
            g
        }
        Exponent::Finite(pv) => r
            .iter()
            .map(|v| if *v == 0.0 { 0.0 } else { v.signum() * v.abs().powf(pv - 1.0) })
            .collect(),
    }
}

/// Minimizes ‖r‖_p over {wᵀr = −f} by projected subgradient descent with
/// geometrically decaying, normalized steps: `restarts` short runs from random
/// feasible starts, then a long run continuing the best of them.
fn distance_oracle(w: &[f64], f: f64, p: Exponent, restarts: usize, rng: &mut ChaCha8Rng) -> f64 {
    let ww = dot(w, w);
    let project = |r: &mut Vec<f64>| {
        let shift = (dot(w, r) + f) / ww;
        r.iter_mut().zip(w).for_each(|(a, b)| *a -= shift * b);
    };
    let descend = |r: &mut Vec<f64>, mut step: f64, iters: usize, decay: f64| -> f64 {
        let mut best = p.norm(r);
        for _ in 0..iters {
            let mut g = subgradient(r, p);
            let along = dot(&g, w) / ww;
            g.iter_mut().zip(w).for_each(|(a, b)| *a -= along * b);
            let gn = l2_norm(&g);
            if gn == 0.0 {
                break;
            }
            r.iter_mut().zip(&g).for_each(|(a, b)| *a -= step * b / gn);
            project(r);
            best = best.min(p.norm(r));
            step *= decay;
        }
        best
    };
    let scale = f.abs() / ww.sqrt();
    let (short, long) = (1_000, 40_000);
    let short_decay = (1e-2f64).powf(1.0 / short as f64);
    let mut best = f64::INFINITY;
    let mut best_start = Vec::new();
    for _ in 0..restarts {
        let mut r: Vec<f64> = gaussian_vec(rng, w.len()).iter().map(|v| v * scale).collect();
        project(&mut r);
        let value = descend(&mut r, 2.0 * scale, short, short_decay);
        if value < best {
            best = value;
            best_start = r;
        }
    }
    let long_decay = (1e-8f64).powf(1.0 / long as f64);
    best.min(descend(&mut best_start, 2e-2 * scale, long, long_decay))
}

fn project_l1_ball(v: &mut [f64]) {
    if v.iter().map(|x| x.abs()).sum::<f64>() <= 1.0 {
        return;
    }
    let mut mags: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, m) in mags.iter().enumerate() {
        cumulative += m;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if *m > t {
            theta = t;
        }
    }
    v.iter_mut().for_each(|x| *x = x.signum() * (x.abs() - theta).max(0.0));
}

/// For the polyhedral norms the distance is `|f| / max{wᵀu : ‖u‖_p ≤ 1}`; the
/// maximum is found by projected gradient ascent over the ball from random
/// starts.
fn polyhedral_oracle(w: &[f64], f: f64, p: Exponent, restarts: usize, rng: &mut ChaCha8Rng) -> f64 {
    let wn = l2_norm(w);
    let mut best: f64 = 0.0;
    for _ in 0..restarts {
        let mut u: Vec<f64> = gaussian_vec(rng, w.len());
        let mut step = 1.0 / wn;
        for _ in 0..2000 {
            u.iter_mut().zip(w).for_each(|(a, b)| *a += step * b);
            match p {
                Exponent::Infinity => u.iter_mut().for_each(|x| *x = x.clamp(-1.0, 1.0)),
                _ => project_l1_ball(&mut u),
            }
            step *= 1.01;
        }
        best = best.max(dot(w, &u));
    }
    f.abs() / best
}

#[test]
fn closed_form_matches_numerical_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let exps = [Exponent::ONE, Exponent::Finite(1.5), Exponent::TWO, Exponent::Finite(3.0), Exponent::Infinity];
    let dims = [2, 5, 20];
    let mut worst: f64 = 0.0;
    for case in 0..200 {
        let d = dims[case % 3];
        let p = exps[(case / 3) % 5];
        let w = gaussian_vec(&mut rng, d);
        let x = gaussian_vec(&mut rng, d);
        let b = rng.sample::<f64, _>(StandardNormal);
        let model = LinearModel::new(w.clone(), b).unwrap();
        let f = model.decision(&x).unwrap();
        let exact = linear_min_perturbation(&model, &x, p).unwrap();
        let oracle = match p {
            Exponent::ONE | Exponent::Infinity => polyhedral_oracle(&w, f, p, 50, &mut rng),
            _ => distance_oracle(&w, f, p, 50, &mut rng),
        };
        let rel = (oracle - exact.norm).abs() / exact.norm;
        worst = worst.max(rel);
        assert!(rel <= 1e-4, "case {case}: p={p} d={d} exact={} oracle={oracle}", exact.norm);
        let z: Vec<f64> = x.iter().zip(&exact.r_star).map(|(a, b)| a + b).collect();
        assert!(model.decision(&z).unwrap().abs() <= 1e-9 * f.abs());
    }
    assert!(worst <= 1e-4);
}

fn exponent() -> impl Strategy<Value = Exponent> {
    prop_oneof![
        Just(Exponent::ONE),
        (1.01f64..8.0).prop_map(Exponent::Finite),
        Just(Exponent::Infinity),
    ]
}

proptest! {
    #[test]
    fn holder_equality_and_boundary(
        w in prop::collection::vec(-5.0f64..5.0, 1..12),
        seed in any::<u64>(),
        p in exponent(),
    ) {
        prop_assume!(w.iter().any(|v| v.abs() > 1e-3));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = gaussian_vec(&mut rng, w.len());
        let model = LinearModel::new(w.clone(), 0.3).unwrap();
        let f = model.decision(&x).unwrap();
        prop_assume!(f.abs() > 1e-6);
        let r = linear_min_perturbation(&model, &x, p).unwrap();
        let lhs = dot(&w, &r.r_star).abs();
        let rhs = p.conjugate().norm(&w) * p.norm(&r.r_star);
        prop_assert!((lhs - f.abs()).abs() <= 1e-9 * f.abs());
        prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs);
        prop_assert!((r.norm - p.norm(&r.r_star)).abs() <= 1e-9 * r.norm);
    }

    #[test]
    fn euclidean_distance_is_rotation_invariant(seed in any::<u64>(), d in 2usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = gaussian_vec(&mut rng, d);
        let x = gaussian_vec(&mut rng, d);
        let m = nalgebra::DMatrix::<f64>::from_fn(d, d, |_, _| rng.sample(StandardNormal));
        let q = m.qr().q();
        let rotate = |v: &[f64]| (&q * nalgebra::DVector::from_column_slice(v)).as_slice().to_vec();
        let a = linear_min_perturbation(&LinearModel::new(w.clone(), 0.0).unwrap(), &x, Exponent::TWO).unwrap();
        let b = linear_min_perturbation(&LinearModel::new(rotate(&w), 0.0).unwrap(), &rotate(&x), Exponent::TWO).unwrap();
        prop_assert!((a.norm - b.norm).abs() <= 1e-9 * a.norm);
    }

    #[test]
    fn multiclass_scale_invariance(seed in any::<u64>(), scale in 0.01f64..100.0, p in exponent()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..4).map(|_| gaussian_vec(&mut rng, 5)).collect();
        let biases = gaussian_vec(&mut rng, 4);
        let x = gaussian_vec(&mut rng, 5);
        let mc = MulticlassLinearModel::new(rows, biases).unwrap();
        let a = multiclass_linear_min_perturbation(&mc, &x, p).unwrap();
        let b = multiclass_linear_min_perturbation(&mc.scaled(scale).unwrap(), &x, p).unwrap();
        prop_assert_eq!(a.target_class, b.target_class);
        for (u, v) in a.r_star.iter().zip(&b.r_star) {
            prop_assert!((u - v).abs() <= 1e-9 * a.norm);
        }
    }
}

#[test]
fn two_class_multiclass_equals_binary() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let rows = vec![gaussian_vec(&mut rng, 6), gaussian_vec(&mut rng, 6)];
        let biases = gaussian_vec(&mut rng, 2);
        let x = gaussian_vec(&mut rng, 6);
        let mc = MulticlassLinearModel::new(rows.clone(), biases.clone()).unwrap();
        let w: Vec<f64> = rows[1].iter().zip(&rows[0]).map(|(a, b)| a - b).collect();
        let bin = LinearModel::new(w, biases[1] - biases[0]).unwrap();
        for p in [Exponent::ONE, Exponent::Finite(2.5), Exponent::Infinity] {
            let a = multiclass_linear_min_perturbation(&mc, &x, p).unwrap();
            let b = linear_min_perturbation(&bin, &x, p).unwrap();
            assert_eq!(a.r_star, b.r_star);
            assert_eq!(a.norm, b.norm);
            assert_eq!(a.target_class, b.target_class);
        }
    }
}

#[test]
fn multiclass_picks_nearest_pair() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..100 {
        let rows: Vec<Vec<f64>> = (0..5).map(|_| gaussian_vec(&mut rng, 3)).collect();
        let biases = gaussian_vec(&mut rng, 5);
        let x = gaussian_vec(&mut rng, 3);
        let mc = MulticlassLinearModel::new(rows.clone(), biases.clone()).unwrap();
        let k = mc.label(&x).unwrap();
        let r = multiclass_linear_min_perturbation(&mc, &x, Exponent::TWO).unwrap();
        let by_hand = (0..5)
            .filter(|&l| l != k)
            .map(|l| {
                let w: Vec<f64> = rows[k].iter().zip(&rows[l]).map(|(a, b)| a - b).collect();
                (dot(&w, &x) + biases[k] - biases[l]) / l2_norm(&w)
            })
            .fold(f64::INFINITY, f64::min);
        assert!((r.norm - by_hand).abs() <= 1e-12 * by_hand);
        let z: Vec<f64> = x.iter().zip(&r.r_star).map(|(a, b)| a + b).collect();
        let scores = mc.scores(&z).unwrap();
        assert!((scores[k] - scores[r.target_class]).abs() < 1e-9 * (1.0 + scores[k].abs()));
    }
}

fn two_blobs(d: usize, n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let label = i % 2;
        let shift = if label == 1 { 3.0 } else { -3.0 };
        let mut x = gaussian_vec(&mut rng, d);
        x[0] += shift;
        samples.push(x);
        labels.push(label);
    }
    Dataset::new(samples, labels, 2).unwrap()
}

#[test]
fn iterative_search_on_mlp_flips_within_nearest_neighbor_distance() {
    let data = two_blobs(5, 300, 11);
    let config = MlpConfig {
        hidden: vec![12],
        epochs: 150,
        seed: 4,
        ..MlpConfig::default()
    };
    let (mlp, _) = train_mlp(&data, &config).unwrap();
    let mut checked = 0;
    for (x, y) in data.iter().take(40) {
        let k = mlp.label(x).unwrap();
        if k != y {
            continue;
        }
        let r = iterative_min_perturbation(&mlp, x, Exponent::TWO, &IterativeConfig::default()).unwrap();
        assert!(r.converged);
        let z: Vec<f64> = x.iter().zip(&r.r_star).map(|(a, b)| a + b).collect();
        assert_ne!(mlp.label(&z).unwrap(), k);
        let nearest = data
            .iter()
            .filter(|(_, label)| *label != y)
            .map(|(z, _)| l2_norm(&z.iter().zip(x).map(|(a, b)| a - b).collect::<Vec<_>>()))
            .fold(f64::INFINITY, f64::min);
        assert!(r.norm <= nearest, "{} > {nearest}", r.norm);
        checked += 1;
    }
    assert!(checked >= 35);
}
