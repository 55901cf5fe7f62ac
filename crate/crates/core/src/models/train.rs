//! Full-batch gradient-descent trainers.
//!
//! Inputs are standardized per feature during training and the affine map is
//! folded back into the first layer, so the returned models act on raw inputs.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Activation, Classifier, Dataset, DenseLayer, LinearModel, MlpModel};
use crate::error::{Error, Result};
use crate::norm::dot;
use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingSummary {
    pub accuracy: f64,
    pub loss: f64,
    pub epochs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            epochs: 300,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: vec![16],
            learning_rate: 0.5,
            epochs: 1000,
            seed: 0,
        }
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^{-t})` without overflow.
fn softplus_neg(t: f64) -> f64 {
    if t > 0.0 {
        (-t).exp().ln_1p()
    } else {
        -t + t.exp().ln_1p()
    }
}

fn check_trainable(data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::InvalidDataset("empty dataset".into()));
    }
    if data.dim() == 0 {
        return Err(Error::InvalidDataset("zero-dimensional samples".into()));
    }
    Ok(())
}

fn standardized(data: &Dataset, mean: &[f64], std: &[f64]) -> Vec<Vec<f64>> {
    data.samples()
        .iter()
        .map(|s| {
            s.iter()
                .zip(mean.iter().zip(std))
                .map(|(v, (m, sd))| (v - m) / sd)
                .collect()
        })
        .collect()
}

fn accuracy<M: Classifier>(model: &M, data: &Dataset) -> Result<f64> {
    let mut correct = 0usize;
    for (x, y) in data.iter() {
        if model.label(x)? == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Binary logistic regression.
pub fn train_logistic(data: &Dataset, config: &LogisticConfig) -> Result<(LinearModel, TrainingSummary)> {
    check_trainable(data)?;
    if data.labels().iter().any(|&l| l > 1) {
        return Err(Error::InvalidDataset("logistic regression needs labels in {0, 1}".into()));
    }
    let d = data.dim();
    let (mean, std) = data.feature_moments();
    let z = standardized(data, &mean, &std);
    let n = data.len() as f64;

    let mut rng = substream(config.seed, 0);
    let mut w: Vec<f64> = (0..d)
        .map(|_| 0.01 * Distribution::<f64>::sample(&StandardNormal, &mut rng))
        .collect();
    let mut b = 0.0;
    let mut grad = vec![0.0; d];
    let mut loss = 0.0;
    for _ in 0..config.epochs {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut grad_b = 0.0;
        loss = 0.0;
        for (zi, &y) in z.iter().zip(data.labels()) {
            let t = dot(&w, zi) + b;
            let target = y as f64;
            let r = sigmoid(t) - target;
            loss += if y == 1 { softplus_neg(t) } else { softplus_neg(-t) };
            grad.iter_mut().zip(zi).for_each(|(g, v)| *g += r * v);
            grad_b += r;
        }
        loss /= n;
        let step = config.learning_rate / n;
        w.iter_mut().zip(&grad).for_each(|(wi, g)| *wi -= step * g);
        b -= step * grad_b;
    }

    let w_raw: Vec<f64> = w.iter().zip(&std).map(|(wi, s)| wi / s).collect();
    let b_raw = b - dot(&w_raw, &mean);
    let model = LinearModel::new(w_raw, b_raw)?;
    let accuracy = accuracy(&model, data)?;
    Ok((
        model,
        TrainingSummary {
            accuracy,
            loss,
            epochs: config.epochs,
        },
    ))
}

/// Tanh MLP with softmax cross-entropy, or a single logistic output unit when
/// the dataset has two classes.
pub fn train_mlp(data: &Dataset, config: &MlpConfig) -> Result<(MlpModel, TrainingSummary)> {
    check_trainable(data)?;
    if config.hidden.contains(&0) {
        return Err(crate::error::invalid("hidden", "layer widths must be positive"));
    }
    let activation = Activation::Tanh;
    let binary = data.classes() == 2;
    let out_units = if binary { 1 } else { data.classes() };
    let (mean, std) = data.feature_moments();
    let z = standardized(data, &mean, &std);
    let n = data.len() as f64;

    let mut sizes = vec![data.dim()];
    sizes.extend_from_slice(&config.hidden);
    sizes.push(out_units);

    let mut rng = substream(config.seed, 0);
    let mut layers = Vec::with_capacity(sizes.len() - 1);
    for pair in sizes.windows(2) {
        let (inputs, outputs) = (pair[0], pair[1]);
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let weights = (0..inputs * outputs)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        layers.push(DenseLayer::new(inputs, outputs, weights, vec![0.0; outputs])?);
    }
    let mut net = MlpModel::new(layers, activation)?;

    let last = sizes.len() - 2;
    let mut loss = 0.0;
    for _ in 0..config.epochs {
        let mut grads: Vec<(Vec<f64>, Vec<f64>)> = net
            .layers()
            .iter()
            .map(|l| (vec![0.0; l.weights.len()], vec![0.0; l.biases.len()]))
            .collect();
        loss = 0.0;
        for (zi, &y) in z.iter().zip(data.labels()) {
            let acts = net.forward_all(zi);
            let out = &acts[last + 1];
            let mut delta: Vec<f64> = if binary {
                let t = out[0];
                loss += if y == 1 { softplus_neg(t) } else { softplus_neg(-t) };
                vec![sigmoid(t) - y as f64]
            } else {
                let m = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = out.iter().map(|o| (o - m).exp()).collect();
                let total: f64 = exps.iter().sum();
                loss += total.ln() + m - out[y];
                exps.iter()
                    .enumerate()
                    .map(|(k, e)| e / total - if k == y { 1.0 } else { 0.0 })
                    .collect()
            };
            for i in (0..=last).rev() {
                let layer = &net.layers()[i];
                let a = &acts[i];
                let (gw, gb) = &mut grads[i];
                for (j, dj) in delta.iter().enumerate() {
                    gb[j] += dj;
                    gw[j * layer.inputs..(j + 1) * layer.inputs]
                        .iter_mut()
                        .zip(a)
                        .for_each(|(g, av)| *g += dj * av);
                }
                if i > 0 {
                    let mut back = layer.backward(&delta);
                    back.iter_mut()
                        .zip(a)
                        .for_each(|(g, h)| *g *= activation.derivative_from_output(*h));
                    delta = back;
                }
            }
        }
        loss /= n;
        let step = config.learning_rate / n;
        for (layer, (gw, gb)) in net.layers.iter_mut().zip(&grads) {
            layer.weights.iter_mut().zip(gw).for_each(|(w, g)| *w -= step * g);
            layer.biases.iter_mut().zip(gb).for_each(|(b, g)| *b -= step * g);
        }
    }

    // fold the standardization into the first layer
    let first = &mut net.layers[0];
    for j in 0..first.outputs {
        let row = &mut first.weights[j * first.inputs..(j + 1) * first.inputs];
        let mut shift = 0.0;
        for ((w, m), s) in row.iter_mut().zip(&mean).zip(&std) {
            *w /= s;
            shift += *w * m;
        }
        first.biases[j] -= shift;
    }
    let accuracy = accuracy(&net, data)?;
    Ok((
        net,
        TrainingSummary {
            accuracy,
            loss,
            epochs: config.epochs,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{gradient, Differentiable};

    fn xor() -> Dataset {
        Dataset::new(
            vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]],
            vec![0, 1, 1, 0],
            2,
        )
        .unwrap()
    }

    #[test]
    fn logistic_separable_pair() {
        let data = Dataset::new(vec![vec![-1.0, 0.0], vec![1.0, 0.0]], vec![0, 1], 2).unwrap();
        let (m, s) = train_logistic(&data, &LogisticConfig::default()).unwrap();
        assert!(m.weights()[0] > 0.0);
        assert_eq!(s.accuracy, 1.0);
    }

    #[test]
    fn logistic_rejects_bad_input() {
        let empty = Dataset::new(vec![], vec![], 2).unwrap();
        assert!(train_logistic(&empty, &LogisticConfig::default()).is_err());
        let three = Dataset::new(vec![vec![0.0], vec![1.0]], vec![0, 2], 3).unwrap();
        assert!(train_logistic(&three, &LogisticConfig::default()).is_err());
    }

    #[test]
    fn logistic_is_deterministic() {
        let data = xor();
        let cfg = LogisticConfig { seed: 9, ..Default::default() };
        let (a, _) = train_logistic(&data, &cfg).unwrap();
        let (b, _) = train_logistic(&data, &cfg).unwrap();
        assert_eq!(a.weights().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                   b.weights().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_eq!(a.bias().to_bits(), b.bias().to_bits());
    }

    #[test]
    fn mlp_learns_xor() {
        let cfg = MlpConfig {
            hidden: vec![8],
            learning_rate: 0.5,
            epochs: 3000,
            seed: 1,
        };
        let (m, s) = train_mlp(&xor(), &cfg).unwrap();
        assert_eq!(s.accuracy, 1.0, "loss {}", s.loss);
        assert!(m.is_binary());
        let (again, _) = train_mlp(&xor(), &cfg).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn folded_standardization_matches_gradient_oracle() {
        let cfg = MlpConfig { hidden: vec![5, 4], epochs: 50, ..Default::default() };
        let data = Dataset::new(
            vec![vec![10.0, 200.0], vec![12.0, 180.0], vec![30.0, 50.0], vec![25.0, 60.0]],
            vec![0, 0, 1, 1],
            2,
        )
        .unwrap();
        let (m, _) = train_mlp(&data, &cfg).unwrap();
        let x = [15.0, 120.0];
        let g = gradient(&m, &x, None).unwrap();
        let g1 = m.score_gradient(&x, 1).unwrap();
        assert_eq!(g, g1);
    }
}
