use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::{Classifier, Differentiable};
use crate::error::{check_dim, check_finite, invalid, Result};

/// Hidden-layer nonlinearity. Only smooth activations are offered so that the
/// gradient oracle agrees with finite differences everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
        }
    }

    pub(crate) fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation value.
    pub(crate) fn derivative_from_output(self, h: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - h * h,
        }
    }
}

/// Fully connected layer `z = W a + b`, `W` stored row-major `outputs × inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub(crate) inputs: usize,
    pub(crate) outputs: usize,
    pub(crate) weights: Vec<f64>,
    pub(crate) biases: Vec<f64>,
}

impl DenseLayer {
    pub fn new(inputs: usize, outputs: usize, weights: Vec<f64>, biases: Vec<f64>) -> Result<Self> {
        if inputs == 0 || outputs == 0 {
            return Err(invalid("layer", "sizes must be positive"));
        }
        check_dim(inputs * outputs, weights.len())?;
        check_dim(outputs, biases.len())?;
        check_finite(&weights, "layer weights")?;
        check_finite(&biases, "layer biases")?;
        Ok(Self {
            inputs,
            outputs,
            weights,
            biases,
        })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub(crate) fn forward(&self, a: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weights.chunks_exact(self.inputs).zip(&self.biases).map(
            |(row, b)| row.iter().zip(a).map(|(w, x)| w * x).sum::<f64>() + b,
        ));
    }

    /// `Wᵀ g`.
    pub(crate) fn backward(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.inputs];
        for (row, gj) in self.weights.chunks_exact(self.inputs).zip(g) {
            out.iter_mut().zip(row).for_each(|(o, w)| *o += w * gj);
        }
        out
    }
}

/// Multi-layer perceptron with smooth hidden activations and a linear output
/// layer. A single output unit means binary mode: scores are `(0, out)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub(crate) layers: Vec<DenseLayer>,
    activation: Activation,
}

impl MlpModel {
    pub fn new(layers: Vec<DenseLayer>, activation: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(invalid("layers", "need at least one layer"));
        }
        for pair in layers.windows(2) {
            check_dim(pair[0].outputs, pair[1].inputs)?;
        }
        Ok(Self { layers, activation })
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// `[d, hidden..., outputs]`.
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.layers[0].inputs];
        sizes.extend(self.layers.iter().map(|l| l.outputs));
        sizes
    }

    pub fn is_binary(&self) -> bool {
        self.output_units() == 1
    }

    fn output_units(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    /// Activations of every layer, input first, raw outputs last.
    pub(crate) fn forward_all(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.outputs);
            layer.forward(&acts[i], &mut z);
            if i != last {
                z.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            }
            acts.push(z);
        }
        acts
    }

    /// Raw output units.
    pub fn outputs(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        let mut a = x.to_vec();
        let mut z = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.forward(&a, &mut z);
            if i != last {
                z.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            }
            core::mem::swap(&mut a, &mut z);
        }
        Ok(a)
    }

    /// Gradient of output unit `unit` with respect to the input.
    fn output_gradient(&self, x: &[f64], unit: usize) -> Vec<f64> {
        let acts = self.forward_all(x);
        let last = self.layers.len() - 1;
        let mut g = self.layers[last].weights
            [unit * self.layers[last].inputs..(unit + 1) * self.layers[last].inputs]
            .to_vec();
        for i in (0..last).rev() {
            let h = &acts[i + 1];
            g.iter_mut()
                .zip(h)
                .for_each(|(gi, hi)| *gi *= self.activation.derivative_from_output(*hi));
            g = self.layers[i].backward(&g);
        }
        g
    }
}

impl Classifier for MlpModel {
    fn dim(&self) -> usize {
        self.layers[0].inputs
    }

    fn num_classes(&self) -> usize {
        if self.is_binary() {
            2
        } else {
            self.output_units()
        }
    }

    fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        let out = self.outputs(x)?;
        if self.is_binary() {
            Ok(vec![0.0, out[0]])
        } else {
            Ok(out)
        }
    }
}

impl Differentiable for MlpModel {
    fn score_gradient(&self, x: &[f64], class: usize) -> Result<Vec<f64>> {
        check_dim(self.dim(), x.len())?;
        if class >= self.num_classes() {
            return Err(invalid("class", "out of range"));
        }
        if self.is_binary() {
            if class == 0 {
                return Ok(vec![0.0; self.dim()]);
            }
            return Ok(self.output_gradient(x, 0));
        }
        Ok(self.output_gradient(x, class))
    }
}
