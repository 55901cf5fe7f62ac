use alloc::vec;
use alloc::vec::Vec;

use super::{argmax, Classifier, Differentiable};
use crate::error::{check_dim, check_finite, invalid, Error, Result};
use crate::norm::{dot, l2_norm};

/// Binary hyperplane classifier `f(x) = wᵀx + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    w: Vec<f64>,
    b: f64,
}

impl LinearModel {
    pub fn new(w: Vec<f64>, b: f64) -> Result<Self> {
        if w.is_empty() {
            return Err(invalid("w", "dimension must be at least 1"));
        }
        check_finite(&w, "weights")?;
        if !b.is_finite() {
            return Err(Error::NonFinite("bias"));
        }
        if l2_norm(&w) == 0.0 {
            return Err(Error::ZeroWeight);
        }
        Ok(Self { w, b })
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn bias(&self) -> f64 {
        self.b
    }

    /// Decision value `f(x)`.
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.w.len(), x.len())?;
        Ok(dot(&self.w, x) + self.b)
    }

    /// Multiplies `(w, b)` by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(invalid("factor", "must be positive"));
        }
        Self::new(self.w.iter().map(|v| v * factor).collect(), self.b * factor)
    }
}

impl Classifier for LinearModel {
    fn dim(&self) -> usize {
        self.w.len()
    }

    fn num_classes(&self) -> usize {
        2
    }

    fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(vec![0.0, self.decision(x)?])
    }

    fn label(&self, x: &[f64]) -> Result<usize> {
        Ok(usize::from(self.decision(x)? > 0.0))
    }
}

impl Differentiable for LinearModel {
    fn score_gradient(&self, x: &[f64], class: usize) -> Result<Vec<f64>> {
        check_dim(self.w.len(), x.len())?;
        match class {
            0 => Ok(vec![0.0; self.w.len()]),
            1 => Ok(self.w.clone()),
            _ => Err(invalid("class", "binary model has classes 0 and 1")),
        }
    }
}

/// One hyperplane score per class, `f_k(x) = w_kᵀx + b_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MulticlassLinearModel {
    dim: usize,
    /// Row-major `L × d`.
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl MulticlassLinearModel {
    pub fn new(rows: Vec<Vec<f64>>, biases: Vec<f64>) -> Result<Self> {
        let classes = rows.len();
        if classes < 2 {
            return Err(invalid("classes", "need at least 2 classes"));
        }
        check_dim(classes, biases.len())?;
        let dim = rows[0].len();
        if dim == 0 {
            return Err(invalid("weights", "dimension must be at least 1"));
        }
        for row in &rows {
            check_dim(dim, row.len())?;
            check_finite(row, "weights")?;
        }
        check_finite(&biases, "biases")?;
        for k in 0..classes {
            for l in (k + 1)..classes {
                if rows[k] == rows[l] {
                    return Err(invalid(
                        "weights",
                        alloc::format!("classes {k} and {l} have identical weight vectors"),
                    ));
                }
            }
        }
        Ok(Self {
            dim,
            weights: rows.into_iter().flatten().collect(),
            biases,
        })
    }

    pub fn class_weights(&self, k: usize) -> &[f64] {
        &self.weights[k * self.dim..(k + 1) * self.dim]
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    /// Row-major `L × d` weights.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `w_a − w_b`.
    pub fn weight_difference(&self, a: usize, b: usize) -> Vec<f64> {
        self.class_weights(a)
            .iter()
            .zip(self.class_weights(b))
            .map(|(x, y)| x - y)
            .collect()
    }

    /// `(w_a − w_b)ᵀx + (b_a − b_b)`, evaluated as a single hyperplane.
    pub fn pairwise_decision(&self, x: &[f64], a: usize, b: usize) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok(dot(&self.weight_difference(a, b), x) + (self.biases[a] - self.biases[b]))
    }

    /// Unique arg-max class, or [`Error::ArgmaxTie`].
    pub fn strict_label(&self, x: &[f64]) -> Result<usize> {
        let scores = self.scores(x)?;
        let k = argmax(&scores);
        if let Some(l) = (0..scores.len()).find(|&l| l != k && scores[l] == scores[k]) {
            return Err(Error::ArgmaxTie(k.min(l), k.max(l)));
        }
        Ok(k)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(invalid("factor", "must be positive"));
        }
        let rows = (0..self.biases.len())
            .map(|k| self.class_weights(k).iter().map(|v| v * factor).collect())
            .collect();
        Self::new(rows, self.biases.iter().map(|b| b * factor).collect())
    }
}

impl Classifier for MulticlassLinearModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn num_classes(&self) -> usize {
        self.biases.len()
    }

    fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        Ok((0..self.biases.len())
            .map(|k| dot(self.class_weights(k), x) + self.biases[k])
            .collect())
    }
}

impl Differentiable for MulticlassLinearModel {
    fn score_gradient(&self, x: &[f64], class: usize) -> Result<Vec<f64>> {
        check_dim(self.dim, x.len())?;
        if class >= self.biases.len() {
            return Err(invalid("class", "out of range"));
        }
        Ok(self.class_weights(class).to_vec())
    }
}
