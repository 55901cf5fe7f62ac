//! Classifiers, their gradient oracles, and the small trainers used to build
//! self-contained experiments.
//!
//! Every model exposes per-class scores `f_k(x)` and labels by arg-max with
//! ties going to the smallest class index. A binary model with a single
//! decision function `f` is presented as the score pair `(0, f)`, so that
//! `label(x) = 1` exactly when `f(x) > 0`.

mod dataset;
mod linear;
mod mlp;
mod train;

use alloc::vec::Vec;

pub use dataset::Dataset;
pub use linear::{LinearModel, MulticlassLinearModel};
pub use mlp::{Activation, DenseLayer, MlpModel};
pub use train::{train_logistic, train_mlp, LogisticConfig, MlpConfig, TrainingSummary};

use crate::error::{check_dim, invalid, Result};

/// A label oracle.
pub trait Classifier {
    fn dim(&self) -> usize;

    fn num_classes(&self) -> usize;

    /// Per-class scores `f_k(x)`.
    fn scores(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// `argmax_k f_k(x)`, smallest index on ties.
    fn label(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.scores(x)?))
    }
}

/// A classifier whose scores are differentiable in the input.
pub trait Differentiable: Classifier {
    /// `∇ f_class(x)`.
    fn score_gradient(&self, x: &[f64], class: usize) -> Result<Vec<f64>>;
}

/// `∇(f_k − f_l)(x)`; without an explicit pair this is `∇f` of a binary model,
/// i.e. the pair `(1, 0)`.
pub fn gradient<M: Differentiable + ?Sized>(
    model: &M,
    x: &[f64],
    class_pair: Option<(usize, usize)>,
) -> Result<Vec<f64>> {
    check_dim(model.dim(), x.len())?;
    let (k, l) = class_pair.unwrap_or((1, 0));
    let classes = model.num_classes();
    if k >= classes || l >= classes {
        return Err(invalid(
            "class_pair",
            alloc::format!("({k}, {l}) out of range for {classes} classes"),
        ));
    }
    let mut gk = model.score_gradient(x, k)?;
    let gl = model.score_gradient(x, l)?;
    gk.iter_mut().zip(&gl).for_each(|(a, b)| *a -= b);
    Ok(gk)
}

pub(crate) fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Any of the concrete models, for code that dispatches at runtime.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Linear(LinearModel),
    MulticlassLinear(MulticlassLinearModel),
    Mlp(MlpModel),
}

impl Classifier for Model {
    fn dim(&self) -> usize {
        match self {
            Model::Linear(m) => m.dim(),
            Model::MulticlassLinear(m) => m.dim(),
            Model::Mlp(m) => m.dim(),
        }
    }

    fn num_classes(&self) -> usize {
        match self {
            Model::Linear(m) => m.num_classes(),
            Model::MulticlassLinear(m) => m.num_classes(),
            Model::Mlp(m) => m.num_classes(),
        }
    }

    fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Model::Linear(m) => m.scores(x),
            Model::MulticlassLinear(m) => m.scores(x),
            Model::Mlp(m) => m.scores(x),
        }
    }

    fn label(&self, x: &[f64]) -> Result<usize> {
        match self {
            Model::Linear(m) => m.label(x),
            Model::MulticlassLinear(m) => m.label(x),
            Model::Mlp(m) => m.label(x),
        }
    }
}

impl Differentiable for Model {
    fn score_gradient(&self, x: &[f64], class: usize) -> Result<Vec<f64>> {
        match self {
            Model::Linear(m) => m.score_gradient(x, class),
            Model::MulticlassLinear(m) => m.score_gradient(x, class),
            Model::Mlp(m) => m.score_gradient(x, class),
        }
    }
}

impl From<LinearModel> for Model {
    fn from(m: LinearModel) -> Self {
        Model::Linear(m)
    }
}

impl From<MulticlassLinearModel> for Model {
    fn from(m: MulticlassLinearModel) -> Self {
        Model::MulticlassLinear(m)
    }
}

impl From<MlpModel> for Model {
    fn from(m: MlpModel) -> Self {
        Model::Mlp(m)
    }
}
