//! Robustness of classifiers to random noise.
//!
//! The crate measures how far along random directions (uniform on an ℓp ball,
//! or Gaussian) a point has to be pushed before a classifier changes its
//! label, relates that radius to the worst-case (adversarial) distance to the
//! decision boundary, and evaluates the closed-form bounds linking the two.
//!
//! Everything here works with `alloc` only. The `std` feature enables
//! `std::error::Error` on [`Error`]; `parallel` spreads Monte-Carlo trials over
//! a rayon pool without changing any result.

#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(any(feature = "std", test))]
extern crate std;

pub mod bounds;
pub mod covariance;
mod error;
pub mod geometry;
pub mod models;
pub mod noise;
pub mod norm;
pub mod quantize;
pub mod rng;
pub mod robustness;

pub use bounds::{BoundConstants, BoundReport};
pub use covariance::CovarianceSpec;
pub use error::{Error, Result};
pub use geometry::AdversarialResult;
pub use models::{Classifier, Differentiable, LinearModel, MlpModel, Model, MulticlassLinearModel};
pub use noise::NoiseModel;
pub use norm::Exponent;
pub use robustness::{RobustnessQuery, RobustnessResult, SearchMode};
