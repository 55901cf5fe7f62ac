//! Experiment configuration, read from JSON.

use std::path::PathBuf;

use noisebound_core::{BoundConstants, Exponent};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Lp,
    Gaussian,
    Quantization,
}

/// Where the points come from. Synthetic sources generate `n` points; the
/// last `test_points` of any source are evaluated and the rest train the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    Blobs {
        d: usize,
        n: usize,
        separation: f64,
        #[serde(default = "two")]
        classes: usize,
        #[serde(default)]
        seed: u64,
    },
    BlobImages {
        n: usize,
        #[serde(default)]
        seed: u64,
    },
    Csv {
        path: PathBuf,
    },
    Idx {
        images: PathBuf,
        labels: PathBuf,
    },
}

fn two() -> usize {
    2
}

/// How the classifier is obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSource {
    Logistic {
        #[serde(default = "logistic_epochs")]
        epochs: usize,
        #[serde(default = "learning_rate")]
        learning_rate: f64,
    },
    Mlp {
        #[serde(default = "hidden")]
        hidden: Vec<usize>,
        #[serde(default = "mlp_epochs")]
        epochs: usize,
        #[serde(default = "learning_rate")]
        learning_rate: f64,
    },
    File {
        path: PathBuf,
    },
}

fn logistic_epochs() -> usize {
    300
}

fn mlp_epochs() -> usize {
    1000
}

fn learning_rate() -> f64 {
    0.5
}

fn hidden() -> Vec<usize> {
    vec![16]
}

/// Covariance used by the Gaussian experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GaussianNoise {
    /// `Σ = I/d`.
    White,
    /// Diagonal `Σ(x) ∝ 1{xᵢ ≥ t}·xᵢ`, unit trace.
    SignalDependent { threshold: f64 },
    /// A fixed matrix read from a covariance file.
    File { path: PathBuf },
}

/// Serializes an exponent as a number, or the string `"inf"`.
pub mod exponent_serde {
    use super::*;

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    fn to_repr(p: &Exponent) -> Repr {
        match p {
            Exponent::Finite(v) => Repr::Number(*v),
            Exponent::Infinity => Repr::Text("inf".into()),
        }
    }

    fn from_repr<E: serde::de::Error>(r: Repr) -> std::result::Result<Exponent, E> {
        match r {
            Repr::Number(v) => Exponent::new(v).map_err(E::custom),
            Repr::Text(s) => s.parse().map_err(E::custom),
        }
    }

    pub fn serialize<S: Serializer>(grid: &[Exponent], s: S) -> std::result::Result<S::Ok, S::Error> {
        grid.iter().map(to_repr).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Exponent>, D::Error> {
        Vec::<Repr>::deserialize(d)?.into_iter().map(from_repr).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub dataset: DatasetSource,
    pub model: ModelSource,
    #[serde(with = "exponent_serde")]
    pub p_grid: Vec<Exponent>,
    pub epsilon: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub test_points: usize,
    pub constants: BoundConstants,
    pub noise: GaussianNoise,
    /// LAF slack for nonlinear models.
    pub gamma: f64,
    /// LAF locality radius; unbounded when absent.
    pub eta: Option<f64>,
    pub dither: bool,
    /// Number of whiteness bins in the Gaussian summary.
    pub whiteness_bins: usize,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            experiment: ExperimentKind::Lp,
            dataset: DatasetSource::Blobs {
                d: 400,
                n: 2100,
                separation: 6.0,
                classes: 2,
                seed: 0,
            },
            model: ModelSource::Logistic {
                epochs: logistic_epochs(),
                learning_rate: learning_rate(),
            },
            p_grid: vec![
                Exponent::ONE,
                Exponent::Finite(1.5),
                Exponent::TWO,
                Exponent::Finite(3.0),
                Exponent::Finite(5.0),
                Exponent::Infinity,
            ],
            epsilon: 0.015,
            n_samples: 10_000,
            seed: 0,
            test_points: 100,
            constants: BoundConstants::default(),
            noise: GaussianNoise::White,
            gamma: 0.0,
            eta: None,
            dither: false,
            whiteness_bins: 5,
            output: None,
        }
    }
}

impl ExperimentConfig {
    /// Defaults suited to each pipeline.
    pub fn for_kind(kind: ExperimentKind) -> Self {
        let base = ExperimentConfig {
            experiment: kind,
            ..Default::default()
        };
        match kind {
            ExperimentKind::Lp => base,
            ExperimentKind::Gaussian => ExperimentConfig {
                epsilon: 0.15,
                p_grid: vec![Exponent::TWO],
                ..base
            },
            ExperimentKind::Quantization => ExperimentConfig {
                dataset: DatasetSource::BlobImages { n: 700, seed: 0 },
                model: ModelSource::Mlp {
                    hidden: vec![16],
                    epochs: 300,
                    learning_rate: learning_rate(),
                },
                p_grid: vec![Exponent::Infinity],
                ..base
            },
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(Error::config)?;
        config.validate()?;
        Ok(config)
    }

    /// Applies the fields present in `overrides` on top of `self`.
    pub fn merged_with(&self, overrides: &serde_json::Value) -> Result<Self> {
        let mut base = serde_json::to_value(self).map_err(Error::config)?;
        merge(&mut base, overrides);
        let config: Self = serde_json::from_value(base).map_err(Error::config)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::config("epsilon must lie in (0, 1)"));
        }
        if self.experiment == ExperimentKind::Gaussian && self.epsilon >= 1.0 / 3.0 {
            return Err(Error::config("the Gaussian bounds need epsilon < 1/3"));
        }
        if self.n_samples < 100 {
            return Err(Error::config("n_samples must be at least 100"));
        }
        if self.p_grid.is_empty() {
            return Err(Error::config("p_grid must not be empty"));
        }
        if self.test_points == 0 {
            return Err(Error::config("test_points must be positive"));
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return Err(Error::config("gamma must lie in [0, 1)"));
        }
        if self.whiteness_bins == 0 {
            return Err(Error::config("whiteness_bins must be positive"));
        }
        self.constants.validate().map_err(Error::config)
    }
}

fn merge(base: &mut serde_json::Value, overrides: &serde_json::Value) {
    match (base, overrides) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() && !has_kind(slot, v) => merge(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, o) => *b = o.clone(),
    }
}

/// Tagged sub-objects are replaced wholesale when the tag changes.
fn has_kind(slot: &serde_json::Value, v: &serde_json::Value) -> bool {
    match (slot.get("kind"), v.get("kind")) {
        (Some(a), Some(b)) => a != b,
        _ => false,
    }
}
