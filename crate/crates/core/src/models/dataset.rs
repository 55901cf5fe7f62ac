use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Labelled points sharing one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Vec<f64>>,
    labels: Vec<usize>,
    dim: usize,
    classes: usize,
}

impl Dataset {
    /// Validates and builds a dataset. `classes` must exceed every label.
    pub fn new(samples: Vec<Vec<f64>>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if samples.len() != labels.len() {
            return Err(Error::InvalidDataset(format!(
                "{} samples but {} labels",
                samples.len(),
                labels.len()
            )));
        }
        let dim = samples.first().map_or(0, Vec::len);
        for (i, s) in samples.iter().enumerate() {
            if s.len() != dim {
                return Err(Error::InvalidDataset(format!(
                    "sample {i} has dimension {}, expected {dim}",
                    s.len()
                )));
            }
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDataset(format!("sample {i} has a non-finite value")));
            }
        }
        if let Some((i, l)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
            return Err(Error::InvalidDataset(format!(
                "label {l} of sample {i} is not below the class count {classes}"
            )));
        }
        Ok(Self {
            samples,
            labels,
            dim,
            classes,
        })
    }

    /// Like [`Dataset::new`] with the class count inferred as `max label + 1` (at least 2).
    pub fn from_labelled(samples: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        let classes = labels.iter().copied().max().map_or(2, |m| (m + 1).max(2));
        Self::new(samples, labels, classes)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn samples(&self) -> &[Vec<f64>] {
        &self.samples
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], usize)> {
        self.samples.iter().map(Vec::as_slice).zip(self.labels.iter().copied())
    }

    /// Splits into `(first n, rest)`.
    pub fn split_at(&self, n: usize) -> (Dataset, Dataset) {
        let n = n.min(self.len());
        let head = Dataset {
            samples: self.samples[..n].to_vec(),
            labels: self.labels[..n].to_vec(),
            dim: self.dim,
            classes: self.classes,
        };
        let tail = Dataset {
            samples: self.samples[n..].to_vec(),
            labels: self.labels[n..].to_vec(),
            dim: self.dim,
            classes: self.classes,
        };
        (head, tail)
    }

    /// Per-feature mean and standard deviation (zero deviations replaced by 1).
    pub(crate) fn feature_moments(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.len() as f64;
        let mut mean = alloc::vec![0.0; self.dim];
        for s in &self.samples {
            mean.iter_mut().zip(s).for_each(|(m, v)| *m += v / n);
        }
        let mut var = alloc::vec![0.0; self.dim];
        for s in &self.samples {
            var.iter_mut()
                .zip(s.iter().zip(&mean))
                .for_each(|(acc, (v, m))| *acc += (v - m) * (v - m) / n);
        }
        let std = var
            .into_iter()
            .map(|v| {
                let s = num_traits::Float::sqrt(v);
                if s > 1e-12 { s } else { 1.0 }
            })
            .collect();
        (mean, std)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn validation() {
        assert!(Dataset::new(vec![vec![1.0], vec![1.0, 2.0]], vec![0, 1], 2).is_err());
        assert!(Dataset::new(vec![vec![1.0]], vec![2], 2).is_err());
        assert!(Dataset::new(vec![vec![1.0]], vec![0, 1], 2).is_err());
        assert!(Dataset::new(vec![vec![f64::NAN]], vec![0], 2).is_err());
        let d = Dataset::from_labelled(vec![vec![1.0, 2.0], vec![3.0, 4.0]], vec![0, 2]).unwrap();
        assert_eq!((d.len(), d.dim(), d.classes()), (2, 2, 3));
    }
}
