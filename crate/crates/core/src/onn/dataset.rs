use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{MeshError, Result};
use crate::linalg::Complex;
use crate::rng;

/// Labelled real feature vectors. Features are stored raw; `encoded`
/// turns a sample into unit-power optical amplitudes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub n_features: usize,
    pub n_classes: usize,
}

impl Dataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>, n_features: usize, n_classes: usize) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(MeshError::Dimension(format!(
                "{} samples but {} labels",
                features.len(),
                labels.len()
            )));
        }
        if let Some(f) = features.iter().find(|f| f.len() != n_features) {
            return Err(MeshError::Dimension(format!(
                "sample with {} features, expected {n_features}",
                f.len()
            )));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(MeshError::InvalidArgument(format!("label {l} out of {n_classes} classes")));
        }
        Ok(Self {
            features,
            labels,
            n_features,
            n_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Real amplitudes scaled to unit total power. An all-zero sample stays zero.
    pub fn encoded(&self, i: usize) -> Vec<Complex> {
        let f = &self.features[i];
        let norm = f.iter().map(|x| x * x).sum::<f64>().sqrt();
        let s = if norm > 0.0 { 1.0 / norm } else { 0.0 };
        f.iter().map(|&x| Complex::new(x * s, 0.0)).collect()
    }

    pub fn one_hot(&self, i: usize) -> Vec<f64> {
        let mut y = vec![0.0; self.n_classes];
        y[self.labels[i]] = 1.0;
        y
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            n_features: self.n_features,
            n_classes: self.n_classes,
        }
    }

    /// Shuffles with `seed` and splits off the first `fraction` of samples.
    pub fn split(&self, fraction: f64, seed: u64) -> (Dataset, Dataset) {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut rng::stream(seed, &[0x5e1e]));
        let k = ((self.len() as f64) * fraction.clamp(0.0, 1.0)).round() as usize;
        (self.subset(&idx[..k]), self.subset(&idx[k..]))
    }

    pub fn take(&self, count: usize) -> Dataset {
        let idx: Vec<usize> = (0..count.min(self.len())).collect();
        self.subset(&idx)
    }

    pub fn class_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.n_classes];
        for &l in &self.labels {
            h[l] += 1;
        }
        h
    }
}

/// Class `k` is drawn around `separation·e_k` with isotropic Gaussian
/// scatter of RMS radius `spread` (per-axis deviation `spread/√d`).
/// Samples are interleaved by class.
pub fn gaussian_dataset(n_classes: usize, per_class: usize, separation: f64, spread: f64, seed: u64) -> Result<Dataset> {
    if n_classes < 2 {
        return Err(MeshError::InvalidArgument("need at least two classes".into()));
    }
    if !(spread >= 0.0 && spread.is_finite() && separation.is_finite()) {
        return Err(MeshError::InvalidArgument("separation and spread must be finite, spread >= 0".into()));
    }
    let d = n_classes;
    let sigma = spread / (d as f64).sqrt();
    let mut rng = rng::stream(seed, &[0x6a55]);
    let mut features = Vec::with_capacity(n_classes * per_class);
    let mut labels = Vec::with_capacity(n_classes * per_class);
    for _ in 0..per_class {
        for k in 0..n_classes {
            let mut x: Vec<f64> = (0..d)
                .map(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    z * sigma
                })
                .collect();
            x[k] += separation;
            features.push(x);
            labels.push(k);
        }
    }
    Dataset::new(features, labels, d, n_classes)
}
