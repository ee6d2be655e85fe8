//! Gaussian-blob classification data.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{LabeledDataset, Sample};
use crate::error::{ensure, Result};
use crate::seed::{self, tag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthParams {
    pub classes: usize,
    pub per_class: usize,
    pub feature_dim: usize,
    /// Standard deviation of each isotropic blob.
    pub cluster_spread: f64,
    /// Blob centers are standard normal draws times this factor.
    pub center_scale: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            classes: 20,
            per_class: 130,
            feature_dim: 16,
            cluster_spread: 1.0,
            center_scale: 3.0,
            seed: 0,
        }
    }
}

/// Train/test sizes on top of the blob parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchmarkParams {
    pub classes: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub feature_dim: usize,
    pub cluster_spread: f64,
    pub center_scale: f64,
    pub seed: u64,
}

impl Default for BenchmarkParams {
    fn default() -> Self {
        Self {
            classes: 20,
            train_per_class: 100,
            test_per_class: 30,
            feature_dim: 16,
            // Puts a two-hidden-layer network at roughly 0.9 joint test accuracy.
            cluster_spread: 2.5,
            center_scale: 3.0,
            seed: 0,
        }
    }
}

fn blob_centers(classes: usize, dim: usize, scale: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = seed::derived_rng(seed, &[tag::DATA, 0]);
    (0..classes)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    scale * z
                })
                .collect::<Vec<f64>>()
        })
        .collect()
}

/// One blob per class, samples ordered by class, ids sequential from 0.
pub fn synth_generate(params: &SynthParams) -> Result<LabeledDataset> {
    ensure!(
        params.classes > 0 && params.per_class > 0 && params.feature_dim > 0,
        Parameter,
        "classes, per_class and feature_dim must be positive"
    );
    ensure!(
        params.cluster_spread.is_finite() && params.cluster_spread >= 0.0,
        Parameter,
        "cluster_spread must be finite and non-negative, got {}",
        params.cluster_spread
    );
    ensure!(
        params.center_scale.is_finite(),
        Parameter,
        "center_scale must be finite"
    );
    let centers = blob_centers(
        params.classes,
        params.feature_dim,
        params.center_scale,
        params.seed,
    );
    let mut samples = Vec::with_capacity(params.classes * params.per_class);
    for (label, center) in centers.iter().enumerate() {
        let mut rng = seed::derived_rng(params.seed, &[tag::DATA, 1, label as u64]);
        for _ in 0..params.per_class {
            let features = center
                .iter()
                .map(|&c| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    c + params.cluster_spread * z
                })
                .collect();
            samples.push(Sample {
                id: samples.len() as u64,
                features,
                label,
            });
        }
    }
    LabeledDataset::new(samples, (0..params.classes).collect(), params.feature_dim)
}

/// Train and test sets drawn from the same blobs. Within each class the first
/// `train_per_class` draws go to train, the rest to test; ids stay unique
/// across both sets.
pub fn synth_benchmark(params: &BenchmarkParams) -> Result<(LabeledDataset, LabeledDataset)> {
    ensure!(
        params.train_per_class > 0 && params.test_per_class > 0,
        Parameter,
        "train and test sizes per class must be positive"
    );
    let per_class = params.train_per_class + params.test_per_class;
    let all = synth_generate(&SynthParams {
        classes: params.classes,
        per_class,
        feature_dim: params.feature_dim,
        cluster_spread: params.cluster_spread,
        center_scale: params.center_scale,
        seed: params.seed,
    })?;
    let (train, test): (Vec<_>, Vec<_>) = all
        .samples()
        .iter()
        .cloned()
        .enumerate()
        .partition(|(i, _)| i % per_class < params.train_per_class);
    let strip = |v: Vec<(usize, Sample)>| v.into_iter().map(|(_, s)| s).collect();
    Ok((
        all.with_samples(strip(train)),
        all.with_samples(strip(test)),
    ))
}
