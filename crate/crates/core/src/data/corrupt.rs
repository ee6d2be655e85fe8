//! Controlled corruptions for the dataset-bias probes.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index;

use super::{ClassId, LabeledDataset, Sample};
use crate::error::{ensure, Result};
use crate::seed::{self, tag};

/// Number of coordinates `mask_features` zeroes per sample.
pub fn masked_count(mask_ratio: f64, feature_dim: usize) -> usize {
    (mask_ratio * feature_dim as f64).round() as usize
}

/// Zero `round(ratio * dim)` random coordinates in every sample. The choice
/// for each sample depends only on `(seed, sample id)`.
pub fn mask_features(ds: &LabeledDataset, mask_ratio: f64, seed: u64) -> Result<LabeledDataset> {
    ensure!(
        (0.0..=1.0).contains(&mask_ratio),
        Parameter,
        "mask ratio must be in [0, 1], got {mask_ratio}"
    );
    let k = masked_count(mask_ratio, ds.feature_dim()).min(ds.feature_dim());
    if k == 0 {
        return Ok(ds.clone());
    }
    let samples = ds
        .samples()
        .iter()
        .map(|s| {
            let mut rng = seed::derived_rng(seed, &[tag::MASK, s.id]);
            let mut features = s.features.clone();
            for j in index::sample(&mut rng, features.len(), k) {
                features[j] = 0.0;
            }
            Sample {
                id: s.id,
                features,
                label: s.label,
            }
        })
        .collect();
    Ok(ds.with_samples(samples))
}

/// Draw exactly `counts[c]` samples of each listed class. Classes missing
/// from `counts` are kept whole; a count of 0 removes the class entirely.
pub fn imbalance_subsample(
    ds: &LabeledDataset,
    counts: &BTreeMap<ClassId, usize>,
    seed: u64,
) -> Result<LabeledDataset> {
    let available = ds.class_counts();
    for (&class, &want) in counts {
        let have = available.get(&class).copied().unwrap_or(0);
        ensure!(
            want <= have,
            Parameter,
            "requested {want} samples of class {class}, only {have} available"
        );
    }
    let mut keep = BTreeSet::new();
    for (&class, &want) in counts {
        let members: Vec<usize> = ds
            .samples()
            .iter()
            .enumerate()
            .filter(|(_, s)| s.label == class)
            .map(|(i, _)| i)
            .collect();
        let mut rng = seed::derived_rng(seed, &[tag::EXEMPLAR, 0xB1A5, class as u64]);
        keep.extend(
            index::sample(&mut rng, members.len(), want)
                .into_iter()
                .map(|j| members[j]),
        );
    }
    let samples = ds
        .samples()
        .iter()
        .enumerate()
        .filter(|(i, s)| !counts.contains_key(&s.label) || keep.contains(i))
        .map(|(_, s)| s.clone())
        .collect();
    let class_set = ds
        .class_set()
        .iter()
        .copied()
        .filter(|c| counts.get(c) != Some(&0))
        .collect();
    Ok(ds.with_samples(samples).with_class_set(class_set))
}
