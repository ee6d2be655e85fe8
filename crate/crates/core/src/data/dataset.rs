use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::nn::Tensor2;

pub type ClassId = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: u64,
    pub features: Vec<f64>,
    pub label: ClassId,
}

/// Samples with a fixed feature dimension and a declared, ordered class set.
///
/// The class set may be a superset of the labels present. Its order is
/// meaningful: when a dataset feeds a model, class `class_set[i]` is not
/// implied to be output column `i`; callers that need that mapping relabel
/// explicitly (see [`LabeledDataset::relabel`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    samples: Vec<Sample>,
    class_set: Vec<ClassId>,
    feature_dim: usize,
}

impl LabeledDataset {
    pub fn new(samples: Vec<Sample>, class_set: Vec<ClassId>, feature_dim: usize) -> Result<Self> {
        let mut declared = HashSet::with_capacity(class_set.len());
        for &c in &class_set {
            ensure!(
                declared.insert(c),
                RejectedInput,
                "class {c} declared twice"
            );
        }
        let mut ids = HashSet::with_capacity(samples.len());
        for s in &samples {
            ensure!(
                ids.insert(s.id),
                RejectedInput,
                "duplicate sample id {}",
                s.id
            );
            ensure!(
                s.features.len() == feature_dim,
                RejectedInput,
                "sample {} has {} features, dataset dimension is {feature_dim}",
                s.id,
                s.features.len()
            );
            ensure!(
                declared.contains(&s.label),
                RejectedInput,
                "sample {} has undeclared label {}",
                s.id,
                s.label
            );
            ensure!(
                s.features.iter().all(|v| v.is_finite()),
                RejectedInput,
                "sample {} has non-finite features",
                s.id
            );
        }
        Ok(Self {
            samples,
            class_set,
            feature_dim,
        })
    }

    /// Class set = labels present, in order of first appearance.
    pub fn from_samples(samples: Vec<Sample>, feature_dim: usize) -> Result<Self> {
        let mut seen = HashSet::new();
        let class_set = samples
            .iter()
            .filter(|s| seen.insert(s.label))
            .map(|s| s.label)
            .collect();
        Self::new(samples, class_set, feature_dim)
    }

    pub fn empty(feature_dim: usize) -> Self {
        Self {
            samples: Vec::new(),
            class_set: Vec::new(),
            feature_dim,
        }
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }

    pub fn class_set(&self) -> &[ClassId] {
        &self.class_set
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn ids(&self) -> Vec<u64> {
        self.samples.iter().map(|s| s.id).collect()
    }

    pub fn labels(&self) -> Vec<ClassId> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn features(&self) -> Tensor2 {
        let mut data = Vec::with_capacity(self.samples.len() * self.feature_dim);
        for s in &self.samples {
            data.extend_from_slice(&s.features);
        }
        Tensor2::from_vec(self.samples.len(), self.feature_dim, data)
            .expect("validated on construction")
    }

    /// Features of the samples at `indices`, in that order.
    pub fn features_at(&self, indices: &[usize]) -> Tensor2 {
        let mut data = Vec::with_capacity(indices.len() * self.feature_dim);
        for &i in indices {
            data.extend_from_slice(&self.samples[i].features);
        }
        Tensor2::from_vec(indices.len(), self.feature_dim, data).expect("validated on construction")
    }

    /// Per-class sample counts keyed by class id (only classes present).
    pub fn class_counts(&self) -> BTreeMap<ClassId, usize> {
        let mut counts = BTreeMap::new();
        for s in &self.samples {
            *counts.entry(s.label).or_insert(0) += 1;
        }
        counts
    }

    /// Declared classes that have at least one sample, in class-set order.
    pub fn present_classes(&self) -> Vec<ClassId> {
        let counts = self.class_counts();
        self.class_set
            .iter()
            .copied()
            .filter(|c| counts.contains_key(c))
            .collect()
    }

    /// Keep only samples of `classes`; the class set becomes `classes` in that order.
    pub fn filter_classes(&self, classes: &[ClassId]) -> Result<Self> {
        let keep: HashSet<_> = classes.iter().copied().collect();
        let samples = self
            .samples
            .iter()
            .filter(|s| keep.contains(&s.label))
            .cloned()
            .collect();
        Self::new(samples, classes.to_vec(), self.feature_dim)
    }

    /// Keep samples whose id passes `pred`, class set unchanged.
    pub fn filter_ids(&self, mut pred: impl FnMut(u64) -> bool) -> Self {
        Self {
            samples: self
                .samples
                .iter()
                .filter(|s| pred(s.id))
                .cloned()
                .collect(),
            class_set: self.class_set.clone(),
            feature_dim: self.feature_dim,
        }
    }

    /// Concatenate two datasets; class sets are merged preserving order.
    pub fn union(&self, other: &LabeledDataset) -> Result<Self> {
        ensure!(
            self.feature_dim == other.feature_dim || other.is_empty() || self.is_empty(),
            RejectedInput,
            "feature dims differ: {} vs {}",
            self.feature_dim,
            other.feature_dim
        );
        let dim = if self.is_empty() && self.class_set.is_empty() {
            other.feature_dim
        } else {
            self.feature_dim
        };
        let mut class_set = self.class_set.clone();
        for &c in &other.class_set {
            if !class_set.contains(&c) {
                class_set.push(c);
            }
        }
        let mut samples = self.samples.clone();
        samples.extend(other.samples.iter().cloned());
        Self::new(samples, class_set, dim)
    }

    /// Map labels through `map`; the class set is mapped in order.
    pub fn relabel(&self, map: &BTreeMap<ClassId, ClassId>) -> Result<Self> {
        let lookup = |c: ClassId| {
            map.get(&c)
                .copied()
                .ok_or_else(|| Error::RejectedInput(format!("no mapping for class {c}")))
        };
        let class_set = self
            .class_set
            .iter()
            .map(|&c| lookup(c))
            .collect::<Result<Vec<_>>>()?;
        let samples = self
            .samples
            .iter()
            .map(|s| {
                Ok(Sample {
                    id: s.id,
                    features: s.features.clone(),
                    label: lookup(s.label)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(samples, class_set, self.feature_dim)
    }

    pub(crate) fn with_samples(&self, samples: Vec<Sample>) -> Self {
        Self {
            samples,
            class_set: self.class_set.clone(),
            feature_dim: self.feature_dim,
        }
    }

    pub(crate) fn with_class_set(mut self, class_set: Vec<ClassId>) -> Self {
        self.class_set = class_set;
        self
    }
}
