use std::collections::BTreeMap;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::{ClassId, LabeledDataset};
use crate::error::{ensure, Result};
use crate::seed::{self, tag};

/// Capacity-bounded replay store of old-class samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExemplarMemory {
    capacity: usize,
    data: LabeledDataset,
}

impl ExemplarMemory {
    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn data(&self) -> &LabeledDataset {
        &self.data
    }

    pub fn into_data(self) -> LabeledDataset {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Equal split of `capacity` over classes (in order), remainder to the first
/// classes. Classes with fewer samples than their share keep everything and
/// the surplus goes round-robin to the others.
pub(crate) fn allocate(capacity: usize, available: &[usize]) -> Vec<usize> {
    let mut alloc = vec![0; available.len()];
    let mut remaining = capacity;
    while remaining > 0 {
        let mut gave = false;
        for (a, &cap) in alloc.iter_mut().zip(available) {
            if remaining > 0 && *a < cap {
                *a += 1;
                remaining -= 1;
                gave = true;
            }
        }
        if !gave {
            break;
        }
    }
    alloc
}

/// Random class-balanced exemplar draw without replacement.
pub fn random_exemplar_sample(
    ds: &LabeledDataset,
    capacity: usize,
    seed: u64,
) -> Result<ExemplarMemory> {
    let classes = ds.present_classes();
    ensure!(
        capacity >= classes.len(),
        Parameter,
        "capacity {capacity} cannot hold one sample for each of {} classes",
        classes.len()
    );
    let mut by_class: BTreeMap<ClassId, Vec<usize>> = BTreeMap::new();
    for (i, s) in ds.samples().iter().enumerate() {
        by_class.entry(s.label).or_default().push(i);
    }
    let available: Vec<usize> = classes.iter().map(|c| by_class[c].len()).collect();
    let quota = allocate(capacity, &available);

    let mut chosen = Vec::with_capacity(capacity);
    for (&class, &k) in classes.iter().zip(&quota) {
        let members = &by_class[&class];
        let mut rng = seed::derived_rng(seed, &[tag::EXEMPLAR, class as u64]);
        let mut picked: Vec<usize> = index::sample(&mut rng, members.len(), k)
            .into_iter()
            .map(|j| members[j])
            .collect();
        picked.sort_unstable();
        chosen.extend(picked);
    }
    let samples = chosen.iter().map(|&i| ds.samples()[i].clone()).collect();
    let data = ds.with_samples(samples).with_class_set(classes);
    Ok(ExemplarMemory { capacity, data })
}
