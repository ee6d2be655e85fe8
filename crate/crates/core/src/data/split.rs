use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{ClassId, LabeledDataset};
use crate::error::{ensure, Result};
use crate::seed::{self, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncrementalSchedule {
    pub steps: usize,
    pub classes_per_step: usize,
    /// Seed of the class-order permutation.
    pub order_seed: u64,
}

impl IncrementalSchedule {
    pub fn validate(&self, total_classes: usize) -> Result<()> {
        ensure!(
            self.steps >= 1,
            Parameter,
            "schedule needs at least one step"
        );
        ensure!(
            self.classes_per_step >= 1,
            Parameter,
            "classes_per_step must be at least 1"
        );
        ensure!(
            self.steps * self.classes_per_step <= total_classes,
            Parameter,
            "schedule needs {} x {} classes but only {total_classes} exist",
            self.steps,
            self.classes_per_step
        );
        Ok(())
    }

    /// Classes introduced at each step, in permuted order.
    pub fn step_classes(&self, class_set: &[ClassId]) -> Result<Vec<Vec<ClassId>>> {
        self.validate(class_set.len())?;
        let mut order = class_set.to_vec();
        order.shuffle(&mut seed::derived_rng(self.order_seed, &[tag::SPLIT]));
        Ok(order
            .chunks(self.classes_per_step)
            .take(self.steps)
            .map(<[ClassId]>::to_vec)
            .collect())
    }
}

/// One label-disjoint dataset per step; each step's class set lists its
/// classes in permuted order and samples keep their original order.
pub fn split_incremental(
    ds: &LabeledDataset,
    sched: &IncrementalSchedule,
) -> Result<Vec<LabeledDataset>> {
    sched
        .step_classes(ds.class_set())?
        .iter()
        .map(|classes| ds.filter_classes(classes))
        .collect()
}
