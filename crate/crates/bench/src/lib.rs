//! Fixtures shared by the kernel benchmarks.

use cilfair_core::data::{synth_generate, SynthParams};
use cilfair_core::{LabeledDataset, Mlp, Tensor2};

/// Blob dataset shaped like one step of the default benchmark.
pub fn dataset(classes: usize, per_class: usize) -> LabeledDataset {
    synth_generate(&SynthParams {
        classes,
        per_class,
        feature_dim: 16,
        cluster_spread: 2.5,
        ..Default::default()
    })
    .expect("valid synthetic parameters")
}

/// Default-sized network: 16 inputs, two hidden layers of 64.
pub fn network(classes: usize, seed: u64) -> Mlp {
    Mlp::new(&[16, 64, 64, classes], seed).expect("valid layer sizes")
}

/// First `rows` feature rows of `ds`.
pub fn batch(ds: &LabeledDataset, rows: usize) -> Tensor2 {
    let x = ds.features();
    let rows = rows.min(x.rows());
    Tensor2::from_rows(x.cols(), (0..rows).map(|r| x.row(r))).expect("rows share a width")
}
