//! Datasets, incremental splits, exemplar memory and controlled corruptions.

mod corrupt;
mod csv_io;
mod dataset;
mod exemplar;
mod split;
mod synth;

pub use corrupt::{imbalance_subsample, mask_features, masked_count};
pub use csv_io::{load_csv, read_csv, save_csv, write_csv};
pub use dataset::{ClassId, LabeledDataset, Sample};
pub use exemplar::{random_exemplar_sample, ExemplarMemory};
pub use split::{split_incremental, IncrementalSchedule};
pub use synth::{synth_benchmark, synth_generate, BenchmarkParams, SynthParams};
