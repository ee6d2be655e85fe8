//! Fairness-aware class-incremental learning on small dense networks.
//!
//! The crate covers the network substrate ([`nn`]), datasets and incremental
//! splits ([`data`]), neuron coverage ([`coverage`]), fairness metrics
//! ([`metrics`]), divergence-based sample refinement ([`refine`]) and all
//! training procedures ([`train`]).

mod error;

pub mod coverage;
pub mod data;
pub mod metrics;
pub mod nn;
pub mod refine;
pub mod seed;
pub mod train;

pub use coverage::{neuron_coverage, verified_sample, CoverageConfig, CoverageReport, Quantifier};
pub use data::{ClassId, ExemplarMemory, IncrementalSchedule, LabeledDataset, Sample};
pub use error::{Error, Result};
pub use metrics::{ClassAccuracies, StepReport};
pub use nn::{DropoutSpec, Gradients, Mlp, Tensor2};
pub use refine::{DivergenceMetric, DivergenceRecord, RefinedSplit};
pub use train::{Method, RunTrace, TrainConfig};
