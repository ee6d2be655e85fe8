//! Versioned experiment configuration.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use cilfair_core::data::{load_csv, synth_benchmark, BenchmarkParams};
use cilfair_core::refine::DivergenceMetric;
use cilfair_core::{IncrementalSchedule, LabeledDataset, Method, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::probe::ProbeKind;
use crate::sweep::SweepParam;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub dataset: DatasetSpec,
    #[serde(default = "default_schedule")]
    pub schedule: IncrementalSchedule,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Used when `--out` is not given.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub probe: ProbeParams,
    #[serde(default)]
    pub sweep: SweepParams,
}

/// Synthetic blobs or a pair of CSV files. Relative CSV paths are resolved
/// against the directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    Synthetic(BenchmarkParams),
    Csv { train: PathBuf, test: PathBuf },
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::Synthetic(BenchmarkParams::default())
    }
}

/// Root-cause probe settings. Every probe trains a base model on the first
/// `base_classes` classes of the schedule's class order and runs one
/// incremental step with the next `new_classes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeParams {
    pub base_classes: usize,
    pub new_classes: usize,
    pub mask_ratios: Vec<f64>,
    pub memory_sizes: Vec<usize>,
    /// Exemplar redraws per seed in the coverage-bias probe.
    pub repetitions: usize,
    /// Training samples kept per new class in the imbalanced condition.
    pub imbalance_per_class: usize,
}

impl Default for ProbeParams {
    fn default() -> Self {
        Self {
            base_classes: 10,
            new_classes: 10,
            mask_ratios: vec![0.0, 0.1, 0.2],
            memory_sizes: vec![50, 100, 200, 400],
            repetitions: 20,
            imbalance_per_class: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepParams {
    pub method: Method,
    pub eta: Vec<f64>,
    pub activation_thresholds: Vec<f64>,
    pub coverage_thresholds: Vec<f64>,
    pub divergence_metrics: Vec<DivergenceMetric>,
    pub classes_per_step: Vec<usize>,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            method: Method::Ciliate,
            eta: vec![0.01, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7],
            activation_thresholds: vec![0.5, 0.75, 0.9, 0.99],
            coverage_thresholds: vec![0.5, 0.75, 0.95],
            divergence_metrics: DivergenceMetric::ALL.to_vec(),
            classes_per_step: vec![20, 5, 2],
        }
    }
}

fn default_schedule() -> IncrementalSchedule {
    IncrementalSchedule {
        steps: 5,
        classes_per_step: 4,
        order_seed: 0,
    }
}

fn default_methods() -> Vec<Method> {
    vec![Method::Traditional, Method::Ciliate]
}

fn default_seeds() -> Vec<u64> {
    (1..=5).collect()
}

/// What a config is about to be used for; decides which sections are checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    Probe(ProbeKind),
    Sweep(SweepParam),
}

/// A validated config with its datasets loaded.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: ExperimentConfig,
    pub train: LabeledDataset,
    pub test: LabeledDataset,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| {
            HarnessError::config(
                "config",
                format!("{e} (line {}, column {})", e.line(), e.column()),
            )
        })?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            HarnessError::config("config", format!("cannot read {}: {e}", path.display()))
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is plain data")
    }

    /// Checks that need no data.
    pub fn validate_static(&self, command: Command) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(HarnessError::config(
                "schema_version",
                format!(
                    "unsupported version {}, expected {SCHEMA_VERSION}",
                    self.schema_version
                ),
            ));
        }
        self.train
            .validate()
            .map_err(|e| HarnessError::config("train", e.to_string()))?;
        if self.seeds.is_empty() {
            return Err(HarnessError::config(
                "seeds",
                "at least one seed is required",
            ));
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return Err(HarnessError::config("seeds", "seeds must be distinct"));
        }
        match command {
            Command::Run => {
                if self.methods.is_empty() {
                    return Err(HarnessError::config(
                        "methods",
                        "at least one method is required",
                    ));
                }
                if self.methods.iter().collect::<BTreeSet<_>>().len() != self.methods.len() {
                    return Err(HarnessError::config("methods", "methods must be distinct"));
                }
            }
            Command::Probe(kind) => self.validate_probe(kind)?,
            Command::Sweep(param) => self.validate_sweep(param)?,
        }
        Ok(())
    }

    fn validate_probe(&self, kind: ProbeKind) -> Result<()> {
        let p = &self.probe;
        if p.base_classes == 0 || p.new_classes == 0 {
            return Err(HarnessError::config(
                "probe.base_classes",
                "base_classes and new_classes must both be at least 1",
            ));
        }
        match kind {
            ProbeKind::Mask => {
                if p.mask_ratios.is_empty() {
                    return Err(HarnessError::config("probe.mask_ratios", "list is empty"));
                }
                if let Some(a) = p.mask_ratios.iter().find(|a| !(0.0..=1.0).contains(*a)) {
                    return Err(HarnessError::config(
                        "probe.mask_ratios",
                        format!("ratio {a} is outside [0, 1]"),
                    ));
                }
            }
            ProbeKind::Memory => {
                if p.memory_sizes.is_empty() {
                    return Err(HarnessError::config("probe.memory_sizes", "list is empty"));
                }
                let old = p.base_classes;
                if let Some(m) = p.memory_sizes.iter().find(|&&m| m < old) {
                    return Err(HarnessError::config(
                        "probe.memory_sizes",
                        format!("capacity {m} is below the {old} old classes"),
                    ));
                }
            }
            ProbeKind::CoverageBias => {
                if p.repetitions == 0 {
                    return Err(HarnessError::config(
                        "probe.repetitions",
                        "must be at least 1",
                    ));
                }
            }
            ProbeKind::Imbalance => {
                if p.imbalance_per_class == 0 {
                    return Err(HarnessError::config(
                        "probe.imbalance_per_class",
                        "must be at least 1",
                    ));
                }
            }
            ProbeKind::Distill | ProbeKind::HardSample => {}
        }
        Ok(())
    }

    fn validate_sweep(&self, param: SweepParam) -> Result<()> {
        let s = &self.sweep;
        let unit = |field: &str, values: &[f64]| -> Result<()> {
            if values.is_empty() {
                return Err(HarnessError::config(field, "grid is empty"));
            }
            if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(HarnessError::config(
                    field,
                    format!("value {v} is outside [0, 1]"),
                ));
            }
            Ok(())
        };
        match param {
            SweepParam::Eta => unit("sweep.eta", &s.eta)?,
            SweepParam::CoverageThresholds => {
                unit("sweep.activation_thresholds", &s.activation_thresholds)?;
                unit("sweep.coverage_thresholds", &s.coverage_thresholds)?;
            }
            SweepParam::DivergenceMetric => {
                if s.divergence_metrics.is_empty() {
                    return Err(HarnessError::config(
                        "sweep.divergence_metrics",
                        "grid is empty",
                    ));
                }
            }
            SweepParam::ClassSplit => {
                if s.classes_per_step.is_empty() || s.classes_per_step.contains(&0) {
                    return Err(HarnessError::config(
                        "sweep.classes_per_step",
                        "grid must be non-empty with positive entries",
                    ));
                }
            }
        }
        Ok(())
    }

    /// Checks that depend on the loaded data.
    fn validate_with_data(&self, command: Command, train: &LabeledDataset) -> Result<()> {
        let classes = train.class_set().len();
        let sched = &self.schedule;
        if sched.steps == 0 {
            return Err(HarnessError::config("schedule.steps", "must be at least 1"));
        }
        if sched.classes_per_step == 0 {
            return Err(HarnessError::config(
                "schedule.classes_per_step",
                "must be at least 1",
            ));
        }
        let needs_schedule = matches!(
            command,
            Command::Run
                | Command::Sweep(SweepParam::Eta)
                | Command::Sweep(SweepParam::CoverageThresholds)
                | Command::Sweep(SweepParam::DivergenceMetric)
        );
        if needs_schedule && sched.steps * sched.classes_per_step > classes {
            return Err(HarnessError::config(
                "schedule.classes_per_step",
                format!(
                    "steps ({}) x classes_per_step ({}) exceeds the {classes} classes in the dataset",
                    sched.steps, sched.classes_per_step
                ),
            ));
        }
        if needs_schedule {
            self.check_capacity((sched.steps - 1) * sched.classes_per_step)?;
        }
        match command {
            Command::Sweep(SweepParam::ClassSplit) => {
                if let Some(c) = self.sweep.classes_per_step.iter().find(|&&c| c > classes) {
                    return Err(HarnessError::config(
                        "sweep.classes_per_step",
                        format!(
                            "{c} classes per step exceeds the {classes} classes in the dataset"
                        ),
                    ));
                }
                for &c in &self.sweep.classes_per_step {
                    self.check_capacity((classes / c - 1) * c)?;
                }
            }
            Command::Probe(_) if self.probe.base_classes + self.probe.new_classes > classes => {
                return Err(HarnessError::config(
                    "probe.new_classes",
                    format!(
                        "base_classes ({}) + new_classes ({}) exceeds the {classes} classes in the dataset",
                        self.probe.base_classes, self.probe.new_classes
                    ),
                ));
            }
            Command::Probe(ProbeKind::Imbalance) => {
                let counts = train.class_counts();
                let fewest = counts.values().copied().min().unwrap_or(0);
                if self.probe.imbalance_per_class > fewest {
                    return Err(HarnessError::config(
                        "probe.imbalance_per_class",
                        format!(
                            "{} exceeds the {fewest} training samples of the smallest class",
                            self.probe.imbalance_per_class
                        ),
                    ));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// The exemplar memory must hold one sample of every old class.
    fn check_capacity(&self, old_classes: usize) -> Result<()> {
        if self.train.memory_capacity < old_classes {
            return Err(HarnessError::config(
                "train.memory_capacity",
                format!(
                    "{} cannot hold one exemplar for each of the {old_classes} old classes",
                    self.train.memory_capacity
                ),
            ));
        }
        Ok(())
    }

    /// Load the datasets named by the config. `base_dir` anchors relative paths.
    pub fn load_data(&self, base_dir: &Path) -> Result<(LabeledDataset, LabeledDataset)> {
        match &self.dataset {
            DatasetSpec::Synthetic(params) => synth_benchmark(params)
                .map_err(|e| HarnessError::config("dataset.synthetic", e.to_string())),
            DatasetSpec::Csv { train, test } => {
                let load = |field: &str, p: &Path| {
                    let full = if p.is_absolute() {
                        p.to_path_buf()
                    } else {
                        base_dir.join(p)
                    };
                    load_csv(&full).map_err(|e| HarnessError::config(field, e.to_string()))
                };
                let tr = load("dataset.csv.train", train)?;
                let te = load("dataset.csv.test", test)?;
                if tr.feature_dim() != te.feature_dim() {
                    return Err(HarnessError::config(
                        "dataset.csv.test",
                        format!(
                            "feature dimension {} differs from the training set's {}",
                            te.feature_dim(),
                            tr.feature_dim()
                        ),
                    ));
                }
                Ok((tr, te))
            }
        }
    }

    /// Full validation and data loading. Nothing is written.
    pub fn prepare(self, command: Command, base_dir: &Path) -> Result<Prepared> {
        self.validate_static(command)?;
        let (train, test) = self.load_data(base_dir)?;
        self.validate_with_data(command, &train)?;
        Ok(Prepared {
            config: self,
            train,
            test,
        })
    }
}

/// Read, validate and load everything a command needs from a config file.
pub fn prepare_file(path: &Path, command: Command) -> Result<Prepared> {
    let config = ExperimentConfig::load(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    config.prepare(command, base)
}
