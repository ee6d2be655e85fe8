use serde::{Deserialize, Serialize};

use crate::coverage::CoverageConfig;
use crate::error::{ensure, Result};
use crate::refine::DivergenceMetric;

/// Weight of the old-class term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lambda {
    /// `old_classes / total_classes`.
    Auto,
    Fixed(f64),
}

impl Lambda {
    pub fn resolve(self, old_classes: usize, total_classes: usize) -> f64 {
        match self {
            Lambda::Auto => old_classes as f64 / total_classes as f64,
            Lambda::Fixed(v) => v,
        }
    }
}

/// Step decay: the rate is multiplied by `factor` once each milestone
/// (a fraction of the phase's epochs) has been reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LrSchedule {
    pub initial: f64,
    pub milestones: Vec<f64>,
    pub factor: f64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self {
            initial: 0.1,
            milestones: vec![0.4, 0.6, 0.8],
            factor: 0.1,
        }
    }
}

impl LrSchedule {
    pub fn rate(&self, epoch: usize, total_epochs: usize) -> f64 {
        let passed = self
            .milestones
            .iter()
            .filter(|&&m| epoch >= (m * total_epochs as f64).floor() as usize)
            .count();
        self.initial * self.factor.powi(passed as i32)
    }
}

/// Which model supplies the soft targets of the distillation term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Teacher {
    /// The traditionally trained incremental model.
    #[default]
    Incremental,
    Base,
}

/// Which group of the balanced loss gets the distillation term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermAssignment {
    /// Misclassified samples get cross-entropy, the rest distillation.
    #[default]
    ErrorsCrossEntropy,
    /// Misclassified samples get distillation, the rest cross-entropy.
    ErrorsDistillation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub hidden_sizes: Vec<usize>,
    pub epochs_base: usize,
    pub epochs_cil: usize,
    pub epochs_dropout_phase: usize,
    pub epochs_ordinary_phase: usize,
    pub batch_size: usize,
    pub lr: LrSchedule,
    /// Global gradient-norm bound per minibatch (none: unclipped).
    pub grad_clip: Option<f64>,
    pub lambda: Lambda,
    pub temperature: f64,
    pub dropout_rate: f64,
    pub eta: f64,
    pub divergence: DivergenceMetric,
    pub coverage: CoverageConfig,
    /// Draw exemplars with coverage verification (otherwise one random draw).
    pub verify_coverage: bool,
    /// Use the balanced distillation loss in refined training (otherwise
    /// plain cross-entropy on every sample).
    pub balanced_distillation: bool,
    pub teacher: Teacher,
    pub term_assignment: TermAssignment,
    /// Add a distillation term towards the base model to the traditional step.
    pub cil_distillation: bool,
    pub gamma: f64,
    pub memory_capacity: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_sizes: vec![64, 64],
            epochs_base: 60,
            epochs_cil: 40,
            epochs_dropout_phase: 20,
            epochs_ordinary_phase: 20,
            batch_size: 32,
            lr: LrSchedule::default(),
            grad_clip: Some(1.0),
            lambda: Lambda::Auto,
            temperature: 2.0,
            dropout_rate: 0.5,
            eta: 0.01,
            divergence: DivergenceMetric::JensenShannon,
            coverage: CoverageConfig::default(),
            verify_coverage: true,
            balanced_distillation: true,
            teacher: Teacher::Incremental,
            term_assignment: TermAssignment::ErrorsCrossEntropy,
            cil_distillation: false,
            gamma: 0.0,
            memory_capacity: 80,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.hidden_sizes.iter().all(|&h| h > 0),
            Parameter,
            "hidden sizes must be positive"
        );
        ensure!(
            self.batch_size >= 1,
            Parameter,
            "batch_size must be at least 1"
        );
        ensure!(
            self.lr.initial.is_finite() && self.lr.initial >= 0.0,
            Parameter,
            "learning rate must be finite and non-negative"
        );
        ensure!(
            self.lr.factor.is_finite() && self.lr.factor >= 0.0,
            Parameter,
            "lr decay factor must be finite and non-negative"
        );
        ensure!(
            self.lr.milestones.iter().all(|m| (0.0..=1.0).contains(m)),
            Parameter,
            "lr milestones are fractions of the epoch budget in [0, 1]"
        );
        if let Some(c) = self.grad_clip {
            ensure!(
                c.is_finite() && c > 0.0,
                Parameter,
                "grad_clip must be positive, got {c}"
            );
        }
        if let Lambda::Fixed(v) = self.lambda {
            ensure!(
                (0.0..=1.0).contains(&v),
                Parameter,
                "lambda must be in [0, 1], got {v}"
            );
        }
        ensure!(
            self.temperature.is_finite() && self.temperature > 0.0,
            Parameter,
            "temperature must be positive"
        );
        ensure!(
            (0.0..1.0).contains(&self.dropout_rate),
            Parameter,
            "dropout rate must be in [0, 1), got {}",
            self.dropout_rate
        );
        ensure!(
            (0.0..=1.0).contains(&self.eta),
            Parameter,
            "eta must be in [0, 1], got {}",
            self.eta
        );
        ensure!(self.gamma.is_finite(), Parameter, "gamma must be finite");
        self.coverage.validate()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}
