//! Base training, class-incremental fine-tuning, balanced distillation,
//! selective dropout training and the multi-step driver.

mod base;
mod config;
mod driver;
mod objective;
mod refined;
mod sgd;

pub use base::{expand_for_step, init_base, traditional_cil_step, train_base};
pub use config::{Lambda, LrSchedule, Teacher, TermAssignment, TrainConfig};
pub use driver::{run_incremental, Method, RunTrace, StepTrace};
pub use objective::{
    balanced_distillation_loss, balanced_objective, cil_objective, cross_entropy_objective,
    BalancedLoss, CilDistill, CilLoss,
};
pub use refined::{
    balanced_train_phase, ciliate_step, compute_error_set, draw_memory, hard_sample_step,
    selective_train, CiliateOutcome, ErrorSet, RefinedLoss, StepDiagnostics,
};
pub use sgd::Phase;
