//! Exact Gaussian-process regression with an ARD squared-exponential kernel.
//!
//! Hyperparameters are learned by minimizing the negative log marginal
//! likelihood in log space. Inputs are z-scored and the target centered
//! before training, so length-scales are in standard-deviation units and
//! comparable across inputs.

mod fit;
mod kernel;
mod likelihood;
mod model;

pub use fit::{fit, fit_design, FitOptions, StepRule, MIN_TRAINING_ROWS};
pub use kernel::{kernel, GpHyperparameters};
pub use likelihood::{negative_log_likelihood, nll_value, NllEvaluation, JITTER_MAX, JITTER_START};
pub use model::{
    relevance_from_inverse_lengths, FitMeta, GpModel, RelevanceEntry, RelevanceReport, RestartSummary,
    TraceEntry,
};
