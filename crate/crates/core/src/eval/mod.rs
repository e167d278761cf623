//! Prediction error metrics, k-fold cross-validation, and the analytic
//! yaw-versus-density sensitivity of the cubic power law.

mod crossval;
mod metrics;
mod report;
mod sensitivity;

pub use crossval::{
    compare_models, fold_assignment, kfold, CvOptions, ModelFamily, ModelRecipe, TrainedModel,
};
pub use metrics::{mae, nrmse, nrmse_from_rmse, rmse};
pub use report::{format_table, read_reports, write_reports, EvalReport, FoldErrors, REPORT_HEADER};
pub use sensitivity::{
    energy_error, ratio_curve, significance_thresholds, total_energy, yaw_density_ratio,
    SensitivityThresholds,
};
