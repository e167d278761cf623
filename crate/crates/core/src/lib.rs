//! Multi-input power curves for offshore wind turbines.
//!
//! The crate covers the whole modeling loop:
//!
//! * [`design`] and [`sobol`]: quasi-random experimental designs over wind
//!   speed, yaw misalignment, wave height and direction, temperature,
//!   pressure and humidity;
//! * [`atmosphere`]: moist-air density, the IEC density correction and buoy
//!   data preprocessing;
//! * [`oracle`]: a seeded analytic turbine model that turns designs into
//!   power datasets;
//! * [`gp`]: exact Gaussian-process regression with an ARD squared-exponential
//!   kernel, trained by marginal-likelihood minimization;
//! * [`baselines`]: binning, the IEC method of bins and a fractional
//!   polynomial for power standard deviation;
//! * [`eval`]: error metrics, k-fold cross-validation, and yaw/density
//!   sensitivity quantities.
//!
//! Datasets travel between stages as CSV files, see [`data`].

pub mod atmosphere;
pub mod baselines;
pub mod data;
pub mod design;
pub mod error;
pub mod eval;
pub mod gp;
pub mod oracle;
pub mod seed;
pub mod sobol;

pub use data::{Dataset, EnvSample, PowerRecord, Row, Target, Variable};
pub use error::{Category, Error, Result};
pub use oracle::{OracleConfig, TurbineSpec};
