//! Non-GP power models: wind-speed binning (plain and IEC density-corrected)
//! and the fractional-polynomial curve for power standard deviation.

mod binning;
mod fracpoly;

pub use binning::{fit_binning, predict_binning, Bin, BinnedCurve, DEFAULT_BIN_WIDTH};
pub use fracpoly::{
    fit_fracpoly, fit_fracpoly_with, fracpoly_eval, fracpoly_eval_scaled, sd_normalization,
    FracPolyCoeffs, FracPolyFit, FracPolyFitOptions, DEFAULT_BETA_SCALE,
};
