use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use powercurve::{Category, Error};

mod commands;
mod saved;

/// Multi-input wind turbine power curves: experimental design, simulation,
/// Gaussian-process and baseline models, and cross-validated comparison.
#[derive(Debug, Parser)]
#[command(name = "powercurve", version)]
pub struct Cli {
    /// Master seed; per-purpose seeds are derived from it.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Suppress informational output on standard output.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Primary output file.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a Sobol design over the seven environmental variables.
    Design {
        #[arg(long)]
        n: usize,
        /// JSON file overriding variable ranges.
        #[arg(long)]
        ranges: Option<PathBuf>,
    },
    /// Evaluate the analytic turbine model on a design.
    Simulate {
        #[arg(long)]
        design: PathBuf,
        /// Standard deviation of Gaussian noise added to mean power, kW.
        #[arg(long, default_value_t = 0.0)]
        noise_mean_kw: f64,
        /// Relative standard deviation of noise on the power standard deviation.
        #[arg(long, default_value_t = 0.0)]
        noise_sd_frac: f64,
        /// JSON file with turbine constants.
        #[arg(long)]
        turbine: Option<PathBuf>,
    },
    /// Train one model and save it.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        recipe: RecipeArgs,
    },
    /// Append model predictions to a dataset as `pred_kw`.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// k-fold cross-validation of one model.
    Crossval {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        recipe: RecipeArgs,
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// Cut folds from consecutive rows instead of shuffling first.
        #[arg(long)]
        contiguous: bool,
    },
    /// Input relevance of a trained GP from its length-scales.
    Relevance {
        #[arg(long)]
        model: PathBuf,
    },
    /// Yaw angles where yaw sensitivity overtakes density sensitivity.
    Sensitivity {
        #[arg(long)]
        rho_min: f64,
        #[arg(long)]
        rho_max: f64,
        #[arg(long, default_value_t = 30.0)]
        yaw_max: f64,
        #[arg(long, default_value_t = 1.0)]
        yaw_step: f64,
    },
    /// Merge cross-validation report files into one table.
    Report {
        #[arg(required = true, num_args = 1..)]
        reports: Vec<PathBuf>,
    },
    /// Join buoy meteorological, wave and wind-direction files into a dataset.
    Align {
        #[arg(long)]
        fast: PathBuf,
        #[arg(long)]
        wave: PathBuf,
        /// 1 Hz wind directions for the yaw proxy.
        #[arg(long)]
        directions: PathBuf,
        /// Samples per yaw-proxy window.
        #[arg(long, default_value_t = 600)]
        window: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StepRuleArg {
    Lbfgs,
    Steepest,
}

#[derive(Debug, Args)]
pub struct RecipeArgs {
    /// binning, iec-bins, gp or fracpoly.
    #[arg(long)]
    pub model: String,
    /// Comma-separated inputs for gp, e.g. `v,yaw,rho`.
    #[arg(long, default_value = "v")]
    pub inputs: String,
    /// `mean` or `sd`.
    #[arg(long, default_value = "mean")]
    pub target: String,
    #[arg(long, default_value_t = 0.5)]
    pub bin_width: f64,
    #[arg(long, default_value_t = 300)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 3)]
    pub restarts: usize,
    #[arg(long, value_enum, default_value_t = StepRuleArg::Lbfgs)]
    pub step_rule: StepRuleArg,
    /// Fix the GP noise variance instead of learning it.
    #[arg(long)]
    pub noise_var: Option<f64>,
    /// Give the GP a linear prior mean.
    #[arg(long)]
    pub linear_mean: bool,
}

fn exit_code(category: Category) -> u8 {
    match category {
        Category::Usage => 2,
        Category::Io => 3,
        Category::Parse => 4,
        Category::Numerical => 5,
    }
}

fn fail(category: Category, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("powercurve: {} error: {message}", category.name());
    ExitCode::from(exit_code(category))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let text = e.to_string();
            return fail(Category::Usage, text.trim_start_matches("error: ").trim_end());
        }
        Err(e) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.category(), &e),
    }
}

impl From<StepRuleArg> for powercurve::gp::StepRule {
    fn from(s: StepRuleArg) -> Self {
        match s {
            StepRuleArg::Lbfgs => powercurve::gp::StepRule::Lbfgs,
            StepRuleArg::Steepest => powercurve::gp::StepRule::SteepestDescent,
        }
    }
}

pub(crate) fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_distinct() {
        let codes = [Category::Usage, Category::Io, Category::Parse, Category::Numerical].map(exit_code);
        assert_eq!(codes, [2, 3, 4, 5]);
    }

    #[test]
    fn seed_is_global() {
        let cli = Cli::try_parse_from(["powercurve", "design", "--n", "3", "--seed", "9"]).unwrap();
        assert_eq!(cli.seed, 9);
        assert!(Cli::try_parse_from(["powercurve", "design"]).is_err());
    }
}
