use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{mae, nrmse_from_rmse, rmse};
use super::report::{EvalReport, FoldErrors};
use crate::atmosphere::AtmosphereConstants;
use crate::baselines::{fit_binning, fit_fracpoly, BinnedCurve, FracPolyFit, DEFAULT_BIN_WIDTH};
use crate::data::{select_variables, Dataset, Target, Variable};
use crate::error::{Error, Result};
use crate::gp::{fit_design, FitOptions, GpModel};
use crate::oracle::TurbineSpec;
use crate::seed::{below, derive_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelFamily {
    /// Mean power per raw wind-speed bin.
    Binning,
    /// Binning after density-correcting wind speeds.
    IecBins,
    Gp,
    FracPoly,
}

impl ModelFamily {
    pub fn name(self) -> &'static str {
        match self {
            ModelFamily::Binning => "binning",
            ModelFamily::IecBins => "iec-bins",
            ModelFamily::Gp => "gp",
            ModelFamily::FracPoly => "fracpoly",
        }
    }

    /// Inputs a family always uses, or `None` when the caller chooses.
    pub fn fixed_inputs(self) -> Option<&'static [Variable]> {
        match self {
            ModelFamily::Binning => Some(&[Variable::V]),
            ModelFamily::IecBins => Some(&[Variable::V, Variable::Rho]),
            ModelFamily::FracPoly => Some(&[Variable::V, Variable::WaveH, Variable::WaveDir, Variable::Rho]),
            ModelFamily::Gp => None,
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binning" => Ok(ModelFamily::Binning),
            "iec-bins" => Ok(ModelFamily::IecBins),
            "gp" => Ok(ModelFamily::Gp),
            "fracpoly" => Ok(ModelFamily::FracPoly),
            other => Err(Error::InvalidArgument(format!(
                "unknown model `{other}`, expected binning, iec-bins, gp or fracpoly"
            ))),
        }
    }
}

/// Everything needed to train one kind of model.
#[derive(Debug, Clone)]
pub struct ModelRecipe {
    pub name: String,
    pub family: ModelFamily,
    pub inputs: Vec<Variable>,
    pub target: Target,
    pub gp: FitOptions,
    pub bin_width: f64,
    pub spec: TurbineSpec,
    pub consts: AtmosphereConstants,
}

impl ModelRecipe {
    /// A recipe with default settings. `inputs` is ignored by families with
    /// fixed inputs; the fractional polynomial only models the sd target.
    pub fn new(family: ModelFamily, inputs: &[Variable], target: Target) -> Result<Self> {
        let inputs = match family.fixed_inputs() {
            Some(fixed) => fixed.to_vec(),
            None if inputs.is_empty() => {
                return Err(Error::InvalidArgument("the gp model needs at least one input".into()))
            }
            None => inputs.to_vec(),
        };
        if family == ModelFamily::FracPoly && target != Target::Sd {
            return Err(Error::InvalidArgument("fracpoly models the sd target only".into()));
        }
        let name = match family {
            ModelFamily::Gp => format!(
                "gp({})",
                inputs.iter().map(|v| v.name()).collect::<Vec<_>>().join(",")
            ),
            other => other.name().to_string(),
        };
        Ok(ModelRecipe {
            name,
            family,
            inputs,
            target,
            gp: FitOptions::default(),
            bin_width: DEFAULT_BIN_WIDTH,
            spec: TurbineSpec::default(),
            consts: AtmosphereConstants::default(),
        })
    }

    pub fn input_names(&self) -> Vec<String> {
        self.inputs.iter().map(|v| v.name().to_string()).collect()
    }

    pub fn train(&self, ds: &Dataset) -> Result<TrainedModel> {
        match self.family {
            ModelFamily::Binning | ModelFamily::IecBins => Ok(TrainedModel::Binned(fit_binning(
                ds,
                self.target,
                self.bin_width,
                self.family == ModelFamily::IecBins,
                &self.consts,
            )?)),
            ModelFamily::Gp => {
                let dm = select_variables(ds, &self.inputs)?;
                let y = ds.targets(self.target)?;
                Ok(TrainedModel::Gp(Box::new(fit_design(&dm, &y, self.target, &self.gp)?)))
            }
            ModelFamily::FracPoly => Ok(TrainedModel::FracPoly(fit_fracpoly(ds, &self.spec)?, self.spec)),
        }
    }
}

#[derive(Debug, Clone)]
pub enum TrainedModel {
    Binned(BinnedCurve),
    Gp(Box<GpModel>),
    FracPoly(FracPolyFit, TurbineSpec),
}

impl TrainedModel {
    pub fn predict(&self, ds: &Dataset) -> Result<Vec<f64>> {
        match self {
            TrainedModel::Binned(c) => c.predict(ds),
            TrainedModel::Gp(m) => {
                let vars = m
                    .inputs
                    .iter()
                    .map(|n| n.parse())
                    .collect::<Result<Vec<Variable>>>()?;
                m.predict(select_variables(ds, &vars)?.values.as_ref())
            }
            TrainedModel::FracPoly(f, spec) => f.predict(ds, spec),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CvOptions {
    pub k: usize,
    pub seed: u64,
    /// Shuffle rows before cutting folds; otherwise folds are contiguous runs.
    pub shuffle: bool,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            k: 10,
            seed: 42,
            shuffle: true,
        }
    }
}

/// Held-out row indices of each fold, ascending within a fold. Fold sizes
/// differ by at most one and together cover `0..n` exactly once.
pub fn fold_assignment(n: usize, opts: &CvOptions) -> Result<Vec<Vec<usize>>> {
    if opts.k < 2 {
        return Err(Error::InvalidArgument(format!("k = {} must be at least 2", opts.k)));
    }
    if n < opts.k {
        return Err(Error::TooFewRows { needed: opts.k, found: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    if opts.shuffle {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, "kfold"));
        for i in (1..n).rev() {
            order.swap(i, below(&mut rng, i + 1));
        }
    }
    Ok((0..opts.k)
        .map(|f| {
            let mut fold = order[f * n / opts.k..(f + 1) * n / opts.k].to_vec();
            fold.sort_unstable();
            fold
        })
        .collect())
}

/// NRMSE reference: rated power for the mean, the largest training standard
/// deviation for the sd target.
fn reference(recipe: &ModelRecipe, train: &Dataset) -> Result<f64> {
    match recipe.target {
        Target::Mean => Ok(recipe.spec.rated_power),
        Target::Sd => Ok(train.targets(Target::Sd)?.into_iter().fold(f64::NEG_INFINITY, f64::max)),
    }
}

fn run_folds(ds: &Dataset, recipe: &ModelRecipe, folds: &[Vec<usize>]) -> Result<EvalReport> {
    let n = ds.len();
    let mut results = Vec::with_capacity(folds.len());
    for test in folds {
        let mut held_out = vec![false; n];
        test.iter().for_each(|&i| held_out[i] = true);
        let train_idx: Vec<usize> = (0..n).filter(|&i| !held_out[i]).collect();
        let train = ds.subset(&train_idx)?;
        let test_ds = ds.subset(test)?;
        let model = recipe.train(&train)?;
        let pred = model.predict(&test_ds)?;
        let truth = test_ds.targets(recipe.target)?;
        let reference = reference(recipe, &train)?;
        let r = rmse(&truth, &pred)?;
        results.push(FoldErrors {
            mae: mae(&truth, &pred)?,
            rmse: r,
            nrmse: nrmse_from_rmse(r, reference)?,
            reference: Some(reference),
        });
    }
    Ok(EvalReport {
        model: recipe.name.clone(),
        inputs: recipe.input_names(),
        target: recipe.target,
        folds: results,
    })
}

/// k-fold cross-validation: each fold is held out once while the recipe is
/// refit on the rest.
pub fn kfold(ds: &Dataset, recipe: &ModelRecipe, opts: &CvOptions) -> Result<EvalReport> {
    let folds = fold_assignment(ds.len(), opts)?;
    run_folds(ds, recipe, &folds)
}

/// Cross-validates every recipe on the same folds. Repeated names get a
/// `#2`, `#3`, … suffix.
pub fn compare_models(ds: &Dataset, recipes: &[ModelRecipe], opts: &CvOptions) -> Result<Vec<EvalReport>> {
    if recipes.len() < 2 {
        return Err(Error::InvalidArgument("model comparison needs at least two recipes".into()));
    }
    let folds = fold_assignment(ds.len(), opts)?;
    let mut seen: Vec<String> = Vec::new();
    recipes
        .iter()
        .map(|r| {
            let mut report = run_folds(ds, r, &folds)?;
            report.model = unique_name(&r.name, &seen);
            seen.push(report.model.clone());
            Ok(report)
        })
        .collect()
}

fn unique_name(base: &str, seen: &[String]) -> String {
    if !seen.iter().any(|s| s == base) {
        return base.to_string();
    }
    (2..)
        .map(|i| format!("{base}#{i}"))
        .find(|cand| !seen.contains(cand))
        .expect("unbounded suffixes")
}
