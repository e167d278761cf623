//! Model files. GP models use the library's JSON layout; the baselines are
//! stored as small tagged JSON objects.

use std::path::Path;

use powercurve::baselines::{Bin, BinnedCurve, FracPolyCoeffs, FracPolyFit};
use powercurve::eval::TrainedModel;
use powercurve::gp::GpModel;
use powercurve::{Dataset, Error, Result, Target, TurbineSpec};
use serde::{Deserialize, Serialize};

#[derive(Serialize, Deserialize)]
struct BinRecord {
    lower_mps: f64,
    mean_kw: f64,
    count: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
enum BaselineFile {
    Binning {
        target: Target,
        bin_width: f64,
        rho_ref: f64,
        bins: Vec<BinRecord>,
    },
    IecBins {
        target: Target,
        bin_width: f64,
        rho_ref: f64,
        bins: Vec<BinRecord>,
    },
    Fracpoly {
        coeffs: FracPolyCoeffs,
        beta_scale: f64,
        spec: TurbineSpec,
    },
}

pub struct SavedModel {
    pub model: TrainedModel,
    pub target: Target,
}

impl SavedModel {
    pub fn new(model: TrainedModel, target: Target) -> Self {
        SavedModel { model, target }
    }

    pub fn to_json(&self) -> Result<String> {
        let baseline = match &self.model {
            TrainedModel::Gp(m) => return m.to_json(),
            TrainedModel::Binned(c) => {
                let bins = c
                    .bins
                    .iter()
                    .map(|b| BinRecord {
                        lower_mps: b.lower,
                        mean_kw: b.mean,
                        count: b.count,
                    })
                    .collect();
                let (target, bin_width, rho_ref) = (self.target, c.bin_width, c.rho_ref);
                if c.density_corrected {
                    BaselineFile::IecBins { target, bin_width, rho_ref, bins }
                } else {
                    BaselineFile::Binning { target, bin_width, rho_ref, bins }
                }
            }
            TrainedModel::FracPoly(f, spec) => BaselineFile::Fracpoly {
                coeffs: f.coeffs,
                beta_scale: f.beta_scale,
                spec: *spec,
            },
        };
        Ok(serde_json::to_string_pretty(&baseline)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        if value.get("family").is_none() {
            let m = GpModel::from_json(text)?;
            let target = m.target;
            return Ok(SavedModel::new(TrainedModel::Gp(Box::new(m)), target));
        }
        let curve = |target, bin_width, rho_ref, bins: Vec<BinRecord>, corrected| {
            if bins.is_empty() {
                return Err(Error::EmptyDataset);
            }
            let bins = bins
                .into_iter()
                .map(|b| Bin {
                    lower: b.lower_mps,
                    mean: b.mean_kw,
                    count: b.count,
                })
                .collect();
            Ok(SavedModel::new(
                TrainedModel::Binned(BinnedCurve {
                    bin_width,
                    density_corrected: corrected,
                    rho_ref,
                    bins,
                }),
                target,
            ))
        };
        match serde_json::from_value(value)? {
            BaselineFile::Binning { target, bin_width, rho_ref, bins } => curve(target, bin_width, rho_ref, bins, false),
            BaselineFile::IecBins { target, bin_width, rho_ref, bins } => curve(target, bin_width, rho_ref, bins, true),
            BaselineFile::Fracpoly { coeffs, beta_scale, spec } => {
                coeffs.validate()?;
                spec.validate()?;
                let fit = FracPolyFit {
                    coeffs,
                    beta_scale,
                    sse: f64::NAN,
                    iterations: 0,
                    converged: true,
                    rows_used: 0,
                };
                Ok(SavedModel::new(TrainedModel::FracPoly(fit, spec), Target::Sd))
            }
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn predict(&self, ds: &Dataset) -> Result<Vec<f64>> {
        self.model.predict(ds)
    }
}
