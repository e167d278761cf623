use std::path::Path;

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use super::kernel::{cross_gram, gram, GpHyperparameters};
use super::likelihood::factor;
use crate::data::Target;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitMeta {
    pub nll: f64,
    pub iterations: usize,
    pub seed: u64,
}

/// One accepted optimizer step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub restart: usize,
    pub iteration: usize,
    pub nll: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestartSummary {
    pub initial_nll: f64,
    pub final_nll: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// A trained GP. Inputs are held z-scored and targets centered; `predict`
/// takes and returns original units.
#[derive(Debug, Clone)]
pub struct GpModel {
    pub inputs: Vec<String>,
    pub target: Target,
    pub hyper: GpHyperparameters,
    pub x_mean: Vec<f64>,
    pub x_sd: Vec<f64>,
    pub y_mean: f64,
    pub train_x: Mat<f64>,
    pub train_y: Vec<f64>,
    /// Lower Cholesky factor of the training covariance.
    pub chol: Mat<f64>,
    pub alpha: Vec<f64>,
    pub jitter: f64,
    pub meta: FitMeta,
    pub trace: Vec<TraceEntry>,
    pub restarts: Vec<RestartSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceEntry {
    pub name: String,
    pub inv_length: f64,
    /// Percent of the summed inverse length-scales.
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceReport {
    pub entries: Vec<RelevanceEntry>,
}

/// Shares of `inv_lengths` in percent.
pub fn relevance_from_inverse_lengths(names: &[String], inv_lengths: &[f64]) -> Result<RelevanceReport> {
    if names.len() != inv_lengths.len() {
        return Err(Error::LengthMismatch(names.len(), inv_lengths.len()));
    }
    if inv_lengths.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::InvalidArgument("inverse length-scales must be finite and nonnegative".into()));
    }
    let total: f64 = inv_lengths.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("inverse length-scales sum to zero".into()));
    }
    let entries = names
        .iter()
        .zip(inv_lengths)
        .map(|(name, &inv)| RelevanceEntry {
            name: name.clone(),
            inv_length: inv,
            share: 100.0 * inv / total,
        })
        .collect();
    Ok(RelevanceReport { entries })
}

impl RelevanceReport {
    pub fn share_of(&self, name: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.name == name).map(|e| e.share)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{:<12} {:>12} {:>9}\n", "input", "1/length", "share_%");
        for e in &self.entries {
            out += &format!("{:<12} {:>12.4} {:>9.2}\n", e.name, e.inv_length, e.share);
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct Standardization {
    x_mean: Vec<f64>,
    x_sd: Vec<f64>,
    y_mean: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    inputs: Vec<String>,
    hyper: GpHyperparameters,
    standardization: Standardization,
    train_x: Vec<Vec<f64>>,
    train_y: Vec<f64>,
    target: Target,
    meta: FitMeta,
}

impl GpModel {
    /// Factors the training covariance and assembles a model. `train_x` is
    /// already standardized and `train_y` centered.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        inputs: Vec<String>,
        target: Target,
        hyper: GpHyperparameters,
        x_mean: Vec<f64>,
        x_sd: Vec<f64>,
        y_mean: f64,
        train_x: Mat<f64>,
        train_y: Vec<f64>,
        meta: FitMeta,
    ) -> Result<Self> {
        let p = train_x.ncols();
        for len in [inputs.len(), x_mean.len(), x_sd.len()] {
            if len != p {
                return Err(Error::DimensionMismatch { expected: p, found: len });
            }
        }
        if x_sd.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidArgument("standardization scales must be positive".into()));
        }
        let f = factor(&hyper, train_x.as_ref(), &train_y)?;
        let chol = f.llt.L().to_owned();
        Ok(GpModel {
            inputs,
            target,
            hyper,
            x_mean,
            x_sd,
            y_mean,
            train_x,
            train_y,
            chol,
            alpha: f.alpha,
            jitter: f.jitter,
            meta,
            trace: Vec::new(),
            restarts: Vec::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.inputs.len()
    }

    fn standardize(&self, xs: MatRef<'_, f64>) -> Mat<f64> {
        Mat::from_fn(xs.nrows(), xs.ncols(), |i, k| (xs[(i, k)] - self.x_mean[k]) / self.x_sd[k])
    }

    /// Point predictions at the rows of `xs`, in target units.
    pub fn predict(&self, xs: MatRef<'_, f64>) -> Result<Vec<f64>> {
        if xs.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: xs.ncols(),
            });
        }
        let z = self.standardize(xs);
        let k = cross_gram(z.as_ref(), self.train_x.as_ref(), &self.hyper);
        Ok((0..z.nrows())
            .map(|i| {
                let mean = self.hyper.mean_at((0..z.ncols()).map(|c| z[(i, c)]));
                let kalpha: f64 = (0..k.ncols()).map(|j| k[(i, j)] * self.alpha[j]).sum();
                self.y_mean + mean + kalpha
            })
            .collect())
    }

    pub fn relevance(&self) -> RelevanceReport {
        let inv: Vec<f64> = self.hyper.length_scales.iter().map(|l| 1.0 / l).collect();
        relevance_from_inverse_lengths(&self.inputs, &inv).expect("length-scales are positive")
    }

    fn covariance(&self) -> Mat<f64> {
        let mut s = gram(self.train_x.as_ref(), &self.hyper);
        for i in 0..s.nrows() {
            s[(i, i)] += self.hyper.noise_var + self.jitter;
        }
        s
    }

    /// `‖L·Lᵀ − Σ‖_F / ‖Σ‖_F`.
    pub fn reconstruction_error(&self) -> f64 {
        let s = self.covariance();
        let llt = &self.chol * self.chol.transpose();
        (&llt - &s).norm_l2() / s.norm_l2()
    }

    /// `‖Σ·α − r‖ / ‖r‖` where `r` is the centered target minus the prior mean.
    pub fn alpha_residual(&self) -> f64 {
        let s = self.covariance();
        let n = self.train_y.len();
        let a = Mat::from_fn(n, 1, |i, _| self.alpha[i]);
        let sa = &s * &a;
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..n {
            let r = self.train_y[i] - self.hyper.mean_at((0..self.dim()).map(|c| self.train_x[(i, c)]));
            num += (sa[(i, 0)] - r).powi(2);
            den += r * r;
        }
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            inputs: self.inputs.clone(),
            hyper: self.hyper.clone(),
            standardization: Standardization {
                x_mean: self.x_mean.clone(),
                x_sd: self.x_sd.clone(),
                y_mean: self.y_mean,
            },
            train_x: (0..self.train_x.nrows())
                .map(|i| (0..self.dim()).map(|c| self.train_x[(i, c)]).collect())
                .collect(),
            train_y: self.train_y.clone(),
            target: self.target,
            meta: self.meta,
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    /// Rebuilds the model and refactors its covariance.
    pub fn from_json(text: &str) -> Result<Self> {
        let f: ModelFile = serde_json::from_str(text)?;
        let p = f.inputs.len();
        if f.train_x.len() != f.train_y.len() {
            return Err(Error::LengthMismatch(f.train_x.len(), f.train_y.len()));
        }
        if let Some(row) = f.train_x.iter().find(|r| r.len() != p) {
            return Err(Error::DimensionMismatch { expected: p, found: row.len() });
        }
        let x = Mat::from_fn(f.train_x.len(), p, |i, c| f.train_x[i][c]);
        let s = f.standardization;
        GpModel::from_parts(f.inputs, f.target, f.hyper, s.x_mean, s.x_sd, s.y_mean, x, f.train_y, f.meta)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("x{i}")).collect()
    }

    #[test]
    fn table_shares() {
        let r = relevance_from_inverse_lengths(&names(4), &[1.0; 4]).unwrap();
        assert!(r.entries.iter().all(|e| (e.share - 25.0).abs() < 1e-12));
        let r = relevance_from_inverse_lengths(&names(4), &[5.921, 0.309, 0.091, 0.067]).unwrap();
        let total: f64 = r.entries.iter().map(|e| e.share).sum();
        assert!((total - 100.0).abs() < 1e-9);
        for (e, want) in r.entries.iter().zip([92.689, 4.837, 1.425, 1.049]) {
            assert!((e.share - want).abs() < 1e-3, "{} {}", e.share, want);
        }
        assert!(relevance_from_inverse_lengths(&names(2), &[0.0, 0.0]).is_err());
    }

    #[test]
    fn scalar_prediction_closed_form() {
        let x = Mat::from_fn(1, 1, |_, _| 0.0);
        let m = GpModel::from_parts(
            names(1),
            Target::Mean,
            GpHyperparameters::new(1.0, vec![1.0], 1.0),
            vec![0.0],
            vec![1.0],
            0.0,
            x,
            vec![2.0],
            FitMeta { nll: 0.0, iterations: 0, seed: 0 },
        )
        .unwrap();
        let p = m.predict(Mat::from_fn(1, 1, |_, _| 0.0).as_ref()).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-9);
        let far = m.predict(Mat::from_fn(1, 1, |_, _| 1e3).as_ref()).unwrap();
        assert_eq!(far[0], 0.0);
        assert!(matches!(
            m.predict(Mat::<f64>::zeros(1, 2).as_ref()),
            Err(Error::DimensionMismatch { expected: 1, found: 2 })
        ));
    }
}
