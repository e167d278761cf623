use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters of the ARD squared-exponential GP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpHyperparameters {
    pub signal_var: f64,
    pub length_scales: Vec<f64>,
    pub noise_var: f64,
    /// Slopes of an optional linear mean over the standardized inputs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_coeffs: Option<Vec<f64>>,
}

impl GpHyperparameters {
    pub fn new(signal_var: f64, length_scales: Vec<f64>, noise_var: f64) -> Self {
        GpHyperparameters {
            signal_var,
            length_scales,
            noise_var,
            mean_coeffs: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.length_scales.len()
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x > 0.0;
        if !ok(self.signal_var) || !ok(self.noise_var) || !self.length_scales.iter().all(|&l| ok(l)) {
            return Err(Error::InvalidArgument(
                "signal variance, noise variance and length-scales must be positive".into(),
            ));
        }
        if let Some(b) = &self.mean_coeffs {
            if b.len() != self.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.dim(),
                    found: b.len(),
                });
            }
        }
        Ok(())
    }

    /// Prior mean at a standardized input row.
    pub(crate) fn mean_at(&self, x: impl Iterator<Item = f64>) -> f64 {
        match &self.mean_coeffs {
            Some(b) => x.zip(b).map(|(xi, bi)| xi * bi).sum(),
            None => 0.0,
        }
    }
}

/// Noise-free covariance between two input vectors. The noise variance
/// belongs only on the training Gram diagonal and is added there by the
/// callers that build it.
pub fn kernel(xi: &[f64], xj: &[f64], hyper: &GpHyperparameters) -> Result<f64> {
    let p = hyper.dim();
    for len in [xi.len(), xj.len()] {
        if len != p {
            return Err(Error::DimensionMismatch { expected: p, found: len });
        }
    }
    Ok(hyper.signal_var * (-0.5 * scaled_sqdist(xi.iter().copied(), xj.iter().copied(), &hyper.length_scales)).exp())
}

fn scaled_sqdist(a: impl Iterator<Item = f64>, b: impl Iterator<Item = f64>, ls: &[f64]) -> f64 {
    a.zip(b).zip(ls).map(|((x, y), l)| ((x - y) / l).powi(2)).sum()
}

/// Noise-free Gram matrix over the rows of `x`.
pub(crate) fn gram(x: MatRef<'_, f64>, hyper: &GpHyperparameters) -> Mat<f64> {
    let n = x.nrows();
    let inv_l: Vec<f64> = hyper.length_scales.iter().map(|l| 1.0 / l).collect();
    let scaled = Mat::from_fn(n, x.ncols(), |i, k| x[(i, k)] * inv_l[k]);
    let mut k = Mat::zeros(n, n);
    for j in 0..n {
        k[(j, j)] = hyper.signal_var;
        for i in j + 1..n {
            let d: f64 = (0..scaled.ncols()).map(|c| (scaled[(i, c)] - scaled[(j, c)]).powi(2)).sum();
            let v = hyper.signal_var * (-0.5 * d).exp();
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Cross-covariance between query rows `xs` and training rows `x`, `m × n`.
pub(crate) fn cross_gram(xs: MatRef<'_, f64>, x: MatRef<'_, f64>, hyper: &GpHyperparameters) -> Mat<f64> {
    let ls = &hyper.length_scales;
    Mat::from_fn(xs.nrows(), x.nrows(), |i, j| {
        let d = scaled_sqdist(
            (0..xs.ncols()).map(|c| xs[(i, c)]),
            (0..x.ncols()).map(|c| x[(j, c)]),
            ls,
        );
        hyper.signal_var * (-0.5 * d).exp()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(sf: f64, ls: Vec<f64>) -> GpHyperparameters {
        GpHyperparameters::new(sf, ls, 0.1)
    }

    #[test]
    fn zero_distance_gives_signal_variance() {
        assert_eq!(kernel(&[1.0, 2.0], &[1.0, 2.0], &h(2.5, vec![1.0, 3.0])).unwrap(), 2.5);
    }

    #[test]
    fn unit_scaled_distance() {
        let k = kernel(&[0.0], &[0.7], &h(3.0, vec![0.7])).unwrap();
        assert!((k - 3.0 * (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn far_apart_vanishes() {
        assert_eq!(kernel(&[0.0], &[1e4], &h(1.0, vec![1.0])).unwrap(), 0.0);
    }

    #[test]
    fn dimension_checked() {
        assert!(matches!(
            kernel(&[0.0, 1.0], &[0.0], &h(1.0, vec![1.0, 1.0])),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn gram_matches_kernel() {
        let x = Mat::from_fn(5, 2, |i, k| (i * 3 + k) as f64 * 0.37);
        let hy = h(1.7, vec![0.8, 2.1]);
        let g = gram(x.as_ref(), &hy);
        let row = |i: usize| [x[(i, 0)], x[(i, 1)]];
        for i in 0..5 {
            for j in 0..5 {
                let k = kernel(&row(i), &row(j), &hy).unwrap();
                assert!((g[(i, j)] - k).abs() < 1e-14);
            }
        }
        let c = cross_gram(x.as_ref(), x.as_ref(), &hy);
        assert!((&c - &g).norm_max() < 1e-14);
    }
}
