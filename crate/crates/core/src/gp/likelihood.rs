use faer::linalg::solvers::{DenseSolveCore, Llt, Solve};
use faer::{Mat, MatRef, Side};

use super::kernel::{gram, GpHyperparameters};
use crate::error::{Error, Result};

/// Jitter starts at this multiple of the signal variance and grows tenfold
/// per failed factorization.
pub const JITTER_START: f64 = 1e-10;
pub const JITTER_MAX: f64 = 1e-4;

/// NLL and its gradient with respect to the log-hyperparameters, ordered
/// `[log σ_f², log ℓ_1, …, log ℓ_p, log σ_n²]` followed by the raw mean
/// slopes when a linear mean is present.
#[derive(Debug, Clone, PartialEq)]
pub struct NllEvaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Diagonal jitter that made the Gram matrix factorizable.
    pub jitter: f64,
}

/// A factored training covariance.
pub(crate) struct Factored {
    pub llt: Llt<f64>,
    pub kf: Mat<f64>,
    pub jitter: f64,
    pub alpha: Vec<f64>,
    pub nll: f64,
}

fn check_shapes(hyper: &GpHyperparameters, x: MatRef<'_, f64>, y: &[f64]) -> Result<()> {
    hyper.validate()?;
    if x.ncols() != hyper.dim() {
        return Err(Error::DimensionMismatch {
            expected: hyper.dim(),
            found: x.ncols(),
        });
    }
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch(x.nrows(), y.len()));
    }
    if y.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(())
}

/// Builds `Σ = K + (σ_n² + jitter)·I` and factors it, escalating the jitter
/// on failure.
pub(crate) fn factor(hyper: &GpHyperparameters, x: MatRef<'_, f64>, y: &[f64]) -> Result<Factored> {
    check_shapes(hyper, x, y)?;
    let n = y.len();
    let kf = gram(x, hyper);
    let mut sigma = kf.clone();
    let mut rel = JITTER_START;
    let (llt, jitter) = loop {
        let jitter = rel * hyper.signal_var;
        for i in 0..n {
            sigma[(i, i)] = kf[(i, i)] + hyper.noise_var + jitter;
        }
        match sigma.llt(Side::Lower) {
            Ok(llt) => break (llt, jitter),
            Err(_) if rel < JITTER_MAX * 0.5 => rel *= 10.0,
            Err(_) => return Err(Error::CholeskyFailure),
        }
    };
    let resid: Vec<f64> = (0..n)
        .map(|i| y[i] - hyper.mean_at((0..x.ncols()).map(|c| x[(i, c)])))
        .collect();
    let rhs = Mat::from_fn(n, 1, |i, _| resid[i]);
    let sol = llt.solve(&rhs);
    let alpha: Vec<f64> = (0..n).map(|i| sol[(i, 0)]).collect();
    let l = llt.L();
    let half_logdet: f64 = (0..n).map(|i| l[(i, i)].ln()).sum();
    let quad: f64 = resid.iter().zip(&alpha).map(|(r, a)| r * a).sum();
    let nll = 0.5 * quad + half_logdet + 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    if !nll.is_finite() {
        return Err(Error::CholeskyFailure);
    }
    Ok(Factored {
        llt,
        kf,
        jitter,
        alpha,
        nll,
    })
}

/// NLL only, for line searches.
pub fn nll_value(hyper: &GpHyperparameters, x: MatRef<'_, f64>, y: &[f64]) -> Result<f64> {
    Ok(factor(hyper, x, y)?.nll)
}

pub fn negative_log_likelihood(
    hyper: &GpHyperparameters,
    x: MatRef<'_, f64>,
    y: &[f64],
) -> Result<NllEvaluation> {
    let f = factor(hyper, x, y)?;
    Ok(gradient_of(&f, hyper, x))
}

pub(crate) fn gradient_of(f: &Factored, hyper: &GpHyperparameters, x: MatRef<'_, f64>) -> NllEvaluation {
    let n = x.nrows();
    let p = x.ncols();
    let inv = f.llt.inverse();
    let a = &f.alpha;
    let inv_l2: Vec<f64> = hyper.length_scales.iter().map(|l| 1.0 / (l * l)).collect();

    let mut tr_w = 0.0;
    let mut g_kf = 0.0;
    let mut g_len = vec![0.0; p];
    for j in 0..n {
        let w = inv[(j, j)] - a[j] * a[j];
        tr_w += w;
        g_kf += w * f.kf[(j, j)];
        for i in j + 1..n {
            let wk = 2.0 * (inv[(i, j)] - a[i] * a[j]) * f.kf[(i, j)];
            g_kf += wk;
            for c in 0..p {
                let d = x[(i, c)] - x[(j, c)];
                g_len[c] += wk * d * d * inv_l2[c];
            }
        }
    }

    let mut gradient = Vec::with_capacity(p + 2 + p);
    gradient.push(0.5 * (g_kf + f.jitter * tr_w));
    gradient.extend(g_len.iter().map(|g| 0.5 * g));
    gradient.push(0.5 * hyper.noise_var * tr_w);
    if hyper.mean_coeffs.is_some() {
        for c in 0..p {
            gradient.push(-(0..n).map(|i| x[(i, c)] * a[i]).sum::<f64>());
        }
    }
    NllEvaluation {
        value: f.nll,
        gradient,
        jitter: f.jitter,
    }
}

/// Log-space parameter vector in gradient order.
pub(crate) fn pack(hyper: &GpHyperparameters) -> Vec<f64> {
    let mut t = vec![hyper.signal_var.ln()];
    t.extend(hyper.length_scales.iter().map(|l| l.ln()));
    t.push(hyper.noise_var.ln());
    if let Some(b) = &hyper.mean_coeffs {
        t.extend_from_slice(b);
    }
    t
}

pub(crate) fn unpack(theta: &[f64], p: usize) -> GpHyperparameters {
    GpHyperparameters {
        signal_var: theta[0].exp(),
        length_scales: theta[1..=p].iter().map(|t| t.exp()).collect(),
        noise_var: theta[p + 1].exp(),
        mean_coeffs: (theta.len() > p + 2).then(|| theta[p + 2..].to_vec()),
    }
}
