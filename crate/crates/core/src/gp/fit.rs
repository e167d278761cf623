use std::collections::VecDeque;

use faer::{Mat, MatRef};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kernel::GpHyperparameters;
use super::likelihood::{factor, gradient_of, pack, unpack, Factored};
use super::model::{FitMeta, GpModel, RestartSummary, TraceEntry};
use crate::data::{DesignMatrix, Target};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, unit};

/// Search direction used between line searches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepRule {
    /// Limited-memory BFGS direction (10 pairs).
    Lbfgs,
    /// Plain negative gradient; the trial step doubles after each success.
    SteepestDescent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub max_iter: usize,
    pub restarts: usize,
    pub step_rule: StepRule,
    pub max_halvings: usize,
    pub seed: u64,
    /// Fixes σ_n² instead of learning it.
    pub noise_var: Option<f64>,
    pub linear_mean: bool,
    pub grad_tol: f64,
    pub rel_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iter: 300,
            restarts: 3,
            step_rule: StepRule::Lbfgs,
            max_halvings: 30,
            seed: 42,
            noise_var: None,
            linear_mean: false,
            grad_tol: 1e-6,
            rel_tol: 1e-10,
        }
    }
}

pub const MIN_TRAINING_ROWS: usize = 5;
const LENGTH_FACTORS: [f64; 3] = [0.3, 1.0, 3.0];
const MEMORY: usize = 10;

struct Problem<'a> {
    x: MatRef<'a, f64>,
    y: &'a [f64],
    p: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    free: Vec<bool>,
    pinned_noise: Option<f64>,
}

impl Problem<'_> {
    fn hyper(&self, theta: &[f64]) -> GpHyperparameters {
        let mut h = unpack(theta, self.p);
        if let Some(v) = self.pinned_noise {
            h.noise_var = v;
        }
        h
    }

    fn eval(&self, theta: &[f64]) -> Result<Factored> {
        factor(&self.hyper(theta), self.x, self.y)
    }

    fn gradient(&self, f: &Factored, theta: &[f64]) -> Vec<f64> {
        let mut g = gradient_of(f, &self.hyper(theta), self.x).gradient;
        for (gi, &free) in g.iter_mut().zip(&self.free) {
            if !free {
                *gi = 0.0;
            }
        }
        g
    }

    /// Zeroes components that would push a bound-pinned coordinate outward.
    fn project(&self, theta: &[f64], v: &mut [f64], is_gradient: bool) {
        for k in 0..v.len() {
            let outward = if is_gradient { -v[k] } else { v[k] };
            if !self.free[k]
                || (theta[k] <= self.lower[k] && outward < 0.0)
                || (theta[k] >= self.upper[k] && outward > 0.0)
            {
                v[k] = 0.0;
            }
        }
    }

    fn clamp(&self, theta: &mut [f64]) {
        for k in 0..theta.len() {
            theta[k] = theta[k].clamp(self.lower[k], self.upper[k]);
        }
    }
}

struct RestartResult {
    theta: Vec<f64>,
    factored: Factored,
    summary: RestartSummary,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn lbfgs_direction(g: &[f64], memory: &VecDeque<(Vec<f64>, Vec<f64>)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y) in memory.iter().rev() {
        let rho = 1.0 / dot(y, s);
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push((a, rho));
    }
    if let Some((s, y)) = memory.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|qi| *qi *= gamma);
    }
    for ((s, y), (a, rho)) in memory.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|qi| *qi = -*qi);
    q
}

/// Halves `step` until the NLL drops below `f0`.
fn line_search(
    prob: &Problem<'_>,
    theta: &[f64],
    dir: &[f64],
    mut step: f64,
    f0: f64,
    max_halvings: usize,
) -> Result<Option<(Vec<f64>, Factored, f64)>> {
    for _ in 0..=max_halvings {
        let mut trial: Vec<f64> = theta.iter().zip(dir).map(|(t, d)| t + step * d).collect();
        prob.clamp(&mut trial);
        if trial == theta {
            return Ok(None);
        }
        match prob.eval(&trial) {
            Ok(ft) if ft.nll < f0 => return Ok(Some((trial, ft, step))),
            Ok(_) | Err(Error::CholeskyFailure) => step *= 0.5,
            Err(e) => return Err(e),
        }
    }
    Ok(None)
}

fn run_restart(
    prob: &Problem<'_>,
    mut theta: Vec<f64>,
    restart: usize,
    opts: &FitOptions,
    trace: &mut Vec<TraceEntry>,
) -> Result<RestartResult> {
    prob.clamp(&mut theta);
    let mut f = prob.eval(&theta)?;
    let initial_nll = f.nll;
    let mut g = prob.gradient(&f, &theta);
    trace.push(TraceEntry { restart, iteration: 0, nll: f.nll });
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>)> = VecDeque::new();
    let mut sd_step = f64::NAN;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        let mut pg = g.clone();
        prob.project(&theta, &mut pg, true);
        let gnorm = inf_norm(&pg);
        if gnorm < opts.grad_tol {
            converged = true;
            break;
        }
        let (mut dir, mut step) = match opts.step_rule {
            StepRule::Lbfgs if !memory.is_empty() => (lbfgs_direction(&pg, &memory), 1.0),
            StepRule::Lbfgs => (pg.iter().map(|x| -x).collect(), 1.0 / gnorm.max(1.0)),
            StepRule::SteepestDescent => {
                if sd_step.is_nan() {
                    sd_step = 1.0 / gnorm.max(1.0);
                }
                (pg.iter().map(|x| -x).collect(), sd_step)
            }
        };
        prob.project(&theta, &mut dir, false);
        if dot(&dir, &pg) >= 0.0 {
            memory.clear();
            dir = pg.iter().map(|x| -x).collect();
            step = 1.0 / gnorm.max(1.0);
        }

        let mut accepted = line_search(prob, &theta, &dir, step, f.nll, opts.max_halvings)?;
        if accepted.is_none() && !memory.is_empty() {
            // the quasi-Newton direction failed; retry along the gradient
            memory.clear();
            let sd: Vec<f64> = pg.iter().map(|x| -x).collect();
            accepted = line_search(prob, &theta, &sd, 1.0 / gnorm.max(1.0), f.nll, opts.max_halvings)?;
        }
        let Some((trial, ft, step)) = accepted else {
            converged = true;
            break;
        };
        iterations += 1;
        if opts.step_rule == StepRule::SteepestDescent {
            sd_step = step * 2.0;
        }
        let g_new = prob.gradient(&ft, &trial);
        let s: Vec<f64> = trial.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        if dot(&s, &yv) > 1e-12 * dot(&s, &s).sqrt() * dot(&yv, &yv).sqrt() {
            if memory.len() == MEMORY {
                memory.pop_front();
            }
            memory.push_back((s, yv));
        }
        let change = (f.nll - ft.nll) / f.nll.abs().max(1.0);
        theta = trial;
        f = ft;
        g = g_new;
        trace.push(TraceEntry { restart, iteration: iterations, nll: f.nll });
        if change < opts.rel_tol {
            converged = true;
            break;
        }
    }

    Ok(RestartResult {
        summary: RestartSummary {
            initial_nll,
            final_nll: f.nll,
            iterations,
            converged,
        },
        theta,
        factored: f,
    })
}

/// Population mean and standard deviation of each column.
fn column_moments(x: MatRef<'_, f64>) -> (Vec<f64>, Vec<f64>) {
    let n = x.nrows() as f64;
    (0..x.ncols())
        .map(|c| {
            let mean = (0..x.nrows()).map(|i| x[(i, c)]).sum::<f64>() / n;
            let var = (0..x.nrows()).map(|i| (x[(i, c)] - mean).powi(2)).sum::<f64>() / n;
            (mean, var.sqrt())
        })
        .unzip()
}

/// Trains a GP by minimizing the NLL from several starting points.
pub fn fit(
    x: MatRef<'_, f64>,
    y: &[f64],
    inputs: &[String],
    target: Target,
    opts: &FitOptions,
) -> Result<GpModel> {
    let (n, p) = (x.nrows(), x.ncols());
    if inputs.len() != p {
        return Err(Error::DimensionMismatch { expected: p, found: inputs.len() });
    }
    if y.len() != n {
        return Err(Error::LengthMismatch(n, y.len()));
    }
    if p == 0 {
        return Err(Error::InvalidArgument("no input columns".into()));
    }
    if n < MIN_TRAINING_ROWS {
        return Err(Error::TooFewRows { needed: MIN_TRAINING_ROWS, found: n });
    }
    if opts.restarts == 0 {
        return Err(Error::InvalidArgument("at least one restart is required".into()));
    }
    if let Some(v) = opts.noise_var {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidArgument(format!("pinned noise variance {v} must be positive")));
        }
    }
    if x.col_iter().any(|c| c.iter().any(|v| !v.is_finite())) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("training data must be finite".into()));
    }

    let (x_mean, x_sd) = column_moments(x);
    for (c, (&m, &s)) in x_mean.iter().zip(&x_sd).enumerate() {
        if !(s > 1e-12 * m.abs().max(1.0)) {
            return Err(Error::ConstantColumn(inputs[c].clone()));
        }
    }
    let z = Mat::from_fn(n, p, |i, c| (x[(i, c)] - x_mean[c]) / x_sd[c]);
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let var_y = match yc.iter().map(|v| v * v).sum::<f64>() / n as f64 {
        v if v > 0.0 => v,
        _ => 1.0,
    };
    let ranges: Vec<f64> = z
        .col_iter()
        .map(|c| {
            let (lo, hi) = c.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
            hi - lo
        })
        .collect();

    let n_mean = if opts.linear_mean { p } else { 0 };
    let mut lower = vec![(1e-6 * var_y).ln()];
    let mut upper = vec![(1e4 * var_y).ln()];
    lower.extend(std::iter::repeat_n(1e-2f64.ln(), p));
    upper.extend(std::iter::repeat_n(1e3f64.ln(), p));
    lower.push((1e-6 * var_y).ln());
    upper.push((10.0 * var_y).ln());
    lower.extend(std::iter::repeat_n(f64::NEG_INFINITY, n_mean));
    upper.extend(std::iter::repeat_n(f64::INFINITY, n_mean));
    let mut free = vec![true; p + 2 + n_mean];
    if let Some(v) = opts.noise_var {
        free[p + 1] = false;
        lower[p + 1] = v.ln();
        upper[p + 1] = v.ln();
    }
    let prob = Problem {
        x: z.as_ref(),
        y: &yc,
        p,
        lower,
        upper,
        free,
        pinned_noise: opts.noise_var,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(opts.seed, "gp-restart"));
    let mut trace = Vec::new();
    let mut summaries = Vec::with_capacity(opts.restarts);
    let mut best: Option<(usize, RestartResult)> = None;
    let mut last_err = None;
    for r in 0..opts.restarts {
        let fac = match LENGTH_FACTORS.get(r) {
            Some(&f) => f,
            None => (LENGTH_FACTORS[0].ln() + unit(&mut rng) * (LENGTH_FACTORS[2] / LENGTH_FACTORS[0]).ln()).exp(),
        };
        let init = GpHyperparameters {
            signal_var: var_y,
            length_scales: ranges.iter().map(|r| fac * r).collect(),
            noise_var: opts.noise_var.unwrap_or(0.01 * var_y),
            mean_coeffs: opts.linear_mean.then(|| vec![0.0; p]),
        };
        match run_restart(&prob, pack(&init), r, opts, &mut trace) {
            Ok(res) => {
                summaries.push(res.summary);
                if best.as_ref().is_none_or(|(_, b)| res.factored.nll < b.factored.nll) {
                    best = Some((r, res));
                }
            }
            Err(e) => {
                summaries.push(RestartSummary {
                    initial_nll: f64::NAN,
                    final_nll: f64::NAN,
                    iterations: 0,
                    converged: false,
                });
                last_err = Some(e);
            }
        }
    }
    let Some((_, best)) = best else {
        return Err(last_err.unwrap_or(Error::CholeskyFailure));
    };

    let f = best.factored;
    Ok(GpModel {
        inputs: inputs.to_vec(),
        target,
        hyper: prob.hyper(&best.theta),
        x_mean,
        x_sd,
        y_mean,
        train_x: z,
        train_y: yc,
        chol: f.llt.L().to_owned(),
        alpha: f.alpha,
        jitter: f.jitter,
        meta: FitMeta {
            nll: f.nll,
            iterations: best.summary.iterations,
            seed: opts.seed,
        },
        trace,
        restarts: summaries,
    })
}

/// [`fit`] on named dataset columns.
pub fn fit_design(dm: &DesignMatrix, y: &[f64], target: Target, opts: &FitOptions) -> Result<GpModel> {
    let names: Vec<String> = dm.names.iter().map(|v| v.name().to_string()).collect();
    fit(dm.values.as_ref(), y, &names, target, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|i| format!("x{i}")).collect()
    }

    fn smooth(n: usize, seed: u64) -> (Mat<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Mat<f64> = Mat::from_fn(n, 2, |_, _| rng.random_range(0.0..10.0));
        let y = (0..n).map(|i| 50.0 * (0.4 * x[(i, 0)]).sin() + 3.0 * x[(i, 1)]).collect();
        (x, y)
    }

    #[test]
    fn too_few_rows() {
        let (x, y) = smooth(4, 1);
        assert!(matches!(
            fit(x.as_ref(), &y, &names(2), Target::Mean, &FitOptions::default()),
            Err(Error::TooFewRows { needed: 5, found: 4 })
        ));
    }

    #[test]
    fn constant_column_named() {
        let (mut x, y) = smooth(10, 1);
        for i in 0..10 {
            x[(i, 1)] = 3.0;
        }
        match fit(x.as_ref(), &y, &names(2), Target::Mean, &FitOptions::default()) {
            Err(Error::ConstantColumn(c)) => assert_eq!(c, "x1"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn best_restart_beats_every_start() {
        let (x, y) = smooth(40, 3);
        let m = fit(x.as_ref(), &y, &names(2), Target::Mean, &FitOptions::default()).unwrap();
        assert_eq!(m.restarts.len(), 3);
        for r in &m.restarts {
            assert!(m.meta.nll <= r.initial_nll);
            assert!(m.meta.nll <= r.final_nll);
            assert!(r.final_nll <= r.initial_nll);
        }
        assert!(m.trace.windows(2).all(|w| w[0].restart != w[1].restart || w[1].nll < w[0].nll));
        assert!(m.reconstruction_error() < 1e-8);
        assert!(m.alpha_residual() < 1e-8);
    }

    #[test]
    fn deterministic() {
        let (x, y) = smooth(30, 4);
        let opts = FitOptions { restarts: 4, ..FitOptions::default() };
        let a = fit(x.as_ref(), &y, &names(2), Target::Mean, &opts).unwrap();
        let b = fit(x.as_ref(), &y, &names(2), Target::Mean, &opts).unwrap();
        assert_eq!(a.hyper, b.hyper);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn steepest_descent_also_descends() {
        let (x, y) = smooth(30, 5);
        let opts = FitOptions {
            step_rule: StepRule::SteepestDescent,
            restarts: 1,
            max_iter: 50,
            ..FitOptions::default()
        };
        let m = fit(x.as_ref(), &y, &names(2), Target::Mean, &opts).unwrap();
        assert!(m.meta.nll < m.restarts[0].initial_nll);
    }

    #[test]
    fn interpolates_with_pinned_noise() {
        let (x, y) = smooth(25, 6);
        let opts = FitOptions { noise_var: Some(1e-8), ..FitOptions::default() };
        let m = fit(x.as_ref(), &y, &names(2), Target::Mean, &opts).unwrap();
        assert_eq!(m.hyper.noise_var, 1e-8);
        for (p, t) in m.predict(x.as_ref()).unwrap().iter().zip(&y) {
            assert!((p - t).abs() <= 1e-4 * t.abs().max(1.0), "{p} vs {t}");
        }
    }

    #[test]
    fn reverts_to_mean_far_away() {
        let (x, y) = smooth(30, 7);
        let m = fit(x.as_ref(), &y, &names(2), Target::Mean, &FitOptions::default()).unwrap();
        let far = Mat::from_fn(1, 2, |_, _| 1e6);
        let p = m.predict(far.as_ref()).unwrap()[0];
        assert!((p - m.y_mean).abs() < 1e-9);
    }

    #[test]
    fn linear_mean_fits() {
        let (x, y) = smooth(30, 8);
        let opts = FitOptions { linear_mean: true, ..FitOptions::default() };
        let m = fit(x.as_ref(), &y, &names(2), Target::Mean, &opts).unwrap();
        assert_eq!(m.hyper.mean_coeffs.as_ref().map(Vec::len), Some(2));
        assert!(m.alpha_residual() < 1e-8);
    }

    #[test]
    fn json_round_trip() {
        let (x, y) = smooth(20, 9);
        let m = fit(x.as_ref(), &y, &names(2), Target::Sd, &FitOptions::default()).unwrap();
        let back = GpModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back.hyper, m.hyper);
        assert_eq!(back.target, Target::Sd);
        let q = Mat::from_fn(5, 2, |i, c| 1.3 * i as f64 + c as f64);
        let (a, b) = (m.predict(q.as_ref()).unwrap(), back.predict(q.as_ref()).unwrap());
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() <= 1e-9 * u.abs().max(1.0));
        }
    }
}
