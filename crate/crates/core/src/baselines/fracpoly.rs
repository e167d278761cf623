//! Fractional-polynomial model of generator power standard deviation:
//!
//! ```text
//! P_sd / (½ ρ A V_co³) = c0 + c1 (V/V_co)^e1 + c2 (H/√A)^e2 + c3 (β/β_scale)^e3
//! ```
//!
//! with `V_co` the cut-out speed, `H` the wave height and `β` the wave
//! direction in degrees. The prediction is clamped at zero.

use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Target};
use crate::error::{Error, Result};
use crate::oracle::TurbineSpec;

/// Wave direction is divided by this before exponentiation.
pub const DEFAULT_BETA_SCALE: f64 = 180.0;

const NAMES: [&str; 7] = ["c0", "c1", "e1", "c2", "e2", "c3", "e3"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FracPolyCoeffs {
    pub c0: f64,
    pub c1: f64,
    pub e1: f64,
    pub c2: f64,
    pub e2: f64,
    pub c3: f64,
    pub e3: f64,
}

impl Default for FracPolyCoeffs {
    fn default() -> Self {
        FracPolyCoeffs {
            c0: -2.63,
            c1: 2.78,
            e1: 0.37,
            c2: 1.81,
            e2: 1.21,
            c3: -1.02,
            e3: 4.86,
        }
    }
}

impl FracPolyCoeffs {
    pub fn to_array(&self) -> [f64; 7] {
        [self.c0, self.c1, self.e1, self.c2, self.e2, self.c3, self.e3]
    }

    pub fn from_array(a: [f64; 7]) -> Self {
        FracPolyCoeffs {
            c0: a[0],
            c1: a[1],
            e1: a[2],
            c2: a[3],
            e2: a[4],
            c3: a[5],
            e3: a[6],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.to_array().iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("non-finite coefficient".into()));
        }
        if !(self.e1 > 0.0 && self.e2 > 0.0 && self.e3 > 0.0) {
            return Err(Error::InvalidArgument("exponents must be positive".into()));
        }
        Ok(())
    }

    /// The bracketed, dimensionless right-hand side.
    pub fn bracket(&self, v: f64, wave_h: f64, wave_dir: f64, spec: &TurbineSpec, beta_scale: f64) -> f64 {
        let [a, b, g] = features(v, wave_h, wave_dir, spec, beta_scale);
        self.c0 + self.c1 * a.powf(self.e1) + self.c2 * b.powf(self.e2) + self.c3 * g.powf(self.e3)
    }
}

fn features(v: f64, wave_h: f64, wave_dir: f64, spec: &TurbineSpec, beta_scale: f64) -> [f64; 3] {
    [
        v / spec.cut_out,
        wave_h / spec.rotor_area().sqrt(),
        wave_dir / beta_scale,
    ]
}

/// `½ ρ A V_co³` in kW.
pub fn sd_normalization(rho: f64, spec: &TurbineSpec) -> f64 {
    0.5 * rho * spec.rotor_area() * spec.cut_out.powi(3) / 1000.0
}

/// Power standard deviation in kW, with wave direction normalized by 180°.
pub fn fracpoly_eval(
    v: f64,
    wave_h: f64,
    wave_dir: f64,
    rho: f64,
    coeffs: &FracPolyCoeffs,
    spec: &TurbineSpec,
) -> f64 {
    fracpoly_eval_scaled(v, wave_h, wave_dir, rho, coeffs, spec, DEFAULT_BETA_SCALE)
}

pub fn fracpoly_eval_scaled(
    v: f64,
    wave_h: f64,
    wave_dir: f64,
    rho: f64,
    coeffs: &FracPolyCoeffs,
    spec: &TurbineSpec,
    beta_scale: f64,
) -> f64 {
    let value = sd_normalization(rho, spec) * coeffs.bracket(v, wave_h, wave_dir, spec, beta_scale);
    value.max(0.0)
}

#[derive(Debug, Clone, Copy)]
pub struct FracPolyFitOptions {
    pub initial: FracPolyCoeffs,
    pub beta_scale: f64,
    pub max_iter: usize,
    /// Stop when the relative change of the residual sum of squares drops below this.
    pub rel_tol: f64,
}

impl Default for FracPolyFitOptions {
    fn default() -> Self {
        FracPolyFitOptions {
            initial: FracPolyCoeffs::default(),
            beta_scale: DEFAULT_BETA_SCALE,
            max_iter: 500,
            rel_tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FracPolyFit {
    pub coeffs: FracPolyCoeffs,
    pub beta_scale: f64,
    /// Residual sum of squares of the normalized standard deviation.
    pub sse: f64,
    pub iterations: usize,
    /// `false` if the iteration cap was hit; `coeffs` is then the best point found.
    pub converged: bool,
    /// Rows with a positive standard deviation that entered the fit.
    pub rows_used: usize,
}

impl FracPolyFit {
    pub fn predict(&self, ds: &Dataset, spec: &TurbineSpec) -> Result<Vec<f64>> {
        ds.samples()
            .map(|s| {
                Ok(fracpoly_eval_scaled(
                    s.v,
                    s.wave_h,
                    s.wave_dir,
                    s.density()?,
                    &self.coeffs,
                    spec,
                    self.beta_scale,
                ))
            })
            .collect()
    }
}

pub fn fit_fracpoly(ds: &Dataset, spec: &TurbineSpec) -> Result<FracPolyFit> {
    fit_fracpoly_with(ds, spec, &FracPolyFitOptions::default())
}

const MIN_ROWS: usize = 20;

/// Levenberg–Marquardt fit of the seven constants to normalized standard
/// deviations.
///
/// Rows whose standard deviation is exactly zero carry no information about
/// the unclamped bracket (only that it is nonpositive) and are left out; the
/// residuals of the remaining rows are unclamped.
pub fn fit_fracpoly_with(ds: &Dataset, spec: &TurbineSpec, opts: &FracPolyFitOptions) -> Result<FracPolyFit> {
    opts.initial.validate()?;
    if ds.len() < MIN_ROWS {
        return Err(Error::TooFewRows {
            needed: MIN_ROWS,
            found: ds.len(),
        });
    }
    let sd = ds.targets(Target::Sd)?;
    let mut feats = Vec::new();
    let mut obs = Vec::new();
    for (s, &y) in ds.samples().zip(&sd) {
        let rho = s.density()?;
        if y > 0.0 {
            feats.push(features(s.v, s.wave_h, s.wave_dir, spec, opts.beta_scale));
            obs.push(y / sd_normalization(rho, spec));
        }
    }
    if obs.len() < NAMES.len() + 1 {
        return Err(Error::TooFewRows {
            needed: NAMES.len() + 1,
            found: obs.len(),
        });
    }

    let residuals = |p: &[f64; 7]| -> Vec<f64> {
        let c = FracPolyCoeffs::from_array(*p);
        feats
            .iter()
            .zip(&obs)
            .map(|(f, y)| y - (c.c0 + c.c1 * f[0].powf(c.e1) + c.c2 * f[1].powf(c.e2) + c.c3 * f[2].powf(c.e3)))
            .collect()
    };
    let sse_of = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>();

    let mut params = opts.initial.to_array();
    let mut resid = residuals(&params);
    let mut sse = sse_of(&resid);
    let mut lambda = 1e-3;
    let mut converged = sse == 0.0;
    let mut iterations = 0;

    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let jac = jacobian(&feats, &params);
        let mut jtj = Mat::<f64>::zeros(7, 7);
        let mut jtr = [0.0; 7];
        for (row, r) in jac.iter().zip(&resid) {
            for a in 0..7 {
                jtr[a] += row[a] * r;
                for b in 0..7 {
                    jtj[(a, b)] += row[a] * row[b];
                }
            }
        }
        if let Some(k) = (0..7).find(|&k| jtj[(k, k)] == 0.0) {
            return Err(Error::SingularJacobian(NAMES[k].into()));
        }

        let mut improved = false;
        while lambda < 1e16 {
            let mut damped = jtj.clone();
            for k in 0..7 {
                damped[(k, k)] += lambda * jtj[(k, k)];
            }
            let step = solve_spd(&damped, &jtr);
            let mut trial = params;
            if let Some(step) = step {
                for k in 0..7 {
                    trial[k] += step[k];
                }
            }
            let valid = step.is_some() && trial[2] > 0.0 && trial[4] > 0.0 && trial[6] > 0.0;
            if valid {
                let r = residuals(&trial);
                let trial_sse = sse_of(&r);
                if trial_sse.is_finite() && trial_sse < sse {
                    let rel = (sse - trial_sse) / sse;
                    params = trial;
                    resid = r;
                    sse = trial_sse;
                    lambda = (lambda / 10.0).max(1e-12);
                    improved = true;
                    converged = rel < opts.rel_tol || sse == 0.0;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !improved {
            // no damping level reduces the residual: a numerical minimum
            converged = true;
        }
    }

    Ok(FracPolyFit {
        coeffs: FracPolyCoeffs::from_array(params),
        beta_scale: opts.beta_scale,
        sse,
        iterations,
        converged,
        rows_used: obs.len(),
    })
}

/// Partial derivatives of the bracket with respect to (c0, c1, e1, c2, e2, c3, e3).
fn jacobian(feats: &[[f64; 3]], p: &[f64; 7]) -> Vec<[f64; 7]> {
    let term = |x: f64, e: f64| -> (f64, f64) {
        if x > 0.0 {
            let pw = x.powf(e);
            (pw, pw * x.ln())
        } else {
            (0.0, 0.0)
        }
    };
    feats
        .iter()
        .map(|f| {
            let (a, a_ln) = term(f[0], p[2]);
            let (b, b_ln) = term(f[1], p[4]);
            let (g, g_ln) = term(f[2], p[6]);
            [1.0, a, p[1] * a_ln, b, p[3] * b_ln, g, p[5] * g_ln]
        })
        .collect()
}

fn solve_spd(a: &Mat<f64>, b: &[f64; 7]) -> Option<[f64; 7]> {
    use faer::linalg::solvers::Solve;
    let llt = a.llt(Side::Lower).ok()?;
    let rhs = Mat::from_fn(7, 1, |i, _| b[i]);
    let x = llt.solve(&rhs);
    let out: [f64; 7] = std::array::from_fn(|i| x[(i, 0)]);
    out.iter().all(|v| v.is_finite()).then_some(out)
}
