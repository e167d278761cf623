//! Desk-scale stand-in for an aero-servo-elastic simulator: maps an
//! environmental condition to mean and standard deviation of generator power
//! using the cubic power law with yaw loss, a rated-power cap, and the
//! fractional-polynomial curve for the standard deviation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::baselines::{fracpoly_eval_scaled, FracPolyCoeffs, DEFAULT_BETA_SCALE};
use crate::data::{Dataset, EnvSample, PowerRecord, Row};
use crate::error::{Error, Result};

/// Physical turbine constants. Defaults describe the IEA 15 MW reference
/// turbine, with `cp` chosen so that the cubic law reaches rated power at the
/// rated speed under 1.225 kg/m³.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurbineSpec {
    /// kW
    pub rated_power: f64,
    /// m
    pub rotor_diameter: f64,
    pub cut_in: f64,
    pub rated_speed: f64,
    pub cut_out: f64,
    pub cp: f64,
}

impl Default for TurbineSpec {
    fn default() -> Self {
        TurbineSpec {
            rated_power: 15_000.0,
            rotor_diameter: 240.0,
            cut_in: 3.0,
            rated_speed: 10.59,
            cut_out: 25.0,
            cp: 0.4559,
        }
    }
}

impl TurbineSpec {
    /// Swept area, m².
    pub fn rotor_area(&self) -> f64 {
        std::f64::consts::PI * (self.rotor_diameter / 2.0).powi(2)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rated_power > 0.0 && self.rotor_diameter > 0.0) {
            return Err(Error::InvalidArgument("rated power and rotor diameter must be positive".into()));
        }
        if !(0.0 < self.cut_in && self.cut_in < self.rated_speed && self.rated_speed < self.cut_out) {
            return Err(Error::InvalidArgument(
                "turbine speeds must satisfy 0 < cut_in < rated_speed < cut_out".into(),
            ));
        }
        if !(self.cp > 0.0 && self.cp < 16.0 / 27.0) {
            return Err(Error::InvalidArgument(format!("cp {} outside (0, 16/27)", self.cp)));
        }
        Ok(())
    }

    fn operating(&self, v: f64) -> bool {
        v >= self.cut_in && v < self.cut_out
    }

    fn uncapped_power(&self, v: f64, yaw_deg: f64, rho: f64) -> f64 {
        let effective = v * yaw_deg.to_radians().cos();
        0.5 * self.cp * rho * self.rotor_area() * effective.powi(3) / 1000.0
    }
}

/// Mean generator power in kW.
pub fn mean_power(s: &EnvSample, spec: &TurbineSpec) -> Result<f64> {
    let rho = s.density()?;
    if !spec.operating(s.v) {
        return Ok(0.0);
    }
    Ok(spec.uncapped_power(s.v, s.yaw, rho).min(spec.rated_power))
}

/// Analytic `(∂P/∂θ, ∂P/∂ρ)` of the uncapped cubic law, θ in radians, kW per
/// unit. Valid where the turbine operates below its rated cap.
pub fn mean_power_partials(s: &EnvSample, spec: &TurbineSpec) -> Result<(f64, f64)> {
    let rho = s.density()?;
    let theta = s.yaw.to_radians();
    let k = 0.5 * spec.cp * spec.rotor_area() * s.v.powi(3) / 1000.0;
    let d_theta = -3.0 * k * rho * theta.sin() * theta.cos().powi(2);
    let d_rho = k * theta.cos().powi(3);
    Ok((d_theta, d_rho))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub spec: TurbineSpec,
    /// Standard deviation of additive Gaussian noise on the mean, kW.
    pub noise_sd_mean: f64,
    /// Relative standard deviation of multiplicative noise on the standard deviation.
    pub noise_sd_frac: f64,
    pub seed: u64,
    pub sd_coeffs: FracPolyCoeffs,
    pub beta_scale: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            spec: TurbineSpec::default(),
            noise_sd_mean: 0.0,
            noise_sd_frac: 0.0,
            seed: 42,
            sd_coeffs: FracPolyCoeffs::default(),
            beta_scale: DEFAULT_BETA_SCALE,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.sd_coeffs.validate()?;
        if !(self.noise_sd_mean >= 0.0 && self.noise_sd_frac >= 0.0) {
            return Err(Error::InvalidArgument("noise levels must be nonnegative".into()));
        }
        if !(self.beta_scale > 0.0) {
            return Err(Error::InvalidArgument("beta scale must be positive".into()));
        }
        Ok(())
    }
}

/// Standard deviation of generator power in kW from the fractional polynomial.
pub fn power_sd(s: &EnvSample, cfg: &OracleConfig) -> Result<f64> {
    Ok(fracpoly_eval_scaled(
        s.v,
        s.wave_h,
        s.wave_dir,
        s.density()?,
        &cfg.sd_coeffs,
        &cfg.spec,
        cfg.beta_scale,
    ))
}

/// Evaluates every sample. Row `i` draws its noise from stream `i` of a
/// ChaCha generator keyed by `cfg.seed`, so a row's value does not depend on
/// its neighbours.
pub fn simulate(samples: &[EnvSample], cfg: &OracleConfig) -> Result<Dataset> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let rows = samples
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64);
            let z_mean: f64 = StandardNormal.sample(&mut rng);
            let z_sd: f64 = StandardNormal.sample(&mut rng);
            let mean = mean_power(s, &cfg.spec)? + cfg.noise_sd_mean * z_mean;
            let sd = power_sd(s, cfg)? * (1.0 + cfg.noise_sd_frac * z_sd);
            Ok(Row {
                env: *s,
                power: PowerRecord::new(mean.clamp(0.0, cfg.spec.rated_power), sd.max(0.0)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(rows, "oracle")
}
