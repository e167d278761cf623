//! Moist-air density, the IEC density correction of wind speed, and
//! preprocessing of buoy field records (see [`field`]).

pub mod field;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical constants for the density equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtmosphereConstants {
    /// Specific gas constant of dry air, J/(kg·K).
    pub r_d: f64,
    /// Specific gas constant of water vapor, J/(kg·K).
    pub r_v: f64,
    /// Added to °C to get absolute temperature. 273.3 reproduces the
    /// published density equation literally; 273.15 is the SI value.
    pub kelvin_offset: f64,
    /// Reference density for the IEC wind speed correction, kg/m³.
    pub rho_ref: f64,
}

impl Default for AtmosphereConstants {
    fn default() -> Self {
        AtmosphereConstants {
            r_d: 287.05,
            r_v: 461.5,
            kelvin_offset: 273.3,
            rho_ref: 1.225,
        }
    }
}

impl AtmosphereConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("r_d", self.r_d),
            ("r_v", self.r_v),
            ("kelvin_offset", self.kelvin_offset),
            ("rho_ref", self.rho_ref),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

pub const SATURATION_TEMP_RANGE: (f64, f64) = (-40.0, 60.0);

/// Saturation vapor pressure over water in Pa (Magnus–Tetens).
pub fn saturation_pressure(temp: f64) -> Result<f64> {
    let (lo, hi) = SATURATION_TEMP_RANGE;
    if !(lo..=hi).contains(&temp) {
        return Err(Error::TempOutOfRange(temp));
    }
    Ok(610.94 * (17.625 * temp / (temp + 243.04)).exp())
}

/// Density of moist air in kg/m³ from temperature (°C), pressure (Pa) and
/// relative humidity (fraction).
///
/// The dry-air partial pressure `pressure − rh·P_sat` is divided by `R_d·T`
/// and the vapor partial pressure `rh·P_sat` by `R_v·T`.
pub fn air_density(temp: f64, pressure: f64, rh: f64, consts: &AtmosphereConstants) -> Result<f64> {
    if !(pressure.is_finite() && pressure > 0.0) {
        return Err(Error::InvalidArgument(format!("pressure {pressure} must be positive")));
    }
    if !(0.0..=1.0).contains(&rh) {
        return Err(Error::InvalidArgument(format!("relative humidity {rh} outside [0, 1]")));
    }
    let t_abs = temp + consts.kelvin_offset;
    if !(t_abs > 0.0) {
        return Err(Error::NonphysicalResult(format!("absolute temperature {t_abs} K")));
    }
    let vapor = if rh > 0.0 {
        rh * saturation_pressure(temp)?
    } else {
        0.0
    };
    let rho = (pressure - vapor) / (consts.r_d * t_abs) + vapor / (consts.r_v * t_abs);
    if rho > 0.0 {
        Ok(rho)
    } else {
        Err(Error::NonphysicalResult(format!("air density {rho} kg/m³")))
    }
}

/// Wind speed normalized to the reference density, `v·(ρ/ρ_ref)^(1/3)`.
pub fn iec_corrected_speed(v: f64, rho: f64, consts: &AtmosphereConstants) -> Result<f64> {
    if !(v >= 0.0) {
        return Err(Error::InvalidArgument(format!("wind speed {v} must be nonnegative")));
    }
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!("air density {rho} must be positive")));
    }
    Ok(v * (rho / consts.rho_ref).cbrt())
}
