use crate::error::{Error, Result};

/// `|∂P/∂θ| / |∂P/∂ρ|` of the cubic power law, `3ρ·tan θ`, θ in degrees.
pub fn yaw_density_ratio(rho: f64, yaw_deg: f64) -> Result<f64> {
    if !(0.0..90.0).contains(&yaw_deg) {
        return Err(Error::YawOutOfRange(yaw_deg));
    }
    Ok((3.0 * rho * yaw_deg.to_radians().tan()).abs())
}

/// Yaw angles, in degrees, at which the yaw sensitivity overtakes the
/// density sensitivity at the densest (`theta1`) and thinnest (`theta2`) air.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityThresholds {
    pub rho_min: f64,
    pub rho_max: f64,
    pub theta1: f64,
    pub theta2: f64,
}

fn crossing(rho: f64) -> f64 {
    (1.0 / (3.0 * rho)).atan().to_degrees()
}

pub fn significance_thresholds(rho_min: f64, rho_max: f64) -> Result<SensitivityThresholds> {
    if !(rho_min > 0.0 && rho_min <= rho_max && rho_max.is_finite()) {
        return Err(Error::InvalidDensityOrder { rho_min, rho_max });
    }
    Ok(SensitivityThresholds {
        rho_min,
        rho_max,
        theta1: crossing(rho_max),
        theta2: crossing(rho_min),
    })
}

/// `(yaw, ratio at rho_min, ratio at rho_max)` from 0 to `yaw_max` degrees.
pub fn ratio_curve(t: &SensitivityThresholds, yaw_max: f64, step: f64) -> Result<Vec<(f64, f64, f64)>> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("yaw step {step} must be positive")));
    }
    let count = (yaw_max / step + 1e-9).floor() as usize;
    (0..=count)
        .map(|i| {
            let yaw = i as f64 * step;
            Ok((yaw, yaw_density_ratio(t.rho_min, yaw)?, yaw_density_ratio(t.rho_max, yaw)?))
        })
        .collect()
}

/// Energy in MWh of a power series in kW sampled every `step_h` hours.
pub fn total_energy(power_kw: &[f64], step_h: f64) -> Result<f64> {
    if power_kw.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(step_h > 0.0) {
        return Err(Error::InvalidArgument(format!("time step {step_h} must be positive")));
    }
    Ok(power_kw.iter().sum::<f64>() * step_h / 1000.0)
}

/// `|Σ(p̂ − p)|·step/1000`, MWh.
pub fn energy_error(predicted_kw: &[f64], actual_kw: &[f64], step_h: f64) -> Result<f64> {
    if predicted_kw.len() != actual_kw.len() {
        return Err(Error::LengthMismatch(predicted_kw.len(), actual_kw.len()));
    }
    Ok((total_energy(predicted_kw, step_h)? - total_energy(actual_kw, step_h)?).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_examples() {
        assert_eq!(yaw_density_ratio(1.2, 0.0).unwrap(), 0.0);
        assert!((yaw_density_ratio(1.225, 45.0).unwrap() - 3.675).abs() < 1e-12);
        assert!(matches!(yaw_density_ratio(1.2, 90.0), Err(Error::YawOutOfRange(_))));
        assert!(matches!(yaw_density_ratio(1.2, -1.0), Err(Error::YawOutOfRange(_))));
    }

    #[test]
    fn thresholds() {
        let t = significance_thresholds(1.004, 1.523).unwrap();
        assert!((t.theta1 - 12.34).abs() < 0.05, "{}", t.theta1);
        assert!((t.theta2 - 18.36).abs() < 0.05, "{}", t.theta2);
        assert!(t.theta1 < t.theta2);
        assert!((yaw_density_ratio(t.rho_max, t.theta1).unwrap() - 1.0).abs() < 1e-9);
        assert!((yaw_density_ratio(t.rho_min, t.theta2).unwrap() - 1.0).abs() < 1e-9);
        let same = significance_thresholds(1.2, 1.2).unwrap();
        assert_eq!(same.theta1, same.theta2);
        assert!(significance_thresholds(1e12, 1e12).unwrap().theta1 < 1e-9);
        assert!(matches!(significance_thresholds(1.5, 1.0), Err(Error::InvalidDensityOrder { .. })));
    }

    #[test]
    fn curve_spans_range() {
        let t = significance_thresholds(1.0, 1.5).unwrap();
        let c = ratio_curve(&t, 30.0, 0.5).unwrap();
        assert_eq!(c.len(), 61);
        assert_eq!(c.last().unwrap().0, 30.0);
        assert!(c.iter().all(|&(_, lo, hi)| lo <= hi));
    }

    #[test]
    fn energy() {
        assert_eq!(total_energy(&[15000.0], 1.0).unwrap(), 15.0);
        assert_eq!(total_energy(&[0.0; 6], 1.0 / 6.0).unwrap(), 0.0);
        let e = energy_error(&[100.0, 300.0], &[200.0, 100.0], 0.5).unwrap();
        assert!((e - 0.05).abs() < 1e-15);
        assert!(total_energy(&[1.0], 0.0).is_err());
    }
}
