//! Space-filling experimental design over the seven environmental variables.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::atmosphere::AtmosphereConstants;
use crate::data::{EnvSample, Variable};
use crate::error::{Error, Result};
use crate::sobol::sobol_unit;

/// Lower and upper bound of each design variable. Humidity is a fraction.
///
/// Deserializes from `{ "v": [0, 25], "yaw": [0, 30], ... }`; omitted
/// variables keep their default band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariableRanges {
    pub v: [f64; 2],
    pub yaw: [f64; 2],
    pub wave_h: [f64; 2],
    pub wave_dir: [f64; 2],
    pub temp: [f64; 2],
    pub pressure: [f64; 2],
    pub rh: [f64; 2],
}

impl Default for VariableRanges {
    fn default() -> Self {
        VariableRanges {
            v: [0.0, 25.0],
            yaw: [0.0, 30.0],
            wave_h: [0.0, 20.0],
            wave_dir: [0.0, 180.0],
            temp: [-20.0, 40.0],
            pressure: [91192.5, 111457.5],
            rh: [0.0, 1.0],
        }
    }
}

impl VariableRanges {
    /// Bounds in design-column order (v, yaw, wave_h, wave_dir, temp, pressure, rh).
    pub fn bounds(&self) -> [[f64; 2]; 7] {
        [
            self.v,
            self.yaw,
            self.wave_h,
            self.wave_dir,
            self.temp,
            self.pressure,
            self.rh,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (var, [lower, upper]) in Variable::DESIGN.iter().zip(self.bounds()) {
            if !(lower.is_finite() && upper.is_finite() && lower < upper) {
                return Err(Error::InvalidRange {
                    name: var.name().to_string(),
                    lower,
                    upper,
                });
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ranges: VariableRanges = serde_json::from_str(text)?;
        ranges.validate()?;
        Ok(ranges)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Maps unit-cube rows affinely onto the design box and fills air density.
pub fn scale_design(
    unit: &[Vec<f64>],
    ranges: &VariableRanges,
    consts: &AtmosphereConstants,
) -> Result<Vec<EnvSample>> {
    ranges.validate()?;
    let bounds = ranges.bounds();
    unit.iter()
        .map(|row| {
            if row.len() != bounds.len() {
                return Err(Error::ColumnCountMismatch {
                    expected: bounds.len(),
                    found: row.len(),
                });
            }
            let x: Vec<f64> = row
                .iter()
                .zip(&bounds)
                .map(|(u, [lo, hi])| lo + u * (hi - lo))
                .collect();
            EnvSample {
                v: x[0],
                yaw: x[1],
                wave_h: x[2],
                wave_dir: x[3],
                temp: x[4],
                pressure: x[5],
                rh: x[6],
                rho: None,
            }
            .with_density(consts)
        })
        .collect()
}

/// The first `n` Sobol points scaled onto `ranges`.
pub fn sobol_design(
    n: usize,
    ranges: &VariableRanges,
    consts: &AtmosphereConstants,
) -> Result<Vec<EnvSample>> {
    let unit = sobol_unit(n, Variable::DESIGN.len())?;
    scale_design(&unit, ranges, consts)
}

/// Largest absolute gap between the number of points in any axis-aligned
/// dyadic box of volume `2^-level` and its expected count `n·2^-level`.
///
/// Every split of `level` halvings across the axes is checked, so for
/// `level = 3` in seven dimensions there are 84 box shapes of 8 cells each.
pub fn dyadic_discrepancy(points: &[Vec<f64>], level: u32) -> f64 {
    let Some(first) = points.first() else {
        return 0.0;
    };
    let dims = first.len();
    let expected = points.len() as f64 / f64::from(1u32 << level);
    let mut worst: f64 = 0.0;
    let mut shape = vec![0u32; dims];
    visit_compositions(level, 0, &mut shape, &mut |shape| {
        let mut counts = vec![0usize; 1 << level];
        for p in points {
            let mut cell = 0usize;
            for (x, &bits) in p.iter().zip(shape) {
                let idx = ((x * f64::from(1u32 << bits)) as usize).min((1 << bits) - 1);
                cell = (cell << bits) | idx;
            }
            counts[cell] += 1;
        }
        for c in counts {
            worst = worst.max((c as f64 - expected).abs());
        }
    });
    worst
}

fn visit_compositions(remaining: u32, axis: usize, shape: &mut [u32], f: &mut impl FnMut(&[u32])) {
    if axis + 1 == shape.len() {
        shape[axis] = remaining;
        f(shape);
        return;
    }
    for k in 0..=remaining {
        shape[axis] = k;
        visit_compositions(remaining - k, axis + 1, shape, f);
    }
}
