use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::atmosphere::{iec_corrected_speed, AtmosphereConstants};
use crate::data::{Dataset, EnvSample, Target};
use crate::error::{Error, Result};

pub const DEFAULT_BIN_WIDTH: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bin {
    /// Lower edge, m/s; an integer multiple of the bin width.
    pub lower: f64,
    pub mean: f64,
    pub count: usize,
}

/// Average power per wind-speed bin. Bins are sorted and never empty.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedCurve {
    pub bin_width: f64,
    pub density_corrected: bool,
    pub rho_ref: f64,
    pub bins: Vec<Bin>,
}

fn bin_index(speed: f64, width: f64) -> i64 {
    (speed / width).floor() as i64
}

fn binning_speed(s: &EnvSample, corrected: bool, consts: &AtmosphereConstants) -> Result<f64> {
    if corrected {
        iec_corrected_speed(s.v, s.density()?, consts)
    } else {
        Ok(s.v)
    }
}

/// Bins the chosen power statistic by wind speed. With `corrected`, speeds
/// are first normalized to the reference density.
pub fn fit_binning(
    ds: &Dataset,
    target: Target,
    width: f64,
    corrected: bool,
    consts: &AtmosphereConstants,
) -> Result<BinnedCurve> {
    if !(width > 0.0) {
        return Err(Error::InvalidArgument(format!("bin width {width} must be positive")));
    }
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let values = ds.targets(target)?;
    let mut acc: BTreeMap<i64, (f64, usize)> = BTreeMap::new();
    for (row, y) in ds.rows().iter().zip(values) {
        let speed = binning_speed(&row.env, corrected, consts)?;
        let slot = acc.entry(bin_index(speed, width)).or_insert((0.0, 0));
        slot.0 += y;
        slot.1 += 1;
    }
    let bins = acc
        .into_iter()
        .map(|(idx, (sum, count))| Bin {
            lower: idx as f64 * width,
            mean: sum / count as f64,
            count,
        })
        .collect();
    Ok(BinnedCurve {
        bin_width: width,
        density_corrected: corrected,
        rho_ref: consts.rho_ref,
        bins,
    })
}

/// Mean of the bin holding the sample's (possibly corrected) speed; an empty
/// bin falls back to the nearest populated one, the lower on a tie.
pub fn predict_binning(curve: &BinnedCurve, s: &EnvSample) -> Result<f64> {
    if curve.bins.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let consts = AtmosphereConstants {
        rho_ref: curve.rho_ref,
        ..AtmosphereConstants::default()
    };
    let speed = binning_speed(s, curve.density_corrected, &consts)?;
    let target = bin_index(speed, curve.bin_width);
    let index_of = |b: &Bin| (b.lower / curve.bin_width).round() as i64;
    let pos = curve.bins.partition_point(|b| index_of(b) < target);
    let best = match (pos.checked_sub(1), curve.bins.get(pos)) {
        (_, Some(b)) if index_of(b) == target => b,
        (Some(lo), Some(hi)) => {
            let below = &curve.bins[lo];
            if target - index_of(below) <= index_of(hi) - target {
                below
            } else {
                hi
            }
        }
        (Some(lo), None) => &curve.bins[lo],
        (None, Some(hi)) => hi,
        (None, None) => unreachable!("curve has bins"),
    };
    Ok(best.mean)
}

impl BinnedCurve {
    pub fn predict(&self, ds: &Dataset) -> Result<Vec<f64>> {
        ds.samples().map(|s| predict_binning(self, s)).collect()
    }

    /// `bin_lower_mps,mean_kw,count`
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let io = |e: csv::Error| Error::InvalidArgument(e.to_string());
        wtr.write_record(["bin_lower_mps", "mean_kw", "count"]).map_err(io)?;
        for b in &self.bins {
            wtr.write_record([b.lower.to_string(), b.mean.to_string(), b.count.to_string()])
                .map_err(io)?;
        }
        wtr.flush().map_err(|e| Error::io("<binned curve>", e))
    }

    /// Reads the CSV written by [`BinnedCurve::write_csv`]. The width is not
    /// stored in the file and must be supplied, as must the correction flag.
    pub fn read_csv<R: Read>(
        input: R,
        bin_width: f64,
        density_corrected: bool,
        rho_ref: f64,
    ) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
        let header = rdr.headers().map_err(|e| Error::parse(1, e.to_string()))?.clone();
        for name in ["bin_lower_mps", "mean_kw", "count"] {
            if !header.iter().any(|h| h == name) {
                return Err(Error::MissingColumn(name.into()));
            }
        }
        let mut bins: Vec<Bin> = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::parse(0, e.to_string()))?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            let get = |i: usize| rec.get(i).unwrap_or("");
            let bad = |what: &str| Error::parse(line, format!("bad {what}"));
            let bin = Bin {
                lower: get(0).parse().map_err(|_| bad("bin_lower_mps"))?,
                mean: get(1).parse().map_err(|_| bad("mean_kw"))?,
                count: get(2).parse().map_err(|_| bad("count"))?,
            };
            if bin.count == 0 {
                return Err(bad("count"));
            }
            if bins.last().is_some_and(|b| b.lower >= bin.lower) {
                return Err(Error::parse(line, "bins must be sorted by lower edge"));
            }
            bins.push(bin);
        }
        if bins.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(BinnedCurve {
            bin_width,
            density_corrected,
            rho_ref,
            bins,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{PowerRecord, Row};

    fn row(v: f64, p: f64, rho: f64) -> Row {
        Row {
            env: EnvSample {
                v,
                yaw: 0.0,
                wave_h: 1.0,
                wave_dir: 0.0,
                temp: 15.0,
                pressure: 101325.0,
                rh: 0.0,
                rho: Some(rho),
            },
            power: PowerRecord::new(p, 0.0),
        }
    }

    fn ds(rows: Vec<Row>) -> Dataset {
        Dataset::new(rows, "t").unwrap()
    }

    fn consts() -> AtmosphereConstants {
        AtmosphereConstants::default()
    }

    #[test]
    fn averages_within_bin() {
        let d = ds(vec![row(5.1, 100.0, 1.2), row(5.3, 120.0, 1.2), row(5.4, 140.0, 1.2)]);
        let c = fit_binning(&d, Target::Mean, 0.5, false, &consts()).unwrap();
        assert_eq!(c.bins, vec![Bin { lower: 5.0, mean: 120.0, count: 3 }]);
    }

    #[test]
    fn singleton() {
        let d = ds(vec![row(7.7, 42.0, 1.1)]);
        let c = fit_binning(&d, Target::Mean, 0.5, true, &consts()).unwrap();
        assert_eq!(c.bins.len(), 1);
        assert_eq!(c.bins[0].mean, 42.0);
    }

    #[test]
    fn reference_density_makes_correction_identity() {
        let rows: Vec<_> = (0..40).map(|i| row(0.37 * i as f64, 10.0 * i as f64, 1.225)).collect();
        let d = ds(rows);
        let plain = fit_binning(&d, Target::Mean, 0.5, false, &consts()).unwrap();
        let corr = fit_binning(&d, Target::Mean, 0.5, true, &consts()).unwrap();
        assert_eq!(plain.bins, corr.bins);
        for s in d.samples() {
            assert_eq!(predict_binning(&plain, s).unwrap(), predict_binning(&corr, s).unwrap());
        }
    }

    #[test]
    fn lookup_gap_and_clamp() {
        let d = ds(vec![row(2.2, 10.0, 1.2), row(3.2, 30.0, 1.2), row(6.1, 60.0, 1.2)]);
        let c = fit_binning(&d, Target::Mean, 0.5, false, &consts()).unwrap();
        let at = |v: f64| predict_binning(&c, &row(v, 0.0, 1.2).env).unwrap();
        assert_eq!(at(3.4), 30.0);
        // 2.7 sits in bin [2.5, 3.0): one bin from each neighbour, lower wins
        assert_eq!(at(2.7), 10.0);
        assert_eq!(at(4.2), 30.0);
        assert_eq!(at(5.6), 60.0);
        assert_eq!(at(20.0), 60.0);
        assert_eq!(at(0.0), 10.0);
    }

    #[test]
    fn isolated_rows_reproduce_exactly() {
        let rows: Vec<_> = (0..20).map(|i| row(0.5 * i as f64 + 0.1, (i * i) as f64, 1.3)).collect();
        let d = ds(rows);
        let c = fit_binning(&d, Target::Mean, 0.5, false, &consts()).unwrap();
        assert_eq!(c.predict(&d).unwrap(), d.targets(Target::Mean).unwrap());
    }

    #[test]
    fn csv_round_trip() {
        let d = ds(vec![row(2.2, 10.0, 1.2), row(6.1, 60.5, 1.2)]);
        let c = fit_binning(&d, Target::Mean, 0.5, true, &consts()).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "bin_lower_mps,mean_kw,count\n2,10,1\n6,60.5,1\n");
        let back = BinnedCurve::read_csv(buf.as_slice(), 0.5, true, 1.225).unwrap();
        assert_eq!(back, c);
    }
}
