//! Buoy field data: the yaw-misalignment proxy and the join of 10-minute
//! meteorological records with hourly wave records.
//!
//! File formats (comma-separated, one header line):
//!
//! * fast records: `timestamp_iso8601,v_mps,temp_c,pressure_pa,rh_pct`
//! * wave records: `timestamp_iso8601,wave_h_m,wave_dir_deg`
//! * raw 1 Hz direction: `timestamp_iso8601,dir_deg`
//!
//! Empty cells and `NaN` are read as missing.

use std::collections::HashMap;
use std::io::Read;

use chrono::{DateTime, NaiveDateTime, TimeDelta};

use super::AtmosphereConstants;
use crate::data::{Dataset, EnvSample};
use crate::error::{Error, Result};

pub type Timestamp = NaiveDateTime;

pub const DEFAULT_YAW_WINDOW: usize = 600;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FastRecord {
    pub time: Timestamp,
    pub v: Option<f64>,
    pub temp: Option<f64>,
    pub pressure: Option<f64>,
    /// Fraction in [0, 1].
    pub rh: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveRecord {
    pub time: Timestamp,
    pub wave_h: Option<f64>,
    pub wave_dir: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YawRecord {
    pub time: Timestamp,
    pub yaw: Option<f64>,
}

/// Directions unwrapped so that no step between neighbours exceeds 180°.
pub fn unwrap_degrees(directions: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(directions.len());
    let mut prev_raw = match directions.first() {
        Some(&d) => d,
        None => return out,
    };
    let mut acc = prev_raw;
    out.push(acc);
    for &d in &directions[1..] {
        let mut step = d - prev_raw;
        while step > 180.0 {
            step -= 360.0;
        }
        while step < -180.0 {
            step += 360.0;
        }
        acc += step;
        out.push(acc);
        prev_raw = d;
    }
    out
}

fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|x| (x - mean).powi(2)).sum();
    (ss / (n - 1.0)).sqrt()
}

/// Standard deviation of wind direction over consecutive non-overlapping
/// windows of `window` one-second samples. A trailing partial window is
/// discarded.
pub fn yaw_proxy(directions: &[f64], window: usize) -> Result<Vec<f64>> {
    if window < 2 {
        return Err(Error::InvalidArgument("yaw window needs at least 2 samples".into()));
    }
    if directions.len() < window {
        return Err(Error::SeriesTooShort {
            len: directions.len(),
            window,
        });
    }
    Ok(directions
        .chunks_exact(window)
        .map(|chunk| sample_sd(&unwrap_degrees(chunk)))
        .collect())
}

/// [`yaw_proxy`] over a timestamped series; each value is stamped with the
/// time of the first sample in its window.
pub fn yaw_proxy_series(samples: &[(Timestamp, f64)], window: usize) -> Result<Vec<YawRecord>> {
    check_increasing(samples.iter().map(|s| s.0), "direction")?;
    let dirs: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let sds = yaw_proxy(&dirs, window)?;
    Ok(sds
        .into_iter()
        .enumerate()
        .map(|(i, sd)| YawRecord {
            time: samples[i * window].0,
            yaw: Some(sd),
        })
        .collect())
}

fn check_increasing(times: impl Iterator<Item = Timestamp>, label: &str) -> Result<()> {
    let mut prev: Option<Timestamp> = None;
    for t in times {
        if let Some(p) = prev {
            if t <= p {
                return Err(Error::InvalidArgument(format!(
                    "{label} timestamps not strictly increasing at {t}"
                )));
            }
        }
        prev = Some(t);
    }
    Ok(())
}

/// Joined field rows ready for prediction, without power columns.
#[derive(Debug, Clone)]
pub struct Alignment {
    pub timestamps: Vec<Timestamp>,
    pub dataset: Dataset,
    /// Fast records dropped for lack of a wave record, a yaw value, or any field.
    pub dropped: usize,
}

/// Joins 10-minute meteorological records with the yaw proxy (matched on
/// identical timestamps) and hourly wave records (each forward-filled for one
/// hour from its own timestamp). Fast records with any field missing are
/// dropped and counted.
pub fn align_buoy_series(
    fast: &[FastRecord],
    wave: &[WaveRecord],
    yaw: &[YawRecord],
    consts: &AtmosphereConstants,
) -> Result<Alignment> {
    check_increasing(fast.iter().map(|r| r.time), "fast")?;
    check_increasing(wave.iter().map(|r| r.time), "wave")?;
    check_increasing(yaw.iter().map(|r| r.time), "yaw")?;
    let yaw_at: HashMap<Timestamp, Option<f64>> = yaw.iter().map(|r| (r.time, r.yaw)).collect();
    let hour = TimeDelta::hours(1);

    let mut timestamps = Vec::new();
    let mut samples = Vec::new();
    let mut dropped = 0;
    for rec in fast {
        let idx = wave.partition_point(|w| w.time <= rec.time);
        let wave_rec = idx
            .checked_sub(1)
            .map(|i| &wave[i])
            .filter(|w| rec.time < w.time + hour);
        let joined = (|| {
            let w = wave_rec?;
            let yaw = (*yaw_at.get(&rec.time)?)?;
            let sample = EnvSample {
                v: rec.v?,
                yaw,
                wave_h: w.wave_h?,
                wave_dir: w.wave_dir?,
                temp: rec.temp?,
                pressure: rec.pressure?,
                rh: rec.rh?,
                rho: None,
            };
            sample.with_density(consts).ok()
        })();
        match joined {
            Some(s) => {
                timestamps.push(rec.time);
                samples.push(s);
            }
            None => dropped += 1,
        }
    }
    if samples.is_empty() {
        return Err(Error::EmptyOverlap);
    }
    Ok(Alignment {
        timestamps,
        dataset: Dataset::from_samples(samples, "buoy alignment")?,
        dropped,
    })
}

pub fn parse_timestamp(raw: &str) -> Option<Timestamp> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(raw) {
        return Some(dt.naive_utc());
    }
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(raw, fmt).ok())
}

fn read_table<R: Read>(reader: R, header: &[&str]) -> Result<Vec<(usize, Timestamp, Vec<Option<f64>>)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let head = rdr.headers().map_err(|e| Error::parse(1, e.to_string()))?.clone();
    let cols = header
        .iter()
        .map(|name| {
            head.iter()
                .position(|h| h == *name)
                .ok_or_else(|| Error::MissingColumn(name.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            Error::parse(e.position().map_or(0, |p| p.line() as usize), e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let raw_time = record.get(cols[0]).unwrap_or("");
        let time = parse_timestamp(raw_time)
            .ok_or_else(|| Error::parse(line, format!("bad timestamp `{raw_time}`")))?;
        let values = cols[1..]
            .iter()
            .map(|&c| {
                let raw = record.get(c).unwrap_or("");
                if raw.is_empty() || raw.eq_ignore_ascii_case("nan") {
                    return Ok(None);
                }
                raw.parse::<f64>()
                    .map(Some)
                    .map_err(|_| Error::parse(line, format!("`{raw}` is not a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        out.push((line, time, values));
    }
    Ok(out)
}

pub fn read_fast_records<R: Read>(reader: R) -> Result<Vec<FastRecord>> {
    let rows = read_table(
        reader,
        &["timestamp_iso8601", "v_mps", "temp_c", "pressure_pa", "rh_pct"],
    )?;
    Ok(rows
        .into_iter()
        .map(|(_, time, f)| FastRecord {
            time,
            v: f[0],
            temp: f[1],
            pressure: f[2],
            rh: f[3].map(|pct| pct / 100.0),
        })
        .collect())
}

pub fn read_wave_records<R: Read>(reader: R) -> Result<Vec<WaveRecord>> {
    let rows = read_table(reader, &["timestamp_iso8601", "wave_h_m", "wave_dir_deg"])?;
    Ok(rows
        .into_iter()
        .map(|(_, time, f)| WaveRecord {
            time,
            wave_h: f[0],
            wave_dir: f[1],
        })
        .collect())
}

/// Raw 1 Hz wind directions. Missing samples are rejected because the proxy
/// windows assume an unbroken one-second cadence.
pub fn read_directions<R: Read>(reader: R) -> Result<Vec<(Timestamp, f64)>> {
    read_table(reader, &["timestamp_iso8601", "dir_deg"])?
        .into_iter()
        .map(|(line, time, f)| {
            f[0].map(|d| (time, d))
                .ok_or_else(|| Error::parse(line, "missing direction"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ts(h: u32, m: u32) -> Timestamp {
        chrono::NaiveDate::from_ymd_opt(2020, 6, 1)
            .unwrap()
            .and_hms_opt(h, m, 0)
            .unwrap()
    }

    fn fast(h: u32, m: u32) -> FastRecord {
        FastRecord {
            time: ts(h, m),
            v: Some(9.0),
            temp: Some(15.0),
            pressure: Some(101000.0),
            rh: Some(0.7),
        }
    }

    fn yaw(h: u32, m: u32) -> YawRecord {
        YawRecord {
            time: ts(h, m),
            yaw: Some(4.0),
        }
    }

    #[test]
    fn constant_series_has_zero_spread() {
        assert_eq!(yaw_proxy(&[123.0; 600], 600).unwrap(), vec![0.0]);
    }

    #[test]
    fn wraparound_is_unwrapped() {
        let dirs: Vec<f64> = (0..600).map(|i| if i % 2 == 0 { 350.0 } else { 10.0 }).collect();
        let sd = yaw_proxy(&dirs, 600).unwrap()[0];
        // 300 samples at 350 and 300 at 370: sqrt(600 * 100 / 599)
        assert!((sd - (60000.0f64 / 599.0).sqrt()).abs() < 1e-12);
        assert!((sd - 10.008).abs() < 1e-3);
    }

    #[test]
    fn window_count() {
        assert_eq!(yaw_proxy(&vec![1.0; 1200], 600).unwrap().len(), 2);
        assert_eq!(yaw_proxy(&vec![1.0; 1799], 600).unwrap().len(), 2);
        assert!(matches!(
            yaw_proxy(&[1.0; 10], 600),
            Err(Error::SeriesTooShort { len: 10, window: 600 })
        ));
    }

    proptest! {
        #[test]
        fn yaw_proxy_rotation_invariant(
            dirs in prop::collection::vec(0.0f64..360.0, 20..60),
            shift in 0.0f64..360.0,
        ) {
            // keep consecutive steps well away from the ±180° ambiguity
            let smooth: Vec<f64> = dirs.iter().scan(0.0, |acc, d| {
                *acc += (d - 180.0) / 4.0;
                Some(acc.rem_euclid(360.0))
            }).collect();
            let rotated: Vec<f64> = smooth.iter().map(|d| (d + shift).rem_euclid(360.0)).collect();
            let a = yaw_proxy(&smooth, smooth.len()).unwrap()[0];
            let b = yaw_proxy(&rotated, rotated.len()).unwrap()[0];
            prop_assert!((a - b).abs() < 1e-9 * a.max(1.0));
        }
    }

    #[test]
    fn hourly_wave_fills_six_slots() {
        let fast: Vec<_> = (0..6).map(|k| fast(3, 10 * k)).collect();
        let yaws: Vec<_> = (0..6).map(|k| yaw(3, 10 * k)).collect();
        let wave = [WaveRecord {
            time: ts(3, 0),
            wave_h: Some(2.5),
            wave_dir: Some(120.0),
        }];
        let a = align_buoy_series(&fast, &wave, &yaws, &AtmosphereConstants::default()).unwrap();
        assert_eq!(a.dataset.len(), 6);
        assert_eq!(a.dropped, 0);
        for s in a.dataset.samples() {
            assert_eq!((s.wave_h, s.wave_dir), (2.5, 120.0));
            assert!(s.rho.is_some());
        }
    }

    #[test]
    fn records_before_first_wave_are_dropped() {
        let fast: Vec<_> = (0..12).map(|k| fast(2 + k / 6, 10 * (k % 6))).collect();
        let yaws: Vec<_> = (0..12).map(|k| yaw(2 + k / 6, 10 * (k % 6))).collect();
        let wave = [WaveRecord {
            time: ts(3, 0),
            wave_h: Some(1.0),
            wave_dir: Some(90.0),
        }];
        let a = align_buoy_series(&fast, &wave, &yaws, &AtmosphereConstants::default()).unwrap();
        assert_eq!(a.dataset.len(), 6);
        assert_eq!(a.dropped, 6);
        assert_eq!(a.timestamps[0], ts(3, 0));
    }

    #[test]
    fn missing_fields_drop_rows() {
        let mut f: Vec<_> = (0..6).map(|k| fast(3, 10 * k)).collect();
        f[2].temp = None;
        let mut y: Vec<_> = (0..6).map(|k| yaw(3, 10 * k)).collect();
        y.remove(4);
        let wave = [WaveRecord {
            time: ts(3, 0),
            wave_h: Some(1.0),
            wave_dir: Some(90.0),
        }];
        let a = align_buoy_series(&f, &wave, &y, &AtmosphereConstants::default()).unwrap();
        assert_eq!((a.dataset.len(), a.dropped), (4, 2));
    }

    #[test]
    fn disjoint_spans_fail() {
        let f = [fast(1, 0)];
        let y = [yaw(1, 0)];
        let wave = [WaveRecord {
            time: ts(5, 0),
            wave_h: Some(1.0),
            wave_dir: Some(90.0),
        }];
        assert!(matches!(
            align_buoy_series(&f, &wave, &y, &AtmosphereConstants::default()),
            Err(Error::EmptyOverlap)
        ));
    }

    #[test]
    fn unsorted_series_rejected() {
        let f = [fast(1, 10), fast(1, 0)];
        assert!(align_buoy_series(&f, &[], &[], &AtmosphereConstants::default()).is_err());
    }

    #[test]
    fn reads_buoy_files() {
        let fast_csv = "timestamp_iso8601,v_mps,temp_c,pressure_pa,rh_pct\n\
                        2020-06-01T03:00:00Z,9.5,14,101200,80\n\
                        2020-06-01T03:10:00,NaN,14,101200,80\n";
        let f = read_fast_records(fast_csv.as_bytes()).unwrap();
        assert_eq!(f.len(), 2);
        assert_eq!(f[0].time, ts(3, 0));
        assert_eq!(f[0].rh, Some(0.8));
        assert_eq!(f[1].v, None);

        let wave_csv = "timestamp_iso8601,wave_h_m,wave_dir_deg\n2020-06-01 03:00:00,1.2,\n";
        let w = read_wave_records(wave_csv.as_bytes()).unwrap();
        assert_eq!((w[0].wave_h, w[0].wave_dir), (Some(1.2), None));

        let dir_csv = "timestamp_iso8601,dir_deg\n2020-06-01T03:00:00,10\n2020-06-01T03:00:01,12\n";
        let d = read_directions(dir_csv.as_bytes()).unwrap();
        assert_eq!(d.len(), 2);

        let bad = "timestamp_iso8601,dir_deg\nyesterday,10\n";
        assert!(matches!(read_directions(bad.as_bytes()), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn timestamped_proxy_uses_window_start() {
        let start = ts(0, 0);
        let samples: Vec<_> = (0..1200)
            .map(|i| (start + TimeDelta::seconds(i), (i % 7) as f64))
            .collect();
        let y = yaw_proxy_series(&samples, 600).unwrap();
        assert_eq!(y.len(), 2);
        assert_eq!(y[1].time, ts(0, 10));
    }
}
