//! Domain records, the row container shared by every stage of the pipeline,
//! and the dataset CSV format.
//!
//! The CSV header is fixed:
//!
//! ```text
//! v_mps,yaw_deg,wave_h_m,wave_dir_deg,temp_c,pressure_pa,rh_pct,rho_kgm3,p_mean_kw,p_sd_kw
//! ```
//!
//! Relative humidity is written in percent and held as a fraction in memory.
//! `rho_kgm3`, `p_mean_kw` and `p_sd_kw` may be missing from the header or left
//! empty on every row; a missing density is recomputed from temperature,
//! pressure and humidity on load. Extra columns (for example `pred_kw`) are
//! ignored by the reader.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::atmosphere::{air_density, AtmosphereConstants};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 10] = [
    "v_mps",
    "yaw_deg",
    "wave_h_m",
    "wave_dir_deg",
    "temp_c",
    "pressure_pa",
    "rh_pct",
    "rho_kgm3",
    "p_mean_kw",
    "p_sd_kw",
];

/// One environmental input of the power curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    V,
    Yaw,
    WaveH,
    WaveDir,
    Temp,
    Pressure,
    Rh,
    Rho,
}

impl Variable {
    pub const ALL: [Variable; 8] = [
        Variable::V,
        Variable::Yaw,
        Variable::WaveH,
        Variable::WaveDir,
        Variable::Temp,
        Variable::Pressure,
        Variable::Rh,
        Variable::Rho,
    ];

    /// The seven independently designed variables, in design-column order.
    pub const DESIGN: [Variable; 7] = [
        Variable::V,
        Variable::Yaw,
        Variable::WaveH,
        Variable::WaveDir,
        Variable::Temp,
        Variable::Pressure,
        Variable::Rh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variable::V => "v",
            Variable::Yaw => "yaw",
            Variable::WaveH => "wave_h",
            Variable::WaveDir => "wave_dir",
            Variable::Temp => "temp",
            Variable::Pressure => "pressure",
            Variable::Rh => "rh",
            Variable::Rho => "rho",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Variable::V => "Wind Speed",
            Variable::Yaw => "Yaw Misalignment",
            Variable::WaveH => "Wave Height",
            Variable::WaveDir => "Wave Direction",
            Variable::Temp => "Air Temperature",
            Variable::Pressure => "Air Pressure",
            Variable::Rh => "Relative Humidity",
            Variable::Rho => "Air Density",
        }
    }

    /// Parses a comma-separated list such as `v,yaw,rho`, rejecting repeats.
    pub fn parse_list(list: &str) -> Result<Vec<Variable>> {
        let names: Vec<&str> = list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .collect();
        parse_variables(&names)
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variable::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::UnknownVariable(s.to_string()))
    }
}

fn parse_variables(names: &[&str]) -> Result<Vec<Variable>> {
    if names.is_empty() {
        return Err(Error::InvalidArgument("no input variables given".into()));
    }
    let mut out = Vec::with_capacity(names.len());
    for name in names {
        let var: Variable = name.parse()?;
        if out.contains(&var) {
            return Err(Error::DuplicateVariable(var.name().to_string()));
        }
        out.push(var);
    }
    Ok(out)
}

/// Which power statistic a model predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Mean,
    Sd,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::Mean => "mean",
            Target::Sd => "sd",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Target::Mean),
            "sd" => Ok(Target::Sd),
            other => Err(Error::InvalidArgument(format!(
                "target must be `mean` or `sd`, got `{other}`"
            ))),
        }
    }
}

/// One environmental condition. `rh` is a fraction in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvSample {
    pub v: f64,
    pub yaw: f64,
    pub wave_h: f64,
    pub wave_dir: f64,
    pub temp: f64,
    pub pressure: f64,
    pub rh: f64,
    pub rho: Option<f64>,
}

impl EnvSample {
    pub fn get(&self, var: Variable) -> Option<f64> {
        Some(match var {
            Variable::V => self.v,
            Variable::Yaw => self.yaw,
            Variable::WaveH => self.wave_h,
            Variable::WaveDir => self.wave_dir,
            Variable::Temp => self.temp,
            Variable::Pressure => self.pressure,
            Variable::Rh => self.rh,
            Variable::Rho => return self.rho,
        })
    }

    pub fn density(&self) -> Result<f64> {
        self.rho.ok_or(Error::MissingDensity)
    }

    /// Fills `rho` from temperature, pressure and humidity.
    pub fn with_density(mut self, consts: &AtmosphereConstants) -> Result<Self> {
        self.rho = Some(air_density(self.temp, self.pressure, self.rh, consts)?);
        Ok(self)
    }

    /// `false` for ingested rows whose yaw or wave direction lies outside the
    /// design box (0–30° and 0–180°). Such rows are kept, only flagged.
    pub fn within_design_angles(&self) -> bool {
        (0.0..=30.0).contains(&self.yaw) && (0.0..=180.0).contains(&self.wave_dir)
    }

    fn check_physical(&self) -> std::result::Result<(), String> {
        let all = [
            self.v,
            self.yaw,
            self.wave_h,
            self.wave_dir,
            self.temp,
            self.pressure,
            self.rh,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err("non-finite value".into());
        }
        if self.v < 0.0 {
            return Err(format!("negative wind speed {}", self.v));
        }
        if self.wave_h < 0.0 {
            return Err(format!("negative wave height {}", self.wave_h));
        }
        if self.pressure <= 0.0 {
            return Err(format!("nonpositive pressure {}", self.pressure));
        }
        if !(0.0..=1.0).contains(&self.rh) {
            return Err(format!("relative humidity {}% outside 0-100", self.rh * 100.0));
        }
        if let Some(rho) = self.rho {
            if !(rho.is_finite() && rho > 0.0) {
                return Err(format!("nonpositive air density {rho}"));
            }
        }
        Ok(())
    }
}

/// Mean and standard deviation of generator power, kW.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PowerRecord {
    pub p_mean: Option<f64>,
    pub p_sd: Option<f64>,
}

impl PowerRecord {
    pub fn new(p_mean: f64, p_sd: f64) -> Self {
        PowerRecord {
            p_mean: Some(p_mean),
            p_sd: Some(p_sd),
        }
    }

    pub fn get(&self, target: Target) -> Option<f64> {
        match target {
            Target::Mean => self.p_mean,
            Target::Sd => self.p_sd,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub env: EnvSample,
    pub power: PowerRecord,
}

/// Ordered rows plus a free-text provenance tag. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: Vec<Row>,
    provenance: String,
}

impl Dataset {
    pub fn new(rows: Vec<Row>, provenance: impl Into<String>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let pattern = field_pattern(&rows[0]);
        if let Some(i) = rows.iter().position(|r| field_pattern(r) != pattern) {
            return Err(Error::InvalidArgument(format!(
                "row {i} populates a different set of fields than row 0"
            )));
        }
        Ok(Dataset {
            rows,
            provenance: provenance.into(),
        })
    }

    /// Rows with no power columns, e.g. a fresh experimental design.
    pub fn from_samples(samples: Vec<EnvSample>, provenance: impl Into<String>) -> Result<Self> {
        let rows = samples
            .into_iter()
            .map(|env| Row {
                env,
                power: PowerRecord::default(),
            })
            .collect();
        Dataset::new(rows, provenance)
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn samples(&self) -> impl Iterator<Item = &EnvSample> + '_ {
        self.rows.iter().map(|r| &r.env)
    }

    /// The requested power statistic of every row, or `MissingColumn` if
    /// the dataset does not carry it.
    pub fn targets(&self, target: Target) -> Result<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| {
                r.power.get(target).ok_or_else(|| {
                    Error::MissingColumn(match target {
                        Target::Mean => "p_mean_kw".into(),
                        Target::Sd => "p_sd_kw".into(),
                    })
                })
            })
            .collect()
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let rows = indices.iter().map(|&i| self.rows[i]).collect();
        Dataset::new(rows, self.provenance.clone())
    }

    /// Indices of rows outside the design angle box.
    pub fn flagged_rows(&self) -> Vec<usize> {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, r)| !r.env.within_design_angles())
            .map(|(i, _)| i)
            .collect()
    }
}

fn field_pattern(row: &Row) -> [bool; 3] {
    [
        row.env.rho.is_some(),
        row.power.p_mean.is_some(),
        row.power.p_sd.is_some(),
    ]
}

/// Named input columns pulled out of a dataset, one row per dataset row.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    pub names: Vec<Variable>,
    pub values: Mat<f64>,
}

impl DesignMatrix {
    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }
}

pub fn select_inputs(ds: &Dataset, names: &[&str]) -> Result<DesignMatrix> {
    let vars = parse_variables(names)?;
    select_variables(ds, &vars)
}

pub fn select_variables(ds: &Dataset, vars: &[Variable]) -> Result<DesignMatrix> {
    let names = parse_variables(&vars.iter().map(|v| v.name()).collect::<Vec<_>>())?;
    let rows = ds.rows();
    if vars.contains(&Variable::Rho) && rows.iter().any(|r| r.env.rho.is_none()) {
        return Err(Error::MissingDensity);
    }
    let values = Mat::from_fn(rows.len(), names.len(), |i, k| {
        rows[i].env.get(names[k]).unwrap_or(f64::NAN)
    });
    Ok(DesignMatrix { names, values })
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(file, path.display().to_string())
}

pub fn read_dataset<R: Read>(reader: R, provenance: impl Into<String>) -> Result<Dataset> {
    let consts = AtmosphereConstants::default();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| csv_error(e, 1))?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let mut required = [0usize; 7];
    for (slot, name) in required.iter_mut().zip(&CSV_HEADER[..7]) {
        *slot = col(name).ok_or_else(|| Error::MissingColumn(name.to_string()))?;
    }
    let rho_col = col("rho_kgm3");
    let mean_col = col("p_mean_kw");
    let sd_col = col("p_sd_kw");

    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            csv_error(e, line)
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |idx: usize| -> Result<Option<f64>> {
            let raw = record.get(idx).unwrap_or("");
            if raw.is_empty() {
                return Ok(None);
            }
            raw.parse::<f64>()
                .map(Some)
                .map_err(|_| Error::parse(line, format!("`{raw}` in column `{}` is not a number", &header[idx])))
        };
        let needed = |idx: usize| -> Result<f64> {
            field(idx)?.ok_or_else(|| Error::parse(line, format!("empty `{}`", &header[idx])))
        };
        let optional = |idx: Option<usize>| -> Result<Option<f64>> {
            match idx {
                Some(i) => field(i),
                None => Ok(None),
            }
        };
        let env = EnvSample {
            v: needed(required[0])?,
            yaw: needed(required[1])?,
            wave_h: needed(required[2])?,
            wave_dir: needed(required[3])?,
            temp: needed(required[4])?,
            pressure: needed(required[5])?,
            rh: needed(required[6])? / 100.0,
            rho: optional(rho_col)?,
        };
        env.check_physical().map_err(|m| Error::parse(line, m))?;
        let power = PowerRecord {
            p_mean: optional(mean_col)?,
            p_sd: optional(sd_col)?,
        };
        for (label, value) in [("p_mean_kw", power.p_mean), ("p_sd_kw", power.p_sd)] {
            if let Some(p) = value {
                if !(p.is_finite() && p >= 0.0) {
                    return Err(Error::parse(line, format!("`{label}` must be nonnegative, got {p}")));
                }
            }
        }
        rows.push((line, Row { env, power }));
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let first = field_pattern(&rows[0].1);
    for (line, row) in &rows {
        let pattern = field_pattern(row);
        for (k, name) in ["rho_kgm3", "p_mean_kw", "p_sd_kw"].iter().enumerate() {
            if pattern[k] != first[k] {
                return Err(Error::parse(
                    *line,
                    format!("`{name}` must be filled on every row or on none"),
                ));
            }
        }
    }
    if !first[0] {
        for (line, row) in rows.iter_mut() {
            row.env = row
                .env
                .with_density(&consts)
                .map_err(|e| Error::parse(*line, e.to_string()))?;
        }
    }
    Dataset::new(rows.into_iter().map(|(_, r)| r).collect(), provenance)
}

fn csv_error(err: csv::Error, line: usize) -> Error {
    Error::parse(line, err.to_string())
}

pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    write_dataset(ds, &mut out).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_dataset<W: Write>(ds: &Dataset, out: W) -> Result<()> {
    write_dataset_with(ds, out, None)
}

/// Writes the dataset CSV, optionally appending an extra named column.
pub fn write_dataset_with<W: Write>(
    ds: &Dataset,
    out: W,
    extra: Option<(&str, &[f64])>,
) -> Result<()> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some((_, values)) = extra {
        if values.len() != ds.len() {
            return Err(Error::LengthMismatch(values.len(), ds.len()));
        }
    }
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let mut header: Vec<&str> = CSV_HEADER.to_vec();
    if let Some((name, _)) = extra {
        header.push(name);
    }
    wtr.write_record(&header).map_err(write_error)?;
    let fmt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
    for (i, row) in ds.rows().iter().enumerate() {
        let e = &row.env;
        let mut fields = vec![
            e.v.to_string(),
            e.yaw.to_string(),
            e.wave_h.to_string(),
            e.wave_dir.to_string(),
            e.temp.to_string(),
            e.pressure.to_string(),
            (e.rh * 100.0).to_string(),
            fmt(e.rho),
            fmt(row.power.p_mean),
            fmt(row.power.p_sd),
        ];
        if let Some((_, values)) = extra {
            fields.push(values[i].to_string());
        }
        wtr.write_record(&fields).map_err(write_error)?;
    }
    wtr.flush().map_err(|e| Error::io("<dataset>", e))
}

fn write_error(err: csv::Error) -> Error {
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::io("<dataset>", e),
        other => Error::InvalidArgument(format!("{other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = "v_mps,yaw_deg,wave_h_m,wave_dir_deg,temp_c,pressure_pa,rh_pct,rho_kgm3,p_mean_kw,p_sd_kw\n\
        5,0,1,10,15,101325,50,1.22,1500,20\n\
        8,5,2,20,10,100000,80,1.23,5000,40\n\
        12,10,3,30,5,99000,20,1.24,15000,60\n";

    fn sample(v: f64) -> EnvSample {
        EnvSample {
            v,
            yaw: 3.0,
            wave_h: 1.5,
            wave_dir: 45.0,
            temp: 12.0,
            pressure: 101000.0,
            rh: 0.4,
            rho: Some(1.2),
        }
    }

    #[test]
    fn parses_full_csv() {
        let ds = read_dataset(FULL.as_bytes(), "mem").unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.provenance(), "mem");
        assert_eq!(ds.rows()[1].env.rh, 0.8);
        assert_eq!(ds.rows()[2].power.p_mean, Some(15000.0));
        assert_eq!(ds.rows()[0].env.rho, Some(1.22));
    }

    #[test]
    fn recomputes_missing_density() {
        let csv = "v_mps,yaw_deg,wave_h_m,wave_dir_deg,temp_c,pressure_pa,rh_pct,p_mean_kw\n\
                   5,0,1,10,15,101325,0,100\n";
        let ds = read_dataset(csv.as_bytes(), "mem").unwrap();
        let rho = ds.rows()[0].env.rho.unwrap();
        // dry air: 101325 / (287.05 * 288.3)
        assert!((rho - 1.224_375).abs() < 1e-5, "{rho}");
        assert_eq!(ds.rows()[0].power.p_sd, None);
    }

    #[test]
    fn header_only_is_empty() {
        let csv = CSV_HEADER.join(",") + "\n";
        assert!(matches!(read_dataset(csv.as_bytes(), "mem"), Err(Error::EmptyDataset)));
    }

    #[test]
    fn missing_column_is_named() {
        let csv = "v_mps,yaw_deg,wave_h_m,wave_dir_deg,temp_c,rh_pct\n1,2,3,4,5,6\n";
        match read_dataset(csv.as_bytes(), "mem") {
            Err(Error::MissingColumn(c)) => assert_eq!(c, "pressure_pa"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_number_names_line() {
        let csv = FULL.replace("8,5,2", "8,x,2");
        match read_dataset(csv.as_bytes(), "mem") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mixed_empty_cells_rejected() {
        let csv = FULL.replace(",1500,20", ",1500,");
        assert!(matches!(read_dataset(csv.as_bytes(), "mem"), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn out_of_box_angles_are_flagged_not_rejected() {
        let csv = FULL.replace("8,5,2,20", "8,45,2,200");
        let ds = read_dataset(csv.as_bytes(), "mem").unwrap();
        assert_eq!(ds.flagged_rows(), vec![1]);
    }

    #[test]
    fn round_trip_single_row() {
        let ds = Dataset::new(
            vec![Row {
                env: sample(7.3),
                power: PowerRecord::new(4321.125, 12.5),
            }],
            "x",
        )
        .unwrap();
        let mut buf = Vec::new();
        write_dataset(&ds, &mut buf).unwrap();
        let back = read_dataset(buf.as_slice(), "x").unwrap();
        assert_eq!(back.rows()[0].power, ds.rows()[0].power);
        assert!((back.rows()[0].env.rh - 0.4).abs() < 1e-15);
        assert!(buf.ends_with(b"\n") && !buf.contains(&b'\r'));
    }

    #[test]
    fn design_rows_leave_power_empty() {
        let ds = Dataset::from_samples(vec![sample(1.0), sample(2.0)], "design").unwrap();
        let mut buf = Vec::new();
        write_dataset(&ds, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(1).unwrap().ends_with("1.2,,"));
        let back = read_dataset(text.as_bytes(), "d").unwrap();
        assert!(matches!(back.targets(Target::Mean), Err(Error::MissingColumn(_))));
    }

    #[test]
    fn save_to_unwritable_path_is_io_error() {
        let ds = Dataset::from_samples(vec![sample(1.0)], "d").unwrap();
        let err = save_dataset(&ds, "/nonexistent-dir/x/out.csv").unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn select_projects_in_order() {
        let ds = read_dataset(FULL.as_bytes(), "mem").unwrap();
        let m = select_inputs(&ds, &["v"]).unwrap();
        assert_eq!((m.nrows(), m.ncols()), (3, 1));
        assert_eq!(m.values[(1, 0)], 8.0);
        let m = select_inputs(&ds, &["v", "yaw", "rho"]).unwrap();
        assert_eq!(m.names, vec![Variable::V, Variable::Yaw, Variable::Rho]);
        assert_eq!(m.values[(2, 1)], 10.0);
        assert_eq!(m.values[(2, 2)], 1.24);
    }

    #[test]
    fn select_rejects_bad_names() {
        let ds = read_dataset(FULL.as_bytes(), "mem").unwrap();
        assert!(matches!(select_inputs(&ds, &["v", "v"]), Err(Error::DuplicateVariable(_))));
        assert!(matches!(select_inputs(&ds, &["speed"]), Err(Error::UnknownVariable(_))));
    }

    #[test]
    fn parse_list() {
        assert_eq!(
            Variable::parse_list("v, yaw,rho").unwrap(),
            vec![Variable::V, Variable::Yaw, Variable::Rho]
        );
    }
}
