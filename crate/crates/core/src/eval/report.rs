use std::io::{Read, Write};

use crate::data::Target;
use crate::error::{Error, Result};

pub const REPORT_HEADER: [&str; 7] = ["model", "inputs", "target", "fold", "mae_kw", "rmse_kw", "nrmse_pct"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldErrors {
    pub mae: f64,
    pub rmse: f64,
    /// Percent of `reference`.
    pub nrmse: f64,
    /// Reference value of the NRMSE; not stored in report files.
    pub reference: Option<f64>,
}

/// Cross-validation errors of one model on one target.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub model: String,
    pub inputs: Vec<String>,
    pub target: Target,
    pub folds: Vec<FoldErrors>,
}

fn average(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    sum / n as f64
}

impl EvalReport {
    pub fn mean_mae(&self) -> f64 {
        average(self.folds.iter().map(|f| f.mae))
    }

    pub fn mean_rmse(&self) -> f64 {
        average(self.folds.iter().map(|f| f.rmse))
    }

    pub fn mean_nrmse(&self) -> f64 {
        average(self.folds.iter().map(|f| f.nrmse))
    }

    fn inputs_field(&self) -> String {
        self.inputs.join("+")
    }
}

/// One row per fold followed by a `mean` row per report.
pub fn write_reports<W: Write>(reports: &[EvalReport], out: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let err = |e: csv::Error| Error::InvalidArgument(e.to_string());
    wtr.write_record(REPORT_HEADER).map_err(err)?;
    for r in reports {
        let mut row = |fold: String, mae: f64, rmse: f64, nrmse: f64| {
            wtr.write_record([
                r.model.clone(),
                r.inputs_field(),
                r.target.name().to_string(),
                fold,
                mae.to_string(),
                rmse.to_string(),
                nrmse.to_string(),
            ])
        };
        for (i, f) in r.folds.iter().enumerate() {
            row((i + 1).to_string(), f.mae, f.rmse, f.nrmse).map_err(err)?;
        }
        row("mean".into(), r.mean_mae(), r.mean_rmse(), r.mean_nrmse()).map_err(err)?;
    }
    wtr.flush().map_err(|e| Error::io("<report>", e))
}

/// Reads reports written by [`write_reports`]. Per-model `mean` rows are
/// checked against the fold rows and otherwise dropped.
pub fn read_reports<R: Read>(input: R) -> Result<Vec<EvalReport>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = rdr.headers().map_err(|e| Error::parse(1, e.to_string()))?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let idx: Vec<usize> = REPORT_HEADER.iter().map(|n| col(n)).collect::<Result<_>>()?;
    let mut reports: Vec<EvalReport> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::parse(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let get = |k: usize| rec.get(idx[k]).unwrap_or("");
        let num = |k: usize| -> Result<f64> {
            get(k)
                .parse()
                .map_err(|_| Error::parse(line, format!("bad {} `{}`", REPORT_HEADER[k], get(k))))
        };
        let (model, inputs) = (get(0).to_string(), get(1));
        let target: Target = get(2).parse().map_err(|e: Error| Error::parse(line, e.to_string()))?;
        let errors = FoldErrors {
            mae: num(4)?,
            rmse: num(5)?,
            nrmse: num(6)?,
            reference: None,
        };
        let same = |r: &EvalReport| r.model == model && r.inputs_field() == inputs && r.target == target;
        if get(3) == "mean" {
            let Some(r) = reports.iter().rev().find(|r| same(r)) else {
                return Err(Error::parse(line, "mean row without fold rows"));
            };
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-300);
            if !(close(r.mean_mae(), errors.mae) && close(r.mean_rmse(), errors.rmse) && close(r.mean_nrmse(), errors.nrmse)) {
                return Err(Error::parse(line, "mean row disagrees with its folds"));
            }
            continue;
        }
        let fold: usize = get(3)
            .parse()
            .map_err(|_| Error::parse(line, format!("bad fold `{}`", get(3))))?;
        match reports.last_mut() {
            Some(r) if same(r) && r.folds.len() + 1 == fold => r.folds.push(errors),
            _ if fold == 1 => reports.push(EvalReport {
                model,
                inputs: if inputs.is_empty() { Vec::new() } else { inputs.split('+').map(String::from).collect() },
                target,
                folds: vec![errors],
            }),
            _ => return Err(Error::parse(line, format!("fold {fold} out of sequence"))),
        }
    }
    if reports.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(reports)
}

/// Aligned table of fold-averaged errors, one line per report.
pub fn format_table(reports: &[EvalReport]) -> String {
    let model_w = reports.iter().map(|r| r.model.len()).max().unwrap_or(0).max(5);
    let input_w = reports.iter().map(|r| r.inputs_field().len()).max().unwrap_or(0).max(6);
    let mut out = format!(
        "{:<model_w$}  {:<input_w$}  {:<6}  {:>5}  {:>10}  {:>10}  {:>9}\n",
        "model", "inputs", "target", "folds", "MAE_kW", "RMSE_kW", "NRMSE_%"
    );
    for r in reports {
        out += &format!(
            "{:<model_w$}  {:<input_w$}  {:<6}  {:>5}  {:>10.2}  {:>10.2}  {:>9.2}\n",
            r.model,
            r.inputs_field(),
            r.target.name(),
            r.folds.len(),
            r.mean_mae(),
            r.mean_rmse(),
            r.mean_nrmse()
        );
    }
    out
}
