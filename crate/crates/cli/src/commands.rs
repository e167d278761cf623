use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use powercurve::atmosphere::field::{
    align_buoy_series, read_directions, read_fast_records, read_wave_records, yaw_proxy_series,
};
use powercurve::atmosphere::AtmosphereConstants;
use powercurve::data::{load_dataset, save_dataset, write_dataset_with};
use powercurve::design::{sobol_design, VariableRanges};
use powercurve::eval::{
    format_table, kfold, ratio_curve, read_reports, significance_thresholds, write_reports, CvOptions,
    ModelFamily, ModelRecipe, TrainedModel,
};
use powercurve::gp::GpModel;
use powercurve::oracle::simulate;
use powercurve::seed::derive_seed;
use powercurve::{Dataset, Error, OracleConfig, Result, Target, TurbineSpec, Variable};

use crate::saved::SavedModel;
use crate::{usage, Cli, Command, RecipeArgs};

pub fn run(cli: &Cli) -> Result<()> {
    let ctx = Context { cli };
    match &cli.command {
        Command::Design { n, ranges } => ctx.design(*n, ranges.as_deref()),
        Command::Simulate {
            design,
            noise_mean_kw,
            noise_sd_frac,
            turbine,
        } => ctx.simulate(design, *noise_mean_kw, *noise_sd_frac, turbine.as_deref()),
        Command::Fit { data, recipe } => ctx.fit(data, recipe),
        Command::Predict { model, data } => ctx.predict(model, data),
        Command::Crossval {
            data,
            recipe,
            k,
            contiguous,
        } => ctx.crossval(data, recipe, *k, *contiguous),
        Command::Relevance { model } => ctx.relevance(model),
        Command::Sensitivity {
            rho_min,
            rho_max,
            yaw_max,
            yaw_step,
        } => ctx.sensitivity(*rho_min, *rho_max, *yaw_max, *yaw_step),
        Command::Report { reports } => ctx.report(reports),
        Command::Align {
            fast,
            wave,
            directions,
            window,
        } => ctx.align(fast, wave, directions, *window),
    }
}

struct Context<'a> {
    cli: &'a Cli,
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

impl Context<'_> {
    fn say(&self, text: impl AsRef<str>) {
        if !self.cli.quiet {
            println!("{}", text.as_ref());
        }
    }

    /// The `--out` path, checked before any work is done.
    fn out(&self) -> Result<&Path> {
        let path = self
            .cli
            .out
            .as_deref()
            .ok_or_else(|| usage("this command needs --out"))?;
        self.check_out(path)?;
        Ok(path)
    }

    fn check_out(&self, path: &Path) -> Result<()> {
        match path.parent() {
            Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => Err(Error::io(
                path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "output directory does not exist"),
            )),
            _ => Ok(()),
        }
    }

    fn design(&self, n: usize, ranges: Option<&Path>) -> Result<()> {
        if n == 0 {
            return Err(usage("--n must be at least 1"));
        }
        let out = self.out()?;
        let ranges = match ranges {
            Some(p) => VariableRanges::load(p)?,
            None => VariableRanges::default(),
        };
        let samples = sobol_design(n, &ranges, &AtmosphereConstants::default())?;
        let ds = Dataset::from_samples(samples, "sobol design")?;
        save_dataset(&ds, out)?;
        self.say(format!("wrote {n} design points to {}", out.display()));
        self.say(format!("{:<10} {:>14} {:>14}", "variable", "min", "max"));
        for var in Variable::ALL {
            let values: Vec<f64> = ds.samples().filter_map(|s| s.get(var)).collect();
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let scale = if var == Variable::Rh { 100.0 } else { 1.0 };
            self.say(format!("{:<10} {:>14.4} {:>14.4}", var.name(), lo * scale, hi * scale));
        }
        Ok(())
    }

    fn simulate(&self, design: &Path, noise_mean: f64, noise_sd_frac: f64, turbine: Option<&Path>) -> Result<()> {
        let out = self.out()?;
        let spec = match turbine {
            Some(p) => read_json::<TurbineSpec>(p)?,
            None => TurbineSpec::default(),
        };
        let ds = load_dataset(design)?;
        let samples: Vec<_> = ds.samples().copied().collect();
        let cfg = OracleConfig {
            spec,
            noise_sd_mean: noise_mean,
            noise_sd_frac,
            seed: derive_seed(self.cli.seed, "oracle"),
            ..OracleConfig::default()
        };
        let sim = simulate(&samples, &cfg)?;
        save_dataset(&sim, out)?;
        self.say(format!(
            "turbine: rated {} kW, rotor {} m, cut-in {} m/s, rated {} m/s, cut-out {} m/s, cp {}",
            spec.rated_power, spec.rotor_diameter, spec.cut_in, spec.rated_speed, spec.cut_out, spec.cp
        ));
        self.say(format!("wrote {} rows to {}", sim.len(), out.display()));
        Ok(())
    }

    fn recipe(&self, args: &RecipeArgs) -> Result<ModelRecipe> {
        let family: ModelFamily = args.model.parse()?;
        let target: Target = args.target.parse()?;
        let inputs = Variable::parse_list(&args.inputs)?;
        let mut recipe = ModelRecipe::new(family, &inputs, target)?;
        if !(args.bin_width > 0.0) {
            return Err(usage(format!("--bin-width {} must be positive", args.bin_width)));
        }
        recipe.bin_width = args.bin_width;
        recipe.gp.max_iter = args.max_iter;
        recipe.gp.restarts = args.restarts;
        recipe.gp.step_rule = args.step_rule.into();
        recipe.gp.noise_var = args.noise_var;
        recipe.gp.linear_mean = args.linear_mean;
        recipe.gp.seed = derive_seed(self.cli.seed, "gp");
        Ok(recipe)
    }

    fn fit(&self, data: &Path, args: &RecipeArgs) -> Result<()> {
        let recipe = self.recipe(args)?;
        let out = self.out()?;
        let ds = load_dataset(data)?;
        let model = recipe.train(&ds)?;
        match &model {
            TrainedModel::Gp(m) => {
                self.say(format!("{}: nll {:.6} after {} iterations", recipe.name, m.meta.nll, m.meta.iterations));
                self.say(format!(
                    "signal_var {} noise_var {} length_scales {:?}",
                    m.hyper.signal_var, m.hyper.noise_var, m.hyper.length_scales
                ));
            }
            TrainedModel::Binned(c) => self.say(format!("{}: {} populated bins", recipe.name, c.bins.len())),
            TrainedModel::FracPoly(f, _) => self.say(format!(
                "{}: {:?} from {} rows, converged {}",
                recipe.name,
                f.coeffs.to_array(),
                f.rows_used,
                f.converged
            )),
        }
        SavedModel::new(model, recipe.target).save(out)?;
        self.say(format!("wrote model to {}", out.display()));
        Ok(())
    }

    fn predict(&self, model: &Path, data: &Path) -> Result<()> {
        let out = self.out()?;
        let model = SavedModel::load(model)?;
        let ds = load_dataset(data)?;
        let pred = model.predict(&ds)?;
        let w = create(out)?;
        let mut w = w;
        write_dataset_with(&ds, &mut w, Some(("pred_kw", &pred)))?;
        finish(w, out)?;
        self.say(format!("wrote {} predictions ({}) to {}", pred.len(), model.target, out.display()));
        Ok(())
    }

    fn crossval(&self, data: &Path, args: &RecipeArgs, k: usize, contiguous: bool) -> Result<()> {
        let recipe = self.recipe(args)?;
        if let Some(p) = &self.cli.out {
            self.check_out(p)?;
        }
        let ds = load_dataset(data)?;
        let opts = CvOptions {
            k,
            seed: self.cli.seed,
            shuffle: !contiguous,
        };
        let report = kfold(&ds, &recipe, &opts)?;
        self.say(format!("{:>4}  {:>12}  {:>12}  {:>9}", "fold", "MAE_kW", "RMSE_kW", "NRMSE_%"));
        for (i, f) in report.folds.iter().enumerate() {
            self.say(format!("{:>4}  {:>12.3}  {:>12.3}  {:>9.3}", i + 1, f.mae, f.rmse, f.nrmse));
        }
        self.say(format!(
            "{:>4}  {:>12.3}  {:>12.3}  {:>9.3}",
            "mean",
            report.mean_mae(),
            report.mean_rmse(),
            report.mean_nrmse()
        ));
        if let Some(out) = &self.cli.out {
            let mut w = create(out)?;
            write_reports(std::slice::from_ref(&report), &mut w)?;
            finish(w, out)?;
        }
        Ok(())
    }

    fn relevance(&self, model: &Path) -> Result<()> {
        if let Some(p) = &self.cli.out {
            self.check_out(p)?;
        }
        let m = GpModel::load(model)?;
        let report = m.relevance();
        self.say(report.to_text().trim_end());
        if let Some(out) = &self.cli.out {
            let mut w = create(out)?;
            let io = |e| Error::io(out, e);
            writeln!(w, "input,inv_length,share_pct").map_err(io)?;
            for e in &report.entries {
                writeln!(w, "{},{},{}", e.name, e.inv_length, e.share).map_err(io)?;
            }
            finish(w, out)?;
        }
        Ok(())
    }

    fn sensitivity(&self, rho_min: f64, rho_max: f64, yaw_max: f64, yaw_step: f64) -> Result<()> {
        let t = significance_thresholds(rho_min, rho_max)?;
        let curve = ratio_curve(&t, yaw_max, yaw_step)?;
        self.say(format!("theta1_deg {:.4}", t.theta1));
        self.say(format!("theta2_deg {:.4}", t.theta2));
        let mut csv = String::from("yaw_deg,ratio_rho_min,ratio_rho_max\n");
        for (yaw, lo, hi) in curve {
            csv += &format!("{yaw},{lo},{hi}\n");
        }
        match &self.cli.out {
            Some(out) => {
                self.check_out(out)?;
                std::fs::write(out, csv).map_err(|e| Error::io(out, e))
            }
            None => {
                print!("{csv}");
                Ok(())
            }
        }
    }

    fn report(&self, paths: &[PathBuf]) -> Result<()> {
        if let Some(p) = &self.cli.out {
            self.check_out(p)?;
        }
        let mut all = Vec::new();
        for p in paths {
            all.extend(read_reports(open(p)?).map_err(|e| match e {
                Error::Parse { line, message } => Error::Parse {
                    line,
                    message: format!("{}: {message}", p.display()),
                },
                other => other,
            })?);
        }
        self.say(format_table(&all).trim_end());
        if let Some(out) = &self.cli.out {
            let mut w = create(out)?;
            write_reports(&all, &mut w)?;
            finish(w, out)?;
        }
        Ok(())
    }

    fn align(&self, fast: &Path, wave: &Path, directions: &Path, window: usize) -> Result<()> {
        let out = self.out()?;
        let fast = read_fast_records(open(fast)?)?;
        let wave = read_wave_records(open(wave)?)?;
        let dirs = read_directions(open(directions)?)?;
        let yaw = yaw_proxy_series(&dirs, window)?;
        let aligned = align_buoy_series(&fast, &wave, &yaw, &AtmosphereConstants::default())?;
        save_dataset(&aligned.dataset, out)?;
        self.say(format!(
            "wrote {} aligned rows to {} ({} dropped, {} outside design angles)",
            aligned.dataset.len(),
            out.display(),
            aligned.dropped,
            aligned.dataset.flagged_rows().len()
        ));
        Ok(())
    }
}
