//! Pipeline stages. Each stage adds its files to the staging area and its
//! row accounting to the run counts; nothing touches disk until the command
//! commits.

use crate::config::RunConfig;
use crate::output::{file_digest, stamp_csv, InputDigest, RunManifest, Staged};
use anyhow::{anyhow, bail, Context, Result};
use drivevol::ingest::{
    impute_means, join_dataset, parse_cycles, parse_persons, parse_trips, parse_vehicles, AnalysisRow,
};
use drivevol::model::{
    build_design, fit_ols, quantile_profile, DesignMatrix, FitResult, ModelSpec, QuantileProfile, SolverConfig,
};
use drivevol::report::{self, Format, Metadata, RenderOptions};
use drivevol::stats::{self, Binning, StatsError};
use drivevol::synth::{gen_dataset, published_ols_coefficients, DatasetParams, NoiseModel};
use drivevol::volatility::{exclusions_csv, trip_volatilities, volatility_csv};
use serde_json::{Map, Value};
use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Volatility,
    Describe,
    Fit,
    Profile,
    Synth,
    Pipeline,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Volatility => "volatility",
            Command::Describe => "describe",
            Command::Fit => "fit",
            Command::Profile => "profile",
            Command::Synth => "synth",
            Command::Pipeline => "pipeline",
        }
    }
}

/// Timestamp for the metadata line; honours `SOURCE_DATE_EPOCH`.
fn generated_at() -> String {
    let now = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse::<i64>().ok())
        .and_then(|s| chrono::DateTime::from_timestamp(s, 0))
        .unwrap_or_else(chrono::Utc::now);
    now.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

struct Run<'a> {
    config: &'a RunConfig,
    opts: RenderOptions,
    metadata: Metadata,
    staged: Staged,
    counts: Map<String, Value>,
}

impl Run<'_> {
    fn table_format(&self) -> Format {
        self.config.output.format
    }

    /// Long-format data exports are CSV unless JSON was asked for.
    fn data_format(&self) -> Format {
        match self.config.output.format {
            Format::Json => Format::Json,
            _ => Format::Csv,
        }
    }

    fn stage_csv(&mut self, name: &str, body: &str) {
        let text = stamp_csv(body, &self.metadata);
        self.staged.add(name, text);
    }

    fn count(&mut self, key: &str, value: impl Into<Value>) {
        self.counts.insert(key.to_owned(), value.into());
    }

    fn warn(&self, msg: &str) {
        eprintln!("warning: {msg}");
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).with_context(|| format!("opening {}", path.display()))
}

fn require<'p>(path: &'p Option<std::path::PathBuf>, what: &str, flag: &str) -> Result<&'p Path> {
    path.as_deref()
        .ok_or_else(|| anyhow!("no {what} input; set inputs.{what} in the config or pass --{flag}"))
}

fn volatility_stage(run: &mut Run) -> Result<BTreeMap<String, f64>> {
    let cfg = run.config;
    let path = require(&cfg.inputs.cycles, "cycles", "cycles")?;
    let parsed = parse_cycles(open(path)?, &cfg.schema.cycles)?;
    let (vols, excluded) =
        trip_volatilities(&parsed.cycles, &cfg.volatility.zero_speed, cfg.volatility.min_returns)?;

    run.count("cycle_rows_rejected", parsed.rejects.len());
    run.count("cycle_rows_invalid_speed", parsed.n_invalid_speed);
    run.count("cycle_rows_duplicate_time", parsed.n_duplicate_time);
    run.count("trips_measured", vols.len());
    run.count("trips_excluded", excluded.excluded.len());
    run.stage_csv("volatility.csv", &volatility_csv(&vols)?);
    run.stage_csv("exclusions.csv", &exclusions_csv(&excluded)?);
    run.stage_csv("rejects_cycles.csv", &parsed.rejects.to_csv()?);
    Ok(vols.into_iter().map(|(k, v)| (k, v.volatility_pct)).collect())
}

/// Reads `trip_id, volatility_pct` from a volatility CSV, skipping metadata.
pub fn read_volatility_csv(path: &Path) -> Result<BTreeMap<String, f64>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(open(path)?);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow!("{}: missing column `{name}`", path.display()))
    };
    let (i_trip, i_vol) = (col("trip_id")?, col("volatility_pct")?);
    let mut out = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let raw = record.get(i_vol).unwrap_or("");
        let v: f64 = raw
            .parse()
            .map_err(|_| anyhow!("{}:{line}: bad volatility `{raw}`", path.display()))?;
        if !v.is_finite() || v < 0.0 {
            bail!("{}:{line}: volatility {v} must be finite and >= 0", path.display());
        }
        if out.insert(record.get(i_trip).unwrap_or("").to_owned(), v).is_some() {
            bail!("{}:{line}: duplicate trip id", path.display());
        }
    }
    Ok(out)
}

fn load_volatility(run: &mut Run) -> Result<BTreeMap<String, f64>> {
    match &run.config.inputs.volatility {
        Some(path) => read_volatility_csv(path),
        None => volatility_stage(run),
    }
}

fn ingest_stage(run: &mut Run, vols: &BTreeMap<String, f64>) -> Result<Vec<AnalysisRow>> {
    let cfg = run.config;
    let (trips, tr) = parse_trips(open(require(&cfg.inputs.trips, "trips", "trips")?)?, &cfg.schema.trips)?;
    let (vehicles, vr) = parse_vehicles(
        open(require(&cfg.inputs.vehicles, "vehicles", "vehicles")?)?,
        &cfg.schema.vehicles,
    )?;
    let (persons, pr) = parse_persons(
        open(require(&cfg.inputs.persons, "persons", "persons")?)?,
        &cfg.schema.persons,
    )?;
    for (table, rejects) in [("trips", &tr), ("vehicles", &vr), ("persons", &pr)] {
        run.count(&format!("{table}_rows_rejected"), rejects.len());
        run.stage_csv(&format!("rejects_{table}.csv"), &rejects.to_csv()?);
    }

    let (rows, join) = join_dataset(vols, &trips, &vehicles, &persons);
    run.count("join", serde_json::to_value(&join)?);
    if rows.is_empty() {
        bail!("no trips survived the join ({} unmatched)", join.total_unmatched());
    }
    let (rows, imputed) = impute_means(&rows)?;
    run.count("cells_imputed", imputed.total_imputed());
    run.count("imputation", serde_json::to_value(&imputed)?);
    run.count("analysis_rows", rows.len());
    Ok(rows)
}

/// VIF of each continuous regressor against the others. Perfect collinearity
/// prints as NA rather than aborting the report.
fn continuous_vifs(rows: &[AnalysisRow], spec: &ModelSpec) -> Result<Vec<(String, f64)>> {
    let continuous_only = ModelSpec {
        categorical: vec![],
        ..spec.clone()
    };
    if continuous_only.continuous.len() < 2 {
        return Ok(vec![]);
    }
    let d = build_design(rows, &continuous_only)?;
    (1..d.n_cols())
        .map(|j| {
            let v = match stats::vif(&d, j) {
                Ok(v) => v,
                Err(StatsError::InfiniteVif(_)) => f64::INFINITY,
                Err(StatsError::ConstantColumn(_)) => f64::NAN,
                Err(e) => return Err(e.into()),
            };
            Ok((d.column_names[j].clone(), v))
        })
        .collect()
}

fn describe_stage(run: &mut Run, rows: &[AnalysisRow]) -> Result<()> {
    let (tf, df) = (run.table_format(), run.data_format());
    let table = stats::describe_table(rows)?;
    let text = report::render_descriptive(&table, tf, &run.opts)?;
    run.staged.add(format!("descriptive.{}", tf.extension()), text);

    let vols: Vec<f64> = rows.iter().map(|r| r.volatility_pct).collect();
    let hist = stats::histogram(&vols, Binning::FreedmanDiaconis)?;
    let text = report::export_histogram(&hist, df, &run.opts)?;
    run.staged.add(format!("histogram.{}", df.extension()), text);

    let vifs = continuous_vifs(rows, &run.config.model)?;
    if !vifs.is_empty() {
        let text = report::render_vif(&vifs, tf, &run.opts)?;
        run.staged.add(format!("vif.{}", tf.extension()), text);
    }
    Ok(())
}

fn solve_profile(run: &Run, design: &DesignMatrix) -> Result<QuantileProfile> {
    let fit = &run.config.fit;
    Ok(quantile_profile(
        design,
        &run.config.model.quantiles,
        fit.bootstrap_reps,
        fit.seed,
        &SolverConfig::default(),
    )?)
}

fn report_warnings(run: &Run, fits: &[FitResult]) {
    for f in fits {
        for w in &f.warnings {
            run.warn(&format!("{}: {w}", report::model_header(f.kind)));
        }
    }
}

fn fit_stage(run: &mut Run, design: &DesignMatrix, profile: Option<&QuantileProfile>) -> Result<()> {
    let cfg = &run.config.fit;
    let mut fits = Vec::new();
    if cfg.ols {
        fits.push(match profile {
            Some(p) => p.ols.clone(),
            None => fit_ols(design)?,
        });
    }
    if cfg.quantile {
        let p = profile.ok_or_else(|| anyhow!("quantile fits need a profile"))?;
        fits.extend(p.fits.iter().cloned());
    }
    report_warnings(run, &fits);
    let tf = run.table_format();
    let table = report::render_coefficients(&fits, &run.config.model, tf, &run.opts)?;
    run.staged.add(format!("coefficients.{}", tf.extension()), table);
    let json = report::fits_json(&fits, &run.opts)?;
    run.staged.add("fits.json", json);
    Ok(())
}

fn profile_stage(run: &mut Run, profile: &QuantileProfile) -> Result<()> {
    let df = run.data_format();
    let text = report::export_profile(profile, df, &run.opts)?;
    run.staged.add(format!("profile.{}", df.extension()), text);
    Ok(())
}

fn synth_stage(run: &mut Run) -> Result<()> {
    let cfg = run.config;
    let s = &cfg.synth;
    if cfg.model != ModelSpec::volatility_model() {
        bail!("synth generates data for the default volatility model only; remove the [model] section");
    }
    let params = DatasetParams {
        n_trips: s.n_trips,
        trips_per_vehicle: s.trips_per_vehicle,
        coefficients: published_ols_coefficients(),
        noise: if s.noise_sd > 0.0 {
            NoiseModel::Gaussian { sd: s.noise_sd }
        } else {
            NoiseModel::None
        },
        dwell_stops: s.dwell_stops,
        ..DatasetParams::volatility_default(s.n_trips, s.seed)
    };
    let ds = gen_dataset(&params)?;
    run.count("trips", ds.trips.len());
    run.count("vehicles", ds.vehicles.len());
    run.count("persons", ds.persons.len());
    for (name, contents) in ds.files()? {
        run.staged.add(name, contents);
    }
    Ok(())
}

/// Runs `command` under `config` and returns the names of the files written.
pub fn execute(command: Command, config: &RunConfig) -> Result<Vec<String>> {
    let config_hash = config.hash()?;
    let version = env!("CARGO_PKG_VERSION");
    let metadata = Metadata {
        version: version.to_owned(),
        config_hash: config_hash.clone(),
        generated: generated_at(),
    };
    let mut run = Run {
        config,
        opts: RenderOptions {
            decimals: config.output.decimals,
            metadata: Some(metadata.clone()),
            ..RenderOptions::default()
        },
        metadata: metadata.clone(),
        staged: Staged::default(),
        counts: Map::new(),
    };

    match command {
        Command::Volatility => {
            volatility_stage(&mut run)?;
        }
        Command::Synth => synth_stage(&mut run)?,
        Command::Describe | Command::Fit | Command::Profile | Command::Pipeline => {
            let vols = if command == Command::Pipeline {
                volatility_stage(&mut run)?
            } else {
                load_volatility(&mut run)?
            };
            let rows = ingest_stage(&mut run, &vols)?;
            if matches!(command, Command::Describe | Command::Pipeline) {
                describe_stage(&mut run, &rows)?;
            }
            if command != Command::Describe {
                let design = build_design(&rows, &config.model)?;
                let needs_profile = command != Command::Fit || config.fit.quantile;
                let profile = needs_profile.then(|| solve_profile(&run, &design)).transpose()?;
                if command != Command::Profile {
                    fit_stage(&mut run, &design, profile.as_ref())?;
                }
                if let (Some(p), true) = (&profile, command != Command::Fit) {
                    profile_stage(&mut run, p)?;
                }
            }
        }
    }

    config.check_outputs(&run.staged.names())?;
    let used: &[&str] = match command {
        Command::Synth => &[],
        Command::Volatility => &["cycles"],
        Command::Pipeline => &["cycles", "trips", "vehicles", "persons"],
        _ if config.inputs.volatility.is_some() => &["volatility", "trips", "vehicles", "persons"],
        _ => &["cycles", "trips", "vehicles", "persons"],
    };
    let inputs = config
        .input_paths()
        .into_iter()
        .filter(|(role, _)| used.contains(role))
        .map(|(role, p)| {
            Ok(InputDigest {
                role: role.to_owned(),
                path: p.display().to_string(),
                sha256: file_digest(p)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = RunManifest {
        command: command.name(),
        version,
        config_hash: &config_hash,
        inputs,
        outputs: vec![],
        counts: run.counts,
    };
    run.staged.commit(&config.output.dir, manifest, &metadata)
}
