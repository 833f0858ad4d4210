//! Run configuration. Precedence, lowest first: built-in defaults, the TOML
//! config file, command-line flags.

use anyhow::{bail, Context, Result};
use drivevol::ingest::SchemaMap;
use drivevol::model::ModelSpec;
use drivevol::report::Format;
use drivevol::volatility::ZeroSpeedPolicy;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    pub cycles: Option<PathBuf>,
    /// Per-trip volatility CSV from an earlier `volatility` run; used instead
    /// of `cycles` when set.
    pub volatility: Option<PathBuf>,
    pub trips: Option<PathBuf>,
    pub vehicles: Option<PathBuf>,
    pub persons: Option<PathBuf>,
}

/// Header overrides per input table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schemas {
    pub cycles: SchemaMap,
    pub trips: SchemaMap,
    pub vehicles: SchemaMap,
    pub persons: SchemaMap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VolatilityConfig {
    pub zero_speed: ZeroSpeedPolicy,
    pub min_returns: usize,
}

impl Default for VolatilityConfig {
    fn default() -> Self {
        Self {
            zero_speed: ZeroSpeedPolicy::default(),
            min_returns: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub ols: bool,
    pub quantile: bool,
    pub bootstrap_reps: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            ols: true,
            quantile: true,
            bootstrap_reps: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_trips: usize,
    pub trips_per_vehicle: usize,
    pub noise_sd: f64,
    pub dwell_stops: bool,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_trips: 200,
            trips_per_vehicle: 20,
            noise_sd: 2.8,
            dwell_stops: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Format of the rendered tables. Long-format exports are CSV unless
    /// this is `json`.
    pub format: Format,
    pub decimals: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            format: Format::Text,
            decimals: 3,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub inputs: Inputs,
    pub schema: Schemas,
    pub volatility: VolatilityConfig,
    pub model: ModelSpec,
    pub fit: FitConfig,
    pub synth: SynthConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml()?.as_bytes())))
    }

    /// Input paths that are set, by role.
    pub fn input_paths(&self) -> Vec<(&'static str, &Path)> {
        let i = &self.inputs;
        [
            ("cycles", &i.cycles),
            ("volatility", &i.volatility),
            ("trips", &i.trips),
            ("vehicles", &i.vehicles),
            ("persons", &i.persons),
        ]
        .into_iter()
        .filter_map(|(role, p)| p.as_deref().map(|p| (role, p)))
        .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.volatility.zero_speed.validate()?;
        if self.volatility.min_returns < 2 {
            bail!("min_returns must be at least 2, got {}", self.volatility.min_returns);
        }
        if !(self.fit.ols || self.fit.quantile) {
            bail!("fit.ols and fit.quantile are both off; nothing to fit");
        }
        Ok(())
    }

    /// Rejects any input that would be overwritten by one of `outputs`.
    pub fn check_outputs(&self, outputs: &[&str]) -> Result<()> {
        let out = std::path::absolute(&self.output.dir)?;
        for (role, p) in self.input_paths() {
            let p = std::path::absolute(p)?;
            if outputs.iter().any(|f| out.join(f) == p) {
                bail!("{role} input {} would be overwritten by an output", p.display());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&c.to_toml().unwrap()).unwrap(), c);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c = RunConfig::from_toml("[fit]\nseed = 9\n[output]\nformat = \"csv\"\n").unwrap();
        assert_eq!(c.fit.seed, 9);
        assert_eq!(c.fit.bootstrap_reps, 200);
        assert_eq!(c.output.format, Format::Csv);
        assert_eq!(c.model, ModelSpec::volatility_model());
    }

    #[test]
    fn customised_config_round_trips() {
        let mut c = RunConfig::default();
        c.inputs.cycles = Some("data/cycles.csv".into());
        c.schema.trips = SchemaMap::new().with("trip_id", "TRIPID");
        c.volatility.zero_speed.epsilon_mph = 0.25;
        c.model.quantiles = vec![0.2, 0.8];
        let back = RunConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash().unwrap(), c.hash().unwrap());
    }

    #[test]
    fn partial_zero_speed_table_keeps_default_epsilon() {
        let c = RunConfig::from_toml("[volatility]\nzero_speed = { mode = \"floor_epsilon\" }\n").unwrap();
        assert_eq!(c.volatility.zero_speed.mode, drivevol::volatility::ZeroSpeedMode::FloorEpsilon);
        assert_eq!(c.volatility.zero_speed.epsilon_mph, 0.1);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("[fit]\nsed = 1\n").is_err());
    }

    #[test]
    fn output_must_not_clobber_input() {
        let mut c = RunConfig::default();
        c.output.dir = "run".into();
        c.inputs.trips = Some("run/fits.json".into());
        assert!(c.check_outputs(&["fits.json"]).is_err());
        assert!(c.check_outputs(&["profile.csv"]).is_ok());
    }
}
