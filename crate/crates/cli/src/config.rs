//! Scenario files (TOML) and their validation.
//!
//! ```toml
//! [source]
//! eta = 0.001            # heralded single-photon mean; or
//! # mean_photons = 0.02  # per point eta = m/(1+r), |alpha|^2 = m r/(1+r)
//!
//! [sweep]
//! r = [0.5, 1.0]
//! k = [0.0, 0.86]        # or tau_fs = [...] together with [delay_model]
//!
//! [delay_model]
//! k_peak = 0.86
//! tau0_fs = 425.1
//! center_fs = 0.0
//!
//! [run]
//! methods = ["analytic", "oracle"]
//! pulses = 10000000
//! seed = 2026
//! n_max = 6
//!
//! [detectors]
//! efficiency_b1 = 1.0
//! efficiency_b2 = 1.0
//!
//! [output]
//! format = "csv"
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use g2mix::analytic::DelayModel;
use g2mix::fock::DEFAULT_N_MAX;
use g2mix::hbt::DetectorConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_SEED: u64 = 2026;
pub const DEFAULT_PULSES: u64 = 10_000_000;
pub const DEFAULT_ETA: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Analytic,
    Oracle,
    MonteCarlo,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Analytic => "analytic",
            Method::Oracle => "oracle",
            Method::MonteCarlo => "montecarlo",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "analytic" => Ok(Method::Analytic),
            "oracle" => Ok(Method::Oracle),
            "montecarlo" | "mc" => Ok(Method::MonteCarlo),
            other => Err(format!("unknown method `{other}` (expected analytic, oracle or montecarlo)")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_photons: Option<f64>,
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig {
            eta: Some(DEFAULT_ETA),
            mean_photons: None,
        }
    }
}

impl SourceConfig {
    /// `(eta, |alpha|^2)` for mixing ratio `r`.
    pub fn at_ratio(&self, r: f64) -> (f64, f64) {
        match (self.eta, self.mean_photons) {
            (_, Some(m)) => (m / (1.0 + r), m * r / (1.0 + r)),
            (Some(eta), None) => (eta, r * eta),
            (None, None) => (DEFAULT_ETA, r * DEFAULT_ETA),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub r: Vec<f64>,
    #[serde(default)]
    pub k: Vec<f64>,
    #[serde(default)]
    pub tau_fs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayModelConfig {
    pub k_peak: f64,
    pub tau0_fs: f64,
    #[serde(default)]
    pub center_fs: f64,
}

impl DelayModelConfig {
    pub fn model(&self) -> Result<DelayModel, CliError> {
        Ok(DelayModel::with_center(self.k_peak, self.tau0_fs, self.center_fs)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_pulses")]
    pub pulses: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
}

fn default_methods() -> Vec<Method> {
    vec![Method::Analytic]
}

fn default_pulses() -> u64 {
    DEFAULT_PULSES
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_n_max() -> usize {
    DEFAULT_N_MAX
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            methods: default_methods(),
            pulses: DEFAULT_PULSES,
            seed: DEFAULT_SEED,
            n_max: DEFAULT_N_MAX,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub format: Format,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub source: SourceConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay_model: Option<DelayModelConfig>,
    #[serde(default)]
    pub run: RunSettings,
    #[serde(default)]
    pub detectors: DetectorConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Command-line values that replace the file's.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub pulses: Option<u64>,
    pub n_max: Option<usize>,
    pub methods: Option<Vec<Method>>,
    pub format: Option<Format>,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config is always representable")
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.run.seed = seed;
        }
        if let Some(pulses) = overrides.pulses {
            self.run.pulses = pulses;
        }
        if let Some(n_max) = overrides.n_max {
            self.run.n_max = n_max;
        }
        if let Some(methods) = &overrides.methods {
            self.run.methods = methods.clone();
        }
        if let Some(format) = overrides.format {
            self.output.format = format;
        }
    }

    /// Checks that do not depend on the subcommand.
    pub fn validate(&self) -> Result<(), CliError> {
        let field = |name: &str, msg: String| Err(CliError::Config(format!("{name}: {msg}")));
        match (self.source.eta, self.source.mean_photons) {
            (Some(_), Some(_)) => return field("source", "set either eta or mean_photons, not both".into()),
            (Some(eta), None) if !(0.0..=1.0).contains(&eta) => {
                return field("source.eta", format!("must lie in [0, 1], got {eta}"))
            }
            (None, Some(m)) if !(m > 0.0 && m.is_finite()) => {
                return field("source.mean_photons", format!("must be positive, got {m}"))
            }
            _ => {}
        }
        if self.run.methods.is_empty() {
            return field("run.methods", "at least one method is required".into());
        }
        if let Some(r) = self.sweep.r.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
            return field("sweep.r", format!("ratios must be finite and >= 0, got {r}"));
        }
        if let Some(k) = self.sweep.k.iter().find(|k| !(0.0..=1.0).contains(*k)) {
            return field("sweep.k", format!("values must lie in [0, 1], got {k}"));
        }
        if let Some(t) = self.sweep.tau_fs.iter().find(|t| !t.is_finite()) {
            return field("sweep.tau_fs", format!("delays must be finite, got {t}"));
        }
        if self.run.pulses == 0 {
            return field("run.pulses", "must be at least 1".into());
        }
        if let Some(dm) = &self.delay_model {
            dm.model().map_err(|e| CliError::Config(format!("delay_model: {e}")))?;
        }
        self.detectors
            .validate()
            .map_err(|e| CliError::Config(format!("detectors: {e}")))?;
        Ok(())
    }
}
