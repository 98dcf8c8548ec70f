//! Run configuration: a TOML file, overridden field by field by flags.
//!
//! Relative `--config` paths resolve against `$QCRA_CONFIG_DIR` when it is
//! set; relative code-table paths inside a config file resolve against the
//! file's own directory.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use qcra::channel::CapacityModel;
use qcra::codebook::{CirculantTable, QcRaCode};
use qcra::decoder::DecoderVariant;
use qcra::harness::{SearchConfig, SimSettings, StopRule, DEFAULT_MAX_ITERATIONS};
use qcra::rate_adapt::RateAdaptScheme;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const CONFIG_DIR_ENV: &str = "QCRA_CONFIG_DIR";
pub const BUILTIN_R1_10: &str = "builtin:r1_10";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub code: String,
    pub seed: u64,
    pub workers: usize,
    pub max_iterations: usize,
    pub decoder: DecoderVariant,
    pub capacity_model: CapacityModel,
    pub out: Option<PathBuf>,
    pub simulate: SimulateSection,
    pub search: SearchConfig,
    pub sweep: SweepSection,
    pub keyrate: KeyrateSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            code: BUILTIN_R1_10.into(),
            seed: 1,
            workers: 1,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            decoder: DecoderVariant::SumProduct,
            capacity_model: CapacityModel::Gaussian,
            out: None,
            simulate: SimulateSection::default(),
            search: SearchConfig::default(),
            sweep: SweepSection::default(),
            keyrate: KeyrateSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub scheme: RateAdaptScheme,
    /// Fixed-SNR points to estimate.
    pub snr_db: Vec<f64>,
    /// When set, search for the SNR reaching this WER instead.
    pub wer_target: Option<f64>,
    pub stop: StopRule,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection {
            scheme: RateAdaptScheme::Hop,
            snr_db: Vec::new(),
            wer_target: None,
            stop: StopRule::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Schemes measured besides the plain code.
    pub schemes: Vec<RateAdaptScheme>,
    pub wer_targets: Vec<f64>,
    /// Channel SNR grid (dB) for the hop/repeat versus adaptive comparison;
    /// empty to skip it.
    pub compare_grid_db: Vec<f64>,
    pub compare_wer_target: f64,
    pub max_repeat: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            schemes: Vec::new(),
            wer_targets: vec![0.5, 0.1, 0.01, 0.001],
            compare_grid_db: Vec::new(),
            compare_wer_target: 0.1,
            max_repeat: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KeyrateSection {
    pub excess_noise: f64,
    pub detector_efficiency: f64,
    pub electronic_noise: f64,
    pub attenuation_db_per_km: f64,
    pub distance_start_km: f64,
    pub distance_stop_km: f64,
    pub distance_step_km: f64,
    pub va_cap: f64,
    /// Replaces every profile's `p_fail` when set.
    pub p_fail_override: Option<f64>,
    pub profiles: Vec<ProfileEntry>,
}

impl Default for KeyrateSection {
    fn default() -> Self {
        KeyrateSection {
            excess_noise: 0.01,
            detector_efficiency: 0.6,
            electronic_noise: 0.01,
            attenuation_db_per_km: qcra::cvqkd::DEFAULT_ATTENUATION_DB_PER_KM,
            distance_start_km: 0.0,
            distance_stop_km: 150.0,
            distance_step_km: 1.0,
            va_cap: qcra::cvqkd::DEFAULT_VA_CAP,
            p_fail_override: None,
            profiles: Vec::new(),
        }
    }
}

/// A code's operating point for the key-rate curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileEntry {
    pub name: String,
    pub rate: f64,
    pub operating_snr_db: f64,
    /// Defaults to `rate / C(s)` under the configured capacity model.
    pub beta: Option<f64>,
    pub p_fail: f64,
}

/// Values given on the command line; each replaces its config field.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Code table path, or builtin:r1_10.
    #[arg(long, global = true)]
    pub code: Option<String>,
    /// SNR point(s) in dB.
    #[arg(long = "snr-db", global = true, value_delimiter = ',', allow_negative_numbers = true)]
    pub snr_db: Option<Vec<f64>>,
    #[arg(long = "wer-target", global = true)]
    pub wer_target: Option<f64>,
    #[arg(long = "max-iter", global = true)]
    pub max_iter: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output path (file, or base name for CSV/JSON pairs).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// sum-product or min-sum.
    #[arg(long, global = true)]
    pub decoder: Option<String>,
}

impl RunConfig {
    /// Loads the config named by `overrides` (or defaults) and applies the flags.
    pub fn load(overrides: &Overrides) -> Result<(Self, Option<PathBuf>), CliError> {
        let (mut cfg, base_dir) = match &overrides.config {
            Some(path) => {
                let path = resolve_config_path(path);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                let cfg: RunConfig = toml::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                (cfg, path.parent().map(Path::to_path_buf))
            }
            None => (RunConfig::default(), None),
        };
        if let Some(dir) = &base_dir {
            if !cfg.code.starts_with("builtin:") && Path::new(&cfg.code).is_relative() {
                cfg.code = dir.join(&cfg.code).to_string_lossy().into_owned();
            }
        }
        if let Some(c) = &overrides.code {
            cfg.code = c.clone();
        }
        if let Some(v) = &overrides.snr_db {
            cfg.simulate.snr_db = v.clone();
        }
        if let Some(w) = overrides.wer_target {
            cfg.simulate.wer_target = Some(w);
        }
        if let Some(m) = overrides.max_iter {
            cfg.max_iterations = m;
        }
        if let Some(s) = overrides.seed {
            cfg.seed = s;
        }
        if let Some(w) = overrides.workers {
            cfg.workers = w;
        }
        if let Some(o) = &overrides.out {
            cfg.out = Some(o.clone());
        }
        if let Some(d) = &overrides.decoder {
            cfg.decoder = d.parse().map_err(|e: qcra::Error| CliError::Config(e.to_string()))?;
        }
        cfg.validate()?;
        Ok((cfg, base_dir))
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.workers == 0 {
            return Err(CliError::Config("workers must be at least 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(CliError::Config("max_iterations must be at least 1".into()));
        }
        Ok(())
    }

    pub fn settings(&self) -> SimSettings {
        SimSettings {
            max_iterations: self.max_iterations,
            decoder: self.decoder,
            seed: self.seed,
            workers: self.workers,
        }
    }

    pub fn out_path(&self, default: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(default))
    }
}

fn resolve_config_path(path: &Path) -> PathBuf {
    match std::env::var_os(CONFIG_DIR_ENV) {
        Some(dir) if path.is_relative() => PathBuf::from(dir).join(path),
        _ => path.to_path_buf(),
    }
}

/// Loads `builtin:r1_10` or a table file.
pub fn load_table(source: &str) -> Result<CirculantTable, CliError> {
    if source == BUILTIN_R1_10 {
        return Ok(CirculantTable::builtin_rate_one_tenth());
    }
    if let Some(name) = source.strip_prefix("builtin:") {
        return Err(CliError::Config(format!("unknown builtin code {name:?} (available: r1_10)")));
    }
    let text = std::fs::read_to_string(source).map_err(|e| CliError::Config(format!("{source}: {e}")))?;
    CirculantTable::parse(&text).map_err(|e| CliError::Config(format!("{source}: {e}")))
}

pub fn load_code(source: &str) -> Result<Arc<QcRaCode>, CliError> {
    Ok(Arc::new(load_table(source)?.expand()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn sections_parse() {
        let cfg: RunConfig = toml::from_str(
            r#"
            seed = 9
            max_iterations = 500
            decoder = { kind = "min_sum", scale = 0.75 }
            [simulate]
            scheme = { kind = "puncture", count = 100 }
            snr_db = [-7.0, -6.5]
            stop = { min_errors = 20, max_trials = 100, min_trials = 1 }
            [sweep]
            schemes = [{ kind = "extend", count = 6480 }, { kind = "repeat", factor = 2 }]
            [[keyrate.profiles]]
            name = "r1_10"
            rate = 0.1
            operating_snr_db = -7.5
            p_fail = 0.1
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.decoder, DecoderVariant::MinSum { scale: 0.75 });
        assert_eq!(cfg.simulate.scheme, RateAdaptScheme::Puncture { count: 100 });
        assert_eq!(cfg.sweep.schemes[1], RateAdaptScheme::Repeat { factor: 2 });
        assert_eq!(cfg.keyrate.profiles[0].beta, None);
        assert_eq!(cfg.keyrate.excess_noise, 0.01);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("sed = 3").is_err());
    }
}
