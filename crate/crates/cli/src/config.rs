//! Run configuration file (TOML, strict schema).

use std::path::Path;

use kstar_core::sim::{Scheme, SweepAxis, SusTuning};
use kstar_core::SystemConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemSection {
    pub num_antennas: usize,
    pub num_candidates: usize,
    pub coherence_symbols: usize,
    pub tx_power_dbm: f64,
    pub noise_power_dbm: f64,
    /// Linear pathloss at 1 m.
    pub pathloss_ref: f64,
    pub pathloss_exp: f64,
    pub est_error: f64,
    pub corr_coef: f64,
    pub r_min: f64,
    pub r_max: f64,
}

impl Default for SystemSection {
    fn default() -> Self {
        let d = SystemConfig::default();
        SystemSection {
            num_antennas: d.num_antennas,
            num_candidates: d.num_candidates,
            coherence_symbols: d.coherence_symbols,
            tx_power_dbm: d.tx_power_dbm,
            noise_power_dbm: d.noise_power_dbm,
            pathloss_ref: d.pathloss_ref,
            pathloss_exp: d.pathloss_exp,
            est_error: d.est_error,
            corr_coef: d.corr_coef,
            r_min: d.r_min,
            r_max: d.r_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub trials: usize,
    pub schemes: Vec<String>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: SystemConfig::default().seed,
            trials: SystemConfig::default().trials,
            schemes: ["kstar-lus", "kstar-rus", "rus"].map(String::from).to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub axis: String,
    pub values: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection { axis: "power_dbm".into(), values: vec![10.0, 20.0, 30.0, 40.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FairnessSection {
    pub windows: usize,
    pub slots_per_window: usize,
    /// Optional axis to repeat the fairness run over.
    pub axis: Option<String>,
    pub values: Vec<f64>,
}

impl Default for FairnessSection {
    fn default() -> Self {
        FairnessSection { windows: 100, slots_per_window: 100, axis: None, values: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SusSection {
    pub grid: Vec<f64>,
    pub tune_trials: usize,
}

impl Default for SusSection {
    fn default() -> Self {
        let d = SusTuning::default();
        SusSection { grid: d.grid, tune_trials: d.trials }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidateSection {
    pub antennas: Vec<usize>,
    /// Active users as a fraction of M.
    pub load: f64,
    pub draws: usize,
    /// Largest acceptable relative error at the largest M under `--assert`.
    pub max_rel_err: f64,
    /// Estimation error and antenna correlation used by the check; they
    /// replace the `system` values so the error term is exercised.
    pub est_error: f64,
    pub corr_coef: f64,
}

impl Default for ValidateSection {
    fn default() -> Self {
        ValidateSection {
            antennas: vec![32, 64, 128],
            load: 0.25,
            draws: 2000,
            max_rel_err: 0.05,
            est_error: 0.1,
            corr_coef: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfigFile {
    pub system: SystemSection,
    pub run: RunSection,
    pub sweep: SweepSection,
    pub fairness: FairnessSection,
    pub sus: SusSection,
    pub validate: ValidateSection,
}

impl RunConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfigFile = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), CliError> {
        self.system_config().validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.schemes()?;
        self.sweep_axis()?;
        if let Some(axis) = &self.fairness.axis {
            axis.parse::<SweepAxis>().map_err(|e| CliError::Config(e.to_string()))?;
        }
        if self.fairness.windows == 0 || self.fairness.slots_per_window == 0 {
            return Err(CliError::Config("fairness windows and slots_per_window must be positive".into()));
        }
        if self.validate.antennas.is_empty() || !(self.validate.load > 0.0 && self.validate.load < 1.0) {
            return Err(CliError::Config("validate needs antennas and 0 < load < 1".into()));
        }
        Ok(())
    }

    pub fn system_config(&self) -> SystemConfig {
        let s = &self.system;
        SystemConfig {
            num_antennas: s.num_antennas,
            num_candidates: s.num_candidates,
            coherence_symbols: s.coherence_symbols,
            tx_power_dbm: s.tx_power_dbm,
            noise_power_dbm: s.noise_power_dbm,
            pathloss_ref: s.pathloss_ref,
            pathloss_exp: s.pathloss_exp,
            est_error: s.est_error,
            corr_coef: s.corr_coef,
            r_min: s.r_min,
            r_max: s.r_max,
            seed: self.run.seed,
            trials: self.run.trials,
        }
    }

    pub fn schemes(&self) -> Result<Vec<Scheme>, CliError> {
        parse_schemes(self.run.schemes.iter().map(String::as_str))
    }

    pub fn sweep_axis(&self) -> Result<SweepAxis, CliError> {
        self.sweep.axis.parse().map_err(|e: kstar_core::Error| CliError::Config(e.to_string()))
    }

    pub fn sus_tuning(&self) -> SusTuning {
        SusTuning { grid: self.sus.grid.clone(), trials: self.sus.tune_trials }
    }

    /// Stable hash of the canonical JSON form of the effective configuration.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

pub fn parse_schemes<'a>(names: impl Iterator<Item = &'a str>) -> Result<Vec<Scheme>, CliError> {
    let schemes: Vec<Scheme> = names
        .map(|s| s.trim().parse::<Scheme>().map_err(|e| CliError::Config(e.to_string())))
        .collect::<Result<_, _>>()?;
    if schemes.is_empty() {
        return Err(CliError::Config("no schemes given".into()));
    }
    Ok(schemes)
}
