use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::drift::{BurstSchedule, DriftProcess};
use crate::error::ConfigError;
use crate::keyrate::EveFormula;
use crate::photonics::{DetectorConfig, SourceConfig};
use crate::protocol::WindowSchedule;

/// Key-rate estimator applied to each window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Rfi,
    Bb84,
}

impl Protocol {
    pub const ALL: [Protocol; 2] = [Protocol::Rfi, Protocol::Bb84];

    pub fn as_str(&self) -> &'static str {
        match self {
            Protocol::Rfi => "rfi",
            Protocol::Bb84 => "bb84",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rfi" => Ok(Protocol::Rfi),
            "bb84" => Ok(Protocol::Bb84),
            other => Err(format!("unknown protocol `{other}`")),
        }
    }
}

fn all_protocols() -> Vec<Protocol> {
    Protocol::ALL.to_vec()
}

/// Complete description of a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    /// Simulate one physical pulse in `pulse_scale`.
    pub pulse_scale: u64,
    #[serde(default)]
    pub eve_formula_variant: EveFormula,
    #[serde(default = "all_protocols")]
    pub protocols: Vec<Protocol>,
    pub source: SourceConfig,
    pub detector: DetectorConfig,
    pub drift: DriftProcess,
    #[serde(default)]
    pub bursts: BurstSchedule,
    pub windows: WindowSchedule,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: ScenarioConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// TOML rendering. Fails only for seeds above `i64::MAX`, which TOML
    /// integers cannot hold.
    pub fn to_toml(&self) -> Result<String, ConfigError> {
        toml::to_string(self).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.source.validate("source")?;
        self.detector.validate("detector")?;
        self.drift.validate("drift")?;
        self.bursts.validate("bursts", &self.drift)?;
        self.windows
            .validate("windows", self.source.repetition_rate)?;
        if self.pulse_scale == 0 {
            return Err(ConfigError::invalid("pulse_scale", "must be >= 1"));
        }
        let per_window = self.pulses_per_window();
        if self.pulse_scale > per_window {
            return Err(ConfigError::invalid(
                "pulse_scale",
                format!("exceeds the {per_window} pulses in a window"),
            ));
        }
        if self.protocols.is_empty() {
            return Err(ConfigError::invalid(
                "protocols",
                "at least one protocol is required",
            ));
        }
        let mut seen = self.protocols.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.protocols.len() {
            return Err(ConfigError::invalid("protocols", "duplicate entry"));
        }
        Ok(())
    }

    pub fn pulses_per_window(&self) -> u64 {
        self.windows.pulses_per_window(self.source.repetition_rate)
    }

    /// Enabled protocols in output order.
    pub fn protocols_in_order(&self) -> Vec<Protocol> {
        Protocol::ALL
            .into_iter()
            .filter(|p| self.protocols.contains(p))
            .collect()
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON encoding.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes to JSON");
        let digest = Sha256::digest(&canonical);
        let mut hex = format!("{digest:x}");
        hex.truncate(16);
        hex
    }
}
