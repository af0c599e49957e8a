//! Built-in scenarios: 24 windows of 10 s at 1 MHz.

use std::f64::consts::FRAC_PI_2;

use crate::drift::{BurstInterval, BurstSchedule, DriftProcess};
use crate::error::ConfigError;
use crate::keyrate::EveFormula;
use crate::photonics::{DetectorConfig, SourceConfig};
use crate::protocol::WindowSchedule;

use super::config::{Protocol, ScenarioConfig};

pub const PRESET_NAMES: [&str; 2] = ["drift", "burst"];

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_PULSE_SCALE: u64 = 100;

/// Misalignment used by both presets.
pub const PRESET_MISALIGNMENT: f64 = 0.03;

/// Total rotation of the drift preset over its 240 s.
pub const DRIFT_TOTAL_ROTATION: f64 = FRAC_PI_2;

/// Static frame offset of the burst preset.
pub const BURST_BETA0: f64 = 1.5;
/// Walk step per pulse while the burst lasts.
pub const BURST_SIGMA: f64 = 1.0e-2;
pub const BURST_START: f64 = 60.0;
pub const BURST_END: f64 = 120.0;

fn base(drift: DriftProcess, bursts: BurstSchedule) -> ScenarioConfig {
    let windows = WindowSchedule {
        window_duration: 10.0,
        n_windows: 24,
    };
    ScenarioConfig {
        seed: DEFAULT_SEED,
        pulse_scale: DEFAULT_PULSE_SCALE,
        eve_formula_variant: EveFormula::Proof,
        protocols: vec![Protocol::Rfi, Protocol::Bb84],
        source: SourceConfig {
            mean_photon_number: 0.1,
            repetition_rate: 1.0e6,
            pulse_width: 100.0e-9,
        },
        detector: DetectorConfig {
            misalignment_error: PRESET_MISALIGNMENT,
            ..DetectorConfig::default()
        },
        drift,
        bursts,
        windows,
    }
}

/// Linear rotation from 0 to a quarter turn over the run.
pub fn drift() -> ScenarioConfig {
    let duration = 240.0;
    base(
        DriftProcess::Linear {
            beta0: 0.0,
            rate: DRIFT_TOTAL_ROTATION / duration,
        },
        BurstSchedule::none(),
    )
}

/// Static misaligned frame, a random-walk burst over windows 7 to 12, then
/// calm again.
pub fn burst() -> ScenarioConfig {
    base(
        DriftProcess::Static { beta0: BURST_BETA0 },
        BurstSchedule {
            intervals: vec![BurstInterval {
                start: BURST_START,
                end: BURST_END,
                burst_sigma: BURST_SIGMA,
            }],
        },
    )
}

pub fn preset(name: &str) -> Result<ScenarioConfig, ConfigError> {
    match name {
        "drift" => Ok(drift()),
        "burst" => Ok(burst()),
        other => Err(ConfigError::UnknownPreset(other.to_string())),
    }
}
