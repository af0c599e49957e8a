//! Weak coherent source and two-detector measurement unit.
//!
//! The source emits a Poisson number of photons per pulse. Each photon
//! survives the return fibre and detector with probability
//! `channel_transmittance * efficiency` and is routed to detector 0 with
//! the Born probability of the measured basis, mixed with a symmetric flip
//! of probability `misalignment_error`. Dark counts are OR-ed onto each
//! detector independently.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::bloch::{born_probability, Basis, BlochVector};
use crate::error::{field_path, ConfigError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    /// Mean photon number per pulse at the client output.
    pub mean_photon_number: f64,
    /// Pulse repetition rate in Hz.
    pub repetition_rate: f64,
    /// Pulse width in seconds.
    pub pulse_width: f64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig {
            mean_photon_number: 0.1,
            repetition_rate: 1.0e6,
            pulse_width: 100.0e-9,
        }
    }
}

impl SourceConfig {
    pub fn validate(&self, prefix: &str) -> Result<(), ConfigError> {
        let f = |name| field_path(prefix, name);
        if !(self.mean_photon_number.is_finite() && self.mean_photon_number > 0.0) {
            return Err(ConfigError::invalid(
                f("mean_photon_number"),
                "must be finite and > 0",
            ));
        }
        if !(self.repetition_rate.is_finite() && self.repetition_rate > 0.0) {
            return Err(ConfigError::invalid(
                f("repetition_rate"),
                "must be finite and > 0",
            ));
        }
        if !(self.pulse_width.is_finite() && self.pulse_width > 0.0) {
            return Err(ConfigError::invalid(
                f("pulse_width"),
                "must be finite and > 0",
            ));
        }
        if self.pulse_width >= 1.0 / self.repetition_rate {
            return Err(ConfigError::invalid(
                f("pulse_width"),
                "must be shorter than the repetition period",
            ));
        }
        Ok(())
    }

    /// Time between pulses in seconds.
    pub fn period(&self) -> f64 {
        1.0 / self.repetition_rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    /// Detection probability per incident photon.
    pub efficiency: f64,
    /// Dark count probability per detector per gate.
    pub dark_count_prob: f64,
    /// Photon survival probability from client output to detector input.
    pub channel_transmittance: f64,
    /// Probability that a detected photon is routed to the wrong detector.
    pub misalignment_error: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            efficiency: 0.15,
            dark_count_prob: 1.0e-5,
            channel_transmittance: 0.5,
            misalignment_error: 0.01,
        }
    }
}

impl DetectorConfig {
    /// Lossless, noiseless detection.
    pub fn ideal() -> Self {
        DetectorConfig {
            efficiency: 1.0,
            dark_count_prob: 0.0,
            channel_transmittance: 1.0,
            misalignment_error: 0.0,
        }
    }

    pub fn validate(&self, prefix: &str) -> Result<(), ConfigError> {
        let f = |name| field_path(prefix, name);
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.efficiency) {
            return Err(ConfigError::invalid(f("efficiency"), "must lie in [0, 1]"));
        }
        if !unit(self.dark_count_prob) {
            return Err(ConfigError::invalid(
                f("dark_count_prob"),
                "must lie in [0, 1]",
            ));
        }
        if !unit(self.channel_transmittance) {
            return Err(ConfigError::invalid(
                f("channel_transmittance"),
                "must lie in [0, 1]",
            ));
        }
        if !(0.0..0.5).contains(&self.misalignment_error) {
            return Err(ConfigError::invalid(
                f("misalignment_error"),
                "must lie in [0, 0.5)",
            ));
        }
        Ok(())
    }

    /// Probability that a single emitted photon produces a detection.
    pub fn photon_detection_probability(&self) -> f64 {
        self.channel_transmittance * self.efficiency
    }
}

/// Which detectors fired in one gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Clicks {
    pub click0: bool,
    pub click1: bool,
}

impl Clicks {
    pub fn is_empty(&self) -> bool {
        !self.click0 && !self.click1
    }

    pub fn is_double(&self) -> bool {
        self.click0 && self.click1
    }

    /// Outcome of a single click, `None` for empty or double clicks.
    pub fn single_outcome(&self) -> Option<u8> {
        match (self.click0, self.click1) {
            (true, false) => Some(0),
            (false, true) => Some(1),
            _ => None,
        }
    }
}

/// Detector state recorded for one pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ClickRecord {
    pub pulse_index: u64,
    pub clicks: Clicks,
}

/// Analytic probability of emitting two or more photons:
/// `1 - e^-mu (1 + mu)`.
pub fn multi_photon_probability(mu: f64) -> f64 {
    -(-mu).exp_m1() - mu * (-mu).exp()
}

/// Poisson photon-number source with a prebuilt sampler.
#[derive(Debug, Clone)]
pub struct PhotonSource {
    config: SourceConfig,
    poisson: Poisson<f64>,
}

impl PhotonSource {
    pub fn new(config: SourceConfig) -> Result<Self, ConfigError> {
        config.validate("source")?;
        let poisson = Poisson::new(config.mean_photon_number)
            .map_err(|e| ConfigError::invalid("source.mean_photon_number", e.to_string()))?;
        Ok(PhotonSource { config, poisson })
    }

    pub fn config(&self) -> &SourceConfig {
        &self.config
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.poisson.sample(rng) as u32
    }
}

/// Draws a Poisson photon number with mean `mu`.
///
/// # Panics
/// If `mu` is not finite and positive.
pub fn sample_photon_number<R: Rng + ?Sized>(mu: f64, rng: &mut R) -> u32 {
    let poisson = Poisson::new(mu).expect("mean photon number must be finite and > 0");
    poisson.sample(rng) as u32
}

/// Simulates the two-detector measurement of `n_photons` photons in state
/// `state_bloch`, measured along `meas_basis`.
pub fn detect<R: Rng + ?Sized>(
    state_bloch: BlochVector,
    meas_basis: Basis,
    n_photons: u32,
    det: &DetectorConfig,
    rng: &mut R,
) -> Clicks {
    let mut clicks = Clicks::default();
    if n_photons > 0 {
        let survive = det.photon_detection_probability();
        let e = det.misalignment_error;
        let p0 = (1.0 - 2.0 * e) * born_probability(state_bloch, meas_basis) + e;
        for _ in 0..n_photons {
            if rng.random_bool(survive) {
                if rng.random_bool(p0) {
                    clicks.click0 = true;
                } else {
                    clicks.click1 = true;
                }
            }
        }
    }
    if det.dark_count_prob > 0.0 {
        if rng.random_bool(det.dark_count_prob) {
            clicks.click0 = true;
        }
        if rng.random_bool(det.dark_count_prob) {
            clicks.click1 = true;
        }
    }
    clicks
}
