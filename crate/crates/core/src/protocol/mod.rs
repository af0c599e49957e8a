//! Client/server pulse loop: random state preparation, random measurement
//! basis, channel transit, detection, sifting and tally accumulation.

mod tally;

use std::ops::Range;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bloch::{rotate, Basis, FrameRotation, PolarizationState};
use crate::error::{field_path, ConfigError};
use crate::photonics::{detect, ClickRecord, Clicks, DetectorConfig, PhotonSource, SourceConfig};
use crate::rng::{pulse_domain_key, pulse_rng_from_key};

pub use tally::{CellCounts, Counts, TallyMatrix};

/// Pulses handled per parallel work item.
pub const CHUNK_PULSES: u64 = 1 << 14;

/// Timing of the estimation windows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSchedule {
    /// Integration time of one window in seconds.
    pub window_duration: f64,
    pub n_windows: u32,
}

impl Default for WindowSchedule {
    fn default() -> Self {
        WindowSchedule {
            window_duration: 10.0,
            n_windows: 24,
        }
    }
}

impl WindowSchedule {
    /// Physical pulses emitted per window.
    pub fn pulses_per_window(&self, repetition_rate: f64) -> u64 {
        (self.window_duration * repetition_rate).round() as u64
    }

    pub fn validate(&self, prefix: &str, repetition_rate: f64) -> Result<(), ConfigError> {
        if !(self.window_duration.is_finite() && self.window_duration > 0.0) {
            return Err(ConfigError::invalid(
                field_path(prefix, "window_duration"),
                "must be finite and > 0",
            ));
        }
        if self.n_windows == 0 {
            return Err(ConfigError::invalid(
                field_path(prefix, "n_windows"),
                "must be >= 1",
            ));
        }
        if self.pulses_per_window(repetition_rate) < 1 {
            return Err(ConfigError::invalid(
                field_path(prefix, "window_duration"),
                "window must contain at least one pulse",
            ));
        }
        Ok(())
    }
}

/// The simulated pulses of one window: every `stride`-th physical pulse
/// starting at `first_pulse`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowPlan {
    pub window_index: u64,
    pub first_pulse: u64,
    pub stride: u64,
    pub pulses: u64,
}

impl WindowPlan {
    /// Plan for window `window_index` simulating one pulse in `pulse_scale`.
    /// Trailing pulses that do not fill a stride are dropped.
    pub fn new(window_index: u64, pulses_per_window: u64, pulse_scale: u64) -> Self {
        WindowPlan {
            window_index,
            first_pulse: window_index * pulses_per_window,
            stride: pulse_scale,
            pulses: pulses_per_window / pulse_scale,
        }
    }

    #[inline]
    pub fn pulse_index(&self, offset: u64) -> u64 {
        self.first_pulse + offset * self.stride
    }
}

/// Everything a pulse produced, before sifting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseTrace {
    pub prep: PolarizationState,
    pub meas: Basis,
    pub photons: u32,
    pub clicks: Clicks,
}

/// Sifting result for one pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseEvent {
    NoClick,
    Sifted {
        prep: PolarizationState,
        meas: Basis,
        outcome: u8,
        double_click: bool,
    },
}

/// One repetition up to the detector readout.
#[inline]
pub fn simulate_pulse<R: Rng + ?Sized>(
    source: &PhotonSource,
    detector: &DetectorConfig,
    beta: f64,
    rng: &mut R,
) -> PulseTrace {
    let prep = PolarizationState::ALL[rng.random_range(0..6)];
    let meas = Basis::ALL[rng.random_range(0..3)];
    let photons = source.sample(rng);
    let bloch = if photons > 0 {
        rotate(prep, FrameRotation::new(beta))
    } else {
        prep.bloch()
    };
    let clicks = detect(bloch, meas, photons, detector, rng);
    PulseTrace {
        prep,
        meas,
        photons,
        clicks,
    }
}

/// Assigns a uniformly random outcome to a double click.
#[inline]
pub fn resolve_double_click<R: Rng + ?Sized>(clicks: Clicks, rng: &mut R) -> u8 {
    debug_assert!(
        clicks.is_double(),
        "only double clicks are resolved at random"
    );
    rng.random_range(0..2u8)
}

/// One full repetition: preparation, transit, detection and sifting.
#[inline]
pub fn run_pulse<R: Rng + ?Sized>(
    source: &PhotonSource,
    detector: &DetectorConfig,
    beta: f64,
    rng: &mut R,
) -> PulseEvent {
    let trace = simulate_pulse(source, detector, beta, rng);
    let (outcome, double_click) = match trace.clicks.single_outcome() {
        Some(o) => (o, false),
        None if trace.clicks.is_double() => (resolve_double_click(trace.clicks, rng), true),
        None => return PulseEvent::NoClick,
    };
    PulseEvent::Sifted {
        prep: trace.prep,
        meas: trace.meas,
        outcome,
        double_click,
    }
}

impl TallyMatrix {
    /// Adds one pulse's sifting result.
    #[inline]
    pub fn record_event(&mut self, event: PulseEvent) {
        match event {
            PulseEvent::NoClick => self.discarded_no_click += 1,
            PulseEvent::Sifted {
                prep,
                meas,
                outcome,
                double_click,
            } => {
                if double_click {
                    self.double_clicks += 1;
                }
                self.record(prep, meas, outcome);
            }
        }
    }
}

/// Source, detector and seed shared by all pulses of a run. Each pulse
/// draws from its own generator keyed by its physical index.
#[derive(Debug, Clone)]
pub struct PulseEngine {
    source: PhotonSource,
    detector: DetectorConfig,
    domain_key: u64,
}

impl PulseEngine {
    pub fn new(
        source: SourceConfig,
        detector: DetectorConfig,
        seed: u64,
    ) -> Result<Self, ConfigError> {
        detector.validate("detector")?;
        Ok(PulseEngine {
            source: PhotonSource::new(source)?,
            detector,
            domain_key: pulse_domain_key(seed),
        })
    }

    pub fn source(&self) -> &PhotonSource {
        &self.source
    }

    pub fn detector(&self) -> &DetectorConfig {
        &self.detector
    }

    #[inline]
    pub fn pulse(&self, pulse_index: u64, beta: f64) -> PulseEvent {
        let mut rng = pulse_rng_from_key(self.domain_key, pulse_index);
        run_pulse(&self.source, &self.detector, beta, &mut rng)
    }

    #[inline]
    pub fn trace(&self, pulse_index: u64, beta: f64) -> PulseTrace {
        let mut rng = pulse_rng_from_key(self.domain_key, pulse_index);
        simulate_pulse(&self.source, &self.detector, beta, &mut rng)
    }
}

/// Tallies pulses `range` (offsets into the plan) sequentially. `betas`
/// holds the frame angle of every simulated pulse of the window.
pub fn accumulate_range(
    engine: &PulseEngine,
    plan: &WindowPlan,
    betas: &[f64],
    range: Range<u64>,
) -> TallyMatrix {
    assert!(
        range.end <= plan.pulses,
        "range {range:?} exceeds window of {} pulses",
        plan.pulses
    );
    assert_eq!(
        betas.len() as u64,
        plan.pulses,
        "one angle per simulated pulse"
    );
    let mut tally = TallyMatrix::empty(plan.window_index);
    for offset in range {
        let event = engine.pulse(plan.pulse_index(offset), betas[offset as usize]);
        tally.record_event(event);
    }
    tally
}

/// Tallies a whole window, splitting it into chunks on the rayon pool.
/// The result does not depend on the number of threads.
pub fn accumulate_window(engine: &PulseEngine, plan: &WindowPlan, betas: &[f64]) -> TallyMatrix {
    let chunks = plan.pulses.div_ceil(CHUNK_PULSES);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK_PULSES;
            let end = (start + CHUNK_PULSES).min(plan.pulses);
            accumulate_range(engine, plan, betas, start..end)
        })
        .reduce(|| TallyMatrix::empty(plan.window_index), |a, b| a + b)
}

/// Detector readouts for `range`, in pulse order.
pub fn click_records(
    engine: &PulseEngine,
    plan: &WindowPlan,
    betas: &[f64],
    range: Range<u64>,
) -> Vec<ClickRecord> {
    range
        .map(|offset| {
            let pulse_index = plan.pulse_index(offset);
            let trace = engine.trace(pulse_index, betas[offset as usize]);
            ClickRecord {
                pulse_index,
                clicks: trace.clicks,
            }
        })
        .collect()
}
