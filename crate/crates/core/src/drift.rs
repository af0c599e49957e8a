//! Time evolution of the frame angle beta between client and server.
//!
//! beta(i) = deterministic(i) + W(i), where `deterministic` is the static or
//! linear part of the process and `W` is a Gaussian random walk whose step
//! size per pulse is the base `step_sigma` (zero unless the process is a
//! random walk) or, inside a burst interval, the interval's `burst_sigma`.
//! Angles are kept unwrapped.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{field_path, ConfigError};
use crate::rng::StreamRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftProcess {
    Static {
        beta0: f64,
    },
    /// `beta0 + rate * t`, with `rate` in rad/s.
    Linear {
        beta0: f64,
        rate: f64,
    },
    /// Gaussian walk with `step_sigma` rad per pulse.
    RandomWalk {
        beta0: f64,
        step_sigma: f64,
    },
}

impl DriftProcess {
    pub fn beta0(&self) -> f64 {
        match *self {
            DriftProcess::Static { beta0 }
            | DriftProcess::Linear { beta0, .. }
            | DriftProcess::RandomWalk { beta0, .. } => beta0,
        }
    }

    /// Walk step size outside bursts.
    pub fn base_sigma(&self) -> f64 {
        match *self {
            DriftProcess::RandomWalk { step_sigma, .. } => step_sigma,
            _ => 0.0,
        }
    }

    fn deterministic(&self, t: f64) -> f64 {
        match *self {
            DriftProcess::Static { beta0 } | DriftProcess::RandomWalk { beta0, .. } => beta0,
            DriftProcess::Linear { beta0, rate } => beta0 + rate * t,
        }
    }

    pub fn validate(&self, prefix: &str) -> Result<(), ConfigError> {
        let f = |name| field_path(prefix, name);
        if !self.beta0().is_finite() {
            return Err(ConfigError::invalid(f("beta0"), "must be finite"));
        }
        match *self {
            DriftProcess::Linear { rate, .. } if !rate.is_finite() => {
                Err(ConfigError::invalid(f("rate"), "must be finite"))
            }
            DriftProcess::RandomWalk { step_sigma, .. }
                if !(step_sigma.is_finite() && step_sigma >= 0.0) =>
            {
                Err(ConfigError::invalid(
                    f("step_sigma"),
                    "must be finite and >= 0",
                ))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BurstInterval {
    /// Start time in seconds (inclusive).
    pub start: f64,
    /// End time in seconds (exclusive).
    pub end: f64,
    /// Walk step size in rad per pulse while the burst lasts.
    pub burst_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BurstSchedule {
    #[serde(default)]
    pub intervals: Vec<BurstInterval>,
}

impl BurstSchedule {
    pub fn none() -> Self {
        BurstSchedule::default()
    }

    pub fn validate(&self, prefix: &str, process: &DriftProcess) -> Result<(), ConfigError> {
        let base = process.base_sigma();
        for (i, iv) in self.intervals.iter().enumerate() {
            let f = |name: &str| field_path(prefix, &format!("intervals[{i}].{name}"));
            if !(iv.start.is_finite() && iv.start >= 0.0) {
                return Err(ConfigError::invalid(f("start"), "must be finite and >= 0"));
            }
            if !(iv.end.is_finite() && iv.end > iv.start) {
                return Err(ConfigError::invalid(f("end"), "must be finite and > start"));
            }
            if !(iv.burst_sigma.is_finite() && iv.burst_sigma > base) {
                return Err(ConfigError::invalid(
                    f("burst_sigma"),
                    format!("must exceed the base step sigma ({base})"),
                ));
            }
        }
        let mut sorted: Vec<&BurstInterval> = self.intervals.iter().collect();
        sorted.sort_by(|a, b| a.start.total_cmp(&b.start));
        for pair in sorted.windows(2) {
            if pair[1].start < pair[0].end {
                return Err(ConfigError::invalid(
                    field_path(prefix, "intervals"),
                    format!(
                        "intervals [{}, {}) and [{}, {}) overlap",
                        pair[0].start, pair[0].end, pair[1].start, pair[1].end
                    ),
                ));
            }
        }
        Ok(())
    }

    /// Burst intervals translated to half-open pulse-index ranges.
    fn pulse_ranges(&self, repetition_rate: f64) -> Vec<(u64, u64, f64)> {
        let mut out: Vec<(u64, u64, f64)> = self
            .intervals
            .iter()
            .map(|iv| {
                let a = (iv.start * repetition_rate).ceil() as u64;
                let b = (iv.end * repetition_rate).ceil() as u64;
                (a, b, iv.burst_sigma)
            })
            .collect();
        out.sort_by_key(|r| r.0);
        out
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DriftError {
    #[error("drift trajectory queried out of order: pulse {requested} after pulse {last}")]
    OutOfOrder { requested: u64, last: u64 },
}

/// A single sequential realization of a drift process.
///
/// Queries must use strictly increasing pulse indices. Cloning captures a
/// checkpoint from which the remainder of the trajectory can be replayed
/// exactly.
#[derive(Debug, Clone)]
pub struct DriftTrajectory {
    process: DriftProcess,
    bursts: Vec<(u64, u64, f64)>,
    repetition_rate: f64,
    rng: StreamRng,
    last_index: Option<u64>,
    walk: f64,
}

impl DriftTrajectory {
    pub fn new(
        process: DriftProcess,
        schedule: &BurstSchedule,
        repetition_rate: f64,
        rng: StreamRng,
    ) -> Self {
        DriftTrajectory {
            process,
            bursts: schedule.pulse_ranges(repetition_rate),
            repetition_rate,
            rng,
            last_index: None,
            walk: 0.0,
        }
    }

    pub fn process(&self) -> &DriftProcess {
        &self.process
    }

    /// Index of the most recent query.
    pub fn last_index(&self) -> Option<u64> {
        self.last_index
    }

    /// Angle at `pulse_index`. The walk advances by the exact Gaussian
    /// increment accumulated over every skipped pulse.
    pub fn beta_at(&mut self, pulse_index: u64) -> Result<f64, DriftError> {
        let from = match self.last_index {
            Some(last) if pulse_index <= last => {
                return Err(DriftError::OutOfOrder {
                    requested: pulse_index,
                    last,
                })
            }
            Some(last) => last,
            None => 0,
        };
        let variance = self.step_variance(from, pulse_index);
        if variance > 0.0 {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            self.walk += variance.sqrt() * z;
        }
        self.last_index = Some(pulse_index);
        let t = pulse_index as f64 / self.repetition_rate;
        Ok(self.process.deterministic(t) + self.walk)
    }

    /// Summed per-step variance over steps `from+1 ..= to`; the step into
    /// pulse `i` uses the sigma in force at pulse `i`.
    fn step_variance(&self, from: u64, to: u64) -> f64 {
        if to <= from {
            return 0.0;
        }
        let lo = from + 1;
        let hi = to + 1;
        let total = (hi - lo) as f64;
        let base = self.process.base_sigma();
        let mut burst_steps = 0.0;
        let mut burst_var = 0.0;
        for &(a, b, sigma) in &self.bursts {
            let start = a.max(lo);
            let end = b.min(hi);
            if end > start {
                let n = (end - start) as f64;
                burst_steps += n;
                burst_var += n * sigma * sigma;
            }
        }
        (total - burst_steps) * base * base + burst_var
    }
}
