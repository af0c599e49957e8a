//! Scenario execution: one drift trajectory, sequential windows, one result
//! row per window and protocol.

mod config;
mod output;
pub mod presets;

use log::{debug, warn};
use thiserror::Error;

use crate::drift::{DriftError, DriftTrajectory};
use crate::error::ConfigError;
use crate::keyrate::{analyze_window, KeyRateReport, ProtocolOutcome, RateEstimate};
use crate::protocol::{accumulate_window, PulseEngine, TallyMatrix, WindowPlan};
use crate::rng::drift_rng;
use crate::Basis;

pub use config::{Protocol, ScenarioConfig};
pub use output::{
    emit_results, format_sig9, parse_csv, parse_json, render, OutputError, OutputFormat, OutputRow,
    RunMeta, CSV_COLUMNS,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl From<DriftError> for ScenarioError {
    fn from(e: DriftError) -> Self {
        ScenarioError::Invariant(e.to_string())
    }
}

/// One output row: a window analysed under one protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowResult {
    pub window_index: u64,
    pub protocol: Protocol,
    /// Window start in seconds.
    pub t_start: f64,
    /// Mean frame angle over the simulated pulses, in rad.
    pub mean_beta: f64,
    pub outcome: ProtocolOutcome,
    /// Protocol-sifted events per second of physical time.
    pub detection_rate: f64,
}

impl WindowResult {
    pub fn estimate(&self) -> Option<&RateEstimate> {
        self.outcome.estimate.as_ref()
    }

    pub fn rate(&self) -> Option<f64> {
        self.outcome.rate()
    }

    pub fn sigma_rate(&self) -> Option<f64> {
        self.estimate().map(|e| e.sigma_rate)
    }

    pub fn aborted(&self) -> bool {
        self.outcome.is_aborted()
    }
}

/// Everything computed for one window.
#[derive(Debug, Clone)]
pub struct WindowRecord {
    pub window_index: u64,
    pub t_start: f64,
    pub mean_beta: f64,
    pub tally: TallyMatrix,
    pub report: KeyRateReport,
    /// Drift state before the window's first pulse.
    pub checkpoint: DriftTrajectory,
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub config: ScenarioConfig,
    pub windows: Vec<WindowRecord>,
}

impl ScenarioRun {
    /// Result rows ordered by window, then protocol.
    pub fn rows(&self) -> Vec<WindowResult> {
        let protocols = self.config.protocols_in_order();
        let scale = self.config.pulse_scale as f64;
        let duration = self.config.windows.window_duration;
        self.windows
            .iter()
            .flat_map(|w| {
                protocols.iter().map(move |&protocol| {
                    let (outcome, sifted) = match protocol {
                        Protocol::Rfi => (w.report.rfi, w.tally.sifted()),
                        Protocol::Bb84 => (w.report.bb84, bb84_sifted(&w.tally)),
                    };
                    WindowResult {
                        window_index: w.window_index,
                        protocol,
                        t_start: w.t_start,
                        mean_beta: w.mean_beta,
                        outcome,
                        detection_rate: sifted as f64 * scale / duration,
                    }
                })
            })
            .collect()
    }

    pub fn meta(&self) -> RunMeta {
        RunMeta::for_config(&self.config)
    }
}

fn bb84_sifted(tally: &TallyMatrix) -> u64 {
    [Basis::X, Basis::Z]
        .iter()
        .map(|&b| tally.cell(b, b).total())
        .sum()
}

/// Prepared run: validated config, pulse engine and window layout.
#[derive(Debug, Clone)]
pub struct Scenario {
    config: ScenarioConfig,
    engine: PulseEngine,
    pulses_per_window: u64,
}

impl Scenario {
    pub fn new(config: ScenarioConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let pulses_per_window = config.pulses_per_window();
        let dropped = pulses_per_window % config.pulse_scale;
        if dropped != 0 {
            warn!(
                "pulse_scale {} does not divide {} pulses per window; dropping {} trailing pulses per window",
                config.pulse_scale, pulses_per_window, dropped
            );
        }
        let engine = PulseEngine::new(config.source, config.detector, config.seed)?;
        Ok(Scenario {
            config,
            engine,
            pulses_per_window,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    /// Drift state before the first window.
    pub fn initial_trajectory(&self) -> DriftTrajectory {
        DriftTrajectory::new(
            self.config.drift,
            &self.config.bursts,
            self.config.source.repetition_rate,
            drift_rng(self.config.seed),
        )
    }

    /// Runs all windows in order along one trajectory.
    pub fn run(&self) -> Result<ScenarioRun, ScenarioError> {
        let mut trajectory = self.initial_trajectory();
        let mut windows = Vec::with_capacity(self.config.windows.n_windows as usize);
        for w in 0..u64::from(self.config.windows.n_windows) {
            let checkpoint = trajectory.clone();
            let record = self.run_window(w, &mut trajectory, checkpoint)?;
            windows.push(record);
        }
        Ok(ScenarioRun {
            config: self.config.clone(),
            windows,
        })
    }

    /// Re-executes window `window_index` from its stored checkpoint.
    pub fn rerun_window(
        &self,
        checkpoint: &DriftTrajectory,
        window_index: u64,
    ) -> Result<WindowRecord, ScenarioError> {
        let mut trajectory = checkpoint.clone();
        self.run_window(window_index, &mut trajectory, checkpoint.clone())
    }

    fn run_window(
        &self,
        window_index: u64,
        trajectory: &mut DriftTrajectory,
        checkpoint: DriftTrajectory,
    ) -> Result<WindowRecord, ScenarioError> {
        let plan = WindowPlan::new(
            window_index,
            self.pulses_per_window,
            self.config.pulse_scale,
        );
        let betas = (0..plan.pulses)
            .map(|j| trajectory.beta_at(plan.pulse_index(j)))
            .collect::<Result<Vec<f64>, _>>()?;
        let mean_beta = betas.iter().sum::<f64>() / betas.len() as f64;
        let tally = accumulate_window(&self.engine, &plan, &betas);
        if tally.pulses() != plan.pulses {
            return Err(ScenarioError::Invariant(format!(
                "window {window_index}: tally covers {} of {} pulses",
                tally.pulses(),
                plan.pulses
            )));
        }
        let report = analyze_window(&tally, self.config.eve_formula_variant);
        report
            .check_invariants()
            .map_err(|e| ScenarioError::Invariant(format!("window {window_index}: {e}")))?;
        debug!(
            "window {window_index}: {} sifted, mean beta {mean_beta:.4}, r_rfi {:?}, r_bb84 {:?}",
            tally.sifted(),
            report.rfi.rate(),
            report.bb84.rate()
        );
        Ok(WindowRecord {
            window_index,
            t_start: window_index as f64 * self.config.windows.window_duration,
            mean_beta,
            tally,
            report,
            checkpoint,
        })
    }
}

/// Validates `config` and runs it.
pub fn run_scenario(config: &ScenarioConfig) -> Result<Vec<WindowResult>, ScenarioError> {
    Ok(Scenario::new(config.clone())?.run()?.rows())
}
