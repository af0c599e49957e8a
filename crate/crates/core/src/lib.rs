//! Photon-level Monte Carlo simulation of reference-frame-independent QKD
//! over a drifting channel, with the BB84 baseline analysed on the same
//! detection stream.

pub mod bloch;
pub mod drift;
pub mod error;
pub mod keyrate;
pub mod photonics;
pub mod protocol;
pub mod rng;
pub mod scenario;

pub use bloch::{Basis, BlochVector, FrameRotation, PolarizationState};
pub use drift::{BurstInterval, BurstSchedule, DriftProcess, DriftTrajectory};
pub use error::ConfigError;
pub use keyrate::{analyze_window, EveFormula, KeyRateError, KeyRateReport};
pub use photonics::{DetectorConfig, SourceConfig};
pub use protocol::{TallyMatrix, WindowSchedule};
pub use scenario::{run_scenario, Protocol, ScenarioConfig, WindowResult};
