//! Key-rate estimation from detection tallies.
//!
//! Correlations `<A B>` are the normalised difference between agreeing and
//! disagreeing (client bit, server outcome) counts. The key basis gives the
//! bit-error rate `Q = (1 - <ZZ>)/2`; the four X/Y correlations give the
//! rotation-invariant `C = <XX>^2 + <XY>^2 + <YX>^2 + <YY>^2`, which bounds
//! the eavesdropper's information `E(Q, C)`. The secret fraction is
//! `r = 1 - h(Q) - E(Q, C)`.
//!
//! The BB84 baseline runs on the same tally, pooling the matched X and Z
//! events and applying `1 - 2 h(Q)`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bloch::Basis;
use crate::protocol::{CellCounts, TallyMatrix};

/// Largest bit-error rate for which the eavesdropper bound applies.
pub const APPLICABILITY_Q_MAX: f64 = 0.159;

/// Statistical overshoot of `C` above 2 tolerated before the window is
/// treated as corrupt, in units of `sigma_C`.
pub const C_OVERSHOOT_SIGMAS: f64 = 3.0;

/// Absolute slack for `C` outside `[0, 2]` from floating-point rounding.
const C_ROUNDING_SLACK: f64 = 1e-12;

/// Operator grouping used to assemble `E(Q, C)` from `u_max` and `v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EveFormula {
    /// `(1-Q) h((1+u_max)/2) + Q h((1+v)/2)`.
    #[default]
    Proof,
    /// `h((1 + (1-Q) u_max + Q v)/2)`.
    Typeset,
}

impl fmt::Display for EveFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EveFormula::Proof => "proof",
            EveFormula::Typeset => "typeset",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KeyRateError {
    #[error("{what} = {value} is outside [0, 1]")]
    Domain { what: &'static str, value: f64 },

    #[error("correlation undefined: no events")]
    EmptyCell,

    #[error("correlation <{prep}{meas}> undefined: no events in cell")]
    UndefinedCell { prep: Basis, meas: Basis },

    #[error("Q = {q} exceeds the applicability bound {APPLICABILITY_Q_MAX}")]
    ApplicabilityExceeded { q: f64 },

    #[error("C = {c} outside [0, 2] beyond statistical tolerance (sigma_C = {sigma_c})")]
    DataIntegrity { c: f64, sigma_c: f64 },
}

/// Shannon entropy of a biased coin, in bits.
pub fn binary_entropy(x: f64) -> Result<f64, KeyRateError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(KeyRateError::Domain {
            what: "entropy argument",
            value: x,
        });
    }
    Ok(entropy(x))
}

/// `h(x)` for `x` already known to lie in `[0, 1]`; the endpoints are 0.
#[inline]
fn entropy(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        0.0
    } else {
        -x * x.log2() - (1.0 - x) * (1.0 - x).log2()
    }
}

/// `(n00 + n11 - n01 - n10) / (n00 + n11 + n01 + n10)`.
pub fn correlation(n00: u64, n11: u64, n01: u64, n10: u64) -> Result<f64, KeyRateError> {
    let agree = n00 + n11;
    let disagree = n01 + n10;
    let total = agree + disagree;
    if total == 0 {
        return Err(KeyRateError::EmptyCell);
    }
    Ok((agree as f64 - disagree as f64) / total as f64)
}

/// Estimate of one `<A B>` together with its sample size.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CorrelationEstimate {
    pub value: Option<f64>,
    pub samples: u64,
}

impl CorrelationEstimate {
    pub fn from_counts(c: &CellCounts) -> Self {
        CorrelationEstimate {
            value: correlation(c.n00, c.n11, c.n01, c.n10).ok(),
            samples: c.total(),
        }
    }

    /// Binomial standard error `sqrt((1 - E^2) / N)`.
    pub fn std_error(&self) -> Option<f64> {
        let e = self.value?;
        Some(((1.0 - e * e).max(0.0) / self.samples as f64).sqrt())
    }
}

/// The nine correlations `<A_prep B_meas>` of one window.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CorrelationSet {
    cells: [[CorrelationEstimate; 3]; 3],
}

impl CorrelationSet {
    pub fn from_tally(tally: &TallyMatrix) -> Self {
        let mut cells = [[CorrelationEstimate::default(); 3]; 3];
        for a in Basis::ALL {
            for b in Basis::ALL {
                cells[a.index()][b.index()] = CorrelationEstimate::from_counts(&tally.cell(a, b));
            }
        }
        CorrelationSet { cells }
    }

    /// Builds a set from known expectation values, each with `samples`
    /// events.
    pub fn from_values(values: [[f64; 3]; 3], samples: u64) -> Self {
        let mut cells = [[CorrelationEstimate::default(); 3]; 3];
        for (row, vals) in cells.iter_mut().zip(values) {
            for (cell, v) in row.iter_mut().zip(vals) {
                *cell = CorrelationEstimate {
                    value: Some(v),
                    samples,
                };
            }
        }
        CorrelationSet { cells }
    }

    pub fn estimate(&self, prep: Basis, meas: Basis) -> CorrelationEstimate {
        self.cells[prep.index()][meas.index()]
    }

    pub fn get(&self, prep: Basis, meas: Basis) -> Result<f64, KeyRateError> {
        self.estimate(prep, meas)
            .value
            .ok_or(KeyRateError::UndefinedCell { prep, meas })
    }

    pub fn std_error(&self, prep: Basis, meas: Basis) -> Result<f64, KeyRateError> {
        self.estimate(prep, meas)
            .std_error()
            .ok_or(KeyRateError::UndefinedCell { prep, meas })
    }
}

const XY_CELLS: [(Basis, Basis); 4] = [
    (Basis::X, Basis::X),
    (Basis::X, Basis::Y),
    (Basis::Y, Basis::X),
    (Basis::Y, Basis::Y),
];

/// Bit-error rate of the key basis.
pub fn compute_q(corr: &CorrelationSet) -> Result<f64, KeyRateError> {
    Ok((1.0 - corr.get(Basis::Z, Basis::Z)?) / 2.0)
}

/// Sum of the squared X/Y correlations.
pub fn compute_c(corr: &CorrelationSet) -> Result<f64, KeyRateError> {
    XY_CELLS
        .iter()
        .map(|&(a, b)| corr.get(a, b).map(|e| e * e))
        .sum()
}

/// Standard errors of `Q` and `C`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Uncertainty {
    pub sigma_q: f64,
    pub sigma_c: f64,
}

/// Propagates binomial errors on the correlations: linearly to `Q`, and to
/// `C` through `Var(E^2) = 4 E^2 s^2 + 2 s^4` per term.
///
/// The `2 s^4` term is the Gaussian second-order correction; it keeps
/// `sigma_C` from collapsing when a correlation estimate sits near zero.
pub fn uncertainty_from_correlations(corr: &CorrelationSet) -> Result<Uncertainty, KeyRateError> {
    let sigma_q = corr.std_error(Basis::Z, Basis::Z)? / 2.0;
    let mut var_c = 0.0;
    for (a, b) in XY_CELLS {
        let e = corr.get(a, b)?;
        let s2 = corr.std_error(a, b)?.powi(2);
        var_c += 4.0 * e * e * s2 + 2.0 * s2 * s2;
    }
    Ok(Uncertainty {
        sigma_q,
        sigma_c: var_c.sqrt(),
    })
}

pub fn estimate_uncertainty(tally: &TallyMatrix) -> Result<Uncertainty, KeyRateError> {
    uncertainty_from_correlations(&CorrelationSet::from_tally(tally))
}

/// Clamps a statistical overshoot of `C` above 2 back to 2, or reports a
/// data-integrity error when the overshoot exceeds three standard errors.
pub fn clamp_c(c: f64, sigma_c: f64) -> Result<f64, KeyRateError> {
    if !c.is_finite() || c < -C_ROUNDING_SLACK {
        return Err(KeyRateError::DataIntegrity { c, sigma_c });
    }
    if c > 2.0 + C_OVERSHOOT_SIGMAS * sigma_c + C_ROUNDING_SLACK {
        return Err(KeyRateError::DataIntegrity { c, sigma_c });
    }
    Ok(c.clamp(0.0, 2.0))
}

/// Eavesdropper information and its intermediate terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EveInformation {
    pub u_max: f64,
    /// `Q v`, computed without dividing by `Q`.
    pub q_times_v: f64,
    pub bits: f64,
}

/// `E(Q, C)` for `0 <= Q <= 0.159` and `0 <= C <= 2`.
pub fn eve_information(
    q: f64,
    c: f64,
    formula: EveFormula,
) -> Result<EveInformation, KeyRateError> {
    if !(0.0..=1.0).contains(&q) {
        return Err(KeyRateError::Domain {
            what: "Q",
            value: q,
        });
    }
    if q > APPLICABILITY_Q_MAX {
        return Err(KeyRateError::ApplicabilityExceeded { q });
    }
    if !(-C_ROUNDING_SLACK..=2.0 + C_ROUNDING_SLACK).contains(&c) {
        return Err(KeyRateError::DataIntegrity { c, sigma_c: 0.0 });
    }
    Ok(eve_information_unchecked(q, c.clamp(0.0, 2.0), formula))
}

/// Evaluates `E(Q, C)` for any `Q` in `[0, 1]`, `C` in `[0, 2]`.
///
/// `u_max = min(sqrt(C/2)/(1-Q), 1)`. While the ratio is below one,
/// `(1-Q) u_max = sqrt(C/2)` and `Q v` is exactly zero; once it saturates,
/// `Q v = sqrt(C/2 - (1-Q)^2)`, capped at `Q` so the entropy argument
/// stays in range.
fn eve_information_unchecked(q: f64, c: f64, formula: EveFormula) -> EveInformation {
    let half_c = 0.5 * c;
    let keep = 1.0 - q;
    let ratio = if half_c == 0.0 {
        0.0
    } else {
        half_c.sqrt() / keep
    };
    let (u_max, q_times_v) = if ratio < 1.0 {
        (ratio, 0.0)
    } else {
        (1.0, (half_c - keep * keep).max(0.0).sqrt().min(q))
    };
    let bits = match formula {
        EveFormula::Proof => {
            let phase = if q > 0.0 {
                q * entropy(0.5 * (1.0 + q_times_v / q))
            } else {
                0.0
            };
            keep * entropy(0.5 * (1.0 + u_max)) + phase
        }
        EveFormula::Typeset => entropy(0.5 * (1.0 + keep * u_max + q_times_v)),
    };
    EveInformation {
        u_max,
        q_times_v,
        bits,
    }
}

/// `1 - h(Q) - E(Q, C)`; negative values mean no key can be distilled.
pub fn rfi_key_rate(q: f64, c: f64, formula: EveFormula) -> Result<f64, KeyRateError> {
    let eve = eve_information(q, c, formula)?;
    Ok(1.0 - entropy(q) - eve.bits)
}

fn rfi_rate_unchecked(q: f64, c: f64, formula: EveFormula) -> f64 {
    let q = q.clamp(0.0, 1.0);
    1.0 - entropy(q) - eve_information_unchecked(q, c.clamp(0.0, 2.0), formula).bits
}

/// Asymptotic BB84 fraction `1 - 2 h(Q)`. `Q` is clamped into `[0, 1]`.
pub fn bb84_key_rate(q: f64) -> f64 {
    1.0 - 2.0 * entropy(q.clamp(0.0, 1.0))
}

/// Secant estimate of `|df/dx| * sigma` over `[x - sigma, x + sigma]`,
/// restricted to `[lo, hi]`. Stays finite at the kinks and log
/// singularities of the rate formulas.
fn secant_spread(f: impl Fn(f64) -> f64, x: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    let a = (x - sigma).max(lo);
    let b = (x + sigma).min(hi);
    if b > a {
        ((f(b) - f(a)) / (b - a) * sigma).abs()
    } else {
        0.0
    }
}

/// Why a window's estimate was not accepted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AbortReason {
    EmptyCell { prep: Basis, meas: Basis },
    ApplicabilityExceeded { q: f64 },
    DataIntegrity { c: f64, sigma_c: f64 },
}

impl AbortReason {
    /// Short machine-readable code used in output files.
    pub fn code(&self) -> String {
        match self {
            AbortReason::EmptyCell { prep, meas } => format!("empty_cell_{prep}{meas}"),
            AbortReason::ApplicabilityExceeded { .. } => "qber_above_applicability_bound".into(),
            AbortReason::DataIntegrity { .. } => "c_out_of_range".into(),
        }
    }
}

impl fmt::Display for AbortReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AbortReason::EmptyCell { prep, meas } => write!(f, "no events in cell {prep}{meas}"),
            AbortReason::ApplicabilityExceeded { q } => {
                write!(f, "Q = {q:.4} above {APPLICABILITY_Q_MAX}")
            }
            AbortReason::DataIntegrity { c, sigma_c } => {
                write!(
                    f,
                    "C = {c:.4} exceeds 2 by more than {C_OVERSHOOT_SIGMAS} x {sigma_c:.4}"
                )
            }
        }
    }
}

impl From<KeyRateError> for AbortReason {
    fn from(e: KeyRateError) -> Self {
        match e {
            KeyRateError::UndefinedCell { prep, meas } => AbortReason::EmptyCell { prep, meas },
            KeyRateError::ApplicabilityExceeded { q } => AbortReason::ApplicabilityExceeded { q },
            KeyRateError::DataIntegrity { c, sigma_c } => AbortReason::DataIntegrity { c, sigma_c },
            // Not produced from tallies; map conservatively.
            KeyRateError::EmptyCell | KeyRateError::Domain { .. } => AbortReason::DataIntegrity {
                c: f64::NAN,
                sigma_c: f64::NAN,
            },
        }
    }
}

/// Numbers estimated for one protocol in one window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    pub q: f64,
    pub sigma_q: f64,
    /// Raw (unclamped) `C`; `None` for BB84.
    pub c: Option<f64>,
    pub sigma_c: Option<f64>,
    pub eve_bits: f64,
    pub rate: f64,
    /// Propagated standard error of `rate`.
    pub sigma_rate: f64,
}

/// Result for one protocol: an estimate, an abort reason, or both (an
/// applicability abort still reports the numbers, with `rate <= 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolOutcome {
    pub estimate: Option<RateEstimate>,
    pub abort: Option<AbortReason>,
}

impl ProtocolOutcome {
    fn aborted(reason: AbortReason) -> Self {
        ProtocolOutcome {
            estimate: None,
            abort: Some(reason),
        }
    }

    pub fn is_aborted(&self) -> bool {
        self.abort.is_some()
    }

    pub fn rate(&self) -> Option<f64> {
        self.estimate.map(|e| e.rate)
    }

    /// Rate of an accepted (non-aborted) estimate.
    pub fn accepted_rate(&self) -> Option<f64> {
        if self.is_aborted() {
            None
        } else {
            self.rate()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyRateReport {
    pub window_index: u64,
    pub formula: EveFormula,
    pub rfi: ProtocolOutcome,
    pub bb84: ProtocolOutcome,
}

/// Secret fraction of the frame-independent protocol for one tally.
pub fn analyze_rfi(corr: &CorrelationSet, formula: EveFormula) -> ProtocolOutcome {
    let estimate = (|| -> Result<(f64, f64, Uncertainty), KeyRateError> {
        Ok((
            compute_q(corr)?,
            compute_c(corr)?,
            uncertainty_from_correlations(corr)?,
        ))
    })();
    let (q, c, unc) = match estimate {
        Ok(v) => v,
        Err(e) => return ProtocolOutcome::aborted(e.into()),
    };
    let c_used = match clamp_c(c, unc.sigma_c) {
        Ok(v) => v,
        Err(e) => return ProtocolOutcome::aborted(e.into()),
    };
    let (eve_bits, rate, abort) = match eve_information(q, c_used, formula) {
        Ok(eve) => (eve.bits, 1.0 - entropy(q) - eve.bits, None),
        Err(KeyRateError::ApplicabilityExceeded { q }) => {
            let eve = eve_information_unchecked(q, c_used, formula);
            let rate = (1.0 - entropy(q) - eve.bits).min(0.0);
            (
                eve.bits,
                rate,
                Some(AbortReason::ApplicabilityExceeded { q }),
            )
        }
        Err(e) => return ProtocolOutcome::aborted(e.into()),
    };
    let dq = secant_spread(
        |x| rfi_rate_unchecked(x, c_used, formula),
        q,
        unc.sigma_q,
        0.0,
        1.0,
    );
    let dc = secant_spread(
        |x| rfi_rate_unchecked(q, x, formula),
        c_used,
        unc.sigma_c,
        0.0,
        2.0,
    );
    ProtocolOutcome {
        estimate: Some(RateEstimate {
            q,
            sigma_q: unc.sigma_q,
            c: Some(c),
            sigma_c: Some(unc.sigma_c),
            eve_bits,
            rate,
            sigma_rate: dq.hypot(dc),
        }),
        abort,
    }
}

/// BB84 baseline: pooled error rate over matched X and Z events.
pub fn analyze_bb84(tally: &TallyMatrix) -> ProtocolOutcome {
    let mut errors = 0;
    let mut total = 0;
    for basis in [Basis::X, Basis::Z] {
        let cell = tally.cell(basis, basis);
        if cell.total() == 0 {
            return ProtocolOutcome::aborted(AbortReason::EmptyCell {
                prep: basis,
                meas: basis,
            });
        }
        errors += cell.disagreements();
        total += cell.total();
    }
    let q = errors as f64 / total as f64;
    let sigma_q = (q * (1.0 - q) / total as f64).sqrt();
    let h = entropy(q);
    ProtocolOutcome {
        estimate: Some(RateEstimate {
            q,
            sigma_q,
            c: None,
            sigma_c: None,
            eve_bits: h,
            rate: 1.0 - 2.0 * h,
            sigma_rate: secant_spread(bb84_key_rate, q, sigma_q, 0.0, 1.0),
        }),
        abort: None,
    }
}

/// Full analysis of one window.
pub fn analyze_window(tally: &TallyMatrix, formula: EveFormula) -> KeyRateReport {
    let corr = CorrelationSet::from_tally(tally);
    KeyRateReport {
        window_index: tally.window_index,
        formula,
        rfi: analyze_rfi(&corr, formula),
        bb84: analyze_bb84(tally),
    }
}

impl KeyRateReport {
    /// Checks the report's internal identities: every accepted rate equals
    /// `1 - h(Q) - E` to 1e-12, and no accepted `C` exceeds
    /// `2 + 3 sigma_C`.
    pub fn check_invariants(&self) -> Result<(), String> {
        for (name, outcome) in [("rfi", &self.rfi), ("bb84", &self.bb84)] {
            let Some(est) = outcome.estimate else {
                continue;
            };
            if outcome.is_aborted() {
                if est.rate > 0.0 {
                    return Err(format!(
                        "{name}: aborted window reports positive rate {}",
                        est.rate
                    ));
                }
                continue;
            }
            let expected = 1.0 - entropy(est.q) - est.eve_bits;
            if (est.rate - expected).abs() > 1e-12 {
                return Err(format!(
                    "{name}: rate {} differs from 1 - h(Q) - E = {expected}",
                    est.rate
                ));
            }
            if let (Some(c), Some(s)) = (est.c, est.sigma_c) {
                if c > 2.0 + C_OVERSHOOT_SIGMAS * s + C_ROUNDING_SLACK {
                    return Err(format!("{name}: C = {c} above 2 + 3 sigma ({s})"));
                }
            }
        }
        Ok(())
    }
}
