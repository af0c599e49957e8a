//! Qubit geometry on the Bloch sphere: the three Pauli measurement bases,
//! the six polarization states a client can prepare, rotations of the
//! reference frame about the Z axis and Born-rule outcome probabilities.
//!
//! States are real unit 3-vectors. Every measurement in the protocol is a
//! projective measurement along a Pauli axis, so no complex amplitudes are
//! needed.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A Pauli measurement / preparation basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Basis {
    /// Diagonal / anti-diagonal polarization.
    X,
    /// Right / left circular polarization.
    Y,
    /// Horizontal / vertical polarization. Preserved by the fibre.
    Z,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::X, Basis::Y, Basis::Z];

    /// Unit Bloch vector of the `+1` eigenstate.
    pub fn axis(self) -> BlochVector {
        match self {
            Basis::X => BlochVector::new(1.0, 0.0, 0.0),
            Basis::Y => BlochVector::new(0.0, 1.0, 0.0),
            Basis::Z => BlochVector::new(0.0, 0.0, 1.0),
        }
    }

    /// Dense index used by tally tables (X=0, Y=1, Z=2).
    pub fn index(self) -> usize {
        match self {
            Basis::X => 0,
            Basis::Y => 1,
            Basis::Z => 2,
        }
    }

    pub fn from_index(index: usize) -> Option<Basis> {
        Basis::ALL.get(index).copied()
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Basis::X => "X",
            Basis::Y => "Y",
            Basis::Z => "Z",
        };
        f.write_str(s)
    }
}

/// A point on (or inside) the Bloch sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochVector(pub [f64; 3]);

impl BlochVector {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        BlochVector([x, y, z])
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }

    pub fn y(&self) -> f64 {
        self.0[1]
    }

    pub fn z(&self) -> f64 {
        self.0[2]
    }

    pub fn dot(&self, other: &BlochVector) -> f64 {
        self.0[0] * other.0[0] + self.0[1] * other.0[1] + self.0[2] * other.0[2]
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Component along the `+1` eigenvector of `basis`.
    pub fn component(&self, basis: Basis) -> f64 {
        self.0[basis.index()]
    }
}

/// One of the six Pauli eigenstates {D, A, R, L, H, V}.
///
/// Bit 0 is the `+1` eigenvector of the basis and bit 1 the `-1`
/// eigenvector, so D/R/H carry bit 0 and A/L/V carry bit 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PolarizationState {
    basis: Basis,
    bit: u8,
}

impl PolarizationState {
    pub const D: PolarizationState = PolarizationState {
        basis: Basis::X,
        bit: 0,
    };
    pub const A: PolarizationState = PolarizationState {
        basis: Basis::X,
        bit: 1,
    };
    pub const R: PolarizationState = PolarizationState {
        basis: Basis::Y,
        bit: 0,
    };
    pub const L: PolarizationState = PolarizationState {
        basis: Basis::Y,
        bit: 1,
    };
    pub const H: PolarizationState = PolarizationState {
        basis: Basis::Z,
        bit: 0,
    };
    pub const V: PolarizationState = PolarizationState {
        basis: Basis::Z,
        bit: 1,
    };

    /// All six states, ordered by (basis, bit).
    pub const ALL: [PolarizationState; 6] = [Self::D, Self::A, Self::R, Self::L, Self::H, Self::V];

    /// Returns `None` unless `bit` is 0 or 1.
    pub fn new(basis: Basis, bit: u8) -> Option<Self> {
        (bit <= 1).then_some(PolarizationState { basis, bit })
    }

    /// Maps 0..6 onto [`PolarizationState::ALL`].
    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn bit(&self) -> u8 {
        self.bit
    }

    pub fn bloch(&self) -> BlochVector {
        let sign = if self.bit == 0 { 1.0 } else { -1.0 };
        let mut v = [0.0; 3];
        v[self.basis.index()] = sign;
        BlochVector(v)
    }

    pub fn label(&self) -> &'static str {
        match (self.basis, self.bit) {
            (Basis::X, 0) => "D",
            (Basis::X, _) => "A",
            (Basis::Y, 0) => "R",
            (Basis::Y, _) => "L",
            (Basis::Z, 0) => "H",
            (Basis::Z, _) => "V",
        }
    }
}

impl fmt::Display for PolarizationState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Misalignment between client and server frames: an active rotation of
/// the state by `beta` radians about the Z axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameRotation {
    pub beta: f64,
}

impl FrameRotation {
    pub fn new(beta: f64) -> Self {
        FrameRotation { beta }
    }

    /// (x, y, z) -> (x cos b - y sin b, x sin b + y cos b, z). The z
    /// component is copied, never recomputed.
    pub fn apply(&self, v: BlochVector) -> BlochVector {
        let (s, c) = self.beta.sin_cos();
        BlochVector([v.0[0] * c - v.0[1] * s, v.0[0] * s + v.0[1] * c, v.0[2]])
    }
}

/// Bloch vector of `state` after transit through a frame rotated by `rot`.
pub fn rotate(state: PolarizationState, rot: FrameRotation) -> BlochVector {
    rot.apply(state.bloch())
}

/// Probability that a measurement along `measure_basis` yields outcome 0
/// (the `+1` eigenvector).
pub fn born_probability(bloch: BlochVector, measure_basis: Basis) -> f64 {
    ((1.0 + bloch.component(measure_basis)) * 0.5).clamp(0.0, 1.0)
}

/// Noiseless expectation value of `<A B>` when the client prepares in
/// `prep_basis`, the server measures in `meas_basis` and the frames differ
/// by `beta`.
///
/// Closed form, written independently of [`rotate`] so it can serve as an
/// oracle for simulated correlations.
pub fn ideal_correlation(prep_basis: Basis, meas_basis: Basis, beta: f64) -> f64 {
    use Basis::*;
    match (prep_basis, meas_basis) {
        (Z, Z) => 1.0,
        (X, X) | (Y, Y) => beta.cos(),
        (X, Y) => beta.sin(),
        (Y, X) => -beta.sin(),
        _ => 0.0,
    }
}
