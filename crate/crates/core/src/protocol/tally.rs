use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::bloch::{Basis, PolarizationState};

/// Counts `n[b_a][a][b_b][b]` of client prepared bit `a` in basis `b_a`
/// against server outcome `b` in basis `b_b`.
pub type Counts = [[[[u64; 2]; 3]; 2]; 3];

/// Detection counts of one estimation window.
///
/// Merging is element-wise addition and keeps the left-hand window index,
/// so partial tallies of one window combine in any order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TallyMatrix {
    pub counts: Counts,
    pub discarded_no_click: u64,
    pub double_clicks: u64,
    pub window_index: u64,
}

/// The four counts of one (prepared basis, measured basis) cell, labelled
/// by (client bit, server outcome).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CellCounts {
    pub n00: u64,
    pub n01: u64,
    pub n10: u64,
    pub n11: u64,
}

impl CellCounts {
    pub fn total(&self) -> u64 {
        self.n00 + self.n01 + self.n10 + self.n11
    }

    pub fn agreements(&self) -> u64 {
        self.n00 + self.n11
    }

    pub fn disagreements(&self) -> u64 {
        self.n01 + self.n10
    }
}

impl TallyMatrix {
    pub fn empty(window_index: u64) -> Self {
        TallyMatrix {
            window_index,
            ..Default::default()
        }
    }

    /// Records one sifted detection.
    #[inline]
    pub fn record(&mut self, prep: PolarizationState, meas: Basis, outcome: u8) {
        debug_assert!(outcome <= 1);
        self.counts[prep.basis().index()][prep.bit() as usize][meas.index()][outcome as usize] += 1;
    }

    pub fn count(&self, prep_basis: Basis, prep_bit: u8, meas_basis: Basis, outcome: u8) -> u64 {
        self.counts[prep_basis.index()][prep_bit as usize][meas_basis.index()][outcome as usize]
    }

    pub fn cell(&self, prep_basis: Basis, meas_basis: Basis) -> CellCounts {
        let c = &self.counts[prep_basis.index()];
        let m = meas_basis.index();
        CellCounts {
            n00: c[0][m][0],
            n01: c[0][m][1],
            n10: c[1][m][0],
            n11: c[1][m][1],
        }
    }

    /// Total sifted events, double clicks included.
    pub fn sifted(&self) -> u64 {
        self.counts.iter().flatten().flatten().flatten().sum()
    }

    /// Pulses accounted for: sifted events plus no-click discards.
    pub fn pulses(&self) -> u64 {
        self.sifted() + self.discarded_no_click
    }

    pub fn merge(&mut self, other: &TallyMatrix) {
        for (a, b) in self
            .counts
            .iter_mut()
            .flatten()
            .flatten()
            .flatten()
            .zip(other.counts.iter().flatten().flatten().flatten())
        {
            *a += *b;
        }
        self.discarded_no_click += other.discarded_no_click;
        self.double_clicks += other.double_clicks;
    }
}

impl AddAssign<&TallyMatrix> for TallyMatrix {
    fn add_assign(&mut self, rhs: &TallyMatrix) {
        self.merge(rhs);
    }
}

impl Add for TallyMatrix {
    type Output = TallyMatrix;

    fn add(mut self, rhs: TallyMatrix) -> TallyMatrix {
        self.merge(&rhs);
        self
    }
}
