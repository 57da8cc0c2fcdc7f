//! Per-slot freshness and goal metrics, and the cost breakdown shared by the
//! analytic and simulated evaluators.

use serde::Serialize;

/// Long-run cost split into its sources. The four fields sum to the total.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct CostBreakdown {
    /// `E[C1(X, Φ)]`, the cost with no actuation at all.
    pub inherent: f64,
    /// `E[[C1 − a·C2]^+ − C1]`, nonpositive: what actuation removes.
    pub actuation_gain_offset: f64,
    /// `E[b·C3]`.
    pub actuation_expenditure: f64,
    /// `E[C_S·a_S]`.
    pub sampling: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.inherent + self.actuation_gain_offset + self.actuation_expenditure + self.sampling
    }

    /// Transmission, actuation and residual inherent cost.
    pub fn decomposition(&self) -> Decomposition {
        Decomposition {
            sampling: self.sampling,
            actuation: self.actuation_expenditure,
            inherent: self.inherent + self.actuation_gain_offset,
        }
    }
}

/// Three-way split whose parts sum to the average cost.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Decomposition {
    pub sampling: f64,
    pub actuation: f64,
    /// Inherent cost left after actuation (the ramp term).
    pub inherent: f64,
}

impl Decomposition {
    pub fn total(&self) -> f64 {
        self.sampling + self.actuation + self.inherent
    }
}

/// Age counters carried from slot to slot.
///
/// At the start of slot `t`: `aoi` is `t − U(t)` with a delivery at `t − 1`
/// giving 1; `aos` is the number of slots since source and estimate last
/// agreed (0 when they agree now); `aoci` counts slots since the last
/// delivery that changed the estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AgeState {
    pub aoi: u64,
    pub aos: u64,
    pub aoci: u64,
    pub last_source: usize,
}

impl AgeState {
    pub fn new(aoi: u64, x: usize, xhat: usize) -> Self {
        Self {
            aoi,
            aos: if x == xhat { 0 } else { 1 },
            aoci: 1,
            last_source: x,
        }
    }

    /// AoII with `f` the identity and `g` the mismatch indicator.
    pub fn aoii(&self, x: usize, xhat: usize) -> u64 {
        if x != xhat {
            self.aos
        } else {
            0
        }
    }

    /// Advances to the next slot. `changed` means a delivered update moved
    /// the estimate; `aos` is recomputed from the next slot's pair.
    pub fn advance(&mut self, x: usize, delivered: bool, changed: bool, x_next: usize, xhat_next: usize) {
        self.aoi = if delivered { 1 } else { self.aoi + 1 };
        self.aoci = if changed { 1 } else { self.aoci + 1 };
        self.aos = if x_next == xhat_next { 0 } else { self.aos + 1 };
        self.last_source = x;
    }
}
