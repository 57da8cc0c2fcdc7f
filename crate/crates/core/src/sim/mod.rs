//! Closed-loop simulation, per-slot metrics, and grid studies.

pub mod metrics;
pub mod simulate;
pub mod sweep;

pub use metrics::{AgeState, CostBreakdown, Decomposition};
pub use simulate::{batch_means_stderr, simulate_closed_loop, SimOptions, SimOutput, SimSummary, TraceRecord};
pub use sweep::{
    compare_policies, cost_decomposition, optimality_gap, score_rule, sweep_rate_vs_cost, CellComparison,
    CellOutcome, CoDesign, CompareOptions, Evaluation, GapCell, GridSpec, PolicyFamily, SweepResult,
};
