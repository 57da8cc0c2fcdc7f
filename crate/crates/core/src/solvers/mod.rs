//! Average-reward solvers for the joint sampling/actuation problem.

use serde::Serialize;

use crate::model::{DecisionPolicy, SamplingPolicy};

pub mod brute;
pub mod chain;
pub mod greedy;
pub mod jesp;
pub mod markov;
pub mod pi;
pub mod rvi;

pub use brute::{brute_force_joint, candidate_count, solve_fixed_decision, BruteForceOptions};
pub use chain::{evaluate_pair, policy_chain, pomdp_chain, q_tables, QTables, SoftDecisionPolicy};
pub use greedy::{greedy_costs, greedy_decision_policy, ContextWeighting, GreedyOptions, TieBreak};
pub use jesp::{heuristic_initial_policy, jesp, JespOptions};
pub use markov::{
    analyze_chain, average_reward, limiting_distribution, poisson_residual, recurrent_classes, relative_reward,
    stationary_distribution, StationaryAnalysis,
};
pub use pi::{pi_step_size, PiOptions, PiOutcome, StepSchedule};
pub use rvi::{rvi_solve, RviOptions, RviSolution, ValueTable};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestartOutcome {
    pub initial_policy: DecisionPolicy,
    pub decision_policy: DecisionPolicy,
    pub average_reward: f64,
    pub rounds: usize,
    pub converged: bool,
}

/// Result of a joint solve. `average_reward` is the long-run reward, the
/// negative of the long-run average cost.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub sampling_policy: SamplingPolicy,
    pub decision_policy: DecisionPolicy,
    pub average_reward: f64,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub candidates_evaluated: usize,
    /// Ranks of enumerated decision policies whose joint chain has more than
    /// one recurrent class.
    pub multichain_candidates: Vec<usize>,
    pub restarts: Vec<RestartOutcome>,
}

impl SolveReport {
    pub fn average_cost(&self) -> f64 {
        -self.average_reward
    }
}
