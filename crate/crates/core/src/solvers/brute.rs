//! Exhaustive search over deterministic decision policies, each paired with
//! its RVI-optimal sampling policy.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DecisionPolicy, SamplingPolicy};
use crate::pomdp::DecPomdpModel;
use crate::solvers::chain::{policy_chain, SoftDecisionPolicy};
use crate::solvers::markov::recurrent_classes;
use crate::solvers::rvi::{rvi_solve, tie_tolerance, RviOptions, RviSolution};
use crate::solvers::SolveReport;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BruteForceOptions {
    pub rvi: RviOptions,
    /// Largest number of decision policies to enumerate.
    pub budget: usize,
}

impl Default for BruteForceOptions {
    fn default() -> Self {
        Self {
            rvi: RviOptions::default(),
            budget: 100_000,
        }
    }
}

/// Number of deterministic decision policies, `|A_A|^{|S|}`, or `None` if it
/// overflows.
pub fn candidate_count(actions: usize, observations: usize) -> Option<usize> {
    u32::try_from(observations).ok().and_then(|o| actions.checked_pow(o))
}

struct Candidate {
    rank: usize,
    solution: RviSolution,
    multichain: bool,
}

fn evaluate_candidate(model: &DecPomdpModel, rank: usize, opts: &RviOptions) -> Result<Candidate> {
    let alphabets = model.alphabets();
    let policy = DecisionPolicy::from_rank(rank, alphabets.states(), alphabets.actions());
    let solution = rvi_solve(&model.induced_mdp(&policy)?, opts)?;
    let sampling = SamplingPolicy::from_actions(&solution.policy);
    let soft = SoftDecisionPolicy::deterministic(&policy, alphabets.actions());
    let (p, _) = policy_chain(model, &sampling, &soft)?;
    let multichain = recurrent_classes(&p).len() > 1;
    Ok(Candidate {
        rank,
        solution,
        multichain,
    })
}

/// RVI-optimal sampling policy for one fixed decision policy, reported in
/// the same shape as [`brute_force_joint`] with a single candidate.
pub fn solve_fixed_decision(model: &DecPomdpModel, decision: &DecisionPolicy, opts: &RviOptions) -> Result<SolveReport> {
    let alphabets = model.alphabets();
    if decision.len() != alphabets.states() || decision.actions().iter().any(|&a| a >= alphabets.actions()) {
        return Err(Error::ModelIncomplete(format!("decision policy {decision} does not fit the model")));
    }
    let c = evaluate_candidate(model, decision.rank(alphabets.actions()), opts)?;
    Ok(SolveReport {
        sampling_policy: SamplingPolicy::from_actions(&c.solution.policy),
        decision_policy: decision.clone(),
        average_reward: c.solution.average_reward,
        iterations: c.solution.iterations,
        residual: c.solution.residual,
        converged: c.solution.residual < opts.epsilon,
        candidates_evaluated: 1,
        multichain_candidates: if c.multichain { vec![c.rank] } else { Vec::new() },
        restarts: Vec::new(),
    })
}

pub fn brute_force_joint(model: &DecPomdpModel, opts: &BruteForceOptions) -> Result<SolveReport> {
    let alphabets = model.alphabets();
    let actions = alphabets.actions();
    let observations = alphabets.states();
    let count = match candidate_count(actions, observations) {
        Some(n) if n <= opts.budget => n,
        _ => {
            return Err(Error::Budget {
                actions,
                observations,
                candidates: (actions as f64).powi(observations as i32),
                budget: opts.budget,
            })
        }
    };
    let candidates: Vec<Candidate> = (0..count)
        .into_par_iter()
        .map(|rank| evaluate_candidate(model, rank, &opts.rvi))
        .collect::<Result<_>>()?;

    // Sequential reduction in rank order: the result does not depend on
    // which worker finished first.
    let mut best = &candidates[0];
    for c in &candidates[1..] {
        let incumbent = best.solution.average_reward;
        if c.solution.average_reward > incumbent + tie_tolerance(incumbent) {
            best = c;
        }
    }
    let multichain: Vec<usize> = candidates.iter().filter(|c| c.multichain).map(|c| c.rank).collect();
    let iterations = candidates.iter().map(|c| c.solution.iterations).sum();
    Ok(SolveReport {
        sampling_policy: SamplingPolicy::from_actions(&best.solution.policy),
        decision_policy: DecisionPolicy::from_rank(best.rank, observations, actions),
        average_reward: best.solution.average_reward,
        iterations,
        residual: best.solution.residual,
        converged: best.solution.residual < opts.rvi.epsilon,
        candidates_evaluated: count,
        multichain_candidates: multichain,
        restarts: Vec::new(),
    })
}
