//! Policy iteration with step size for the actuator's memoryless POMDP.
//!
//! Each round evaluates the current soft decision rule exactly (stationary
//! distribution, relative rewards, posterior-averaged Q-values), then moves
//! every reachable observation's action distribution toward its greedy
//! action by the step `δ_k`. A step that lowers `η` is halved until it does
//! not. Once the loop stops, the soft rule is rounded to its argmax and
//! single-observation deviations are tried until none improves `η` by more
//! than `ε`. Hitting the round cap skips straight to rounding and is
//! reported through [`PiOutcome::converged`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DecisionPolicy;
use crate::pomdp::MemorylessPomdp;
use crate::solvers::chain::{pomdp_chain, q_tables, SoftDecisionPolicy};
use crate::solvers::markov::{analyze_chain, StationaryAnalysis};
use crate::solvers::rvi::tie_tolerance;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepSchedule {
    /// `δ_k = 1 / (k + 1)`.
    Harmonic,
    Constant(f64),
}

impl StepSchedule {
    pub fn step(&self, k: usize) -> f64 {
        match *self {
            StepSchedule::Harmonic => 1.0 / (k as f64 + 1.0),
            StepSchedule::Constant(d) => d,
        }
    }

    fn check(&self) -> Result<()> {
        match *self {
            StepSchedule::Constant(d) if !(d > 0.0 && d <= 1.0) => {
                Err(Error::Parameter(format!("constant step size must lie in (0, 1], got {d}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiOptions {
    pub epsilon: f64,
    pub max_rounds: usize,
    pub schedule: StepSchedule,
    /// Halvings tried before a non-improving step ends the loop.
    pub max_backtracks: usize,
}

impl Default for PiOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            max_rounds: 500,
            schedule: StepSchedule::Harmonic,
            max_backtracks: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiOutcome {
    pub policy: DecisionPolicy,
    /// `η` of the returned deterministic policy.
    pub average_reward: f64,
    pub rounds: usize,
    /// `η` after every accepted soft iterate, starting with the initial policy.
    pub trace: Vec<f64>,
    /// False when the soft loop hit `max_rounds`; the rounded policy is
    /// still polished to a single-deviation local optimum.
    pub converged: bool,
}

fn evaluate(pomdp: &MemorylessPomdp, soft: &SoftDecisionPolicy) -> Result<StationaryAnalysis> {
    let (p, r) = pomdp_chain(pomdp, soft)?;
    analyze_chain(&p, r)
}

fn evaluate_deterministic(pomdp: &MemorylessPomdp, policy: &DecisionPolicy) -> Result<StationaryAnalysis> {
    evaluate(pomdp, &SoftDecisionPolicy::deterministic(policy, pomdp.mdp.actions()))
}

fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (a, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] + tie_tolerance(values[best]) {
            best = a;
        }
    }
    best
}

/// Greedy action per observation, `None` where the observation is unreachable.
fn greedy_targets(pomdp: &MemorylessPomdp, analysis: &StationaryAnalysis) -> Vec<Option<usize>> {
    q_tables(pomdp, analysis)
        .q_obs
        .iter()
        .map(|q| q.as_deref().map(argmax_lowest))
        .collect()
}

fn is_greedy_fixed_point(pomdp: &MemorylessPomdp, policy: &DecisionPolicy) -> Result<bool> {
    let analysis = evaluate_deterministic(pomdp, policy)?;
    let tables = q_tables(pomdp, &analysis);
    Ok(tables.q_obs.iter().enumerate().all(|(o, q)| match q {
        None => true,
        Some(q) => {
            let current = q[policy.action(o)];
            q.iter().all(|&v| v <= current + tie_tolerance(current))
        }
    }))
}

/// Coordinate ascent over single-observation deviations.
fn polish(
    pomdp: &MemorylessPomdp,
    mut policy: DecisionPolicy,
    mut eta: f64,
    epsilon: f64,
) -> Result<(DecisionPolicy, f64)> {
    let actions = pomdp.mdp.actions();
    loop {
        let mut improved = false;
        for o in 0..pomdp.observation_count {
            for a in 0..actions {
                if a == policy.action(o) {
                    continue;
                }
                let candidate = policy.with_action(o, a);
                let value = evaluate_deterministic(pomdp, &candidate)?.average_reward;
                if value > eta + epsilon {
                    policy = candidate;
                    eta = value;
                    improved = true;
                }
            }
        }
        if !improved {
            return Ok((policy, eta));
        }
    }
}

pub fn pi_step_size(pomdp: &MemorylessPomdp, initial: &DecisionPolicy, opts: &PiOptions) -> Result<PiOutcome> {
    if opts.epsilon.is_nan() || opts.epsilon <= 0.0 {
        return Err(Error::Parameter(format!("epsilon must be positive, got {}", opts.epsilon)));
    }
    opts.schedule.check()?;
    if initial.len() != pomdp.observation_count {
        return Err(Error::ModelIncomplete(format!(
            "decision policy covers {} observations, expected {}",
            initial.len(),
            pomdp.observation_count
        )));
    }
    let actions = pomdp.mdp.actions();
    if let Some(&bad) = initial.actions().iter().find(|&&a| a >= actions) {
        return Err(Error::Index {
            what: "actuation",
            index: bad,
            size: actions,
        });
    }

    let mut soft = SoftDecisionPolicy::deterministic(initial, actions);
    let mut analysis = evaluate(pomdp, &soft)?;
    let initial_eta = analysis.average_reward;
    let mut trace = vec![initial_eta];
    let mut rounds = 0;
    let mut settled = false;
    for k in 1..=opts.max_rounds {
        rounds = k;
        let targets = greedy_targets(pomdp, &analysis);
        let mut delta = opts.schedule.step(k);
        let mut accepted = None;
        for _ in 0..=opts.max_backtracks {
            let candidate = soft.blend_toward(&targets, delta);
            let next = evaluate(pomdp, &candidate)?;
            if next.average_reward >= analysis.average_reward - tie_tolerance(analysis.average_reward) {
                accepted = Some((candidate, next));
                break;
            }
            delta /= 2.0;
        }
        let Some((candidate, next)) = accepted else {
            settled = true;
            break;
        };
        let change = (next.average_reward - analysis.average_reward).abs();
        soft = candidate;
        analysis = next;
        trace.push(analysis.average_reward);
        if change < opts.epsilon || is_greedy_fixed_point(pomdp, &soft.argmax())? {
            settled = true;
            break;
        }
    }
    let rounded = soft.argmax();
    let rounded_eta = evaluate_deterministic(pomdp, &rounded)?.average_reward;
    let (start, start_eta) = if rounded_eta >= initial_eta {
        (rounded, rounded_eta)
    } else {
        (initial.clone(), initial_eta)
    };
    let (policy, eta) = polish(pomdp, start, start_eta, opts.epsilon)?;
    // Improvements below ε are noise; keep the caller's policy.
    let (policy, average_reward) = if eta > initial_eta + opts.epsilon {
        (policy, eta)
    } else {
        (initial.clone(), initial_eta)
    };
    Ok(PiOutcome {
        policy,
        average_reward,
        rounds,
        trace,
        converged: settled,
    })
}
