//! Joint equilibrium search: alternate the sampler's exact best response
//! (RVI on the induced MDP) with the actuator's step-size policy iteration,
//! starting from a heuristic decision policy.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DecisionPolicy, SamplingPolicy};
use crate::pomdp::DecPomdpModel;
use crate::solvers::markov::stationary_distribution;
use crate::solvers::pi::{pi_step_size, PiOptions};
use crate::solvers::rvi::{rvi_solve, tie_tolerance, RviOptions};
use crate::solvers::{RestartOutcome, SolveReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JespOptions {
    pub rvi: RviOptions,
    pub pi: PiOptions,
    pub max_rounds: usize,
    /// Extra starts from uniformly random decision policies.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for JespOptions {
    fn default() -> Self {
        Self {
            rvi: RviOptions::default(),
            pi: PiOptions::default(),
            max_rounds: 100,
            restarts: 0,
            seed: 0,
        }
    }
}

/// Decision policy from the fully observed `(X, Φ)` MDP: solve it by RVI,
/// average its Q-values over the stationary context distribution, and take
/// the least-cost action per state.
pub fn heuristic_initial_policy(model: &DecPomdpModel, rvi: &RviOptions) -> Result<DecisionPolicy> {
    let mdp = model.heuristic_mdp()?;
    let solution = rvi_solve(&mdp, rvi)?;
    let h = &solution.values.values;
    let s = model.alphabets().states();
    let v = model.alphabets().contexts();
    let rows = model.context().rows();
    let mu = stationary_distribution(&DMatrix::from_fn(v, v, |i, j| rows[i][j]))?;
    let actions = model.alphabets().actions();
    let policy = (0..s)
        .map(|x| {
            let q: Vec<f64> = (0..actions)
                .map(|a| {
                    (0..v)
                        .map(|phi| {
                            let state = x + s * phi;
                            let future: f64 = mdp.row(state, a).iter().zip(h).map(|(p, hv)| p * hv).sum();
                            mu[phi] * (mdp.reward(state, a) + future)
                        })
                        .sum()
                })
                .collect();
            // Reward form: the least-cost action maximizes q.
            let mut best = 0;
            for a in 1..actions {
                if q[a] > q[best] + tie_tolerance(q[best]) {
                    best = a;
                }
            }
            best
        })
        .collect();
    Ok(DecisionPolicy::from_actions(policy))
}

struct Equilibrium {
    sampling: SamplingPolicy,
    decision: DecisionPolicy,
    average_reward: f64,
    residual: f64,
    rounds: usize,
    iterations: usize,
    converged: bool,
}

fn run_from(model: &DecPomdpModel, start: DecisionPolicy, opts: &JespOptions) -> Result<Equilibrium> {
    let mut decision = start;
    let mut previous = f64::NEG_INFINITY;
    let mut iterations = 0;
    let mut rounds = 0;
    loop {
        rounds += 1;
        let best_response = rvi_solve(&model.induced_mdp(&decision)?, &opts.rvi)?;
        iterations += best_response.iterations;
        let sampling = SamplingPolicy::from_actions(&best_response.policy);
        let theta = best_response.average_reward;
        let pomdp = model.induced_pomdp(&sampling)?;
        // A best response that leaves several recurrent classes gives the
        // actuator no well-defined stationary posterior; stop this start.
        let improved = match pi_step_size(&pomdp, &decision, &opts.pi) {
            Err(Error::Ergodicity { .. }) => {
                return Ok(Equilibrium {
                    sampling,
                    decision,
                    average_reward: theta,
                    residual: best_response.residual,
                    rounds,
                    iterations,
                    converged: false,
                })
            }
            other => other?,
        };
        iterations += improved.rounds;
        let unchanged = improved.policy == decision;
        let settled = (theta - previous).abs() < opts.rvi.epsilon
            && improved.average_reward - theta < opts.pi.epsilon;
        if unchanged || settled || rounds >= opts.max_rounds {
            return Ok(Equilibrium {
                sampling,
                decision,
                average_reward: theta,
                residual: best_response.residual,
                rounds,
                iterations,
                converged: unchanged || settled,
            });
        }
        previous = theta;
        decision = improved.policy;
    }
}

pub fn jesp(model: &DecPomdpModel, opts: &JespOptions) -> Result<SolveReport> {
    let mut starts = vec![heuristic_initial_policy(model, &opts.rvi)?];
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let s = model.alphabets().states();
    let m = model.alphabets().actions();
    for _ in 0..opts.restarts {
        starts.push(DecisionPolicy::from_actions((0..s).map(|_| rng.random_range(0..m)).collect()));
    }
    let mut best: Option<Equilibrium> = None;
    let mut restarts = Vec::with_capacity(starts.len());
    for start in starts {
        let eq = run_from(model, start.clone(), opts)?;
        restarts.push(RestartOutcome {
            initial_policy: start,
            decision_policy: eq.decision.clone(),
            average_reward: eq.average_reward,
            rounds: eq.rounds,
            converged: eq.converged,
        });
        let better = match &best {
            None => true,
            Some(b) => eq.average_reward > b.average_reward + tie_tolerance(b.average_reward),
        };
        if better {
            best = Some(eq);
        }
    }
    let best = best.expect("at least one start");
    Ok(SolveReport {
        sampling_policy: best.sampling,
        decision_policy: best.decision,
        average_reward: best.average_reward,
        iterations: best.iterations,
        residual: best.residual,
        converged: best.converged && best.residual < opts.rvi.epsilon,
        candidates_evaluated: restarts.len(),
        multichain_candidates: Vec::new(),
        restarts,
    })
}
