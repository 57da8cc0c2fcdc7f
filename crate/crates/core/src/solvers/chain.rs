//! Joint-policy Markov chains and the actuator's Q-functions.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{DecisionPolicy, SamplingPolicy};
use crate::pomdp::{check_row, DecPomdpModel, MemorylessPomdp};
use crate::solvers::markov::{analyze_chain, StationaryAnalysis};

/// Stochastic memoryless decision rule: one action distribution per
/// observation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SoftDecisionPolicy {
    rows: Vec<Vec<f64>>,
}

impl SoftDecisionPolicy {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        for (o, row) in rows.iter().enumerate() {
            check_row(row, || format!("decision[{o}]"))?;
        }
        Ok(Self { rows })
    }

    pub fn deterministic(policy: &DecisionPolicy, actions: usize) -> Self {
        let rows = policy
            .actions()
            .iter()
            .map(|&a| {
                let mut row = vec![0.0; actions];
                row[a] = 1.0;
                row
            })
            .collect();
        Self { rows }
    }

    pub fn row(&self, observation: usize) -> &[f64] {
        &self.rows[observation]
    }

    pub fn observations(&self) -> usize {
        self.rows.len()
    }

    /// Moves each listed observation's row toward a point mass at `target`
    /// by `step`, then projects back onto the simplex.
    pub fn blend_toward(&self, target: &[Option<usize>], step: f64) -> Self {
        let rows = self
            .rows
            .iter()
            .zip(target)
            .map(|(row, t)| match t {
                None => row.clone(),
                Some(a) => {
                    let mut next: Vec<f64> = row
                        .iter()
                        .enumerate()
                        .map(|(i, &p)| {
                            let onehot = if i == *a { 1.0 } else { 0.0 };
                            (p + step * (onehot - p)).clamp(0.0, 1.0)
                        })
                        .collect();
                    let sum: f64 = next.iter().sum();
                    for p in &mut next {
                        *p /= sum;
                    }
                    next
                }
            })
            .collect();
        Self { rows }
    }

    /// Most probable action per observation, lowest index on ties.
    pub fn argmax(&self) -> DecisionPolicy {
        DecisionPolicy::from_actions(
            self.rows
                .iter()
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .fold((0, f64::NEG_INFINITY), |(ba, bp), (a, &p)| {
                            if p > bp {
                                (a, p)
                            } else {
                                (ba, bp)
                            }
                        })
                        .0
                })
                .collect(),
        )
    }
}

/// Chain and expected reward of the actuator POMDP under a (soft) decision
/// rule: `P[w][w'] = Σ_a π(a | o(w)) p(w' | w, a)`, `r̄[w] = Σ_a π(a | o(w)) R(w, a)`.
pub fn pomdp_chain(pomdp: &MemorylessPomdp, decision: &SoftDecisionPolicy) -> Result<(DMatrix<f64>, Vec<f64>)> {
    if decision.observations() != pomdp.observation_count {
        return Err(Error::ModelIncomplete(format!(
            "decision rule covers {} observations, expected {}",
            decision.observations(),
            pomdp.observation_count
        )));
    }
    let mdp = &pomdp.mdp;
    let n = mdp.states();
    let mut p = DMatrix::<f64>::zeros(n, n);
    let mut r = vec![0.0; n];
    for w in 0..n {
        let row = decision.row(pomdp.observation(w));
        if row.len() != mdp.actions() {
            return Err(Error::ModelIncomplete(format!(
                "decision row has {} actions, expected {}",
                row.len(),
                mdp.actions()
            )));
        }
        for (a, &prob) in row.iter().enumerate() {
            if prob == 0.0 {
                continue;
            }
            r[w] += prob * mdp.reward(w, a);
            for (w2, &t) in mdp.row(w, a).iter().enumerate() {
                p[(w, w2)] += prob * t;
            }
        }
    }
    Ok((p, r))
}

/// Chain and expected reward under a sampling policy and a (soft) decision
/// rule.
pub fn policy_chain(
    model: &DecPomdpModel,
    sampling: &SamplingPolicy,
    decision: &SoftDecisionPolicy,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    pomdp_chain(&model.induced_pomdp(sampling)?, decision)
}

/// Evaluates a deterministic policy pair by stationary analysis.
pub fn evaluate_pair(
    model: &DecPomdpModel,
    sampling: &SamplingPolicy,
    decision: &DecisionPolicy,
) -> Result<StationaryAnalysis> {
    let soft = SoftDecisionPolicy::deterministic(decision, model.alphabets().actions());
    let (p, r) = policy_chain(model, sampling, &soft)?;
    analyze_chain(&p, r)
}

/// Observation marginals below this count as unreachable.
pub const REACHABILITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QTables {
    /// `Q(w, a)`, indexed `[state][action]`.
    pub q_global: Vec<Vec<f64>>,
    /// `Q(o, a)`; `None` for observations with zero stationary mass.
    pub q_obs: Vec<Option<Vec<f64>>>,
    /// `p(w | o)`; `None` for unreachable observations.
    pub posterior: Vec<Option<Vec<f64>>>,
}

impl QTables {
    pub fn observation_q(&self, observation: usize) -> Result<&[f64]> {
        self.q_obs
            .get(observation)
            .and_then(|q| q.as_deref())
            .ok_or(Error::UnreachableObservation(observation))
    }
}

/// `Q(w, a) = R(w, a) − η + Σ p(w'|w, a) g(w')` and its posterior average
/// `Q(o, a) = Σ_w p(w | o) Q(w, a)` with `p(w | o) ∝ μ(w) p(o | w)`.
pub fn q_tables(pomdp: &MemorylessPomdp, analysis: &StationaryAnalysis) -> QTables {
    let mdp = &pomdp.mdp;
    let n = mdp.states();
    let m = mdp.actions();
    let g = &analysis.relative_reward;
    let eta = analysis.average_reward;
    let q_global: Vec<Vec<f64>> = (0..n)
        .map(|w| {
            (0..m)
                .map(|a| {
                    let future: f64 = mdp.row(w, a).iter().zip(g).map(|(p, gv)| p * gv).sum();
                    mdp.reward(w, a) - eta + future
                })
                .collect()
        })
        .collect();
    let mut posterior = Vec::with_capacity(pomdp.observation_count);
    let mut q_obs = Vec::with_capacity(pomdp.observation_count);
    for o in 0..pomdp.observation_count {
        let weights: Vec<f64> = (0..n)
            .map(|w| {
                if pomdp.observation(w) == o {
                    analysis.distribution[w]
                } else {
                    0.0
                }
            })
            .collect();
        let marginal: f64 = weights.iter().sum();
        if marginal <= REACHABILITY_FLOOR {
            posterior.push(None);
            q_obs.push(None);
            continue;
        }
        let post: Vec<f64> = weights.iter().map(|v| v / marginal).collect();
        let q: Vec<f64> = (0..m)
            .map(|a| (0..n).map(|w| post[w] * q_global[w][a]).sum())
            .collect();
        posterior.push(Some(post));
        q_obs.push(Some(q));
    }
    QTables {
        q_global,
        q_obs,
        posterior,
    }
}
