//! Greedy baseline decision policy: for each estimate, the actuation that
//! minimizes the context-averaged one-slot actuation cost.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::DecisionPolicy;
use crate::pomdp::DecPomdpModel;
use crate::solvers::markov::stationary_distribution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum ContextWeighting {
    Uniform,
    /// Stationary distribution of the context chain.
    #[default]
    Stationary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum TieBreak {
    #[default]
    HighestIndex,
    LowestIndex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct GreedyOptions {
    pub weighting: ContextWeighting,
    pub tie: TieBreak,
}

/// Costs closer than this are tied; stationary weights carry rounding noise.
pub const GREEDY_TIE_TOLERANCE: f64 = 1e-9;

pub fn context_weights(model: &DecPomdpModel, weighting: ContextWeighting) -> Result<Vec<f64>> {
    let v = model.alphabets().contexts();
    match weighting {
        ContextWeighting::Uniform => Ok(vec![1.0 / v as f64; v]),
        ContextWeighting::Stationary => {
            let rows = model.context().rows();
            let p = DMatrix::from_fn(v, v, |i, j| rows[i][j]);
            stationary_distribution(&p)
        }
    }
}

/// `E_Φ[[C1(x̂, Φ) − a·C2(a)]^+ + b·C3(a)]`, indexed `[estimate][action]`.
pub fn greedy_costs(model: &DecPomdpModel, weighting: ContextWeighting) -> Result<Vec<Vec<f64>>> {
    let weights = context_weights(model, weighting)?;
    let cost = model.cost();
    Ok((0..model.alphabets().states())
        .map(|xhat| {
            (0..model.alphabets().actions())
                .map(|a| {
                    weights
                        .iter()
                        .enumerate()
                        .map(|(phi, w)| w * cost.actuation_cost(xhat, phi, a))
                        .sum()
                })
                .collect()
        })
        .collect())
}

pub fn greedy_decision_policy(model: &DecPomdpModel, opts: &GreedyOptions) -> Result<DecisionPolicy> {
    let costs = greedy_costs(model, opts.weighting)?;
    Ok(DecisionPolicy::from_actions(
        costs
            .iter()
            .map(|row| {
                let mut best = 0;
                for (a, &c) in row.iter().enumerate().skip(1) {
                    let better = c < row[best] - GREEDY_TIE_TOLERANCE;
                    let tied = (c - row[best]).abs() <= GREEDY_TIE_TOLERANCE;
                    if better || (tied && opts.tie == TieBreak::HighestIndex) {
                        best = a;
                    }
                }
                best
            })
            .collect(),
    ))
}
