//! The shipped "paper-like" scenario.
//!
//! Alphabets and costs follow the reference setup: three semantic states,
//! two contexts, eleven actuation levels, `C1 = [[0, 20, 50], [0, 10, 20]]`
//! (rows are contexts), `C2(a_m) = 8m`, `C3(a_m) = m`.
//!
//! The source and context transition probabilities of the reference setup
//! are not published. The tables below are hand-chosen: every row has full
//! support, states and contexts are persistent, context `v0` escalates
//! faster than `v1`, and stronger actuation pulls the source one level down. They are not the reference instance.

use crate::model::{Alphabets, CostModel};
use crate::pomdp::{ChannelModel, ContextDynamics, DecPomdpModel, SourceDynamics};

pub const STATES: usize = 3;
pub const CONTEXTS: usize = 2;
pub const ACTIONS: usize = 11;
pub const GAIN_COEFFICIENT: f64 = 8.0;
pub const EXPENDITURE_COEFFICIENT: f64 = 1.0;
pub const DEFAULT_P_SUCCESS: f64 = 0.8;
pub const DEFAULT_SAMPLING_COST: f64 = 5.0;

pub fn inherent_costs() -> Vec<Vec<f64>> {
    vec![vec![0.0, 20.0, 50.0], vec![0.0, 10.0, 20.0]]
}

/// Unactuated drift, `[context][state]`.
const DRIFT: [[[f64; STATES]; STATES]; CONTEXTS] = [
    [[0.85, 0.1, 0.05], [0.05, 0.85, 0.1], [0.02, 0.08, 0.9]],
    [[0.9, 0.08, 0.02], [0.08, 0.87, 0.05], [0.05, 0.1, 0.85]],
];

/// Fully actuated behaviour, `[state]`.
const RECOVERY: [[f64; STATES]; STATES] = [[0.95, 0.04, 0.01], [0.3, 0.65, 0.05], [0.1, 0.4, 0.5]];

/// `p(u | s_i, v_k, a_m)`: blend of drift and recovery with weight `m / 10`,
/// rounded to 12 decimals so the tables print exactly.
pub fn source_row(i: usize, k: usize, m: usize) -> Vec<f64> {
    let alpha = m as f64 / (ACTIONS - 1) as f64;
    (0..STATES)
        .map(|u| {
            let p = (1.0 - alpha) * DRIFT[k][i][u] + alpha * RECOVERY[i][u];
            (p * 1e12).round() / 1e12
        })
        .collect()
}

pub fn context_rows() -> Vec<Vec<f64>> {
    vec![vec![0.95, 0.05], vec![0.05, 0.95]]
}

pub fn paper_like() -> DecPomdpModel {
    paper_like_with(DEFAULT_P_SUCCESS, DEFAULT_SAMPLING_COST)
}

pub fn paper_like_with(p_success: f64, sampling_cost: f64) -> DecPomdpModel {
    let alphabets = Alphabets::new(STATES, CONTEXTS, ACTIONS).expect("static alphabets");
    let source = SourceDynamics::from_fn(STATES, CONTEXTS, ACTIONS, source_row)
        .expect("static source rows are stochastic");
    let context = ContextDynamics::new(context_rows()).expect("static context rows");
    let channel = ChannelModel::new(p_success).expect("p_success in [0, 1]");
    let cost = CostModel::linear(
        inherent_costs(),
        ACTIONS,
        GAIN_COEFFICIENT,
        EXPENDITURE_COEFFICIENT,
        sampling_cost,
    );
    DecPomdpModel::new(alphabets, source, context, channel, cost).expect("static scenario is valid")
}
