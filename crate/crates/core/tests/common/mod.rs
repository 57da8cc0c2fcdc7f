//! Random model generators and independent reference computations shared by
//! the integration tests.

#![allow(dead_code)]

use gotensor::model::{Alphabets, CostModel, DecisionPolicy, GlobalState, SamplingPolicy};
use gotensor::pomdp::{ChannelModel, ContextDynamics, DecPomdpModel, SourceDynamics};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Strictly positive probability row.
pub fn random_row(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Model with full-support dynamics, random costs and `p_S` drawn from `p_range`.
pub fn random_model(
    rng: &mut impl Rng,
    states: usize,
    contexts: usize,
    actions: usize,
    p_range: std::ops::RangeInclusive<f64>,
) -> DecPomdpModel {
    let rows: Vec<Vec<Vec<Vec<f64>>>> = (0..states)
        .map(|_| {
            (0..contexts)
                .map(|_| (0..actions).map(|_| random_row(rng, states)).collect())
                .collect()
        })
        .collect();
    let context: Vec<Vec<f64>> = (0..contexts).map(|_| random_row(rng, contexts)).collect();
    let cost = CostModel {
        inherent: (0..contexts)
            .map(|_| (0..states).map(|_| rng.random_range(0.0..10.0)).collect())
            .collect(),
        gain: (0..actions).map(|_| rng.random_range(0.0..5.0)).collect(),
        expenditure: (0..actions).map(|_| rng.random_range(0.0..2.0)).collect(),
        gain_weight: rng.random_range(0.5..1.5),
        expenditure_weight: rng.random_range(0.5..1.5),
        sampling_cost: rng.random_range(0.0..3.0),
    };
    DecPomdpModel::new(
        Alphabets::new(states, contexts, actions).unwrap(),
        SourceDynamics::new(&rows).unwrap(),
        ContextDynamics::new(context).unwrap(),
        ChannelModel::new(rng.random_range(p_range)).unwrap(),
        cost,
    )
    .unwrap()
}

/// Global-state index with `x` fastest, then `x̂`, then `φ`.
pub fn flat(states: usize, x: usize, xhat: usize, phi: usize) -> usize {
    x + states * (xhat + states * phi)
}

pub fn all_states(states: usize, contexts: usize) -> Vec<GlobalState> {
    let mut out = Vec::new();
    for phi in 0..contexts {
        for xhat in 0..states {
            for x in 0..states {
                out.push(GlobalState::new(x, xhat, phi));
            }
        }
    }
    out
}

/// Per-slot cost written out from the cost tables.
pub fn slot_cost(model: &DecPomdpModel, w: GlobalState, sample: bool, action: usize) -> f64 {
    let c = model.cost();
    let ramp = (c.inherent[w.phi][w.x] - c.gain_weight * c.gain[action]).max(0.0);
    ramp + c.expenditure_weight * c.expenditure[action] + if sample { c.sampling_cost } else { 0.0 }
}

/// Joint chain and per-state cost assembled by marginalizing the channel
/// outcome explicitly.
pub fn joint_chain(
    model: &DecPomdpModel,
    sampling: &SamplingPolicy,
    decision: &DecisionPolicy,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let a = model.alphabets();
    let (s, v) = (a.states(), a.contexts());
    let states = all_states(s, v);
    let mut p = vec![vec![0.0; states.len()]; states.len()];
    let mut cost = vec![0.0; states.len()];
    for w in &states {
        let i = flat(s, w.x, w.xhat, w.phi);
        let sample = sampling.samples(i);
        let action = decision.action(w.xhat);
        cost[i] = slot_cost(model, *w, sample, action);
        marginalize(model, *w, sample, action, &mut p[i]);
    }
    (p, cost)
}

/// Adds `Σ_h p(h) p_src(x'|x,φ,a) p_ctx(φ'|φ) 1{x̂' = update(h)}` into `row`.
pub fn marginalize(model: &DecPomdpModel, w: GlobalState, sample: bool, action: usize, row: &mut [f64]) {
    let a = model.alphabets();
    let (s, v) = (a.states(), a.contexts());
    let p_s = model.channel().p_success();
    let outcomes: Vec<(bool, f64)> = if sample {
        vec![(true, p_s), (false, 1.0 - p_s)]
    } else {
        vec![(false, 1.0)]
    };
    for (h, ph) in outcomes {
        let xhat_next = if h { w.x } else { w.xhat };
        for x_next in 0..s {
            for phi_next in 0..v {
                let src = model.source().row(w.x, w.phi, action)[x_next];
                let ctx = model.context().row(w.phi)[phi_next];
                row[flat(s, x_next, xhat_next, phi_next)] += ph * src * ctx;
            }
        }
    }
}

fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

/// Cesàro limit of `P` approximated by `((I + P) / 2)^(2^squarings)`.
pub fn cesaro_limit(p: &[Vec<f64>], squarings: usize) -> Vec<Vec<f64>> {
    let n = p.len();
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| 0.5 * p[i][j] + if i == j { 0.5 } else { 0.0 }).collect())
        .collect();
    for _ in 0..squarings {
        m = mat_mul(&m, &m);
        // Squaring also squares any rounding drift in the row sums.
        for row in &mut m {
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= total);
        }
    }
    m
}

/// Long-run average cost from each start state.
pub fn gains(p: &[Vec<f64>], cost: &[f64]) -> Vec<f64> {
    cesaro_limit(p, 60)
        .iter()
        .map(|row| row.iter().zip(cost).map(|(a, b)| a * b).sum())
        .collect()
}

/// Every deterministic decision policy over `states` estimates.
pub fn all_decisions(states: usize, actions: usize) -> Vec<DecisionPolicy> {
    let count = actions.pow(states as u32);
    (0..count).map(|r| DecisionPolicy::from_rank(r, states, actions)).collect()
}

/// Every deterministic sampling policy over `n` global states.
pub fn all_samplings(n: usize) -> Vec<SamplingPolicy> {
    (0..1usize << n)
        .map(|bits| SamplingPolicy::new((0..n).map(|i| bits >> i & 1 == 1).collect()))
        .collect()
}
