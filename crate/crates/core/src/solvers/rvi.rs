//! Relative value iteration for average-reward MDPs.
//!
//! Each sweep applies the Bellman operator `T` and re-anchors the values at a
//! reference state so that `h(w_ref) = 0`. Iteration stops when the span of
//! `T h − h` drops below `ε`; the gain estimate is then `(T h)(w_ref)` and
//! the Bellman residual `max_w |θ + h(w) − (T h)(w)|` is bounded by that
//! span.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pomdp::FiniteMdp;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RviOptions {
    pub epsilon: f64,
    pub max_iterations: usize,
    pub reference_state: usize,
    /// Optional aperiodicity transform `P ← τP + (1 − τ)I` with `τ ∈ (0, 1)`.
    /// Gains and optimal policies are unchanged; relative values scale by `1/τ`.
    pub aperiodicity: Option<f64>,
}

impl Default for RviOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            max_iterations: 10_000,
            reference_state: 0,
            aperiodicity: None,
        }
    }
}

/// Relative values anchored at `reference_state`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueTable {
    pub values: Vec<f64>,
    pub reference_state: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RviSolution {
    /// Greedy action per state.
    pub policy: Vec<usize>,
    /// Long-run average reward `θ*`.
    pub average_reward: f64,
    pub values: ValueTable,
    pub iterations: usize,
    /// Bellman residual at the returned values.
    pub residual: f64,
}

/// Relative tolerance under which two action values count as tied; ties go to
/// the lowest action index.
pub(crate) fn tie_tolerance(scale: f64) -> f64 {
    1e-12 * (1.0 + scale.abs())
}

/// Applies the (optionally transformed) Bellman operator to `h`, writing the
/// maximized values into `out` and the argmax into `policy`.
fn bellman(mdp: &FiniteMdp, tau: f64, h: &[f64], out: &mut [f64], policy: &mut [usize]) {
    let n = mdp.states();
    for s in 0..n {
        let mut best = f64::NEG_INFINITY;
        let mut best_a = 0;
        for a in 0..mdp.actions() {
            let row = mdp.row(s, a);
            let mut q = 0.0;
            for (p, v) in row.iter().zip(h) {
                q += p * v;
            }
            let q = mdp.reward(s, a) + tau * q + (1.0 - tau) * h[s];
            if a == 0 || q > best + tie_tolerance(best) {
                best = q;
                best_a = a;
            }
        }
        out[s] = best;
        policy[s] = best_a;
    }
}

pub fn rvi_solve(mdp: &FiniteMdp, opts: &RviOptions) -> Result<RviSolution> {
    let n = mdp.states();
    if opts.reference_state >= n {
        return Err(Error::Index {
            what: "reference state",
            index: opts.reference_state,
            size: n,
        });
    }
    if opts.epsilon.is_nan() || opts.epsilon <= 0.0 {
        return Err(Error::Parameter(format!("epsilon must be positive, got {}", opts.epsilon)));
    }
    let tau = match opts.aperiodicity {
        None => 1.0,
        Some(t) if t > 0.0 && t < 1.0 => t,
        Some(t) => {
            return Err(Error::Parameter(format!(
                "aperiodicity weight must lie in (0, 1), got {t}"
            )))
        }
    };
    let r = opts.reference_state;
    let mut h = vec![0.0; n];
    let mut h_prev = vec![0.0; n];
    let mut th = vec![0.0; n];
    let mut policy = vec![0; n];
    let mut last_span = f64::INFINITY;
    for k in 1..=opts.max_iterations {
        bellman(mdp, tau, &h, &mut th, &mut policy);
        let (lo, hi) = th
            .iter()
            .zip(&h)
            .map(|(t, v)| t - v)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
        let span = hi - lo;
        last_span = span;
        if span < opts.epsilon {
            let gain = th[r] - h[r];
            let residual = th
                .iter()
                .zip(&h)
                .map(|(t, v)| (gain + v - t).abs())
                .fold(0.0, f64::max);
            return Ok(RviSolution {
                policy,
                average_reward: gain,
                values: ValueTable {
                    values: h,
                    reference_state: r,
                },
                iterations: k,
                residual,
            });
        }
        let anchor = th[r];
        let mut step = 0.0f64;
        let mut two_step = 0.0f64;
        for s in 0..n {
            let next = th[s] - anchor;
            step = step.max((next - h[s]).abs());
            two_step = two_step.max((next - h_prev[s]).abs());
            h_prev[s] = h[s];
            h[s] = next;
        }
        if k > 2 && two_step < opts.epsilon / 10.0 && step >= opts.epsilon {
            return Err(Error::Periodic { iterations: k });
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iterations,
        residual: last_span,
    })
}
