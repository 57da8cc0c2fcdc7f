//! The sampler/actuator Dec-POMDP and the single-agent models it induces.
//!
//! Global state `W = (X, X̂, Φ)`. The sampler sees `W` in full, the actuator
//! only sees `X̂`. Given a joint action `(a_S, a_A)` the next state factors as
//!
//! ```text
//! p((u, x', r) | (i, j, k), (a_S, m)) = p_src(u | i, k, m) · p_ctx(r | k) · p_est(x' | i, j, a_S)
//! ```
//!
//! with `p_est` a point mass at `j` when idle and `p_S·1{x'=i} + (1−p_S)·1{x'=j}`
//! when sampling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    build_got_tensor, check_index, Alphabets, CostModel, DecisionPolicy, GlobalState, GoTensor,
    SamplingPolicy, StateIndex,
};

/// Tolerance on row sums of user-supplied probability tables.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

pub(crate) fn check_row(row: &[f64], name: impl FnOnce() -> String) -> Result<()> {
    let sum: f64 = row.iter().sum();
    let bad_entry = row.iter().any(|&p| !(0.0..=1.0).contains(&p) || p.is_nan());
    if bad_entry || (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
        return Err(Error::Stochasticity { row: name(), sum });
    }
    Ok(())
}

/// Controlled, context-dependent source kernel `p_src(u | i, k, m)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceDynamics {
    states: usize,
    contexts: usize,
    actions: usize,
    probs: Vec<f64>,
}

impl SourceDynamics {
    /// `rows[i][k][m]` is the distribution of the next state.
    pub fn new(rows: &[Vec<Vec<Vec<f64>>>]) -> Result<Self> {
        let states = rows.len();
        let contexts = rows.first().map_or(0, |r| r.len());
        let actions = rows
            .first()
            .and_then(|r| r.first())
            .map_or(0, |r| r.len());
        Self::from_fn(states, contexts, actions, |i, k, m| {
            rows.get(i)
                .and_then(|r| r.get(k))
                .and_then(|r| r.get(m))
                .cloned()
                .unwrap_or_default()
        })
    }

    pub fn from_fn(
        states: usize,
        contexts: usize,
        actions: usize,
        f: impl Fn(usize, usize, usize) -> Vec<f64>,
    ) -> Result<Self> {
        let mut probs = Vec::with_capacity(states * contexts * actions * states);
        for i in 0..states {
            for k in 0..contexts {
                for m in 0..actions {
                    let row = f(i, k, m);
                    if row.len() != states {
                        return Err(Error::ModelIncomplete(format!(
                            "source row (s{i}, v{k}, a{m}) has {} entries, expected {states}",
                            row.len()
                        )));
                    }
                    check_row(&row, || format!("source[{i}][{k}][{m}]"))?;
                    probs.extend_from_slice(&row);
                }
            }
        }
        Ok(Self {
            states,
            contexts,
            actions,
            probs,
        })
    }

    pub fn row(&self, x: usize, phi: usize, action: usize) -> &[f64] {
        let start = ((x * self.contexts + phi) * self.actions + action) * self.states;
        &self.probs[start..start + self.states]
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.states, self.contexts, self.actions)
    }

    /// Nested `[i][k][m][u]` copy of the table.
    pub fn to_nested(&self) -> Vec<Vec<Vec<Vec<f64>>>> {
        (0..self.states)
            .map(|i| {
                (0..self.contexts)
                    .map(|k| (0..self.actions).map(|m| self.row(i, k, m).to_vec()).collect())
                    .collect()
            })
            .collect()
    }
}

/// Context chain `p_ctx(r | k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextDynamics {
    rows: Vec<Vec<f64>>,
}

impl ContextDynamics {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        for (k, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::ModelIncomplete(format!(
                    "context row v{k} has {} entries, expected {n}",
                    row.len()
                )));
            }
            check_row(row, || format!("context[{k}]"))?;
        }
        Ok(Self { rows })
    }

    pub fn row(&self, phi: usize) -> &[f64] {
        &self.rows[phi]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// I.i.d. Bernoulli erasure channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    p_success: f64,
}

impl ChannelModel {
    pub fn new(p_success: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p_success) {
            return Err(Error::Parameter(format!(
                "success probability must lie in [0, 1], got {p_success}"
            )));
        }
        Ok(Self { p_success })
    }

    pub fn p_success(&self) -> f64 {
        self.p_success
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JointAction {
    pub sample: bool,
    pub actuation: usize,
}

impl JointAction {
    pub fn new(sample: bool, actuation: usize) -> Self {
        Self { sample, actuation }
    }
}

/// Distribution of the next estimate, as `(state, probability)` pairs with
/// positive mass.
pub fn estimate_kernel(
    x: usize,
    xhat: usize,
    sample: bool,
    channel: &ChannelModel,
) -> Vec<(usize, f64)> {
    let p = channel.p_success();
    if !sample || x == xhat || p == 0.0 {
        vec![(xhat, 1.0)]
    } else if p == 1.0 {
        vec![(x, 1.0)]
    } else {
        vec![(x, p), (xhat, 1.0 - p)]
    }
}

/// Tabular MDP with dense transitions, maximizing average reward.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMdp {
    states: usize,
    actions: usize,
    transitions: Vec<f64>,
    rewards: Vec<f64>,
}

impl FiniteMdp {
    pub fn new(states: usize, actions: usize, transitions: Vec<f64>, rewards: Vec<f64>) -> Result<Self> {
        if transitions.len() != states * actions * states || rewards.len() != states * actions {
            return Err(Error::ModelIncomplete(format!(
                "MDP tables do not match {states} states x {actions} actions"
            )));
        }
        let mdp = Self {
            states,
            actions,
            transitions,
            rewards,
        };
        for s in 0..states {
            for a in 0..actions {
                check_row(mdp.row(s, a), || format!("mdp[{s}][{a}]"))?;
            }
        }
        Ok(mdp)
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn row(&self, state: usize, action: usize) -> &[f64] {
        let start = (state * self.actions + action) * self.states;
        &self.transitions[start..start + self.states]
    }

    pub fn reward(&self, state: usize, action: usize) -> f64 {
        self.rewards[state * self.actions + action]
    }

    /// Same transitions, rewards replaced by `f(state, action)`.
    pub fn with_rewards(&self, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut rewards = Vec::with_capacity(self.rewards.len());
        for s in 0..self.states {
            for a in 0..self.actions {
                rewards.push(f(s, a));
            }
        }
        Self {
            rewards,
            ..self.clone()
        }
    }
}

/// Actuator-side memoryless POMDP for a fixed sampling policy: an MDP over
/// global states with actuation actions, plus the deterministic observation
/// (the estimate) of each state.
#[derive(Debug, Clone, PartialEq)]
pub struct MemorylessPomdp {
    pub mdp: FiniteMdp,
    pub observations: Vec<usize>,
    pub observation_count: usize,
}

impl MemorylessPomdp {
    pub fn observation(&self, state: usize) -> usize {
        self.observations[state]
    }
}

/// Validated Dec-POMDP.
#[derive(Debug, Clone, PartialEq)]
pub struct DecPomdpModel {
    alphabets: Alphabets,
    source: SourceDynamics,
    context: ContextDynamics,
    channel: ChannelModel,
    cost: CostModel,
    index: StateIndex,
}

impl DecPomdpModel {
    pub fn new(
        alphabets: Alphabets,
        source: SourceDynamics,
        context: ContextDynamics,
        channel: ChannelModel,
        cost: CostModel,
    ) -> Result<Self> {
        let (s, v, a) = source.dims();
        if (s, v, a) != (alphabets.states(), alphabets.contexts(), alphabets.actions()) {
            return Err(Error::ModelIncomplete(format!(
                "source dynamics are {s}x{v}x{a}, alphabets are {}x{}x{}",
                alphabets.states(),
                alphabets.contexts(),
                alphabets.actions()
            )));
        }
        if context.len() != alphabets.contexts() {
            return Err(Error::ModelIncomplete(format!(
                "context chain has {} states, expected {}",
                context.len(),
                alphabets.contexts()
            )));
        }
        // Surfaces shape errors in the cost tables.
        build_got_tensor(&cost, &DecisionPolicy::from_actions(vec![0; s]))?;
        let issues = crate::model::validate_cost_model(&cost, s, v, a);
        if let Some(first) = issues.first() {
            return Err(Error::Validation(first.to_string()));
        }
        Ok(Self {
            index: alphabets.state_index(),
            alphabets,
            source,
            context,
            channel,
            cost,
        })
    }

    pub fn alphabets(&self) -> &Alphabets {
        &self.alphabets
    }

    pub fn source(&self) -> &SourceDynamics {
        &self.source
    }

    pub fn context(&self) -> &ContextDynamics {
        &self.context
    }

    pub fn channel(&self) -> &ChannelModel {
        &self.channel
    }

    pub fn cost(&self) -> &CostModel {
        &self.cost
    }

    pub fn index(&self) -> &StateIndex {
        &self.index
    }

    pub fn global_states(&self) -> usize {
        self.index.len()
    }

    pub fn with_channel(&self, p_success: f64) -> Result<Self> {
        Ok(Self {
            channel: ChannelModel::new(p_success)?,
            ..self.clone()
        })
    }

    pub fn with_sampling_cost(&self, sampling_cost: f64) -> Result<Self> {
        if !(sampling_cost.is_finite() && sampling_cost >= 0.0) {
            return Err(Error::Parameter(format!(
                "sampling cost must be finite and nonnegative, got {sampling_cost}"
            )));
        }
        Ok(Self {
            cost: self.cost.with_sampling_cost(sampling_cost),
            ..self.clone()
        })
    }

    pub fn tensor(&self, policy: &DecisionPolicy) -> Result<GoTensor> {
        build_got_tensor(&self.cost, policy)
    }

    /// Adds `weight · p(· | w, a)` into `out`, indexed by global state.
    pub fn accumulate_transition(&self, w: GlobalState, a: JointAction, weight: f64, out: &mut [f64]) {
        let src = self.source.row(w.x, w.phi, a.actuation);
        let ctx = self.context.row(w.phi);
        for (xhat_next, p_est) in estimate_kernel(w.x, w.xhat, a.sample, &self.channel) {
            for (r, &p_ctx) in ctx.iter().enumerate() {
                if p_ctx == 0.0 {
                    continue;
                }
                for (u, &p_src) in src.iter().enumerate() {
                    if p_src == 0.0 {
                        continue;
                    }
                    let next = self.index.index(GlobalState::new(u, xhat_next, r));
                    out[next] += weight * p_est * p_ctx * p_src;
                }
            }
        }
    }

    /// Row of the joint transition function.
    pub fn transition_kernel(&self, w: GlobalState, a: JointAction) -> Result<Vec<f64>> {
        self.index.checked_index(w)?;
        check_index("actuation", a.actuation, self.alphabets.actions())?;
        let mut out = vec![0.0; self.index.len()];
        self.accumulate_transition(w, a, 1.0, &mut out);
        Ok(out)
    }

    /// Sampler observes the full state; the actuator observes the estimate.
    pub fn observation_fn(&self, w: GlobalState) -> (GlobalState, usize) {
        (w, w.xhat)
    }

    /// `−[C1 − a·C2(a_A)]^+ − b·C3(a_A) − C_S·a_S`.
    pub fn reward_for_action(&self, w: GlobalState, a: JointAction) -> f64 {
        let sampling = if a.sample { self.cost.sampling_cost } else { 0.0 };
        -self.cost.actuation_cost(w.x, w.phi, a.actuation) - sampling
    }

    /// `−GoT^{π_A}(x, φ, x̂) − C_S·a_S`.
    pub fn reward(&self, w: GlobalState, sample: bool, policy: &DecisionPolicy) -> f64 {
        self.reward_for_action(w, JointAction::new(sample, policy.action(w.xhat)))
    }

    /// Sampler MDP for a fixed decision policy (actions: 0 idle, 1 sample).
    pub fn induced_mdp(&self, policy: &DecisionPolicy) -> Result<FiniteMdp> {
        if policy.len() != self.alphabets.states() {
            return Err(Error::ModelIncomplete(format!(
                "decision policy covers {} estimates, expected {}",
                policy.len(),
                self.alphabets.states()
            )));
        }
        let n = self.index.len();
        let mut transitions = vec![0.0; n * 2 * n];
        let mut rewards = Vec::with_capacity(n * 2);
        for (s, w) in self.index.iter().enumerate() {
            // The actuator's observation is a point mass at x̂, so the sum
            // over observations has a single term.
            let (_, obs) = self.observation_fn(w);
            let actuation = policy.action(obs);
            for sample in [false, true] {
                let a = JointAction::new(sample, actuation);
                let start = (s * 2 + sample as usize) * n;
                self.accumulate_transition(w, a, 1.0, &mut transitions[start..start + n]);
                rewards.push(self.reward_for_action(w, a));
            }
        }
        FiniteMdp::new(n, 2, transitions, rewards)
    }

    /// Actuator POMDP for a fixed sampling policy.
    pub fn induced_pomdp(&self, sampling: &SamplingPolicy) -> Result<MemorylessPomdp> {
        let n = self.index.len();
        if sampling.len() != n {
            return Err(Error::ModelIncomplete(format!(
                "sampling policy covers {} states, expected {n}",
                sampling.len()
            )));
        }
        let m = self.alphabets.actions();
        let mut transitions = vec![0.0; n * m * n];
        let mut rewards = Vec::with_capacity(n * m);
        for (s, w) in self.index.iter().enumerate() {
            let sample = sampling.samples(s);
            for actuation in 0..m {
                let a = JointAction::new(sample, actuation);
                let start = (s * m + actuation) * n;
                self.accumulate_transition(w, a, 1.0, &mut transitions[start..start + n]);
                rewards.push(self.reward_for_action(w, a));
            }
        }
        Ok(MemorylessPomdp {
            mdp: FiniteMdp::new(n, m, transitions, rewards)?,
            observations: self.index.iter().map(|w| w.xhat).collect(),
            observation_count: self.alphabets.states(),
        })
    }

    /// Fully observed actuation MDP over `(X, Φ)` assuming a perfect estimate.
    /// State `(x, φ)` has index `x + |S|·φ`.
    pub fn heuristic_mdp(&self) -> Result<FiniteMdp> {
        let s_count = self.alphabets.states();
        let v_count = self.alphabets.contexts();
        let m_count = self.alphabets.actions();
        let n = s_count * v_count;
        let mut transitions = Vec::with_capacity(n * m_count * n);
        let mut rewards = Vec::with_capacity(n * m_count);
        for phi in 0..v_count {
            for x in 0..s_count {
                for m in 0..m_count {
                    let src = self.source.row(x, phi, m);
                    let ctx = self.context.row(phi);
                    for &p_ctx in ctx {
                        for &p_src in src {
                            transitions.push(p_src * p_ctx);
                        }
                    }
                    rewards.push(-self.cost.actuation_cost(x, phi, m));
                }
            }
        }
        // States were pushed with phi outer and x inner, matching x + |S|·φ.
        FiniteMdp::new(n, m_count, transitions, rewards)
    }
}
