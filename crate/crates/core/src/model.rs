//! Alphabets, cost model, policies and the goal-oriented tensor.
//!
//! The tensor maps a triple `(X, Φ, X̂)` of source state, context and receiver
//! estimate to the instantaneous goal cost
//!
//! ```text
//! L(x, φ, x̂) = [C1(x, φ) − a·C2(π_A(x̂))]^+ + b·C3(π_A(x̂))
//! ```
//!
//! where `C1` is the inherent cost of a status/context pair, `C2` the gain of
//! an actuation, `C3` its resource expenditure and `π_A` the decision policy.
//! Classic freshness and distortion metrics are special cases of the same
//! table layout (see [`degenerate_tensor`]).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sizes of the semantic, context and actuation alphabets. Symbols are dense
/// 0-based indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabets {
    states: usize,
    contexts: usize,
    actions: usize,
}

impl Alphabets {
    pub fn new(states: usize, contexts: usize, actions: usize) -> Result<Self> {
        if states < 2 {
            return Err(Error::Validation(format!(
                "need at least 2 semantic states, got {states}"
            )));
        }
        if contexts < 1 {
            return Err(Error::Validation("need at least 1 context state".into()));
        }
        if actions < 1 {
            return Err(Error::Validation("need at least 1 actuation action".into()));
        }
        Ok(Self {
            states,
            contexts,
            actions,
        })
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn contexts(&self) -> usize {
        self.contexts
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    /// `|S|·|S|·|V|`, the number of global states `(X, X̂, Φ)`.
    pub fn global_states(&self) -> usize {
        self.states * self.states * self.contexts
    }

    pub fn state_index(&self) -> StateIndex {
        StateIndex {
            states: self.states,
            contexts: self.contexts,
        }
    }
}

/// Global system state `W = (X, X̂, Φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GlobalState {
    pub x: usize,
    pub xhat: usize,
    pub phi: usize,
}

impl GlobalState {
    pub fn new(x: usize, xhat: usize, phi: usize) -> Self {
        Self { x, xhat, phi }
    }

    pub fn synchronized(&self) -> bool {
        self.x == self.xhat
    }
}

impl fmt::Display for GlobalState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(s{}, s{}, v{})", self.x, self.xhat, self.phi)
    }
}

/// Bijection between [`GlobalState`] and `0..|S|²|V|`.
///
/// Lexicographic with `x` fastest, then `xhat`, then `phi`:
/// `index = x + |S|·(xhat + |S|·phi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateIndex {
    states: usize,
    contexts: usize,
}

impl StateIndex {
    pub fn len(&self) -> usize {
        self.states * self.states * self.contexts
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn contexts(&self) -> usize {
        self.contexts
    }

    pub fn index(&self, w: GlobalState) -> usize {
        debug_assert!(w.x < self.states && w.xhat < self.states && w.phi < self.contexts);
        w.x + self.states * (w.xhat + self.states * w.phi)
    }

    pub fn checked_index(&self, w: GlobalState) -> Result<usize> {
        check_index("x", w.x, self.states)?;
        check_index("xhat", w.xhat, self.states)?;
        check_index("phi", w.phi, self.contexts)?;
        Ok(self.index(w))
    }

    pub fn state(&self, index: usize) -> GlobalState {
        let x = index % self.states;
        let rest = index / self.states;
        GlobalState {
            x,
            xhat: rest % self.states,
            phi: rest / self.states,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = GlobalState> + '_ {
        (0..self.len()).map(|i| self.state(i))
    }
}

pub(crate) fn check_index(what: &'static str, index: usize, size: usize) -> Result<()> {
    if index < size {
        Ok(())
    } else {
        Err(Error::Index { what, index, size })
    }
}

/// Deterministic decision policy `π_A`: estimate index → actuation index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DecisionPolicy(Vec<usize>);

impl DecisionPolicy {
    pub fn new(actions: Vec<usize>, alphabets: &Alphabets) -> Result<Self> {
        if actions.len() != alphabets.states() {
            return Err(Error::ModelIncomplete(format!(
                "decision policy covers {} estimates, expected {}",
                actions.len(),
                alphabets.states()
            )));
        }
        for &a in &actions {
            check_index("actuation", a, alphabets.actions())?;
        }
        Ok(Self(actions))
    }

    /// Builds a policy without range checks against an alphabet.
    pub fn from_actions(actions: Vec<usize>) -> Self {
        Self(actions)
    }

    /// The policy with lexicographic rank `rank` among `actions^states`
    /// policies; the first estimate is the most significant digit.
    pub fn from_rank(mut rank: usize, states: usize, actions: usize) -> Self {
        let mut digits = vec![0; states];
        for slot in digits.iter_mut().rev() {
            *slot = rank % actions;
            rank /= actions;
        }
        Self(digits)
    }

    pub fn rank(&self, actions: usize) -> usize {
        self.0.iter().fold(0, |acc, &a| acc * actions + a)
    }

    pub fn action(&self, estimate: usize) -> usize {
        self.0[estimate]
    }

    pub fn actions(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn with_action(&self, estimate: usize, action: usize) -> Self {
        let mut out = self.clone();
        out.0[estimate] = action;
        out
    }
}

impl fmt::Display for DecisionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "a{a}")?;
        }
        write!(f, "]")
    }
}

/// Deterministic stationary sampling policy `π_S` over global states, stored
/// in [`StateIndex`] order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SamplingPolicy(Vec<bool>);

impl SamplingPolicy {
    pub fn new(decisions: Vec<bool>) -> Self {
        Self(decisions)
    }

    pub fn from_fn(index: &StateIndex, f: impl Fn(GlobalState) -> bool) -> Self {
        Self(index.iter().map(f).collect())
    }

    pub fn constant(index: &StateIndex, sample: bool) -> Self {
        Self(vec![sample; index.len()])
    }

    /// From RVI action indices (0 idle, 1 sample).
    pub fn from_actions(actions: &[usize]) -> Self {
        Self(actions.iter().map(|&a| a == 1).collect())
    }

    pub fn samples(&self, state_index: usize) -> bool {
        self.0[state_index]
    }

    pub fn decisions(&self) -> &[bool] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Fraction of global states in which the policy samples.
    pub fn density(&self) -> f64 {
        self.0.iter().filter(|&&s| s).count() as f64 / self.0.len().max(1) as f64
    }
}

/// Inherent, gain and expenditure cost tables plus their weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    /// `C1`, indexed `[context][state]`.
    pub inherent: Vec<Vec<f64>>,
    /// `C2`, indexed by actuation.
    pub gain: Vec<f64>,
    /// `C3`, indexed by actuation.
    pub expenditure: Vec<f64>,
    pub gain_weight: f64,
    pub expenditure_weight: f64,
    pub sampling_cost: f64,
}

impl CostModel {
    /// Linear actuation costs `C2(a_m) = c_gain·m`, `C3(a_m) = c_expenditure·m`
    /// with unit weights.
    pub fn linear(
        inherent: Vec<Vec<f64>>,
        actions: usize,
        c_gain: f64,
        c_expenditure: f64,
        sampling_cost: f64,
    ) -> Self {
        Self {
            inherent,
            gain: (0..actions).map(|m| c_gain * m as f64).collect(),
            expenditure: (0..actions).map(|m| c_expenditure * m as f64).collect(),
            gain_weight: 1.0,
            expenditure_weight: 1.0,
            sampling_cost,
        }
    }

    pub fn with_sampling_cost(&self, sampling_cost: f64) -> Self {
        Self {
            sampling_cost,
            ..self.clone()
        }
    }

    pub fn inherent(&self, x: usize, phi: usize) -> f64 {
        self.inherent[phi][x]
    }

    /// `[C1(x, φ) − a·C2(action)]^+`.
    pub fn ramp_term(&self, x: usize, phi: usize, action: usize) -> f64 {
        (self.inherent(x, phi) - self.gain_weight * self.gain[action]).max(0.0)
    }

    /// `b·C3(action)`.
    pub fn expenditure_term(&self, action: usize) -> f64 {
        self.expenditure_weight * self.expenditure[action]
    }

    /// Goal cost of taking `action` while the source is at `(x, φ)`.
    pub fn actuation_cost(&self, x: usize, phi: usize, action: usize) -> f64 {
        self.ramp_term(x, phi, action) + self.expenditure_term(action)
    }

    fn check_shape(&self, states: usize, contexts: usize, actions: usize) -> Result<()> {
        if self.inherent.len() != contexts {
            return Err(Error::ModelIncomplete(format!(
                "C1 has {} context rows, expected {contexts}",
                self.inherent.len()
            )));
        }
        for (k, row) in self.inherent.iter().enumerate() {
            if row.len() != states {
                return Err(Error::ModelIncomplete(format!(
                    "C1 row v{k} has {} entries, expected {states}",
                    row.len()
                )));
            }
        }
        if self.gain.len() != actions {
            return Err(Error::ModelIncomplete(format!(
                "C2 has {} entries, expected {actions}",
                self.gain.len()
            )));
        }
        if self.expenditure.len() != actions {
            return Err(Error::ModelIncomplete(format!(
                "C3 has {} entries, expected {actions}",
                self.expenditure.len()
            )));
        }
        Ok(())
    }
}

/// A single problem reported by [`validate_cost_model`].
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: String,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    Missing { expected: usize, found: usize },
    Negative(f64),
    NonFinite(f64),
    EmptyAlphabet,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ViolationKind::Missing { expected, found } => {
                write!(f, "{}: expected {expected} entries, found {found}", self.field)
            }
            ViolationKind::Negative(v) => write!(f, "{}: negative value {v}", self.field),
            ViolationKind::NonFinite(v) => write!(f, "{}: non-finite value {v}", self.field),
            ViolationKind::EmptyAlphabet => write!(f, "{}: alphabet is empty", self.field),
        }
    }
}

fn check_value(out: &mut Vec<Violation>, field: String, v: f64) {
    if !v.is_finite() {
        out.push(Violation {
            field,
            kind: ViolationKind::NonFinite(v),
        });
    } else if v < 0.0 {
        out.push(Violation {
            field,
            kind: ViolationKind::Negative(v),
        });
    }
}

/// Diagnoses a cost model against alphabet sizes `(states, contexts, actions)`.
///
/// Takes raw sizes rather than [`Alphabets`] so that empty alphabets can be
/// reported instead of rejected at construction.
pub fn validate_cost_model(
    cost: &CostModel,
    states: usize,
    contexts: usize,
    actions: usize,
) -> Vec<Violation> {
    let mut out = Vec::new();
    for (name, size) in [("states", states), ("contexts", contexts), ("actions", actions)] {
        if size == 0 {
            out.push(Violation {
                field: format!("alphabets.{name}"),
                kind: ViolationKind::EmptyAlphabet,
            });
        }
    }
    if cost.inherent.len() != contexts {
        out.push(Violation {
            field: "cost.inherent".into(),
            kind: ViolationKind::Missing {
                expected: contexts,
                found: cost.inherent.len(),
            },
        });
    }
    for (k, row) in cost.inherent.iter().enumerate() {
        if row.len() != states {
            out.push(Violation {
                field: format!("cost.inherent[{k}]"),
                kind: ViolationKind::Missing {
                    expected: states,
                    found: row.len(),
                },
            });
        }
        for (i, &v) in row.iter().enumerate() {
            check_value(&mut out, format!("cost.inherent[{k}][{i}]"), v);
        }
    }
    for (name, table) in [("gain", &cost.gain), ("expenditure", &cost.expenditure)] {
        if table.len() != actions {
            out.push(Violation {
                field: format!("cost.{name}"),
                kind: ViolationKind::Missing {
                    expected: actions,
                    found: table.len(),
                },
            });
        }
        for (m, &v) in table.iter().enumerate() {
            check_value(&mut out, format!("cost.{name}[{m}]"), v);
        }
    }
    check_value(&mut out, "cost.gain_weight".into(), cost.gain_weight);
    check_value(&mut out, "cost.expenditure_weight".into(), cost.expenditure_weight);
    check_value(&mut out, "cost.sampling_cost".into(), cost.sampling_cost);
    out
}

/// Dense `S × V × S` table indexed `(x, φ, x̂)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoTensor {
    states: usize,
    contexts: usize,
    values: Vec<f64>,
    decision_policy: Option<DecisionPolicy>,
}

impl GoTensor {
    fn from_fn(states: usize, contexts: usize, f: impl Fn(usize, usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(states * contexts * states);
        for x in 0..states {
            for phi in 0..contexts {
                for xhat in 0..states {
                    values.push(f(x, phi, xhat));
                }
            }
        }
        Self {
            states,
            contexts,
            values,
            decision_policy: None,
        }
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn contexts(&self) -> usize {
        self.contexts
    }

    pub fn decision_policy(&self) -> Option<&DecisionPolicy> {
        self.decision_policy.as_ref()
    }

    /// Raw values in `(x, φ, x̂)` row-major order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Unchecked lookup; panics on out-of-range indices.
    pub fn get(&self, x: usize, phi: usize, xhat: usize) -> f64 {
        self.values[(x * self.contexts + phi) * self.states + xhat]
    }

    /// The `|S| × |S|` slice at context `phi`, indexed `[x][x̂]`.
    pub fn context_slice(&self, phi: usize) -> Vec<Vec<f64>> {
        (0..self.states)
            .map(|x| (0..self.states).map(|xhat| self.get(x, phi, xhat)).collect())
            .collect()
    }
}

/// Builds the goal-oriented tensor for a cost model and decision policy.
pub fn build_got_tensor(cost: &CostModel, policy: &DecisionPolicy) -> Result<GoTensor> {
    let states = policy.len();
    let contexts = cost.inherent.len();
    let actions = cost.gain.len();
    if states == 0 || contexts == 0 {
        return Err(Error::ModelIncomplete("empty alphabet".into()));
    }
    cost.check_shape(states, contexts, actions)?;
    for &a in policy.actions() {
        check_index("actuation", a, actions)?;
    }
    let mut tensor = GoTensor::from_fn(states, contexts, |x, phi, xhat| {
        cost.actuation_cost(x, phi, policy.action(xhat))
    });
    tensor.decision_policy = Some(policy.clone());
    Ok(tensor)
}

/// Checked table lookup.
pub fn got_value(tensor: &GoTensor, x: usize, phi: usize, xhat: usize) -> Result<f64> {
    check_index("x", x, tensor.states)?;
    check_index("phi", phi, tensor.contexts)?;
    check_index("xhat", xhat, tensor.states)?;
    Ok(tensor.get(x, phi, xhat))
}

/// Numeric embedding of the semantic alphabet used by distortion metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    /// `s_i ↦ i`.
    pub fn identity(states: usize) -> Self {
        Self((0..states).map(|i| i as f64).collect())
    }

    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn value(&self, state: usize) -> f64 {
        self.0[state]
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn squared_error(&self, x: usize, xhat: usize) -> f64 {
        let d = self.0[x] - self.0[xhat];
        d * d
    }
}

/// Classic metrics expressed in the tensor layout.
#[derive(Debug, Clone, PartialEq)]
pub enum Degeneration {
    /// Entry equals the context value (the context axis carries AoI).
    Aoi,
    /// Context value times the mismatch indicator.
    Aoii,
    /// Squared embedding distance; context ignored.
    Mse,
    /// Context weight times squared embedding distance.
    Uoi,
    /// Zero-diagonal cost matrix `C[x][x̂]`; context ignored.
    CostOfActuationError(Vec<Vec<f64>>),
}

/// Shape and axis interpretation for [`degenerate_tensor`].
#[derive(Debug, Clone, PartialEq)]
pub struct DegenerationParams {
    pub states: usize,
    /// Numeric value carried by each context index.
    pub context_values: Vec<f64>,
    /// Defaults to [`Embedding::identity`].
    pub embedding: Option<Embedding>,
}

pub fn degenerate_tensor(kind: &Degeneration, params: &DegenerationParams) -> Result<GoTensor> {
    let states = params.states;
    let contexts = params.context_values.len();
    if states == 0 || contexts == 0 {
        return Err(Error::Validation("degenerate tensor needs nonempty axes".into()));
    }
    let embedding = params
        .embedding
        .clone()
        .unwrap_or_else(|| Embedding::identity(states));
    if embedding.values().len() != states {
        return Err(Error::Validation(format!(
            "embedding has {} values, expected {states}",
            embedding.values().len()
        )));
    }
    let phi = &params.context_values;
    let tensor = match kind {
        Degeneration::Aoi => GoTensor::from_fn(states, contexts, |_, k, _| phi[k]),
        Degeneration::Aoii => GoTensor::from_fn(states, contexts, |x, k, xhat| {
            if x != xhat {
                phi[k]
            } else {
                0.0
            }
        }),
        Degeneration::Mse => {
            GoTensor::from_fn(states, contexts, |x, _, xhat| embedding.squared_error(x, xhat))
        }
        Degeneration::Uoi => GoTensor::from_fn(states, contexts, |x, k, xhat| {
            phi[k] * embedding.squared_error(x, xhat)
        }),
        Degeneration::CostOfActuationError(matrix) => {
            if matrix.len() != states || matrix.iter().any(|row| row.len() != states) {
                return Err(Error::Validation(format!(
                    "actuation-error matrix must be {states}x{states}"
                )));
            }
            for (i, row) in matrix.iter().enumerate() {
                if row[i] != 0.0 {
                    return Err(Error::Validation(format!(
                        "actuation-error matrix has nonzero diagonal entry C[{i}][{i}] = {}",
                        row[i]
                    )));
                }
                if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                    return Err(Error::Validation(format!(
                        "actuation-error matrix row {i} has non-finite entry {v}"
                    )));
                }
            }
            GoTensor::from_fn(states, contexts, |x, _, xhat| matrix[x][xhat])
        }
    };
    Ok(tensor)
}
