//! Baseline sampling rules, each paired with a fixed decision policy, and
//! their exact evaluation on a memory-augmented Markov chain.
//!
//! A rule may carry a finite memory (a phase counter, a truncated AoI or the
//! previous source state). Pairing the global state with that memory gives a
//! finite chain whose Cesàro limit from the initial state yields the long-run
//! cost of the rule.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DecisionPolicy, Embedding, GlobalState, SamplingPolicy};
use crate::pomdp::DecPomdpModel;
use crate::sim::metrics::CostBreakdown;
use crate::solvers::markov::limiting_distribution;
use crate::solvers::rvi::{rvi_solve, RviOptions};

/// Default upper end of the age-threshold sweep.
pub const DEFAULT_THRESHOLD_MAX: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitialConditions {
    pub x: usize,
    pub xhat: usize,
    pub phi: usize,
    pub aoi: usize,
}

impl Default for InitialConditions {
    fn default() -> Self {
        Self {
            x: 0,
            xhat: 0,
            phi: 0,
            aoi: 1,
        }
    }
}

impl InitialConditions {
    pub fn state(&self) -> GlobalState {
        GlobalState::new(self.x, self.xhat, self.phi)
    }
}

/// A sampling rule with finite memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SamplingRule {
    /// Memoryless rule on the global state.
    Stationary(SamplingPolicy),
    /// Sample iff `t mod period = 0`; memory is the phase.
    Uniform { period: usize },
    /// Sample iff `AoI > threshold`; memory is `min(AoI, threshold + 1) − 1`.
    AgeThreshold { threshold: usize },
    /// Sample iff the source moved since the previous slot; memory is the
    /// previous source state.
    ChangeAware,
}

impl SamplingRule {
    pub fn uniform(period: usize) -> Result<Self> {
        if period == 0 {
            return Err(Error::Parameter("uniform period must be at least 1".into()));
        }
        Ok(SamplingRule::Uniform { period })
    }

    pub fn label(&self) -> &'static str {
        match self {
            SamplingRule::Stationary(_) => "stationary",
            SamplingRule::Uniform { .. } => "uniform",
            SamplingRule::AgeThreshold { .. } => "age-aware",
            SamplingRule::ChangeAware => "change-aware",
        }
    }

    pub fn memory_size(&self, states: usize) -> usize {
        match *self {
            SamplingRule::Stationary(_) => 1,
            SamplingRule::Uniform { period } => period,
            SamplingRule::AgeThreshold { threshold } => threshold + 1,
            SamplingRule::ChangeAware => states,
        }
    }

    pub fn initial_memory(&self, init: &InitialConditions) -> usize {
        match *self {
            SamplingRule::Stationary(_) | SamplingRule::Uniform { .. } => 0,
            SamplingRule::AgeThreshold { threshold } => init.aoi.clamp(1, threshold + 1) - 1,
            // No history at the first slot: pretend the source did not move.
            SamplingRule::ChangeAware => init.x,
        }
    }

    pub fn decide(&self, memory: usize, w: GlobalState, state_index: usize) -> bool {
        match self {
            SamplingRule::Stationary(policy) => policy.samples(state_index),
            SamplingRule::Uniform { .. } => memory == 0,
            SamplingRule::AgeThreshold { threshold } => memory + 1 > *threshold,
            SamplingRule::ChangeAware => w.x != memory,
        }
    }

    pub fn next_memory(&self, memory: usize, w: GlobalState, delivered: bool) -> usize {
        match *self {
            SamplingRule::Stationary(_) => 0,
            SamplingRule::Uniform { period } => (memory + 1) % period,
            SamplingRule::AgeThreshold { threshold } => {
                if delivered {
                    0
                } else {
                    (memory + 1).min(threshold)
                }
            }
            SamplingRule::ChangeAware => w.x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BenchmarkKind {
    Uniform { period: usize },
    AgeAware { threshold: usize },
    ChangeAware,
    MseOptimal,
    AoiiOptimal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub kind: BenchmarkKind,
    pub decision_policy: DecisionPolicy,
}

impl BenchmarkSpec {
    pub fn label(&self) -> &'static str {
        match self.kind {
            BenchmarkKind::Uniform { .. } => "uniform",
            BenchmarkKind::AgeAware { .. } => "age-aware",
            BenchmarkKind::ChangeAware => "change-aware",
            BenchmarkKind::MseOptimal => "mse-optimal",
            BenchmarkKind::AoiiOptimal => "aoii-optimal",
        }
    }

    pub fn rule(&self, model: &DecPomdpModel, embedding: &Embedding, rvi: &RviOptions) -> Result<SamplingRule> {
        Ok(match self.kind {
            BenchmarkKind::Uniform { period } => SamplingRule::uniform(period)?,
            BenchmarkKind::AgeAware { threshold } => SamplingRule::AgeThreshold { threshold },
            BenchmarkKind::ChangeAware => SamplingRule::ChangeAware,
            BenchmarkKind::MseOptimal => {
                SamplingRule::Stationary(mse_optimal_policy(model, &self.decision_policy, embedding, rvi)?)
            }
            BenchmarkKind::AoiiOptimal => SamplingRule::Stationary(aoii_optimal_policy(model)),
        })
    }
}

/// Sample iff the estimate is stale.
pub fn aoii_optimal_policy(model: &DecPomdpModel) -> SamplingPolicy {
    SamplingPolicy::from_fn(model.index(), |w| w.x != w.xhat)
}

/// RVI-optimal sampling for reconstruction error under a fixed decision
/// policy: per-slot reward `−(e(x) − e(x̂))² − C_S·a_S`.
pub fn mse_optimal_policy(
    model: &DecPomdpModel,
    decision: &DecisionPolicy,
    embedding: &Embedding,
    rvi: &RviOptions,
) -> Result<SamplingPolicy> {
    if embedding.values().len() != model.alphabets().states() {
        return Err(Error::ModelIncomplete(format!(
            "embedding has {} values, expected {}",
            embedding.values().len(),
            model.alphabets().states()
        )));
    }
    let index = *model.index();
    let c_s = model.cost().sampling_cost;
    let mdp = model.induced_mdp(decision)?.with_rewards(|s, a| {
        let w = index.state(s);
        -embedding.squared_error(w.x, w.xhat) - c_s * a as f64
    });
    let solution = rvi_solve(&mdp, rvi)?;
    Ok(SamplingPolicy::from_actions(&solution.policy))
}

/// Per-slot quantities attached to each augmented state.
#[derive(Debug, Clone, Copy, Default)]
struct SlotTerms {
    inherent: f64,
    offset: f64,
    expenditure: f64,
    sampling: f64,
    sampled: f64,
}

/// Chain over `(global state, memory)` with index `w + N·memory`.
struct AugmentedChain {
    p: DMatrix<f64>,
    terms: Vec<SlotTerms>,
    initial: usize,
}

fn augmented_chain(
    model: &DecPomdpModel,
    rule: &SamplingRule,
    decision: &DecisionPolicy,
    init: &InitialConditions,
) -> Result<AugmentedChain> {
    let index = model.index();
    let n = index.len();
    let s = model.alphabets().states();
    let mem_size = rule.memory_size(s);
    if let SamplingRule::Stationary(policy) = rule {
        if policy.len() != n {
            return Err(Error::ModelIncomplete(format!(
                "sampling policy covers {} states, expected {n}",
                policy.len()
            )));
        }
    }
    let start = index.checked_index(init.state())?;
    let total = n * mem_size;
    let cost = model.cost();
    let p_success = model.channel().p_success();
    let mut p = DMatrix::<f64>::zeros(total, total);
    let mut terms = vec![SlotTerms::default(); total];
    for mem in 0..mem_size {
        for (wi, w) in index.iter().enumerate() {
            let row = wi + n * mem;
            let sample = rule.decide(mem, w, wi);
            let action = decision.action(w.xhat);
            terms[row] = SlotTerms {
                inherent: cost.inherent(w.x, w.phi),
                offset: cost.ramp_term(w.x, w.phi, action) - cost.inherent(w.x, w.phi),
                expenditure: cost.expenditure_term(action),
                sampling: if sample { cost.sampling_cost } else { 0.0 },
                sampled: if sample { 1.0 } else { 0.0 },
            };
            let outcomes: Vec<(bool, f64)> = if sample {
                vec![(true, p_success), (false, 1.0 - p_success)]
            } else {
                vec![(false, 1.0)]
            };
            let src = model.source().row(w.x, w.phi, action);
            let ctx = model.context().row(w.phi);
            for (delivered, p_h) in outcomes {
                if p_h == 0.0 {
                    continue;
                }
                let xhat_next = if delivered { w.x } else { w.xhat };
                let mem_next = rule.next_memory(mem, w, delivered);
                for (phi_next, &p_ctx) in ctx.iter().enumerate() {
                    for (x_next, &p_src) in src.iter().enumerate() {
                        let col = index.index(GlobalState::new(x_next, xhat_next, phi_next)) + n * mem_next;
                        p[(row, col)] += p_h * p_ctx * p_src;
                    }
                }
            }
        }
    }
    Ok(AugmentedChain {
        p,
        terms,
        initial: start + n * rule.initial_memory(init),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RuleEvaluation {
    pub average_cost: f64,
    pub sampling_rate: f64,
    pub breakdown: CostBreakdown,
}

/// Long-run cost of a sampling rule and decision policy, started from `init`.
pub fn evaluate_rule(
    model: &DecPomdpModel,
    rule: &SamplingRule,
    decision: &DecisionPolicy,
    init: &InitialConditions,
) -> Result<RuleEvaluation> {
    let chain = augmented_chain(model, rule, decision, init)?;
    let mu = limiting_distribution(&chain.p, chain.initial)?;
    let mut acc = SlotTerms::default();
    for (m, t) in mu.iter().zip(&chain.terms) {
        acc.inherent += m * t.inherent;
        acc.offset += m * t.offset;
        acc.expenditure += m * t.expenditure;
        acc.sampling += m * t.sampling;
        acc.sampled += m * t.sampled;
    }
    let breakdown = CostBreakdown {
        inherent: acc.inherent,
        actuation_gain_offset: acc.offset,
        actuation_expenditure: acc.expenditure,
        sampling: acc.sampling,
    };
    Ok(RuleEvaluation {
        average_cost: breakdown.total(),
        sampling_rate: acc.sampled,
        breakdown,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdTuning {
    pub threshold: usize,
    pub evaluation: RuleEvaluation,
    /// The minimizer sits at `threshold_max`; a larger range may do better.
    pub at_boundary: bool,
    /// Cost per threshold `0..=threshold_max`.
    pub costs: Vec<f64>,
}

/// Exhaustive integer sweep of the age threshold; ties go to the smaller
/// threshold.
pub fn tune_age_threshold(
    model: &DecPomdpModel,
    decision: &DecisionPolicy,
    threshold_max: usize,
    init: &InitialConditions,
) -> Result<ThresholdTuning> {
    let evaluations: Vec<RuleEvaluation> = (0..=threshold_max)
        .into_par_iter()
        .map(|threshold| evaluate_rule(model, &SamplingRule::AgeThreshold { threshold }, decision, init))
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (k, e) in evaluations.iter().enumerate() {
        if e.average_cost < evaluations[best].average_cost - 1e-12 {
            best = k;
        }
    }
    Ok(ThresholdTuning {
        threshold: best,
        evaluation: evaluations[best],
        at_boundary: best == threshold_max && threshold_max > 0,
        costs: evaluations.iter().map(|e| e.average_cost).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario;
    use crate::solvers::chain::evaluate_pair;

    fn greedy() -> DecisionPolicy {
        DecisionPolicy::from_actions(vec![0, 3, 7])
    }

    #[test]
    fn uniform_schedule() {
        let rule = SamplingRule::uniform(4).unwrap();
        let w = GlobalState::new(0, 0, 0);
        let mut mem = rule.initial_memory(&InitialConditions::default());
        let mut fired = Vec::new();
        for t in 0..10 {
            if rule.decide(mem, w, 0) {
                fired.push(t);
            }
            mem = rule.next_memory(mem, w, false);
        }
        assert_eq!(fired, vec![0, 4, 8]);
        assert!(SamplingRule::uniform(0).is_err());
    }

    #[test]
    fn age_threshold_trace() {
        let rule = SamplingRule::AgeThreshold { threshold: 2 };
        let w = GlobalState::new(0, 0, 0);
        let mut mem = rule.initial_memory(&InitialConditions::default());
        let mut decisions = Vec::new();
        for _ in 0..3 {
            let d = rule.decide(mem, w, 0);
            decisions.push(d);
            mem = rule.next_memory(mem, w, false);
        }
        assert_eq!(decisions, vec![false, false, true]);
        let zero = SamplingRule::AgeThreshold { threshold: 0 };
        assert!(zero.decide(zero.initial_memory(&InitialConditions::default()), w, 0));
    }

    #[test]
    fn change_aware_first_slot_idle() {
        let rule = SamplingRule::ChangeAware;
        let init = InitialConditions::default();
        let mem = rule.initial_memory(&init);
        assert!(!rule.decide(mem, init.state(), 0));
        assert!(rule.decide(mem, GlobalState::new(1, 0, 0), 3));
    }

    #[test]
    fn stationary_rule_matches_joint_chain() {
        let model = scenario::paper_like();
        let policy = aoii_optimal_policy(&model);
        let eval = evaluate_rule(
            &model,
            &SamplingRule::Stationary(policy.clone()),
            &greedy(),
            &InitialConditions::default(),
        )
        .unwrap();
        let analysis = evaluate_pair(&model, &policy, &greedy()).unwrap();
        assert!((eval.average_cost + analysis.average_reward).abs() < 1e-10);
        assert!((eval.breakdown.total() - eval.average_cost).abs() < 1e-12);
    }

    #[test]
    fn always_sampling_rates_agree() {
        let model = scenario::paper_like();
        let init = InitialConditions::default();
        let uniform = evaluate_rule(&model, &SamplingRule::uniform(1).unwrap(), &greedy(), &init).unwrap();
        let age = evaluate_rule(&model, &SamplingRule::AgeThreshold { threshold: 0 }, &greedy(), &init).unwrap();
        assert!((uniform.sampling_rate - 1.0).abs() < 1e-12);
        assert!((uniform.average_cost - age.average_cost).abs() < 1e-10);
    }

    #[test]
    fn uniform_rate_is_inverse_period() {
        let model = scenario::paper_like();
        let eval = evaluate_rule(
            &model,
            &SamplingRule::uniform(5).unwrap(),
            &greedy(),
            &InitialConditions::default(),
        )
        .unwrap();
        assert!((eval.sampling_rate - 0.2).abs() < 1e-12);
    }

    #[test]
    fn mse_policy_extremes() {
        let free = scenario::paper_like_with(1.0, 0.0);
        let pol = mse_optimal_policy(&free, &greedy(), &Embedding::identity(3), &RviOptions::default()).unwrap();
        // Synchronized states gain nothing from sampling; ties go to idle.
        for (i, w) in free.index().iter().enumerate() {
            assert_eq!(pol.samples(i), !w.synchronized(), "{w}");
        }
        // A one-off sample is free in the long run, so only the rate is pinned.
        let costly = scenario::paper_like_with(1.0, 1e3);
        let pol = mse_optimal_policy(&costly, &greedy(), &Embedding::identity(3), &RviOptions::default()).unwrap();
        let eval = evaluate_rule(&costly, &SamplingRule::Stationary(pol), &greedy(), &InitialConditions::default()).unwrap();
        assert!(eval.sampling_rate < 1e-9, "{}", eval.sampling_rate);
    }
}
