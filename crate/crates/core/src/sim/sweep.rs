//! Parameter sweeps and grid studies built on the analytic evaluator and the
//! simulator.

use rayon::prelude::*;
use serde::Serialize;

use crate::benchmarks::{
    aoii_optimal_policy, evaluate_rule, mse_optimal_policy, tune_age_threshold, InitialConditions, RuleEvaluation,
    SamplingRule, DEFAULT_THRESHOLD_MAX,
};
use crate::error::{Error, Result};
use crate::model::{DecisionPolicy, Embedding};
use crate::pomdp::DecPomdpModel;
use crate::sim::metrics::{CostBreakdown, Decomposition};
use crate::sim::simulate::{simulate_closed_loop, SimOptions};
use crate::solvers::brute::{brute_force_joint, BruteForceOptions};
use crate::solvers::jesp::{jesp, JespOptions};
use crate::solvers::rvi::RviOptions;
use crate::solvers::SolveReport;

/// Grid over channel success probability and sampling cost.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    pub p_success: Vec<f64>,
    pub sampling_cost: Vec<f64>,
}

fn round_grid(v: f64) -> f64 {
    (v * 1e9).round() / 1e9
}

fn parse_values(key: &str, text: &str) -> Result<Vec<f64>> {
    let bad = |what: &str| Error::Parameter(format!("grid key {key}: {what} in {text:?}"));
    let number = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
    let parts: Vec<&str> = text.split(':').collect();
    let values = match parts.as_slice() {
        [start, stop, step] => {
            let (start, stop, step) = (number(start)?, number(stop)?, number(step)?);
            if step.is_nan() || step <= 0.0 || stop < start {
                return Err(bad("range needs start <= stop and a positive step"));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            (0..count).map(|i| round_grid(start + i as f64 * step)).collect()
        }
        [_] => text.split(',').map(number).collect::<Result<Vec<_>>>()?,
        _ => return Err(bad("expected start:stop:step or a comma list")),
    };
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(bad("no finite values"));
    }
    Ok(values)
}

impl GridSpec {
    /// The 5 × 6 study grid: `p_S ∈ {0.2, …, 1.0}`, `C_S ∈ {0, 2, …, 10}`.
    pub fn study() -> Self {
        Self {
            p_success: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            sampling_cost: vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0],
        }
    }

    /// Parses `pS=0.2:1.0:0.2;CS=0,5,10`. A missing key takes `defaults`.
    pub fn parse(spec: &str, defaults: &GridSpec) -> Result<Self> {
        let mut grid = defaults.clone();
        for item in spec.split(';').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, values) = item
                .split_once('=')
                .ok_or_else(|| Error::Parameter(format!("grid item {item:?} lacks '='")))?;
            let key = key.trim();
            let values = parse_values(key, values.trim())?;
            match key {
                "pS" => {
                    if let Some(p) = values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                        return Err(Error::Parameter(format!("grid key pS: {p} is not a probability")));
                    }
                    grid.p_success = values;
                }
                "CS" => {
                    if let Some(c) = values.iter().find(|c| **c < 0.0) {
                        return Err(Error::Parameter(format!("grid key CS: {c} is negative")));
                    }
                    grid.sampling_cost = values;
                }
                other => return Err(Error::Parameter(format!("unknown grid key {other:?}, expected pS or CS"))),
            }
        }
        Ok(grid)
    }

    /// Cells in row-major order, `p_S` outer.
    pub fn cells(&self) -> Vec<(f64, f64)> {
        self.p_success
            .iter()
            .flat_map(|&p| self.sampling_cost.iter().map(move |&c| (p, c)))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.p_success.len() * self.sampling_cost.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// How a policy is scored.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Evaluation {
    /// Exact long-run cost on the augmented chain.
    Analytic,
    /// Seeded simulation; several seeds are averaged.
    Simulated { horizon: u64, seeds: Vec<u64> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub policy: String,
    pub param: Option<usize>,
    pub sampling_rate: f64,
    pub average_cost: f64,
    /// Zero for analytic evaluation.
    pub stderr: f64,
    pub breakdown: CostBreakdown,
}

impl SweepResult {
    fn from_analytic(policy: &str, param: Option<usize>, e: RuleEvaluation) -> Self {
        Self {
            policy: policy.to_string(),
            param,
            sampling_rate: e.sampling_rate,
            average_cost: e.average_cost,
            stderr: 0.0,
            breakdown: e.breakdown,
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Scores one rule under `evaluation`.
pub fn score_rule(
    model: &DecPomdpModel,
    policy: &str,
    param: Option<usize>,
    rule: &SamplingRule,
    decision: &DecisionPolicy,
    evaluation: &Evaluation,
    init: &InitialConditions,
) -> Result<SweepResult> {
    match evaluation {
        Evaluation::Analytic => Ok(SweepResult::from_analytic(
            policy,
            param,
            evaluate_rule(model, rule, decision, init)?,
        )),
        Evaluation::Simulated { horizon, seeds } => {
            if seeds.is_empty() {
                return Err(Error::Parameter("simulated evaluation needs at least one seed".into()));
            }
            let mut runs = Vec::with_capacity(seeds.len());
            for &seed in seeds {
                let mut opts = SimOptions::new(*horizon, seed, model.alphabets().states());
                opts.init = *init;
                runs.push(simulate_closed_loop(model, rule, decision, &opts)?.summary);
            }
            let costs: Vec<f64> = runs.iter().map(|r| r.average_cost).collect();
            let stderr = if runs.len() >= 2 {
                let m = mean(&costs);
                let var = costs.iter().map(|c| (c - m).powi(2)).sum::<f64>() / (costs.len() - 1) as f64;
                (var / costs.len() as f64).sqrt()
            } else {
                runs[0].stderr
            };
            let field = |f: fn(&CostBreakdown) -> f64| mean(&runs.iter().map(|r| f(&r.breakdown)).collect::<Vec<_>>());
            Ok(SweepResult {
                policy: policy.to_string(),
                param,
                sampling_rate: mean(&runs.iter().map(|r| r.sampling_rate).collect::<Vec<_>>()),
                average_cost: mean(&costs),
                stderr,
                breakdown: CostBreakdown {
                    inherent: field(|b| b.inherent),
                    actuation_gain_offset: field(|b| b.actuation_gain_offset),
                    actuation_expenditure: field(|b| b.actuation_expenditure),
                    sampling: field(|b| b.sampling),
                },
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PolicyFamily {
    /// Parameter is the period `Δ ≥ 1`.
    Uniform,
    /// Parameter is the AoI threshold `δ ≥ 0`.
    AgeAware,
}

impl PolicyFamily {
    pub fn label(&self) -> &'static str {
        match self {
            PolicyFamily::Uniform => "uniform",
            PolicyFamily::AgeAware => "age-aware",
        }
    }

    pub fn rule(&self, param: usize) -> Result<SamplingRule> {
        match self {
            PolicyFamily::Uniform => SamplingRule::uniform(param),
            PolicyFamily::AgeAware => Ok(SamplingRule::AgeThreshold { threshold: param }),
        }
    }
}

/// One result per parameter, in the order given.
pub fn sweep_rate_vs_cost(
    model: &DecPomdpModel,
    family: PolicyFamily,
    params: &[usize],
    decision: &DecisionPolicy,
    evaluation: &Evaluation,
    init: &InitialConditions,
) -> Result<Vec<SweepResult>> {
    if params.is_empty() {
        return Err(Error::Parameter("sweep needs at least one parameter".into()));
    }
    params
        .par_iter()
        .map(|&param| {
            score_rule(
                model,
                family.label(),
                Some(param),
                &family.rule(param)?,
                decision,
                evaluation,
                init,
            )
        })
        .collect()
}

/// How the co-designed policy pair is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum CoDesign {
    BruteForce(BruteForceOptions),
    Jesp(JespOptions),
}

impl CoDesign {
    pub fn solve(&self, model: &DecPomdpModel) -> Result<SolveReport> {
        match self {
            CoDesign::BruteForce(o) => brute_force_joint(model, o),
            CoDesign::Jesp(o) => jesp(model, o),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareOptions {
    pub co_design: CoDesign,
    /// Decision policy of every baseline.
    pub decision: DecisionPolicy,
    pub embedding: Embedding,
    pub uniform_periods: Vec<usize>,
    pub threshold_max: usize,
    pub init: InitialConditions,
    pub rvi: RviOptions,
}

impl CompareOptions {
    pub fn new(co_design: CoDesign, decision: DecisionPolicy, states: usize) -> Self {
        Self {
            co_design,
            decision,
            embedding: Embedding::identity(states),
            uniform_periods: (1..=20).collect(),
            threshold_max: DEFAULT_THRESHOLD_MAX,
            init: InitialConditions::default(),
            rvi: RviOptions::default(),
        }
    }
}

/// Result for one grid cell; solver failures stay local to their cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellOutcome<T> {
    pub p_success: f64,
    pub sampling_cost: f64,
    pub result: std::result::Result<T, Error>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellComparison {
    pub co_design: SolveReport,
    pub got: RuleEvaluation,
    pub aoii_optimal: RuleEvaluation,
    pub mse_optimal: RuleEvaluation,
    pub change_aware: RuleEvaluation,
    pub uniform_best_period: usize,
    pub uniform_best: RuleEvaluation,
    pub age_best_threshold: usize,
    pub age_best: RuleEvaluation,
}

impl CellComparison {
    /// `(label, average cost)` in a fixed order, co-design first.
    pub fn costs(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("got", self.got.average_cost),
            ("aoii-optimal", self.aoii_optimal.average_cost),
            ("mse-optimal", self.mse_optimal.average_cost),
            ("uniform-best", self.uniform_best.average_cost),
            ("age-aware-best", self.age_best.average_cost),
            ("change-aware", self.change_aware.average_cost),
        ]
    }

    pub fn best_baseline(&self) -> (&'static str, f64) {
        self.costs()[1..]
            .iter()
            .copied()
            .fold(("", f64::INFINITY), |acc, c| if c.1 < acc.1 { c } else { acc })
    }

    /// `1 − cost_got / cost_best_baseline`.
    pub fn relative_saving(&self) -> f64 {
        let (_, best) = self.best_baseline();
        if best > 0.0 {
            1.0 - self.got.average_cost / best
        } else {
            0.0
        }
    }
}

fn compare_cell(model: &DecPomdpModel, opts: &CompareOptions) -> Result<CellComparison> {
    let report = opts.co_design.solve(model)?;
    let got = evaluate_rule(
        model,
        &SamplingRule::Stationary(report.sampling_policy.clone()),
        &report.decision_policy,
        &opts.init,
    )?;
    let d = &opts.decision;
    let aoii = evaluate_rule(model, &SamplingRule::Stationary(aoii_optimal_policy(model)), d, &opts.init)?;
    let mse_policy = mse_optimal_policy(model, d, &opts.embedding, &opts.rvi)?;
    let mse = evaluate_rule(model, &SamplingRule::Stationary(mse_policy), d, &opts.init)?;
    let change = evaluate_rule(model, &SamplingRule::ChangeAware, d, &opts.init)?;
    let mut uniform_best: Option<(usize, RuleEvaluation)> = None;
    for &period in &opts.uniform_periods {
        let e = evaluate_rule(model, &SamplingRule::uniform(period)?, d, &opts.init)?;
        if uniform_best.as_ref().is_none_or(|(_, b)| e.average_cost < b.average_cost) {
            uniform_best = Some((period, e));
        }
    }
    let (uniform_best_period, uniform_best) =
        uniform_best.ok_or_else(|| Error::Parameter("no uniform periods to compare".into()))?;
    let age = tune_age_threshold(model, d, opts.threshold_max, &opts.init)?;
    Ok(CellComparison {
        co_design: report,
        got,
        aoii_optimal: aoii,
        mse_optimal: mse,
        change_aware: change,
        uniform_best_period,
        uniform_best,
        age_best_threshold: age.threshold,
        age_best: age.evaluation,
    })
}

fn cell_model(model: &DecPomdpModel, p: f64, c: f64) -> Result<DecPomdpModel> {
    model.with_channel(p)?.with_sampling_cost(c)
}

pub fn compare_policies(
    model: &DecPomdpModel,
    grid: &GridSpec,
    opts: &CompareOptions,
) -> Vec<CellOutcome<CellComparison>> {
    grid.cells()
        .into_par_iter()
        .map(|(p, c)| CellOutcome {
            p_success: p,
            sampling_cost: c,
            result: cell_model(model, p, c).and_then(|m| compare_cell(&m, opts)),
        })
        .collect()
}

/// JESP against brute force in cost units; `gap ≥ −ε` by optimality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapCell {
    pub theta_bf: f64,
    pub theta_jesp: f64,
    pub gap: f64,
    pub brute: SolveReport,
    pub jesp: SolveReport,
}

impl GapCell {
    pub fn relative_gap(&self) -> f64 {
        if self.theta_bf.abs() > 0.0 {
            self.gap / self.theta_bf.abs()
        } else {
            self.gap.abs()
        }
    }
}

pub fn optimality_gap(
    model: &DecPomdpModel,
    grid: &GridSpec,
    brute: &BruteForceOptions,
    jesp_opts: &JespOptions,
) -> Vec<CellOutcome<GapCell>> {
    grid.cells()
        .into_par_iter()
        .map(|(p, c)| CellOutcome {
            p_success: p,
            sampling_cost: c,
            result: cell_model(model, p, c).and_then(|m| {
                let bf = brute_force_joint(&m, brute)?;
                let js = jesp(&m, jesp_opts)?;
                Ok(GapCell {
                    theta_bf: bf.average_cost(),
                    theta_jesp: js.average_cost(),
                    gap: js.average_cost() - bf.average_cost(),
                    brute: bf,
                    jesp: js,
                })
            }),
        })
        .collect()
}

/// Sampling, actuation and residual inherent shares of an average cost.
pub fn cost_decomposition(breakdown: &CostBreakdown) -> Decomposition {
    breakdown.decomposition()
}
