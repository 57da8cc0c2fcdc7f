//! The TOML scenario format.
//!
//! A scenario names its alphabets, the source tensor `[source] rows[i][k][m][u]`
//! (current state, context, actuation, next state), the context chain, the
//! channel and the cost model, followed by optional solver, simulation,
//! benchmark, sweep and grid sections. Unknown keys are rejected. The cost
//! section takes either explicit `gain`/`expenditure` tables or the linear
//! shorthand `gain_coefficient`/`expenditure_coefficient`, with
//! `C2(a_m) = gain_coefficient · m` and `C3(a_m) = expenditure_coefficient · m`.

use std::fs;
use std::path::{Path, PathBuf};

use gotensor::benchmarks::{InitialConditions, DEFAULT_THRESHOLD_MAX};
use gotensor::model::{validate_cost_model, Alphabets, CostModel, DecisionPolicy, Embedding};
use gotensor::pomdp::{ChannelModel, ContextDynamics, DecPomdpModel, SourceDynamics};
use gotensor::scenario;
use gotensor::sim::GridSpec;
use gotensor::solvers::{
    greedy_decision_policy, BruteForceOptions, ContextWeighting, GreedyOptions, JespOptions, PiOptions,
    RviOptions, StepSchedule, TieBreak,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::manifest::sha256_hex;

const HEADER: &str = "# gotensor scenario\n\
# source.rows[i][k][m] is the next-state distribution from state i, context k, actuation m.\n\
# context.rows[k] is the next-context distribution; cost.inherent[k][i] is C1 at state i, context k.\n";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub alphabets: AlphabetsSection,
    pub source: SourceSection,
    pub context: ContextSection,
    pub channel: ChannelSection,
    pub cost: CostSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub benchmarks: BenchmarkSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub grid: GridSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphabetsSection {
    pub states: usize,
    pub contexts: usize,
    pub actions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSection {
    pub rows: Vec<Vec<Vec<Vec<f64>>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextSection {
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSection {
    pub p_success: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSection {
    /// `C1`, indexed `[context][state]`.
    pub inherent: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expenditure: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_coefficient: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expenditure_coefficient: Option<f64>,
    #[serde(default = "one")]
    pub gain_weight: f64,
    #[serde(default = "one")]
    pub expenditure_weight: f64,
    pub sampling_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Brute,
    Jesp,
    RviFixedDecision,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Brute => "brute",
            Algorithm::Jesp => "jesp",
            Algorithm::RviFixedDecision => "rvi-fixed-decision",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub algorithm: Algorithm,
    pub epsilon: f64,
    pub max_iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aperiodicity: Option<f64>,
    /// Largest number of decision policies brute force may enumerate.
    pub budget: usize,
    pub pi_max_rounds: usize,
    /// Constant policy-iteration step; harmonic `1/(k+1)` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_constant: Option<f64>,
    pub max_backtracks: usize,
    pub jesp_max_rounds: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let jesp = JespOptions::default();
        Self {
            algorithm: Algorithm::Brute,
            epsilon: jesp.rvi.epsilon,
            max_iterations: jesp.rvi.max_iterations,
            aperiodicity: None,
            budget: BruteForceOptions::default().budget,
            pi_max_rounds: jesp.pi.max_rounds,
            step_constant: None,
            max_backtracks: jesp.pi.max_backtracks,
            jesp_max_rounds: jesp.max_rounds,
            restarts: jesp.restarts,
            seed: jesp.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    pub x: usize,
    pub xhat: usize,
    pub phi: usize,
    pub aoi: usize,
}

impl Default for InitialSection {
    fn default() -> Self {
        let init = InitialConditions::default();
        Self {
            x: init.x,
            xhat: init.xhat,
            phi: init.phi,
            aoi: init.aoi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub horizon: u64,
    pub seed: u64,
    pub initial: InitialSection,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            horizon: 100_000,
            seed: 0,
            initial: InitialSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    #[default]
    Uniform,
    Stationary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tie {
    #[default]
    Highest,
    Lowest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchmarkSection {
    /// Decision policy of the baselines; greedy when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decision: Option<Vec<usize>>,
    pub context_weighting: Weighting,
    pub tie_break: Tie,
    /// Numeric value of each state for MSE; `0, 1, …` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
    pub threshold_max: usize,
}

impl Default for BenchmarkSection {
    fn default() -> Self {
        Self {
            decision: None,
            context_weighting: Weighting::default(),
            tie_break: Tie::default(),
            embedding: None,
            threshold_max: DEFAULT_THRESHOLD_MAX,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub uniform_periods: Vec<usize>,
    pub age_thresholds: Vec<usize>,
    /// Simulation seeds per point: `seed, seed + 1, …`.
    pub replicas: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            uniform_periods: (1..=20).collect(),
            age_thresholds: (0..=20).collect(),
            replicas: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub p_success: Vec<f64>,
    pub sampling_cost: Vec<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        let g = GridSpec::study();
        Self {
            p_success: g.p_success,
            sampling_cost: g.sampling_cost,
        }
    }
}

fn toml_text<T: Serialize>(value: &T) -> String {
    toml::to_string(value).expect("scenario sections serialize to TOML")
}

fn shape_error(field: &str, what: &str, expected: usize, found: usize) -> String {
    format!("{field}: expected {expected} {what}, found {found}")
}

impl ScenarioFile {
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string().trim_end().to_string())
    }

    /// The shipped scenario in its linear-coefficient form.
    pub fn paper_like() -> Self {
        let model = scenario::paper_like();
        let mut file = Self::from_model(&model, Some("paper-like".into()));
        file.cost.gain = None;
        file.cost.expenditure = None;
        file.cost.gain_coefficient = Some(scenario::GAIN_COEFFICIENT);
        file.cost.expenditure_coefficient = Some(scenario::EXPENDITURE_COEFFICIENT);
        file
    }

    /// Scenario with explicit cost tables and default option sections.
    pub fn from_model(model: &DecPomdpModel, name: Option<String>) -> Self {
        let a = model.alphabets();
        let cost = model.cost();
        Self {
            name,
            alphabets: AlphabetsSection {
                states: a.states(),
                contexts: a.contexts(),
                actions: a.actions(),
            },
            source: SourceSection {
                rows: model.source().to_nested(),
            },
            context: ContextSection {
                rows: model.context().rows().to_vec(),
            },
            channel: ChannelSection {
                p_success: model.channel().p_success(),
            },
            cost: CostSection {
                inherent: cost.inherent.clone(),
                gain: Some(cost.gain.clone()),
                expenditure: Some(cost.expenditure.clone()),
                gain_coefficient: None,
                expenditure_coefficient: None,
                gain_weight: cost.gain_weight,
                expenditure_weight: cost.expenditure_weight,
                sampling_cost: cost.sampling_cost,
            },
            solver: SolverSection::default(),
            simulation: SimulationSection::default(),
            benchmarks: BenchmarkSection::default(),
            sweep: SweepSection::default(),
            grid: GridSection::default(),
        }
    }

    /// TOML text with the source tensor laid out one distribution per line.
    pub fn to_toml(&self) -> String {
        #[derive(Serialize)]
        struct Head<'a> {
            #[serde(skip_serializing_if = "Option::is_none")]
            name: Option<&'a String>,
            alphabets: &'a AlphabetsSection,
        }
        #[derive(Serialize)]
        struct Tail<'a> {
            context: &'a ContextSection,
            channel: &'a ChannelSection,
            cost: &'a CostSection,
            solver: &'a SolverSection,
            simulation: &'a SimulationSection,
            benchmarks: &'a BenchmarkSection,
            sweep: &'a SweepSection,
            grid: &'a GridSection,
        }
        let head = toml_text(&Head {
            name: self.name.as_ref(),
            alphabets: &self.alphabets,
        });
        let tail = toml_text(&Tail {
            context: &self.context,
            channel: &self.channel,
            cost: &self.cost,
            solver: &self.solver,
            simulation: &self.simulation,
            benchmarks: &self.benchmarks,
            sweep: &self.sweep,
            grid: &self.grid,
        });
        let mut source = String::from("[source]\nrows = [\n");
        for (i, by_context) in self.source.rows.iter().enumerate() {
            source.push_str(&format!("  # s{i}\n  [\n"));
            for (k, by_action) in by_context.iter().enumerate() {
                source.push_str(&format!("    # v{k}\n    [\n"));
                for (m, row) in by_action.iter().enumerate() {
                    let cells: Vec<String> = row.iter().map(|p| format!("{p:?}")).collect();
                    source.push_str(&format!("      [{}], # a{m}\n", cells.join(", ")));
                }
                source.push_str("    ],\n");
            }
            source.push_str("  ],\n");
        }
        source.push_str("]\n");
        format!("{HEADER}\n{head}\n{source}\n{tail}")
    }

    fn table(
        explicit: &Option<Vec<f64>>,
        coefficient: Option<f64>,
        field: &str,
        actions: usize,
    ) -> std::result::Result<Vec<f64>, String> {
        match (explicit, coefficient) {
            (Some(t), None) => Ok(t.clone()),
            (None, Some(c)) => Ok((0..actions).map(|m| c * m as f64).collect()),
            (Some(_), Some(_)) => Err(format!("cost.{field}: give either the table or cost.{field}_coefficient, not both")),
            (None, None) => Err(format!("cost.{field}: missing table or cost.{field}_coefficient")),
        }
    }

    pub fn cost_model(&self) -> std::result::Result<CostModel, String> {
        let a = self.alphabets;
        let c = &self.cost;
        let cost = CostModel {
            inherent: c.inherent.clone(),
            gain: Self::table(&c.gain, c.gain_coefficient, "gain", a.actions)?,
            expenditure: Self::table(&c.expenditure, c.expenditure_coefficient, "expenditure", a.actions)?,
            gain_weight: c.gain_weight,
            expenditure_weight: c.expenditure_weight,
            sampling_cost: c.sampling_cost,
        };
        let issues = validate_cost_model(&cost, a.states, a.contexts, a.actions);
        if issues.is_empty() {
            Ok(cost)
        } else {
            Err(issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))
        }
    }

    fn check_shapes(&self) -> std::result::Result<(), String> {
        let AlphabetsSection {
            states,
            contexts,
            actions,
        } = self.alphabets;
        let rows = &self.source.rows;
        if rows.len() != states {
            return Err(shape_error("source.rows", "states", states, rows.len()));
        }
        for (i, by_context) in rows.iter().enumerate() {
            if by_context.len() != contexts {
                return Err(shape_error(&format!("source.rows[{i}]"), "contexts", contexts, by_context.len()));
            }
            for (k, by_action) in by_context.iter().enumerate() {
                if by_action.len() != actions {
                    return Err(shape_error(&format!("source.rows[{i}][{k}]"), "actions", actions, by_action.len()));
                }
                for (m, row) in by_action.iter().enumerate() {
                    if row.len() != states {
                        return Err(shape_error(&format!("source.rows[{i}][{k}][{m}]"), "entries", states, row.len()));
                    }
                }
            }
        }
        if self.context.rows.len() != contexts {
            return Err(shape_error("context.rows", "rows", contexts, self.context.rows.len()));
        }
        for (k, row) in self.context.rows.iter().enumerate() {
            if row.len() != contexts {
                return Err(shape_error(&format!("context.rows[{k}]"), "entries", contexts, row.len()));
            }
        }
        Ok(())
    }

    pub fn build_model(&self) -> std::result::Result<DecPomdpModel, String> {
        let a = self.alphabets;
        let cost = self.cost_model()?;
        let alphabets = Alphabets::new(a.states, a.contexts, a.actions).map_err(|e| e.to_string())?;
        self.check_shapes()?;
        let row_error = |e: gotensor::Error| match e {
            gotensor::Error::Stochasticity { row, sum } => {
                format!("{row}: row sums to {sum}, expected 1 within 1e-9")
            }
            other => other.to_string(),
        };
        let source = SourceDynamics::new(&self.source.rows).map_err(row_error)?;
        let context = ContextDynamics::new(self.context.rows.clone()).map_err(row_error)?;
        let channel = ChannelModel::new(self.channel.p_success).map_err(|e| format!("channel.p_success: {e}"))?;
        DecPomdpModel::new(alphabets, source, context, channel, cost).map_err(|e| e.to_string())
    }

    pub fn rvi_options(&self) -> RviOptions {
        RviOptions {
            epsilon: self.solver.epsilon,
            max_iterations: self.solver.max_iterations,
            aperiodicity: self.solver.aperiodicity,
            ..RviOptions::default()
        }
    }

    pub fn brute_options(&self) -> BruteForceOptions {
        BruteForceOptions {
            rvi: self.rvi_options(),
            budget: self.solver.budget,
        }
    }

    pub fn jesp_options(&self) -> JespOptions {
        JespOptions {
            rvi: self.rvi_options(),
            pi: PiOptions {
                epsilon: self.solver.epsilon,
                max_rounds: self.solver.pi_max_rounds,
                schedule: self.solver.step_constant.map_or(StepSchedule::Harmonic, StepSchedule::Constant),
                max_backtracks: self.solver.max_backtracks,
            },
            max_rounds: self.solver.jesp_max_rounds,
            restarts: self.solver.restarts,
            seed: self.solver.seed,
        }
    }

    pub fn greedy_options(&self) -> GreedyOptions {
        GreedyOptions {
            weighting: match self.benchmarks.context_weighting {
                Weighting::Uniform => ContextWeighting::Uniform,
                Weighting::Stationary => ContextWeighting::Stationary,
            },
            tie: match self.benchmarks.tie_break {
                Tie::Highest => TieBreak::HighestIndex,
                Tie::Lowest => TieBreak::LowestIndex,
            },
        }
    }

    /// Baseline decision policy: the configured one, else greedy.
    pub fn decision_policy(&self, model: &DecPomdpModel) -> gotensor::Result<DecisionPolicy> {
        match &self.benchmarks.decision {
            Some(actions) => DecisionPolicy::new(actions.clone(), model.alphabets()),
            None => greedy_decision_policy(model, &self.greedy_options()),
        }
    }

    pub fn embedding(&self) -> Embedding {
        match &self.benchmarks.embedding {
            Some(values) => Embedding::new(values.clone()),
            None => Embedding::identity(self.alphabets.states),
        }
    }

    pub fn initial_conditions(&self) -> InitialConditions {
        let i = self.simulation.initial;
        InitialConditions {
            x: i.x,
            xhat: i.xhat,
            phi: i.phi,
            aoi: i.aoi,
        }
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec {
            p_success: self.grid.p_success.clone(),
            sampling_cost: self.grid.sampling_cost.clone(),
        }
    }
}

/// A validated scenario together with its source text hash.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub model: DecPomdpModel,
    pub sha256: String,
    /// `None` for the built-in scenario.
    pub path: Option<PathBuf>,
}

impl Scenario {
    pub fn from_text(text: &str, path: Option<PathBuf>) -> Result<Self> {
        let label = path.clone().unwrap_or_else(|| PathBuf::from("<built-in>"));
        let scenario_error = |message: String| CliError::Scenario {
            path: label.clone(),
            message,
        };
        let file = ScenarioFile::parse(text).map_err(scenario_error)?;
        let model = file.build_model().map_err(scenario_error)?;
        Ok(Self {
            file,
            model,
            sha256: sha256_hex(text.as_bytes()),
            path,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_text(&text, Some(path.to_path_buf()))
    }

    pub fn built_in() -> Self {
        Self::from_text(&ScenarioFile::paper_like().to_toml(), None).expect("built-in scenario is valid")
    }

    /// Rebuilds the model after option overrides; the hash keeps naming the
    /// original text.
    pub fn rebuild(&mut self) -> Result<()> {
        let label = self.path.clone().unwrap_or_else(|| PathBuf::from("<built-in>"));
        self.model = self.file.build_model().map_err(|message| CliError::Scenario { path: label, message })?;
        Ok(())
    }
}
