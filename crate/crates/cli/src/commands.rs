//! Subcommand implementations. Each writes its files into the output
//! directory, then a manifest naming them.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use gotensor::benchmarks::{aoii_optimal_policy, mse_optimal_policy, SamplingRule};
use gotensor::model::{DecisionPolicy, SamplingPolicy};
use gotensor::sim::{
    compare_policies, optimality_gap, score_rule, simulate_closed_loop, sweep_rate_vs_cost, CoDesign,
    CompareOptions, Evaluation, GridSpec, PolicyFamily, SimOptions, SweepResult,
};
use gotensor::solvers::{brute_force_joint, evaluate_pair, jesp, solve_fixed_decision, SolveReport};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::manifest::{unix_now, RunManifest, ScenarioRef};
use crate::output;
use crate::scenario_file::{Algorithm, Scenario};

/// Inputs shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Run {
    pub scenario: Scenario,
    pub out: PathBuf,
    /// Recorded verbatim in the manifest.
    pub command_line: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    /// Files written, relative to the output directory.
    pub files: Vec<String>,
    /// Cells or solves that failed or did not converge.
    pub failures: Vec<String>,
    /// Human-readable digest printed on stdout.
    pub summary: String,
}

impl Outcome {
    pub fn success(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Machine-readable policy pair; sampling decisions follow the global index
/// `x + S·(x̂ + S·φ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyFile {
    pub algorithm: String,
    pub average_cost: f64,
    pub states: usize,
    pub contexts: usize,
    pub decision: Vec<usize>,
    pub sampling: Vec<bool>,
}

impl PolicyFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Simulated sampling rule, as named on the command line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolicyChoice {
    /// Co-designed pair from the configured solver.
    Got,
    Uniform(usize),
    Age(usize),
    ChangeAware,
    Aoii,
    Mse,
    File(PathBuf),
}

impl PolicyChoice {
    pub fn parse(text: &str) -> Result<Self> {
        let bad = || CliError::Usage(format!("unknown policy {text:?}; expected got, uniform:N, age:N, change-aware, aoii or mse"));
        let number = |s: &str| s.parse::<usize>().map_err(|_| bad());
        Ok(match text.split_once(':') {
            Some(("uniform", n)) => PolicyChoice::Uniform(number(n)?),
            Some(("age", n)) => PolicyChoice::Age(number(n)?),
            Some(_) => return Err(bad()),
            None => match text {
                "got" => PolicyChoice::Got,
                "change-aware" => PolicyChoice::ChangeAware,
                "aoii" => PolicyChoice::Aoii,
                "mse" => PolicyChoice::Mse,
                _ => return Err(bad()),
            },
        })
    }
}

impl Run {
    fn prepare(&self) -> Result<u64> {
        fs::create_dir_all(&self.out).map_err(|e| CliError::io(&self.out, e))?;
        Ok(unix_now())
    }

    fn path(&self, file: &str) -> PathBuf {
        self.out.join(file)
    }

    fn write_text(&self, file: &str, text: &str) -> Result<()> {
        let path = self.path(file);
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }

    fn finish(&self, started: u64, outcome: Outcome) -> Result<Outcome> {
        let scenario = ScenarioRef {
            path: self.scenario.path.as_ref().map(|p| p.display().to_string()),
            sha256: self.scenario.sha256.clone(),
        };
        let seed = self.scenario.file.simulation.seed;
        RunManifest::new(self.command_line.clone(), scenario, seed, started).write(&self.out, &outcome.files)?;
        Ok(outcome)
    }
}

/// Runs the configured joint solver on the scenario's model.
pub fn solve_scenario(scenario: &Scenario, algorithm: Algorithm) -> Result<SolveReport> {
    let model = &scenario.model;
    let file = &scenario.file;
    Ok(match algorithm {
        Algorithm::Brute => brute_force_joint(model, &file.brute_options())?,
        Algorithm::Jesp => jesp(model, &file.jesp_options())?,
        Algorithm::RviFixedDecision => {
            solve_fixed_decision(model, &file.decision_policy(model)?, &file.rvi_options())?
        }
    })
}

fn action_label(a: usize) -> String {
    format!("a{a}")
}

/// Text report of a joint solve. Contains no timing, so reruns match.
pub fn render_report(scenario: &Scenario, algorithm: Algorithm, report: &SolveReport, poisson: Option<f64>) -> String {
    let model = &scenario.model;
    let a = model.alphabets();
    let mut s = String::new();
    let name = scenario.file.name.as_deref().unwrap_or("unnamed");
    let _ = writeln!(s, "scenario: {name} ({})", scenario.sha256);
    let _ = writeln!(s, "algorithm: {}", algorithm.name());
    let _ = writeln!(s, "states: {} contexts: {} actions: {} global states: {}", a.states(), a.contexts(), a.actions(), model.global_states());
    let _ = writeln!(s, "p_success: {} sampling_cost: {}", model.channel().p_success(), model.cost().sampling_cost);
    let _ = writeln!(s, "average cost (theta*): {}", report.average_cost());
    let _ = writeln!(s, "average reward: {}", report.average_reward);
    let _ = writeln!(s, "iterations: {}", report.iterations);
    let _ = writeln!(s, "bellman residual: {:e}", report.residual);
    match poisson {
        Some(r) => {
            let _ = writeln!(s, "poisson residual: {r:e}");
        }
        None => {
            let _ = writeln!(s, "poisson residual: n/a (joint chain is multichain)");
        }
    }
    let _ = writeln!(s, "converged: {}", report.converged);
    let _ = writeln!(s, "candidates evaluated: {}", report.candidates_evaluated);
    let _ = writeln!(s, "multichain candidates: {}", report.multichain_candidates.len());
    let _ = writeln!(s, "sampling rate (policy density): {}", report.sampling_policy.density());
    let _ = writeln!(s);
    let _ = writeln!(s, "decision policy (estimate -> actuation):");
    for (xhat, &act) in report.decision_policy.actions().iter().enumerate() {
        let _ = writeln!(s, "  s{xhat} -> {}", action_label(act));
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "sampling policy (1 = sample):");
    let _ = writeln!(s, "  {:<8}{:<8}{:<8}aS", "x", "xhat", "phi");
    for (i, w) in model.index().iter().enumerate() {
        let _ = writeln!(s, "  {:<8}{:<8}{:<8}{}", format!("s{}", w.x), format!("s{}", w.xhat), format!("v{}", w.phi), u8::from(report.sampling_policy.samples(i)));
    }
    if !report.restarts.is_empty() {
        let _ = writeln!(s);
        let _ = writeln!(s, "starts (initial -> final, cost, rounds, converged):");
        for r in &report.restarts {
            let _ = writeln!(s, "  {} -> {}  {}  {}  {}", r.initial_policy, r.decision_policy, -r.average_reward, r.rounds, r.converged);
        }
    }
    s
}

pub fn solve(run: &Run, algorithm: Algorithm) -> Result<Outcome> {
    let started = run.prepare()?;
    let report = solve_scenario(&run.scenario, algorithm)?;
    let model = &run.scenario.model;
    let mut failures = Vec::new();
    let poisson = match evaluate_pair(model, &report.sampling_policy, &report.decision_policy) {
        Ok(analysis) => Some(analysis.poisson_residual),
        Err(gotensor::Error::Ergodicity { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    if !report.converged {
        failures.push(format!("solver did not converge (residual {:e})", report.residual));
    }
    let text = render_report(&run.scenario, algorithm, &report, poisson);
    run.write_text("report.txt", &text)?;
    let policy = PolicyFile {
        algorithm: algorithm.name().to_string(),
        average_cost: report.average_cost(),
        states: model.alphabets().states(),
        contexts: model.alphabets().contexts(),
        decision: report.decision_policy.actions().to_vec(),
        sampling: report.sampling_policy.decisions().to_vec(),
    };
    run.write_text("policy.json", &(serde_json::to_string_pretty(&policy)? + "\n"))?;
    let mut summary = format!(
        "{}: theta* = {} with decision {} after {} candidates",
        algorithm.name(),
        report.average_cost(),
        report.decision_policy,
        report.candidates_evaluated
    );
    if !report.multichain_candidates.is_empty() {
        let _ = write!(summary, "\nwarning: {} candidate(s) had multichain joint chains", report.multichain_candidates.len());
    }
    let outcome = Outcome {
        files: vec!["report.txt".into(), "policy.json".into()],
        failures,
        summary,
    };
    run.finish(started, outcome)
}

/// Sampling rule and decision policy for a simulated policy choice.
pub fn resolve_policy(scenario: &Scenario, choice: &PolicyChoice, algorithm: Algorithm) -> Result<(SamplingRule, DecisionPolicy)> {
    let model = &scenario.model;
    let file = &scenario.file;
    let baseline = || file.decision_policy(model);
    Ok(match choice {
        PolicyChoice::Got => {
            let r = solve_scenario(scenario, algorithm)?;
            (SamplingRule::Stationary(r.sampling_policy), r.decision_policy)
        }
        PolicyChoice::Uniform(n) => (SamplingRule::uniform(*n)?, baseline()?),
        PolicyChoice::Age(n) => (SamplingRule::AgeThreshold { threshold: *n }, baseline()?),
        PolicyChoice::ChangeAware => (SamplingRule::ChangeAware, baseline()?),
        PolicyChoice::Aoii => (SamplingRule::Stationary(aoii_optimal_policy(model)), baseline()?),
        PolicyChoice::Mse => {
            let d = baseline()?;
            let p = mse_optimal_policy(model, &d, &file.embedding(), &file.rvi_options())?;
            (SamplingRule::Stationary(p), d)
        }
        PolicyChoice::File(path) => {
            let p = PolicyFile::load(path)?;
            let decision = DecisionPolicy::new(p.decision, model.alphabets())?;
            if p.sampling.len() != model.global_states() {
                return Err(CliError::Usage(format!(
                    "{}: sampling policy covers {} states, expected {}",
                    path.display(),
                    p.sampling.len(),
                    model.global_states()
                )));
            }
            (SamplingRule::Stationary(SamplingPolicy::new(p.sampling)), decision)
        }
    })
}

pub fn simulate(run: &Run, choice: &PolicyChoice, algorithm: Algorithm) -> Result<Outcome> {
    let started = run.prepare()?;
    let scenario = &run.scenario;
    let (rule, decision) = resolve_policy(scenario, choice, algorithm)?;
    let sim = &scenario.file.simulation;
    let mut opts = SimOptions::new(sim.horizon, sim.seed, scenario.model.alphabets().states());
    opts.init = scenario.file.initial_conditions();
    opts.embedding = scenario.file.embedding();
    opts.record_trace = true;
    let out = simulate_closed_loop(&scenario.model, &rule, &decision, &opts)?;
    output::write_trace(&run.path("trace.csv"), &out.trace)?;

    let m = &out.summary;
    let d = m.breakdown.decomposition();
    let mut text = String::new();
    let _ = writeln!(text, "policy: {} ({})", rule.label(), decision);
    let _ = writeln!(text, "horizon: {} seed: {}", m.horizon, sim.seed);
    let _ = writeln!(text, "average cost: {} (stderr {})", m.average_cost, m.stderr);
    let _ = writeln!(text, "sampling rate: {}", m.sampling_rate);
    let _ = writeln!(text, "inherent: {}", m.breakdown.inherent);
    let _ = writeln!(text, "actuation gain offset: {}", m.breakdown.actuation_gain_offset);
    let _ = writeln!(text, "actuation expenditure: {}", m.breakdown.actuation_expenditure);
    let _ = writeln!(text, "sampling: {}", m.breakdown.sampling);
    let _ = writeln!(text, "decomposition (sampling, actuation, inherent): {} {} {}", d.sampling, d.actuation, d.inherent);
    let _ = writeln!(text, "mean aoi: {} aoii: {} aoci: {} mse: {} got: {}", m.mean_aoi, m.mean_aoii, m.mean_aoci, m.mean_mse, m.mean_got);
    let _ = writeln!(text, "unsynchronized fraction: {}", m.unsynchronized);
    run.write_text("summary.txt", &text)?;
    let outcome = Outcome {
        files: vec!["trace.csv".into(), "summary.txt".into()],
        failures: Vec::new(),
        summary: format!("simulated {} slots: average cost {} ± {}", m.horizon, m.average_cost, m.stderr),
    };
    run.finish(started, outcome)
}

/// Uniform and age-aware curves, then one point each for the co-design and
/// the remaining baselines.
pub fn sweep_rows(scenario: &Scenario, evaluation: &Evaluation, algorithm: Algorithm) -> Result<Vec<SweepResult>> {
    let model = &scenario.model;
    let file = &scenario.file;
    let init = file.initial_conditions();
    let decision = file.decision_policy(model)?;
    let mut rows = sweep_rate_vs_cost(model, PolicyFamily::Uniform, &file.sweep.uniform_periods, &decision, evaluation, &init)?;
    rows.extend(sweep_rate_vs_cost(model, PolicyFamily::AgeAware, &file.sweep.age_thresholds, &decision, evaluation, &init)?);
    for (label, choice) in [
        ("got", PolicyChoice::Got),
        ("aoii-optimal", PolicyChoice::Aoii),
        ("mse-optimal", PolicyChoice::Mse),
        ("change-aware", PolicyChoice::ChangeAware),
    ] {
        let (rule, d) = resolve_policy(scenario, &choice, algorithm)?;
        rows.push(score_rule(model, label, None, &rule, &d, evaluation, &init)?);
    }
    Ok(rows)
}

pub fn sweep(run: &Run, analytic: bool, algorithm: Algorithm) -> Result<Outcome> {
    let started = run.prepare()?;
    let file = &run.scenario.file;
    let evaluation = if analytic {
        Evaluation::Analytic
    } else {
        let seed = file.simulation.seed;
        Evaluation::Simulated {
            horizon: file.simulation.horizon,
            seeds: (0..file.sweep.replicas.max(1) as u64).map(|k| seed.wrapping_add(k)).collect(),
        }
    };
    let rows = sweep_rows(&run.scenario, &evaluation, algorithm)?;
    output::write_sweep(&run.path("sweep.csv"), &rows)?;
    let outcome = Outcome {
        files: vec!["sweep.csv".into()],
        failures: Vec::new(),
        summary: format!("{} sweep points ({})", rows.len(), if analytic { "analytic" } else { "simulated" }),
    };
    run.finish(started, outcome)
}

fn co_design(scenario: &Scenario, algorithm: Algorithm) -> Result<CoDesign> {
    match algorithm {
        Algorithm::Brute => Ok(CoDesign::BruteForce(scenario.file.brute_options())),
        Algorithm::Jesp => Ok(CoDesign::Jesp(scenario.file.jesp_options())),
        Algorithm::RviFixedDecision => Err(CliError::Usage("compare needs --algorithm brute or jesp".into())),
    }
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

/// Cell singled out in the savings report.
pub const HEADLINE_CELL: (f64, f64) = (0.2, 10.0);

pub fn compare(run: &Run, grid: &GridSpec, algorithm: Algorithm) -> Result<Outcome> {
    let started = run.prepare()?;
    let scenario = &run.scenario;
    let model = &scenario.model;
    let file = &scenario.file;
    let mut opts = CompareOptions::new(co_design(scenario, algorithm)?, file.decision_policy(model)?, model.alphabets().states());
    opts.embedding = file.embedding();
    opts.uniform_periods = file.sweep.uniform_periods.clone();
    opts.threshold_max = file.benchmarks.threshold_max;
    opts.init = file.initial_conditions();
    opts.rvi = file.rvi_options();
    let cells = compare_policies(model, grid, &opts);
    output::write_compare(&run.path("compare.csv"), &cells)?;
    output::write_decomposition(&run.path("decomp.csv"), &cells)?;

    let mut failures = Vec::new();
    let mut text = String::new();
    let mut headline = None;
    let _ = writeln!(text, "pS CS got best_baseline best_cost saving");
    for cell in &cells {
        match &cell.result {
            Ok(c) => {
                let (label, best) = c.best_baseline();
                let saving = c.relative_saving();
                let _ = writeln!(text, "{} {} {} {} {} {}", cell.p_success, cell.sampling_cost, c.got.average_cost, label, best, saving);
                if same(cell.p_success, HEADLINE_CELL.0) && same(cell.sampling_cost, HEADLINE_CELL.1) {
                    headline = Some((label, saving));
                }
            }
            Err(e) => {
                let msg = format!("cell pS={} CS={}: {e}", cell.p_success, cell.sampling_cost);
                eprintln!("{msg}");
                let _ = writeln!(text, "{} {} failed: {e}", cell.p_success, cell.sampling_cost);
                failures.push(msg);
            }
        }
    }
    if let Some((label, saving)) = headline {
        let _ = writeln!(
            text,
            "\nsaving at pS={} CS={} over {label}: {:.2}%",
            HEADLINE_CELL.0,
            HEADLINE_CELL.1,
            100.0 * saving
        );
    }
    run.write_text("savings.txt", &text)?;
    let outcome = Outcome {
        files: vec!["compare.csv".into(), "decomp.csv".into(), "savings.txt".into()],
        summary: format!("{} of {} cells compared", cells.len() - failures.len(), cells.len()),
        failures,
    };
    run.finish(started, outcome)
}

pub fn gap(run: &Run, grid: &GridSpec) -> Result<Outcome> {
    let started = run.prepare()?;
    let file = &run.scenario.file;
    let cells = optimality_gap(&run.scenario.model, grid, &file.brute_options(), &file.jesp_options());
    output::write_gap(&run.path("gap.csv"), &cells)?;

    let mut failures = Vec::new();
    let (mut max_gap, mut min_gap, mut max_rel) = (f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for cell in &cells {
        match &cell.result {
            Ok(g) => {
                max_gap = max_gap.max(g.gap);
                min_gap = min_gap.min(g.gap);
                max_rel = max_rel.max(g.relative_gap());
            }
            Err(e) => {
                let msg = format!("cell pS={} CS={}: {e}", cell.p_success, cell.sampling_cost);
                eprintln!("{msg}");
                failures.push(msg);
            }
        }
    }
    let mut text = String::new();
    let _ = writeln!(text, "cells: {} failed: {}", cells.len(), failures.len());
    let _ = writeln!(text, "min gap: {min_gap}");
    let _ = writeln!(text, "max gap: {max_gap}");
    let _ = writeln!(text, "max relative gap: {max_rel}");
    for f in &failures {
        let _ = writeln!(text, "failed {f}");
    }
    run.write_text("gap.txt", &text)?;
    let outcome = Outcome {
        files: vec!["gap.csv".into(), "gap.txt".into()],
        summary: format!("max gap {max_gap}, max relative gap {max_rel}"),
        failures,
    };
    run.finish(started, outcome)
}

/// Checks a scenario and describes it; writes nothing.
pub fn validate(scenario: &Scenario) -> Result<Outcome> {
    let model = &scenario.model;
    let a = model.alphabets();
    let decision = scenario.file.decision_policy(model)?;
    let summary = format!(
        "valid: {} states, {} contexts, {} actions, {} global states; baseline decision {}",
        a.states(),
        a.contexts(),
        a.actions(),
        model.global_states(),
        decision
    );
    Ok(Outcome {
        summary,
        ..Outcome::default()
    })
}
