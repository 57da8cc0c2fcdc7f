//! Subcommands end to end: output shapes, determinism and exit codes.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::path::Path;
use std::process::Command;

use gotensor::sim::GridSpec;
use gotensor_cli::commands::{self, PolicyChoice, Run};
use gotensor_cli::manifest::sha256_hex;
use gotensor_cli::output::{SWEEP_HEADER, TRACE_HEADER};
use gotensor_cli::scenario_file::{Algorithm, Scenario, ScenarioFile};

fn run_at(dir: &Path, scenario: Scenario) -> Run {
    Run {
        scenario,
        out: dir.to_path_buf(),
        command_line: vec!["test".into()],
    }
}

fn with_horizon(horizon: u64) -> Scenario {
    let mut s = Scenario::built_in();
    s.file.simulation.horizon = horizon;
    s
}

fn lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().map(String::from).collect()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gotensor"))
}

#[test]
fn trace_has_one_row_per_slot() {
    let dir = tempfile::tempdir().unwrap();
    let run = run_at(dir.path(), with_horizon(100));
    let out = commands::simulate(&run, &PolicyChoice::Uniform(3), Algorithm::Brute).unwrap();
    assert!(out.success());
    let rows = lines(&dir.path().join("trace.csv"));
    assert_eq!(rows.len(), 101);
    assert_eq!(rows[0], TRACE_HEADER.join(","));
    // Samples at t = 0, 3, 6, ... carry a channel outcome; idle slots leave h empty.
    let h: Vec<&str> = rows[1..].iter().map(|r| r.split(',').nth(6).unwrap()).collect();
    for (t, v) in h.iter().enumerate() {
        assert_eq!(t % 3 == 0, !v.is_empty(), "slot {t}");
    }
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn sweep_has_twenty_rows_per_uniform_family() {
    let dir = tempfile::tempdir().unwrap();
    let run = run_at(dir.path(), Scenario::built_in());
    commands::sweep(&run, true, Algorithm::Brute).unwrap();
    let rows = lines(&dir.path().join("sweep.csv"));
    assert_eq!(rows[0], SWEEP_HEADER.join(","));
    let count = |p: &str| rows.iter().filter(|r| r.starts_with(&format!("{p},"))).count();
    assert_eq!(count("uniform"), 20);
    assert_eq!(count("age-aware"), 21);
    for p in ["got", "aoii-optimal", "mse-optimal", "change-aware"] {
        assert_eq!(count(p), 1, "{p}");
    }
}

#[test]
fn single_action_brute_force_equals_fixed_decision_solve() {
    let model = common::random_model(&mut common::rng(5), 3, 2, 1, 0.3..=0.9);
    let text = ScenarioFile::from_model(&model, Some("one-action".into())).to_toml();
    let scenario = Scenario::from_text(&text, None).unwrap();
    let brute = commands::solve_scenario(&scenario, Algorithm::Brute).unwrap();
    let fixed = commands::solve_scenario(&scenario, Algorithm::RviFixedDecision).unwrap();
    assert_eq!(brute, fixed);
    let body = |a: Algorithm, r| {
        let text = commands::render_report(&scenario, a, r, None);
        text.lines().filter(|l| !l.starts_with("algorithm:")).collect::<Vec<_>>().join("\n")
    };
    assert_eq!(body(Algorithm::Brute, &brute), body(Algorithm::RviFixedDecision, &fixed));
}

#[test]
fn solve_writes_report_and_policy_file() {
    let dir = tempfile::tempdir().unwrap();
    let run = run_at(dir.path(), with_horizon(2000));
    let out = commands::solve(&run, Algorithm::Brute).unwrap();
    assert!(out.success());
    let report = fs::read_to_string(dir.path().join("report.txt")).unwrap();
    assert!(report.contains("candidates evaluated: 1331"));
    assert!(report.contains("converged: true"));

    // A simulation driven by the written policy file replays the solved pair.
    let from_file = tempfile::tempdir().unwrap();
    let choice = PolicyChoice::File(dir.path().join("policy.json"));
    commands::simulate(&run_at(from_file.path(), with_horizon(2000)), &choice, Algorithm::Brute).unwrap();
    let solved = tempfile::tempdir().unwrap();
    commands::simulate(&run_at(solved.path(), with_horizon(2000)), &PolicyChoice::Got, Algorithm::Brute).unwrap();
    assert_eq!(
        fs::read(from_file.path().join("trace.csv")).unwrap(),
        fs::read(solved.path().join("trace.csv")).unwrap()
    );
}

#[test]
fn jesp_is_within_five_percent_of_brute_force() {
    let scenario = Scenario::built_in();
    let bf = commands::solve_scenario(&scenario, Algorithm::Brute).unwrap();
    let js = commands::solve_scenario(&scenario, Algorithm::Jesp).unwrap();
    let gap = js.average_cost() - bf.average_cost();
    assert!(gap >= -1e-6);
    assert!(gap <= 0.05 * bf.average_cost());
}

#[test]
fn reruns_are_byte_identical() {
    let hashes = |dir: &Path| -> Vec<(String, String)> {
        let mut out: Vec<_> = fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.file_name().unwrap() != "manifest.json")
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), sha256_hex(&fs::read(&p).unwrap())))
            .collect();
        out.sort();
        out
    };
    let once = |dir: &Path| {
        let run = run_at(dir, with_horizon(5000));
        commands::simulate(&run, &PolicyChoice::Age(2), Algorithm::Brute).unwrap();
        commands::sweep(&run, false, Algorithm::Jesp).unwrap();
        hashes(dir)
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = once(a.path());
    assert_eq!(first.len(), 3);
    assert_eq!(first, once(b.path()));
}

#[test]
fn compare_emits_every_cell_and_a_saving() {
    let dir = tempfile::tempdir().unwrap();
    let run = run_at(dir.path(), Scenario::built_in());
    let grid = GridSpec::parse("pS=0.2,1.0;CS=10", &GridSpec::study()).unwrap();
    let out = commands::compare(&run, &grid, Algorithm::Jesp).unwrap();
    assert!(out.success());
    let compare = lines(&dir.path().join("compare.csv"));
    assert_eq!(compare[0], "pS,CS,policy,cost");
    assert_eq!(compare.len(), 1 + 2 * 6);
    let decomp = lines(&dir.path().join("decomp.csv"));
    assert_eq!(decomp[0], "pS,CS,sampling,actuation,inherent");
    assert_eq!(decomp.len(), 3);
    let savings = fs::read_to_string(dir.path().join("savings.txt")).unwrap();
    assert!(savings.contains("saving at pS=0.2 CS=10"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let shipped = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/paper_like.toml");
    let status = bin().args(["validate", "--scenario"]).arg(&shipped).status().unwrap();
    assert_eq!(status.code(), Some(0));

    let bad = dir.path().join("bad.toml");
    let mut file = ScenarioFile::paper_like();
    file.source.rows[2][0][4][1] += 0.01;
    fs::write(&bad, file.to_toml()).unwrap();
    let out = bin().args(["validate", "--scenario"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("source[2][0][4]"));

    let out = bin().args(["solve", "--algorithm", "simplex"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["gap", "--grid", "pS=2"]).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn failing_cells_are_reported_and_the_grid_continues() {
    let dir = tempfile::tempdir().unwrap();
    let mut file = ScenarioFile::paper_like();
    file.solver.max_iterations = 2;
    let path = dir.path().join("capped.toml");
    fs::write(&path, file.to_toml()).unwrap();
    let out_dir = dir.path().join("out");
    let out = bin()
        .args(["gap", "--grid", "pS=0.6,1.0;CS=0", "--scenario"])
        .arg(&path)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("pS=0.6") && stderr.contains("pS=1"), "{stderr}");
    assert_eq!(lines(&out_dir.join("gap.csv")), vec!["pS,CS,theta_bf,theta_jesp,gap".to_string()]);
    assert!(out_dir.join("manifest.json").exists());
}
