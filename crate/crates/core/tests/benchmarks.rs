//! Baseline sampling policies, their tuning, and the grid studies on the
//! shipped scenario.

mod common;

use common::{all_samplings, gains, joint_chain, random_model, rng};
use gotensor::benchmarks::*;
use gotensor::model::{DecisionPolicy, Embedding, GlobalState, SamplingPolicy};
use gotensor::scenario;
use gotensor::sim::*;
use gotensor::solvers::*;

fn greedy() -> DecisionPolicy {
    DecisionPolicy::from_actions(vec![0, 3, 7])
}

#[test]
fn free_perfect_sampling_is_optimal_for_mse() {
    // Exhaustive oracle on a tiny instance with p_S = 1 and C_S = 0.
    let mut model = random_model(&mut rng(11), 2, 1, 2, 1.0..=1.0);
    model = model.with_sampling_cost(0.0).unwrap();
    let decision = DecisionPolicy::from_actions(vec![0, 1]);
    let emb = Embedding::identity(2);
    let policy = mse_optimal_policy(&model, &decision, &emb, &RviOptions::default()).unwrap();
    let mse_of = |s: &SamplingPolicy| {
        let (p, _) = joint_chain(&model, s, &decision);
        let err: Vec<f64> = model.index().iter().map(|w| emb.squared_error(w.x, w.xhat)).collect();
        gains(&p, &err)[0]
    };
    let best = all_samplings(4).iter().map(mse_of).fold(f64::INFINITY, f64::min);
    assert!((mse_of(&policy) - best).abs() < 1e-9);
    let always = SamplingPolicy::constant(model.index(), true);
    assert!((mse_of(&always) - best).abs() < 1e-9);
}

#[test]
fn mse_policy_beats_aoii_policy_on_mse() {
    let model = scenario::paper_like_with(0.6, 2.0);
    let mse_policy = mse_optimal_policy(&model, &greedy(), &Embedding::identity(3), &RviOptions::default()).unwrap();
    let opts = SimOptions::new(400_000, 17, 3);
    let mse_run = simulate_closed_loop(&model, &SamplingRule::Stationary(mse_policy), &greedy(), &opts).unwrap();
    let aoii_run = simulate_closed_loop(&model, &SamplingRule::Stationary(aoii_optimal_policy(&model)), &greedy(), &opts).unwrap();
    // Both minimize their own objective; compare MSE plus sampling spend.
    let c = model.cost().sampling_cost;
    let objective = |s: &SimSummary| s.mean_mse + c * s.sampling_rate;
    assert!(objective(&mse_run.summary) <= objective(&aoii_run.summary) + 0.01);
}

#[test]
fn aoii_policy_samples_exactly_on_mismatch() {
    let model = scenario::paper_like();
    let p = aoii_optimal_policy(&model);
    for (i, w) in model.index().iter().enumerate() {
        assert_eq!(p.samples(i), w.x != w.xhat);
    }
}

#[test]
fn zero_threshold_always_samples() {
    let model = scenario::paper_like();
    let e = evaluate_rule(&model, &SamplingRule::AgeThreshold { threshold: 0 }, &greedy(), &InitialConditions::default()).unwrap();
    assert!((e.sampling_rate - 1.0).abs() < 1e-12);
    let tuned = tune_age_threshold(&model, &greedy(), 50, &InitialConditions::default()).unwrap();
    assert_eq!(tuned.costs.len(), 51);
    assert!(tuned.costs.iter().all(|&c| c >= tuned.evaluation.average_cost - 1e-12));
    assert!(!tuned.at_boundary);
}

#[test]
fn every_rule_acts_in_every_state() {
    let model = scenario::paper_like();
    let init = InitialConditions::default();
    let rules = [
        SamplingRule::uniform(3).unwrap(),
        SamplingRule::AgeThreshold { threshold: 4 },
        SamplingRule::ChangeAware,
        SamplingRule::Stationary(aoii_optimal_policy(&model)),
    ];
    for rule in rules {
        for mem in 0..rule.memory_size(3) {
            for (i, w) in model.index().iter().enumerate() {
                let _ = rule.decide(mem, w, i);
                for delivered in [false, true] {
                    assert!(rule.next_memory(mem, w, delivered) < rule.memory_size(3));
                }
            }
        }
        assert!(rule.initial_memory(&init) < rule.memory_size(3));
    }
    let _ = GlobalState::new(0, 0, 0);
}

#[test]
fn uniform_sweep_has_one_point_per_period() {
    let model = scenario::paper_like();
    let periods: Vec<usize> = (1..=20).collect();
    let out = sweep_rate_vs_cost(&model, PolicyFamily::Uniform, &periods, &greedy(), &Evaluation::Analytic, &InitialConditions::default()).unwrap();
    assert_eq!(out.len(), 20);
    for (r, d) in out.iter().zip(&periods) {
        assert!((r.sampling_rate - 1.0 / *d as f64).abs() < 1e-12);
        assert!((r.breakdown.total() - r.average_cost).abs() < 1e-12);
    }
}

#[test]
fn co_design_lies_below_benchmark_curves() {
    let model = scenario::paper_like();
    let bf = brute_force_joint(&model, &BruteForceOptions::default()).unwrap();
    let init = InitialConditions::default();
    let got = evaluate_rule(&model, &SamplingRule::Stationary(bf.sampling_policy.clone()), &bf.decision_policy, &init).unwrap();
    for family in [PolicyFamily::Uniform, PolicyFamily::AgeAware] {
        let params: Vec<usize> = (1..=20).collect();
        for r in sweep_rate_vs_cost(&model, family, &params, &greedy(), &Evaluation::Analytic, &init).unwrap() {
            assert!(got.average_cost <= r.average_cost + 1e-9, "{} {:?}", r.policy, r.param);
        }
    }
}

#[test]
fn decomposition_shifts_from_sampling_to_actuation_as_channel_worsens() {
    // Compared between the grid's channel extremes; the intermediate steps
    // are not monotone on the shipped scenario.
    let base = scenario::paper_like();
    let split = |p: f64, c: f64| {
        let model = base.with_channel(p).unwrap().with_sampling_cost(c).unwrap();
        let bf = brute_force_joint(&model, &BruteForceOptions::default()).unwrap();
        let e = evaluate_rule(&model, &SamplingRule::Stationary(bf.sampling_policy), &bf.decision_policy, &InitialConditions::default()).unwrap();
        let d = cost_decomposition(&e.breakdown);
        assert!((d.total() - e.average_cost).abs() < 1e-12);
        d
    };
    for c in [2.0, 4.0, 6.0, 8.0, 10.0] {
        let (good, bad) = (split(1.0, c), split(0.2, c));
        assert!(bad.sampling <= good.sampling, "C_S={c}: sampling {} > {}", bad.sampling, good.sampling);
        assert!(bad.actuation >= good.actuation, "C_S={c}: actuation {} < {}", bad.actuation, good.actuation);
    }
}

#[test]
fn compare_grid_emits_every_cell() {
    let model = scenario::paper_like();
    let grid = GridSpec::parse("pS=0.6,1.0;CS=0,4", &GridSpec::study()).unwrap();
    let opts = CompareOptions::new(CoDesign::Jesp(JespOptions::default()), greedy(), 3);
    let cells = compare_policies(&model, &grid, &opts);
    assert_eq!(cells.len(), 4);
    for cell in cells {
        let cmp = cell.result.unwrap();
        for (label, cost) in cmp.costs() {
            assert!(cost.is_finite(), "{label}");
        }
        if cell.p_success == 1.0 && cell.sampling_cost == 0.0 {
            assert!(cmp.got.average_cost <= cmp.aoii_optimal.average_cost + 1e-9);
            assert!(cmp.got.average_cost <= cmp.mse_optimal.average_cost + 1e-9);
        }
    }
}

#[test]
fn huge_sampling_cost_approaches_never_sampling() {
    let model = scenario::paper_like_with(0.8, 100.0);
    let init = InitialConditions::default();
    let never = evaluate_rule(&model, &SamplingRule::Stationary(SamplingPolicy::constant(model.index(), false)), &greedy(), &init).unwrap();
    let bf = brute_force_joint(&model, &BruteForceOptions::default()).unwrap();
    let got = evaluate_rule(&model, &SamplingRule::Stationary(bf.sampling_policy), &bf.decision_policy, &init).unwrap();
    assert!(got.sampling_rate < 1e-9);
    assert!(got.average_cost <= never.average_cost + 1e-9);
}
