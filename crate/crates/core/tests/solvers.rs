//! Solver outputs against exhaustive enumeration and an independent Cesàro
//! limit of the joint chain.

mod common;

use common::{all_decisions, all_samplings, gains, joint_chain, random_model, random_row, rng};
use gotensor::benchmarks::aoii_optimal_policy;
use gotensor::error::Error;
use gotensor::model::{DecisionPolicy, SamplingPolicy};
use gotensor::pomdp::{DecPomdpModel, FiniteMdp};
use gotensor::scenario;
use gotensor::solvers::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

const EPS: f64 = 1e-6;

fn greedy() -> DecisionPolicy {
    DecisionPolicy::from_actions(vec![0, 3, 7])
}

fn mdp_gains(mdp: &FiniteMdp, policy: &[usize]) -> Vec<f64> {
    let n = mdp.states();
    let p: Vec<Vec<f64>> = (0..n).map(|s| mdp.row(s, policy[s]).to_vec()).collect();
    let r: Vec<f64> = (0..n).map(|s| mdp.reward(s, policy[s])).collect();
    gains(&p, &r)
}

fn all_mdp_policies(states: usize, actions: usize) -> Vec<Vec<usize>> {
    all_decisions(states, actions).into_iter().map(|d| d.actions().to_vec()).collect()
}

#[test]
fn stationary_examples() {
    let p = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.5, 0.5]);
    let mu = stationary_distribution(&p).unwrap();
    assert!((mu[0] - 5.0 / 6.0).abs() < 1e-14 && (mu[1] - 1.0 / 6.0).abs() < 1e-14);
    assert!(matches!(stationary_distribution(&DMatrix::identity(2, 2)), Err(Error::Ergodicity { .. })));
    let ds = DMatrix::from_row_slice(3, 3, &[0.2, 0.5, 0.3, 0.3, 0.2, 0.5, 0.5, 0.3, 0.2]);
    for m in stationary_distribution(&ds).unwrap() {
        assert!((m - 1.0 / 3.0).abs() < 1e-14);
    }
    let a = analyze_chain(&p, vec![0.0, -1.0]).unwrap();
    assert!(a.poisson_residual < 1e-10);
    assert_eq!(average_reward(&[0.5, 0.5], &[0.0, -2.0]), -1.0);
    assert_eq!(average_reward(&[0.0, 1.0], &[3.0, -2.0]), -2.0);
    let c = analyze_chain(&p, vec![4.0, 4.0]).unwrap();
    assert!((c.average_reward - 4.0).abs() < 1e-14);
    assert!(c.relative_reward.iter().all(|g| g.abs() < 1e-12));
}

#[test]
fn rvi_toy_matches_enumeration() {
    // A is free, B costs 1 per slot; sampling in B returns to A at cost 0.5.
    let t = vec![
        0.7, 0.3, 0.7, 0.3, // A
        0.0, 1.0, 1.0, 0.0, // B
    ];
    let r = vec![0.0, -0.5, -1.0, -1.5];
    let mdp = FiniteMdp::new(2, 2, t, r).unwrap();
    let sol = rvi_solve(&mdp, &RviOptions::default()).unwrap();
    let best = all_mdp_policies(2, 2)
        .iter()
        .map(|p| mdp_gains(&mdp, p).into_iter().fold(f64::NEG_INFINITY, f64::max))
        .fold(f64::NEG_INFINITY, f64::max);
    assert!((sol.average_reward - best).abs() < EPS, "{} vs {best}", sol.average_reward);
    assert!(sol.residual < EPS);
    assert_eq!(sol.values.values[sol.values.reference_state], 0.0);
}

#[test]
fn rvi_on_shipped_scenario_matches_stationary_gain() {
    let model = scenario::paper_like();
    let mdp = model.induced_mdp(&greedy()).unwrap();
    let sol = rvi_solve(&mdp, &RviOptions::default()).unwrap();
    assert!(sol.residual < EPS);
    for g in mdp_gains(&mdp, &sol.policy) {
        assert!((g - sol.average_reward).abs() < 1e-6, "{g} vs {}", sol.average_reward);
    }
}

#[test]
fn brute_force_with_single_action_equals_rvi() {
    let mut r = rng(3);
    let model = random_model(&mut r, 3, 2, 1, 0.2..=0.9);
    let report = brute_force_joint(&model, &BruteForceOptions::default()).unwrap();
    let direct = rvi_solve(&model.induced_mdp(&DecisionPolicy::from_actions(vec![0; 3])).unwrap(), &RviOptions::default()).unwrap();
    assert_eq!(report.candidates_evaluated, 1);
    assert_eq!(report.average_reward, direct.average_reward);
    assert_eq!(report.sampling_policy, SamplingPolicy::from_actions(&direct.policy));
}

#[test]
fn brute_force_counts_and_budget() {
    let model = scenario::paper_like();
    let report = brute_force_joint(&model, &BruteForceOptions::default()).unwrap();
    assert_eq!(report.candidates_evaluated, 1331);
    assert!(report.residual < EPS && report.converged);
    let err = brute_force_joint(&model, &BruteForceOptions { budget: 1000, ..Default::default() }).unwrap_err();
    assert!(err.to_string().contains("11^3 = 1331"), "{err}");
}

#[test]
fn pi_trace_is_monotone_on_shipped_scenario() {
    let model = scenario::paper_like();
    let pomdp = model.induced_pomdp(&aoii_optimal_policy(&model)).unwrap();
    for start in [greedy(), DecisionPolicy::from_actions(vec![0, 0, 0]), DecisionPolicy::from_actions(vec![10, 10, 10])] {
        let out = pi_step_size(&pomdp, &start, &PiOptions::default()).unwrap();
        for w in out.trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "{:?}", out.trace);
        }
        assert!(out.average_reward >= out.trace[0] - 1e-12);
    }
}

#[test]
fn jesp_output_is_a_nash_equilibrium() {
    let base = scenario::paper_like();
    for (p, c) in [(0.8, 5.0), (0.4, 2.0), (1.0, 8.0)] {
        let model = base.with_channel(p).unwrap().with_sampling_cost(c).unwrap();
        let report = jesp(&model, &JespOptions::default()).unwrap();
        assert_nash(&model, &report);
    }
}

fn assert_nash(model: &DecPomdpModel, report: &SolveReport) {
    let theta = report.average_reward;
    let br = rvi_solve(&model.induced_mdp(&report.decision_policy).unwrap(), &RviOptions::default()).unwrap();
    assert!((br.average_reward - theta).abs() < EPS, "sampler deviation: {} vs {theta}", br.average_reward);
    let (s, m) = (model.alphabets().states(), model.alphabets().actions());
    for o in 0..s {
        for a in 0..m {
            let dev = report.decision_policy.with_action(o, a);
            let (p, cost) = joint_chain(model, &report.sampling_policy, &dev);
            let start = model.index().index(gotensor::model::GlobalState::new(0, 0, 0));
            let eta = -gains(&p, &cost)[start];
            assert!(eta <= theta + EPS, "actuator deviation at o={o} a={a}: {eta} vs {theta}");
        }
    }
}

#[derive(Debug, Clone)]
struct Tiny {
    seed: u64,
}

fn tiny() -> impl Strategy<Value = Tiny> {
    any::<u64>().prop_map(|seed| Tiny { seed })
}

fn tiny_model(seed: u64) -> DecPomdpModel {
    random_model(&mut rng(seed), 2, 1, 2, 0.05..=1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn brute_force_matches_joint_enumeration(t in tiny()) {
        let model = tiny_model(t.seed);
        let report = brute_force_joint(&model, &BruteForceOptions::default()).unwrap();
        let mut best = f64::NEG_INFINITY;
        let mut pairs = 0;
        for decision in all_decisions(2, 2) {
            for sampling in all_samplings(4) {
                let (p, cost) = joint_chain(&model, &sampling, &decision);
                for g in gains(&p, &cost) {
                    // Theorem-style dominance from every start state.
                    prop_assert!(-g <= report.average_reward + EPS, "pair beats optimum: {} > {}", -g, report.average_reward);
                    best = best.max(-g);
                }
                pairs += 1;
            }
        }
        prop_assert_eq!(pairs, 64);
        prop_assert!((best - report.average_reward).abs() < EPS, "{} vs {}", best, report.average_reward);
    }

    #[test]
    fn jesp_matches_brute_force_on_tiny_instances(t in tiny()) {
        let model = tiny_model(t.seed);
        let bf = brute_force_joint(&model, &BruteForceOptions::default()).unwrap();
        let js = jesp(&model, &JespOptions::default()).unwrap();
        // Both gains are span-stopped RVI estimates, each within EPS.
        prop_assert!((js.average_reward - bf.average_reward).abs() < 2.0 * EPS, "{} vs {}", js.average_reward, bf.average_reward);
    }

    #[test]
    fn pi_ends_at_single_deviation_optimum(t in tiny(), extra in prop::collection::vec(any::<bool>(), 4)) {
        let model = tiny_model(t.seed);
        // Sampling every mismatch keeps each chain unichain; extra samples are free form.
        let aoii = aoii_optimal_policy(&model);
        let sampling = SamplingPolicy::new((0..4).map(|i| aoii.samples(i) || extra[i]).collect());
        let pomdp = model.induced_pomdp(&sampling).unwrap();
        let eta = |d: &DecisionPolicy| evaluate_pair(&model, &sampling, d).unwrap().average_reward;
        for start in all_decisions(2, 2) {
            let out = pi_step_size(&pomdp, &start, &PiOptions::default()).unwrap();
            prop_assert!((out.average_reward - eta(&out.policy)).abs() < 1e-12);
            prop_assert!(out.average_reward >= eta(&start) - 1e-12);
            for o in 0..2 {
                for a in 0..2 {
                    let dev = out.policy.with_action(o, a);
                    prop_assert!(eta(&dev) <= out.average_reward + EPS);
                }
            }
        }
    }

    #[test]
    fn analysis_invariants_on_random_chains(seed in any::<u64>(), n in 2usize..7) {
        let mut r = rng(seed);
        let rows: Vec<f64> = (0..n).flat_map(|_| random_row(&mut r, n)).collect();
        let p = DMatrix::from_row_slice(n, n, &rows);
        let reward: Vec<f64> = (0..n).map(|_| r.random_range(-5.0..5.0)).collect();
        let a = analyze_chain(&p, reward).unwrap();
        prop_assert!(a.distribution.iter().all(|&m| m >= 0.0));
        prop_assert!((a.distribution.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        prop_assert!(a.poisson_residual < 1e-8);
        let mg: f64 = a.distribution.iter().zip(&a.relative_reward).map(|(m, g)| m * g).sum();
        prop_assert!(mg.abs() < 1e-10);
    }

    #[test]
    fn posteriors_normalize(seed in any::<u64>()) {
        let model = random_model(&mut rng(seed), 3, 2, 3, 0.1..=1.0);
        let sampling = aoii_optimal_policy(&model);
        let decision = DecisionPolicy::from_actions(vec![0, 1, 2]);
        let analysis = evaluate_pair(&model, &sampling, &decision).unwrap();
        let pomdp = model.induced_pomdp(&sampling).unwrap();
        let q = q_tables(&pomdp, &analysis);
        for (o, post) in q.posterior.iter().enumerate() {
            let post = post.as_ref().expect("every estimate is reachable");
            prop_assert!((post.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (w, &pw) in post.iter().enumerate() {
                if model.index().state(w).xhat != o {
                    prop_assert_eq!(pw, 0.0);
                }
            }
        }
    }

    #[test]
    fn rvi_matches_exhaustive_search(seed in any::<u64>(), n in 2usize..=4, m in 1usize..=3) {
        let mut r = rng(seed);
        let t: Vec<f64> = (0..n * m).flat_map(|_| random_row(&mut r, n)).collect();
        let rewards: Vec<f64> = (0..n * m).map(|_| r.random_range(-3.0..0.0)).collect();
        let mdp = FiniteMdp::new(n, m, t, rewards).unwrap();
        let sol = rvi_solve(&mdp, &RviOptions::default()).unwrap();
        let best = all_mdp_policies(n, m)
            .iter()
            .map(|p| mdp_gains(&mdp, p)[0])
            .fold(f64::NEG_INFINITY, f64::max);
        prop_assert!((sol.average_reward - best).abs() < EPS);
        prop_assert!(sol.residual < EPS);
    }
}
