//! Goal-oriented tensor entries, the classic-metric degenerations and the
//! tensor's structural properties.

use gotensor::model::{
    build_got_tensor, degenerate_tensor, got_value, validate_cost_model, CostModel, DecisionPolicy, Degeneration,
    DegenerationParams, Embedding,
};
use proptest::prelude::*;

fn worked_example() -> (CostModel, DecisionPolicy) {
    let cost = CostModel {
        inherent: vec![vec![0.0, 1.0, 3.0], vec![0.0, 2.0, 5.0]],
        gain: vec![0.0, 2.0, 4.0],
        expenditure: vec![0.0, 1.0, 2.0],
        gain_weight: 1.0,
        expenditure_weight: 1.0,
        sampling_cost: 1.0,
    };
    (cost, DecisionPolicy::from_actions(vec![0, 1, 2]))
}

#[test]
fn worked_example_matches_hand_table() {
    // Hand evaluation, indexed [x][φ][x̂].
    let expected = [
        [[0.0, 1.0, 2.0], [0.0, 1.0, 2.0]],
        [[1.0, 1.0, 2.0], [2.0, 1.0, 2.0]],
        [[3.0, 2.0, 2.0], [5.0, 4.0, 3.0]],
    ];
    let (cost, policy) = worked_example();
    let tensor = build_got_tensor(&cost, &policy).unwrap();
    for (x, by_phi) in expected.iter().enumerate() {
        for (phi, row) in by_phi.iter().enumerate() {
            for (xhat, &value) in row.iter().enumerate() {
                assert_eq!(got_value(&tensor, x, phi, xhat).unwrap(), value, "({x}, {phi}, {xhat})");
            }
        }
    }
    assert_eq!(tensor.decision_policy(), Some(&policy));
    assert!(validate_cost_model(&cost, 3, 2, 3).is_empty());
}

#[test]
fn validator_counts_single_nan() {
    let (mut cost, _) = worked_example();
    cost.inherent[1][2] = f64::NAN;
    assert_eq!(validate_cost_model(&cost, 3, 2, 3).len(), 1);
    let (cost, _) = worked_example();
    assert!(!validate_cost_model(&cost, 3, 2, 0).is_empty());
}

#[test]
fn degeneration_examples() {
    let params = DegenerationParams {
        states: 3,
        context_values: vec![1.0, 3.0, 4.0],
        embedding: None,
    };
    let aoi = degenerate_tensor(&Degeneration::Aoi, &params).unwrap();
    assert_eq!(aoi.get(1, 2, 0), 4.0);
    let aoii = degenerate_tensor(&Degeneration::Aoii, &params).unwrap();
    assert_eq!(aoii.get(2, 1, 2), 0.0);
    assert_eq!(aoii.get(2, 1, 0), 3.0);
    let mse = degenerate_tensor(&Degeneration::Mse, &params).unwrap();
    assert_eq!(mse.get(2, 0, 0), 4.0);
    let bad = vec![vec![0.0, 1.0], vec![1.0, 2.0]];
    let two = DegenerationParams {
        states: 2,
        ..params
    };
    assert!(degenerate_tensor(&Degeneration::CostOfActuationError(bad), &two).is_err());
}

#[derive(Debug, Clone)]
struct Instance {
    cost: CostModel,
    policy: DecisionPolicy,
    context_values: Vec<f64>,
    embedding: Vec<f64>,
    error_matrix: Vec<Vec<f64>>,
}

fn instance() -> impl Strategy<Value = Instance> {
    (2usize..=4, 1usize..=3, 1usize..=5).prop_flat_map(|(s, v, m)| {
        (
            prop::collection::vec(prop::collection::vec(0.0f64..50.0, s), v),
            prop::collection::vec(0.0f64..20.0, m),
            prop::collection::vec(0.0f64..5.0, m),
            0.0f64..2.0,
            0.0f64..2.0,
            prop::collection::vec(0..m, s),
            prop::collection::vec(1u32..30, v),
            prop::collection::vec(-5.0f64..5.0, s),
            prop::collection::vec(prop::collection::vec(0.0f64..10.0, s), s),
        )
            .prop_map(|(inherent, gain, expenditure, a, b, actions, ctx, emb, mut err)| {
                for (i, row) in err.iter_mut().enumerate() {
                    row[i] = 0.0;
                }
                Instance {
                    cost: CostModel {
                        inherent,
                        gain,
                        expenditure,
                        gain_weight: a,
                        expenditure_weight: b,
                        sampling_cost: 0.0,
                    },
                    policy: DecisionPolicy::from_actions(actions),
                    context_values: ctx.into_iter().map(f64::from).collect(),
                    embedding: emb,
                    error_matrix: err,
                }
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn entries_follow_ramp_formula(inst in instance()) {
        let t = build_got_tensor(&inst.cost, &inst.policy).unwrap();
        let c = &inst.cost;
        for x in 0..t.states() {
            for phi in 0..t.contexts() {
                for xhat in 0..t.states() {
                    let a = inst.policy.action(xhat);
                    let ramp = (c.inherent[phi][x] - c.gain_weight * c.gain[a]).max(0.0);
                    let floor = c.expenditure_weight * c.expenditure[a];
                    let value = t.get(x, phi, xhat);
                    prop_assert_eq!(value, ramp + floor);
                    prop_assert!(value >= floor);
                    prop_assert_eq!(value == floor, c.inherent[phi][x] <= c.gain_weight * c.gain[a]);
                }
            }
        }
    }

    #[test]
    fn raising_inherent_cost_never_lowers_entries(inst in instance(), bump in 0.0f64..10.0, pick in any::<prop::sample::Index>()) {
        let before = build_got_tensor(&inst.cost, &inst.policy).unwrap();
        let (v, s) = (inst.cost.inherent.len(), inst.policy.len());
        let cell = pick.index(v * s);
        let (phi, x) = (cell / s, cell % s);
        let mut cost = inst.cost.clone();
        cost.inherent[phi][x] += bump;
        let after = build_got_tensor(&cost, &inst.policy).unwrap();
        for xhat in 0..s {
            prop_assert!(after.get(x, phi, xhat) >= before.get(x, phi, xhat));
        }
    }

    #[test]
    fn degenerations_have_their_layer_structure(inst in instance()) {
        let s = inst.policy.len();
        let params = DegenerationParams {
            states: s,
            context_values: inst.context_values.clone(),
            embedding: Some(Embedding::new(inst.embedding.clone())),
        };
        let base = DegenerationParams { context_values: vec![1.0], ..params.clone() };
        let aoi = degenerate_tensor(&Degeneration::Aoi, &params).unwrap();
        let aoii = degenerate_tensor(&Degeneration::Aoii, &params).unwrap();
        let aoii_base = degenerate_tensor(&Degeneration::Aoii, &base).unwrap();
        let mse = degenerate_tensor(&Degeneration::Mse, &params).unwrap();
        let uoi = degenerate_tensor(&Degeneration::Uoi, &params).unwrap();
        let uoi_base = degenerate_tensor(&Degeneration::Uoi, &base).unwrap();
        let coae = degenerate_tensor(&Degeneration::CostOfActuationError(inst.error_matrix.clone()), &params).unwrap();
        for (phi, &value) in inst.context_values.iter().enumerate() {
            for x in 0..s {
                for xhat in 0..s {
                    prop_assert_eq!(aoi.get(x, phi, xhat), value);
                    prop_assert_eq!(aoii.get(x, phi, xhat), value * aoii_base.get(x, 0, xhat));
                    prop_assert_eq!(aoii.get(x, phi, xhat), if x != xhat { value } else { 0.0 });
                    prop_assert_eq!(uoi.get(x, phi, xhat), value * uoi_base.get(x, 0, xhat));
                    let d = inst.embedding[x] - inst.embedding[xhat];
                    prop_assert_eq!(mse.get(x, phi, xhat), d * d);
                    prop_assert_eq!(mse.get(x, phi, xhat), mse.get(x, 0, xhat));
                    prop_assert_eq!(coae.get(x, phi, xhat), inst.error_matrix[x][xhat]);
                    prop_assert_eq!(coae.get(x, phi, xhat), coae.get(x, 0, xhat));
                }
            }
        }
    }
}
