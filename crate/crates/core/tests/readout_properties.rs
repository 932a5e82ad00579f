// SPDX-License-Identifier: Apache-2.0

use cmor_core::readout::PlanWrite;
use cmor_core::{
    exhaustive_oracle, featurize, quantize_plan, train_linear, Address, Class, DeviceParams,
    HingeConfig, LabeledDataset, LatticeState, Rule,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_dataset(n: usize, items: usize, seed: u64) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items = (0..items)
        .map(|_| {
            let x = LatticeState::from_value(rng.gen_range(0..1u64 << n), n).unwrap();
            (x, Class::from_sign(rng.gen()))
        })
        .collect();
    LabeledDataset::new(items).unwrap()
}

fn trained_plan(
    ds: &LabeledDataset,
    rule: &Rule,
    m: usize,
    params: &DeviceParams,
) -> cmor_core::ProgrammingPlan {
    let f = featurize(ds, rule, m).unwrap();
    let cfg = HingeConfig {
        epochs: 1000,
        ..HingeConfig::default()
    };
    let model = train_linear(&f, &ds.labels(), &cfg).unwrap();
    quantize_plan(&model.weights, model.bias, &f, &ds.labels(), params).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn oracle_dominates_quantized_plan(seed: u64, number in 0u8..=255) {
        let rule = Rule::new(number);
        let params = DeviceParams::ideal();
        let ds = random_dataset(4, 8, seed);
        let plan = trained_plan(&ds, &rule, 3, &params);
        let oracle = exhaustive_oracle(&ds, &rule, 4, 3, &params).unwrap();
        prop_assert!(oracle.achieved_accuracy >= plan.achieved_accuracy);
    }

    #[test]
    fn plans_replay_their_accuracy(seed: u64, number in 0u8..=255) {
        let rule = Rule::new(number);
        let params = DeviceParams::ideal();
        let ds = random_dataset(4, 12, seed);
        let f = featurize(&ds, &rule, 3).unwrap();
        let plan = trained_plan(&ds, &rule, 3, &params);
        prop_assert_eq!(plan.replay_accuracy(&params, &f, &ds.labels()).unwrap(), plan.achieved_accuracy);
        let back: cmor_core::ProgrammingPlan = plan.to_text().parse().unwrap();
        prop_assert_eq!(back.replay_accuracy(&params, &f, &ds.labels()).unwrap(), plan.achieved_accuracy);
        let mut addresses: Vec<Address> = plan.writes.iter().map(|w| w.address).collect();
        addresses.dedup();
        prop_assert_eq!(addresses.len(), plan.writes.len());
    }

    #[test]
    fn single_cell_labels_need_one_write(number in 0u8..=255, flat in 0usize..21) {
        // n = 7, m = 3; label the full input space by one trace cell.
        let rule = Rule::new(number);
        let target = Address::from_flat_index(flat, 7);
        let items: Vec<_> = (0..128u64)
            .map(|v| {
                let x = LatticeState::from_value(v, 7).unwrap();
                let t = cmor_core::run_reservoir(&x, &rule, 3).unwrap();
                (x, Class::from_sign(t.cell_state(target.iteration, target.cell).unwrap()))
            })
            .collect();
        let positives = items.iter().filter(|(_, y)| *y == Class::Positive).count();
        prop_assume!(positives > 0 && positives < items.len());
        let ds = LabeledDataset::new(items).unwrap();
        let plan = trained_plan(&ds, &rule, 3, &DeviceParams::default());
        prop_assert_eq!(plan.achieved_accuracy, 1.0);
        prop_assert!(plan.writes.len() <= 1, "{:?}", plan.writes);
    }

    #[test]
    fn positive_scaling_does_not_change_the_plan(seed: u64, scale in 0.01f64..100.0) {
        let rule = Rule::new(90);
        let ds = random_dataset(4, 12, seed);
        let f = featurize(&ds, &rule, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let base = DeviceParams::ideal();
        let scaled_w: Vec<f64> = w.iter().map(|v| v * scale).collect();
        let a = quantize_plan(&w, 0.3, &f, &ds.labels(), &base).unwrap();
        let b = quantize_plan(&scaled_w, 0.3 * scale, &f, &ds.labels(), &base).unwrap();
        prop_assert_eq!(&a.writes, &b.writes);
        // Rescaling the level grid scales every read and the threshold alike.
        let grid = DeviceParams { lrs_nominal: base.lrs_nominal * 3.0, ..base.clone() };
        let c = quantize_plan(&scaled_w, 0.3 * scale, &f, &ds.labels(), &grid).unwrap();
        prop_assert_eq!(&a.writes, &c.writes);
        let positives = |plan: &cmor_core::ProgrammingPlan, p: &DeviceParams| {
            let bank = plan.realize(p).unwrap();
            f.rows().iter().map(|r| bank.read_flat(r).unwrap() > plan.g_b).collect::<Vec<_>>()
        };
        prop_assert_eq!(positives(&a, &base), positives(&c, &grid));
    }
}

#[test]
fn xor_task_trains_to_one_write() {
    let rule = Rule::new(60);
    let ds = LabeledDataset::xor_task(8, 5, 7).unwrap();
    let f = featurize(&ds, &rule, 7).unwrap();
    let model = train_linear(&f, &ds.labels(), &HingeConfig::default()).unwrap();
    assert_eq!(model.accuracy(&f, &ds.labels()), 1.0);
    assert!(model.converged);
    let plan = quantize_plan(
        &model.weights,
        model.bias,
        &f,
        &ds.labels(),
        &DeviceParams::default(),
    )
    .unwrap();
    assert_eq!(
        plan.writes,
        vec![PlanWrite {
            address: Address::new(2, 7),
            level: 1
        }]
    );
    assert_eq!(plan.achieved_accuracy, 1.0);
}

#[test]
fn oracle_solves_small_xor() {
    let ds = LabeledDataset::xor_task(4, 2, 3).unwrap();
    let plan = exhaustive_oracle(&ds, &Rule::new(60), 4, 3, &DeviceParams::ideal()).unwrap();
    assert_eq!(plan.achieved_accuracy, 1.0);
    assert_eq!(plan.writes.len(), 1);
}
