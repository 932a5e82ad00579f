// SPDX-License-Identifier: Apache-2.0

//! Criterion benchmarks for the simulator hot paths.

use criterion::{black_box, Criterion};

use cmor_core::{
    exhaustive_oracle, run_reservoir, step, sweep, Address, CrossbarBank, DeviceParams,
    LabeledDataset, LatticeState, Rule,
};

pub fn bench_step(c: &mut Criterion) {
    let rule = Rule::new(110);
    let x = LatticeState::from_value(0x9e37_79b9_7f4a_7c15, 64).unwrap();
    c.bench_function("step n=64", |b| b.iter(|| step(black_box(&x), &rule)));
    let x8 = LatticeState::from_value(0b1011_0010, 8).unwrap();
    c.bench_function("reservoir 8x7", |b| {
        b.iter(|| run_reservoir(black_box(&x8), &rule, 7).unwrap())
    });
}

pub fn bench_sweep(c: &mut Criterion) {
    let rule = Rule::new(60);
    let mut bank = CrossbarBank::new(8, 7, DeviceParams::default(), 1.2e-3).unwrap();
    bank.program(Address::new(2, 7), 1).unwrap();
    bank.program(Address::new(4, 7), 1).unwrap();
    c.bench_function("sweep 8x7 (256 inputs)", |b| {
        b.iter(|| sweep(&rule, black_box(&bank)).unwrap())
    });
}

pub fn bench_oracle(c: &mut Criterion) {
    let rule = Rule::new(60);
    let ds = LabeledDataset::xor_task(4, 2, 3).unwrap();
    let params = DeviceParams::ideal();
    let mut group = c.benchmark_group("oracle");
    group.sample_size(10);
    group.bench_function("exhaustive 4x3", |b| {
        b.iter(|| exhaustive_oracle(black_box(&ds), &rule, 4, 3, &params).unwrap())
    });
    group.finish();
}
