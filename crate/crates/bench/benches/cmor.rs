// SPDX-License-Identifier: Apache-2.0

use cmor_bench::{bench_oracle, bench_step, bench_sweep};
use criterion::{criterion_group, criterion_main};

criterion_group!(benches, bench_step, bench_sweep, bench_oracle);
criterion_main!(benches);
