use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;

use coherent_ui::experiment::{run_experiment_with, ExperimentConfig, Protocol};
use coherent_ui::noise::mc_rates_with;
use coherent_ui::optics::Amplitude;
use coherent_ui::parallel::Execution;
use coherent_ui::protocols::{build_two_ref_setup, Hypothesis};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn sample_outcomes(c: &mut Criterion) {
    let setup = build_two_ref_setup(1, 1, 1, 0.5).unwrap();
    let hyp = Hypothesis::new(2, vec![Amplitude::new(0.0, 0.0), Amplitude::new(2.0, 0.0)]).unwrap();
    let shots = 1 << 20;
    let mut group = c.benchmark_group("two_ref_shots");
    group.throughput(Throughput::Elements(shots));
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| {
                setup
                    .sample_outcomes_with(exec, &hyp, black_box(shots), 1)
                    .unwrap()
            })
        });
    }
    group.finish();
}

fn noisy_rates(c: &mut Criterion) {
    let shots = 1 << 18;
    let mut group = c.benchmark_group("noise_rates_shots");
    group.throughput(Throughput::Elements(shots));
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| mc_rates_with(exec, 1, 1, 0.25, 1.0, black_box(shots), 3).unwrap())
        });
    }
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let mut cfg = ExperimentConfig::default_for(Protocol::TwoRef);
    cfg.shots = 20_000;
    cfg.seed = 5;
    let mut group = c.benchmark_group("two_ref_sweep");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| run_experiment_with(exec, black_box(&cfg)).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, sample_outcomes, noisy_rates, sweep);
criterion_main!(benches);
