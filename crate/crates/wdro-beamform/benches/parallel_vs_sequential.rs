//! Benchmarks the rayon-backed execution paths against forced sequential
//! execution on the two Monte Carlo hot loops: sweep trial evaluation and
//! chance-constraint sampling.
//!
//! Built with `--no-default-features` both variants run sequentially, which
//! makes the comparison a direct measure of the rayon speedup.

use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::DMatrix;
use std::hint::black_box;

use wdro_beamform::exec::{map_indexed, Parallelism};
use wdro_beamform::harness::{
    evaluate_trial, EpsilonRule, ExperimentSetup, MethodSpec, SweepAxis,
};
use wdro_beamform::lift::LiftedVector;
use wdro_beamform::oracle::chance_probability_mc_with;
use wdro_beamform::scenario::{
    ArrayGeometry, PerturbationModel, Scenario, SourceSpec,
};

fn bench_setup() -> ExperimentSetup {
    let scenario = Scenario::new(
        ArrayGeometry::half_wavelength(6).unwrap(),
        SourceSpec::desired(0.0, 10.0).unwrap(),
        vec![SourceSpec::interferer(30.0, 100.0).unwrap()],
        1.0,
        PerturbationModel::GaussianAdditive { scale: 0.05 },
        0,
    )
    .unwrap();
    ExperimentSetup {
        scenario,
        methods: vec![
            MethodSpec::MvdrSmi,
            MethodSpec::WdroNorm {
                epsilon: EpsilonRule::Fixed(0.4),
            },
            MethodSpec::DiagLoad { rho: 1.0 },
        ],
        snapshots: 48,
        steering_samples: 24,
        trials: 64,
        mismatch_deg: 1.5,
        seed: 11,
    }
}

fn sweep_trials(c: &mut Criterion) {
    let setup = bench_setup();
    let trials = setup.trials;
    let mut group = c.benchmark_group("sweep_trials");
    group.sample_size(10);
    for (name, mode) in [
        ("sequential", Parallelism::Sequential),
        ("parallel", Parallelism::Auto),
    ] {
        group.bench_function(name, |b| {
            b.iter(|| {
                let results = map_indexed(mode, trials, |t| {
                    evaluate_trial(
                        black_box(&setup),
                        Some((SweepAxis::MismatchDeg, 1.5)),
                        t as u64,
                    )
                    .unwrap()
                });
                black_box(results)
            })
        });
    }
    group.finish();
}

fn chance_monte_carlo(c: &mut Criterion) {
    let dim = 8;
    let w = LiftedVector::from_vector(nalgebra::DVector::from_fn(dim, |k, _| {
        0.3 + 0.05 * k as f64
    }))
    .unwrap();
    let mean = LiftedVector::from_vector(nalgebra::DVector::from_element(dim, 0.5)).unwrap();
    let cov = DMatrix::identity(dim, dim) * 0.05;
    let mut group = c.benchmark_group("chance_monte_carlo");
    group.sample_size(10);
    for (name, mode) in [
        ("sequential", Parallelism::Sequential),
        ("parallel", Parallelism::Auto),
    ] {
        group.bench_function(name, |b| {
            b.iter(|| {
                chance_probability_mc_with(
                    mode,
                    black_box(&w),
                    black_box(&mean),
                    black_box(&cov),
                    200_000,
                    13,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, sweep_trials, chance_monte_carlo);
criterion_main!(benches);
