//! Compares the rayon-backed trial loop against the sequential fallback on
//! the workloads the experiment harness actually runs: repeated LEMF
//! estimation on the 4d Gaussian benchmark and batched heat-conduction
//! solves.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use mfcov_core::models::{presets, sample_hierarchy, CoupledModel};
use mfcov_core::parallel::{run_trials, run_trials_seq};
use mfcov_core::rng::trial_seed;
use mfcov_core::{lemf_estimate, optimal_allocation, optimal_coefficients, MeanMode, Rounding};

fn lemf_trials(c: &mut Criterion) {
    let model = presets::gaussian_4d();
    let moments = model.closed_form_moments().unwrap();
    let plan = optimal_allocation(&moments, model.costs(), 15.0, Rounding::Floor).unwrap();
    let alphas = optimal_coefficients(&moments);
    let trial = |t: usize| -> f64 {
        let seed = trial_seed(42, t as u64);
        let (h, _) = sample_hierarchy(&model, &plan.n, seed).unwrap();
        let est = lemf_estimate(&h, &alphas, MeanMode::KnownZero).unwrap();
        est.smallest_eigenvalue()
    };

    let mut group = c.benchmark_group("lemf_gaussian_4d_trials");
    group.sample_size(10);
    for trials in [16usize, 64] {
        group.bench_with_input(BenchmarkId::new("parallel", trials), &trials, |b, &n| {
            b.iter(|| run_trials(n, trial))
        });
        group.bench_with_input(BenchmarkId::new("sequential", trials), &trials, |b, &n| {
            b.iter(|| run_trials_seq(n, trial))
        });
    }
    group.finish();
}

fn heat_solves(c: &mut Criterion) {
    let model = presets::heat_desk();
    let solve = |i: usize| -> f64 {
        let mut rng = mfcov_core::rng::event_rng(7, i as u64);
        let theta = model.draw_event(&mut rng);
        let y = model.evaluate(&theta, 0).unwrap();
        y[4]
    };

    let mut group = c.benchmark_group("heat_4096_solves");
    group.sample_size(10);
    for count in [64usize, 256] {
        group.bench_with_input(BenchmarkId::new("parallel", count), &count, |b, &n| {
            b.iter(|| run_trials(n, solve))
        });
        group.bench_with_input(BenchmarkId::new("sequential", count), &count, |b, &n| {
            b.iter(|| run_trials_seq(n, solve))
        });
    }
    group.finish();
}

criterion_group!(benches, lemf_trials, heat_solves);
criterion_main!(benches);
