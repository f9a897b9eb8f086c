//! Micro-benchmarks for the four hot paths: the full dual transform, the
//! in-place Walsh-Hadamard butterfly it delegates to, single-coordinate
//! density updates, and the candidate scan that dominates each fit step.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion, Throughput};
use fsll_core::{
    bases_for, dual_transform, dual_transform_into, fast_wht_inplace, fit, sample,
    scan_candidates, DenseTable, DualTable, FitConfig, IsingGridSpec, ModelState,
    RegularizerTable, SparseTheta, VariableSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_distribution(spec: &VariableSpec, rng: &mut ChaCha8Rng) -> DenseTable {
    let mut values: Vec<f64> = (0..spec.size())
        .map(|_| -(1.0 - rng.gen::<f64>()).ln() + 1e-4)
        .collect();
    let total: f64 = values.iter().sum();
    for v in &mut values {
        *v /= total;
    }
    DenseTable::distribution(spec.clone(), values).unwrap()
}

fn bench_transform(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut group = c.benchmark_group("dual_transform");
    for n in [12usize, 16, 20] {
        let spec = VariableSpec::binary(n).unwrap();
        let table = random_distribution(&spec, &mut rng);
        let bases = bases_for(&spec);
        let mut out = DualTable::zeros(spec.clone());
        group.throughput(Throughput::Elements(spec.size() as u64));
        group.bench_with_input(BenchmarkId::new("binary", n), &table, |b, t| {
            b.iter(|| dual_transform_into(black_box(t), &bases, &mut out).unwrap());
        });
    }
    // Mixed cardinalities exercise the generic strided pass instead of the
    // binary butterfly.
    let spec = VariableSpec::new(vec![4, 3, 5, 2, 3, 4, 2, 2]).unwrap();
    let table = random_distribution(&spec, &mut rng);
    let bases = bases_for(&spec);
    let mut out = DualTable::zeros(spec.clone());
    group.throughput(Throughput::Elements(spec.size() as u64));
    group.bench_with_input(
        BenchmarkId::new("mixed", spec.size()),
        &table,
        |b, t| {
            b.iter(|| dual_transform_into(black_box(t), &bases, &mut out).unwrap());
        },
    );
    group.finish();
}

fn bench_wht(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut group = c.benchmark_group("walsh_hadamard");
    for pow in [10usize, 14, 18] {
        let m = 1usize << pow;
        let seg: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        group.throughput(Throughput::Elements(m as u64));
        group.bench_with_input(BenchmarkId::from_parameter(m), &seg, |b, s| {
            b.iter_batched_ref(
                || s.clone(),
                |buf| fast_wht_inplace(buf).unwrap(),
                BatchSize::LargeInput,
            );
        });
    }
    group.finish();
}

fn bench_apply_update(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let spec = VariableSpec::binary(14).unwrap();
    let mut theta = SparseTheta::new();
    for _ in 0..48 {
        theta.set(rng.gen_range(1..spec.size()), rng.gen_range(-0.5..0.5));
    }
    let mut state = ModelState::from_theta(spec.clone(), theta).unwrap();
    let label = rng.gen_range(1..spec.size());
    let mut flip = false;
    c.bench_function("apply_update/binary-14", |b| {
        b.iter(|| {
            // Alternate the coefficient between two values so the density
            // stays bounded across arbitrarily many iterations.
            flip = !flip;
            let value = if flip { 0.3 } else { -0.3 };
            state.apply_update(black_box(label), value).unwrap();
        })
    });
}

fn bench_scan(c: &mut Criterion) {
    // A realistic mid-fit snapshot: a partially grown model over 2^12
    // states, scanning every label for the best move.
    let grid = IsingGridSpec::new(4, 3, 0.5).unwrap();
    let p_star = grid.true_distribution().unwrap();
    let data = sample(&p_star, 50_000, 11).unwrap();
    let p_d = data.empirical_distribution();
    let config = FitConfig { max_iters: 30, ..FitConfig::default() };
    let (state, _) = fit(&data, &config).unwrap();
    let bases = bases_for(state.spec());
    let d_bar = dual_transform(&p_d, &bases).unwrap();
    let theta_bar = dual_transform(state.density(), &bases).unwrap();
    let r = RegularizerTable::new(state.spec(), data.n_rows() as u64).unwrap();
    let mut group = c.benchmark_group("scan_candidates");
    for (name, prune) in [("pruned", true), ("exhaustive", false)] {
        group.bench_function(name, |b| {
            b.iter(|| {
                scan_candidates(state.theta(), &theta_bar, &d_bar, &r, black_box(prune)).unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_transform, bench_wht, bench_apply_update, bench_scan);
criterion_main!(benches);
