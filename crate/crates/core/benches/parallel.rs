//! Sequential vs rayon execution of the batch-parallel hot paths.
//!
//! On a single-core machine both variants should time the same; the
//! difference shows up with more cores.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use icclass::network::{InputBatch, NetworkWeights, DEFAULT_CLASS_WEIGHTS};
use icclass::pipeline::{extract, synthetic_bundle};
use icclass::synthetic::random_features;
use icclass::{Execution, LabelVector};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn extraction(c: &mut Criterion) {
    let bundle = synthetic_bundle("bench", 32, 16, 60.0, 128.0, 1).unwrap();
    let mut group = c.benchmark_group("extract");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| extract(&bundle, exec).unwrap()));
    }
    group.finish();
}

fn classification(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let weights = NetworkWeights::<f32>::init(&mut rng);
    let features: Vec<_> = (0..32).map(|_| random_features(&mut rng)).collect();
    let mut group = c.benchmark_group("classify_many");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| weights.classify_many(&features, exec).unwrap())
        });
    }
    group.finish();
}

fn gradient(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let weights = NetworkWeights::<f32>::init(&mut rng);
    let features: Vec<_> = (0..32).map(|_| random_features(&mut rng)).collect();
    let batch = InputBatch::from_features(&features);
    let targets = vec![LabelVector::normalized([1.0; 7]).unwrap(); features.len()];
    let mut group = c.benchmark_group("batch_gradient");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| weights.batch_gradient(&batch, &targets, &DEFAULT_CLASS_WEIGHTS, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, extraction, classification, gradient);
criterion_main!(benches);
