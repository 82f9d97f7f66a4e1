use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use resrate::data::{generate, SynthConfig};
use resrate::models::{fit_linear, ModelKind, ModelSpec};
use resrate::{extract, FeatureSet};

fn dataset(size: usize, n: usize) -> Vec<resrate::DatasetRecord> {
    generate(&SynthConfig {
        n_blocks: n,
        seed: 7,
        size_set: vec![(size, size)],
        ..Default::default()
    })
    .unwrap()
    .records
}

fn feature_extraction(c: &mut Criterion) {
    let mut group = c.benchmark_group("extract");
    for size in [4usize, 16, 64] {
        let recs = dataset(size, 256);
        group.throughput(Throughput::Elements(recs.len() as u64));
        group.bench_with_input(BenchmarkId::from_parameter(format!("{size}x{size}")), &recs, |b, recs| {
            b.iter(|| {
                for r in recs {
                    black_box(extract(&r.block));
                }
            })
        });
    }
    group.finish();
}

fn prediction(c: &mut Criterion) {
    let recs = dataset(16, 1024);
    let mut group = c.benchmark_group("predict_16x16");
    group.throughput(Throughput::Elements(recs.len() as u64));
    for kind in ModelKind::ALL {
        let (model, _) = ModelSpec::new(kind).fit(&recs).unwrap();
        group.bench_function(kind.name(), |b| {
            b.iter(|| recs.iter().map(|r| model.predict(&r.block)).sum::<f64>())
        });
    }
    group.finish();
}

fn linear_fit(c: &mut Criterion) {
    let recs = dataset(8, 50_000);
    let feats: Vec<_> = recs.iter().map(|r| extract(&r.block)).collect();
    let rates: Vec<f64> = recs.iter().map(|r| r.rate_bits()).collect();
    c.bench_function("fit_linear_50k", |b| {
        b.iter(|| fit_linear(black_box(&feats), black_box(&rates), FeatureSet::ALL, true).unwrap())
    });
}

criterion_group!(benches, feature_extraction, prediction, linear_fit);
criterion_main!(benches);
