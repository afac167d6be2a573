//! Data-parallel evaluation against a one-thread pool.
//!
//! Build with `--no-default-features` to benchmark the sequential fallback
//! instead of rayon.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hea_dvae::design::{latent_map, MapInput};
use hea_dvae::dvae::{DvaeConfig, DvaeModel};
use hea_dvae::explain::{global_importance, ShapOptions};
use hea_dvae::nncore::seeded_rng;
use hea_dvae::synth::{generate, SynthConfig};
use hea_dvae::{engineered_features, Composition, ElementTable, FeatureScaler};

fn fixture() -> (DvaeModel, Vec<Composition>) {
    let table = ElementTable::bundled();
    let rows = generate(&SynthConfig::default(), table).unwrap();
    let comps: Vec<Composition> = rows.iter().map(|r| r.record.composition).collect();
    let feats: Vec<_> = comps
        .iter()
        .map(|c| engineered_features(table, c).unwrap())
        .collect();
    let scaler = FeatureScaler::fit(&feats).unwrap();
    let model = DvaeModel::init(
        DvaeConfig::default(),
        scaler,
        0.45,
        table.clone(),
        &mut seeded_rng(0),
    )
    .unwrap();
    (model, comps)
}

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let all = rayon::ThreadPoolBuilder::new().build().unwrap();
    vec![("1-thread", one), ("default", all)]
}

fn bench(c: &mut Criterion) {
    let (model, comps) = fixture();
    let inputs: Vec<MapInput> = comps
        .iter()
        .map(|&composition| MapInput {
            composition,
            label: None,
        })
        .collect();
    let mut group = c.benchmark_group("evaluation");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_with_input(
            BenchmarkId::new("classify_batch", name),
            &pool,
            |b, pool| b.iter(|| pool.install(|| black_box(model.classify_batch(&comps).unwrap()))),
        );
        group.bench_with_input(BenchmarkId::new("latent_map", name), &pool, |b, pool| {
            b.iter(|| pool.install(|| black_box(latent_map(&model, &inputs, 60).unwrap())))
        });
        group.bench_with_input(BenchmarkId::new("shap_32x64", name), &pool, |b, pool| {
            let options = ShapOptions {
                max_background: 64,
                seed: 0,
            };
            b.iter(|| {
                pool.install(|| {
                    black_box(global_importance(&model, &comps[..32], &comps, options).unwrap())
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
