//! Mask search and interaction range on a 1-thread pool against the default pool.
//! `cargo bench -p fisc-core --no-default-features` runs the sequential build.

use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use fisc_core::effects::ReplacementStrategy;
use fisc_core::rashomon::{fisc_range, search_all_features, RashomonConfig};
use fisc_core::{Dataset, FeatureSet, LossKind, PredictiveModel, SharedModel};
use fisc_core::model::SumProductModel;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

fn workload() -> (SharedModel, Dataset, RashomonConfig) {
    let model: SharedModel = Arc::new(SumProductModel::new(3, 6).unwrap());
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let rows: Vec<Vec<f64>> = (0..400).map(|_| (0..6).map(|_| StandardNormal.sample(&mut r)).collect()).collect();
    let y = rows.iter().map(|x| model.predict_row(x)).collect();
    let data = Dataset::from_rows(&rows, y).unwrap();
    let cfg = RashomonConfig::new(0.1, LossKind::Mse, ReplacementStrategy::permutation(5, 1));
    (model, data, cfg)
}

fn run(model: &SharedModel, data: &Dataset, cfg: &RashomonConfig) -> f64 {
    let class = search_all_features(model, data, cfg).unwrap();
    let pair = FeatureSet::pair(0, 1).unwrap();
    fisc_range(model, data, &class, &pair, cfg).unwrap().max
}

fn bench(c: &mut Criterion) {
    let (model, data, cfg) = workload();
    let mut group = c.benchmark_group("search+fisc");
    group.sample_size(10);
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    group.bench_function("1 thread", |b| b.iter(|| single.install(|| run(&model, &data, &cfg))));
    let pool = rayon::ThreadPoolBuilder::new().build().unwrap();
    group.bench_function(format!("{} threads", pool.current_num_threads()), |b| {
        b.iter(|| pool.install(|| run(&model, &data, &cfg)))
    });
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
