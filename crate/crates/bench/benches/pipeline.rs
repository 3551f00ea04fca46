use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use vews_core::eval::{FeatureMode, FeatureTable};
use vews_core::models::train_svm;
use vews_core::wtpm::{train_autoencoder, transition_matrix};
use vews_core::wvb::wvb_features;
use vews_core::{corpus_logs, default_params, generate, AutoencoderConfig, Dataset};

fn corpus(users: usize) -> vews_core::Corpus {
    generate(&default_params().with_users(users, users).with_seed(1))
        .unwrap()
        .to_corpus(true)
        .unwrap()
}

fn features(c: &mut Criterion) {
    let corpus = corpus(500);
    let logs = corpus_logs(&corpus);
    c.bench_function("corpus_logs/1000 users", |b| b.iter(|| corpus_logs(&corpus)));
    c.bench_function("transition_matrix/1000 users", |b| {
        b.iter(|| logs.iter().map(|l| transition_matrix(l, None).transitions()).sum::<u32>())
    });
    c.bench_function("wvb_features/1000 users", |b| {
        b.iter(|| logs.iter().map(|l| wvb_features(l, None).to_vec().len()).sum::<usize>())
    });
}

fn training(c: &mut Criterion) {
    let ds = Dataset::from_corpus(&corpus(500));
    let table = FeatureTable::build(&ds, FeatureMode::Vews, None).unwrap();
    let config = AutoencoderConfig { hidden: 64, epochs: 1, ..AutoencoderConfig::default() };
    let mut group = c.benchmark_group("training");
    group.sample_size(10);
    group.bench_function("autoencoder epoch/1000 users", |b| {
        b.iter(|| train_autoencoder(table.tpm.as_ref().unwrap(), config, 1).unwrap())
    });
    group.bench_function("svm/1000 users", |b| {
        b.iter_batched(|| table.wvb.clone(), |x| train_svm(&x, &ds.labels, 1e-4, 20, 1).unwrap(), BatchSize::LargeInput)
    });
    group.finish();
}

criterion_group!(benches, features, training);
criterion_main!(benches);
