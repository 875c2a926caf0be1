use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use genrefuse::label_space::{compute_ppmi_with, ItemLabelMatrix};
use genrefuse::metrics::{auc_macro, PredictionMatrix};
use genrefuse::nn::Mode;
use genrefuse::par::Exec;
use genrefuse::text::{build_vocabulary, tfidf_with};
use genrefuse::zoo::{build_audio_cnn, AudioCnnConfig, FilterShape, HeadKind, Width};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

const POLICIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn bench_auc(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let scores = Array2::from_shape_simple_fn((2000, 250), || rng.random::<f64>());
    let truth = Array2::from_shape_simple_fn((2000, 250), || rng.random_bool(0.05));
    let pm = PredictionMatrix::new(scores, truth).unwrap();
    let mut g = c.benchmark_group("auc_macro");
    for (name, exec) in POLICIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| auc_macro(black_box(&pm), exec)));
    }
    g.finish();
}

fn bench_tfidf(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let corpus: Vec<Vec<String>> = (0..2000)
        .map(|_| (0..150).map(|_| format!("w{}", rng.random_range(0..5000))).collect())
        .collect();
    let vocab = build_vocabulary(&corpus, 3000).unwrap();
    let mut g = c.benchmark_group("tfidf");
    for (name, exec) in POLICIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| tfidf_with(exec, black_box(&corpus), &vocab)));
    }
    g.finish();
}

fn bench_conv_forward(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = AudioCnnConfig::new(FilterShape::Sq3x3, Width::Low, HeadKind::Logistic);
    let model = build_audio_cnn(&cfg, 96, 48, 20, 4).unwrap();
    let x = Array2::from_shape_simple_fn((16, 96 * 48), || rng.random_range(-1.0..1.0));
    let mut g = c.benchmark_group("conv_forward");
    g.sample_size(10);
    for (name, exec) in POLICIES {
        let m = model.clone().with_exec(exec);
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| m.forward(black_box(&x), Mode::Eval).unwrap()));
    }
    g.finish();
}

fn bench_ppmi(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let rows: Vec<Vec<usize>> = (0..5000)
        .map(|_| {
            let mut r: Vec<usize> = (0..400).filter(|_| rng.random_bool(0.01)).collect();
            r.push(rng.random_range(0..400));
            r.sort_unstable();
            r.dedup();
            r
        })
        .collect();
    let m = ItemLabelMatrix::new(400, rows).unwrap();
    let mut g = c.benchmark_group("ppmi");
    for (name, exec) in POLICIES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| compute_ppmi_with(exec, black_box(&m)).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, bench_auc, bench_tfidf, bench_conv_forward, bench_ppmi);
criterion_main!(benches);
