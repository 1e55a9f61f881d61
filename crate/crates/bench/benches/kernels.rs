use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hankel_bench::oscillating_series;
use hankel_core::{
    align_embeddings, block_hankel, decompose, forecast, hankel_embed, identify_output_only,
    kalman_filter, online_forecast_eval, pca_embed, rts_smooth, trajectory_matrix,
    OnlineEvalConfig, RankSpec,
};

fn embeddings(c: &mut Criterion) {
    let mut group = c.benchmark_group("embedding");
    for &(t, l) in &[(500usize, 10usize), (2000, 20), (2000, 50)] {
        let ts = oscillating_series(t, 2, 7);
        let id = format!("T{t}_L{l}");
        group.bench_with_input(BenchmarkId::new("hankel_svd", &id), &ts, |b, ts| {
            b.iter(|| {
                let h = block_hankel(ts, l).unwrap();
                black_box(decompose(&h, RankSpec::Fixed(4)).unwrap())
            })
        });
        group.bench_with_input(BenchmarkId::new("timecluster_pca", &id), &ts, |b, ts| {
            b.iter(|| {
                let z = trajectory_matrix(ts, l, 1).unwrap();
                black_box(pca_embed(&z, 4, false).unwrap())
            })
        });
        group.bench_with_input(BenchmarkId::new("both_and_align", &id), &ts, |b, ts| {
            b.iter(|| {
                let z = trajectory_matrix(ts, l, 1).unwrap();
                let h = block_hankel(ts, l).unwrap();
                let (_, sub) = hankel_embed(&h, RankSpec::Fixed(4), false).unwrap();
                let tc = pca_embed(&z, 4, false).unwrap();
                black_box(align_embeddings(&tc, &sub).unwrap().residual)
            })
        });
    }
    group.finish();
}

fn identification(c: &mut Criterion) {
    let ts = oscillating_series(2000, 2, 11);
    c.bench_function("identify_output_only/T2000_L20", |b| {
        b.iter(|| black_box(identify_output_only(&ts, 20, RankSpec::Fixed(4)).unwrap()))
    });
}

fn kalman(c: &mut Criterion) {
    let ts = oscillating_series(2000, 2, 13);
    let model = identify_output_only(&ts, 20, RankSpec::Fixed(4)).unwrap().model;
    c.bench_function("kalman_filter/T2000_n4", |b| {
        b.iter(|| black_box(kalman_filter(&model, &ts, None, None).unwrap()))
    });
    let filtered = kalman_filter(&model, &ts, None, None).unwrap();
    c.bench_function("rts_smooth/T2000_n4", |b| {
        b.iter(|| black_box(rts_smooth(&model, &filtered).unwrap()))
    });
    let last = filtered.last().unwrap();
    c.bench_function("forecast/h100_n4", |b| {
        b.iter(|| black_box(forecast(&model, last, 100).unwrap()))
    });
}

fn online_eval(c: &mut Criterion) {
    let ts = oscillating_series(400, 1, 17);
    let config = OnlineEvalConfig {
        window_length: 10,
        rank: RankSpec::Fixed(2),
        refit_every: 10,
        warmup: 50,
    };
    let mut group = c.benchmark_group("online_eval");
    group.sample_size(10);
    group.bench_function("T400_refit10", |b| {
        b.iter(|| black_box(online_forecast_eval(&config, &ts, 200).unwrap().rmse))
    });
    group.finish();
}

criterion_group!(benches, embeddings, identification, kalman, online_eval);
criterion_main!(benches);
