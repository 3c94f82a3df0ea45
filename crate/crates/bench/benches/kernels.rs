use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use wenet_bench::{conv, dense, normal, rng};
use wenet_core::net::{Model, NetworkConfig};
use wenet_core::nn::{avgpool1d, maxpool1d, BatchNorm, Exec};

const EXECS: [(Exec, &str); 2] = [(Exec::Serial, "serial"), (Exec::Parallel, "parallel")];

fn conv1d(c: &mut Criterion) {
    let mut g = c.benchmark_group("conv1d");
    let layer = conv(32, 16, 7);
    let x = normal(&[4, 16, 2048], 5);
    let dy = normal(&[4, 32, 2048], 6);
    for (exec, name) in EXECS {
        g.bench_with_input(BenchmarkId::new("forward", name), &exec, |b, &e| {
            b.iter(|| layer.forward(black_box(&x), e).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("backward", name), &exec, |b, &e| {
            b.iter(|| layer.backward(black_box(&x), black_box(&dy), e).unwrap())
        });
    }
    g.finish();
}

fn dense_layer(c: &mut Criterion) {
    let mut g = c.benchmark_group("dense");
    let layer = dense(4096, 256);
    let x = normal(&[16, 4096], 7);
    let dy = normal(&[16, 256], 8);
    for (exec, name) in EXECS {
        g.bench_with_input(BenchmarkId::new("forward", name), &exec, |b, &e| {
            b.iter(|| layer.forward(black_box(&x), e).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("backward", name), &exec, |b, &e| {
            b.iter(|| layer.backward(black_box(&x), black_box(&dy), e).unwrap())
        });
    }
    g.finish();
}

fn batchnorm(c: &mut Criterion) {
    let x = normal(&[8, 64, 1024], 9);
    let mut bn = BatchNorm::<f32>::new(64);
    c.bench_function("batchnorm/forward_train", |b| {
        b.iter(|| bn.forward_train(black_box(&x), Exec::Serial).unwrap())
    });
    c.bench_function("batchnorm/forward_eval", |b| {
        b.iter(|| bn.forward_eval(black_box(&x), Exec::Serial).unwrap())
    });
}

fn pooling(c: &mut Criterion) {
    let x = normal(&[8, 64, 1200], 10);
    c.bench_function("pool/avg4", |b| {
        b.iter(|| avgpool1d(black_box(&x), 4).unwrap())
    });
    c.bench_function("pool/max3", |b| {
        b.iter(|| maxpool1d(black_box(&x), 3).unwrap())
    });
}

fn tiny_step(c: &mut Criterion) {
    let mut model = Model::<f32>::build(NetworkConfig::tiny(), 0).unwrap();
    let x = normal(&[32, 1, model.input_length()], 11);
    let d_pred = vec![0.01f32; 32];
    let mut r = rng(12);
    c.bench_function("tiny/forward_backward_32", |b| {
        b.iter(|| {
            let (_, cache) = model.forward_train(black_box(&x), &mut r).unwrap();
            model.backward(&cache, &d_pred).unwrap()
        })
    });
    c.bench_function("tiny/predict_32", |b| {
        b.iter(|| model.predict(black_box(&x)).unwrap())
    });
}

criterion_group!(benches, conv1d, dense_layer, batchnorm, pooling, tiny_step);
criterion_main!(benches);
