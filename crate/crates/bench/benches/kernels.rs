use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use toponet_core::linalg::svd;
use toponet_core::nn::{loss_and_gradients, Hyperparams};
use toponet_core::{
    classify_relu_action, forward, generate, isomap, train, urysohn_multiclass, Matrix, Network,
    NetworkSpec, PointCloud, Shape, ShapeSpec,
};

fn annulus(points_per_class: usize) -> toponet_core::LabeledPointSet {
    generate(&ShapeSpec::new(Shape::default_annulus(), points_per_class, 0)).unwrap()
}

fn network(c: &mut Criterion) {
    let spec = NetworkSpec::relu_softmax(&[2, 5, 5, 2, 2, 2, 2]).unwrap();
    let net = Network::init(&spec, 0).unwrap();
    let data = annulus(500);
    c.bench_function("forward/e1_architecture", |b| {
        b.iter(|| forward(&net, black_box(data.points.point(7))).unwrap())
    });
    let all: Vec<usize> = (0..data.len()).collect();
    c.bench_function("gradient/full_batch_1000", |b| {
        b.iter(|| loss_and_gradients(&net, &data.points, &data.labels, black_box(&all)).unwrap())
    });
    let hp = Hyperparams {
        epochs: 1,
        learning_rate: 0.01,
        ..Hyperparams::default()
    };
    c.bench_function("train/one_epoch_1000", |b| b.iter(|| train(&spec, &data, black_box(&hp)).unwrap()));
}

fn geometry(c: &mut Criterion) {
    let data = generate(&ShapeSpec::new(Shape::default_torus(), 200, 0)).unwrap();
    let field = urysohn_multiclass(&data.classes()).unwrap();
    c.bench_function("urysohn/evaluate_torus_800", |b| {
        b.iter(|| field.evaluate(black_box(&[2.0, 0.1, 0.3])).unwrap())
    });

    let cloud = annulus(150).points;
    c.bench_function("isomap/annulus_300_k10", |b| b.iter(|| isomap(black_box(&cloud), 10, 2).unwrap()));

    let w = Matrix::from_row_major(8, 8, (0..64).map(|i| ((i * 37 % 11) as f64) - 5.0).collect()).unwrap();
    c.bench_function("svd/8x8", |b| b.iter(|| svd(black_box(&w))));

    let mut grid = PointCloud::new(2);
    for i in 0..100 {
        for j in 0..100 {
            grid.push(&[i as f64 / 50.0 - 1.0, j as f64 / 50.0 - 1.0]).unwrap();
        }
    }
    c.bench_function("relu/classify_grid_10000", |b| {
        b.iter_batched(|| grid.clone(), |g| classify_relu_action(&g).unwrap(), BatchSize::LargeInput)
    });
}

criterion_group!(benches, network, geometry);
criterion_main!(benches);
