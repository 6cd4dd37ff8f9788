use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use isodyn::linalg::svd;
use isodyn::network::{Loss, SoftmaxCrossEntropy};
use isodyn::reparam::partial_diagonalize;
use isodyn::rng::{gaussian_matrix, gaussian_vector, seeded};
use isodyn::{Activation, Network};

fn svd_bench(c: &mut Criterion) {
    let mut rng = seeded(0, 0);
    for n in [16usize, 64] {
        let m = gaussian_matrix(&mut rng, n, n, 1.0);
        c.bench_function(&format!("svd {n}x{n}"), |b| b.iter(|| svd(black_box(&m)).unwrap()));
    }
    let wide = gaussian_matrix(&mut rng, 16, 3072, 1.0);
    c.bench_function("svd 16x3072", |b| b.iter(|| svd(black_box(&wide)).unwrap()));
}

fn forward_backward(c: &mut Criterion) {
    let net = Network::mlp(&[3072, 16, 10], Activation::IsoTanh, 1).unwrap();
    let x = gaussian_vector(&mut seeded(1, 1), 3072, 1.0);
    c.bench_function("forward 3072-16-10", |b| b.iter(|| net.predict(black_box(&x)).unwrap()));
    c.bench_function("forward+backward 3072-16-10", |b| {
        b.iter(|| {
            let (y, trace) = net.forward(black_box(&x)).unwrap();
            let (_, d) = SoftmaxCrossEntropy.eval(&y, &3);
            net.backward(&trace, &d).unwrap()
        })
    });
}

fn diagonalize(c: &mut Criterion) {
    let net = Network::mlp(&[3072, 16, 10], Activation::IsoTanh, 2).unwrap();
    let l = net.layers();
    let (a, block, b) = (l[0].as_affine().unwrap(), l[1].as_iso().unwrap(), l[2].as_affine().unwrap());
    c.bench_function("partial diagonalize 3072-16-10", |bench| {
        bench.iter(|| partial_diagonalize(black_box(a), block, b).unwrap())
    });
}

criterion_group!(benches, svd_bench, forward_backward, diagonalize);
criterion_main!(benches);
