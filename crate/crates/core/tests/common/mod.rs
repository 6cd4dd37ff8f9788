#![allow(dead_code)]

use isodyn::network::{Loss, SquaredError};
use isodyn::rng::{gaussian, gaussian_vector, seeded};
use isodyn::{Activation, Layer, Matrix, Network, RadialNormalizer, Vector};

/// Orthogonal matrix as a product of `n` Householder reflections of seeded
/// Gaussian directions.
pub fn householder_orthogonal(n: usize, seed: u64) -> Matrix {
    let mut rng = seeded(seed, 0x40);
    let mut q = Matrix::identity(n);
    for _ in 0..n {
        let v = gaussian_vector(&mut rng, n, 1.0);
        let vv = v.norm_sq();
        // q ← (I − 2vvᵀ/vᵀv) q
        let vq = q.tr_matvec(&v);
        q.add_outer(-2.0 / vv, &v, &vq);
    }
    q
}

pub fn probes(dim: usize, count: usize, seed: u64, scale: f64) -> Vec<Vector> {
    let mut rng = seeded(seed, 0x77);
    (0..count).map(|_| gaussian_vector(&mut rng, dim, scale)).collect()
}

/// Seeded isotropic MLP with random biases and intrinsic lengths, and
/// optionally a warmed-up normaliser in front of every block.
pub fn random_iso_net(widths: &[usize], seed: u64, normalized: bool) -> Network {
    let mut net = Network::mlp(widths, Activation::IsoTanh, seed).unwrap();
    let mut rng = seeded(seed, 0xb1a5);
    for layer in net.layers_mut().iter_mut() {
        match layer {
            Layer::Affine(a) => {
                for b in a.b.iter_mut() {
                    *b = 0.5 * gaussian(&mut rng);
                }
            }
            Layer::Iso(block) => {
                block.lambda = (0.05 + 0.5 * gaussian(&mut rng).abs()).ln();
                if normalized {
                    let mut n = RadialNormalizer::new(1.0, 0.9);
                    n.running_mean_radius = 0.5 + gaussian(&mut rng).abs();
                    block.normalizer = Some(n);
                }
            }
            _ => {}
        }
    }
    net
}

/// `max |a − b| / max(1, max |a|)` over paired outputs.
pub fn relative_deviation(a: &[Vector], b: &[Vector]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.max_abs_diff(y) / x.max_abs().max(1.0))
        .fold(0.0, f64::max)
}

pub fn outputs(net: &Network, xs: &[Vector]) -> Vec<Vector> {
    xs.iter().map(|x| net.predict(x).unwrap()).collect()
}

/// Largest `|analytic − fd| / max(1e-3, |fd|_∞)` over all parameters of the
/// squared-error loss at `x`, with central differences of step `h`.
pub fn backprop_fd_error(net: &Network, x: &[f64], target: &[f64], h: f64) -> f64 {
    let loss = |n: &Network| SquaredError.eval(&n.predict(x).unwrap(), target).0;
    let (y, trace) = net.forward(x).unwrap();
    let (_, d) = SquaredError.eval(&y, target);
    let grads = net.backward(&trace, &d).unwrap();

    let mut probe = net.clone();
    let shapes = probe.param_shapes();
    let mut worst: f64 = 0.0;
    for (t, (id, _)) in shapes.iter().enumerate() {
        let analytic = grads.get(*id).expect("gradient for every parameter").to_vec();
        let len = analytic.len();
        let mut fd = vec![0.0; len];
        for k in 0..len {
            let orig = probe.params_mut()[t].values[k];
            probe.params_mut()[t].values[k] = orig + h;
            let up = loss(&probe);
            probe.params_mut()[t].values[k] = orig - h;
            let dn = loss(&probe);
            probe.params_mut()[t].values[k] = orig;
            fd[k] = (up - dn) / (2.0 * h);
        }
        let scale = fd.iter().fold(1e-3_f64, |m, v| m.max(v.abs()));
        for (a, f) in analytic.iter().zip(&fd) {
            worst = worst.max((a - f).abs() / scale);
        }
    }
    worst
}
