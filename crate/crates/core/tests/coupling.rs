mod common;

use common::{probes, random_iso_net};
use isodyn::dyntopo::grow_one;
use isodyn::reparam::{extract_pair, gradient_divergence, scaffold_coupling_probe, DiagonalizedPair};
use isodyn::rng::{gaussian_matrix, gaussian_vector, seeded};
use isodyn::{AdaptationPlan, GrowthPolicy};

fn central(pair: &DiagonalizedPair, x: &[f64], h: f64, mut perturb: impl FnMut(&mut DiagonalizedPair, f64)) -> Vec<f64> {
    let mut up = pair.clone();
    perturb(&mut up, h);
    let mut dn = pair.clone();
    perturb(&mut dn, -h);
    up.forward(x).sub(&dn.forward(x)).scaled(0.5 / h).into_inner()
}

#[test]
fn sensitivities_match_finite_differences() {
    let h = 1e-6;
    for seed in 0..6 {
        let net = random_iso_net(&[5, 4, 3], seed, seed % 2 == 0);
        let pair = extract_pair(&net, 0).unwrap();
        for x in probes(5, 3, seed, 1.0) {
            for m in 0..pair.width() {
                let rep = scaffold_coupling_probe(&pair, m, &x).unwrap();
                let db = central(&pair, &x, h, |p, d| p.b1[m] += d);
                for (i, v) in db.iter().enumerate() {
                    assert!((v - rep.d_bias[i]).abs() <= 1e-6, "bias {m} {i}");
                }
                for i in 0..pair.out_dim() {
                    let dw = central(&pair, &x, h, |p, d| p.w2[(i, m)] += d);
                    assert!((dw[i] - rep.d_w_column[i]).abs() <= 1e-6, "w column {m} {i}");
                }
                if pair.sigma[m] > 1e-3 {
                    for n in 0..pair.in_dim() {
                        let s = pair.sigma[m];
                        let dy = central(&pair, &x, h, |p, d| p.vt[(m, n)] += d / s);
                        for (i, v) in dy.iter().enumerate() {
                            assert!((v - rep.d_y_row[(i, n)]).abs() <= 1e-6, "Y {m} {n} {i}");
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn zero_column_without_bias_has_no_first_order_coupling() {
    let net = random_iso_net(&[5, 4, 3], 3, false);
    let pair = extract_pair(&net, 0).unwrap();
    let xs = probes(5, 8, 3, 1.0);
    let plan = AdaptationPlan { growth_policy: GrowthPolicy::ZeroColumn, ..AdaptationPlan::default() };
    let (grown, _) = grow_one(&pair, &plan, &xs).unwrap();
    let semi = grow_one(&pair, &AdaptationPlan::default(), &xs).unwrap().0;
    let j = pair.width();
    for x in &xs {
        assert_eq!(scaffold_coupling_probe(&grown, j, x).unwrap().max_abs(), 0.0);
        assert!(scaffold_coupling_probe(&semi, j, x).unwrap().d_y_row.max_abs() > 1e-6);
    }
}

#[test]
fn divergence_is_first_order_in_step() {
    for seed in 0..20 {
        let mut rng = seeded(seed, 9);
        let a = gaussian_matrix(&mut rng, 4, 3, 1.0);
        let b = gaussian_matrix(&mut rng, 3, 5, 1.0);
        let x = gaussian_vector(&mut rng, 5, 1.0);
        let g = gaussian_vector(&mut rng, 4, 1.0);
        let w = a.matmul(&b);
        let e1 = gradient_divergence(&w, &a, &b, &x, &g, 1e-4).unwrap().analytic.norm();
        let e2 = gradient_divergence(&w, &a, &b, &x, &g, 5e-5).unwrap().analytic.norm();
        let ratio = e1 / e2;
        assert!((1.9..=2.1).contains(&ratio), "ratio {ratio}");
        let zero = gradient_divergence(&w, &a, &b, &x, &g, 0.0).unwrap();
        assert_eq!(zero.simulated.max_abs(), 0.0);
    }
}
