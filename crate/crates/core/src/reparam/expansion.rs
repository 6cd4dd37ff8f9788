use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{solve, Matrix, Vector};
use crate::network::{AffineLayer, Layer, Network};
use crate::rng::{gaussian_vector, seeded};

fn as_affine(layer: &Layer) -> Option<AffineLayer> {
    match layer {
        Layer::Affine(a) => Some(a.clone()),
        Layer::Diagonal(d) => Some(d.to_affine()),
        _ => None,
    }
}

/// Evaluates the network as a product-of-`g` expansion,
///
/// `x⁽ˡ⁾ = (∏ gᵢ) W° x⁽⁰⁾ + Σᵢ (∏_{j≥i} gⱼ) b°ᵢ`,
///
/// where `W°` is the plain product of all weights, `b°ᵢ` is bias `i` pushed
/// through the later weights, and each `g` is read off a standard forward trace.
pub fn nested_expand_eval(net: &Network, x: &[f64]) -> Result<Vector> {
    let (_, trace) = net.forward(x)?;
    let mut w_circ: Option<Matrix> = None;
    let mut coeff = 1.0;
    // (coefficient, vector) for every bias term.
    let mut terms: Vec<(f64, Vector)> = Vec::new();
    for (i, layer) in net.layers().iter().enumerate() {
        match layer {
            Layer::Iso(b) => {
                let g = b.profile.g(trace.radii[i]) * trace.scales[i];
                coeff *= g;
                for t in &mut terms {
                    t.0 *= g;
                }
            }
            Layer::Tanh => {
                return Err(Error::NotIsotropic {
                    layer: i,
                    reason: "elementwise tanh has no g-form".into(),
                })
            }
            _ => {
                let a = as_affine(layer).expect("linear layer");
                w_circ = Some(match w_circ {
                    None => a.w.clone(),
                    Some(m) => a.w.matmul(&m),
                });
                for t in &mut terms {
                    t.1 = a.w.matvec(&t.1);
                }
                terms.push((1.0, a.b.clone()));
            }
        }
    }
    let w_circ = w_circ.expect("validated network has a linear layer");
    let mut out = w_circ.matvec(x).scaled(coeff);
    for (c, v) in &terms {
        out.axpy(*c, v);
    }
    Ok(out)
}

/// Forward pass in which every isotropic block sees inputs of fixed norm
/// `shell_radius`, so its radial factor is the constant `g(sqrt(ρ² + o))`.
pub fn shell_forward(net: &Network, x: &[f64], shell_radius: f64) -> Result<Vector> {
    let mut cur = Vector::from(x);
    for (i, layer) in net.layers().iter().enumerate() {
        cur = match layer {
            Layer::Iso(b) => {
                let g = b.profile.g((shell_radius * shell_radius + b.o()).sqrt());
                cur.scaled(g)
            }
            Layer::Tanh => {
                return Err(Error::NotIsotropic {
                    layer: i,
                    reason: "elementwise tanh has no radial factor".into(),
                })
            }
            _ => {
                let a = as_affine(layer).expect("linear layer");
                if a.in_dim() != cur.len() {
                    return Err(Error::Dimension { layer: i, expected: a.in_dim(), found: cur.len() });
                }
                a.apply(&cur)
            }
        };
    }
    Ok(cur)
}

fn unit_probe(rng: &mut impl Rng, dim: usize) -> Vector {
    loop {
        let v = gaussian_vector(rng, dim, 1.0);
        let n = v.norm();
        if n > 1e-6 {
            return v.scaled(1.0 / n);
        }
    }
}

/// Fits an affine map `x̂ ↦ A x̂ + c` to the network on `dim + 1` unit-norm
/// probes and returns the largest residual over `probe_count` held-out unit
/// probes. With `shell_radius = Some(ρ)` the network is evaluated by
/// [`shell_forward`]; with `None` by the ordinary forward pass.
pub fn shell_collapse_check(net: &Network, shell_radius: Option<f64>, probe_count: usize, seed: u64) -> Result<f64> {
    let eval = |x: &[f64]| -> Result<Vector> {
        match shell_radius {
            Some(rho) => shell_forward(net, x, rho),
            None => net.predict(x),
        }
    };
    let d = net.input_dim();
    let mut rng = seeded(seed, 0x5e11);
    let fit = 'attempts: {
        for _ in 0..32 {
            let probes: Vec<Vector> = (0..=d).map(|_| unit_probe(&mut rng, d)).collect();
            // Rows of P are [x̂ᵀ, 1]; solve P Mᵀ = Y for the stacked map Mᵀ = [Aᵀ; cᵀ].
            let p = Matrix::from_fn(d + 1, d + 1, |i, j| if j < d { probes[i][j] } else { 1.0 });
            let outs: Vec<Vector> = probes.iter().map(|x| eval(x)).collect::<Result<_>>()?;
            let y = Matrix::from_fn(d + 1, outs[0].len(), |i, j| outs[i][j]);
            match solve(&p, &y) {
                Ok(mt) => break 'attempts mt,
                Err(Error::Singular) => continue,
                Err(e) => return Err(e),
            }
        }
        return Err(Error::InvalidArgument("could not draw a non-degenerate probe set".into()));
    };
    let mut worst: f64 = 0.0;
    for _ in 0..probe_count {
        let x = unit_probe(&mut rng, d);
        let mut aug = x.clone();
        aug.push(1.0);
        let predicted = fit.tr_matvec(&aug);
        worst = worst.max(predicted.max_abs_diff(&eval(&x)?));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Activation;
    use crate::primitives::{IsoBlock, RadialProfile};

    #[test]
    fn two_layer_expansion_by_hand() {
        let net = Network::mlp(&[3, 4, 2], Activation::IsoTanh, 4).unwrap();
        let x = [0.2, -0.4, 1.1];
        let l1 = net.layers()[0].as_affine().unwrap();
        let b = net.layers()[1].as_iso().unwrap();
        let l2 = net.layers()[2].as_affine().unwrap();
        let z = l1.apply(&x);
        let g = b.g(&z);
        // W₂ (g (W₁ x + b₁)) + b₂ = g W₂W₁ x + g W₂ b₁ + b₂
        let mut hand = l2.w.matmul(&l1.w).matvec(&x).scaled(g);
        hand.axpy(g, &l2.w.matvec(&l1.b));
        hand.axpy(1.0, &l2.b);
        let e = nested_expand_eval(&net, &x).unwrap();
        assert!(e.max_abs_diff(&hand) <= 1e-12);
        assert!(e.max_abs_diff(&net.predict(&x).unwrap()) <= 1e-12);
    }

    #[test]
    fn identity_profile_is_matrix_chain() {
        let mut net = Network::mlp(&[3, 3, 3, 3], Activation::Identity, 2).unwrap();
        net.iso_blocks_mut().for_each(|b| *b = IsoBlock::plain(RadialProfile::Identity));
        let x = [1.0, 2.0, -3.0];
        let e = nested_expand_eval(&net, &x).unwrap();
        let mut chain = Vector::from(&x[..]);
        for l in net.layers().iter().filter_map(Layer::as_affine) {
            chain = l.apply(&chain);
        }
        assert!(e.max_abs_diff(&chain) <= 1e-12);
    }

    #[test]
    fn width_one_is_affine() {
        let net = Network::mlp(&[1, 1, 1], Activation::IsoTanh, 3).unwrap();
        assert!(shell_collapse_check(&net, None, 20, 1).unwrap() <= 1e-12);
    }
}
