use serde::{Deserialize, Serialize};

use super::full_diagonalize;
use crate::error::{Error, Result};
use crate::network::{AffineLayer, Layer, Network};

/// Parameter accounting for an alternating-diagonal reexpression.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsityReport {
    /// Depth parameter: the network has `2D + 1` affine layers.
    pub d: usize,
    /// Uniform width, when all interfaces share one width.
    pub n: Option<usize>,
    pub params_original: u64,
    pub params_sparsified: u64,
    pub s_p: f64,
    /// Closed-form `(sparsified, original)` counts, for uniform odd-length nets.
    pub closed_form: Option<(u64, u64)>,
    /// Why the closed-form comparison was skipped.
    pub notice: Option<String>,
}

impl SparsityReport {
    pub fn matches_closed_form(&self) -> Option<bool> {
        self.closed_form
            .map(|(s, o)| s == self.params_sparsified && o == self.params_original)
    }
}

/// `(2DN + N(D+1)(N+1), N(2D+1)(N+1))`.
pub fn sparsity_counts(d: u64, n: u64) -> (u64, u64) {
    (2 * d * n + n * (d + 1) * (n + 1), n * (2 * d + 1) * (n + 1))
}

/// Ratio of the two counts, dividing only at the end.
pub fn sparsity_factor(d: u64, n: u64) -> f64 {
    let (s, o) = sparsity_counts(d, n);
    s as f64 / o as f64
}

/// Replaces every second interior affine layer (affine indices 1, 3, …) by its
/// diagonal form, absorbing the orthogonal factors into the neighbours.
pub fn sparsify_network(net: &Network) -> Result<(Network, SparsityReport)> {
    let mut layers = net.layers().to_vec();
    let affine_count = layers.iter().filter(|l| l.is_linear()).count();
    let mut j = 1;
    while j + 1 < affine_count {
        let (i0, i1, i2) = (2 * (j - 1), 2 * j, 2 * (j + 1));
        for &a in &[i0 + 1, i1 + 1] {
            if matches!(layers[a], Layer::Tanh) {
                return Err(Error::NotIsotropic {
                    layer: a,
                    reason: "diagonalisation needs orthogonally equivariant activations".into(),
                });
            }
        }
        let get = |i: usize| -> Result<AffineLayer> {
            match &layers[i] {
                Layer::Affine(a) => Ok(a.clone()),
                Layer::Diagonal(d) => Ok(d.to_affine()),
                _ => unreachable!("validated alternation"),
            }
        };
        let (a, mid, c) = full_diagonalize(&get(i0)?, &get(i1)?, &get(i2)?)?;
        layers[i0] = Layer::Affine(a);
        layers[i1] = Layer::Diagonal(mid);
        layers[i2] = Layer::Affine(c);
        j += 2;
    }
    let out = Network::new(layers)?;

    let widths = net.widths();
    let uniform = widths.windows(2).all(|w| w[0] == w[1]);
    let odd = affine_count % 2 == 1;
    let d = (affine_count - 1) / 2;
    let n = uniform.then(|| widths[0]);
    let params_original = dense_count(net);
    let params_sparsified = dense_count(&out);
    let (closed_form, notice) = match (odd, n) {
        (true, Some(n)) => (Some(sparsity_counts(d as u64, n as u64)), None),
        (false, _) => (None, Some("even number of affine layers: closed-form sparsity comparison skipped".to_string())),
        (true, None) => (None, Some("non-uniform widths: closed-form sparsity comparison skipped".to_string())),
    };
    let report = SparsityReport {
        d,
        n,
        params_original,
        params_sparsified,
        s_p: params_sparsified as f64 / params_original as f64,
        closed_form,
        notice,
    };
    Ok((out, report))
}

/// Weight and bias entries of the linear layers.
fn dense_count(net: &Network) -> u64 {
    net.layers()
        .iter()
        .map(|l| match l {
            Layer::Affine(a) => (a.w.rows() * a.w.cols() + a.b.len()) as u64,
            Layer::Diagonal(d) => d.param_count() as u64,
            _ => 0,
        })
        .sum()
}
