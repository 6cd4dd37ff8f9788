use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::optim::sgd_step;

use super::DiagonalizedPair;

/// Tolerance on `AB = W` for [`gradient_divergence`].
pub const FACTOR_TOL: f64 = 1e-12;

/// Divergence `ε = (W' − A'B') x` after one plain gradient step taken on `W`
/// directly and on the factored pair `(A, B)`, for `y = W x` with upstream
/// gradient `g = ∂L/∂y`.
#[derive(Clone, Debug, PartialEq)]
pub struct Divergence {
    pub simulated: Vector,
    pub analytic: Vector,
}

pub fn gradient_divergence(w: &Matrix, a: &Matrix, b: &Matrix, x: &[f64], g: &[f64], eta: f64) -> Result<Divergence> {
    if a.cols() != b.rows() || a.rows() != w.rows() || b.cols() != w.cols() {
        return Err(Error::Shape {
            what: "factor pair".into(),
            expected: w.shape(),
            found: (a.rows(), b.cols()),
        });
    }
    if x.len() != w.cols() || g.len() != w.rows() {
        return Err(Error::InvalidArgument("x or g does not match W".into()));
    }
    let gap = a.matmul(b).max_abs_diff(w);
    if gap > FACTOR_TOL {
        return Err(Error::InvalidArgument(format!("AB differs from W by {gap:e}")));
    }
    let bx = b.matvec(x);
    let atg = a.tr_matvec(g);

    let mut gw = Matrix::zeros(w.rows(), w.cols());
    gw.add_outer(1.0, g, x);
    let mut ga = Matrix::zeros(a.rows(), a.cols());
    ga.add_outer(1.0, g, &bx);
    let mut gb = Matrix::zeros(b.rows(), b.cols());
    gb.add_outer(1.0, &atg, x);

    let mut w1 = w.clone();
    let mut a1 = a.clone();
    let mut b1 = b.clone();
    sgd_step(w1.as_mut_slice(), gw.as_slice(), eta);
    sgd_step(a1.as_mut_slice(), ga.as_slice(), eta);
    sgd_step(b1.as_mut_slice(), gb.as_slice(), eta);
    // (W' − A'B') x written as (W' − W) x − (A'B' − AB) x, using W = AB.
    let simulated = w1
        .sub(w)
        .matvec(x)
        .sub(&a1.matvec(&b1.matvec(x)).sub(&a.matvec(&bx)));

    // ε = η (g ‖Bx‖² + A Aᵀ g ‖x‖² − g ‖x‖² (1 + η gᵀ A B x))
    let x2 = x.iter().map(|v| v * v).sum::<f64>();
    let coupling = 1.0 + eta * Vector::from(g).dot(&a.matvec(&bx));
    let mut analytic = Vector::from(g).scaled(bx.norm_sq() - x2 * coupling);
    analytic.axpy(x2, &a.matvec(&atg));
    analytic.scale_mut(eta);
    Ok(Divergence { simulated, analytic })
}

/// Output sensitivities of one hidden neuron `m` of a diagonalised pair,
/// with `Y = diag(σ) Vᵀ` and `z = Y x + b₁`.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingReport {
    pub neuron: usize,
    pub output: Vector,
    /// `∂yᵢ/∂Y_mn`, shape `out × in`.
    pub d_y_row: Matrix,
    /// `∂yᵢ/∂W_im`, the neuron's column of the second weight.
    pub d_w_column: Vector,
    /// `∂yᵢ/∂b_m`.
    pub d_bias: Vector,
}

impl CouplingReport {
    pub fn max_abs_diff(&self, other: &CouplingReport) -> f64 {
        self.d_y_row
            .max_abs_diff(&other.d_y_row)
            .max(self.d_w_column.max_abs_diff(&other.d_w_column))
            .max(self.d_bias.max_abs_diff(&other.d_bias))
    }

    pub fn max_abs(&self) -> f64 {
        self.d_y_row.max_abs().max(self.d_w_column.max_abs()).max(self.d_bias.max_abs())
    }
}

/// Evaluates the three sensitivity formulas term by term:
///
/// `∂yᵢ/∂Y_mn = g W_im x_n + (W z)ᵢ (g'/r) z_m x_n`,
/// `∂yᵢ/∂W_im = g z_m`,
/// `∂yᵢ/∂b_m  = g W_im + (W z)ᵢ (g'/r) z_m`.
pub fn scaffold_coupling_probe(pair: &DiagonalizedPair, neuron: usize, x: &[f64]) -> Result<CouplingReport> {
    if neuron >= pair.width() {
        return Err(Error::InvalidArgument(format!("neuron {neuron} out of range")));
    }
    if x.len() != pair.in_dim() {
        return Err(Error::Dimension { layer: 0, expected: pair.in_dim(), found: x.len() });
    }
    let s = pair.block_scale();
    let z = pair.pre_activation(x).scaled(s);
    let r = pair.block.radius(&z);
    let g = pair.block.profile.g(r);
    let k = pair.block.profile.g_prime_over_r(r);
    let wz = pair.w2.matvec(&z);
    let m = neuron;
    let out = pair.out_dim();
    let d_y_row = Matrix::from_fn(out, x.len(), |i, n| {
        s * (g * pair.w2[(i, m)] * x[n] + wz[i] * k * z[m] * x[n])
    });
    let d_w_column = Vector::from_fn(out, |_| g * z[m]);
    let d_bias = Vector::from_fn(out, |i| s * (g * pair.w2[(i, m)] + wz[i] * k * z[m]));
    Ok(CouplingReport {
        neuron,
        output: pair.forward(x),
        d_y_row,
        d_w_column,
        d_bias,
    })
}

/// The same sensitivities by reverse-mode chain rule through the block Jacobian.
pub fn coupling_by_backprop(pair: &DiagonalizedPair, neuron: usize, x: &[f64]) -> Result<CouplingReport> {
    if neuron >= pair.width() || x.len() != pair.in_dim() {
        return Err(Error::InvalidArgument("neuron or input out of range".into()));
    }
    let s = pair.block_scale();
    let z = pair.pre_activation(x).scaled(s);
    let act = pair.block.apply(&z);
    let out = pair.out_dim();
    let mut d_y_row = Matrix::zeros(out, x.len());
    let mut d_bias = Vector::zeros(out);
    let mut d_w_column = Vector::zeros(out);
    for i in 0..out {
        let upstream = Vector::from(pair.w2.row(i));
        let dz = pair.block.jacobian_tr_vec(&z, &upstream).scaled(s);
        d_bias[i] = dz[neuron];
        for (n, xn) in x.iter().enumerate() {
            d_y_row[(i, n)] = dz[neuron] * xn;
        }
        d_w_column[i] = act[neuron];
    }
    Ok(CouplingReport {
        neuron,
        output: pair.forward(x),
        d_y_row,
        d_w_column,
        d_bias,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_matrix, gaussian_vector, seeded};

    #[test]
    fn zero_step_gives_zero() {
        let mut rng = seeded(1, 0);
        let a = gaussian_matrix(&mut rng, 3, 3, 1.0);
        let b = Matrix::identity(3);
        let x = gaussian_vector(&mut rng, 3, 1.0);
        let g = gaussian_vector(&mut rng, 3, 1.0);
        let d = gradient_divergence(&a, &a, &b, &x, &g, 0.0).unwrap();
        assert_eq!(d.simulated.max_abs(), 0.0);
        assert_eq!(d.analytic.max_abs(), 0.0);
    }

    #[test]
    fn rejects_mismatched_factors() {
        let w = Matrix::identity(2);
        let a = Matrix::identity(2).scaled(2.0);
        let r = gradient_divergence(&w, &a, &Matrix::identity(2), &[1.0, 0.0], &[1.0, 0.0], 0.1);
        assert!(r.is_err());
    }
}
