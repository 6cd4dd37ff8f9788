//! Dense real linear algebra used throughout the crate.

mod matrix;
mod svd;
mod vector;

pub use matrix::Matrix;
pub use svd::{svd, svd_full_u, svd_thin, SvdTriple, GRAM_TOL, MAX_SWEEPS};
pub use vector::Vector;

use crate::error::{Error, Result};
use crate::rng::{gaussian_matrix, seeded};

/// Solves `A X = B` by LU factorisation with partial pivoting.
pub fn solve(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    if a.cols() != n || b.rows() != n {
        return Err(Error::Shape {
            what: "linear system".into(),
            expected: (n, n),
            found: a.shape(),
        });
    }
    let mut lu = a.clone();
    let mut x = b.clone();
    let scale = a.max_abs();
    let tiny = scale * f64::EPSILON * n as f64;
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| lu[(i, col)].abs().total_cmp(&lu[(j, col)].abs()))
            .expect("non-empty range");
        let pivot = lu[(pivot_row, col)];
        if pivot == 0.0 || pivot.abs() <= tiny {
            return Err(Error::Singular);
        }
        if pivot_row != col {
            for j in 0..n {
                let tmp = lu[(col, j)];
                lu[(col, j)] = lu[(pivot_row, j)];
                lu[(pivot_row, j)] = tmp;
            }
            for j in 0..x.cols() {
                let tmp = x[(col, j)];
                x[(col, j)] = x[(pivot_row, j)];
                x[(pivot_row, j)] = tmp;
            }
        }
        for i in col + 1..n {
            let f = lu[(i, col)] / pivot;
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                lu[(i, j)] -= f * lu[(col, j)];
            }
            for j in 0..x.cols() {
                x[(i, j)] -= f * x[(col, j)];
            }
        }
    }
    for col in (0..n).rev() {
        let pivot = lu[(col, col)];
        for j in 0..x.cols() {
            let mut acc = x[(col, j)];
            for k in col + 1..n {
                acc -= lu[(col, k)] * x[(k, j)];
            }
            x[(col, j)] = acc / pivot;
        }
    }
    Ok(x)
}

/// Haar-style random orthogonal matrix: QR of a seeded Gaussian matrix with
/// the triangular factor's diagonal made positive.
pub fn random_orthogonal(n: usize, seed: u64) -> Matrix {
    assert!(n >= 1, "random_orthogonal needs n >= 1");
    let mut rng = seeded(seed, 0x0e7);
    let g = gaussian_matrix(&mut rng, n, n, 1.0);
    // Gram–Schmidt with re-orthogonalisation; each R_jj is the residual norm
    // and therefore positive, which fixes the sign of every column.
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(n);
    for j in 0..n {
        let mut v = g.column(j).into_inner();
        for _ in 0..2 {
            for b in &q {
                let proj: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                for (x, y) in v.iter_mut().zip(b) {
                    *x -= proj * y;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        q.push(v.into_iter().map(|x| x / norm).collect());
    }
    Matrix::from_fn(n, n, |i, j| q[j][i])
}

/// Least-squares correction of the following layer when a row of a
/// diagonalised weight is deleted: `Y = W Σ Σ'ᵀ (Σ' Σ'ᵀ)⁻¹`.
///
/// Returns [`Error::SingularCorrection`] when `Σ'Σ'ᵀ` cannot be inverted; the
/// caller should then delete the matching column of `W` instead.
pub fn pinv_prune_correction(w2: &Matrix, sigma: &Matrix, sigma_pruned: &Matrix) -> Result<Matrix> {
    if w2.cols() != sigma.rows() {
        return Err(Error::Shape {
            what: "following weight vs Σ".into(),
            expected: (w2.rows(), sigma.rows()),
            found: w2.shape(),
        });
    }
    if sigma_pruned.cols() != sigma.cols() || sigma_pruned.rows() + 1 != sigma.rows() {
        return Err(Error::Shape {
            what: "pruned Σ".into(),
            expected: (sigma.rows() - 1, sigma.cols()),
            found: sigma_pruned.shape(),
        });
    }
    let sp_t = sigma_pruned.transpose();
    let gram = sigma_pruned.matmul(&sp_t);
    let rhs = w2.matmul(sigma).matmul(&sp_t);
    // Y G = R with G symmetric, so G Yᵀ = Rᵀ.
    match solve(&gram, &rhs.transpose()) {
        Ok(yt) => Ok(yt.transpose()),
        Err(Error::Singular) => Err(Error::SingularCorrection),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_matrix, seeded};

    #[test]
    fn random_orthogonal_basics() {
        let r1 = random_orthogonal(1, 5);
        assert_eq!(r1.as_slice()[0].abs(), 1.0);
        let r = random_orthogonal(4, 7);
        assert!(r.orthogonality_defect() <= 1e-12);
        assert_eq!(r, random_orthogonal(4, 7));
        assert_ne!(r, random_orthogonal(4, 8));
    }

    #[test]
    fn solve_recovers_known_solution() {
        let mut rng = seeded(1, 0);
        let a = gaussian_matrix(&mut rng, 5, 5, 1.0);
        let x = gaussian_matrix(&mut rng, 5, 2, 1.0);
        let b = a.matmul(&x);
        assert!(solve(&a, &b).unwrap().max_abs_diff(&x) < 1e-10);
        assert!(matches!(
            solve(&Matrix::zeros(2, 2), &Matrix::zeros(2, 1)),
            Err(Error::Singular)
        ));
    }

    #[test]
    fn smallest_row_deletion_is_column_deletion() {
        let w2 = Matrix::from_rows(&[&[1.0, -2.0, 0.5], &[3.0, 0.25, -1.0]]);
        let sigma = Matrix::rect_diagonal(3, 3, &[3.0, 2.0, 1.0]);
        let mut pruned = sigma.clone();
        pruned.remove_row(2);
        let y = pinv_prune_correction(&w2, &sigma, &pruned).unwrap();
        let mut expected = w2.clone();
        expected.remove_column(2);
        assert!(y.max_abs_diff(&expected) <= 1e-12);
    }

    #[test]
    fn deleted_zero_row_preserves_map() {
        let w2 = Matrix::from_rows(&[&[1.0, -2.0, 0.5], &[3.0, 0.25, -1.0]]);
        let sigma = Matrix::rect_diagonal(3, 3, &[3.0, 2.0, 0.0]);
        let mut pruned = sigma.clone();
        pruned.remove_row(2);
        let y = pinv_prune_correction(&w2, &sigma, &pruned).unwrap();
        let x = [0.3, -1.2, 2.0];
        let before = w2.matmul(&sigma).matvec(&x);
        let after = y.matmul(&pruned).matvec(&x);
        assert!(before.max_abs_diff(&after) <= 1e-12);
    }

    #[test]
    fn singular_gram_signals_fallback() {
        let w2 = Matrix::from_rows(&[&[1.0, 2.0, 3.0]]);
        let sigma = Matrix::rect_diagonal(3, 3, &[1.0, 0.0, 0.0]);
        let mut pruned = sigma.clone();
        pruned.remove_row(2);
        assert!(matches!(
            pinv_prune_correction(&w2, &sigma, &pruned),
            Err(Error::SingularCorrection)
        ));
    }
}
