//! Singular value decomposition by one-sided (Hestenes) Jacobi rotations.
//!
//! Columns of the working matrix are rotated pairwise until every pair is
//! numerically orthogonal; the column norms are then the singular values.
//! Wide matrices are handled by factoring the transpose.

use super::{Matrix, Vector};
use crate::error::{Error, Result};

/// Hard cap on Jacobi sweeps.
pub const MAX_SWEEPS: usize = 60;

/// Relative off-diagonal Gram tolerance for short columns.
pub const GRAM_TOL: f64 = 1e-14;

/// `(U, Σ, Vᵀ)` with `sigma` non-negative and descending.
///
/// Depending on the constructor `u` is `m×m` or `m×k` and `vt` is `n×n` or
/// `k×n`, with `k = min(m, n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SvdTriple {
    pub u: Matrix,
    pub sigma: Vector,
    pub vt: Matrix,
}

impl SvdTriple {
    /// `U Σ Vᵀ` as an `m×n` matrix.
    pub fn reconstruct(&self) -> Matrix {
        let (m, n) = (self.u.rows(), self.vt.cols());
        let mut out = Matrix::zeros(m, n);
        for (j, &s) in self.sigma.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            out.add_outer(s, &self.u.column(j), self.vt.row(j));
        }
        out
    }

    /// Σ as a rectangular diagonal `rows×cols` matrix.
    pub fn sigma_matrix(&self, rows: usize, cols: usize) -> Matrix {
        Matrix::rect_diagonal(rows, cols, &self.sigma)
    }
}

/// Full SVD: `u` is `m×m`, `vt` is `n×n`.
pub fn svd(m: &Matrix) -> Result<SvdTriple> {
    factor(m, true, true)
}

/// Economy SVD: `u` is `m×k`, `vt` is `k×n`.
pub fn svd_thin(m: &Matrix) -> Result<SvdTriple> {
    factor(m, false, false)
}

/// Full left factor with an economy right factor: `u` is `m×m`, `vt` is `k×n`.
///
/// This is what a partial diagonalisation needs when the input side of a
/// layer is much wider than its output side.
pub fn svd_full_u(m: &Matrix) -> Result<SvdTriple> {
    factor(m, true, false)
}

fn factor(a: &Matrix, full_u: bool, full_v: bool) -> Result<SvdTriple> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument("SVD of an empty matrix".into()));
    }
    if !a.is_finite() {
        return Err(Error::InvalidArgument("SVD input has non-finite entries".into()));
    }
    let k = m.min(n);

    // Factor a tall matrix T = P Σ Qᵀ with P thin (len×k) and Q square (k×k).
    let tall_is_a = m >= n;
    let columns: Vec<Vec<f64>> = if tall_is_a {
        (0..n).map(|j| a.column(j).into_inner()).collect()
    } else {
        (0..m).map(|i| a.row(i).to_vec()).collect()
    };
    let tall_len = if tall_is_a { m } else { n };
    let tall = jacobi_tall(columns, tall_len)?;

    // Map back: for A tall, U = P, V = Q. For A wide (Aᵀ = P Σ Qᵀ), U = Q, V = P.
    let (mut u_cols, mut v_cols) = if tall_is_a {
        (tall.p, tall.q)
    } else {
        (tall.q, tall.p)
    };
    if full_u && u_cols.len() < m {
        complete_basis(&mut u_cols, m);
    }
    if full_v && v_cols.len() < n {
        complete_basis(&mut v_cols, n);
    }

    // Sign convention: first significant entry of each U column is non-negative.
    for (j, col) in u_cols.iter_mut().enumerate() {
        let flip = col
            .iter()
            .find(|v| v.abs() > 1e-12)
            .is_some_and(|v| *v < 0.0);
        if flip {
            col.iter_mut().for_each(|v| *v = -*v);
            if j < k {
                v_cols[j].iter_mut().for_each(|v| *v = -*v);
            }
        }
    }

    let u = Matrix::from_fn(m, u_cols.len(), |i, j| u_cols[j][i]);
    let vt = Matrix::from_fn(v_cols.len(), n, |i, j| v_cols[i][j]);
    Ok(SvdTriple {
        u,
        sigma: Vector::from_vec(tall.sigma),
        vt,
    })
}

struct TallFactor {
    /// Orthonormal left vectors (len = tall_len each), one per singular value.
    p: Vec<Vec<f64>>,
    sigma: Vec<f64>,
    /// Right vectors as columns of a k×k orthogonal matrix.
    q: Vec<Vec<f64>>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rotate(a: &mut [f64], b: &mut [f64], c: f64, s: f64) {
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let (xv, yv) = (*x, *y);
        *x = c * xv - s * yv;
        *y = s * xv + c * yv;
    }
}

fn jacobi_tall(mut cols: Vec<Vec<f64>>, len: usize) -> Result<TallFactor> {
    let k = cols.len();
    let mut q: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            let mut e = vec![0.0; k];
            e[j] = 1.0;
            e
        })
        .collect();
    // Long columns accumulate more rounding in their dot products.
    let tol = GRAM_TOL.max((len as f64).sqrt() * f64::EPSILON);

    let mut converged = k < 2;
    let mut residual = 0.0;
    for _sweep in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        residual = 0.0f64;
        for p in 0..k - 1 {
            for r in p + 1..k {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[r], &cols[r]);
                let gamma = dot(&cols[p], &cols[r]);
                if alpha == 0.0 || beta == 0.0 || gamma == 0.0 {
                    continue;
                }
                let off = gamma.abs() / (alpha * beta).sqrt();
                residual = residual.max(off);
                if off <= tol {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (lo, hi) = cols.split_at_mut(r);
                rotate(&mut lo[p], &mut hi[0], c, s);
                let (lo, hi) = q.split_at_mut(r);
                rotate(&mut lo[p], &mut hi[0], c, s);
            }
        }
        if !rotated {
            converged = true;
        }
    }
    if !converged {
        return Err(Error::SvdNoConvergence {
            sweeps: MAX_SWEEPS,
            residual,
        });
    }

    let norms: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..k).collect();
    // Stable: ties keep their original index order.
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]));

    let sigma_max = norms.iter().cloned().fold(0.0, f64::max);
    let rank_tol = sigma_max * (len.max(k) as f64) * f64::EPSILON;

    let mut p_slots: Vec<Option<Vec<f64>>> = Vec::with_capacity(k);
    let mut sigma = Vec::with_capacity(k);
    let mut q_sorted = Vec::with_capacity(k);
    for &j in &order {
        let s = norms[j];
        sigma.push(s);
        q_sorted.push(q[j].clone());
        if s > rank_tol && s > 0.0 {
            p_slots.push(Some(cols[j].iter().map(|v| v / s).collect()));
        } else {
            p_slots.push(None);
        }
    }
    let p = fill_slots(p_slots, len);
    Ok(TallFactor {
        p,
        sigma,
        q: q_sorted,
    })
}

/// Gram–Schmidt (two passes) of `v` against `basis`; returns the residual.
fn orthogonalize(mut v: Vec<f64>, basis: &[&[f64]]) -> Vec<f64> {
    for _ in 0..2 {
        for b in basis {
            let proj = dot(&v, b);
            for (x, y) in v.iter_mut().zip(b.iter()) {
                *x -= proj * y;
            }
        }
    }
    v
}

/// Next unit vector orthogonal to `basis`, drawn from the standard basis
/// starting at `*cursor`.
fn next_orthogonal(basis: &[&[f64]], dim: usize, cursor: &mut usize) -> Vec<f64> {
    let threshold = (1.0 / (2.0 * dim as f64)).sqrt();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for step in 0..dim {
        let idx = (*cursor + step) % dim;
        let mut e = vec![0.0; dim];
        e[idx] = 1.0;
        let r = orthogonalize(e, basis);
        let norm = dot(&r, &r).sqrt();
        if norm > threshold {
            *cursor = idx + 1;
            return r.into_iter().map(|v| v / norm).collect();
        }
        if best.as_ref().is_none_or(|(n, _)| norm > *n) {
            best = Some((norm, r));
        }
    }
    let (norm, r) = best.expect("dimension is positive");
    r.into_iter().map(|v| v / norm).collect()
}

fn fill_slots(slots: Vec<Option<Vec<f64>>>, dim: usize) -> Vec<Vec<f64>> {
    if slots.iter().all(Option::is_some) {
        return slots.into_iter().map(Option::unwrap).collect();
    }
    let mut filled: Vec<Vec<f64>> = slots.iter().flatten().cloned().collect();
    let mut cursor = 0;
    let mut out = Vec::with_capacity(slots.len());
    for slot in slots {
        match slot {
            Some(v) => out.push(v),
            None => {
                let basis: Vec<&[f64]> = filled.iter().map(Vec::as_slice).collect();
                let v = next_orthogonal(&basis, dim, &mut cursor);
                filled.push(v.clone());
                out.push(v);
            }
        }
    }
    out
}

/// Extends an orthonormal set of vectors in `R^dim` to a full basis.
fn complete_basis(vectors: &mut Vec<Vec<f64>>, dim: usize) {
    let mut cursor = 0;
    while vectors.len() < dim {
        let basis: Vec<&[f64]> = vectors.iter().map(Vec::as_slice).collect();
        let v = next_orthogonal(&basis, dim, &mut cursor);
        vectors.push(v);
    }
}
