use serde::{Deserialize, Serialize};

use crate::linalg::{Matrix, Vector};
use crate::primitives::IsoBlock;

/// `x ↦ W x + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineLayer {
    pub w: Matrix,
    pub b: Vector,
}

impl AffineLayer {
    pub fn new(w: Matrix, b: Vector) -> Self {
        assert_eq!(w.rows(), b.len(), "bias length must equal output width");
        Self { w, b }
    }

    pub fn zeros(out: usize, inp: usize) -> Self {
        Self::new(Matrix::zeros(out, inp), Vector::zeros(out))
    }

    pub fn in_dim(&self) -> usize {
        self.w.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn apply(&self, x: &[f64]) -> Vector {
        let mut y = self.w.matvec(x);
        y.axpy(1.0, &self.b);
        y
    }
}

/// Affine layer whose weight is rectangular-diagonal: `y_i = d_i x_i + b_i`
/// for `i < min(rows, cols)` and `y_i = b_i` beyond.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalLayer {
    pub rows: usize,
    pub cols: usize,
    pub diag: Vector,
    pub b: Vector,
}

impl DiagonalLayer {
    pub fn new(rows: usize, cols: usize, diag: Vector, b: Vector) -> Self {
        assert_eq!(diag.len(), rows.min(cols), "diagonal length must be min(rows, cols)");
        assert_eq!(b.len(), rows, "bias length must equal output width");
        Self { rows, cols, diag, b }
    }

    pub fn apply(&self, x: &[f64]) -> Vector {
        let mut y = self.b.clone();
        for (k, d) in self.diag.iter().enumerate() {
            y[k] += d * x[k];
        }
        y
    }

    pub fn to_affine(&self) -> AffineLayer {
        AffineLayer::new(Matrix::rect_diagonal(self.rows, self.cols, &self.diag), self.b.clone())
    }

    /// Stored parameter count: the diagonal plus the bias.
    pub fn param_count(&self) -> usize {
        self.diag.len() + self.b.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    Affine(AffineLayer),
    Diagonal(DiagonalLayer),
    Iso(IsoBlock),
    /// Elementwise `tanh`.
    Tanh,
}

impl Layer {
    pub fn is_linear(&self) -> bool {
        matches!(self, Layer::Affine(_) | Layer::Diagonal(_))
    }

    /// `(in, out)` for linear layers.
    pub fn dims(&self) -> Option<(usize, usize)> {
        match self {
            Layer::Affine(a) => Some((a.in_dim(), a.out_dim())),
            Layer::Diagonal(d) => Some((d.cols, d.rows)),
            _ => None,
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Layer::Affine(a) => a.w.rows() * a.w.cols() + a.b.len(),
            Layer::Diagonal(d) => d.param_count(),
            Layer::Iso(b) => usize::from(b.intrinsic_length),
            Layer::Tanh => 0,
        }
    }

    pub fn as_affine(&self) -> Option<&AffineLayer> {
        match self {
            Layer::Affine(a) => Some(a),
            _ => None,
        }
    }

    pub fn as_iso(&self) -> Option<&IsoBlock> {
        match self {
            Layer::Iso(b) => Some(b),
            _ => None,
        }
    }

    pub fn as_iso_mut(&mut self) -> Option<&mut IsoBlock> {
        match self {
            Layer::Iso(b) => Some(b),
            _ => None,
        }
    }
}

/// Activation family used when building a network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    IsoTanh,
    AnisoTanh,
    Identity,
}

impl std::str::FromStr for Activation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "iso_tanh" => Ok(Activation::IsoTanh),
            "aniso_tanh" => Ok(Activation::AnisoTanh),
            "identity" => Ok(Activation::Identity),
            other => Err(format!("unknown activation `{other}`")),
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Activation::IsoTanh => "iso_tanh",
            Activation::AnisoTanh => "aniso_tanh",
            Activation::Identity => "identity",
        })
    }
}
