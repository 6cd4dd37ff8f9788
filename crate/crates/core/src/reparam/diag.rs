use crate::error::{Error, Result};
use crate::linalg::{svd, svd_full_u, Matrix, Vector};
use crate::network::{AffineLayer, DiagonalLayer, Layer, Network};
use crate::primitives::IsoBlock;

/// Orthogonality tolerance for [`reparam_single`].
pub const ORTHOGONALITY_TOL: f64 = 1e-8;

/// `W₁' = R W₁`, `b₁' = R b₁`, `W₂' = W₂ Rᵀ`.
pub fn reparam_single(l1: &AffineLayer, l2: &AffineLayer, r: &Matrix) -> Result<(AffineLayer, AffineLayer)> {
    let h = l1.out_dim();
    if r.shape() != (h, h) || l2.in_dim() != h {
        return Err(Error::Shape {
            what: "orthogonal factor".into(),
            expected: (h, h),
            found: r.shape(),
        });
    }
    let deviation = r.orthogonality_defect();
    if deviation > ORTHOGONALITY_TOL {
        return Err(Error::NotOrthogonal { deviation });
    }
    let l1p = AffineLayer::new(r.matmul(&l1.w), r.matvec(&l1.b));
    let l2p = AffineLayer::new(l2.w.matmul(&r.transpose()), l2.b.clone());
    Ok((l1p, l2p))
}

/// Two affine layers around one isotropic block with the first weight held
/// as `diag(σ) Vᵀ`.
///
/// Row `i` of `vt` is the right singular vector paired with `sigma[i]`; rows
/// without a partner (more neurons than inputs, or grown scaffold rows) are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalizedPair {
    pub sigma: Vector,
    pub vt: Matrix,
    pub b1: Vector,
    pub block: IsoBlock,
    pub w2: Matrix,
    pub b2: Vector,
}

impl DiagonalizedPair {
    pub fn width(&self) -> usize {
        self.sigma.len()
    }

    pub fn in_dim(&self) -> usize {
        self.vt.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.w2.rows()
    }

    /// `diag(σ)` as a square matrix.
    pub fn sigma_matrix(&self) -> Matrix {
        Matrix::rect_diagonal(self.width(), self.width(), &self.sigma)
    }

    /// `diag(σ) Vᵀ`.
    pub fn first_weight(&self) -> Matrix {
        let mut w = self.vt.clone();
        for (i, s) in self.sigma.iter().enumerate() {
            w.row_mut(i).iter_mut().for_each(|v| *v *= s);
        }
        w
    }

    /// `z = diag(σ) Vᵀ x + b₁`.
    pub fn pre_activation(&self, x: &[f64]) -> Vector {
        let mut z = self.vt.matvec(x);
        for (zi, s) in z.iter_mut().zip(self.sigma.iter()) {
            *zi *= s;
        }
        z.axpy(1.0, &self.b1);
        z
    }

    /// Normaliser scale applied inside the block at inference time.
    pub fn block_scale(&self) -> f64 {
        self.block.normalizer.as_ref().map_or(1.0, |n| n.inference_scale())
    }

    pub fn forward(&self, x: &[f64]) -> Vector {
        let z = self.pre_activation(x).scaled(self.block_scale());
        let mut y = self.w2.matvec(&self.block.apply(&z));
        y.axpy(1.0, &self.b2);
        y
    }

    /// Folds `diag(σ) Vᵀ` back into one dense weight.
    pub fn contract(&self) -> (AffineLayer, IsoBlock, AffineLayer) {
        (
            AffineLayer::new(self.first_weight(), self.b1.clone()),
            self.block.clone(),
            AffineLayer::new(self.w2.clone(), self.b2.clone()),
        )
    }

    /// Index of the smallest singular value, ties to the lowest index.
    pub fn smallest(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, &s) in self.sigma.iter().enumerate() {
            if best.is_none_or(|b| s < self.sigma[b]) {
                best = Some(i);
            }
        }
        best
    }
}

/// `W₁ = U Σ Vᵀ` ↦ `W₁' = Σ Vᵀ`, `b₁' = Uᵀ b₁`, `W₂' = W₂ U`, `b₂' = b₂`.
pub fn partial_diagonalize(l1: &AffineLayer, block: &IsoBlock, l2: &AffineLayer) -> Result<DiagonalizedPair> {
    let h = l1.out_dim();
    if l2.in_dim() != h {
        return Err(Error::Dimension { layer: 2, expected: h, found: l2.in_dim() });
    }
    let f = svd_full_u(&l1.w)?;
    let n = l1.in_dim();
    let k = f.sigma.len();
    let mut sigma = Vector::zeros(h);
    let mut vt = Matrix::zeros(h, n);
    for i in 0..k {
        sigma[i] = f.sigma[i];
        vt.row_mut(i).copy_from_slice(f.vt.row(i));
    }
    Ok(DiagonalizedPair {
        sigma,
        vt,
        b1: f.u.tr_matvec(&l1.b),
        block: block.clone(),
        w2: l2.w.matmul(&f.u),
        b2: l2.b.clone(),
    })
}

/// `W₂ = U Σ Vᵀ` ↦ `W₁' = Vᵀ W₁`, `b₁' = Vᵀ b₁`, `W₂' = Σ`, `b₂' = Uᵀ b₂`,
/// `W₃' = W₃ U`, `b₃' = b₃`.
pub fn full_diagonalize(
    l1: &AffineLayer,
    l2: &AffineLayer,
    l3: &AffineLayer,
) -> Result<(AffineLayer, DiagonalLayer, AffineLayer)> {
    if l2.in_dim() != l1.out_dim() {
        return Err(Error::Dimension { layer: 1, expected: l1.out_dim(), found: l2.in_dim() });
    }
    if l3.in_dim() != l2.out_dim() {
        return Err(Error::Dimension { layer: 2, expected: l2.out_dim(), found: l3.in_dim() });
    }
    let f = svd(&l2.w)?;
    let l1p = AffineLayer::new(f.vt.matmul(&l1.w), f.vt.matvec(&l1.b));
    let mid = DiagonalLayer::new(l2.out_dim(), l2.in_dim(), f.sigma.clone(), f.u.tr_matvec(&l2.b));
    let l3p = AffineLayer::new(l3.w.matmul(&f.u), l3.b.clone());
    Ok((l1p, mid, l3p))
}

/// Number of isotropic hidden interfaces that can be adapted.
pub fn hidden_interfaces(net: &Network) -> usize {
    net.layers().len() / 2
}

fn pair_layers(net: &Network, hidden: usize) -> Result<(&AffineLayer, &IsoBlock, &AffineLayer)> {
    let i = 2 * hidden;
    let layers = net.layers();
    if i + 2 >= layers.len() {
        return Err(Error::InvalidArgument(format!(
            "hidden interface {hidden} out of range ({} available)",
            hidden_interfaces(net)
        )));
    }
    match (&layers[i], &layers[i + 1], &layers[i + 2]) {
        (Layer::Affine(a), Layer::Iso(b), Layer::Affine(c)) => Ok((a, b, c)),
        (_, Layer::Tanh, _) => Err(Error::NotIsotropic {
            layer: i + 1,
            reason: "elementwise tanh is not orthogonally equivariant".into(),
        }),
        _ => Err(Error::InvalidArgument(format!(
            "hidden interface {hidden} is not flanked by dense affine layers"
        ))),
    }
}

/// Partially diagonalises the layers around hidden interface `hidden`
/// (the block at layer index `2·hidden + 1`).
pub fn extract_pair(net: &Network, hidden: usize) -> Result<DiagonalizedPair> {
    let (a, b, c) = pair_layers(net, hidden)?;
    partial_diagonalize(a, b, c)
}

/// Contracts `pair` and writes it back over hidden interface `hidden`.
pub fn install_pair(net: &mut Network, hidden: usize, pair: &DiagonalizedPair) -> Result<()> {
    pair_layers(net, hidden)?;
    let (a, b, c) = pair.contract();
    let i = 2 * hidden;
    let layers = net.layers_mut();
    layers[i] = Layer::Affine(a);
    layers[i + 1] = Layer::Iso(b);
    layers[i + 2] = Layer::Affine(c);
    net.validate()
}
