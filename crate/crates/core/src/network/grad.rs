use serde::{Deserialize, Serialize};

use super::{Layer, Network};
use crate::linalg::{Matrix, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Weight,
    Bias,
    Diag,
    Lambda,
}

/// Names one trainable tensor: the layer index plus which tensor of that layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId {
    pub layer: usize,
    pub kind: ParamKind,
}

impl ParamId {
    pub fn new(layer: usize, kind: ParamKind) -> Self {
        Self { layer, kind }
    }
}

impl std::fmt::Display for ParamId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let k = match self.kind {
            ParamKind::Weight => "w",
            ParamKind::Bias => "b",
            ParamKind::Diag => "diag",
            ParamKind::Lambda => "lambda",
        };
        write!(f, "layers.{}.{k}", self.layer)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LayerGrad {
    Affine { w: Matrix, b: Vector },
    Diagonal { diag: Vector, b: Vector },
    Iso { lambda: f64 },
    None,
}

/// Per-layer parameter gradients plus the gradient with respect to the input.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
    pub input: Vector,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        let layers = net
            .layers()
            .iter()
            .map(|l| match l {
                Layer::Affine(a) => LayerGrad::Affine {
                    w: Matrix::zeros(a.w.rows(), a.w.cols()),
                    b: Vector::zeros(a.b.len()),
                },
                Layer::Diagonal(d) => LayerGrad::Diagonal {
                    diag: Vector::zeros(d.diag.len()),
                    b: Vector::zeros(d.b.len()),
                },
                Layer::Iso(_) => LayerGrad::Iso { lambda: 0.0 },
                Layer::Tanh => LayerGrad::None,
            })
            .collect();
        Self {
            layers,
            input: Vector::zeros(net.input_dim()),
        }
    }

    /// `self += other`, in place.
    pub fn accumulate(&mut self, other: &Gradients) {
        assert_eq!(self.layers.len(), other.layers.len(), "gradient layouts differ");
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            match (a, b) {
                (LayerGrad::Affine { w, b: bias }, LayerGrad::Affine { w: w2, b: b2 }) => {
                    w.as_mut_slice().iter_mut().zip(w2.as_slice()).for_each(|(x, y)| *x += y);
                    bias.axpy(1.0, b2);
                }
                (LayerGrad::Diagonal { diag, b: bias }, LayerGrad::Diagonal { diag: d2, b: b2 }) => {
                    diag.axpy(1.0, d2);
                    bias.axpy(1.0, b2);
                }
                (LayerGrad::Iso { lambda }, LayerGrad::Iso { lambda: l2 }) => *lambda += l2,
                (LayerGrad::None, LayerGrad::None) => {}
                _ => panic!("gradient layouts differ"),
            }
        }
        self.input.axpy(1.0, &other.input);
    }

    pub fn scale(&mut self, s: f64) {
        for g in &mut self.layers {
            match g {
                LayerGrad::Affine { w, b } => {
                    w.as_mut_slice().iter_mut().for_each(|x| *x *= s);
                    b.scale_mut(s);
                }
                LayerGrad::Diagonal { diag, b } => {
                    diag.scale_mut(s);
                    b.scale_mut(s);
                }
                LayerGrad::Iso { lambda } => *lambda *= s,
                LayerGrad::None => {}
            }
        }
        self.input.scale_mut(s);
    }

    /// Gradient tensor for a parameter, flattened row-major.
    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        match (self.layers.get(id.layer)?, id.kind) {
            (LayerGrad::Affine { w, .. }, ParamKind::Weight) => Some(w.as_slice()),
            (LayerGrad::Affine { b, .. }, ParamKind::Bias) => Some(b.as_slice()),
            (LayerGrad::Diagonal { diag, .. }, ParamKind::Diag) => Some(diag.as_slice()),
            (LayerGrad::Diagonal { b, .. }, ParamKind::Bias) => Some(b.as_slice()),
            (LayerGrad::Iso { lambda }, ParamKind::Lambda) => Some(std::slice::from_ref(lambda)),
            _ => None,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .map(|g| match g {
                LayerGrad::Affine { w, b } => w.max_abs().max(b.max_abs()),
                LayerGrad::Diagonal { diag, b } => diag.max_abs().max(b.max_abs()),
                LayerGrad::Iso { lambda } => lambda.abs(),
                LayerGrad::None => 0.0,
            })
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.max_abs().is_finite() && self.input.is_finite()
    }
}

/// A trainable tensor borrowed from a network.
pub struct ParamMut<'a> {
    pub id: ParamId,
    pub shape: (usize, usize),
    pub values: &'a mut [f64],
}

impl Network {
    /// Every trainable tensor in layer order. Lambdas of blocks with the
    /// intrinsic length switched off are not trainable and are skipped.
    pub fn params_mut(&mut self) -> Vec<ParamMut<'_>> {
        let mut out = Vec::new();
        for (i, layer) in self.layers_mut().iter_mut().enumerate() {
            match layer {
                Layer::Affine(a) => {
                    let shape = a.w.shape();
                    out.push(ParamMut { id: ParamId::new(i, ParamKind::Weight), shape, values: a.w.as_mut_slice() });
                    let n = a.b.len();
                    out.push(ParamMut { id: ParamId::new(i, ParamKind::Bias), shape: (n, 1), values: &mut a.b });
                }
                Layer::Diagonal(d) => {
                    let n = d.diag.len();
                    out.push(ParamMut { id: ParamId::new(i, ParamKind::Diag), shape: (n, 1), values: &mut d.diag });
                    let n = d.b.len();
                    out.push(ParamMut { id: ParamId::new(i, ParamKind::Bias), shape: (n, 1), values: &mut d.b });
                }
                Layer::Iso(b) if b.intrinsic_length => out.push(ParamMut {
                    id: ParamId::new(i, ParamKind::Lambda),
                    shape: (1, 1),
                    values: std::slice::from_mut(&mut b.lambda),
                }),
                _ => {}
            }
        }
        out
    }

    /// Ids and shapes of the trainable tensors, in the order of [`Network::params_mut`].
    pub fn param_shapes(&self) -> Vec<(ParamId, (usize, usize))> {
        let mut out = Vec::new();
        for (i, layer) in self.layers().iter().enumerate() {
            match layer {
                Layer::Affine(a) => {
                    out.push((ParamId::new(i, ParamKind::Weight), a.w.shape()));
                    out.push((ParamId::new(i, ParamKind::Bias), (a.b.len(), 1)));
                }
                Layer::Diagonal(d) => {
                    out.push((ParamId::new(i, ParamKind::Diag), (d.diag.len(), 1)));
                    out.push((ParamId::new(i, ParamKind::Bias), (d.b.len(), 1)));
                }
                Layer::Iso(b) if b.intrinsic_length => out.push((ParamId::new(i, ParamKind::Lambda), (1, 1))),
                _ => {}
            }
        }
        out
    }
}
