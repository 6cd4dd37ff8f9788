//! Layered network container, forward pass with trace, and manual backpropagation.

mod checkpoint;
mod grad;
mod layer;
mod loss;

pub use checkpoint::{load, save, CHECKPOINT_VERSION};
pub use grad::{Gradients, LayerGrad, ParamId, ParamKind, ParamMut};
pub use layer::{Activation, AffineLayer, DiagonalLayer, Layer};
pub use loss::{softmax, Loss, SoftmaxCrossEntropy, SquaredError};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::primitives::{radial_normalize, IsoBlock, RadialProfile};
use crate::rng::{gaussian_matrix, seeded};

/// Alternating linear / activation layers, starting and ending with a linear layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
}

/// Intermediate values recorded by [`Network::forward`].
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    /// `inputs[i]` is what layer `i` received; the last entry is the network output.
    pub inputs: Vec<Vector>,
    /// Normaliser scale applied inside layer `i` (1 when there is none).
    pub scales: Vec<f64>,
    /// Activation radius of layer `i` (0 for non-isotropic layers).
    pub radii: Vec<f64>,
}

impl Trace {
    pub fn output(&self) -> &Vector {
        self.inputs.last().expect("trace always holds the input")
    }
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        let net = Self { layers };
        net.validate()?;
        Ok(net)
    }

    /// Seeded MLP with Gaussian weights of std `1/sqrt(fan_in)` and zero biases.
    pub fn mlp(widths: &[usize], activation: Activation, seed: u64) -> Result<Self> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "architecture needs at least two positive widths, got {widths:?}"
            )));
        }
        let mut rng = seeded(seed, 0);
        let mut layers = Vec::with_capacity(2 * widths.len() - 3);
        for (k, pair) in widths.windows(2).enumerate() {
            if k > 0 {
                layers.push(match activation {
                    Activation::IsoTanh => Layer::Iso(IsoBlock::new(RadialProfile::IsoTanh)),
                    Activation::AnisoTanh => Layer::Tanh,
                    Activation::Identity => Layer::Iso(IsoBlock::plain(RadialProfile::Identity)),
                });
            }
            let (fan_in, out) = (pair[0], pair[1]);
            let w = gaussian_matrix(&mut rng, out, fan_in, 1.0 / (fan_in as f64).sqrt());
            layers.push(Layer::Affine(AffineLayer::new(w, Vector::zeros(out))));
        }
        Self::new(layers)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidArgument("network has no layers".into()));
        }
        let mut width: Option<usize> = None;
        for (i, layer) in self.layers.iter().enumerate() {
            let want_linear = i % 2 == 0;
            if layer.is_linear() != want_linear {
                return Err(Error::InvalidArgument(format!(
                    "layer {i} breaks the linear/activation alternation"
                )));
            }
            match layer {
                Layer::Affine(a) if a.b.len() != a.w.rows() => {
                    return Err(Error::Dimension { layer: i, expected: a.w.rows(), found: a.b.len() })
                }
                Layer::Iso(b) => b.validate()?,
                _ => {}
            }
            if let Some((inp, out)) = layer.dims() {
                if let Some(w) = width {
                    if w != inp {
                        return Err(Error::Dimension { layer: i, expected: w, found: inp });
                    }
                }
                width = Some(out);
            }
        }
        if !self.layers.last().is_some_and(Layer::is_linear) {
            return Err(Error::InvalidArgument("network must end with a linear layer".into()));
        }
        Ok(())
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Mutable access; callers must keep the chain consistent (see [`Network::validate`]).
    pub fn layers_mut(&mut self) -> &mut Vec<Layer> {
        &mut self.layers
    }

    pub fn into_layers(self) -> Vec<Layer> {
        self.layers
    }

    /// Interface widths: input, every hidden interface, output.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::new();
        for layer in &self.layers {
            if let Some((inp, out)) = layer.dims() {
                if w.is_empty() {
                    w.push(inp);
                }
                w.push(out);
            }
        }
        w
    }

    pub fn input_dim(&self) -> usize {
        self.widths()[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths().last().expect("validated network")
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn is_isotropic(&self) -> bool {
        self.layers.iter().all(|l| !matches!(l, Layer::Tanh))
    }

    pub fn iso_blocks_mut(&mut self) -> impl Iterator<Item = &mut IsoBlock> {
        self.layers.iter_mut().filter_map(Layer::as_iso_mut)
    }

    fn check_input(&self, layer: usize, x: &[f64]) -> Result<()> {
        let expected = match &self.layers[layer] {
            Layer::Affine(a) => a.in_dim(),
            Layer::Diagonal(d) => d.cols,
            _ => return Ok(()),
        };
        if x.len() != expected {
            return Err(Error::Dimension { layer, expected, found: x.len() });
        }
        Ok(())
    }

    /// Inference-mode forward pass: normalisers use their running statistics.
    pub fn forward(&self, x: &[f64]) -> Result<(Vector, Trace)> {
        let n = self.layers.len();
        let mut trace = Trace {
            inputs: Vec::with_capacity(n + 1),
            scales: Vec::with_capacity(n),
            radii: Vec::with_capacity(n),
        };
        let mut cur = Vector::from(x);
        for (i, layer) in self.layers.iter().enumerate() {
            self.check_input(i, &cur)?;
            let (next, scale, radius) = match layer {
                Layer::Affine(a) => (a.apply(&cur), 1.0, 0.0),
                Layer::Diagonal(d) => (d.apply(&cur), 1.0, 0.0),
                Layer::Tanh => (cur.iter().map(|v| v.tanh()).collect(), 1.0, 0.0),
                Layer::Iso(b) => {
                    let s = b.normalizer.as_ref().map_or(1.0, |n| n.inference_scale());
                    let u = cur.scaled(s);
                    let r = b.radius(&u);
                    (b.apply(&u), s, r)
                }
            };
            trace.inputs.push(cur);
            trace.scales.push(scale);
            trace.radii.push(radius);
            cur = next;
        }
        trace.inputs.push(cur.clone());
        Ok((cur, trace))
    }

    /// Output only.
    pub fn predict(&self, x: &[f64]) -> Result<Vector> {
        Ok(self.forward(x)?.0)
    }

    /// Batched forward pass. In training mode each normaliser rescales the batch
    /// by its own statistic and updates its running estimate.
    pub fn forward_batch(&mut self, xs: &[Vector], training: bool) -> Result<Vec<Trace>> {
        let n = self.layers.len();
        let mut traces: Vec<Trace> = xs
            .iter()
            .map(|_| Trace {
                inputs: Vec::with_capacity(n + 1),
                scales: Vec::with_capacity(n),
                radii: Vec::with_capacity(n),
            })
            .collect();
        let mut cur: Vec<Vector> = xs.to_vec();
        for i in 0..n {
            for x in &cur {
                self.check_input(i, x)?;
            }
            let scale = match &mut self.layers[i] {
                Layer::Iso(b) => match b.normalizer.as_mut() {
                    Some(norm) if training && !cur.is_empty() => radial_normalize(&cur, norm, true)?.scale,
                    Some(norm) => norm.inference_scale(),
                    None => 1.0,
                },
                _ => 1.0,
            };
            let layer = &self.layers[i];
            for (t, x) in traces.iter_mut().zip(cur.iter_mut()) {
                let (next, radius) = match layer {
                    Layer::Affine(a) => (a.apply(x), 0.0),
                    Layer::Diagonal(d) => (d.apply(x), 0.0),
                    Layer::Tanh => (x.iter().map(|v| v.tanh()).collect(), 0.0),
                    Layer::Iso(b) => {
                        let u = x.scaled(scale);
                        (b.apply(&u), b.radius(&u))
                    }
                };
                t.inputs.push(std::mem::replace(x, next));
                t.scales.push(scale);
                t.radii.push(radius);
            }
        }
        for (t, x) in traces.iter_mut().zip(cur) {
            t.inputs.push(x);
        }
        Ok(traces)
    }

    /// Backpropagates `dloss_dout` through a trace produced by `forward` on
    /// the current parameters. Normaliser scales are treated as constants.
    pub fn backward(&self, trace: &Trace, dloss_dout: &[f64]) -> Result<Gradients> {
        let mut grads = Gradients::zeros_like(self);
        self.backward_into(trace, dloss_dout, &mut grads)?;
        Ok(grads)
    }

    /// Like [`Network::backward`] but adds into an existing gradient set,
    /// including the input gradient.
    pub fn backward_into(&self, trace: &Trace, dloss_dout: &[f64], grads: &mut Gradients) -> Result<()> {
        let n = self.layers.len();
        if trace.inputs.len() != n + 1 || trace.scales.len() != n {
            return Err(Error::InvalidArgument(format!(
                "trace covers {} layers, network has {n}",
                trace.scales.len()
            )));
        }
        if grads.layers.len() != n {
            return Err(Error::InvalidArgument("gradient set does not match the network".into()));
        }
        let out_dim = self.output_dim();
        if dloss_dout.len() != out_dim || trace.output().len() != out_dim {
            return Err(Error::Dimension { layer: n - 1, expected: out_dim, found: dloss_dout.len() });
        }
        let mut delta = Vector::from(dloss_dout);
        for i in (0..n).rev() {
            let a = &trace.inputs[i];
            let expected_out = trace.inputs[i + 1].len();
            if delta.len() != expected_out {
                return Err(Error::Dimension { layer: i, expected: expected_out, found: delta.len() });
            }
            self.check_input(i, a)?;
            let prev = match (&self.layers[i], &mut grads.layers[i]) {
                (Layer::Affine(l), LayerGrad::Affine { w, b }) => {
                    if l.out_dim() != delta.len() || w.shape() != l.w.shape() {
                        return Err(Error::Dimension { layer: i, expected: l.out_dim(), found: delta.len() });
                    }
                    w.add_outer(1.0, &delta, a);
                    b.axpy(1.0, &delta);
                    l.w.tr_matvec(&delta)
                }
                (Layer::Diagonal(d), LayerGrad::Diagonal { diag, b }) => {
                    if d.rows != delta.len() || diag.len() != d.diag.len() {
                        return Err(Error::Dimension { layer: i, expected: d.rows, found: delta.len() });
                    }
                    let mut prev = Vector::zeros(d.cols);
                    for (k, dk) in d.diag.iter().enumerate() {
                        diag[k] += delta[k] * a[k];
                        prev[k] = dk * delta[k];
                    }
                    b.axpy(1.0, &delta);
                    prev
                }
                (Layer::Tanh, LayerGrad::None) => {
                    a.iter().zip(delta.iter()).map(|(x, d)| d * (1.0 - x.tanh().powi(2))).collect()
                }
                (Layer::Iso(b), LayerGrad::Iso { lambda }) => {
                    let s = trace.scales[i];
                    let u = a.scaled(s);
                    *lambda += b.dlambda(&u).dot(&delta);
                    let mut prev = b.jacobian_tr_vec(&u, &delta);
                    prev.scale_mut(s);
                    prev
                }
                _ => return Err(Error::InvalidArgument(format!("gradient layout differs at layer {i}"))),
            };
            delta = prev;
        }
        grads.input.axpy(1.0, &delta);
        Ok(())
    }
}
