//! Gradient-descent optimisers.

use std::collections::BTreeMap;

use crate::dyntopo::{SurgeryKind, SurgeryRecord};
use crate::error::{Error, Result};
use crate::network::{Gradients, Network, ParamId, ParamKind};

/// `p ← p − η g`, elementwise.
pub fn sgd_step(params: &mut [f64], grads: &[f64], eta: f64) {
    assert_eq!(params.len(), grads.len(), "parameter and gradient lengths differ");
    for (p, g) in params.iter_mut().zip(grads) {
        *p -= eta * g;
    }
}

pub trait Optimizer {
    fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<()>;

    /// Adjusts internal state after a width change.
    fn resize_state(&mut self, _record: &SurgeryRecord) -> Result<()> {
        Ok(())
    }
}

fn grad_for(grads: &Gradients, id: ParamId, len: usize) -> Result<&[f64]> {
    match grads.get(id) {
        Some(g) if g.len() == len => Ok(g),
        Some(g) => Err(Error::Shape {
            what: format!("gradient of {id}"),
            expected: (len, 1),
            found: (g.len(), 1),
        }),
        None => Err(Error::InvalidArgument(format!("no gradient for {id}"))),
    }
}

#[derive(Clone, Debug)]
pub struct Sgd {
    pub lr: f64,
}

impl Optimizer for Sgd {
    fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<()> {
        for p in net.params_mut() {
            let g = grad_for(grads, p.id, p.values.len())?;
            sgd_step(p.values, g, self.lr);
        }
        Ok(())
    }
}

/// First and second moments of one parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub shape: (usize, usize),
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Moments {
    fn zeros(shape: (usize, usize)) -> Self {
        Self { shape, m: vec![0.0; shape.0 * shape.1], v: vec![0.0; shape.0 * shape.1] }
    }

    fn push_row(&mut self) {
        let c = self.shape.1;
        self.m.extend(std::iter::repeat_n(0.0, c));
        self.v.extend(std::iter::repeat_n(0.0, c));
        self.shape.0 += 1;
    }

    fn remove_row(&mut self, i: usize) {
        let c = self.shape.1;
        self.m.drain(i * c..(i + 1) * c);
        self.v.drain(i * c..(i + 1) * c);
        self.shape.0 -= 1;
    }

    fn map_columns(&mut self, new_cols: usize, f: impl Fn(&[f64]) -> Vec<f64>) {
        let (r, c) = self.shape;
        let remap = |buf: &[f64]| -> Vec<f64> { (0..r).flat_map(|i| f(&buf[i * c..(i + 1) * c])).collect() };
        self.m = remap(&self.m);
        self.v = remap(&self.v);
        self.shape.1 = new_cols;
    }
}

/// Bias-corrected Adam with elementwise accumulators.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    pub moments: BTreeMap<ParamId, Moments>,
}

impl AdamState {
    pub fn new(lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, step: 0, moments: BTreeMap::new() }
    }

    /// Returns an error naming the first tensor whose accumulator shape
    /// disagrees with the network.
    pub fn check_shapes(&self, net: &Network) -> Result<()> {
        for (id, shape) in net.param_shapes() {
            if let Some(mo) = self.moments.get(&id) {
                if mo.shape != shape {
                    return Err(Error::Shape { what: format!("Adam state for {id}"), expected: shape, found: mo.shape });
                }
            }
        }
        Ok(())
    }
}

impl Optimizer for AdamState {
    fn step(&mut self, net: &mut Network, grads: &Gradients) -> Result<()> {
        self.check_shapes(net)?;
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for p in net.params_mut() {
            let g = grad_for(grads, p.id, p.values.len())?;
            let mo = self.moments.entry(p.id).or_insert_with(|| Moments::zeros(p.shape));
            for ((w, &gi), (m, v)) in p.values.iter_mut().zip(g).zip(mo.m.iter_mut().zip(mo.v.iter_mut())) {
                *m = self.beta1 * *m + (1.0 - self.beta1) * gi;
                *v = self.beta2 * *v + (1.0 - self.beta2) * gi * gi;
                let mhat = *m / c1;
                let vhat = *v / c2;
                *w -= self.lr * mhat / (vhat.sqrt() + self.epsilon);
            }
        }
        Ok(())
    }

    /// Grown slices get zero moments, pruned slices are dropped; the step
    /// counter is kept.
    fn resize_state(&mut self, record: &SurgeryRecord) -> Result<()> {
        let before = record.layer_index.checked_sub(1).ok_or_else(|| {
            Error::InvalidArgument("surgery record does not point at a hidden block".into())
        })?;
        let after = record.layer_index + 1;
        let j = record.neuron_index;
        let w_in = ParamId::new(before, ParamKind::Weight);
        let b_in = ParamId::new(before, ParamKind::Bias);
        let w_out = ParamId::new(after, ParamKind::Weight);
        match record.kind {
            SurgeryKind::Grow => {
                for id in [w_in, b_in] {
                    if let Some(mo) = self.moments.get_mut(&id) {
                        if j != mo.shape.0 {
                            return Err(Error::Surgery(format!("grown row {j} is not appended to {id}")));
                        }
                        mo.push_row();
                    }
                }
                if let Some(mo) = self.moments.get_mut(&w_out) {
                    let c = mo.shape.1;
                    mo.map_columns(c + 1, |row| {
                        let mut r = row.to_vec();
                        r.insert(j, 0.0);
                        r
                    });
                }
            }
            SurgeryKind::Prune => {
                for id in [w_in, b_in] {
                    if let Some(mo) = self.moments.get_mut(&id) {
                        mo.remove_row(j);
                    }
                }
                if let Some(mo) = self.moments.get_mut(&w_out) {
                    let c = mo.shape.1;
                    mo.map_columns(c - 1, |row| {
                        let mut r = row.to_vec();
                        r.remove(j);
                        r
                    });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Activation, LayerGrad};

    #[test]
    fn sgd_by_hand() {
        let mut p = [1.0];
        sgd_step(&mut p, &[2.0], 0.1);
        assert!((p[0] - 0.8).abs() < 1e-15);
        let mut q = [0.3, -0.2];
        sgd_step(&mut q, &[0.0, 0.0], 0.5);
        assert_eq!(q, [0.3, -0.2]);
    }

    fn ones_like(net: &Network) -> Gradients {
        let mut g = Gradients::zeros_like(net);
        for l in &mut g.layers {
            match l {
                LayerGrad::Affine { w, b } => {
                    w.as_mut_slice().iter_mut().for_each(|v| *v = 1.0);
                    b.iter_mut().for_each(|v| *v = 1.0);
                }
                LayerGrad::Iso { lambda } => *lambda = 1.0,
                _ => {}
            }
        }
        g
    }

    #[test]
    fn adam_first_step_is_lr() {
        let mut net = Network::mlp(&[3, 2, 2], Activation::IsoTanh, 1).unwrap();
        let before = net.clone();
        let mut adam = AdamState::new(0.08);
        adam.step(&mut net, &ones_like(&before)).unwrap();
        let w0 = &before.layers()[0].as_affine().unwrap().w;
        let w1 = &net.layers()[0].as_affine().unwrap().w;
        for (a, b) in w0.as_slice().iter().zip(w1.as_slice()) {
            assert!((a - b - 0.08).abs() < 1e-8);
        }
        let frozen = net.clone();
        adam = AdamState::new(0.08);
        adam.step(&mut net, &Gradients::zeros_like(&frozen)).unwrap();
        assert_eq!(net, frozen);
    }
}
