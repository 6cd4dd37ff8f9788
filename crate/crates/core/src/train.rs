//! Minibatch training loop with optional width adaptation between epochs.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::dyntopo::{scheduler_step, AdaptationPlan, SurgeryKind, SurgeryRecord};
use crate::error::Result;
use crate::linalg::Vector;
use crate::network::{Gradients, Loss, Network, SoftmaxCrossEntropy};
use crate::optim::Optimizer;
use crate::rng::seeded;

/// Index of the largest entry.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Mean cross-entropy loss, number of correct predictions and summed-then-averaged
/// gradients over one batch. Samples are reduced in index order.
pub fn batch_gradients(net: &mut Network, xs: &[Vector], labels: &[usize], training: bool) -> Result<(f64, usize, Gradients)> {
    let traces = net.forward_batch(xs, training)?;
    let mut grads = Gradients::zeros_like(net);
    let mut loss = 0.0;
    let mut correct = 0;
    for (t, &y) in traces.iter().zip(labels) {
        let (l, d) = SoftmaxCrossEntropy.eval(t.output(), &y);
        loss += l;
        correct += usize::from(argmax(t.output()) == y);
        net.backward_into(t, &d, &mut grads)?;
    }
    let n = xs.len().max(1) as f64;
    grads.scale(1.0 / n);
    Ok((loss / n, correct, grads))
}

/// Fraction of correctly classified samples (inference mode).
pub fn accuracy(net: &Network, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0;
    for (x, &y) in data.features.iter().zip(&data.labels) {
        correct += usize::from(argmax(&net.predict(x)?) == y);
    }
    Ok(correct as f64 / data.len() as f64)
}

/// One pass over `data` in a seeded random order. Returns mean loss and accuracy.
pub fn train_epoch(
    net: &mut Network,
    opt: &mut dyn Optimizer,
    data: &Dataset,
    batch_size: usize,
    seed: u64,
    epoch: u64,
) -> Result<(f64, f64)> {
    data.ensure_non_empty()?;
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut seeded(seed, 0x5eed_0000 + epoch));
    let mut total_loss = 0.0;
    let mut total_correct = 0;
    for chunk in order.chunks(batch_size.max(1)) {
        let xs: Vec<Vector> = chunk.iter().map(|&i| data.features[i].clone()).collect();
        let ys: Vec<usize> = chunk.iter().map(|&i| data.labels[i]).collect();
        let (loss, correct, grads) = batch_gradients(net, &xs, &ys, true)?;
        opt.step(net, &grads)?;
        total_loss += loss * chunk.len() as f64;
        total_correct += correct;
    }
    Ok((total_loss / data.len() as f64, total_correct as f64 / data.len() as f64))
}

/// One row of the per-epoch metrics table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub phase: String,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
    /// Hidden widths, `-`-joined.
    pub widths: String,
    pub grows: usize,
    pub prunes: usize,
    pub max_probe_deviation: f64,
    /// Test accuracy just before and just after this epoch's surgeries.
    pub surgery_acc_before: Option<f64>,
    pub surgery_acc_after: Option<f64>,
}

pub fn hidden_widths(net: &Network) -> String {
    let w = net.widths();
    w[1..w.len() - 1].iter().map(ToString::to_string).collect::<Vec<_>>().join("-")
}

/// Settings shared by training and adaptation runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub batch_size: usize,
    pub seed: u64,
    /// Probe inputs (first `n` training samples) for surgery deviation checks.
    pub probe_count: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self { batch_size: 24, seed: 0, probe_count: 64 }
    }
}

/// Trains for `epochs` epochs. When `plan` is given the scheduler runs before
/// every due epoch and the optimiser state is resized after each surgery.
#[allow(clippy::too_many_arguments)]
pub fn run_epochs(
    net: &mut Network,
    opt: &mut dyn Optimizer,
    train: &Dataset,
    test: &Dataset,
    settings: &TrainSettings,
    epochs: usize,
    first_epoch: usize,
    phase: &str,
    plan: Option<&AdaptationPlan>,
    mut on_surgery: impl FnMut(&SurgeryRecord),
) -> Result<Vec<EpochMetrics>> {
    let probes: Vec<Vector> = train.features.iter().take(settings.probe_count).cloned().collect();
    let mut rows = Vec::with_capacity(epochs);
    for e in 0..epochs {
        let epoch = first_epoch + e;
        let mut records = Vec::new();
        let mut surgery_acc = None;
        if let Some(plan) = plan {
            if plan.due(e) {
                let before = accuracy(net, test)?;
                records = scheduler_step(net, plan, &probes)?;
                for r in &records {
                    opt.resize_state(r)?;
                    on_surgery(r);
                }
                if !records.is_empty() {
                    surgery_acc = Some((before, accuracy(net, test)?));
                }
            }
        }
        let (train_loss, train_acc) = train_epoch(net, opt, train, settings.batch_size, settings.seed, epoch as u64)?;
        rows.push(EpochMetrics {
            epoch,
            phase: phase.to_string(),
            train_loss,
            train_acc,
            test_acc: accuracy(net, test)?,
            widths: hidden_widths(net),
            grows: records.iter().filter(|r| r.kind == SurgeryKind::Grow).count(),
            prunes: records.iter().filter(|r| r.kind == SurgeryKind::Prune).count(),
            max_probe_deviation: records.iter().map(|r| r.forward_deviation_probe).fold(0.0, f64::max),
            surgery_acc_before: surgery_acc.map(|a| a.0),
            surgery_acc_after: surgery_acc.map(|a| a.1),
        });
    }
    Ok(rows)
}
