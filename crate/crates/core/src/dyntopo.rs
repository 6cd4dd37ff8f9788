//! Neuron growth and pruning on diagonalised layer pairs, and the width scheduler.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{pinv_prune_correction, svd_thin, Matrix, Vector};
use crate::network::Network;
use crate::reparam::{extract_pair, hidden_interfaces, install_pair, DiagonalizedPair};

/// How the new column of the following weight is initialised on growth.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthPolicy {
    ZeroColumn,
    #[default]
    SemiOrthogonal,
    CloneColumn,
}

impl FromStr for GrowthPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "zero_column" => Ok(Self::ZeroColumn),
            "semi_orthogonal" => Ok(Self::SemiOrthogonal),
            "clone_column" => Ok(Self::CloneColumn),
            other => Err(format!("unknown growth policy `{other}`")),
        }
    }
}

impl std::fmt::Display for GrowthPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::ZeroColumn => "zero_column",
            Self::SemiOrthogonal => "semi_orthogonal",
            Self::CloneColumn => "clone_column",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// Grow or prune until exactly `scaffold_target` singular values sit below the threshold.
    Threshold,
    /// Move every hidden width one neuron per check toward the target.
    FixedWidth(usize),
}

impl FromStr for Schedule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "threshold" {
            return Ok(Self::Threshold);
        }
        match s.strip_prefix("fixed:").map(str::parse::<usize>) {
            Some(Ok(w)) if w >= 1 => Ok(Self::FixedWidth(w)),
            _ => Err(format!("schedule must be `threshold` or `fixed:<width>`, got `{s}`")),
        }
    }
}

impl std::fmt::Display for Schedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Threshold => f.write_str("threshold"),
            Self::FixedWidth(w) => write!(f, "fixed:{w}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptationPlan {
    /// Ξ: number of below-threshold neurons to keep per layer.
    pub scaffold_target: usize,
    /// ϑ
    pub sv_threshold: f64,
    /// Epochs between checks.
    pub cadence: usize,
    pub growth_policy: GrowthPolicy,
    /// Bias given to a grown neuron.
    pub b_star: f64,
    pub schedule: Schedule,
    /// Use the least-squares correction of the following layer on prune.
    pub use_pinv: bool,
}

impl Default for AdaptationPlan {
    fn default() -> Self {
        Self {
            scaffold_target: 0,
            sv_threshold: 1e-3,
            cadence: 1,
            growth_policy: GrowthPolicy::SemiOrthogonal,
            b_star: 0.0,
            schedule: Schedule::Threshold,
            use_pinv: false,
        }
    }
}

impl AdaptationPlan {
    pub fn validate(&self) -> Result<()> {
        if !(self.sv_threshold > 0.0) {
            return Err(Error::InvalidArgument("sv_threshold must be positive".into()));
        }
        if self.cadence == 0 {
            return Err(Error::InvalidArgument("cadence must be at least one epoch".into()));
        }
        if !self.b_star.is_finite() {
            return Err(Error::InvalidArgument("b_star must be finite".into()));
        }
        Ok(())
    }

    pub fn due(&self, epoch: usize) -> bool {
        epoch % self.cadence == 0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurgeryKind {
    Grow,
    Prune,
}

/// One neuron added or removed; serialised as one JSON line per event.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurgeryRecord {
    pub kind: SurgeryKind,
    /// Index of the isotropic block in the network's layer list.
    pub layer_index: usize,
    pub neuron_index: usize,
    pub sigma_removed: f64,
    pub b_star: f64,
    pub o_before: f64,
    pub o_after: f64,
    /// Batch estimate of the block's radial factor used for the bias correction.
    pub g_mean: f64,
    pub forward_deviation_probe: f64,
    pub width_after: usize,
}

/// Diagonal entries of `sigma` strictly below `theta`.
pub fn count_scaffold(sigma: &Matrix, theta: f64) -> usize {
    let k = sigma.rows().min(sigma.cols());
    (0..k).filter(|&i| sigma[(i, i)] < theta).count()
}

/// Neurons of a pair whose singular value is strictly below `theta`.
pub fn count_scaffold_rows(pair: &DiagonalizedPair, theta: f64) -> usize {
    pair.sigma.iter().filter(|&&s| s < theta).count()
}

/// Mean of the block's effective radial factor over `probes` (pair inputs).
pub fn mean_g(pair: &DiagonalizedPair, probes: &[Vector]) -> f64 {
    if probes.is_empty() {
        return 1.0;
    }
    let s = pair.block_scale();
    probes
        .iter()
        .map(|x| s * pair.block.g(&pair.pre_activation(x).scaled(s)))
        .sum::<f64>()
        / probes.len() as f64
}

fn probe_deviation(before: &DiagonalizedPair, after: &DiagonalizedPair, probes: &[Vector]) -> f64 {
    probes
        .iter()
        .map(|x| before.forward(x).max_abs_diff(&after.forward(x)))
        .fold(0.0, f64::max)
}

/// Unit vector orthogonal to the columns of `w`, built by Gram–Schmidt on the
/// standard basis. When the columns already span the space, the left singular
/// vector of the smallest singular value is returned instead.
pub fn semi_orthogonal_column(w: &Matrix) -> Result<Vector> {
    let m = w.rows();
    let mut basis: Vec<Vector> = Vec::new();
    if w.cols() > 0 {
        let f = svd_thin(w)?;
        let tol = f.sigma.first().copied().unwrap_or(0.0) * (m.max(w.cols()) as f64) * f64::EPSILON;
        for (j, &s) in f.sigma.iter().enumerate() {
            if s > tol {
                basis.push(f.u.column(j));
            }
        }
        if basis.len() >= m {
            let last = f.sigma.len() - 1;
            return Ok(f.u.column(last));
        }
    }
    for e in 0..m {
        let mut v = Vector::zeros(m);
        v[e] = 1.0;
        for _ in 0..2 {
            for b in &basis {
                let p = v.dot(b);
                v.axpy(-p, b);
            }
        }
        let n = v.norm();
        if n > 1e-8 {
            return Ok(v.scaled(1.0 / n));
        }
    }
    Err(Error::Surgery("no direction orthogonal to the existing columns".into()))
}

/// Appends one neuron with zero singular value.
///
/// `probes` are inputs to the pair; they supply the batch estimate of `g` and
/// the recorded forward deviation.
pub fn grow_one(
    pair: &DiagonalizedPair,
    plan: &AdaptationPlan,
    probes: &[Vector],
) -> Result<(DiagonalizedPair, SurgeryRecord)> {
    let b_star = plan.b_star;
    let o_before = pair.block.o();
    if b_star != 0.0 && b_star * b_star >= o_before {
        return Err(Error::Surgery(format!(
            "b* = {b_star} needs b*² < o = {o_before}"
        )));
    }
    let column = match plan.growth_policy {
        GrowthPolicy::ZeroColumn => Vector::zeros(pair.out_dim()),
        GrowthPolicy::SemiOrthogonal => semi_orthogonal_column(&pair.w2)?,
        GrowthPolicy::CloneColumn => {
            if pair.width() == 0 {
                return Err(Error::Surgery("cannot clone a column of a width-0 layer".into()));
            }
            pair.w2.column(0)
        }
    };
    let g_mean = mean_g(pair, probes);
    let mut next = pair.clone();
    let j = next.width();
    next.sigma.push(0.0);
    next.vt.push_row(&vec![0.0; next.in_dim()]);
    next.b1.push(b_star);
    next.w2.push_column(&column);
    let mut o_after = o_before;
    if b_star != 0.0 {
        o_after = o_before - b_star * b_star;
        next.block.set_o(o_after)?;
        next.b2.axpy(-g_mean * b_star, &column);
    }
    let record = SurgeryRecord {
        kind: SurgeryKind::Grow,
        layer_index: 0,
        neuron_index: j,
        sigma_removed: 0.0,
        b_star,
        o_before,
        o_after,
        g_mean,
        forward_deviation_probe: probe_deviation(pair, &next, probes),
        width_after: next.width(),
    };
    Ok((next, record))
}

/// Removes the neuron with the smallest singular value (ties to the lowest index).
pub fn prune_one(
    pair: &DiagonalizedPair,
    probes: &[Vector],
    use_pinv: bool,
) -> Result<(DiagonalizedPair, SurgeryRecord)> {
    if pair.width() <= 1 {
        return Err(Error::Surgery("cannot prune below width 1".into()));
    }
    let j = pair.smallest().expect("non-empty");
    let g_mean = mean_g(pair, probes);
    let b_star = pair.b1[j];
    let sigma_removed = pair.sigma[j];
    let o_before = pair.block.o();
    let column = pair.w2.column(j);

    let mut next = pair.clone();
    if use_pinv {
        let full = pair.sigma_matrix();
        let mut reduced = full.clone();
        reduced.remove_row(j);
        match pinv_prune_correction(&pair.w2, &full, &reduced) {
            Ok(y) => next.w2 = y,
            Err(Error::SingularCorrection) => {
                next.w2.remove_column(j);
            }
            Err(e) => return Err(e),
        }
    } else {
        next.w2.remove_column(j);
    }
    next.sigma.remove(j);
    next.vt.remove_row(j);
    next.b1.remove(j);
    let mut o_after = o_before;
    if b_star != 0.0 {
        o_after = o_before + b_star * b_star;
        next.block.set_o(o_after)?;
        next.b2.axpy(g_mean * b_star, &column);
    }
    let record = SurgeryRecord {
        kind: SurgeryKind::Prune,
        layer_index: 0,
        neuron_index: j,
        sigma_removed,
        b_star,
        o_before,
        o_after,
        g_mean,
        forward_deviation_probe: probe_deviation(pair, &next, probes),
        width_after: next.width(),
    };
    Ok((next, record))
}

fn max_output_deviation(a: &[Vector], b: &[Vector]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.max_abs_diff(y)).fold(0.0, f64::max)
}

/// One scheduler check over every isotropic hidden interface.
///
/// Each record's `forward_deviation_probe` is measured on the whole network
/// over `probes` (network inputs), comparing the outputs just before and just
/// after that single surgery.
pub fn scheduler_step(net: &mut Network, plan: &AdaptationPlan, probes: &[Vector]) -> Result<Vec<SurgeryRecord>> {
    plan.validate()?;
    let mut records = Vec::new();
    for h in 0..hidden_interfaces(net) {
        let layer_index = 2 * h + 1;
        if net.layers()[layer_index].as_iso().is_none() {
            continue;
        }
        let width = net.widths()[h + 1];
        if let Schedule::FixedWidth(target) = plan.schedule {
            if width == target {
                continue;
            }
        }
        let context = |e: Error| match e {
            Error::Surgery(msg) => Error::Surgery(format!("hidden layer {layer_index}: {msg}")),
            other => other,
        };
        let mut pair = extract_pair(net, h)?;
        install_pair(net, h, &pair)?;
        loop {
            let op = match plan.schedule {
                Schedule::FixedWidth(target) if pair.width() < target => Some(SurgeryKind::Grow),
                Schedule::FixedWidth(target) if pair.width() > target => Some(SurgeryKind::Prune),
                Schedule::FixedWidth(_) => None,
                Schedule::Threshold => {
                    let c = count_scaffold_rows(&pair, plan.sv_threshold);
                    if c < plan.scaffold_target {
                        Some(SurgeryKind::Grow)
                    } else if c > plan.scaffold_target && pair.width() > 1 {
                        Some(SurgeryKind::Prune)
                    } else {
                        None
                    }
                }
            };
            let Some(op) = op else { break };
            let before: Vec<Vector> = probes.iter().map(|x| net.predict(x)).collect::<Result<_>>()?;
            let pair_inputs: Vec<Vector> = probes
                .iter()
                .map(|x| net.forward(x).map(|(_, t)| t.inputs[2 * h].clone()))
                .collect::<Result<_>>()?;
            let (next, mut rec) = match op {
                SurgeryKind::Grow => grow_one(&pair, plan, &pair_inputs),
                SurgeryKind::Prune => prune_one(&pair, &pair_inputs, plan.use_pinv),
            }
            .map_err(context)?;
            install_pair(net, h, &next)?;
            let after: Vec<Vector> = probes.iter().map(|x| net.predict(x)).collect::<Result<_>>()?;
            rec.layer_index = layer_index;
            rec.forward_deviation_probe = max_output_deviation(&before, &after);
            records.push(rec);
            pair = next;
            if matches!(plan.schedule, Schedule::FixedWidth(_)) {
                break;
            }
        }
    }
    net.validate()?;
    Ok(records)
}
