//! Desk-scale dynamic-width protocol on a CIFAR-10 subset.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{load_cifar10, Dataset};
use crate::dyntopo::{AdaptationPlan, Schedule};
use crate::error::Result;
use crate::network::{Activation, Network};
use crate::optim::AdamState;
use crate::train::{run_epochs, EpochMetrics, TrainSettings};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeskConfig {
    pub hidden: usize,
    pub pretrain_epochs: usize,
    pub grow_to: usize,
    pub prune_to: usize,
    pub degenerate_to: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub train_subset: usize,
    pub test_subset: usize,
    pub seeds: Vec<u64>,
}

impl Default for DeskConfig {
    fn default() -> Self {
        Self {
            hidden: 16,
            pretrain_epochs: 10,
            grow_to: 32,
            prune_to: 24,
            degenerate_to: 8,
            lr: 0.08,
            batch_size: 24,
            train_subset: 5000,
            test_subset: 1000,
            seeds: vec![0, 1, 2],
        }
    }
}

/// Metrics of one seeded run of the full protocol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub seed: u64,
    pub activation: Activation,
    pub rows: Vec<EpochMetrics>,
}

impl RunOutcome {
    pub fn phase<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a EpochMetrics> {
        self.rows.iter().filter(move |r| r.phase == name)
    }

    pub fn final_acc(&self, name: &str) -> Option<f64> {
        self.phase(name).last().map(|r| r.test_acc)
    }

    /// Largest accuracy drop across any surgery in a phase, in percentage points.
    pub fn worst_surgery_drop_pp(&self, name: &str) -> f64 {
        self.phase(name)
            .filter_map(|r| Some(100.0 * (r.surgery_acc_before? - r.surgery_acc_after?)))
            .fold(0.0, f64::max)
    }

    pub fn surgery_count(&self, name: &str) -> usize {
        self.phase(name).map(|r| r.grows + r.prunes).sum()
    }
}

fn fixed(target: usize) -> AdaptationPlan {
    AdaptationPlan { schedule: Schedule::FixedWidth(target), ..AdaptationPlan::default() }
}

/// Pretrain, grow, prune, then degenerate; every phase moves one neuron per epoch.
pub fn run_protocol(cfg: &DeskConfig, train: &Dataset, test: &Dataset, activation: Activation, seed: u64) -> Result<RunOutcome> {
    let widths = [train.feature_dim, cfg.hidden, train.n_classes];
    let mut net = Network::mlp(&widths, activation, seed)?;
    let mut opt = AdamState::new(cfg.lr);
    let settings = TrainSettings { batch_size: cfg.batch_size, seed, probe_count: 64 };
    let mut rows = run_epochs(&mut net, &mut opt, train, test, &settings, cfg.pretrain_epochs, 0, "pretrain", None, |_| {})?;
    if activation == Activation::AnisoTanh {
        return Ok(RunOutcome { seed, activation, rows });
    }
    let mut width = cfg.hidden;
    for (phase, target) in [("grow", cfg.grow_to), ("prune", cfg.prune_to), ("degenerate", cfg.degenerate_to)] {
        let epochs = width.abs_diff(target);
        let plan = fixed(target);
        let first = rows.len();
        rows.extend(run_epochs(&mut net, &mut opt, train, test, &settings, epochs, first, phase, Some(&plan), |_| {})?);
        width = target;
    }
    Ok(RunOutcome { seed, activation, rows })
}

/// All seeds, isotropic and elementwise tanh.
pub fn run_desk_scale(cfg: &DeskConfig, data_dir: &Path) -> Result<Vec<RunOutcome>> {
    let mut out = Vec::new();
    for &seed in &cfg.seeds {
        let (train, test, _) = load_cifar10(data_dir, Some(cfg.train_subset), Some(cfg.test_subset), seed)?;
        for act in [Activation::IsoTanh, Activation::AnisoTanh] {
            out.push(run_protocol(cfg, &train, &test, act, seed)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic_gaussian;

    #[test]
    fn protocol_runs_on_synthetic_data() {
        let (train, test) = synthetic_gaussian(160, 6, 3, 2).unwrap().split(120);
        let cfg = DeskConfig { hidden: 4, pretrain_epochs: 2, grow_to: 6, prune_to: 5, degenerate_to: 3, lr: 0.01, batch_size: 8, ..DeskConfig::default() };
        let run = run_protocol(&cfg, &train, &test, Activation::IsoTanh, 1).unwrap();
        assert_eq!(run.surgery_count("grow"), 2);
        assert_eq!(run.surgery_count("prune"), 1);
        assert_eq!(run.surgery_count("degenerate"), 2);
        assert_eq!(run.rows.last().unwrap().widths, "3");
        assert!(run.worst_surgery_drop_pp("grow") <= 1e-9);
    }
}
