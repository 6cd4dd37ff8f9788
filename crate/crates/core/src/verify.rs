//! Invariance suites run against a single network.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::{random_orthogonal, Vector};
use crate::network::{Layer, Network};
use crate::primitives::equivariance_check;
use crate::reparam::{extract_pair, full_diagonalize, hidden_interfaces, sparsify_network};
use crate::rng::{gaussian_vector, seeded};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub value: f64,
    pub tolerance: f64,
    pub note: String,
}

impl Check {
    fn measured(name: &str, value: f64, tolerance: f64) -> Self {
        let status = if value <= tolerance { Status::Pass } else { Status::Fail };
        Self { name: name.into(), status, value, tolerance, note: String::new() }
    }

    fn skipped(name: &str, note: &str) -> Self {
        Self { name: name.into(), status: Status::Skipped, value: f64::NAN, tolerance: f64::NAN, note: note.into() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }
}

fn probes(dim: usize, count: usize, seed: u64) -> Vec<Vector> {
    let mut rng = seeded(seed, 0x9e7);
    (0..count).map(|_| gaussian_vector(&mut rng, dim, 1.0)).collect()
}

/// Relative deviation `max|a−b| / max(1, max|a|)` over paired outputs.
fn relative_deviation(a: &[Vector], b: &[Vector]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.max_abs_diff(y) / x.max_abs().max(1.0))
        .fold(0.0, f64::max)
}

pub fn equivariance_suite(net: &Network, seed: u64) -> Check {
    const NAME: &str = "equivariance";
    let blocks: Vec<(usize, &crate::IsoBlock)> = net
        .layers()
        .iter()
        .enumerate()
        .filter_map(|(i, l)| l.as_iso().map(|b| (i, b)))
        .collect();
    if blocks.is_empty() || !net.is_isotropic() {
        return Check::skipped(NAME, "network has elementwise activations; equivariance not applicable");
    }
    let widths = net.widths();
    let mut worst: f64 = 0.0;
    for (k, (i, b)) in blocks.iter().enumerate() {
        let dim = widths[i.div_ceil(2)];
        let mut rng = seeded(seed, 0xe9 + k as u64);
        for t in 0..20 {
            let r = random_orthogonal(dim, seed.wrapping_mul(31).wrapping_add((k * 100 + t) as u64));
            let x = gaussian_vector(&mut rng, dim, 1.0);
            worst = worst.max(equivariance_check(&x, &r, b));
        }
    }
    Check::measured(NAME, worst, 1e-10)
}

pub fn diagonalisation_suite(net: &Network, seed: u64) -> Result<Vec<Check>> {
    if !net.is_isotropic() {
        return Ok(vec![Check::skipped("partial_diagonalisation", "elementwise activations break the invariance")]);
    }
    let xs = probes(net.input_dim(), 50, seed);
    let reference: Vec<Vector> = xs.iter().map(|x| net.predict(x)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    let mut worst: f64 = 0.0;
    for h in 0..hidden_interfaces(net) {
        let Ok(pair) = extract_pair(net, h) else { continue };
        let mut copy = net.clone();
        crate::reparam::install_pair(&mut copy, h, &pair)?;
        let after: Vec<Vector> = xs.iter().map(|x| copy.predict(x)).collect::<Result<_>>()?;
        worst = worst.max(relative_deviation(&reference, &after));
    }
    out.push(Check::measured("partial_diagonalisation", worst, 1e-8));

    let layers = net.layers();
    if layers.iter().filter(|l| l.is_linear()).count() >= 3 {
        let (Some(a), Some(b), Some(c)) = (layers[0].as_affine(), layers[2].as_affine(), layers[4].as_affine()) else {
            out.push(Check::skipped("full_diagonalisation", "first three linear layers are not all dense"));
            return Ok(out);
        };
        let (a, m, c) = full_diagonalize(a, b, c)?;
        let mut new_layers = layers.to_vec();
        new_layers[0] = Layer::Affine(a);
        new_layers[2] = Layer::Diagonal(m);
        new_layers[4] = Layer::Affine(c);
        let copy = Network::new(new_layers)?;
        let after: Vec<Vector> = xs.iter().map(|x| copy.predict(x)).collect::<Result<_>>()?;
        out.push(Check::measured("full_diagonalisation", relative_deviation(&reference, &after), 1e-8));
    } else {
        out.push(Check::skipped("full_diagonalisation", "needs at least three linear layers"));
    }
    Ok(out)
}

/// Block Jacobians against central differences (h = 1e-5).
pub fn jacobian_suite(net: &Network, seed: u64) -> Result<Check> {
    const NAME: &str = "iso_jacobian";
    let xs = probes(net.input_dim(), 5, seed);
    let mut worst: f64 = 0.0;
    let mut any = false;
    for x in &xs {
        let (_, trace) = net.forward(x)?;
        for (i, l) in net.layers().iter().enumerate() {
            let Some(b) = l.as_iso() else { continue };
            any = true;
            let u = trace.inputs[i].scaled(trace.scales[i]);
            let j = b.jacobian(&u);
            let h = 1e-5;
            for col in 0..u.len() {
                let mut up = u.clone();
                let mut dn = u.clone();
                up[col] += h;
                dn[col] -= h;
                let fd = b.apply(&up).sub(&b.apply(&dn)).scaled(0.5 / h);
                for row in 0..u.len() {
                    worst = worst.max((fd[row] - j[(row, col)]).abs());
                }
            }
        }
    }
    if !any {
        return Ok(Check::skipped(NAME, "no isotropic blocks"));
    }
    Ok(Check::measured(NAME, worst, 1e-6))
}

pub fn sparsity_suite(net: &Network, seed: u64) -> Result<Check> {
    const NAME: &str = "sparsity_counts";
    if !net.is_isotropic() {
        return Ok(Check::skipped(NAME, "elementwise activations cannot be diagonalised"));
    }
    if net.layers().iter().any(|l| matches!(l, Layer::Diagonal(_))) {
        return Ok(Check::skipped(NAME, "network is already sparsified"));
    }
    let (sparse, report) = sparsify_network(net)?;
    let xs = probes(net.input_dim(), 50, seed);
    let a: Vec<Vector> = xs.iter().map(|x| net.predict(x)).collect::<Result<_>>()?;
    let b: Vec<Vector> = xs.iter().map(|x| sparse.predict(x)).collect::<Result<_>>()?;
    let mut c = Check::measured(NAME, relative_deviation(&a, &b), 1e-8);
    match report.matches_closed_form() {
        Some(false) => {
            c.status = Status::Fail;
            c.note = "parameter counts disagree with the closed form".into();
        }
        Some(true) => c.note = format!("S_p = {}/{}", report.params_sparsified, report.params_original),
        None => c.note = report.notice.unwrap_or_default(),
    }
    Ok(c)
}

pub fn verify_network(net: &Network, seed: u64) -> Result<VerifyReport> {
    let mut checks = vec![equivariance_suite(net, seed)];
    checks.extend(diagonalisation_suite(net, seed)?);
    checks.push(jacobian_suite(net, seed)?);
    checks.push(sparsity_suite(net, seed)?);
    Ok(VerifyReport { checks })
}
