//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

mod common;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use common::{backprop_fd_error, householder_orthogonal, outputs, probes, random_iso_net, relative_deviation};
use isodyn::data::missing_cifar_files;
use isodyn::dyntopo::{grow_one, prune_one};
use isodyn::experiment::{run_desk_scale, DeskConfig, RunOutcome};
use isodyn::network::{Gradients, Loss, SoftmaxCrossEntropy};
use isodyn::reparam::{
    coupling_by_backprop, extract_pair, gradient_divergence, hidden_interfaces, install_pair, nested_expand_eval,
    scaffold_coupling_probe, shell_collapse_check, sparsify_network, sparsity_factor, DiagonalizedPair,
};
use isodyn::rng::{gaussian_matrix, gaussian_vector, seeded};
use isodyn::{
    Activation, AdaptationPlan, AdamState, GrowthPolicy, IsoBlock, Matrix, Network, Optimizer,
    RadialProfile, Vector,
};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, budget_s: f64) -> (bool, String) {
    let s = elapsed.as_secs_f64();
    (s < budget_s, format!("{s:.2}s < {budget_s}s"))
}

fn equivariance() -> Outcome {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    let mut pairs = 0;
    for (di, &n) in [2usize, 8, 32, 64].iter().enumerate() {
        let blocks = [
            IsoBlock::plain(RadialProfile::IsoTanh),
            IsoBlock::new(RadialProfile::IsoTanh).with_intrinsic_length(0.37),
        ];
        for k in 0..250 {
            let seed = (di * 1000 + k) as u64;
            let r = householder_orthogonal(n, seed);
            let mut rng = seeded(seed, 11);
            let scale = 10f64.powf(rng.random_range(-3.0..1.5));
            let x = gaussian_vector(&mut rng, n, scale);
            let rx = r.matvec(&x);
            for b in &blocks {
                worst = worst.max(b.apply(&rx).max_abs_diff(&r.matvec(&b.apply(&x))));
            }
            pairs += 1;
        }
    }
    let (fast, time) = within(t.elapsed(), 5.0);
    outcome(worst <= 1e-10 && fast, format!("{pairs} pairs, max deviation {worst:.2e} <= 1e-10, {time}"))
}

fn random_widths(rng: &mut impl Rng, affine: usize) -> Vec<usize> {
    (0..=affine).map(|_| rng.random_range(4..=32)).collect()
}

fn reparam_invariance() -> Outcome {
    let t = Instant::now();
    let mut rng = seeded(2, 0);
    let (mut partial, mut full): (f64, f64) = (0.0, 0.0);
    for net_seed in 0..50u64 {
        let depth = rng.random_range(3..=7);
        let widths = random_widths(&mut rng, depth);
        let net = random_iso_net(&widths, net_seed, net_seed % 2 == 1);
        let xs = probes(widths[0], 200, net_seed, 1.0);
        let reference = outputs(&net, &xs);

        let mut p = net.clone();
        for h in 0..hidden_interfaces(&p) {
            let pair = extract_pair(&p, h).unwrap();
            install_pair(&mut p, h, &pair).unwrap();
        }
        partial = partial.max(relative_deviation(&reference, &outputs(&p, &xs)));

        let (f, _) = sparsify_network(&net).unwrap();
        full = full.max(relative_deviation(&reference, &outputs(&f, &xs)));
    }
    let (fast, time) = within(t.elapsed(), 30.0);
    outcome(
        partial <= 1e-8 && full <= 1e-8 && fast,
        format!("50 nets x 200 probes, partial {partial:.2e}, full {full:.2e} <= 1e-8 relative, {time}"),
    )
}

/// `(2DN + N(D+1)(N+1), N(2D+1)(N+1))` evaluated in u128.
fn closed_form(d: u128, n: u128) -> (u128, u128) {
    (2 * d * n + n * (d + 1) * (n + 1), n * (2 * d + 1) * (n + 1))
}

fn sparsity() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    let mut worst_fn: f64 = 0.0;
    for (d, n) in [(1usize, 1usize), (3, 64), (10, 128)] {
        let widths = vec![n; 2 * d + 2];
        let net = random_iso_net(&widths, (d * 1000 + n) as u64, false);
        let (sparse, report) = sparsify_network(&net).unwrap();
        let want = closed_form(d as u128, n as u128);
        let got = (u128::from(report.params_sparsified), u128::from(report.params_original));
        ok &= got == want;
        let xs = probes(n, 50, 5, 1.0);
        worst_fn = worst_fn.max(relative_deviation(&outputs(&net, &xs), &outputs(&sparse, &xs)));
        notes.push(format!("({d},{n}) {}/{}", got.0, got.1));
    }
    let s364 = closed_form(3, 64);
    ok &= s364 == (17024, 29120);
    let big = sparsity_factor(200, 10_000);
    ok &= (big - 0.5).abs() <= 0.003;
    ok &= worst_fn <= 1e-8;
    outcome(
        ok,
        format!("counts {} exact; S_p(200,10000) = {big:.5}; function deviation {worst_fn:.2e} <= 1e-8", notes.join(", ")),
    )
}

fn base_pair(seed: u64, normalized: bool) -> (DiagonalizedPair, Vec<Vector>) {
    let net = random_iso_net(&[9, 6, 5], seed, normalized);
    let pair = extract_pair(&net, 0).unwrap();
    let xs = probes(9, 200, seed, 1.0);
    (pair, xs)
}

fn pair_deviation(a: &DiagonalizedPair, b: &DiagonalizedPair, xs: &[Vector]) -> f64 {
    xs.iter().map(|x| a.forward(x).max_abs_diff(&b.forward(x))).fold(0.0, f64::max)
}

fn neurogenesis() -> Outcome {
    let mut exact: f64 = 0.0;
    for seed in 0..10 {
        let (pair, xs) = base_pair(seed, seed % 2 == 0);
        for p in [GrowthPolicy::ZeroColumn, GrowthPolicy::SemiOrthogonal, GrowthPolicy::CloneColumn] {
            let plan = AdaptationPlan { growth_policy: p, ..AdaptationPlan::default() };
            let (grown, _) = grow_one(&pair, &plan, &xs).unwrap();
            exact = exact.max(pair_deviation(&pair, &grown, &xs));
        }
    }
    let (mut o_err, mut norm_err): (f64, f64) = (0.0, 0.0);
    for seed in 0..10 {
        let (mut pair, xs) = base_pair(100 + seed, false);
        pair.block.set_o(0.8).unwrap();
        for b_star in [0.3, -0.6, 0.85] {
            let plan = AdaptationPlan { b_star, ..AdaptationPlan::default() };
            let (grown, rec) = grow_one(&pair, &plan, &xs).unwrap();
            o_err = o_err.max((grown.block.o() - (pair.block.o() - b_star * b_star)).abs());
            o_err = o_err.max((rec.o_after - (rec.o_before - b_star * b_star)).abs());
            for x in &xs {
                let before = pair.pre_activation(x).norm_sq() + pair.block.o();
                let after = grown.pre_activation(x).norm_sq() + grown.block.o();
                norm_err = norm_err.max((before - after).abs());
            }
        }
    }
    outcome(
        exact <= 1e-12 && o_err <= 1e-14 && norm_err <= 1e-12,
        format!("b*=0 deviation {exact:.2e} <= 1e-12; o' error {o_err:.2e} <= 1e-14; norm term {norm_err:.2e} <= 1e-12"),
    )
}

fn neurodegeneration() -> Outcome {
    let mut zero_dev: f64 = 0.0;
    let mut monotone = true;
    let mut bounded = true;
    let mut worst_ratio: f64 = 0.0;
    for seed in 0..10 {
        let (mut pair, xs) = base_pair(200 + seed, true);
        let j = pair.smallest().unwrap();
        pair.b1[j] = 0.0;
        let input_scale = xs.iter().map(Vector::norm).fold(0.0, f64::max);

        pair.sigma[j] = 0.0;
        let (pruned, _) = prune_one(&pair, &xs, false).unwrap();
        zero_dev = zero_dev.max(pair_deviation(&pair, &pruned, &xs));

        let mut last = f64::INFINITY;
        for s in [1e-3, 1e-4, 1e-5, 1e-6] {
            pair.sigma[j] = s;
            let (pruned, rec) = prune_one(&pair, &xs, false).unwrap();
            assert_eq!(rec.neuron_index, j);
            let dev = pair_deviation(&pair, &pruned, &xs);
            monotone &= dev <= last;
            last = dev;
            let bound = 10.0 * s * input_scale;
            bounded &= dev <= bound;
            worst_ratio = worst_ratio.max(dev / bound);
        }
    }
    outcome(
        zero_dev <= 1e-12 && monotone && bounded,
        format!(
            "zero row {zero_dev:.2e} <= 1e-12; sweep monotone {monotone}; max deviation / (10 sigma |x|) = {worst_ratio:.3} <= 1"
        ),
    )
}

fn jacobians() -> Outcome {
    let t = Instant::now();
    let mut jac: f64 = 0.0;
    for k in 0..200u64 {
        let mut rng = seeded(k, 21);
        let n = rng.random_range(1..=12);
        let block = if k % 2 == 0 {
            IsoBlock::new(RadialProfile::IsoTanh).with_intrinsic_length(rng.random_range(1e-3..2.0))
        } else {
            IsoBlock::plain(RadialProfile::IsoTanh)
        };
        let scale = rng.random_range(0.05..3.0);
        let x = gaussian_vector(&mut rng, n, scale);
        let j = block.jacobian(&x);
        let h = 1e-5;
        for c in 0..n {
            let mut up = x.clone();
            let mut dn = x.clone();
            up[c] += h;
            dn[c] -= h;
            let fd = block.apply(&up).sub(&block.apply(&dn)).scaled(0.5 / h);
            for r in 0..n {
                jac = jac.max((fd[r] - j[(r, c)]).abs());
            }
        }
    }
    let mut bp: f64 = 0.0;
    let mut rng = seeded(6, 0);
    for seed in 0..50u64 {
        let depth = rng.random_range(2..=4);
        let widths: Vec<usize> = (0..=depth).map(|_| rng.random_range(2..=6)).collect();
        let net = random_iso_net(&widths, seed, seed % 2 == 0);
        let x = gaussian_vector(&mut seeded(seed, 22), widths[0], 1.0);
        let target = gaussian_vector(&mut seeded(seed, 23), *widths.last().unwrap(), 1.0);
        bp = bp.max(backprop_fd_error(&net, &x, &target, 1e-6));
    }
    let (fast, time) = within(t.elapsed(), 60.0);
    outcome(
        jac <= 1e-6 && bp <= 1e-5 && fast,
        format!("jacobian {jac:.2e} <= 1e-6 (200 points); backprop {bp:.2e} <= 1e-5 relative (50 nets); {time}"),
    )
}

fn nested_expansion() -> Outcome {
    let mut expand: f64 = 0.0;
    let mut shell: f64 = 0.0;
    let mut plain = f64::INFINITY;
    for seed in 0..6u64 {
        let blocks = 3 + (seed as usize % 2);
        let widths: Vec<usize> = (0..=blocks).map(|k| 3 + (k + seed as usize) % 4).collect();
        let net = random_iso_net(&widths, seed, seed % 3 == 0);
        for x in probes(widths[0], 50, seed, 1.0) {
            let y = net.predict(&x).unwrap();
            expand = expand.max(nested_expand_eval(&net, &x).unwrap().max_abs_diff(&y) / y.max_abs().max(1.0));
        }
        shell = shell.max(shell_collapse_check(&net, Some(1.0), 64, seed).unwrap());
        plain = plain.min(shell_collapse_check(&net, None, 64, seed).unwrap());
    }
    outcome(
        expand <= 1e-10 && shell <= 1e-8 && plain > 1e-2,
        format!("expansion {expand:.2e} <= 1e-10; shell residual {shell:.2e} <= 1e-8; without shell min {plain:.2e} > 1e-2"),
    )
}

/// One plain gradient step on `W` and on `(A, B)` for `y = W x`, by explicit loops.
fn simulated_divergence(a: &Matrix, b: &Matrix, x: &[f64], g: &[f64], eta: f64) -> Vector {
    let (m, k, n) = (a.rows(), a.cols(), b.cols());
    let mut w = Matrix::zeros(m, n);
    let mut bx = vec![0.0; k];
    let mut atg = vec![0.0; k];
    for i in 0..m {
        for j in 0..n {
            for l in 0..k {
                w[(i, j)] += a[(i, l)] * b[(l, j)];
            }
        }
    }
    for l in 0..k {
        for j in 0..n {
            bx[l] += b[(l, j)] * x[j];
        }
        for i in 0..m {
            atg[l] += a[(i, l)] * g[i];
        }
    }
    let mut w1 = w.clone();
    let mut a1 = a.clone();
    let mut b1 = b.clone();
    for i in 0..m {
        for j in 0..n {
            w1[(i, j)] -= eta * g[i] * x[j];
        }
        for l in 0..k {
            a1[(i, l)] -= eta * g[i] * bx[l];
        }
    }
    for l in 0..k {
        for j in 0..n {
            b1[(l, j)] -= eta * atg[l] * x[j];
        }
    }
    let direct = w1.matvec(x);
    let factored = a1.matvec(&b1.matvec(x));
    direct.sub(&factored)
}

fn adam_step_outputs(net: &Network, xs: &[Vector], labels: &[usize], probes: &[Vector]) -> Vec<Vector> {
    let mut net = net.clone();
    let mut grads = Gradients::zeros_like(&net);
    for (x, &y) in xs.iter().zip(labels) {
        let (out, trace) = net.forward(x).unwrap();
        let (_, d) = SoftmaxCrossEntropy.eval(&out, &y);
        net.backward_into(&trace, &d, &mut grads).unwrap();
    }
    grads.scale(1.0 / xs.len() as f64);
    let mut opt = AdamState::new(1e-2);
    opt.step(&mut net, &grads).unwrap();
    outputs(&net, probes)
}

fn gradient_coupling() -> Outcome {
    let mut div: f64 = 0.0;
    for seed in 0..100u64 {
        let mut rng = seeded(seed, 31);
        let (m, k, n) = (rng.random_range(1..=6), rng.random_range(1..=6), rng.random_range(1..=6));
        let a = gaussian_matrix(&mut rng, m, k, 1.0);
        let b = gaussian_matrix(&mut rng, k, n, 1.0);
        let x = gaussian_vector(&mut rng, n, 1.0);
        let g = gaussian_vector(&mut rng, m, 1.0);
        let eta = rng.random_range(1e-3..0.3);
        let d = gradient_divergence(&a.matmul(&b), &a, &b, &x, &g, eta).unwrap();
        let sim = simulated_divergence(&a, &b, &x, &g, eta);
        div = div.max(sim.max_abs_diff(&d.analytic) / sim.max_abs().max(1.0));
    }

    let (mut fwd, mut grad_gap, mut formula): (f64, f64, f64) = (0.0, f64::INFINITY, 0.0);
    for seed in 0..10u64 {
        let (pair, xs) = base_pair(300 + seed, seed % 2 == 0);
        let grown = |p| {
            grow_one(&pair, &AdaptationPlan { growth_policy: p, ..AdaptationPlan::default() }, &xs).unwrap().0
        };
        let zero = grown(GrowthPolicy::ZeroColumn);
        let semi = grown(GrowthPolicy::SemiOrthogonal);
        let j = pair.width();
        fwd = fwd.max(pair_deviation(&zero, &semi, &xs));
        for x in xs.iter().take(20) {
            let cz = scaffold_coupling_probe(&zero, j, x).unwrap();
            let cs = scaffold_coupling_probe(&semi, j, x).unwrap();
            grad_gap = grad_gap.min(cz.max_abs_diff(&cs));
            formula = formula.max(cs.max_abs_diff(&coupling_by_backprop(&semi, j, x).unwrap()));
            formula = formula.max(cz.max_abs_diff(&coupling_by_backprop(&zero, j, x).unwrap()));
        }
    }

    let mut adam: f64 = f64::INFINITY;
    for seed in 0..5u64 {
        let net = random_iso_net(&[5, 7, 6, 3], 400 + seed, false);
        let mut diag = net.clone();
        for h in 0..hidden_interfaces(&diag) {
            let pair = extract_pair(&diag, h).unwrap();
            install_pair(&mut diag, h, &pair).unwrap();
        }
        let xs = probes(5, 8, seed, 1.0);
        let labels: Vec<usize> = (0..8).map(|i| i % 3).collect();
        let test = probes(5, 32, seed + 99, 1.0);
        let a = adam_step_outputs(&net, &xs, &labels, &test);
        let b = adam_step_outputs(&diag, &xs, &labels, &test);
        adam = adam.min(relative_deviation(&a, &b));
    }
    outcome(
        div <= 1e-10 && fwd <= 1e-12 && grad_gap > 1e-6 && adam > 1e-8,
        format!(
            "divergence {div:.2e} <= 1e-10 (100 instances); zero vs semi-orthogonal forward {fwd:.2e} <= 1e-12, \
             gradient gap min {grad_gap:.2e} > 1e-6 (formula vs backprop {formula:.2e}); \
             Adam one-step divergence min {adam:.2e} > 1e-8"
        ),
    )
}

fn data_dir() -> Option<PathBuf> {
    std::env::var_os("ISODYN_DATA_DIR").map(PathBuf::from)
}

fn pp(x: f64) -> String {
    format!("{:.1}%", 100.0 * x)
}

fn desk_scale() -> Outcome {
    let Some(dir) = data_dir() else {
        return outcome(false, "CIFAR-10 not found: set ISODYN_DATA_DIR to the binary batch directory".into());
    };
    let missing = missing_cifar_files(&dir);
    if !missing.is_empty() {
        return outcome(false, format!("CIFAR-10 not found: {} file(s) missing in {}", missing.len(), dir.display()));
    }
    let t = Instant::now();
    let cfg = DeskConfig::default();
    let runs = match run_desk_scale(&cfg, &dir) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("run failed: {e}")),
    };
    let iso: Vec<&RunOutcome> = runs.iter().filter(|r| r.activation == Activation::IsoTanh).collect();
    let aniso: Vec<&RunOutcome> = runs.iter().filter(|r| r.activation == Activation::AnisoTanh).collect();

    let pre: Vec<f64> = iso.iter().map(|r| r.final_acc("pretrain").unwrap_or(0.0)).collect();
    let a = pre.iter().all(|&acc| acc >= 0.20);
    let grow_drop = iso.iter().map(|r| r.worst_surgery_drop_pp("grow")).fold(0.0, f64::max);
    let prune_drop = iso.iter().map(|r| r.worst_surgery_drop_pp("prune")).fold(0.0, f64::max);
    let b = grow_drop <= 1.0;
    let c = prune_drop <= 2.0;

    let declines = iso
        .iter()
        .filter(|r| r.final_acc("degenerate").unwrap_or(0.0) < r.final_acc("prune").unwrap_or(0.0))
        .count();
    let iso_wins = iso
        .iter()
        .zip(&aniso)
        .filter(|(i, a)| i.final_acc("pretrain") > a.final_acc("pretrain"))
        .count();
    let (fast, time) = within(t.elapsed(), 1800.0);
    outcome(
        a && b && c && fast,
        format!(
            "(a) pretrain acc {} >= 20%; (b) grow drop {grow_drop:.2}pp <= 1.0; (c) prune drop {prune_drop:.2}pp <= 2.0; \
             (d) degenerate-to-8 declines in {declines}/{n}, iso beats aniso in {iso_wins}/{n} (reported); {time}",
            pre.iter().map(|&x| pp(x)).collect::<Vec<_>>().join("/"),
            n = iso.len(),
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 equivariance", equivariance),
        ("2 reparameterisation invariance", reparam_invariance),
        ("3 sparsity accounting", sparsity),
        ("4 neurogenesis exactness", neurogenesis),
        ("5 neurodegeneration bound", neurodegeneration),
        ("6 jacobian and backprop", jacobians),
        ("7 nested expansion and shell collapse", nested_expansion),
        ("8 gradient coupling", gradient_coupling),
        ("9 desk-scale CIFAR-10 protocol", desk_scale),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {}/{} passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
