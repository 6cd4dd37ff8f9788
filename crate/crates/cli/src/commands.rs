use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use isodyn::data::{load_cifar10, synthetic_gaussian, Dataset};
use isodyn::network::{load, save};
use isodyn::reparam::{gradient_divergence, sparsify_network};
use isodyn::rng::{gaussian_matrix, gaussian_vector, seeded};
use isodyn::train::{run_epochs, EpochMetrics, TrainSettings};
use isodyn::verify::{verify_network, Status};
use isodyn::{AdaptationPlan, AdamState, Network, Optimizer, Sgd, SurgeryRecord, Vector};
use serde::Serialize;

use crate::args::{
    AdaptArgs, DataArgs, DivergenceArgs, InitArgs, ModelArgs, OptimArgs, OptimizerArg, PlanArgs, SparsifyArgs,
    TrainArgs, VerifyArgs, Widths,
};

const CHECKPOINT: &str = "checkpoint.json";
const HIDDEN_DEFAULT: usize = 16;

/// Everything needed to reproduce a run; written as `config.json`.
#[derive(Serialize)]
struct RunConfig<'a> {
    command: &'a str,
    widths: Vec<usize>,
    model: &'a ModelArgs,
    #[serde(skip_serializing_if = "Option::is_none")]
    optim: Option<&'a OptimArgs>,
    #[serde(skip_serializing_if = "Option::is_none")]
    data: Option<&'a DataArgs>,
    #[serde(skip_serializing_if = "Option::is_none")]
    plan: Option<&'a PlanArgs>,
    #[serde(skip_serializing_if = "Option::is_none")]
    checkpoint: Option<&'a Path>,
    pretrain_epochs: usize,
    epochs: usize,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s).with_context(|| format!("writing {}", path.display()))
}

fn create_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

fn load_data(args: &DataArgs, seed: u64) -> Result<(Dataset, Dataset)> {
    if let Some(n) = args.synthetic {
        ensure!(n >= 2, "--synthetic needs at least two samples");
        let all = synthetic_gaussian(n, args.synthetic_dim, args.synthetic_classes, seed)?;
        let train_n = (n * 4 / 5).max(1);
        return Ok(all.split(train_n));
    }
    let Some(dir) = &args.data_dir else {
        bail!("no dataset: pass --data-dir (or set ISODYN_DATA_DIR) or --synthetic <samples>");
    };
    let (train_n, test_n) = match args.subset {
        Some(s) => (Some(s.train), Some(s.test.unwrap_or((s.train / 5).max(1)))),
        None => (None, None),
    };
    let (train, test, _) = load_cifar10(dir, train_n, test_n, seed)?;
    Ok((train, test))
}

fn resolve_widths(model: &ModelArgs, data: &Dataset) -> Result<Vec<usize>> {
    let w = model
        .arch
        .clone()
        .map(|w| w.0)
        .unwrap_or_else(|| vec![data.feature_dim, HIDDEN_DEFAULT, data.n_classes]);
    ensure!(
        w[0] == data.feature_dim,
        "--arch input width {} does not match the dataset's {} features",
        w[0],
        data.feature_dim
    );
    ensure!(
        *w.last().unwrap() == data.n_classes,
        "--arch output width {} does not match the dataset's {} classes",
        w.last().unwrap(),
        data.n_classes
    );
    Ok(w)
}

fn optimizer(args: &OptimArgs) -> Box<dyn Optimizer> {
    match args.optimizer {
        OptimizerArg::Adam => Box::new(AdamState::new(args.lr)),
        OptimizerArg::Sgd => Box::new(Sgd { lr: args.lr }),
    }
}

fn write_metrics(path: &Path, rows: &[EpochMetrics]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_surgeries(path: &Path, records: &[SurgeryRecord]) -> Result<()> {
    let mut f = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
    for r in records {
        serde_json::to_writer(&mut f, r)?;
        f.write_all(b"\n")?;
    }
    Ok(())
}

fn summary(rows: &[EpochMetrics]) {
    if let Some(last) = rows.last() {
        println!(
            "epoch {}: train loss {:.4}, train acc {:.4}, test acc {:.4}, widths {}",
            last.epoch, last.train_loss, last.train_acc, last.test_acc, last.widths
        );
    }
}

pub fn init(a: InitArgs) -> Result<bool> {
    let Some(Widths(widths)) = a.model.arch.clone() else {
        bail!("--arch is required for init");
    };
    let net = Network::mlp(&widths, a.model.activation.into(), a.model.seed)?;
    create_out(&a.out)?;
    let cfg = RunConfig {
        command: "init",
        widths,
        model: &a.model,
        optim: None,
        data: None,
        plan: None,
        checkpoint: None,
        pretrain_epochs: 0,
        epochs: 0,
    };
    write_json(&a.out.join("config.json"), &cfg)?;
    save(&net, &a.out.join(CHECKPOINT))?;
    println!("wrote {}", a.out.join(CHECKPOINT).display());
    Ok(true)
}

pub fn train(a: TrainArgs) -> Result<bool> {
    let (train, test) = load_data(&a.data, a.model.seed)?;
    let widths = resolve_widths(&a.model, &train)?;
    let mut net = Network::mlp(&widths, a.model.activation.into(), a.model.seed)?;
    create_out(&a.out)?;
    let cfg = RunConfig {
        command: "train",
        widths,
        model: &a.model,
        optim: Some(&a.optim),
        data: Some(&a.data),
        plan: None,
        checkpoint: None,
        pretrain_epochs: 0,
        epochs: a.epochs,
    };
    write_json(&a.out.join("config.json"), &cfg)?;
    let settings = TrainSettings { batch_size: a.optim.batch_size, seed: a.model.seed, ..TrainSettings::default() };
    let mut opt = optimizer(&a.optim);
    let rows = run_epochs(&mut net, opt.as_mut(), &train, &test, &settings, a.epochs, 0, "train", None, |_| {})?;
    write_metrics(&a.out.join("metrics.csv"), &rows)?;
    save(&net, &a.out.join(CHECKPOINT))?;
    summary(&rows);
    Ok(true)
}

pub fn adapt(a: AdaptArgs) -> Result<bool> {
    let (train, test) = load_data(&a.data, a.model.seed)?;
    let mut net = match &a.checkpoint {
        Some(p) => load(p).with_context(|| format!("loading {}", p.display()))?,
        None => Network::mlp(&resolve_widths(&a.model, &train)?, a.model.activation.into(), a.model.seed)?,
    };
    ensure!(
        net.input_dim() == train.feature_dim && net.output_dim() == train.n_classes,
        "network {:?} does not fit the dataset ({} features, {} classes)",
        net.widths(),
        train.feature_dim,
        train.n_classes
    );
    let plan = AdaptationPlan {
        scaffold_target: a.plan.xi,
        sv_threshold: a.plan.theta,
        cadence: a.plan.cadence,
        growth_policy: a.plan.growth_policy,
        b_star: a.plan.b_star,
        schedule: a.plan.schedule,
        use_pinv: a.plan.pinv,
    };
    plan.validate().context("invalid adaptation plan")?;

    create_out(&a.out)?;
    let cfg = RunConfig {
        command: "adapt",
        widths: net.widths(),
        model: &a.model,
        optim: Some(&a.optim),
        data: Some(&a.data),
        plan: Some(&a.plan),
        checkpoint: a.checkpoint.as_deref(),
        pretrain_epochs: a.pretrain_epochs,
        epochs: a.epochs,
    };
    write_json(&a.out.join("config.json"), &cfg)?;

    let settings = TrainSettings { batch_size: a.optim.batch_size, seed: a.model.seed, ..TrainSettings::default() };
    let mut opt = optimizer(&a.optim);
    let mut rows =
        run_epochs(&mut net, opt.as_mut(), &train, &test, &settings, a.pretrain_epochs, 0, "pretrain", None, |_| {})?;
    let mut records = Vec::new();
    let first = rows.len();
    rows.extend(run_epochs(
        &mut net,
        opt.as_mut(),
        &train,
        &test,
        &settings,
        a.epochs,
        first,
        "adapt",
        Some(&plan),
        |r| records.push(r.clone()),
    )?);
    write_metrics(&a.out.join("metrics.csv"), &rows)?;
    write_surgeries(&a.out.join("surgery.jsonl"), &records)?;
    save(&net, &a.out.join(CHECKPOINT))?;
    let grows = records.iter().filter(|r| r.kind == isodyn::SurgeryKind::Grow).count();
    println!("{grows} grow and {} prune events", records.len() - grows);
    summary(&rows);
    Ok(true)
}

pub fn verify(a: VerifyArgs) -> Result<bool> {
    let net = match load(&a.checkpoint) {
        Ok(n) => n,
        Err(e) => {
            println!("FAIL load: {e}");
            return Ok(false);
        }
    };
    println!("PASS load: widths {:?}", net.widths());
    let report = verify_network(&net, a.seed)?;
    for c in &report.checks {
        match c.status {
            Status::Skipped => println!("SKIP {}: {}", c.name, c.note),
            s => {
                let tag = if s == Status::Pass { "PASS" } else { "FAIL" };
                let note = if c.note.is_empty() { String::new() } else { format!(" ({})", c.note) };
                println!("{tag} {}: {:.3e} <= {:.0e}{note}", c.name, c.value, c.tolerance);
            }
        }
    }
    Ok(report.passed())
}

fn probe_deviation(a: &Network, b: &Network, seed: u64) -> Result<f64> {
    let mut rng = seeded(seed, 0x5a);
    let mut worst: f64 = 0.0;
    for _ in 0..64 {
        let x = gaussian_vector(&mut rng, a.input_dim(), 1.0);
        let ya = a.predict(&x)?;
        worst = worst.max(ya.max_abs_diff(&b.predict(&x)?) / ya.max_abs().max(1.0));
    }
    Ok(worst)
}

#[derive(Serialize)]
struct SparsifyOutput<'a> {
    source: &'a Path,
    #[serde(flatten)]
    report: &'a isodyn::SparsityReport,
    probe_deviation: f64,
}

pub fn sparsify(a: SparsifyArgs) -> Result<bool> {
    let net = load(&a.checkpoint).with_context(|| format!("loading {}", a.checkpoint.display()))?;
    let (sparse, report) = sparsify_network(&net)?;
    let dev = probe_deviation(&net, &sparse, a.seed)?;
    ensure!(dev <= 1e-8, "sparsified network deviates from the original by {dev:e} on probes");
    create_out(&a.out)?;
    save(&sparse, &a.out.join(CHECKPOINT))?;
    write_json(&a.out.join("sparsity.json"), &SparsifyOutput { source: &a.checkpoint, report: &report, probe_deviation: dev })?;
    println!(
        "parameters {} -> {}, S_p = {:.6}, probe deviation {dev:.2e}",
        report.params_original, report.params_sparsified, report.s_p
    );
    match report.matches_closed_form() {
        Some(true) => println!("counts match the closed form"),
        Some(false) => {
            println!("counts disagree with the closed form {:?}", report.closed_form);
            return Ok(false);
        }
        None => println!("{}", report.notice.as_deref().unwrap_or_default()),
    }
    Ok(true)
}

#[derive(Serialize)]
struct DivergenceRow {
    instance: usize,
    eta: f64,
    component: usize,
    simulated: f64,
    analytic: f64,
    abs_diff: f64,
}

pub fn divergence(a: DivergenceArgs) -> Result<bool> {
    let [m, k, n] = a.dims.0[..] else {
        bail!("--dims takes exactly three widths M,K,N");
    };
    ensure!(a.etas.iter().all(|e| e.is_finite() && *e >= 0.0), "--etas must be finite and non-negative");
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_out(parent)?;
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(&a.out)
        .with_context(|| format!("writing {}", a.out.display()))?;
    let mut worst: f64 = 0.0;
    for inst in 0..a.instances {
        let mut rng = seeded(a.seed, inst as u64);
        let am = gaussian_matrix(&mut rng, m, k, 1.0);
        let bm = gaussian_matrix(&mut rng, k, n, 1.0);
        let x: Vector = gaussian_vector(&mut rng, n, 1.0);
        let g: Vector = gaussian_vector(&mut rng, m, 1.0);
        let wm = am.matmul(&bm);
        for &eta in &a.etas {
            let d = gradient_divergence(&wm, &am, &bm, &x, &g, eta)?;
            for (c, (s, an)) in d.simulated.iter().zip(d.analytic.iter()).enumerate() {
                worst = worst.max((s - an).abs());
                w.serialize(DivergenceRow { instance: inst, eta, component: c, simulated: *s + 0.0, analytic: *an + 0.0, abs_diff: (s - an).abs() })?;
            }
        }
    }
    w.flush()?;
    println!("max |simulated - analytic| = {worst:.3e}");
    Ok(true)
}
