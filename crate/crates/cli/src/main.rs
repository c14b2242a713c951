use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use segprior::bench::{generate, run_bench, BenchPlan, Family, LossOptions, SyntheticSpec};
use segprior::grid::{read_pgm_file, read_psg_file, write_pgm_file, write_psg_file};
use segprior::losses::{ClassTarget, LossConfig, ScheduleState, SizeBounds};
use segprior::metrics::MetricRecord;
use segprior::refiner::{refine, LogitField, RefineConfig};
use segprior::transforms::{edt, signed_distance, Connectivity};
use segprior::{Execution, GridDomain};

#[derive(Parser)]
#[command(
    name = "segprior",
    version,
    about = "Prior-based segmentation losses on synthetic data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic dataset as PGM masks and PSG1 logit files.
    Generate(GenerateArgs),
    /// Optimize one logit field against its ground truth.
    Refine(RefineArgs),
    /// Run a benchmark plan and write the report tables.
    Bench(BenchArgs),
    /// Dice, Hausdorff distance and component error of mask pairs.
    Score(ScoreArgs),
    /// Dump the distance transform of a mask as CSV.
    Edt(EdtArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value = "blob")]
    family: Family,
    #[arg(long, default_value_t = 10)]
    items: usize,
    #[arg(long, default_value_t = 64)]
    height: usize,
    #[arg(long, default_value_t = 64)]
    width: usize,
    /// Instance range, `lo..hi`.
    #[arg(long)]
    instances: Option<String>,
    /// Size range in percent of pixels, `lo..hi`.
    #[arg(long)]
    size_pct: Option<String>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RefineArgs {
    /// PSG1 logit file; one channel for a single class, background first otherwise.
    #[arg(long)]
    logits: PathBuf,
    /// Ground-truth PGM masks, one per foreground class.
    #[arg(long, required = true, num_args = 1..)]
    truth: Vec<PathBuf>,
    #[arg(long, default_value = "dice")]
    loss: String,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 1)]
    steps: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 20)]
    patience: usize,
    #[arg(long, default_value_t = 0.99)]
    lambda_cap: f64,
    #[arg(long, default_value_t = segprior::transforms::DEFAULT_SKELETON_ITERATIONS)]
    skeleton_iters: usize,
    /// Size band as a fraction around the true size.
    #[arg(long, default_value_t = 0.1)]
    size_margin: f64,
    /// Boundary loss without division by the pixel count.
    #[arg(long)]
    raw_boundary: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Plan file; defaults apply to every key it omits.
    plan: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    runs: Option<usize>,
    /// Seed of the Monte-Carlo splits.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated loss configurations.
    #[arg(long, value_delimiter = ',')]
    loss: Option<Vec<String>>,
    #[arg(long)]
    lambda_cap: Option<f64>,
    #[arg(long)]
    skeleton_iters: Option<usize>,
    #[arg(long)]
    hd_percentile: Option<f64>,
    #[arg(long)]
    connectivity: Option<Connectivity>,
    /// Evaluate items one at a time.
    #[arg(long)]
    sequential: bool,
}

#[derive(Args)]
struct ScoreArgs {
    /// Alternating prediction and truth PGM files.
    #[arg(required = true, num_args = 2..)]
    masks: Vec<PathBuf>,
    #[arg(long, default_value_t = 95.0)]
    hd_percentile: f64,
    #[arg(long, default_value = "8")]
    connectivity: Connectivity,
}

#[derive(Args)]
struct EdtArgs {
    mask: PathBuf,
    /// Signed distance instead of the distance to the foreground.
    #[arg(long)]
    signed: bool,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Generate(a) => cmd_generate(a),
        Command::Refine(a) => cmd_refine(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Score(a) => cmd_score(a),
        Command::Edt(a) => cmd_edt(a),
    }
}

fn parse_range<T: std::str::FromStr>(s: &str) -> Result<(T, T)> {
    let (lo, hi) = s.split_once("..").context("expected `lo..hi`")?;
    let p = |v: &str| {
        v.trim()
            .parse::<T>()
            .ok()
            .with_context(|| format!("bad range bound {v:?}"))
    };
    Ok((p(lo)?, p(hi)?))
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    let mut spec = SyntheticSpec::new(a.family, GridDomain::new(a.height, a.width)?);
    spec.seed = a.seed;
    if let Some(r) = &a.instances {
        spec.instances = parse_range(r)?;
    }
    if let Some(r) = &a.size_pct {
        spec.size_pct = parse_range(r)?;
    }
    if let Some(n) = a.noise {
        spec.noise = n;
    }
    let items = generate(&spec, a.items)?;
    fs::create_dir_all(&a.out)?;
    let mut manifest = String::from("item,class,size,lower,upper\n");
    for item in &items {
        let layers = item.logits.layers();
        let refs: Vec<_> = layers.iter().collect();
        write_psg_file(a.out.join(format!("item{:04}_logits.psg", item.id)), &refs)?;
        for (c, (m, b)) in item.truth.iter().zip(&item.bounds).enumerate() {
            write_pgm_file(a.out.join(format!("item{:04}_truth{c}.pgm", item.id)), m)?;
            manifest.push_str(&format!(
                "{},{c},{},{:.3},{:.3}\n",
                item.id,
                m.count(),
                b.lower(),
                b.upper()
            ));
        }
    }
    fs::write(a.out.join("manifest.csv"), manifest)?;
    println!("wrote {} items to {}", items.len(), a.out.display());
    Ok(())
}

fn cmd_refine(a: RefineArgs) -> Result<()> {
    let stack =
        read_psg_file(&a.logits).with_context(|| format!("reading {}", a.logits.display()))?;
    let logits = LogitField::from_layers(stack.layers())?;
    let masks = a
        .truth
        .iter()
        .map(|p| read_pgm_file(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let targets = masks
        .into_iter()
        .map(|m| {
            let b = SizeBounds::around(m.count() as f64, a.size_margin)?;
            Ok(ClassTarget::new(m, Some(b)))
        })
        .collect::<Result<Vec<_>>>()?;
    let options = LossOptions {
        skeleton_iters: a.skeleton_iters,
        boundary_normalize: !a.raw_boundary,
        ..LossOptions::default()
    };
    let defaults = ScheduleState::default();
    let cfg = RefineConfig {
        epochs: a.epochs,
        steps_per_epoch: a.steps,
        learning_rate: a.lr,
        patience: a.patience,
        loss: options.apply(a.loss.parse::<LossConfig>()?),
        schedule: ScheduleState::new(defaults.lambda0(), defaults.step(), a.lambda_cap)?,
        ..RefineConfig::default()
    };
    let (pred, trajectory) = refine(&logits, &targets, &cfg)?;
    fs::create_dir_all(&a.out)?;
    trajectory.write_csv_file(a.out.join("trajectory.csv"))?;
    for (c, m) in pred.masks().iter().enumerate() {
        write_pgm_file(a.out.join(format!("pred{c}.pgm")), m)?;
    }
    let fg = pred.foreground();
    write_psg_file(
        a.out.join("probabilities.psg"),
        &fg.iter().collect::<Vec<_>>(),
    )?;
    if let Some(last) = trajectory.records.last() {
        println!(
            "final dice {:.6} after {} epochs",
            last.val_dice,
            trajectory.records.len()
        );
    }
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let mut plan = BenchPlan::from_file(&a.plan)
        .with_context(|| format!("reading plan {}", a.plan.display()))?;
    if let Some(out) = a.out {
        plan.output = Some(out);
    }
    if let Some(r) = a.runs {
        plan.runs = r;
    }
    if let Some(s) = a.seed {
        plan.seed = s;
    }
    if let Some(p) = a.hd_percentile {
        plan.hd_percentile = p;
    }
    if let Some(c) = a.connectivity {
        plan.connectivity = c;
    }
    if a.sequential {
        plan.execution = Execution::Sequential;
    }
    if let Some(cap) = a.lambda_cap {
        let s = plan.refine.schedule;
        plan.refine.schedule = ScheduleState::new(s.lambda0(), s.step(), cap)?;
    }
    if let Some(k) = a.skeleton_iters {
        plan.loss_options.skeleton_iters = k;
        let names: Vec<String> = plan.losses.iter().map(|l| l.name()).collect();
        plan.set_losses(&names)?;
    }
    if let Some(names) = &a.loss {
        plan.set_losses(names)?;
    }
    plan.validate()?;
    if plan.output.is_none() {
        bail!("no output directory: pass --out or set `output` in [bench]");
    }
    let report = run_bench(&plan)?;
    print!("{}", report.tables_text());
    Ok(())
}

fn cmd_score(a: ScoreArgs) -> Result<()> {
    if !a.masks.len().is_multiple_of(2) {
        bail!("masks come in prediction/truth pairs");
    }
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "pred,truth,dsc,hd,cc_error")?;
    for pair in a.masks.chunks(2) {
        let pred =
            read_pgm_file(&pair[0]).with_context(|| format!("reading {}", pair[0].display()))?;
        let truth =
            read_pgm_file(&pair[1]).with_context(|| format!("reading {}", pair[1].display()))?;
        let r = MetricRecord::evaluate(&pred, &truth, a.hd_percentile, a.connectivity)?;
        let hd = r.hd.map_or("undefined".to_owned(), |h| format!("{h:.6}"));
        writeln!(
            out,
            "{},{},{:.6},{hd},{}",
            pair[0].display(),
            pair[1].display(),
            r.dsc,
            r.cc_error
        )?;
    }
    Ok(())
}

fn grid_csv(domain: GridDomain, values: &[f64]) -> String {
    let mut s = String::new();
    for row in values.chunks(domain.width()) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

fn cmd_edt(a: EdtArgs) -> Result<()> {
    let mask = read_pgm_file(&a.mask).with_context(|| format!("reading {}", a.mask.display()))?;
    let values = if a.signed {
        signed_distance(&mask).values().to_vec()
    } else {
        edt(&mask)?.grid().values().to_vec()
    };
    let text = grid_csv(mask.domain(), &values);
    match a.out {
        Some(p) => write_text(&p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
