//! The `omnigan` command-line tool.
//!
//! Exit codes: 0 success, 1 a check or tolerance failed, 2 bad usage or
//! unreadable input.

pub mod config;
pub mod gradcheck;
#[cfg(test)]
mod tests;

use clap::{Args, Parser, Subcommand};
use omnigan::inr::InrGenerator;
use omnigan::inversion::{
    degrade, invert, psnr, upsample_bilinear, Degradation, InitStrategy, InversionConfig,
};
use omnigan::io::{
    format_collapse, read_ppm, write_dataset_csv, write_metrics_csv, write_ppm, Checkpoint,
    LoadedGenerator, RunManifest,
};
use omnigan::loss::{omni_loss, OmniTarget, ScoreVector};
use omnigan::optim::{truncated_sample, DecayMode, DecayPreset, TruncationConfig};
use omnigan::trainer::{train, train_images, Task, TrainConfig, Variant};
use omnigan::{Error, Result, Tensor};
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "omnigan", version, about = "Omni-loss conditional GAN toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compare analytic gradients with central differences
    GradCheck {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print omni-loss gradient magnitudes at the probe points
    PaperTable,
    /// Train a conditional GAN on a synthetic task
    Train(TrainArgs),
    /// Render a checkpoint's generator to a PPM image
    Sample(SampleArgs),
    /// Restore a degraded image by latent optimization
    Invert(InvertArgs),
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    preset: Option<DecayPreset>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    task: Option<Task>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    decay_mode: Option<DecayMode>,
    /// `key = value` file applied before flags
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` overrides, applied last
    #[arg(long = "set", value_parser = parse_kv)]
    set: Vec<(String, String)>,
    /// Also write the training set as dataset.csv
    #[arg(long)]
    export_dataset: bool,
}

#[derive(Debug, Args)]
struct SampleArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 0)]
    class: usize,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct InvertArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[arg(long, default_value = "identity")]
    degrade: Degradation,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    class: usize,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    finetune_lr: Option<f64>,
    /// Comma-separated discriminator trunk layers
    #[arg(long, value_delimiter = ',')]
    layers: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Best of this many random initialisations
    #[arg(long, default_value_t = 1)]
    init_k: usize,
}

fn parse_kv(s: &str) -> std::result::Result<(String, String), String> {
    config::parse_assignment(s).map_err(|e| e.to_string())
}

/// Runs the tool on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let recorded: Vec<String> = args
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let result = match cli.command {
        Command::GradCheck { trials, tol, seed } => grad_check_cmd(trials, tol, seed),
        Command::PaperTable => paper_table().map(|_| EXIT_OK),
        Command::Train(a) => train_cmd(a, recorded),
        Command::Sample(a) => sample_cmd(a, recorded),
        Command::Invert(a) => invert_cmd(a, recorded),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::NonFinite(_) | Error::BackwardBeforeForward(_) => EXIT_FAILED,
                _ => EXIT_USAGE,
            }
        }
    }
}

fn grad_check_cmd(trials: usize, tol: f64, seed: u64) -> Result<i32> {
    if trials == 0 || !(tol > 0.0) {
        return Err(Error::InvalidParameter(
            "trials and tolerance must be positive".into(),
        ));
    }
    let reports = gradcheck::run_suite(trials, seed)?;
    println!(
        "{:<30} {:>9} {:>12}  status",
        "op", "instances", "worst_rel"
    );
    let mut ok = true;
    for r in &reports {
        let pass = r.worst <= tol;
        ok &= pass;
        println!(
            "{:<30} {:>9} {:>12.3e}  {}",
            r.name,
            r.instances,
            r.worst,
            if pass { "ok" } else { "FAIL" }
        );
    }
    println!("tolerance {tol:e}: {}", if ok { "pass" } else { "fail" });
    Ok(if ok { EXIT_OK } else { EXIT_FAILED })
}

/// One row of the gradient table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeRow {
    pub panel: char,
    pub point: char,
    pub scores: [f64; 2],
    /// `|∂L/∂·|` for the two probed scores.
    pub magnitudes: [f64; 2],
}

/// Gradient magnitudes at the probe points. Panel (a) has one negative
/// `s_n` and one positive `s_p` (scores `[s_n, s_p]`); panel (b) has two
/// positives `[s_p0, s_p1]`.
pub fn gradient_table() -> Result<Vec<ProbeRow>> {
    let probes = [
        ('a', 'A', [4.0, 0.0], [-1i8, 1]),
        ('a', 'B', [0.0, 0.0], [-1, 1]),
        ('a', 'C', [-4.0, 0.0], [-1, 1]),
        ('b', 'A', [-2.0, 0.0], [1, 1]),
        ('b', 'B', [0.0, 0.0], [1, 1]),
        ('b', 'C', [0.0, -2.0], [1, 1]),
    ];
    probes
        .iter()
        .map(|&(panel, point, scores, labels)| {
            let g = omni_loss(
                &ScoreVector::new(scores.to_vec())?,
                &OmniTarget::new(labels.to_vec())?,
            )?
            .grad;
            Ok(ProbeRow {
                panel,
                point,
                scores,
                magnitudes: [g[0].abs(), g[1].abs()],
            })
        })
        .collect()
}

fn paper_table() -> Result<()> {
    println!("panel point  scores          |grad| first / second");
    for r in gradient_table()? {
        let names = if r.panel == 'a' {
            ("s_n", "s_p")
        } else {
            ("s_p0", "s_p1")
        };
        println!(
            "({})   {}      {}={:+.0} {}={:+.0}   {:.2} / {:.2}",
            r.panel,
            r.point,
            names.0,
            r.scores[0],
            names.1,
            r.scores[1],
            r.magnitudes[0],
            r.magnitudes[1]
        );
    }
    Ok(())
}

fn resolve_train_config(a: &TrainArgs) -> Result<TrainConfig> {
    let mut base = TrainConfig::default();
    if a.task == Some(Task::Images) {
        base = TrainConfig::image_defaults();
    }
    if let Some(path) = &a.config {
        base = config::apply(&base, &config::read_assignments(path)?)?;
    }
    if let Some(v) = a.variant {
        base.variant = v;
    }
    if let Some(p) = a.preset {
        base = base.with_preset(p);
    }
    if let Some(s) = a.seed {
        base.seed = s;
    }
    if let Some(t) = a.task {
        base.task = t;
    }
    if let Some(s) = a.steps {
        base.total_steps = s;
    }
    if let Some(m) = a.decay_mode {
        base.decay_mode = m;
    }
    let cfg = config::apply(&base, &a.set)?;
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<()> {
    Ok(std::fs::create_dir_all(dir)?)
}

fn train_cmd(a: TrainArgs, args: Vec<String>) -> Result<i32> {
    let start = Instant::now();
    let cfg = resolve_train_config(&a)?;
    create_dir(&a.out)?;
    let (rows, collapse, checkpoint, aborted) = match cfg.task {
        Task::Rings => {
            if a.export_dataset {
                write_dataset_csv(&a.out.join("dataset.csv"), &cfg.ring_dataset()?)?;
            }
            let o = train(&cfg)?;
            let ck = Checkpoint::from_direct(cfg.variant, &o.gan.generator, &o.gan.discriminator);
            (o.rows, o.collapse, ck, o.aborted)
        }
        Task::Images => {
            if a.export_dataset {
                write_dataset_csv(&a.out.join("dataset.csv"), &cfg.image_dataset()?)?;
            }
            let o = train_images(&cfg)?;
            let ck = Checkpoint::from_inr(cfg.variant, &o.gan.generator, &o.gan.discriminator);
            (o.rows, o.collapse, ck, o.aborted)
        }
    };
    write_metrics_csv(&a.out.join("metrics.csv"), &rows)?;
    std::fs::write(a.out.join("collapse.txt"), format_collapse(&collapse))?;
    checkpoint.save(&a.out.join("checkpoint.toml"))?;
    let config_text = toml::to_string(&cfg).map_err(|e| Error::Format(e.to_string()))?;
    RunManifest::new(
        "train",
        args,
        cfg.seed,
        config_text,
        start.elapsed().as_secs_f64(),
    )
    .save(&a.out.join("manifest.toml"))?;
    if let Some(last) = rows.last() {
        println!(
            "step {} class_fidelity {:.3} mode_coverage {:.3} high_quality {:.3}",
            last.step, last.class_fidelity, last.mode_coverage, last.high_quality_fraction
        );
    }
    print!("{}", format_collapse(&collapse));
    if let Some(msg) = aborted {
        eprintln!("training aborted: {msg}");
        return Ok(EXIT_FAILED);
    }
    Ok(EXIT_OK)
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(OsString::from).unwrap_or_default();
    name.push(".manifest.toml");
    out.with_file_name(name)
}

fn load_inr(path: &Path) -> Result<(Checkpoint, InrGenerator)> {
    let ck = Checkpoint::load(path)?;
    match ck.generator()? {
        LoadedGenerator::Inr(g) => Ok((ck, g)),
        LoadedGenerator::Direct(_) => Err(Error::InvalidParameter(
            "this checkpoint has a direct generator head; image commands need an INR checkpoint"
                .into(),
        )),
    }
}

fn sample_cmd(a: SampleArgs, args: Vec<String>) -> Result<i32> {
    let start = Instant::now();
    let ck = Checkpoint::load(&a.checkpoint)?;
    let trunc = TruncationConfig::new(a.sigma)?;
    let mut rng = omnigan::rng_from_seed(a.seed);
    let img = match ck.generator()? {
        LoadedGenerator::Inr(g) => {
            let (nh, nw) = g.resolution();
            let (h, w) = (a.height.unwrap_or(nh), a.width.unwrap_or(nw));
            let z = truncated_sample(
                &mut rng,
                omnigan::net::SampleGenerator::noise_dim(&g),
                trunc,
            );
            g.synthesize(&z, a.class, h, w)?
        }
        LoadedGenerator::Direct(g) => {
            let dim = ck.generator.head.out_dim();
            let (h, w) = (a.height.unwrap_or(0), a.width.unwrap_or(0));
            if h * w * 3 != dim {
                return Err(Error::InvalidParameter(format!(
                    "a direct-head generator emits {dim} values and cannot render {h}×{w}; only its native size is available"
                )));
            }
            let z = truncated_sample(&mut rng, ck.generator.noise_dim, trunc);
            g.apply(&Tensor::from_vec(&[1, z.len()], z)?, &[a.class])?
                .reshape(&[h, w, 3])?
        }
    };
    write_ppm(&a.out, &img)?;
    let config_text = format!(
        "checkpoint = {:?}\nclass = {}\nheight = {}\nwidth = {}\nsigma = {}\n",
        a.checkpoint.display().to_string(),
        a.class,
        img.shape()[0],
        img.shape()[1],
        a.sigma
    );
    RunManifest::new(
        "sample",
        args,
        a.seed,
        config_text,
        start.elapsed().as_secs_f64(),
    )
    .save(&manifest_path(&a.out))?;
    println!(
        "wrote {}×{} image to {}",
        img.shape()[0],
        img.shape()[1],
        a.out.display()
    );
    Ok(EXIT_OK)
}

fn invert_cmd(a: InvertArgs, args: Vec<String>) -> Result<i32> {
    let start = Instant::now();
    let (ck, mut g) = load_inr(&a.checkpoint)?;
    let mut d = ck.discriminator()?;
    let target = read_ppm(&a.target)?;
    let (h, w) = g.resolution();
    if target.shape() != [h, w, 3] {
        return Err(Error::InvalidParameter(format!(
            "target is {:?} but the generator renders {h}×{w}×3",
            target.shape()
        )));
    }
    let observation = degrade(&target, a.degrade)?;
    let defaults = InversionConfig::default();
    let cfg = InversionConfig {
        steps: a.steps.unwrap_or(defaults.steps),
        lr_z: a.lr.unwrap_or(defaults.lr_z),
        finetune_lr: a.finetune_lr,
        layers: a
            .layers
            .clone()
            .unwrap_or_else(|| (0..d.trunk_depth()).collect()),
        init: if a.init_k > 1 {
            InitStrategy::BestOfK {
                k: a.init_k,
                seed: a.seed,
            }
        } else {
            InitStrategy::Random { seed: a.seed }
        },
    };
    let result = invert(
        &mut g,
        &mut d,
        &observation,
        a.class,
        [h, w, 3],
        a.degrade,
        &cfg,
    )?;
    create_dir(&a.out)?;
    write_ppm(&a.out.join("restored.ppm"), &result.restored)?;
    let trace: String = std::iter::once("step,objective\n".to_string())
        .chain(
            result
                .trace
                .iter()
                .enumerate()
                .map(|(i, v)| format!("{i},{v}\n")),
        )
        .collect();
    std::fs::write(a.out.join("trace.csv"), trace)?;
    let restored_psnr = psnr(&result.restored, &target, 2.0)?;
    let mut report = format!("restored_psnr_db = {restored_psnr}\n");
    if let Degradation::Downsample { .. } = a.degrade {
        let baseline = upsample_bilinear(&observation, h, w)?;
        report.push_str(&format!(
            "bilinear_psnr_db = {}\n",
            psnr(&baseline, &target, 2.0)?
        ));
    }
    let (first, last) = (
        result.trace[0],
        *result.trace.last().expect("non-empty trace"),
    );
    report.push_str(&format!(
        "initial_objective = {first}\nfinal_objective = {last}\n"
    ));
    std::fs::write(a.out.join("psnr.txt"), &report)?;
    let config_text = toml::to_string(&cfg).map_err(|e| Error::Format(e.to_string()))?;
    RunManifest::new(
        "invert",
        args,
        a.seed,
        config_text,
        start.elapsed().as_secs_f64(),
    )
    .save(&a.out.join("manifest.toml"))?;
    print!("{report}");
    Ok(EXIT_OK)
}
