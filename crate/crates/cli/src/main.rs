use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use mdsad_core::config::{ExperimentConfig, PseudoMethod, RunConfig};
use mdsad_core::dataset::{self, features_of, read_split, write_split, MultimodalSample};
use mdsad_core::deepsad::{read_model, write_model, EncoderSpec, LossVariant, ModalityMask};
use mdsad_core::eval::{corrupt_split, evaluate, format_table, EvalReport, Workspace};
use mdsad_core::features::{CorruptionKind, CorruptionSpec};
use mdsad_core::{Error, Label, Provenance};

const TRAIN_SPLIT: &str = "train";
const LABELED_SPLIT: &str = "labeled";
const PSEUDO_SPLIT: &str = "pseudo";
const TEST_SPLIT: &str = "test";
const CORRUPT_DIR: &str = "corrupt";

/// Multimodal hypersphere anomaly detection on synthetic pantograph data.
#[derive(Parser, Debug)]
#[command(name = "mdsad", version)]
struct Cli {
    /// config file of `section.key = value` lines; defaults apply otherwise
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// overrides run.master_seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// base directory for the relative paths in the config
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the training normals, labeled anomalies and test split
    GenData {
        /// normal samples in the test split
        #[arg(long)]
        normal: Option<usize>,
        /// abnormal samples in the test split
        #[arg(long)]
        abnormal: Option<usize>,
    },
    /// Build pseudo-anomalies from the labeled split
    Augment,
    /// Train a model and write the checkpoint
    Train,
    /// Score the test split with a checkpoint and write a report
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value = "eval")]
        tag: String,
    },
    /// Train and evaluate every value of one ablation axis
    Ablate {
        #[arg(long, value_enum)]
        axis: Axis,
    },
    /// Write corrupted copies of the test split
    Corrupt {
        /// corruption as kind@level, repeatable; defaults to experiment.corruptions
        #[arg(long = "spec")]
        specs: Vec<String>,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Axis {
    Loss,
    Modality,
    NReal,
    Corruption,
    PseudoMethod,
}

impl Axis {
    fn name(self) -> &'static str {
        match self {
            Axis::Loss => "loss",
            Axis::Modality => "modality",
            Axis::NReal => "n_real",
            Axis::Corruption => "corruption",
            Axis::PseudoMethod => "pseudo_method",
        }
    }
}

struct Paths {
    data: PathBuf,
    checkpoint: PathBuf,
    reports: PathBuf,
}

impl Paths {
    fn new(cfg: &RunConfig, base: Option<&Path>) -> Self {
        let at = |p: &Path| match base {
            Some(b) if p.is_relative() => b.join(p),
            _ => p.to_path_buf(),
        };
        Paths {
            data: at(&cfg.paths.data_dir),
            checkpoint: at(&cfg.paths.checkpoint),
            reports: at(&cfg.paths.report_dir),
        }
    }

    fn split(&self, name: &str) -> PathBuf {
        self.data.join(name)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Divergence { .. } | Error::NonFinite { .. } => 4,
        Error::Io { .. } | Error::Format { .. } | Error::InvalidInput(_) | Error::Shape { .. } => 3,
        _ => 1,
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(|e| match e {
            Error::Io { .. } => Error::Config(e.to_string()),
            other => other,
        })?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn counts(samples: &[MultimodalSample]) -> (usize, usize) {
    let abnormal = samples.iter().filter(|s| s.label == Label::Abnormal).count();
    (samples.len() - abnormal, abnormal)
}

fn write_reported(dir: &Path, name: &str, samples: &[MultimodalSample]) -> Result<(), Error> {
    write_split(dir, samples)?;
    let (n, a) = counts(samples);
    println!("{name}: {n} normal, {a} abnormal -> {}", dir.display());
    Ok(())
}

fn gen_data(cfg: &mut RunConfig, paths: &Paths, normal: Option<usize>, abnormal: Option<usize>) -> Result<(), Error> {
    if let Some(n) = normal {
        cfg.data.n_test_normal = n;
    }
    if let Some(a) = abnormal {
        cfg.data.n_test_anomaly = a;
    }
    cfg.validate()?;
    write_reported(&paths.split(TRAIN_SPLIT), TRAIN_SPLIT, &dataset::train_normals(cfg))?;
    let labeled = dataset::real_anomalies(cfg, cfg.data.n_labeled)?;
    write_reported(&paths.split(LABELED_SPLIT), LABELED_SPLIT, &labeled)?;
    write_reported(&paths.split(TEST_SPLIT), TEST_SPLIT, &dataset::test_split(cfg)?)
}

fn labeled_prefix(paths: &Paths, n: usize) -> Result<Vec<MultimodalSample>, Error> {
    let dir = paths.split(LABELED_SPLIT);
    let mut labeled = read_split(&dir)?;
    if labeled.len() < n {
        return Err(Error::format(
            &dir,
            format!("{} labeled anomalies on disk, experiment needs {n}", labeled.len()),
        ));
    }
    labeled.truncate(n);
    Ok(labeled)
}

fn augment(cfg: &RunConfig, paths: &Paths) -> Result<(), Error> {
    let e = &cfg.experiment;
    if e.pseudo_method == PseudoMethod::None || e.loss == LossVariant::Svdd {
        println!("experiment uses no pseudo-anomalies; nothing to write");
        return Ok(());
    }
    let normals = read_split(&paths.split(TRAIN_SPLIT))?;
    let reals = labeled_prefix(paths, e.n_real)?;
    let pseudo = dataset::pseudo_anomalies(cfg, &normals, &reals, e.pseudo_method)?;
    write_reported(&paths.split(PSEUDO_SPLIT), PSEUDO_SPLIT, &pseudo)
}

fn pseudo_provenance(method: PseudoMethod) -> Option<Provenance> {
    match method {
        PseudoMethod::None => None,
        PseudoMethod::Mixup => Some(Provenance::Mixup),
        PseudoMethod::NngMix => Some(Provenance::NngMix),
        PseudoMethod::Ours => Some(Provenance::CutPaste),
    }
}

fn train(cfg: &RunConfig, paths: &Paths) -> Result<(), Error> {
    let e = &cfg.experiment;
    let normals = read_split(&paths.split(TRAIN_SPLIT))?;
    let n_real = if e.loss == LossVariant::Svdd { 0 } else { e.n_real };
    let reals = labeled_prefix(paths, n_real)?;
    let mut ws = Workspace::from_samples(cfg, normals, reals, Vec::new())?;
    if let (Some(want), true) = (pseudo_provenance(e.pseudo_method), n_real > 0) {
        let dir = paths.split(PSEUDO_SPLIT);
        let pseudo = read_split(&dir)?;
        if pseudo.iter().any(|s| s.image.provenance != want) {
            return Err(Error::Config(format!(
                "{} was not generated by pseudo method {}; rerun augment",
                dir.display(),
                e.pseudo_method.name()
            )));
        }
        ws.set_pseudo(e.pseudo_method, pseudo)?;
    }
    let (model, log) = ws.train(e)?;
    if let Some(parent) = paths.checkpoint.parent() {
        std::fs::create_dir_all(parent).map_err(|err| Error::io(parent, err))?;
    }
    write_model(&paths.checkpoint, &model)?;
    println!(
        "trained {} / {} for {} epochs: mean normal distance {:.5} -> {:.5}, threshold {:.5}",
        e.loss,
        e.modality,
        log.epoch_loss.len(),
        log.initial_normal_distance,
        log.final_normal_distance,
        model.threshold.unwrap_or(f64::NAN)
    );
    println!("checkpoint -> {}", paths.checkpoint.display());
    Ok(())
}

fn save_report(paths: &Paths, file: &str, report: &EvalReport) -> Result<PathBuf, Error> {
    std::fs::create_dir_all(&paths.reports).map_err(|err| Error::io(&paths.reports, err))?;
    let path = paths.reports.join(format!("{file}.json"));
    report.write(&path)?;
    Ok(path)
}

fn eval(cfg: &RunConfig, paths: &Paths, checkpoint: Option<PathBuf>, tag: &str) -> Result<(), Error> {
    let ckpt = checkpoint.unwrap_or_else(|| paths.checkpoint.clone());
    let model = read_model(&ckpt, EncoderSpec::default())?;
    if model.variant != cfg.experiment.loss {
        return Err(Error::Config(format!(
            "checkpoint was trained with the {} objective but the config says {}",
            model.variant, cfg.experiment.loss
        )));
    }
    let test = read_split(&paths.split(TEST_SPLIT))?;
    let feats = features_of(&test)?;
    let report = evaluate(cfg, tag, &model, &test, &feats)?;
    let path = save_report(paths, tag, &report)?;
    let m = report.threshold_metrics;
    println!(
        "AUROC {:.4}  TPR {:.4}  FPR {:.4}  threshold {:.5}",
        report.auroc, m.tpr, m.fpr, m.threshold
    );
    if let Some(per) = &report.per_corruption {
        for (k, v) in per {
            println!("  {k}: AUROC {v:.4}");
        }
    }
    println!("report -> {}", path.display());
    Ok(())
}

fn axis_values(axis: Axis, base: &ExperimentConfig) -> Vec<(String, ExperimentConfig)> {
    let with = |f: &dyn Fn(&mut ExperimentConfig)| {
        let mut e = base.clone();
        f(&mut e);
        e
    };
    match axis {
        Axis::Loss => LossVariant::ALL
            .iter()
            .map(|&l| (l.name().to_string(), with(&|e| e.loss = l)))
            .collect(),
        Axis::Modality => [ModalityMask::FORCE_ONLY, ModalityMask::IMAGE_ONLY, ModalityMask::BOTH]
            .iter()
            .map(|&m| (m.name().to_string(), with(&|e| e.modality = m)))
            .collect(),
        Axis::NReal => (1..=5).map(|n| (n.to_string(), with(&|e| e.n_real = n))).collect(),
        Axis::PseudoMethod => PseudoMethod::ALL
            .iter()
            .map(|&p| (p.name().to_string(), with(&|e| e.pseudo_method = p)))
            .collect(),
        Axis::Corruption => Vec::new(),
    }
}

fn ablate(cfg: &RunConfig, paths: &Paths, axis: Axis) -> Result<(), Error> {
    let normals = read_split(&paths.split(TRAIN_SPLIT))?;
    let reals = read_split(&paths.split(LABELED_SPLIT))?;
    let test = read_split(&paths.split(TEST_SPLIT))?;
    let mut reports = Vec::new();
    match axis {
        Axis::Corruption => {
            let mut ws = Workspace::from_samples(cfg, normals, reals, Vec::new())?;
            let mut base = cfg.experiment.clone();
            base.corruptions.clear();
            let (model, _) = ws.train(&base)?;
            let mut run = cfg.clone();
            run.experiment = base;
            for kind in CorruptionKind::ALL {
                for level in [1, 3] {
                    let spec = CorruptionSpec::new(kind, level)?;
                    let corrupted = corrupt_split(cfg, &test, spec);
                    let feats = features_of(&corrupted)?;
                    reports.push(evaluate(&run, &spec.tag(), &model, &corrupted, &feats)?);
                }
            }
        }
        _ => {
            let mut ws = Workspace::from_samples(cfg, normals, reals, test)?;
            for (tag, e) in axis_values(axis, &cfg.experiment) {
                let e = if e.loss == LossVariant::Svdd {
                    ExperimentConfig {
                        n_real: 0,
                        pseudo_method: PseudoMethod::None,
                        ..e
                    }
                } else {
                    e
                };
                let (report, _) = ws.run(&e, &tag)?;
                println!("{}={tag}: AUROC {:.4}", axis.name(), report.auroc);
                reports.push(report);
            }
        }
    }
    for r in &reports {
        save_report(paths, &format!("{}_{}", axis.name(), r.tag.replace('@', "_")), r)?;
    }
    print!("{}", format_table(&reports));
    println!("{} reports -> {}", reports.len(), paths.reports.display());
    Ok(())
}

fn corrupt_cmd(cfg: &RunConfig, paths: &Paths, specs: &[String]) -> Result<(), Error> {
    let specs: Vec<CorruptionSpec> = if specs.is_empty() {
        cfg.experiment.corruptions.clone()
    } else {
        specs
            .iter()
            .map(|s| s.parse::<CorruptionSpec>())
            .collect::<Result<_, _>>()?
    };
    if specs.is_empty() {
        return Err(Error::Config(
            "no corruptions requested; pass --spec kind@level or set experiment.corruptions".into(),
        ));
    }
    let test = read_split(&paths.split(TEST_SPLIT))?;
    for spec in specs {
        let dir = paths
            .split(CORRUPT_DIR)
            .join(format!("{}_{}", spec.kind(), spec.level()));
        write_reported(&dir, &spec.tag(), &corrupt_split(cfg, &test, spec))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut cfg = load_config(&cli)?;
    let paths = Paths::new(&cfg, cli.out.as_deref());
    match cli.command {
        Command::GenData { normal, abnormal } => gen_data(&mut cfg, &paths, normal, abnormal),
        Command::Augment => augment(&cfg, &paths),
        Command::Train => train(&cfg, &paths),
        Command::Eval { checkpoint, tag } => eval(&cfg, &paths, checkpoint, &tag),
        Command::Ablate { axis } => ablate(&cfg, &paths, axis),
        Command::Corrupt { specs } => corrupt_cmd(&cfg, &paths, &specs),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
