//! The `opspace` command line: generate, train, eval and analyze.
//!
//! Exit codes: 0 success, 1 other failure, 2 configuration error, 3 I/O or
//! dataset error, 4 representational collapse, 5 checkpoint/config mismatch.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use opspace_diffarray::TensorError;
use opspace_symbolic::to_latex;
use serde::Serialize;

use crate::config::{Preset, RunConfig};
use crate::datagen::{
    cross_op_families, filter_by_variable_count, generate, group_by_premise, Dataset, EvalInstance, Mode, Split,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    eval_length_generalisation, eval_multistep, eval_retrieval, export_2d, latent_separation,
    retrieval_baseline_map, two_decimals, write_metric_reports, write_projection, write_separation_reports, ReportContext,
    MULTISTEP_CANDIDATES,
};
use crate::manifest::RunManifest;
use crate::training::{fit_featurizer, train_from, write_metric_log, EpochMetrics, ModelBundle};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_COLLAPSE: i32 = 4;
pub const EXIT_MISMATCH: i32 = 5;

pub const BEST_CHECKPOINT: &str = "best.ckpt";
pub const LAST_CHECKPOINT: &str = "last.ckpt";
pub const METRICS_FILE: &str = "metrics.csv";

#[derive(Debug, Parser)]
#[command(name = "opspace", version, about = "Multi-operation latent reasoning over symbolic derivations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML file overlaid on the preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "desk", value_parser = parse_preset)]
    pub preset: Preset,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Write into a non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

fn parse_preset(s: &str) -> std::result::Result<Preset, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Protocol {
    Retrieval,
    Multistep,
    Lengthgen,
    Separation,
    Export2d,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset.
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Train a model on a generated dataset.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// Continue from `last.ckpt` in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Run an evaluation protocol on a checkpoint.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum)]
        protocol: Protocol,
    },
    /// Summarize a dataset and, optionally, a training run.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::BatchTooSmall(_) | Error::RetryExhausted { .. } => EXIT_CONFIG,
        Error::Io(_) | Error::Dataset(_) | Error::Json(_) | Error::Parse(_) | Error::OutputNotEmpty(_) => EXIT_IO,
        Error::Tensor(TensorError::Checkpoint(_)) => EXIT_IO,
        Error::Tensor(TensorError::Io(_)) => EXIT_IO,
        Error::CollapseDetected { .. } => EXIT_COLLAPSE,
        Error::ShapeMismatch { .. } | Error::Tensor(TensorError::ShapeMismatch { .. }) => EXIT_MISMATCH,
        _ => EXIT_OTHER,
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { common } => cmd_generate(&common),
        Command::Train { common, data, resume } => cmd_train(&common, &data, resume),
        Command::Eval {
            common,
            data,
            checkpoint,
            protocol,
        } => cmd_eval(&common, &data, &checkpoint, protocol),
        Command::Analyze { common, data, checkpoint } => cmd_analyze(&common, &data, checkpoint.as_deref()),
    }
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let cfg = RunConfig::load(common.preset, common.config.as_deref())?;
    let cfg = match common.seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Creates `out`, refusing a non-empty directory unless forced.
pub fn prepare_out(out: &Path, force: bool) -> Result<()> {
    if out.exists() {
        if !out.is_dir() {
            return Err(Error::Io(std::io::Error::new(
                std::io::ErrorKind::AlreadyExists,
                format!("{} is not a directory", out.display()),
            )));
        }
        if !force && std::fs::read_dir(out)?.next().is_some() {
            return Err(Error::OutputNotEmpty(out.to_path_buf()));
        }
    }
    std::fs::create_dir_all(out)?;
    Ok(())
}

fn with_manifest(manifest: RunManifest, out: &Path, result: Result<()>) -> Result<()> {
    let status = match &result {
        Ok(()) => "ok".to_string(),
        Err(e) => format!("failed: {e}"),
    };
    manifest.finish(out, &status)?;
    result
}

fn cmd_generate(common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    prepare_out(&common.out, common.force)?;
    let mut manifest = RunManifest::begin("generate", cfg.hash(), cfg.seed);
    if let Some(c) = &common.config {
        manifest.input("config", c);
    }
    let result = (|| {
        let data = generate(&cfg.generation, cfg.seed)?;
        data.save(&common.out)?;
        println!(
            "{} triples, {} chains, {} dev and {} test instances written to {}",
            data.triples.len(),
            data.chains.len(),
            data.dev.len(),
            data.test.len(),
            common.out.display()
        );
        Ok(())
    })();
    with_manifest(manifest, &common.out, result)
}

fn save_history(out: &Path, history: &[EpochMetrics]) -> Result<()> {
    write_metric_log(BufWriter::new(File::create(out.join(METRICS_FILE))?), history)
}

fn cmd_train(common: &Common, data_dir: &Path, resume: bool) -> Result<()> {
    let cfg = load_config(common)?;
    let data = Dataset::load(data_dir)?;
    let mut triples = data.train_triples();
    if let Some(k) = cfg.train_num_vars {
        triples = filter_by_variable_count(&triples, k);
    }
    let out = &common.out;
    let (start, best) = if resume {
        let mut last = ModelBundle::load(&out.join(LAST_CHECKPOINT))?;
        let best = ModelBundle::load(&out.join(BEST_CHECKPOINT))?;
        if last.train.model_config() != cfg.training.model_config() {
            return Err(Error::Config("resumed checkpoint was trained with a different model configuration".into()));
        }
        last.train.epochs = cfg.training.epochs;
        (last, Some(best))
    } else {
        prepare_out(out, common.force)?;
        let featurizer = fit_featurizer(cfg.training.encoder.family, &triples);
        (ModelBundle::new(cfg.training.clone(), featurizer)?, None)
    };
    let mut manifest = RunManifest::begin("train", cfg.hash(), cfg.seed);
    manifest.input("data", data_dir);
    if let Some(c) = &common.config {
        manifest.input("config", c);
    }
    if start.epoch == 0 {
        start.save(&out.join(BEST_CHECKPOINT), false)?;
        save_history(out, &[])?;
    }
    let mut observer = |m: &EpochMetrics, current: &ModelBundle, is_best: bool| -> Result<()> {
        println!(
            "epoch {:>3}  loss {:.4}  dev cross {:.2}  intra {:.2}  avg {:.2}{}",
            m.epoch,
            m.loss,
            m.dev_cross_map,
            m.dev_intra_map,
            m.avg_map,
            if is_best { "  (best)" } else { "" }
        );
        save_history(out, &current.history)?;
        current.save(&out.join(LAST_CHECKPOINT), true)?;
        if is_best {
            current.save(&out.join(BEST_CHECKPOINT), false)?;
        }
        Ok(())
    };
    let result = train_from(start, best, &triples, &data.dev, &mut observer).map(|o| {
        if let Some(b) = o.best.best_avg_map() {
            println!("best dev average MAP {b:.2} at epoch {}", o.best.epoch);
        }
    });
    with_manifest(manifest, out, result)
}

fn check_compatible(cfg: &RunConfig, bundle: &ModelBundle, explicit: bool) -> Result<()> {
    if !explicit {
        return Ok(());
    }
    let (want, have) = (&cfg.training.encoder, &bundle.train.encoder);
    if want.dim != have.dim {
        return Err(Error::ShapeMismatch {
            what: format!("embedding dimension (config {}, checkpoint {})", want.dim, have.dim),
            expected: want.dim,
            found: have.dim,
        });
    }
    if want.family != have.family || cfg.training.paradigm != bundle.train.paradigm {
        return Err(Error::ShapeMismatch {
            what: format!(
                "model (config {} {}, checkpoint {} {})",
                cfg.training.paradigm, want.family, bundle.train.paradigm, have.family
            ),
            expected: want.dim,
            found: have.dim,
        });
    }
    Ok(())
}

/// The full six-operation cross-op families of the test premises, plus the
/// intra-op test instances.
pub fn separation_instances(data: &Dataset) -> Vec<EvalInstance> {
    let groups = group_by_premise(&data.triples);
    let mut out: Vec<EvalInstance> = cross_op_families(&groups, Split::Test).into_iter().flatten().collect();
    out.extend(data.test.iter().filter(|i| i.mode == Mode::IntraOp).cloned());
    out
}

fn cmd_eval(common: &Common, data_dir: &Path, checkpoint: &Path, protocol: Protocol) -> Result<()> {
    let cfg = load_config(common)?;
    let bundle = ModelBundle::load(checkpoint)?;
    check_compatible(&cfg, &bundle, common.config.is_some())?;
    let data = Dataset::load(data_dir)?;
    prepare_out(&common.out, common.force)?;
    let run = RunConfig {
        training: bundle.train.clone(),
        ..cfg.clone()
    };
    let mut manifest = RunManifest::begin(&format!("eval {protocol:?}").to_lowercase(), run.hash(), run.seed);
    manifest.input("data", data_dir);
    manifest.input("checkpoint", checkpoint);
    let ctx = ReportContext {
        config_hash: run.hash(),
        paradigm: bundle.train.paradigm.to_string(),
        encoder: bundle.train.encoder.family.to_string(),
    };
    let model = &bundle.model;
    let out = &common.out;
    let result = (|| {
        match protocol {
            Protocol::Retrieval => {
                let reports = eval_retrieval(model, &data.test)?;
                for r in &reports {
                    println!(
                        "{:<9} MAP {:.2}  Hit@1 {:.2}  Hit@3 {:.2}  (n={})",
                        r.key.mode.map(Mode::name).unwrap_or(""),
                        r.map,
                        r.hit_at_1,
                        r.hit_at_3,
                        r.instances
                    );
                }
                write_metric_reports(File::create(out.join("retrieval.csv"))?, &ctx, &reports)
            }
            Protocol::Multistep => {
                let reports = eval_multistep(model, &data.chains)?;
                for r in &reports {
                    println!("step {}  Hit@1 {:.2}  (n={})", r.key.step.unwrap_or(0), r.hit_at_1, r.instances);
                }
                write_metric_reports(File::create(out.join("multistep.csv"))?, &ctx, &reports)
            }
            Protocol::Lengthgen => {
                let reports = eval_length_generalisation(model, &data.test)?;
                for r in &reports {
                    println!(
                        "{:<9} vars {}  MAP {:.2}  (n={})",
                        r.key.mode.map(Mode::name).unwrap_or(""),
                        r.key.num_vars.unwrap_or(0),
                        r.map,
                        r.instances
                    );
                }
                write_metric_reports(File::create(out.join("lengthgen.csv"))?, &ctx, &reports)
            }
            Protocol::Separation => {
                let reports = latent_separation(model, &separation_instances(&data))?;
                for r in &reports {
                    println!(
                        "{:<9} before {}  after {}  (n={})",
                        r.mode.name(),
                        two_decimals(r.before),
                        two_decimals(r.after),
                        r.instances
                    );
                }
                write_separation_reports(File::create(out.join("separation.csv"))?, &ctx, &reports)
            }
            Protocol::Export2d => {
                let mut sample = Vec::new();
                for mode in Mode::ALL {
                    sample.extend(data.test.iter().filter(|i| i.mode == mode).take(cfg.export_instances).cloned());
                }
                let points = export_2d(model, &sample, |ex, t, ey| model.transformed(ex, t, ey))?;
                println!("{} points projected", points.len());
                write_projection(File::create(out.join("export2d.csv"))?, &points)
            }
        }
    })();
    with_manifest(manifest, out, result)
}

#[derive(Serialize)]
struct Analysis {
    config_hash: String,
    dataset: BTreeMap<String, usize>,
    triples_per_operation: BTreeMap<String, usize>,
    triples_per_split: BTreeMap<String, usize>,
    premises_per_variable_count: BTreeMap<usize, usize>,
    eval_instances: BTreeMap<String, usize>,
    mean_premise_latex_chars: f64,
    mean_conclusion_latex_chars: f64,
    mean_chain_length: f64,
    random_map_baseline: f64,
    random_multistep_hit_at_1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    training: Option<TrainingSummary>,
}

#[derive(Serialize)]
struct TrainingSummary {
    epochs_completed: usize,
    best_epoch: Option<usize>,
    best_avg_map: Option<f64>,
    history: Vec<EpochMetrics>,
}

fn cmd_analyze(common: &Common, data_dir: &Path, checkpoint: Option<&Path>) -> Result<()> {
    let cfg = load_config(common)?;
    let data = Dataset::load(data_dir)?;
    let bundle = checkpoint.map(ModelBundle::load).transpose()?;
    prepare_out(&common.out, common.force)?;
    let mut manifest = RunManifest::begin("analyze", cfg.hash(), cfg.seed);
    manifest.input("data", data_dir);
    if let Some(c) = checkpoint {
        manifest.input("checkpoint", c);
    }
    let result = (|| {
        let mut per_op = BTreeMap::new();
        let mut per_split = BTreeMap::new();
        for t in &data.triples {
            *per_op.entry(t.operation.name().to_string()).or_insert(0) += 1;
            *per_split.entry(t.split.name().to_string()).or_insert(0) += 1;
        }
        let mut per_vars = BTreeMap::new();
        for g in group_by_premise(&data.triples) {
            *per_vars.entry(opspace_symbolic::free_symbols(&g.premise).len()).or_insert(0) += 1;
        }
        let mut eval_instances = BTreeMap::new();
        for (split, set) in [("dev", &data.dev), ("test", &data.test)] {
            for mode in Mode::ALL {
                eval_instances.insert(format!("{split}/{}", mode.name()), set.iter().filter(|i| i.mode == mode).count());
            }
        }
        let mean_len = |it: &mut dyn Iterator<Item = usize>| {
            let (s, n) = it.fold((0usize, 0usize), |(s, n), x| (s + x, n + 1));
            if n == 0 {
                0.0
            } else {
                s as f64 / n as f64
            }
        };
        let analysis = Analysis {
            config_hash: cfg.hash(),
            dataset: BTreeMap::from([
                ("premises".to_string(), data.premises.len()),
                ("triples".to_string(), data.triples.len()),
                ("chains".to_string(), data.chains.len()),
            ]),
            triples_per_operation: per_op,
            triples_per_split: per_split,
            premises_per_variable_count: per_vars,
            eval_instances,
            mean_premise_latex_chars: mean_len(&mut data.premises.iter().map(|(p, _)| to_latex(p).chars().count())),
            mean_conclusion_latex_chars: mean_len(&mut data.triples.iter().map(|t| to_latex(&t.conclusion).chars().count())),
            mean_chain_length: mean_len(&mut data.chains.iter().map(|c| c.steps.len())),
            random_map_baseline: retrieval_baseline_map(),
            random_multistep_hit_at_1: 100.0 / MULTISTEP_CANDIDATES as f64,
            training: bundle.map(|b| {
                let best = b
                    .history
                    .iter()
                    .copied()
                    .reduce(|a, m| if m.avg_map > a.avg_map { m } else { a });
                TrainingSummary {
                    epochs_completed: b.epoch,
                    best_epoch: best.map(|m| m.epoch),
                    best_avg_map: best.map(|m| m.avg_map),
                    history: b.history,
                }
            }),
        };
        let text = serde_json::to_string_pretty(&analysis)? + "\n";
        print!("{text}");
        std::fs::write(common.out.join("analysis.json"), text)?;
        Ok(())
    })();
    with_manifest(manifest, &common.out, result)
}
