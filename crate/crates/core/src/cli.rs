//! Command-line interface wiring the library end to end: dataset generation,
//! partitioning, training, ensemble experiments, evaluation, and
//! explanation artifacts.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::data::{load_manifest, ImageStore, PartitionPlan};
use crate::ensemble::{
    run_experiment, score_predictions, average_predictions, Ensemble, ENSEMBLE_SIZE,
};
use crate::error::{Error, Result};
use crate::imaging::AugmentationConfig;
use crate::synth::{generate_blob_dataset, SynthConfig};
use crate::training::{
    build_model, load_checkpoint, predict_eval_set, save_checkpoint, ArchitectureSpec,
    CheckpointMeta, TrainingConfig,
};

#[derive(Parser)]
#[command(
    name = "cxr",
    about = "CNN ensembles for two-class chest X-ray classification with saliency and uncertainty heatmaps",
    version
)]
pub struct Cli {
    /// Worker threads for parallel members/divisions (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by the training-style commands. Values resolve as:
/// built-in defaults, then the `--config` TOML file, then explicit flags.
#[derive(Args, Clone, Debug, Default)]
pub struct TrainArgs {
    /// Architecture name, Arch1..Arch6.
    #[arg(long)]
    pub arch: Option<String>,

    /// Experiment seed; member seeds derive from it.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Maximum training epochs.
    #[arg(long)]
    pub epochs: Option<usize>,

    /// Early-stopping patience (epochs without validation improvement).
    #[arg(long)]
    pub patience: Option<usize>,

    /// Batch size.
    #[arg(long)]
    pub batch_size: Option<usize>,

    /// Disable training-time augmentation.
    #[arg(long)]
    pub no_augment: bool,

    /// TOML config file; explicit flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate the synthetic blob dataset (bright blob left = class 0,
    /// right = class 1) plus its manifest.
    Synthgen {
        /// Output directory for PNGs and manifest.csv.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 400)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Uniform noise half-range.
        #[arg(long, default_value_t = 12.0)]
        noise: f64,
    },

    /// Build the stratified 5x5 partition plan for a manifest.
    Split {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Plan file to write (JSON).
        #[arg(long)]
        out: PathBuf,
    },

    /// Train a single model on one division/split of a plan.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        /// Division number, 1-based.
        #[arg(long, default_value_t = 1)]
        division: usize,
        /// Split number, 1-based.
        #[arg(long, default_value_t = 1)]
        split: usize,
        /// Output directory for model.ckpt and history.csv.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
    },

    /// Run the full experiment: 5 divisions x 5 members, reports included.
    Experiment {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        /// Output directory for checkpoints, histories, ROC curves, and the
        /// report CSV/table.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
    },

    /// Re-evaluate a saved division ensemble on its test set.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        /// Experiment directory holding division_*/split_*/model.ckpt.
        #[arg(long)]
        runs: PathBuf,
        /// Division number, 1-based.
        #[arg(long, default_value_t = 1)]
        division: usize,
        /// Directory for evaluation.csv (defaults to the division directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Emit the explanation artifact set for one X-ray image.
    Explain {
        /// Experiment directory holding division_*/split_*/model.ckpt.
        #[arg(long)]
        runs: PathBuf,
        /// Division number, 1-based.
        #[arg(long, default_value_t = 1)]
        division: usize,
        /// Input image (PNG, PGM, or JPEG).
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Integer nearest-neighbor upscale factor for output PNGs.
        #[arg(long, default_value_t = 1)]
        upscale: usize,
    },
}

/// Keys accepted in the `--config` TOML file.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    arch: Option<String>,
    seed: Option<u64>,
    epochs: Option<usize>,
    patience: Option<usize>,
    batch_size: Option<usize>,
    learning_rate: Option<f64>,
    augment: Option<bool>,
    augmentation: Option<AugmentationConfig>,
}

/// Fully resolved training-run configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub arch: ArchitectureSpec,
    pub training: TrainingConfig,
    pub augmentation: Option<AugmentationConfig>,
}

impl RunConfig {
    /// Defaults, overridden by the config file, overridden by flags.
    pub fn resolve(args: &TrainArgs) -> Result<RunConfig> {
        let file: FileConfig = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                toml::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
            None => FileConfig::default(),
        };

        let arch_name = args
            .arch
            .clone()
            .or(file.arch)
            .unwrap_or_else(|| "Arch1".to_string());
        let arch = ArchitectureSpec::by_name(&arch_name)
            .ok_or_else(|| Error::Config(format!("unknown architecture {arch_name:?}")))?;

        let defaults = TrainingConfig::default();
        let training = TrainingConfig {
            max_epochs: args.epochs.or(file.epochs).unwrap_or(defaults.max_epochs),
            patience: args.patience.or(file.patience).unwrap_or(defaults.patience),
            batch_size: args
                .batch_size
                .or(file.batch_size)
                .unwrap_or(defaults.batch_size),
            learning_rate: file.learning_rate.unwrap_or(defaults.learning_rate),
            l2_strength: defaults.l2_strength,
            seed: args.seed.or(file.seed).unwrap_or(0),
        };
        training.validate()?;

        let augment_enabled = if args.no_augment {
            false
        } else {
            file.augment.unwrap_or(true)
        };
        let augmentation = augment_enabled
            .then(|| file.augmentation.unwrap_or_default());
        if let Some(cfg) = &augmentation {
            cfg.validate()?;
        }

        Ok(RunConfig {
            arch,
            training,
            augmentation,
        })
    }
}

/// Runs the CLI and returns a process exit code: 0 iff all stages succeeded.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            1
        }
    }
}

fn init_thread_pool(jobs: Option<usize>) -> Result<()> {
    if let Some(n) = jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

pub fn execute(cli: Cli) -> Result<()> {
    init_thread_pool(cli.jobs)?;
    match cli.command {
        Command::Synthgen {
            out,
            count,
            seed,
            noise,
        } => {
            let cfg = SynthConfig {
                count,
                noise,
                seed,
                ..Default::default()
            };
            let manifest = generate_blob_dataset(&out, &cfg)?;
            println!("wrote {count} images and {}", manifest.display());
            Ok(())
        }

        Command::Split { manifest, seed, out } => {
            let m = load_manifest(&manifest)?;
            let plan = crate::data::build_partition_plan(&m, seed)?;
            plan.save(&out)?;
            println!(
                "wrote plan with {} divisions x {} splits to {}",
                plan.divisions.len(),
                plan.divisions[0].splits.len(),
                out.display()
            );
            Ok(())
        }

        Command::Train {
            manifest,
            plan,
            division,
            split,
            out,
            train,
        } => cmd_train(&manifest, &plan, division, split, &out, &train),

        Command::Experiment {
            manifest,
            plan,
            out,
            train,
        } => cmd_experiment(&manifest, &plan, &out, &train),

        Command::Evaluate {
            manifest,
            plan,
            runs,
            division,
            out,
        } => cmd_evaluate(&manifest, &plan, &runs, division, out.as_deref()),

        Command::Explain {
            runs,
            division,
            image,
            out,
            upscale,
        } => cmd_explain(&runs, division, &image, &out, upscale),
    }
}

fn one_based(idx: usize, count: usize, what: &str) -> Result<usize> {
    if idx == 0 || idx > count {
        return Err(Error::Config(format!(
            "{what} {idx} out of range 1..={count}"
        )));
    }
    Ok(idx - 1)
}

fn cmd_train(
    manifest_path: &Path,
    plan_path: &Path,
    division: usize,
    split: usize,
    out: &Path,
    args: &TrainArgs,
) -> Result<()> {
    let cfg = RunConfig::resolve(args)?;
    let manifest = load_manifest(manifest_path)?;
    let plan = PartitionPlan::load(plan_path)?;
    plan.check_invariants(manifest.len())?;
    let d = one_based(division, plan.divisions.len(), "division")?;
    let s = one_based(split, plan.divisions[d].splits.len(), "split")?;

    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let store = Arc::new(ImageStore::new(manifest));
    let pair = &plan.divisions[d].splits[s];

    let seed = crate::ensemble::member_seed(cfg.training.seed, d, s);
    let mut member_cfg = cfg.training;
    member_cfg.seed = seed;
    let mut model = build_model(&cfg.arch, seed)?;
    let mut stream = crate::data::BatchStream::new(
        Arc::clone(&store),
        pair.train.clone(),
        cfg.augmentation,
        member_cfg.batch_size,
        seed,
    )?;
    let val = crate::data::EvalSet::build(&store, &pair.validation, member_cfg.batch_size)?;
    let history = crate::training::train(&mut model, &mut stream, &val, &member_cfg)?;

    let ckpt = out.join("model.ckpt");
    save_checkpoint(&ckpt, &model, &CheckpointMeta::from_history(cfg.arch, seed, &history))?;
    let mut hist_csv = Vec::new();
    history
        .write_csv(&mut hist_csv)
        .map_err(|e| Error::io(out.join("history.csv"), e))?;
    std::fs::write(out.join("history.csv"), hist_csv)
        .map_err(|e| Error::io(out.join("history.csv"), e))?;
    println!(
        "trained {} division {division} split {split}: best epoch {} (val loss {:.4}); wrote {}",
        cfg.arch.name(),
        history.best_epoch + 1,
        history.val_loss[history.best_epoch],
        ckpt.display()
    );
    Ok(())
}

fn cmd_experiment(manifest_path: &Path, plan_path: &Path, out: &Path, args: &TrainArgs) -> Result<()> {
    let cfg = RunConfig::resolve(args)?;
    let manifest = load_manifest(manifest_path)?;
    let plan = PartitionPlan::load(plan_path)?;
    plan.check_invariants(manifest.len())?;

    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    // marker removed only on success, so partial outputs are labeled
    let marker = out.join("INCOMPLETE");
    std::fs::write(&marker, "experiment in progress or aborted\n")
        .map_err(|e| Error::io(&marker, e))?;

    let store = Arc::new(ImageStore::new(manifest));
    let report = run_experiment(
        &store,
        &plan,
        &cfg.arch,
        &cfg.training,
        cfg.augmentation,
        Some(out),
    )?;

    let csv_path = out.join("report.csv");
    let mut csv = Vec::new();
    report.write_csv(&mut csv).map_err(|e| Error::io(&csv_path, e))?;
    std::fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;

    let table_path = out.join("report.txt");
    let mut table = Vec::new();
    report.write_table(&mut table).map_err(|e| Error::io(&table_path, e))?;
    std::fs::write(&table_path, &table).map_err(|e| Error::io(&table_path, e))?;

    std::fs::remove_file(&marker).map_err(|e| Error::io(&marker, e))?;
    print!("{}", String::from_utf8_lossy(&table));
    println!("report written to {}", csv_path.display());
    Ok(())
}

/// Loads the five member checkpoints of one division directory.
pub fn load_division_ensemble(runs: &Path, division_zero_based: usize) -> Result<Ensemble> {
    let div_dir = runs.join(format!("division_{}", division_zero_based + 1));
    let mut members = Vec::with_capacity(ENSEMBLE_SIZE);
    let mut seeds = Vec::with_capacity(ENSEMBLE_SIZE);
    let mut arch = None;
    for s in 0..ENSEMBLE_SIZE {
        let path = div_dir.join(format!("split_{}", s + 1)).join("model.ckpt");
        let (model, meta) = load_checkpoint(&path)?;
        if let Some(a) = arch {
            if a != meta.arch {
                return Err(Error::Config(format!(
                    "member architectures disagree in {}",
                    div_dir.display()
                )));
            }
        }
        arch = Some(meta.arch);
        seeds.push(meta.seed);
        members.push(model);
    }
    Ensemble::new(arch.unwrap(), division_zero_based, members, seeds)
}

fn cmd_evaluate(
    manifest_path: &Path,
    plan_path: &Path,
    runs: &Path,
    division: usize,
    out: Option<&Path>,
) -> Result<()> {
    let manifest = load_manifest(manifest_path)?;
    let plan = PartitionPlan::load(plan_path)?;
    plan.check_invariants(manifest.len())?;
    let d = one_based(division, plan.divisions.len(), "division")?;

    let ensemble = load_division_ensemble(runs, d)?;
    let store = Arc::new(ImageStore::new(manifest));
    let test = crate::data::EvalSet::build(&store, &plan.divisions[d].test, 32)?;

    let per_member: Vec<Vec<crate::training::Prediction>> = ensemble
        .members
        .iter()
        .map(|m| predict_eval_set(m, &test))
        .collect::<Result<_>>()?;
    let mut csv = String::from("model,auc,tpr\n");
    for (i, preds) in per_member.iter().enumerate() {
        let row = score_predictions(preds, &test.label_indices)?;
        csv.push_str(&format!("member_{},{},{}\n", i + 1, row.auc, row.tpr));
    }
    let ens_preds = average_predictions(&per_member);
    let ens = score_predictions(&ens_preds, &test.label_indices)?;
    csv.push_str(&format!("ensemble,{},{}\n", ens.auc, ens.tpr));

    let out_dir = out.unwrap_or(&runs.join(format!("division_{}", d + 1))).to_path_buf();
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let path = out_dir.join("evaluation.csv");
    std::fs::write(&path, &csv).map_err(|e| Error::io(&path, e))?;
    print!("{csv}");
    println!("evaluation written to {}", path.display());
    Ok(())
}

fn cmd_explain(runs: &Path, division: usize, image: &Path, out: &Path, upscale: usize) -> Result<()> {
    let d = division
        .checked_sub(1)
        .ok_or_else(|| Error::Config("division is 1-based".into()))?;
    let ensemble = load_division_ensemble(runs, d)?;
    let artifacts = crate::xai::explain(&ensemble, image, out, upscale)?;
    println!(
        "p(non_consolidation) = {:.4}, p(consolidation) = {:.4}",
        artifacts.prediction.probs[0], artifacts.prediction.probs[1]
    );
    println!("artifacts written to {}", out.display());
    Ok(())
}
