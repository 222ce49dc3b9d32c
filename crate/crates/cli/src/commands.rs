use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use grasp_core::augment::{self, AugmentSpec};
use grasp_core::checkpoint::Checkpoint;
use grasp_core::dataset::{self, DatasetSplit};
use grasp_core::features::{self, TOY_DEFAULT_DIM};
use grasp_core::geometry::SuccessCriteria;
use grasp_core::pipeline::{
    self, synthetic, DataStats, EvalReport, ExtractorChoice, FeatureSource, Item, RunReport,
    TrainConfig, TrainingData,
};
use grasp_core::preprocess::{compose_input, ResizeTransform};
use grasp_core::render;
use grasp_core::Error;

use crate::args::*;
use crate::config::ConfigFile;
use crate::error::CliError;

/// Every key a config file may set.
const CONFIG_KEYS: &[&str] = &[
    "data",
    "synthetic",
    "extractor",
    "features",
    "toy-dim",
    "toy-seed",
    "seed",
    "epochs",
    "batches-per-epoch",
    "batch-size",
    "val-batches",
    "val-batch-size",
    "split-ratio",
    "lr",
    "dropout",
    "hidden",
    "output-activation",
    "rotations",
    "zooms",
    "families",
    "no-augment",
    "checkpoint",
    "split",
    "subset",
    "runs",
    "seeds",
    "id",
    "out",
];

enum Source {
    Dir(PathBuf),
    Synthetic(usize),
}

fn parse_enum<T: clap::ValueEnum>(flag: Option<T>, file: &ConfigFile, key: &str) -> Result<Option<T>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match file.pick::<String>(None, key)? {
        None => Ok(None),
        Some(v) => T::from_str(&v, true)
            .map(Some)
            .map_err(|e| CliError::usage(format!("--{key}: {e}"))),
    }
}

fn required<T>(value: Option<T>, flag: &str, why: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::usage(format!("missing required flag {flag}{why}")))
}

fn resolve_source(args: &DataArgs, file: &ConfigFile) -> Result<Source, CliError> {
    let data = file.pick(args.data.clone(), "data")?;
    let synthetic = file.pick(args.synthetic, "synthetic")?;
    match (data, synthetic) {
        (Some(_), Some(_)) => Err(CliError::usage("--data and --synthetic are mutually exclusive")),
        (Some(d), None) => Ok(Source::Dir(d)),
        (None, Some(n)) => Ok(Source::Synthetic(n)),
        (None, None) => Err(CliError::usage(
            "missing required flag --data (or --synthetic N for a generated task)",
        )),
    }
}

fn resolve_extractor(args: &ExtractorArgs, file: &ConfigFile) -> Result<ExtractorChoice, CliError> {
    let kind = parse_enum(args.extractor, file, "extractor")?.unwrap_or(ExtractorKind::Toy);
    let features = file.pick(args.features.clone(), "features")?;
    Ok(match kind {
        ExtractorKind::Toy => {
            if features.is_some() {
                return Err(CliError::usage("--features needs --extractor features-file"));
            }
            ExtractorChoice::Toy {
                dim: file.pick(args.toy_dim, "toy-dim")?.unwrap_or(TOY_DEFAULT_DIM),
                seed: file.pick(args.toy_seed, "toy-seed")?.unwrap_or(0),
            }
        }
        ExtractorKind::FeaturesFile => ExtractorChoice::FeaturesFile {
            path: required(features, "--features", " (needed by --extractor features-file)")?,
        },
    })
}

fn resolve_augment(args: &AugmentArgs, file: &ConfigFile) -> Result<AugmentSpec, CliError> {
    if file.flag(args.no_augment, "no-augment")? {
        return Ok(AugmentSpec::identity());
    }
    let defaults = AugmentSpec::default();
    let spec = AugmentSpec {
        rotations: match file.pick(args.rotations.clone(), "rotations")? {
            Some(NumList(degrees)) => degrees.iter().map(|d| d * PI / 180.0).collect(),
            None => defaults.rotations,
        },
        zooms: file.pick(args.zooms.clone(), "zooms")?.map(|l| l.0).unwrap_or(defaults.zooms),
        families: file.pick(args.families, "families")?.unwrap_or(defaults.families),
    };
    spec.validate()
        .map_err(|e| CliError::usage(format!("--rotations/--zooms: {e}")))?;
    Ok(spec)
}

fn resolve_train(
    args: &TrainArgs,
    extractor: ExtractorChoice,
    file: &ConfigFile,
) -> Result<TrainConfig, CliError> {
    let d = TrainConfig::default();
    let mut adam = d.adam;
    adam.lr = file.pick(args.lr, "lr")?.unwrap_or(adam.lr);
    let config = TrainConfig {
        batch_size: file.pick(args.batch_size, "batch-size")?.unwrap_or(d.batch_size),
        batches_per_epoch: file
            .pick(args.batches_per_epoch, "batches-per-epoch")?
            .unwrap_or(d.batches_per_epoch),
        epochs: file.pick(args.epochs, "epochs")?.unwrap_or(d.epochs),
        split_ratio: file.pick(args.split_ratio, "split-ratio")?.unwrap_or(d.split_ratio),
        val_batch_size: file.pick(args.val_batch_size, "val-batch-size")?.unwrap_or(d.val_batch_size),
        val_batches: file.pick(args.val_batches, "val-batches")?.unwrap_or(d.val_batches),
        seed: file.pick(args.seed, "seed")?.unwrap_or(d.seed),
        augment: resolve_augment(&args.augment, file)?,
        extractor,
        adam,
        dropout_p: file.pick(args.dropout, "dropout")?.unwrap_or(d.dropout_p),
        hidden: file.pick(args.hidden, "hidden")?.unwrap_or(d.hidden),
        output_activation: file
            .pick(args.output_activation, "output-activation")?
            .unwrap_or(d.output_activation),
        criteria: SuccessCriteria::default(),
    };
    config.validate().map_err(|e| match e {
        Error::InvalidConfig(m) => CliError::usage(flagify(&m)),
        other => other.into(),
    })?;
    Ok(config)
}

/// Config fields as they appear in validation messages, and their flags.
const FIELD_FLAGS: &[(&str, &str)] = &[
    ("batch_size", "--batch-size"),
    ("batches_per_epoch", "--batches-per-epoch"),
    ("epochs", "--epochs"),
    ("val_batch_size", "--val-batch-size"),
    ("val_batches", "--val-batches"),
    ("hidden", "--hidden"),
    ("split_ratio", "--split-ratio"),
    ("dropout", "--dropout"),
    ("lr", "--lr"),
    ("toy feature dim", "--toy-dim"),
];

/// Rewrites `batch_size must ...` as `--batch-size must ...`.
fn flagify(message: &str) -> String {
    for (field, flag) in FIELD_FLAGS {
        if let Some(rest) = message.strip_prefix(field) {
            if rest.starts_with(' ') {
                return format!("{flag}{rest}");
            }
        }
    }
    message.to_string()
}

fn out_dir(out: Option<PathBuf>, file: &ConfigFile) -> Result<PathBuf, CliError> {
    let out = required(file.pick(out, "out")?, "--out", "")?;
    fs::create_dir_all(&out).map_err(|e| CliError::data(format!("{}: {e}", out.display())))?;
    Ok(out)
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn synthetic_data(n: usize, extractor: &ExtractorChoice, split_ratio: f64) -> Result<TrainingData, CliError> {
    match extractor {
        ExtractorChoice::Toy { dim, seed } => Ok(synthetic::linear_task(n, *seed, *dim, split_ratio)?),
        ExtractorChoice::FeaturesFile { .. } => {
            Err(CliError::usage("--synthetic works with the toy extractor only"))
        }
    }
}

fn load_training_data(source: &Source, config: &TrainConfig) -> Result<TrainingData, CliError> {
    match source {
        Source::Synthetic(n) => synthetic_data(*n, &config.extractor, config.split_ratio),
        Source::Dir(root) => {
            let features = FeatureSource::from_choice(&config.extractor)?;
            Ok(pipeline::load_dataset(root, config, &features)?)
        }
    }
}

fn print_stats(stats: &DataStats) {
    let fields = [
        ("samples loaded", stats.samples_loaded),
        ("samples without labels", stats.samples_without_labels),
        ("samples without depth", stats.depth_missing),
        ("non-finite rectangles skipped", stats.nonfinite_rects),
        ("degenerate rectangles skipped", stats.degenerate_rects),
        ("labels dropped by augmentation", stats.labels_dropped),
        ("variants dropped", stats.variants_dropped),
        ("items without features", stats.missing_features),
    ];
    for (name, n) in fields.iter().filter(|(_, n)| *n > 0) {
        eprintln!("{name}: {n}");
    }
}

fn run_training(
    source: &Source,
    config: &TrainConfig,
) -> Result<(pipeline::TrainOutcome, DatasetSplit), CliError> {
    let data = load_training_data(source, config)?;
    print_stats(&data.stats);
    eprintln!(
        "{}: {} training items, {} validation items, dim {}",
        data.backbone,
        data.train.len(),
        data.val.len(),
        data.dim
    );
    let outcome = pipeline::train_with_progress(config, &data, |e| {
        eprintln!(
            "epoch {:>3}  train {:.6}  val {:.6}  ({:.1}s)",
            e.epoch, e.train_loss, e.val_loss, e.seconds
        );
    })?;
    if outcome.report.missed_train_sources > 0 {
        eprintln!(
            "warning: {} training samples were never drawn",
            outcome.report.missed_train_sources
        );
    }
    Ok((outcome, data.split))
}

pub fn train(cmd: TrainCmd) -> Result<(), CliError> {
    let file = ConfigFile::load(cmd.data.config.as_deref(), CONFIG_KEYS)?;
    let source = resolve_source(&cmd.data, &file)?;
    let extractor = resolve_extractor(&cmd.extractor, &file)?;
    let config = resolve_train(&cmd.train, extractor, &file)?;
    let out = out_dir(cmd.out, &file)?;

    let (outcome, split) = run_training(&source, &config)?;

    outcome.checkpoint.save(&out.join("checkpoint.bin"))?;
    let json = serde_json::to_string_pretty(&outcome.report).expect("report serializes");
    write(&out.join("report.json"), json + "\n")?;
    write(&out.join("loss.csv"), pipeline::report(std::slice::from_ref(&outcome.report))?.loss_csv)?;
    split.write(&out.join("split.txt"))?;
    write(&out.join("verdicts.csv"), outcome.evaluation.verdict_csv())?;
    println!("accuracy {:.4}", outcome.report.accuracy);
    println!("wrote {}", out.display());
    Ok(())
}

fn subset_ids(split: &DatasetSplit, subset: Subset) -> Vec<String> {
    match subset {
        Subset::Train => split.train_ids.clone(),
        Subset::Val => split.val_ids.clone(),
        Subset::All => split.train_ids.iter().chain(&split.val_ids).cloned().collect(),
    }
}

fn eval_items(
    source: &Source,
    extractor: &ExtractorChoice,
    split_path: Option<&Path>,
    subset: Option<Subset>,
    split_ratio: f64,
) -> Result<Vec<Item>, CliError> {
    match source {
        Source::Synthetic(n) => {
            let data = synthetic_data(*n, extractor, split_ratio)?;
            Ok(match subset.unwrap_or(Subset::Val) {
                Subset::Train => data.train,
                Subset::Val => data.val,
                Subset::All => data.train.into_iter().chain(data.val).collect(),
            })
        }
        Source::Dir(root) => {
            let ids = match split_path {
                Some(p) => subset_ids(&DatasetSplit::read(p)?, subset.unwrap_or(Subset::Val)),
                None if subset.is_some() => {
                    return Err(CliError::usage("--subset needs --split"));
                }
                None => dataset::scan_dataset(root)?,
            };
            let features = FeatureSource::from_choice(extractor)?;
            let (items, stats) = pipeline::load_eval_items(root, &ids, &features)?;
            print_stats(&stats);
            Ok(items)
        }
    }
}

fn print_eval(report: &EvalReport) {
    println!("accuracy {:.4}", report.accuracy);
    println!("{} of {} samples succeeded", report.successes, report.total);
}

pub fn eval(cmd: EvalCmd) -> Result<(), CliError> {
    let file = ConfigFile::load(cmd.data.config.as_deref(), CONFIG_KEYS)?;
    let source = resolve_source(&cmd.data, &file)?;
    let extractor = resolve_extractor(&cmd.extractor, &file)?;
    let out = out_dir(cmd.out.clone(), &file)?;
    let runs = file.pick(cmd.runs, "runs")?;
    let checkpoint = file.pick(cmd.checkpoint.clone(), "checkpoint")?;

    match (checkpoint, runs) {
        (Some(_), Some(_)) => Err(CliError::usage("--checkpoint and --runs are mutually exclusive")),
        (None, None) => Err(CliError::usage(
            "missing required flag --checkpoint (or --runs N to train and report several seeds)",
        )),
        (Some(path), None) => {
            let split = file.pick(cmd.split.clone(), "split")?;
            let subset = parse_enum(cmd.subset, &file, "subset")?;
            let ratio = file.pick(cmd.train.split_ratio, "split-ratio")?.unwrap_or(0.9);
            let ckpt = Checkpoint::load(&path)?;
            let items = eval_items(&source, &extractor, split.as_deref(), subset, ratio)?;
            let report = pipeline::evaluate(&ckpt.head, &items, SuccessCriteria::default())
                .map_err(|e| match e {
                    Error::DimMismatch { expected, actual } => CliError::data(format!(
                        "dimension mismatch: checkpoint expects {expected}-dim features, feature source provides {actual}"
                    )),
                    other => other.into(),
                })?;
            write(&out.join("verdicts.csv"), report.verdict_csv())?;
            print_eval(&report);
            Ok(())
        }
        (None, Some(n)) => {
            if n == 0 {
                return Err(CliError::usage("--runs must be positive"));
            }
            let seeds = match file.pick(cmd.seeds.clone(), "seeds")? {
                Some(SeedList(s)) if s.len() != n => {
                    return Err(CliError::usage(format!(
                        "--seeds lists {} seeds but --runs is {n}",
                        s.len()
                    )))
                }
                Some(SeedList(s)) => s,
                None => (0..n as u64).collect(),
            };
            let base = resolve_train(&cmd.train, extractor, &file)?;
            let mut reports: Vec<RunReport> = Vec::with_capacity(n);
            for seed in seeds {
                eprintln!("run with seed {seed}");
                let config = TrainConfig { seed, ..base.clone() };
                let (outcome, _) = run_training(&source, &config)?;
                println!("seed {seed}: accuracy {:.4}", outcome.report.accuracy);
                reports.push(outcome.report);
            }
            let summary = pipeline::report(&reports)?;
            print!("{}", summary.table);
            write(&out.join("table.txt"), &summary.table)?;
            write(&out.join("loss.csv"), &summary.loss_csv)?;
            let json = serde_json::to_string_pretty(&reports).expect("reports serialize");
            write(&out.join("runs.json"), json + "\n")?;
            Ok(())
        }
    }
}

pub fn augment(cmd: AugmentCmd) -> Result<(), CliError> {
    let file = ConfigFile::load(cmd.config.as_deref(), CONFIG_KEYS)?;
    let root = required(file.pick(cmd.data.clone(), "data")?, "--data", "")?;
    let id = required(file.pick(cmd.id.clone(), "id")?, "--id", "")?;
    let spec = resolve_augment(&cmd.augment, &file)?;
    let out = if cmd.preview {
        Some(out_dir(cmd.out.clone(), &file)?)
    } else {
        None
    };

    let sample = dataset::load_sample(&root, &id)?;
    let (input, resize) = compose_input(&sample);
    let labels: Vec<_> = sample
        .pos_rects
        .iter()
        .filter_map(|r| resize.map_rect(r).ok())
        .collect();
    let (mut emitted, mut dropped) = (0, 0);
    for v in spec.variants() {
        let (img, kept, lost) = augment::apply_variant(&input, &labels, &v);
        println!(
            "{}  rotation {:>6.1}  zoom {:.2}  labels kept {:>3}  dropped {:>3}",
            v.tag(),
            v.angle.to_degrees(),
            v.zoom,
            kept.len(),
            lost
        );
        if kept.is_empty() {
            dropped += 1;
            continue;
        }
        emitted += 1;
        if let Some(out) = &out {
            let picture = render::annotate(&render::net_input_to_rgb(&img), &kept, None);
            render::save_png(&picture, &out.join(format!("{id}_{}.png", v.tag())))?;
        }
    }
    println!("{emitted} variants emitted, {dropped} dropped");
    Ok(())
}

pub fn features(cmd: FeaturesCmd) -> Result<(), CliError> {
    match cmd {
        FeaturesCmd::Validate { file } => {
            let s = features::validate_feature_file(&file)?;
            println!("backbone {}", s.backbone);
            println!("dim {}", s.dim);
            println!("count {}", s.count);
            println!("sha256 {}", s.checksum);
            Ok(())
        }
    }
}

pub fn render(cmd: RenderCmd) -> Result<(), CliError> {
    let file = ConfigFile::load(cmd.config.as_deref(), CONFIG_KEYS)?;
    let root = required(file.pick(cmd.data.clone(), "data")?, "--data", "")?;
    let id = required(file.pick(cmd.id.clone(), "id")?, "--id", "")?;
    let checkpoint = file.pick(cmd.checkpoint.clone(), "checkpoint")?;
    let extractor = resolve_extractor(&cmd.extractor, &file)?;
    let out = out_dir(cmd.out, &file)?;

    let sample = dataset::load_sample(&root, &id)?;
    let path = match checkpoint {
        None => {
            let picture = render::annotate(&sample.rgb, &sample.pos_rects, None);
            let path = out.join(format!("{id}.png"));
            render::save_png(&picture, &path)?;
            path
        }
        Some(ckpt_path) => {
            let ckpt = Checkpoint::load(&ckpt_path)?;
            let features = FeatureSource::from_choice(&extractor)?;
            let mut stats = DataStats::default();
            let items = pipeline::sample_items(&sample, 0, &features, None, &mut stats);
            let Some(item) = items.first() else {
                return Err(CliError::data(format!(
                    "sample {id} has no usable labels or features"
                )));
            };
            let report = pipeline::evaluate(&ckpt.head, std::slice::from_ref(item), SuccessCriteria::default())?;
            let verdict = &report.verdicts[0];
            let resize = ResizeTransform::for_size(sample.width(), sample.height());
            let prediction = resize.unmap_rect(&verdict.prediction)?;
            let picture = render::annotate(
                &sample.rgb,
                &sample.pos_rects,
                Some((&prediction, Some(verdict.success))),
            );
            let suffix = if verdict.success { "ok" } else { "fail" };
            let path = out.join(format!("{id}_{suffix}.png"));
            render::save_png(&picture, &path)?;
            println!(
                "{}: jaccard {:.3}, angle difference {:.1} deg",
                if verdict.success { "success" } else { "failure" },
                verdict.jaccard,
                verdict.angle_diff.to_degrees()
            );
            path
        }
    };
    println!("wrote {}", path.display());
    Ok(())
}
