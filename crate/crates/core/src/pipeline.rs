//! Training and evaluation orchestration.
//!
//! Data flows `Sample -> NetInput (+ labels in the 224 frame) -> augmented
//! variants -> features -> Item`. Training draws batches with replacement
//! from the item stream, picks one ground truth per draw, and runs Adam on
//! the MSE against the normalized target. Every random stream is derived
//! from the configured seed, so reports are bit-reproducible apart from the
//! wall-clock column.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{self, AugmentSpec, Variant};
use crate::checkpoint::Checkpoint;
use crate::dataset::{self, DatasetSplit, Sample};
use crate::error::{Error, Result};
use crate::features::{FeatureSet, ToyExtractor, TOY_DEFAULT_DIM};
use crate::geometry::{is_success, GraspRect, SuccessCriteria};
use crate::plane::Plane;
use crate::preprocess::{
    compose_input, denormalize_target, normalize_channel, normalize_target, NetInput,
    NormTargetVec, FRAME,
};
use crate::regressor::{
    adam_step, batch_loss, init_params, AdamConfig, AdamState, DenseHead, HeadDims, Matrix, Mode,
    OutputActivation, DEFAULT_DROPOUT, DEFAULT_HIDDEN, OUTPUT_DIM,
};

/// Where features come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtractorChoice {
    /// `seed` fixes the projection, so it plays the role of frozen backbone
    /// weights and is independent of the run seed.
    Toy { dim: usize, seed: u64 },
    FeaturesFile { path: PathBuf },
}

impl Default for ExtractorChoice {
    fn default() -> Self {
        ExtractorChoice::Toy {
            dim: TOY_DEFAULT_DIM,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub batches_per_epoch: usize,
    pub epochs: usize,
    pub split_ratio: f64,
    pub val_batch_size: usize,
    pub val_batches: usize,
    pub seed: u64,
    pub augment: AugmentSpec,
    pub extractor: ExtractorChoice,
    pub adam: AdamConfig,
    pub dropout_p: f64,
    pub hidden: usize,
    pub output_activation: OutputActivation,
    pub criteria: SuccessCriteria,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            batches_per_epoch: 100,
            epochs: 25,
            split_ratio: 0.9,
            val_batch_size: 10,
            val_batches: 100,
            seed: 0,
            augment: AugmentSpec::default(),
            extractor: ExtractorChoice::default(),
            adam: AdamConfig::default(),
            dropout_p: DEFAULT_DROPOUT,
            hidden: DEFAULT_HIDDEN,
            output_activation: OutputActivation::Linear,
            criteria: SuccessCriteria::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("batch_size", self.batch_size),
            ("batches_per_epoch", self.batches_per_epoch),
            ("epochs", self.epochs),
            ("val_batch_size", self.val_batch_size),
            ("val_batches", self.val_batches),
            ("hidden", self.hidden),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(format!("{name} must be positive")));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "split_ratio must lie in (0, 1), got {}",
                self.split_ratio
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::InvalidConfig(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout_p
            )));
        }
        if !(self.adam.lr > 0.0 && self.adam.lr.is_finite()) {
            return Err(Error::InvalidConfig(format!("lr must be positive, got {}", self.adam.lr)));
        }
        if let ExtractorChoice::Toy { dim: 0, .. } = self.extractor {
            return Err(Error::InvalidConfig("toy feature dim must be positive".into()));
        }
        self.augment.validate()
    }
}

/// Feature provider for composed inputs.
#[derive(Debug, Clone)]
pub enum FeatureSource {
    Toy(ToyExtractor),
    File(FeatureSet),
}

impl FeatureSource {
    pub fn from_choice(choice: &ExtractorChoice) -> Result<Self> {
        Ok(match choice {
            ExtractorChoice::Toy { dim, seed } => FeatureSource::Toy(ToyExtractor::new(*seed, *dim)),
            ExtractorChoice::FeaturesFile { path } => {
                FeatureSource::File(crate::features::load_features(path)?)
            }
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            FeatureSource::Toy(t) => t.dim(),
            FeatureSource::File(f) => f.dim,
        }
    }

    pub fn name(&self) -> String {
        match self {
            FeatureSource::Toy(t) => t.name(),
            FeatureSource::File(f) => f.backbone.clone(),
        }
    }

    /// Features for one composed (and possibly augmented) input. Feature
    /// files are looked up by `key`; an unaugmented input may also be found
    /// under its bare sample id.
    pub fn features(&self, key: &str, id: &str, input: &NetInput, identity: bool) -> Option<Vec<f64>> {
        match self {
            FeatureSource::Toy(t) => Some(t.extract(input).into_values()),
            FeatureSource::File(f) => f
                .get(key)
                .or_else(|| identity.then(|| f.get(id)).flatten())
                .map(|v| v.values().to_vec()),
        }
    }

    /// File sources never need the pixels of augmented variants they lack.
    fn has_key(&self, key: &str, id: &str, identity: bool) -> bool {
        match self {
            FeatureSource::Toy(_) => true,
            FeatureSource::File(f) => f.get(key).is_some() || (identity && f.get(id).is_some()),
        }
    }
}

/// One training/evaluation record.
#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    /// Sample id, suffixed `/rXzY` for augmented variants.
    pub key: String,
    /// Index of the source sample within its split.
    pub source: usize,
    pub features: Vec<f64>,
    /// Normalized candidates for the training label draw.
    pub targets: Vec<NormTargetVec>,
    /// Ground truths in the 224 frame, for the rectangle metric.
    pub truths: Vec<GraspRect>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataStats {
    pub samples_loaded: usize,
    pub samples_without_labels: usize,
    pub depth_missing: usize,
    pub nonfinite_rects: usize,
    pub degenerate_rects: usize,
    pub labels_unmappable: usize,
    pub labels_out_of_frame: usize,
    pub labels_dropped: usize,
    pub variants_emitted: usize,
    pub variants_dropped: usize,
    pub missing_features: usize,
}

#[derive(Debug, Clone)]
pub struct TrainingData {
    pub backbone: String,
    pub dim: usize,
    pub train: Vec<Item>,
    pub val: Vec<Item>,
    pub split: DatasetSplit,
    pub stats: DataStats,
}

fn item_key(id: &str, variant: &Variant) -> String {
    if variant.is_identity() {
        id.to_string()
    } else {
        format!("{id}/{}", variant.tag())
    }
}

/// Composes the sample, maps labels into the 224 frame and emits one item
/// per surviving variant (`augment = None` keeps only the original).
pub fn sample_items(
    sample: &Sample,
    source_index: usize,
    features: &FeatureSource,
    augment: Option<&AugmentSpec>,
    stats: &mut DataStats,
) -> Vec<Item> {
    let (input, resize) = compose_input(sample);
    let mut labels = Vec::with_capacity(sample.pos_rects.len());
    for r in &sample.pos_rects {
        match resize.map_rect(r) {
            Ok(m) => labels.push(m),
            Err(_) => stats.labels_unmappable += 1,
        }
    }
    let variants = match augment {
        Some(spec) => spec.variants(),
        None => AugmentSpec::identity().variants(),
    };
    let mut items = Vec::new();
    for v in &variants {
        let key = item_key(&sample.id, v);
        if !features.has_key(&key, &sample.id, v.is_identity()) {
            stats.missing_features += 1;
            continue;
        }
        let truths: Vec<GraspRect> = labels
            .iter()
            .filter_map(|l| augment::apply_to_label(l, v))
            .collect();
        stats.labels_dropped += labels.len() - truths.len();
        if truths.is_empty() {
            stats.variants_dropped += 1;
            continue;
        }
        let mut targets = Vec::with_capacity(truths.len());
        for t in &truths {
            match normalize_target(t) {
                Ok(n) => targets.push(n),
                Err(_) => stats.labels_out_of_frame += 1,
            }
        }
        let image = augment::apply_to_image(&input, v);
        let Some(f) = features.features(&key, &sample.id, &image, v.is_identity()) else {
            stats.missing_features += 1;
            continue;
        };
        stats.variants_emitted += 1;
        items.push(Item {
            key,
            source: source_index,
            features: f,
            targets,
            truths,
        });
    }
    items
}

fn load_items(
    root: &Path,
    ids: &[String],
    features: &FeatureSource,
    augment: Option<&AugmentSpec>,
    stats: &mut DataStats,
) -> Result<Vec<Item>> {
    let mut items = Vec::new();
    for (i, id) in ids.iter().enumerate() {
        let sample = dataset::load_sample(root, id)?;
        stats.samples_loaded += 1;
        stats.nonfinite_rects += sample.stats.nonfinite_rects;
        stats.degenerate_rects += sample.stats.degenerate_rects;
        stats.depth_missing += usize::from(sample.depth_missing);
        if sample.pos_rects.is_empty() {
            stats.samples_without_labels += 1;
            continue;
        }
        items.extend(sample_items(&sample, i, features, augment, stats));
    }
    Ok(items)
}

/// Scans, splits and featurizes a Cornell-layout directory. Training
/// samples are augmented per the config; validation samples are not.
pub fn load_dataset(root: &Path, config: &TrainConfig, features: &FeatureSource) -> Result<TrainingData> {
    let ids = dataset::scan_dataset(root)?;
    let split = dataset::split(&ids, config.split_ratio, config.seed)?;
    let mut stats = DataStats::default();
    let train = load_items(root, &split.train_ids, features, Some(&config.augment), &mut stats)?;
    let val = load_items(root, &split.val_ids, features, None, &mut stats)?;
    Ok(TrainingData {
        backbone: features.name(),
        dim: features.dim(),
        train,
        val,
        split,
        stats,
    })
}

/// Unaugmented items for the given ids, for evaluation and rendering.
pub fn load_eval_items(root: &Path, ids: &[String], features: &FeatureSource) -> Result<(Vec<Item>, DataStats)> {
    let mut stats = DataStats::default();
    let items = load_items(root, ids, features, None, &mut stats)?;
    Ok((items, stats))
}

/// Mixes a run seed with stream tags (splitmix64 finalizer).
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    let mut z = seed;
    for &t in tags {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(t.wrapping_mul(0xD1B5_4A32_D192_ED03));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

const STREAM_SAMPLER: u64 = 1;
const STREAM_LABELS: u64 = 2;
const STREAM_DROPOUT: u64 = 3;
const STREAM_VAL: u64 = 4;
const STREAM_INIT: u64 = 5;

/// Uniform with-replacement draws of item indices.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    rng: ChaCha8Rng,
}

impl BatchSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(derive_seed(seed, &[STREAM_SAMPLER])),
        }
    }

    pub fn next_batch(&mut self, n_items: usize, batch_size: usize) -> Vec<usize> {
        (0..batch_size).map(|_| self.rng.gen_range(0..n_items)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub backbone: String,
    pub seed: u64,
    pub epochs: usize,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Rectangle-metric accuracy on the validation items after training.
    pub accuracy: f64,
    pub train_items: usize,
    pub val_items: usize,
    pub data: DataStats,
    /// Training sources never drawn in any batch.
    pub missed_train_sources: usize,
    pub epoch_seconds: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub report: RunReport,
    pub checkpoint: Checkpoint,
    pub evaluation: EvalReport,
}

fn feature_matrix(items: &[Item], indices: &[usize], dim: usize) -> Matrix {
    let mut x = Matrix::zeros(indices.len(), dim);
    for (r, &i) in indices.iter().enumerate() {
        x.row_mut(r).copy_from_slice(&items[i].features);
    }
    x
}

fn check_dims(items: &[Item], dim: usize) -> Result<()> {
    match items.iter().find(|it| it.features.len() != dim) {
        Some(it) => Err(Error::DimMismatch {
            expected: dim,
            actual: it.features.len(),
        }),
        None => Ok(()),
    }
}

/// Per-epoch figures handed to a progress callback.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochSummary {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub seconds: f64,
}

/// Runs the full training schedule on prepared items.
pub fn train(config: &TrainConfig, data: &TrainingData) -> Result<TrainOutcome> {
    train_with_progress(config, data, |_| {})
}

pub fn train_with_progress(
    config: &TrainConfig,
    data: &TrainingData,
    mut progress: impl FnMut(EpochSummary),
) -> Result<TrainOutcome> {
    config.validate()?;
    let trainable: Vec<usize> = (0..data.train.len())
        .filter(|&i| !data.train[i].targets.is_empty())
        .collect();
    if trainable.is_empty() {
        return Err(Error::EmptyDataset {
            root: PathBuf::from("the training split"),
        });
    }
    let val: Vec<usize> = (0..data.val.len())
        .filter(|&i| !data.val[i].targets.is_empty())
        .collect();
    if val.is_empty() {
        return Err(Error::InvalidConfig(
            "validation split has no labelled items; lower split_ratio or add samples".into(),
        ));
    }
    check_dims(&data.train, data.dim)?;
    check_dims(&data.val, data.dim)?;

    let dims = HeadDims {
        input: data.dim,
        hidden1: config.hidden,
        hidden2: config.hidden,
    };
    let mut head = init_params(dims, derive_seed(config.seed, &[STREAM_INIT]))?;
    head.dropout_p = config.dropout_p;
    head.output_activation = config.output_activation;
    let mut adam = AdamState::new(&head, config.adam);

    let mut sampler = BatchSampler::new(config.seed);
    let mut label_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[STREAM_LABELS]));

    // validation labels and batches are fixed once so epochs are comparable
    let mut val_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[STREAM_VAL]));
    let val_targets: Vec<[f64; OUTPUT_DIM]> = val
        .iter()
        .map(|&i| {
            let t = &data.val[i].targets;
            t[val_rng.gen_range(0..t.len())].to_array()
        })
        .collect();
    let val_batches: Vec<Vec<usize>> = (0..config.val_batches)
        .map(|_| {
            (0..config.val_batch_size)
                .map(|_| val_rng.gen_range(0..val.len()))
                .collect()
        })
        .collect();

    let mut drawn_sources = HashSet::new();
    let mut report = RunReport {
        backbone: data.backbone.clone(),
        seed: config.seed,
        epochs: config.epochs,
        train_loss: Vec::with_capacity(config.epochs),
        val_loss: Vec::with_capacity(config.epochs),
        accuracy: 0.0,
        train_items: trainable.len(),
        val_items: val.len(),
        data: data.stats,
        missed_train_sources: 0,
        epoch_seconds: Vec::with_capacity(config.epochs),
    };

    for epoch in 0..config.epochs {
        let started = std::time::Instant::now();
        head.mode = Mode::Train;
        let mut epoch_loss = 0.0;
        for batch in 0..config.batches_per_epoch {
            let picks: Vec<usize> = sampler
                .next_batch(trainable.len(), config.batch_size)
                .into_iter()
                .map(|k| trainable[k])
                .collect();
            let mut targets = Matrix::zeros(picks.len(), OUTPUT_DIM);
            for (r, &i) in picks.iter().enumerate() {
                let item = &data.train[i];
                drawn_sources.insert(item.source);
                let t = dataset::pick_from(&item.targets, &mut label_rng)?;
                targets.row_mut(r).copy_from_slice(&t.to_array());
            }
            let x = feature_matrix(&data.train, &picks, data.dim);
            let mut dropout_rng = ChaCha8Rng::seed_from_u64(derive_seed(
                config.seed,
                &[STREAM_DROPOUT, epoch as u64, batch as u64],
            ));
            let (out, cache) = head.forward(&x, &mut dropout_rng)?;
            let loss = batch_loss(&out, &targets);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch });
            }
            let grads = head.backward(cache, &targets)?;
            adam_step(&mut head, &grads, &mut adam)?;
            epoch_loss += loss;
        }
        report.train_loss.push(epoch_loss / config.batches_per_epoch as f64);

        head.mode = Mode::Eval;
        let mut val_loss = 0.0;
        for batch in &val_batches {
            let rows: Vec<usize> = batch.iter().map(|&k| val[k]).collect();
            let x = feature_matrix(&data.val, &rows, data.dim);
            let mut targets = Matrix::zeros(rows.len(), OUTPUT_DIM);
            for (r, &k) in batch.iter().enumerate() {
                targets.row_mut(r).copy_from_slice(&val_targets[k]);
            }
            let (out, _) = head.forward_with_masks(&x, [None, None])?;
            val_loss += batch_loss(&out, &targets);
        }
        report.val_loss.push(val_loss / val_batches.len() as f64);
        report.epoch_seconds.push(started.elapsed().as_secs_f64());
        progress(EpochSummary {
            epoch: epoch + 1,
            train_loss: report.train_loss[epoch],
            val_loss: report.val_loss[epoch],
            seconds: report.epoch_seconds[epoch],
        });
    }

    let sources: HashSet<usize> = trainable.iter().map(|&i| data.train[i].source).collect();
    report.missed_train_sources = sources.difference(&drawn_sources).count();

    let evaluation = evaluate(&head, &data.val, config.criteria)?;
    report.accuracy = evaluation.accuracy;
    Ok(TrainOutcome {
        report,
        checkpoint: Checkpoint::new(head, adam),
        evaluation,
    })
}

/// Something that maps an item to a raw 6-D network output.
pub trait Predictor {
    fn predict_item(&self, item: &Item) -> Result<[f64; OUTPUT_DIM]>;
}

impl Predictor for DenseHead {
    fn predict_item(&self, item: &Item) -> Result<[f64; OUTPUT_DIM]> {
        self.predict(&item.features)
    }
}

impl<F> Predictor for F
where
    F: Fn(&Item) -> Result<[f64; OUTPUT_DIM]>,
{
    fn predict_item(&self, item: &Item) -> Result<[f64; OUTPUT_DIM]> {
        self(item)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleVerdict {
    pub key: String,
    pub success: bool,
    pub best_index: Option<usize>,
    pub jaccard: f64,
    pub angle_diff: f64,
    pub output: [f64; OUTPUT_DIM],
    pub prediction: GraspRect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub successes: usize,
    pub total: usize,
    pub verdicts: Vec<SampleVerdict>,
}

impl EvalReport {
    /// `key,success,best_index,jaccard,angle_deg,x,y,theta,w,h`
    pub fn verdict_csv(&self) -> String {
        let mut out = String::from("key,success,best_index,jaccard,angle_deg,x,y,theta,w,h\n");
        for v in &self.verdicts {
            let p = &v.prediction;
            let _ = writeln!(
                out,
                "{},{},{},{:.6},{:.4},{:.4},{:.4},{:.6},{:.4},{:.4}",
                v.key,
                v.success,
                v.best_index.map(|i| i.to_string()).unwrap_or_default(),
                v.jaccard,
                v.angle_diff.to_degrees(),
                p.x(),
                p.y(),
                p.theta(),
                p.w(),
                p.h()
            );
        }
        out
    }
}

/// Rectangle-metric accuracy of `predictor` over every item with ground truth.
pub fn evaluate_with<P: Predictor + ?Sized>(
    predictor: &P,
    items: &[Item],
    criteria: SuccessCriteria,
) -> Result<EvalReport> {
    let mut verdicts = Vec::with_capacity(items.len());
    for item in items.iter().filter(|it| !it.truths.is_empty()) {
        let output = predictor.predict_item(item)?;
        let prediction = denormalize_target(&NormTargetVec::from_array(output));
        let v = is_success(&prediction, &item.truths, criteria)?;
        verdicts.push(SampleVerdict {
            key: item.key.clone(),
            success: v.success,
            best_index: v.best_index,
            jaccard: v.best_jaccard,
            angle_diff: v.angle_diff,
            output,
            prediction,
        });
    }
    if verdicts.is_empty() {
        return Err(Error::InvalidConfig("no items with ground truth to evaluate".into()));
    }
    let successes = verdicts.iter().filter(|v| v.success).count();
    Ok(EvalReport {
        accuracy: successes as f64 / verdicts.len() as f64,
        successes,
        total: verdicts.len(),
        verdicts,
    })
}

/// Eval-mode accuracy of a trained head.
pub fn evaluate(head: &DenseHead, items: &[Item], criteria: SuccessCriteria) -> Result<EvalReport> {
    check_dims(items, head.dims().input)?;
    evaluate_with(head, items, criteria)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracySummary {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub summary: AccuracySummary,
    /// Markdown-style `model | min | mean | max` table.
    pub table: String,
    /// `epoch,train_loss,val_loss`, averaged over runs.
    pub loss_csv: String,
}

pub fn summarize(accuracies: &[f64]) -> Result<AccuracySummary> {
    if accuracies.is_empty() {
        return Err(Error::InvalidConfig("report needs at least one run".into()));
    }
    let min = accuracies.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = accuracies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mean = (accuracies.iter().sum::<f64>() / accuracies.len() as f64).clamp(min, max);
    Ok(AccuracySummary {
        min,
        mean,
        max,
        runs: accuracies.len(),
    })
}

pub fn accuracy_table(model: &str, s: &AccuracySummary) -> String {
    let pct = |v: f64| format!("{:.1}%", v * 100.0);
    let width = model.len().max("Pretrained model".len());
    let mut out = String::new();
    let _ = writeln!(out, "| {:<width$} | {:>6} | {:>6} | {:>6} |", "Pretrained model", "min", "mean", "max");
    let _ = writeln!(out, "|{}|--------|--------|--------|", "-".repeat(width + 2));
    let _ = writeln!(
        out,
        "| {:<width$} | {:>6} | {:>6} | {:>6} |",
        model,
        pct(s.min),
        pct(s.mean),
        pct(s.max)
    );
    out
}

pub fn report(runs: &[RunReport]) -> Result<Report> {
    let accuracies: Vec<f64> = runs.iter().map(|r| r.accuracy).collect();
    let summary = summarize(&accuracies)?;
    let epochs = runs[0].train_loss.len();
    if runs.iter().any(|r| r.train_loss.len() != epochs || r.val_loss.len() != epochs) {
        return Err(Error::InvalidConfig("runs have different epoch counts".into()));
    }
    let n = runs.len() as f64;
    let mut loss_csv = String::from("epoch,train_loss,val_loss\n");
    for e in 0..epochs {
        let train = runs.iter().map(|r| r.train_loss[e]).sum::<f64>() / n;
        let val = runs.iter().map(|r| r.val_loss[e]).sum::<f64>() / n;
        let _ = writeln!(loss_csv, "{},{:.8},{:.8}", e + 1, train, val);
    }
    Ok(Report {
        summary,
        table: accuracy_table(&runs[0].backbone, &summary),
        loss_csv,
    })
}

/// Self-contained regression task: procedurally generated inputs, toy
/// features, and targets that are a fixed linear map of the features,
/// clamped to `[0, 1]`.
pub mod synthetic {
    use super::*;

    /// Spread of each target component before clamping.
    pub const TARGET_STD: f64 = 0.15;

    /// A smooth random scene: a few separable Gaussian blobs per channel.
    pub fn scene(rng: &mut ChaCha8Rng) -> NetInput {
        let channels = std::array::from_fn(|_| {
            let mut plane = Plane::new(FRAME, FRAME, 0.0);
            for _ in 0..3 {
                let cx = rng.gen_range(0.0..FRAME as f64);
                let cy = rng.gen_range(0.0..FRAME as f64);
                let sigma = rng.gen_range(12.0..60.0);
                let amp = rng.gen_range(-1.0..1.0);
                let gx: Vec<f64> = (0..FRAME)
                    .map(|u| (-((u as f64 + 0.5 - cx) / sigma).powi(2) / 2.0).exp())
                    .collect();
                let gy: Vec<f64> = (0..FRAME)
                    .map(|v| (-((v as f64 + 0.5 - cy) / sigma).powi(2) / 2.0).exp())
                    .collect();
                for (v, &wy) in gy.iter().enumerate() {
                    for (u, &wx) in gx.iter().enumerate() {
                        let p = plane.get(u, v);
                        plane.set(u, v, p + amp * wx * wy);
                    }
                }
            }
            normalize_channel(&plane)
        });
        NetInput::new(channels)
    }

    /// `n` items keyed `syn0000..`, split like a dataset. `seed` fixes the
    /// scenes, the toy projection, the linear map and the split.
    pub fn linear_task(n: usize, seed: u64, dim: usize, split_ratio: f64) -> Result<TrainingData> {
        if n < 2 {
            return Err(Error::InvalidConfig("synthetic task needs at least 2 items".into()));
        }
        let toy = ToyExtractor::new(seed, dim);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x0053_594e]));
        let features: Vec<Vec<f64>> = (0..n)
            .map(|_| toy.extract(&scene(&mut rng)).into_values())
            .collect();

        // random map, each output row rescaled to TARGET_STD over the set
        let mut map = vec![0.0; OUTPUT_DIM * dim];
        for w in &mut map {
            *w = rng.gen_range(-1.0..1.0);
        }
        let mut raw: Vec<[f64; OUTPUT_DIM]> = vec![[0.0; OUTPUT_DIM]; n];
        for (f, out) in features.iter().zip(&mut raw) {
            for (k, o) in out.iter_mut().enumerate() {
                *o = map[k * dim..(k + 1) * dim].iter().zip(f).map(|(a, b)| a * b).sum();
            }
        }
        for k in 0..OUTPUT_DIM {
            let mean = raw.iter().map(|r| r[k]).sum::<f64>() / n as f64;
            let var = raw.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / n as f64;
            let scale = if var > 0.0 { TARGET_STD / var.sqrt() } else { 0.0 };
            for r in &mut raw {
                r[k] = ((r[k] - mean) * scale + 0.5).clamp(0.0, 1.0);
            }
        }

        let ids: Vec<String> = (0..n).map(|i| format!("syn{i:04}")).collect();
        let split = dataset::split(&ids, split_ratio, seed)?;
        let make = |list: &[String]| -> Vec<Item> {
            list.iter()
                .enumerate()
                .map(|(source, id)| {
                    let i: usize = id[3..].parse().expect("synthetic id");
                    let target = NormTargetVec::from_array(raw[i]);
                    Item {
                        key: id.clone(),
                        source,
                        features: features[i].clone(),
                        targets: vec![target],
                        truths: vec![denormalize_target(&target)],
                    }
                })
                .collect()
        };
        let train = make(&split.train_ids);
        let val = make(&split.val_ids);
        Ok(TrainingData {
            backbone: toy.name(),
            dim,
            train,
            val,
            split,
            stats: DataStats {
                samples_loaded: n,
                variants_emitted: n,
                ..DataStats::default()
            },
        })
    }
}
