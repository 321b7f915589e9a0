//! The repeated train/test protocol: load data once, then for every
//! repetition split, balance, construct features, fit and evaluate.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::{lower_median, subgroup_eval, RunArtifact};
use crate::classifiers::{train_classifier, ClassifierKind};
use crate::config::{ChannelSelection, ExperimentConfig, InputSource, Method};
use crate::dataset::{balance_undersample, split_train_test, LabelMode, OverlapRule, UnsplitDataset};
use crate::dwt::WaveletSpec;
use crate::error::{Error, Result};
use crate::features::{build_feature_matrix, channel_filter, FeatureMatrix, FeatureOptions};
use crate::gp::{evolve, extract_features};
use crate::metrics::{evaluate_scores, MetricsReport};
use crate::pca::pca_fit;
use crate::seed::{derive_seed, stream};
use crate::signal::{read_annotations, read_edf, synth_recording, AnnotationOptions, AnnotationSet, Recording};

/// Feature table of one recording with both label variants.
pub fn featurize_recording(
    rec: &Recording,
    ann1: &AnnotationSet,
    ann2: &AnnotationSet,
    opts: &FeatureOptions,
    rule: &OverlapRule,
) -> Result<UnsplitDataset> {
    rec.validate()?;
    let duration = rec.duration_s();
    ann1.check_within(duration)?;
    ann2.check_within(duration)?;
    let wavelet = WaveletSpec::by_name(&opts.wavelet)?;
    let fm = build_feature_matrix(&rec.resampled(opts.resample_hz)?, &wavelet, opts)?;
    UnsplitDataset::from_annotations(fm, ann1, ann2, opts.window_s, rule)
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Reads an EDF file and its two annotation files.
pub fn load_recording(
    edf: &Path,
    annotations: &[PathBuf; 2],
    opts: &AnnotationOptions,
) -> Result<(Recording, AnnotationSet, AnnotationSet)> {
    let bytes = std::fs::read(edf).map_err(|e| Error::io(edf, e))?;
    let rec = read_edf(&bytes)?;
    let a1 = read_annotations(&read_text(&annotations[0])?, 1, opts)?;
    let a2 = read_annotations(&read_text(&annotations[1])?, 2, opts)?;
    Ok((rec, a1, a2))
}

fn tag_groups(mut ds: UnsplitDataset, index: usize, meta: &BTreeMap<String, String>) -> UnsplitDataset {
    ds = ds.with_group("recording", &index.to_string());
    for (k, v) in meta {
        ds = ds.with_group(k, v);
    }
    ds
}

/// Builds the unsplit table from the configured source, restricted to the
/// configured channel.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<UnsplitDataset> {
    let rule = cfg.labels.overlap_rule();
    let mut parts = Vec::new();
    match cfg.input.source()? {
        InputSource::Synth(list) => {
            for (i, sc) in list.iter().enumerate() {
                let out = synth_recording(sc, derive_seed(cfg.seed, &[stream::SYNTH, i as u64]))?;
                let ds = featurize_recording(&out.recording, &out.expert1, &out.expert2, &cfg.features, &rule)?;
                parts.push(tag_groups(ds, i, &sc.meta));
            }
        }
        InputSource::Recordings(list) => {
            let opts = cfg.labels.annotation_options();
            for (i, r) in list.iter().enumerate() {
                let (rec, a1, a2) = load_recording(&r.edf, &r.annotations, &opts)?;
                let mut meta = BTreeMap::new();
                if let Some(sex) = rec.subject_meta.get("sex") {
                    meta.insert("sex".to_string(), sex.clone());
                }
                meta.extend(r.groups.clone());
                let ds = featurize_recording(&rec, &a1, &a2, &cfg.features, &rule)?;
                parts.push(tag_groups(ds, i, &meta));
            }
        }
        InputSource::FeaturesCsv(list) => {
            for (i, c) in list.iter().enumerate() {
                let file = std::fs::File::open(&c.path).map_err(|e| Error::io(&c.path, e))?;
                let fm = FeatureMatrix::read_csv(file)?;
                let labels = fm
                    .labels
                    .clone()
                    .ok_or_else(|| Error::invalid(format!("{}: no label column", c.path.display())))?;
                parts.push(tag_groups(UnsplitDataset::from_labels(fm, labels)?, i, &c.groups));
            }
        }
    }
    let mut ds = UnsplitDataset::concat(&parts)?;
    if let Some(ch) = cfg.channel.channel() {
        ds.features = channel_filter(&ds.features, ch)?;
    }
    Ok(ds)
}

/// Seed of repetition `r` under master seed `seed`.
pub fn repetition_seed(seed: u64, r: usize) -> u64 {
    derive_seed(seed, &[stream::REPETITION, r as u64])
}

/// Runs one repetition on a loaded table.
pub fn run_repetition(cfg: &ExperimentConfig, data: &UnsplitDataset, r: usize) -> Result<RunArtifact> {
    let seed = repetition_seed(cfg.seed, r);
    let (train, test, split) = split_train_test(data, cfg.split.ratio, seed)?;
    let train = if cfg.split.balance { balance_undersample(&train, seed)? } else { train };
    let (neg, pos) = train.class_counts();
    log::info!("repetition {r}: {} training rows ({neg} negative, {pos} positive), {} test rows", train.n_rows(), test.n_rows());

    let mut tree = None;
    let mut pca = None;
    let mut best_cv_fitness = None;
    let mut history = Vec::new();
    let xtr = match cfg.method {
        Method::Gp => {
            let evo = cfg.gp.evolution(&cfg.classifier, derive_seed(seed, &[stream::EVOLVE]));
            let res = evolve(&evo, &train)?;
            log::info!(
                "repetition {r}: best tree has {} features, CV AUC {:.4}",
                res.best.n_features,
                res.best.fitness.unwrap_or(f64::NAN)
            );
            let x = extract_features(&res.best.tree, &train.features)?.rows;
            best_cv_fitness = res.best.fitness;
            history = res.history;
            tree = Some(res.best.tree);
            x
        }
        Method::Full75 => train.features.rows.clone(),
        Method::Pca => {
            let m = pca_fit(&train.features.rows, cfg.pca.var_threshold, cfg.pca.standardize)?;
            let x = m.transform(&train.features.rows)?;
            pca = Some(m);
            x
        }
    };
    let n_features = xtr.first().map_or(0, Vec::len);
    let model = train_classifier(&cfg.classifier, &xtr, &train.labels, derive_seed(seed, &[stream::FINAL_MODEL]))?;

    let mut artifact = RunArtifact {
        repetition: r,
        seed,
        method: cfg.method,
        channel: cfg.channel,
        classifier: cfg.classifier.kind,
        input_attrs: data.features.attr_names.clone(),
        tree,
        pca,
        n_features,
        model,
        metrics: MetricsReport::default(),
        subgroups: BTreeMap::new(),
        best_cv_fitness,
        history,
        split,
        train_rows: train.n_rows(),
        config: cfg.clone(),
        config_hash: cfg.hash(),
    };
    artifact.metrics = evaluate_scores(&artifact.score(&test.features)?, &test.labels)?;
    for key in test.groups.keys() {
        artifact.subgroups.insert(key.clone(), subgroup_eval(&artifact, &test, key)?);
    }
    Ok(artifact)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub repetition: usize,
    pub seed: u64,
    pub auc: Option<f64>,
    pub recall: f64,
    pub specificity: f64,
    pub precision: f64,
    pub f1: f64,
    pub n_features: usize,
    pub best_cv_fitness: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single run.
    pub sd: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Option<Spread> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Spread {
            mean,
            sd,
            median: lower_median(values)?,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

/// Cross-repetition summary. Contains no timestamps or paths so identical
/// inputs give identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub config_hash: String,
    pub master_seed: u64,
    pub method: Method,
    pub channel: ChannelSelection,
    pub classifier: ClassifierKind,
    pub n_rows: usize,
    pub n_attrs: usize,
    pub runs: Vec<RunSummary>,
    pub auc: Option<Spread>,
    pub f1: Option<Spread>,
    pub n_features_median: usize,
}

impl AggregateReport {
    pub fn from_artifacts(cfg: &ExperimentConfig, data: &UnsplitDataset, arts: &[RunArtifact]) -> Self {
        let runs: Vec<RunSummary> = arts
            .iter()
            .map(|a| RunSummary {
                repetition: a.repetition,
                seed: a.seed,
                auc: a.metrics.auc,
                recall: a.metrics.recall,
                specificity: a.metrics.specificity,
                precision: a.metrics.precision,
                f1: a.metrics.f1,
                n_features: a.n_features,
                best_cv_fitness: a.best_cv_fitness,
            })
            .collect();
        let aucs: Vec<f64> = runs.iter().filter_map(|r| r.auc).collect();
        let f1s: Vec<f64> = runs.iter().map(|r| r.f1).collect();
        let dims: Vec<usize> = runs.iter().map(|r| r.n_features).collect();
        AggregateReport {
            config_hash: cfg.hash(),
            master_seed: cfg.seed,
            method: cfg.method,
            channel: cfg.channel,
            classifier: cfg.classifier.kind,
            n_rows: data.n_rows(),
            n_attrs: data.features.n_cols(),
            auc: Spread::of(&aucs),
            f1: Spread::of(&f1s),
            n_features_median: lower_median(&dims).unwrap_or(0),
            runs,
        }
    }

    /// One row per repetition, ready for a box plot.
    pub fn boxplot_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["repetition", "method", "channel", "classifier", "auc", "f1", "n_features"])?;
        for r in &self.runs {
            w.write_record([
                r.repetition.to_string(),
                self.method.name().to_string(),
                self.channel.name().to_string(),
                self.classifier.name().to_string(),
                r.auc.map(|v| v.to_string()).unwrap_or_default(),
                r.f1.to_string(),
                r.n_features.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Runtime(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// `complete` or `failed`.
    pub status: String,
    pub error: Option<String>,
    pub config_hash: String,
    pub master_seed: u64,
    pub repetition_seeds: Vec<u64>,
    pub completed: Vec<usize>,
    pub files: Vec<String>,
    pub config: ExperimentConfig,
}

pub const AGGREGATE_FILE: &str = "aggregate.json";
pub const BOXPLOT_FILE: &str = "auc_boxplot.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn artifact_file_name(r: usize) -> String {
    format!("rep_{r:02}.json")
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Runs every repetition and writes the artifacts, the aggregate report, a
/// box-plot CSV and a manifest into `out_dir`. On failure the artifacts
/// already written stay in place and the manifest records the error.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<AggregateReport> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let seeds: Vec<u64> = (0..cfg.repetitions).map(|r| repetition_seed(cfg.seed, r)).collect();
    let mut manifest = RunManifest {
        status: "failed".into(),
        error: None,
        config_hash: cfg.hash(),
        master_seed: cfg.seed,
        repetition_seeds: seeds,
        completed: Vec::new(),
        files: Vec::new(),
        config: cfg.clone(),
    };
    let write_manifest = |m: &RunManifest| -> Result<()> {
        write(&out_dir.join(MANIFEST_FILE), &(serde_json::to_string_pretty(m)? + "\n"))
    };

    let outcome = (|| -> Result<AggregateReport> {
        let data = load_dataset(cfg)?;
        log::info!("loaded {} rows x {} attributes", data.n_rows(), data.features.n_cols());
        let mut arts = Vec::with_capacity(cfg.repetitions);
        for r in 0..cfg.repetitions {
            let a = run_repetition(cfg, &data, r)?;
            let name = artifact_file_name(r);
            a.save(&out_dir.join(&name))?;
            manifest.files.push(name);
            manifest.completed.push(r);
            arts.push(a);
        }
        let report = AggregateReport::from_artifacts(cfg, &data, &arts);
        write(&out_dir.join(AGGREGATE_FILE), &(serde_json::to_string_pretty(&report)? + "\n"))?;
        write(&out_dir.join(BOXPLOT_FILE), &report.boxplot_csv()?)?;
        manifest.files.push(AGGREGATE_FILE.into());
        manifest.files.push(BOXPLOT_FILE.into());
        Ok(report)
    })();

    match outcome {
        Ok(report) => {
            manifest.status = "complete".into();
            write_manifest(&manifest)?;
            Ok(report)
        }
        Err(e) => {
            manifest.error = Some(e.to_string());
            if let Err(me) = write_manifest(&manifest) {
                log::error!("could not write failure manifest: {me}");
            }
            Err(e)
        }
    }
}

/// Provenance written next to the outputs of `synth` and `extract`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputManifest {
    pub command: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub files: Vec<String>,
    pub config: serde_json::Value,
}

impl OutputManifest {
    pub fn new<T: Serialize>(command: &str, config: &T, seeds: Vec<u64>, files: Vec<String>) -> Result<Self> {
        let config = serde_json::to_value(config)?;
        Ok(OutputManifest {
            command: command.into(),
            config_hash: sha256_hex(config.to_string().as_bytes()),
            seeds,
            files,
            config,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write(path, &(serde_json::to_string_pretty(self)? + "\n"))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub const SYNTH_EDF: &str = "recording.edf";
pub const SYNTH_EXPERT1: &str = "expert1.txt";
pub const SYNTH_EXPERT2: &str = "expert2.txt";

/// Writes a synthetic recording and its two expert annotation files into
/// `dir`, plus a manifest. Returns the data file paths.
pub fn write_synth(cfg: &crate::signal::SynthConfig, seed: u64, dir: &Path) -> Result<Vec<PathBuf>> {
    let out = synth_recording(cfg, seed)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let edf = crate::signal::write_edf(&out.recording)?;
    let files = [
        (SYNTH_EDF, edf),
        (SYNTH_EXPERT1, crate::signal::format_annotations(&out.expert1).into_bytes()),
        (SYNTH_EXPERT2, crate::signal::format_annotations(&out.expert2).into_bytes()),
    ];
    let mut paths = Vec::new();
    for (name, bytes) in &files {
        let p = dir.join(name);
        std::fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
        paths.push(p);
    }
    let used_seed = cfg.seed.unwrap_or(seed);
    OutputManifest::new("synth", cfg, vec![used_seed], files.iter().map(|(n, _)| n.to_string()).collect())?
        .save(&dir.join(MANIFEST_FILE))?;
    Ok(paths)
}

/// Settings of a standalone feature extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractOptions {
    pub features: FeatureOptions,
    pub channel: ChannelSelection,
    pub label_mode: LabelMode,
    pub labels: crate::config::LabelConfig,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            features: FeatureOptions::default(),
            channel: ChannelSelection::All,
            label_mode: LabelMode::Both,
            labels: crate::config::LabelConfig::default(),
        }
    }
}

/// Extracts the labelled feature table of one recording into a CSV at
/// `out`, with a manifest beside it. Returns the table.
pub fn extract_to_csv(edf: &Path, annotations: &[PathBuf; 2], out: &Path, opts: &ExtractOptions) -> Result<FeatureMatrix> {
    let (rec, a1, a2) = load_recording(edf, annotations, &opts.labels.annotation_options())?;
    let ds = featurize_recording(&rec, &a1, &a2, &opts.features, &opts.labels.overlap_rule())?;
    let mut fm = match opts.channel.channel() {
        Some(ch) => channel_filter(&ds.features, ch)?,
        None => ds.features,
    };
    fm.labels = Some(match opts.label_mode {
        LabelMode::Both => ds.labels_both,
        LabelMode::Either => ds.labels_either,
    });
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = std::fs::File::create(out).map_err(|e| Error::io(out, e))?;
    fm.write_csv(std::io::BufWriter::new(file))?;
    let name = out.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    OutputManifest::new("extract", opts, vec![], vec![name])?.save(&out.with_extension("manifest.json"))?;
    Ok(fm)
}
