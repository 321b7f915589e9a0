//! Experiment configuration, read from TOML.
//!
//! Every key is optional; an empty file runs ten repetitions of GP feature
//! construction with an MLP on one default synthetic recording.
//!
//! ```toml
//! seed = 42
//! repetitions = 10
//! method = "gp"          # gp | full75 | pca
//! channel = "all"        # all | central | fp1 | o1
//! out_dir = "runs"
//!
//! [[input.synth]]        # or [[input.recordings]] / [[input.features_csv]]
//! n_events = 50
//!
//! [classifier]
//! kind = "mlp"
//!
//! [gp]
//! generations = 300
//! pop_size = 100
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifiers::ClassifierSpec;
use crate::dataset::OverlapRule;
use crate::error::{Error, Result};
use crate::features::{EegChannel, FeatureOptions};
use crate::gp::EvolutionConfig;
use crate::signal::{AnnotationOptions, ShortEventPolicy, SynthConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Evolved feature construction.
    #[default]
    Gp,
    /// Classifier on the raw attribute table.
    Full75,
    /// Classifier on principal components.
    Pca,
}

impl Method {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gp" => Ok(Method::Gp),
            "full75" | "full" => Ok(Method::Full75),
            "pca" => Ok(Method::Pca),
            _ => Err(Error::config(format!("unknown method {s:?} (expected gp, full75 or pca)"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Gp => "gp",
            Method::Full75 => "full75",
            Method::Pca => "pca",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelSelection {
    #[default]
    All,
    Central,
    Fp1,
    O1,
}

impl ChannelSelection {
    pub fn parse(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(ChannelSelection::All);
        }
        match EegChannel::from_name(s) {
            Some(EegChannel::Central) => Ok(ChannelSelection::Central),
            Some(EegChannel::Fp1) => Ok(ChannelSelection::Fp1),
            Some(EegChannel::O1) => Ok(ChannelSelection::O1),
            None => Err(Error::config(format!("unknown channel {s:?} (expected all, central, fp1 or o1)"))),
        }
    }

    pub fn channel(self) -> Option<EegChannel> {
        match self {
            ChannelSelection::All => None,
            ChannelSelection::Central => Some(EegChannel::Central),
            ChannelSelection::Fp1 => Some(EegChannel::Fp1),
            ChannelSelection::O1 => Some(EegChannel::O1),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ChannelSelection::All => "all",
            ChannelSelection::Central => "central",
            ChannelSelection::Fp1 => "fp1",
            ChannelSelection::O1 => "o1",
        }
    }
}

/// An EDF recording with its two expert annotation files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordingInput {
    pub edf: PathBuf,
    pub annotations: [PathBuf; 2],
    /// Per-recording group values such as `sex = "F"`; these override the
    /// EDF header's patient fields.
    #[serde(default)]
    pub groups: BTreeMap<String, String>,
}

/// A feature CSV whose `label` column serves for training and testing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvInput {
    pub path: PathBuf,
    #[serde(default)]
    pub groups: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub synth: Option<Vec<SynthConfig>>,
    pub recordings: Option<Vec<RecordingInput>>,
    pub features_csv: Option<Vec<CsvInput>>,
}

/// The one data source an experiment reads.
#[derive(Debug, Clone, PartialEq)]
pub enum InputSource<'a> {
    Synth(&'a [SynthConfig]),
    Recordings(&'a [RecordingInput]),
    FeaturesCsv(&'a [CsvInput]),
}

static DEFAULT_SYNTH: std::sync::LazyLock<Vec<SynthConfig>> = std::sync::LazyLock::new(|| vec![SynthConfig::default()]);

impl InputConfig {
    pub fn source(&self) -> Result<InputSource<'_>> {
        let given = [self.synth.is_some(), self.recordings.is_some(), self.features_csv.is_some()];
        match given.iter().filter(|&&g| g).count() {
            0 => return Ok(InputSource::Synth(&DEFAULT_SYNTH)),
            1 => {}
            _ => return Err(Error::config("input: give exactly one of synth, recordings or features_csv")),
        }
        let src = if let Some(s) = &self.synth {
            InputSource::Synth(s)
        } else if let Some(r) = &self.recordings {
            InputSource::Recordings(r)
        } else {
            InputSource::FeaturesCsv(self.features_csv.as_deref().unwrap_or_default())
        };
        let empty = match src {
            InputSource::Synth(s) => s.is_empty(),
            InputSource::Recordings(r) => r.is_empty(),
            InputSource::FeaturesCsv(c) => c.is_empty(),
        };
        if empty {
            return Err(Error::config("input: the chosen source lists no entries"));
        }
        Ok(src)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelConfig {
    /// Overlap, in seconds, that marks a window positive.
    pub min_overlap_s: f64,
    /// Shorter events need only this fraction of their duration.
    pub event_fraction: f64,
    pub header_lines: usize,
    pub min_event_duration_s: Option<f64>,
    pub short_events: ShortEventPolicy,
}

impl Default for LabelConfig {
    fn default() -> Self {
        let rule = OverlapRule::default();
        LabelConfig {
            min_overlap_s: rule.min_overlap_s,
            event_fraction: rule.event_fraction,
            header_lines: 0,
            min_event_duration_s: None,
            short_events: ShortEventPolicy::Reject,
        }
    }
}

impl LabelConfig {
    pub fn overlap_rule(&self) -> OverlapRule {
        OverlapRule {
            min_overlap_s: self.min_overlap_s,
            event_fraction: self.event_fraction,
        }
    }

    pub fn annotation_options(&self) -> AnnotationOptions {
        AnnotationOptions {
            header_lines: self.header_lines,
            min_duration_s: self.min_event_duration_s,
            short_events: self.short_events,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub ratio: f64,
    /// Undersample the training part to equal class counts.
    pub balance: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { ratio: 0.7, balance: true }
    }
}

/// Evolution settings. The final classifier doubles as the fitness
/// classifier unless `fitness_classifier` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpConfig {
    pub generations: usize,
    pub pop_size: usize,
    pub tournament_size: usize,
    pub p_crossover: f64,
    pub p_mutation: f64,
    pub max_depth: usize,
    pub init_depth: (usize, usize),
    pub const_prob: f64,
    pub cv_folds: usize,
    pub fitness_classifier: Option<ClassifierSpec>,
}

impl Default for GpConfig {
    fn default() -> Self {
        let e = EvolutionConfig::default();
        GpConfig {
            generations: e.generations,
            pop_size: e.pop_size,
            tournament_size: e.tournament_size,
            p_crossover: e.p_crossover,
            p_mutation: e.p_mutation,
            max_depth: e.max_depth,
            init_depth: e.init_depth,
            const_prob: e.const_prob,
            cv_folds: e.cv_folds,
            fitness_classifier: None,
        }
    }
}

impl GpConfig {
    pub fn evolution(&self, final_classifier: &ClassifierSpec, seed: u64) -> EvolutionConfig {
        EvolutionConfig {
            generations: self.generations,
            pop_size: self.pop_size,
            tournament_size: self.tournament_size,
            p_crossover: self.p_crossover,
            p_mutation: self.p_mutation,
            max_depth: self.max_depth,
            init_depth: self.init_depth,
            const_prob: self.const_prob,
            cv_folds: self.cv_folds,
            classifier_spec: self.fitness_classifier.unwrap_or(*final_classifier),
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcaConfig {
    pub var_threshold: f64,
    /// Correlation PCA when true, covariance PCA otherwise.
    pub standardize: bool,
}

impl Default for PcaConfig {
    fn default() -> Self {
        PcaConfig {
            var_threshold: 0.95,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub repetitions: usize,
    pub method: Method,
    pub channel: ChannelSelection,
    pub out_dir: PathBuf,
    pub input: InputConfig,
    pub features: FeatureOptions,
    pub labels: LabelConfig,
    pub split: SplitConfig,
    pub classifier: ClassifierSpec,
    pub gp: GpConfig,
    pub pca: PcaConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 42,
            repetitions: 10,
            method: Method::Gp,
            channel: ChannelSelection::All,
            out_dir: PathBuf::from("runs"),
            input: InputConfig::default(),
            features: FeatureOptions::default(),
            labels: LabelConfig::default(),
            split: SplitConfig::default(),
            classifier: ClassifierSpec::default(),
            gp: GpConfig::default(),
            pca: PcaConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative input paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(rs) = &mut self.input.recordings {
            for r in rs {
                fix(&mut r.edf);
                r.annotations.iter_mut().for_each(fix);
            }
        }
        if let Some(cs) = &mut self.input.features_csv {
            for c in cs {
                fix(&mut c.path);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::config("repetitions must be at least 1"));
        }
        self.input.source()?;
        if !(self.split.ratio > 0.0 && self.split.ratio < 1.0) {
            return Err(Error::config(format!("split.ratio must lie in (0, 1), got {}", self.split.ratio)));
        }
        if !(self.features.window_s > 0.0) || !(self.features.resample_hz > 0.0) {
            return Err(Error::config("features.window_s and features.resample_hz must be positive"));
        }
        crate::dwt::WaveletSpec::by_name(&self.features.wavelet)?;
        self.classifier.validate()?;
        if self.method == Method::Gp {
            self.gp.evolution(&self.classifier, 0).validate()?;
        }
        if !(self.pca.var_threshold > 0.0 && self.pca.var_threshold <= 1.0) {
            return Err(Error::config("pca.var_threshold must lie in (0, 1]"));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        crate::experiment::sha256_hex(json.as_bytes())
    }
}
