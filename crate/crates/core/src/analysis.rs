//! Per-run artifacts and the cross-run analyses built on them: which
//! attributes the evolved features use, how many features they construct,
//! and how performance differs between subject groups.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifiers::{ClassifierKind, Model};
use crate::config::{ChannelSelection, ExperimentConfig, Method};
use crate::dataset::{LabeledDataset, SplitManifest};
use crate::error::{Error, Result};
use crate::features::{attr_info, parse_attr_name, FeatureMatrix};
use crate::gp::{extract_features, GenerationStats, GpTree, Node};
use crate::metrics::{evaluate_scores, MetricsReport};
use crate::pca::PcaModel;

/// Everything needed to rescore or re-run one repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunArtifact {
    pub repetition: usize,
    pub seed: u64,
    pub method: Method,
    pub channel: ChannelSelection,
    pub classifier: ClassifierKind,
    /// Columns of the table the run consumed, in terminal order.
    pub input_attrs: Vec<String>,
    pub tree: Option<GpTree>,
    pub pca: Option<PcaModel>,
    pub n_features: usize,
    pub model: Model,
    pub metrics: MetricsReport,
    /// Test metrics per group key and value.
    #[serde(default)]
    pub subgroups: BTreeMap<String, BTreeMap<String, MetricsReport>>,
    pub best_cv_fitness: Option<f64>,
    pub history: Vec<GenerationStats>,
    pub split: SplitManifest,
    pub train_rows: usize,
    pub config: ExperimentConfig,
    pub config_hash: String,
}

impl RunArtifact {
    /// Classifier inputs for `fm`, whose columns are matched by name.
    pub fn features_for(&self, fm: &FeatureMatrix) -> Result<Vec<Vec<f64>>> {
        let cols: Vec<usize> = self
            .input_attrs
            .iter()
            .map(|a| {
                fm.attr_names
                    .iter()
                    .position(|n| n == a)
                    .ok_or_else(|| Error::invalid(format!("table lacks column {a}")))
            })
            .collect::<Result<_>>()?;
        let rows: Vec<Vec<f64>> = fm.rows.iter().map(|r| cols.iter().map(|&c| r[c]).collect()).collect();
        match (&self.tree, &self.pca) {
            (Some(tree), _) => {
                let sub = FeatureMatrix::new(rows, self.input_attrs.clone(), fm.window_index.clone())?;
                Ok(extract_features(tree, &sub)?.rows)
            }
            (None, Some(pca)) => pca.transform(&rows),
            (None, None) => Ok(rows),
        }
    }

    pub fn score(&self, fm: &FeatureMatrix) -> Result<Vec<f64>> {
        self.model.predict_score(&self.features_for(fm)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))
    }
}

/// Reads every `rep_*.json` in `dir`, ordered by file name.
pub fn load_artifacts(dir: &Path) -> Result<Vec<RunArtifact>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.starts_with("rep_") && name.ends_with(".json")
        })
        .collect();
    if paths.is_empty() {
        return Err(Error::invalid(format!("no run artifacts (rep_*.json) in {}", dir.display())));
    }
    paths.sort();
    paths.iter().map(|p| RunArtifact::load(p)).collect()
}

/// Metrics on `test` computed separately for each value of `key`.
pub fn subgroup_eval(artifact: &RunArtifact, test: &LabeledDataset, key: &str) -> Result<BTreeMap<String, MetricsReport>> {
    let values = test
        .groups
        .get(key)
        .ok_or_else(|| Error::invalid(format!("test rows carry no group {key:?}")))?;
    let scores = artifact.score(&test.features)?;
    let distinct: BTreeSet<&String> = values.iter().collect();
    distinct
        .into_iter()
        .map(|v| {
            let idx: Vec<usize> = (0..values.len()).filter(|&i| &values[i] == v).collect();
            let s: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
            let l: Vec<u8> = idx.iter().map(|&i| test.labels[i]).collect();
            Ok((v.clone(), evaluate_scores(&s, &l)?))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRow {
    /// Position in the canonical 75-column table, when the name follows it.
    pub arg_index: Option<usize>,
    pub name: String,
    pub count: usize,
    pub channel: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub rows: Vec<FrequencyRow>,
    pub per_channel: BTreeMap<String, usize>,
}

/// Counts attribute terminals inside the feature-marked parts of each best
/// tree (the whole tree when it has no `F` node). With `presence`, an
/// attribute counts at most once per tree. Rows cover every column any run
/// consumed.
pub fn feature_frequency(artifacts: &[RunArtifact], presence: bool) -> Result<FrequencyTable> {
    if artifacts.is_empty() {
        return Err(Error::invalid("no artifacts to analyse"));
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for a in artifacts {
        for n in &a.input_attrs {
            counts.entry(n.clone()).or_insert(0);
        }
        let Some(tree) = &a.tree else { continue };
        let mask = tree.feature_content_mask();
        let mut seen = BTreeSet::new();
        for (node, inside) in tree.nodes().iter().zip(mask) {
            if let (Node::Terminal(t), true) = (node, inside) {
                let name = a
                    .input_attrs
                    .get(*t)
                    .ok_or_else(|| Error::invalid(format!("tree uses ARG{t} beyond the run's columns")))?;
                if !presence || seen.insert(name.clone()) {
                    *counts.get_mut(name).expect("registered above") += 1;
                }
            }
        }
    }
    let mut rows: Vec<FrequencyRow> = counts
        .into_iter()
        .map(|(name, count)| {
            let arg_index = parse_attr_name(&name);
            let channel = arg_index
                .and_then(attr_info)
                .map_or_else(|| "unknown".to_string(), |i| i.channel.name().to_string());
            FrequencyRow {
                arg_index,
                name,
                count,
                channel,
            }
        })
        .collect();
    rows.sort_by(|a, b| (a.arg_index.is_none(), a.arg_index, &a.name).cmp(&(b.arg_index.is_none(), b.arg_index, &b.name)));
    let mut per_channel = BTreeMap::new();
    for r in &rows {
        *per_channel.entry(r.channel.clone()).or_insert(0) += r.count;
    }
    Ok(FrequencyTable { rows, per_channel })
}

impl FrequencyTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["arg_index", "name", "count", "channel"])?;
        for r in &self.rows {
            let idx = r.arg_index.map(|i| i.to_string()).unwrap_or_default();
            w.write_record([idx, r.name.clone(), r.count.to_string(), r.channel.clone()])?;
        }
        w.flush().map_err(|e| Error::Runtime(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionStats {
    /// Number of runs per constructed-feature count.
    pub histogram: BTreeMap<usize, usize>,
    /// Lower middle value for an even number of runs.
    pub median: usize,
}

pub fn dimension_stats(artifacts: &[RunArtifact]) -> Result<DimensionStats> {
    if artifacts.is_empty() {
        return Err(Error::invalid("no artifacts to analyse"));
    }
    let dims: Vec<usize> = artifacts.iter().map(|a| a.n_features).collect();
    Ok(dimension_summary(&dims))
}

pub fn dimension_summary(dims: &[usize]) -> DimensionStats {
    let mut histogram = BTreeMap::new();
    for &d in dims {
        *histogram.entry(d).or_insert(0) += 1;
    }
    DimensionStats {
        histogram,
        median: lower_median(dims).unwrap_or(0),
    }
}

pub fn lower_median<T: Copy + PartialOrd>(values: &[T]) -> Option<T> {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    v.get(v.len().saturating_sub(1) / 2).copied()
}

impl DimensionStats {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["n_features", "runs"])?;
        for (d, c) in &self.histogram {
            w.write_record([d.to_string(), c.to_string()])?;
        }
        w.flush().map_err(|e| Error::Runtime(e.to_string()))
    }
}

/// Test AUCs of every run for one group value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupSummary {
    pub aucs: Vec<Option<f64>>,
    pub median_auc: Option<f64>,
}

/// Collects the per-run subgroup metrics stored in the artifacts.
pub fn subgroup_summary(artifacts: &[RunArtifact]) -> BTreeMap<String, BTreeMap<String, SubgroupSummary>> {
    let mut out: BTreeMap<String, BTreeMap<String, SubgroupSummary>> = BTreeMap::new();
    for a in artifacts {
        for (key, per_value) in &a.subgroups {
            for (value, report) in per_value {
                out.entry(key.clone())
                    .or_default()
                    .entry(value.clone())
                    .or_insert_with(|| SubgroupSummary {
                        aucs: Vec::new(),
                        median_auc: None,
                    })
                    .aucs
                    .push(report.auc);
            }
        }
    }
    for per_value in out.values_mut() {
        for s in per_value.values_mut() {
            let defined: Vec<f64> = s.aucs.iter().flatten().copied().collect();
            s.median_auc = lower_median(&defined);
        }
    }
    out
}

/// Summary written by [`analyze_dir`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub n_artifacts: usize,
    pub presence: bool,
    pub dimensions: DimensionStats,
    pub per_channel: BTreeMap<String, usize>,
    pub median_auc: Option<f64>,
}

pub const FREQUENCY_FILE: &str = "feature_frequency.csv";
pub const HISTOGRAM_FILE: &str = "dimension_histogram.csv";
pub const SUBGROUP_FILE: &str = "subgroups.json";
pub const ANALYSIS_FILE: &str = "analysis.json";

fn create(path: &Path) -> Result<std::fs::File> {
    std::fs::File::create(path).map_err(|e| Error::io(path, e))
}

/// Analyses every artifact in `dir` and writes the frequency and histogram
/// CSVs, the subgroup summary and an overview into `out`.
pub fn analyze_dir(dir: &Path, out: &Path, presence: bool) -> Result<AnalysisReport> {
    let arts = load_artifacts(dir)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let freq = feature_frequency(&arts, presence)?;
    freq.write_csv(create(&out.join(FREQUENCY_FILE))?)?;
    let dims = dimension_stats(&arts)?;
    dims.write_csv(create(&out.join(HISTOGRAM_FILE))?)?;
    let groups = subgroup_summary(&arts);
    let p = out.join(SUBGROUP_FILE);
    std::fs::write(&p, serde_json::to_string_pretty(&groups)? + "\n").map_err(|e| Error::io(&p, e))?;
    let aucs: Vec<f64> = arts.iter().filter_map(|a| a.metrics.auc).collect();
    let report = AnalysisReport {
        n_artifacts: arts.len(),
        presence,
        dimensions: dims,
        per_channel: freq.per_channel,
        median_auc: lower_median(&aucs),
    };
    let p = out.join(ANALYSIS_FILE);
    std::fs::write(&p, serde_json::to_string_pretty(&report)? + "\n").map_err(|e| Error::io(&p, e))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{train_classifier, ClassifierSpec};
    use crate::features::attr_name;

    fn artifact(tree: Option<&str>, attrs: Vec<String>) -> RunArtifact {
        let tree: Option<GpTree> = tree.map(|t| t.parse().unwrap());
        let n_features = tree.as_ref().map_or(attrs.len(), |t| t.n_features());
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64; n_features]).collect();
        let y = vec![0, 0, 0, 1, 1, 1];
        let model = train_classifier(&ClassifierSpec::of(ClassifierKind::GaussianNb), &x, &y, 0).unwrap();
        RunArtifact {
            repetition: 0,
            seed: 0,
            method: Method::Gp,
            channel: ChannelSelection::All,
            classifier: ClassifierKind::GaussianNb,
            input_attrs: attrs,
            tree,
            pca: None,
            n_features,
            model,
            metrics: evaluate_scores(&[0.1, 0.9], &[0, 1]).unwrap(),
            subgroups: BTreeMap::new(),
            best_cv_fitness: None,
            history: Vec::new(),
            split: SplitManifest {
                seed: 0,
                ratio: 0.7,
                train_indices: vec![],
                test_indices: vec![],
            },
            train_rows: 6,
            config: ExperimentConfig::default(),
            config_hash: String::new(),
        }
    }

    fn all_attrs() -> Vec<String> {
        (0..75).map(attr_name).collect()
    }

    #[test]
    fn counts_terminals_inside_features() {
        let a = artifact(Some("add(F(ARG0), F(mul(ARG0, ARG3)))"), all_attrs());
        let t = feature_frequency(std::slice::from_ref(&a), false).unwrap();
        assert_eq!(t.rows.len(), 75);
        assert_eq!(t.rows[0].count, 2);
        assert_eq!(t.rows[3].count, 1);
        assert_eq!(t.rows.iter().map(|r| r.count).sum::<usize>(), 3);
        assert_eq!(t.per_channel["central"], 3);
        let p = feature_frequency(&[a], true).unwrap();
        assert_eq!(p.rows[0].count, 1);
    }

    #[test]
    fn terminals_outside_features_are_ignored() {
        let a = artifact(Some("add(ARG5, F(1.0))"), all_attrs());
        let t = feature_frequency(&[a], false).unwrap();
        assert!(t.rows.iter().all(|r| r.count == 0));
    }

    #[test]
    fn central_only_runs_give_25_rows() {
        let attrs: Vec<String> = (0..25).map(attr_name).collect();
        let a = artifact(Some("F(ARG24)"), attrs);
        let t = feature_frequency(&[a], false).unwrap();
        assert_eq!(t.rows.len(), 25);
        assert_eq!(t.rows[24].count, 1);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 26);
    }

    #[test]
    fn channel_offsets_follow_column_names() {
        // A fourth-column terminal in an O1-only run is ARG53.
        let attrs: Vec<String> = (50..75).map(attr_name).collect();
        let a = artifact(Some("F(ARG3)"), attrs);
        let t = feature_frequency(&[a], false).unwrap();
        let row = t.rows.iter().find(|r| r.count == 1).unwrap();
        assert_eq!(row.arg_index, Some(53));
        assert_eq!(t.per_channel["o1"], 1);
    }

    #[test]
    fn median_convention() {
        assert_eq!(dimension_summary(&[3, 12, 7]).median, 7);
        assert_eq!(dimension_summary(&[5]).median, 5);
        assert_eq!(dimension_summary(&[4, 8]).median, 4);
        let h = dimension_summary(&[2, 2, 9]);
        assert_eq!(h.histogram.values().sum::<usize>(), 3);
        assert!(dimension_stats(&[]).is_err());
        assert!(feature_frequency(&[], false).is_err());
    }

    #[test]
    fn artifact_json_round_trip() {
        let a = artifact(Some("F(sub(ARG6, 1.0))"), all_attrs());
        let back: RunArtifact = serde_json::from_str(&a.to_json().unwrap()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn subgroups_with_identical_data_match() {
        let a = artifact(Some("F(ARG0)"), all_attrs());
        let half: Vec<Vec<f64>> = (0..8).map(|i| {
            let mut r = vec![0.0; 75];
            r[0] = i as f64 * 0.7;
            r
        }).collect();
        let labels: Vec<u8> = (0..8).map(|i| (i >= 4) as u8).collect();
        let rows: Vec<Vec<f64>> = half.iter().chain(&half).cloned().collect();
        let fm = FeatureMatrix::new(rows, all_attrs(), (0..16).collect()).unwrap();
        let mut test = LabeledDataset::new(fm, [labels.clone(), labels].concat()).unwrap();
        test.groups.insert("sex".into(), (0..16).map(|i| if i < 8 { "F" } else { "M" }.to_string()).collect());
        let r = subgroup_eval(&a, &test, "sex").unwrap();
        assert_eq!(r["F"], r["M"]);
        assert!(subgroup_eval(&a, &test, "age").is_err());

        let single = test.select(&[0, 1, 2]);
        let r = subgroup_eval(&a, &single, "sex").unwrap();
        assert_eq!(r["F"].auc, None);
        assert!(r["F"].undefined.contains(&"auc".to_string()));
    }
}
