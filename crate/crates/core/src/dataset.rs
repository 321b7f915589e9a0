//! Window labels from two experts, train/test splitting and undersampling.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::features::FeatureMatrix;
use crate::seed::{rng_for, stream};
use crate::signal::AnnotationSet;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelMode {
    /// Positive only when both experts mark the window.
    Both,
    /// Positive when either expert marks the window.
    Either,
}

/// A window is positive for an expert when one of that expert's events
/// overlaps it by at least `min(min_overlap_s, event_fraction * duration)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OverlapRule {
    pub min_overlap_s: f64,
    pub event_fraction: f64,
}

impl Default for OverlapRule {
    fn default() -> Self {
        OverlapRule {
            min_overlap_s: 0.5,
            event_fraction: 0.5,
        }
    }
}

const OVERLAP_EPS: f64 = 1e-9;

fn expert_labels(ann: &AnnotationSet, n_windows: usize, window_s: f64, rule: &OverlapRule) -> Vec<bool> {
    let mut out = vec![false; n_windows];
    for e in &ann.events {
        let need = rule.min_overlap_s.min(rule.event_fraction * e.duration_s);
        let first = (e.onset_s / window_s).floor().max(0.0) as usize;
        let last = ((e.end_s() / window_s).ceil() as usize).min(n_windows);
        for (k, slot) in out.iter_mut().enumerate().take(last).skip(first) {
            let (lo, hi) = (k as f64 * window_s, (k + 1) as f64 * window_s);
            let overlap = e.end_s().min(hi) - e.onset_s.max(lo);
            if overlap > 0.0 && overlap + OVERLAP_EPS >= need {
                *slot = true;
            }
        }
    }
    out
}

/// Labels windows `[k*window_s, (k+1)*window_s)` for `k < n_windows`.
pub fn label_windows(
    ann1: &AnnotationSet,
    ann2: &AnnotationSet,
    n_windows: usize,
    window_s: f64,
    mode: LabelMode,
    rule: &OverlapRule,
) -> Result<Vec<u8>> {
    if n_windows == 0 {
        return Err(Error::invalid("need at least one window to label"));
    }
    if !(window_s > 0.0) {
        return Err(Error::invalid(format!("window length must be positive, got {window_s}")));
    }
    let a = expert_labels(ann1, n_windows, window_s, rule);
    let b = expert_labels(ann2, n_windows, window_s, rule);
    Ok(a.iter()
        .zip(&b)
        .map(|(&x, &y)| match mode {
            LabelMode::Both => (x && y) as u8,
            LabelMode::Either => (x || y) as u8,
        })
        .collect())
}

/// Features with both label variants, before splitting.
#[derive(Debug, Clone, PartialEq)]
pub struct UnsplitDataset {
    pub features: FeatureMatrix,
    pub labels_both: Vec<u8>,
    pub labels_either: Vec<u8>,
    /// Per-row group values (e.g. `sex`), keyed by group name.
    pub groups: BTreeMap<String, Vec<String>>,
}

impl UnsplitDataset {
    pub fn from_annotations(
        features: FeatureMatrix,
        ann1: &AnnotationSet,
        ann2: &AnnotationSet,
        window_s: f64,
        rule: &OverlapRule,
    ) -> Result<Self> {
        let n_windows = features.window_index.iter().max().map_or(0, |m| m + 1);
        let both = label_windows(ann1, ann2, n_windows, window_s, LabelMode::Both, rule)?;
        let either = label_windows(ann1, ann2, n_windows, window_s, LabelMode::Either, rule)?;
        let pick = |l: &[u8]| features.window_index.iter().map(|&w| l[w]).collect::<Vec<_>>();
        Ok(UnsplitDataset {
            labels_both: pick(&both),
            labels_either: pick(&either),
            features,
            groups: BTreeMap::new(),
        })
    }

    /// Uses one label vector for both train and test roles.
    pub fn from_labels(features: FeatureMatrix, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != features.n_rows() {
            return Err(Error::invalid("label count differs from row count"));
        }
        Ok(UnsplitDataset {
            features,
            labels_both: labels.clone(),
            labels_either: labels,
            groups: BTreeMap::new(),
        })
    }

    /// Tags every row with `value` under `key`.
    pub fn with_group(mut self, key: &str, value: &str) -> Self {
        self.groups.insert(key.to_string(), vec![value.to_string(); self.features.n_rows()]);
        self
    }

    pub fn n_rows(&self) -> usize {
        self.features.n_rows()
    }

    /// Stacks recordings with identical columns. Group keys missing from a
    /// part are filled with empty strings.
    pub fn concat(parts: &[UnsplitDataset]) -> Result<UnsplitDataset> {
        let first = parts.first().ok_or_else(|| Error::invalid("nothing to concatenate"))?;
        let keys: std::collections::BTreeSet<&String> = parts.iter().flat_map(|p| p.groups.keys()).collect();
        let mut groups: BTreeMap<String, Vec<String>> = keys.iter().map(|k| ((*k).clone(), Vec::new())).collect();
        let (mut rows, mut window_index) = (Vec::new(), Vec::new());
        let (mut both, mut either) = (Vec::new(), Vec::new());
        for p in parts {
            if p.features.attr_names != first.features.attr_names {
                return Err(Error::invalid("datasets have different columns"));
            }
            rows.extend(p.features.rows.iter().cloned());
            window_index.extend(&p.features.window_index);
            both.extend(&p.labels_both);
            either.extend(&p.labels_either);
            for (k, v) in groups.iter_mut() {
                match p.groups.get(k) {
                    Some(g) => v.extend(g.iter().cloned()),
                    None => v.extend(std::iter::repeat_n(String::new(), p.n_rows())),
                }
            }
        }
        Ok(UnsplitDataset {
            features: FeatureMatrix::new(rows, first.features.attr_names.clone(), window_index)?,
            labels_both: both,
            labels_either: either,
            groups,
        })
    }
}

/// Row selection recorded for reproducibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub ratio: f64,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub features: FeatureMatrix,
    pub labels: Vec<u8>,
    pub meta: BTreeMap<String, String>,
    pub groups: BTreeMap<String, Vec<String>>,
}

impl LabeledDataset {
    pub fn new(features: FeatureMatrix, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != features.n_rows() {
            return Err(Error::invalid("label count differs from row count"));
        }
        let mut features = features;
        features.labels = Some(labels.clone());
        Ok(LabeledDataset {
            features,
            labels,
            meta: BTreeMap::new(),
            groups: BTreeMap::new(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&l| l == 1).count();
        (self.labels.len() - pos, pos)
    }

    pub fn select(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            meta: self.meta.clone(),
            groups: self
                .groups
                .iter()
                .map(|(k, v)| (k.clone(), indices.iter().map(|&i| v[i].clone()).collect()))
                .collect(),
        }
    }

    /// Stacks datasets with identical columns. Group keys missing from a
    /// part are filled with empty strings.
    pub fn concat(parts: &[LabeledDataset]) -> Result<LabeledDataset> {
        let first = parts.first().ok_or_else(|| Error::invalid("nothing to concatenate"))?;
        let mut rows = Vec::new();
        let mut window_index = Vec::new();
        let mut labels = Vec::new();
        let keys: std::collections::BTreeSet<&String> = parts.iter().flat_map(|p| p.groups.keys()).collect();
        let mut groups: BTreeMap<String, Vec<String>> = keys.iter().map(|k| ((*k).clone(), Vec::new())).collect();
        for p in parts {
            if p.features.attr_names != first.features.attr_names {
                return Err(Error::invalid("datasets have different columns"));
            }
            rows.extend(p.features.rows.iter().cloned());
            window_index.extend(&p.features.window_index);
            labels.extend(&p.labels);
            for (k, v) in groups.iter_mut() {
                match p.groups.get(k) {
                    Some(g) => v.extend(g.iter().cloned()),
                    None => v.extend(std::iter::repeat_n(String::new(), p.n_rows())),
                }
            }
        }
        let fm = FeatureMatrix::new(rows, first.features.attr_names.clone(), window_index)?;
        let mut out = LabeledDataset::new(fm, labels)?;
        out.meta = first.meta.clone();
        out.groups = groups;
        Ok(out)
    }
}

/// Unstratified random split: the first `ceil(ratio * n)` permuted rows go
/// to training (labelled by expert agreement), the rest to testing
/// (labelled when either expert marks the window).
pub fn split_train_test(
    ds: &UnsplitDataset,
    ratio: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset, SplitManifest)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::config(format!("split ratio must lie in (0, 1), got {ratio}")));
    }
    let n = ds.n_rows();
    let n_train = (ratio * n as f64).ceil() as usize;
    if n_train < 2 || n - n_train.min(n) < 2 {
        return Err(Error::invalid(format!(
            "{n} rows cannot be split at ratio {ratio} with at least 2 rows per side"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_for(seed, &[stream::SPLIT]));
    let (train_idx, test_idx) = order.split_at(n_train);

    let make = |idx: &[usize], labels: &[u8], tag: &str| -> Result<LabeledDataset> {
        let mut d = LabeledDataset::new(ds.features.select_rows(idx), idx.iter().map(|&i| labels[i]).collect())?;
        d.meta.insert("split".into(), tag.into());
        d.groups = ds
            .groups
            .iter()
            .map(|(k, v)| (k.clone(), idx.iter().map(|&i| v[i].clone()).collect()))
            .collect();
        Ok(d)
    };
    let train = make(train_idx, &ds.labels_both, "train")?;
    let test = make(test_idx, &ds.labels_either, "test")?;
    let manifest = SplitManifest {
        seed,
        ratio,
        train_indices: train_idx.to_vec(),
        test_indices: test_idx.to_vec(),
    };
    Ok((train, test, manifest))
}

/// Drops randomly chosen majority-class rows until the classes are equal.
/// Surviving rows keep their original order.
pub fn balance_undersample(ds: &LabeledDataset, seed: u64) -> Result<LabeledDataset> {
    let (neg, pos) = ds.class_counts();
    if neg == 0 || pos == 0 {
        return Err(Error::invalid(format!(
            "cannot balance: {neg} negative and {pos} positive rows"
        )));
    }
    if neg == pos {
        return Ok(ds.clone());
    }
    let majority = if neg > pos { 0 } else { 1 };
    let mut major: Vec<usize> = (0..ds.n_rows()).filter(|&i| ds.labels[i] == majority).collect();
    major.shuffle(&mut rng_for(seed, &[stream::BALANCE]));
    major.truncate(neg.min(pos));
    let mut keep: Vec<usize> = (0..ds.n_rows()).filter(|&i| ds.labels[i] != majority).collect();
    keep.extend(major);
    keep.sort_unstable();
    Ok(ds.select(&keep))
}
