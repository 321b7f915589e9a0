//! ROC AUC (Mann-Whitney form) and confusion-matrix rates.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

fn class_counts(labels: &[u8]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&l| l == 1).count();
    (pos, labels.len() - pos)
}

/// Probability that a random positive outscores a random negative, ties
/// counting one half.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let (n_pos, n_neg) = class_counts(labels);
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::invalid("AUC needs both classes"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Walk tie groups in ascending score order; counts stay exact integers.
    let mut wins2: u64 = 0; // twice the Mann-Whitney U
    let mut neg_below: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let mut j = i;
        let (mut p, mut q) = (0u64, 0u64);
        while j < order.len() && scores[order[j]] == s {
            if labels[order[j]] == 1 {
                p += 1;
            } else {
                q += 1;
            }
            j += 1;
        }
        wins2 += 2 * p * neg_below + p * q;
        neg_below += q;
        i = j;
    }
    Ok(wins2 as f64 / (2.0 * n_pos as f64 * n_neg as f64))
}

/// ROC operating points `(fpr, tpr)` from the highest threshold down,
/// starting at (0, 0) and ending at (1, 1).
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<(f64, f64)>> {
    roc_auc(scores, labels)?;
    let (n_pos, n_neg) = class_counts(labels);
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }
    Ok(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    pub auc: Option<f64>,
    pub recall: f64,
    pub specificity: f64,
    pub precision: f64,
    pub f1: f64,
    pub confusion: Confusion,
    /// Metrics whose denominator was zero (reported as 0), plus `auc` when
    /// it could not be computed.
    pub undefined: Vec<String>,
}

fn ratio(num: usize, den: usize, name: &str, undefined: &mut Vec<String>) -> f64 {
    if den == 0 {
        undefined.push(name.to_string());
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Confusion-derived rates; `auc` is left empty.
pub fn confusion_metrics(pred: &[u8], labels: &[u8]) -> Result<MetricsReport> {
    if pred.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} labels",
            pred.len(),
            labels.len()
        )));
    }
    let mut c = Confusion::default();
    for (&p, &l) in pred.iter().zip(labels) {
        match (p == 1, l == 1) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    let mut undefined = Vec::new();
    let recall = ratio(c.tp, c.tp + c.fn_, "recall", &mut undefined);
    let specificity = ratio(c.tn, c.tn + c.fp, "specificity", &mut undefined);
    let precision = ratio(c.tp, c.tp + c.fp, "precision", &mut undefined);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(MetricsReport {
        auc: None,
        recall,
        specificity,
        precision,
        f1,
        confusion: c,
        undefined,
    })
}

/// Confusion metrics at the 0.5 threshold plus AUC when both classes occur.
pub fn evaluate_scores(scores: &[f64], labels: &[u8]) -> Result<MetricsReport> {
    let pred: Vec<u8> = scores.iter().map(|&s| (s >= 0.5) as u8).collect();
    let mut report = confusion_metrics(&pred, labels)?;
    let (p, n) = class_counts(labels);
    if p > 0 && n > 0 {
        report.auc = Some(roc_auc(scores, labels)?);
    } else {
        report.undefined.push("auc".into());
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exhaustive pair counting.
    fn pair_oracle(scores: &[f64], labels: &[u8]) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if labels[i] == 1 && labels[j] == 0 {
                    den += 1.0;
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0.9, 0.8, 0.2, 0.1], &[1, 1, 0, 0]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.3; 6], &[1, 0, 1, 0, 0, 1]).unwrap(), 0.5);
        assert_eq!(roc_auc(&[0.7, 0.4, 0.6], &[1, 1, 0]).unwrap(), 0.5);
        assert_eq!(pair_oracle(&[0.7, 0.4, 0.6], &[1, 1, 0]), 0.5);
        assert!(roc_auc(&[0.1, 0.2], &[1, 1]).is_err());
        assert!(roc_auc(&[0.1], &[1, 0]).is_err());
    }

    #[test]
    fn curve_endpoints() {
        let pts = roc_curve(&[0.9, 0.8, 0.2, 0.1], &[1, 0, 1, 0]).unwrap();
        assert_eq!(pts.first(), Some(&(0.0, 0.0)));
        assert_eq!(pts.last(), Some(&(1.0, 1.0)));
        // Trapezoid area equals the Mann-Whitney AUC.
        let area: f64 = pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum();
        assert!((area - 0.75).abs() < 1e-12);
    }

    #[test]
    fn confusion_examples() {
        let labels = [1, 0, 1, 0, 1];
        let r = confusion_metrics(&labels, &labels).unwrap();
        assert_eq!((r.recall, r.specificity, r.precision, r.f1), (1.0, 1.0, 1.0, 1.0));
        let inv: Vec<u8> = labels.iter().map(|l| 1 - l).collect();
        let r = confusion_metrics(&inv, &labels).unwrap();
        assert_eq!((r.recall, r.specificity, r.precision, r.f1), (0.0, 0.0, 0.0, 0.0));
        // tp=3, fp=2, fn=1, tn=4
        let pred = [1, 1, 1, 1, 1, 0, 0, 0, 0, 0];
        let lab = [1, 1, 1, 0, 0, 1, 0, 0, 0, 0];
        let r = confusion_metrics(&pred, &lab).unwrap();
        assert_eq!(r.confusion, Confusion { tp: 3, fp: 2, tn: 4, fn_: 1 });
        assert_eq!(r.recall, 0.75);
        assert_eq!(r.precision, 0.6);
        assert!((r.specificity - 4.0 / 6.0).abs() < 1e-15);
        assert!((r.f1 - 2.0 * 0.6 * 0.75 / 1.35).abs() < 1e-15);
        assert!((r.f1 - 0.6667).abs() < 1e-4);
        assert!(confusion_metrics(&[1], &[1, 0]).is_err());
    }

    #[test]
    fn zero_denominators_flagged() {
        let r = confusion_metrics(&[0, 0], &[0, 0]).unwrap();
        assert_eq!(r.recall, 0.0);
        assert!(r.undefined.contains(&"recall".to_string()));
        assert!(r.undefined.contains(&"precision".to_string()));
        let e = evaluate_scores(&[0.2, 0.9], &[0, 0]).unwrap();
        assert_eq!(e.auc, None);
        assert!(e.undefined.contains(&"auc".to_string()));
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
        (2usize..60).prop_flat_map(|n| {
            (
                prop::collection::vec(prop_oneof![0.0f64..1.0, (0u8..5).prop_map(|k| k as f64 / 4.0)], n),
                prop::collection::vec(0u8..2, n),
            )
        })
    }

    proptest! {
        #[test]
        fn matches_pair_oracle((s, l) in instance()) {
            prop_assume!(l.contains(&1) && l.contains(&0));
            prop_assert!((roc_auc(&s, &l).unwrap() - pair_oracle(&s, &l)).abs() <= 1e-12);
        }

        #[test]
        fn monotone_invariance((s, l) in instance()) {
            prop_assume!(l.contains(&1) && l.contains(&0));
            let t: Vec<f64> = s.iter().map(|v| (3.0 * v).exp() - 7.0).collect();
            prop_assert_eq!(roc_auc(&s, &l).unwrap(), roc_auc(&t, &l).unwrap());
        }

        #[test]
        fn complement_sums_to_one((s, l) in instance()) {
            prop_assume!(l.contains(&1) && l.contains(&0));
            let inv: Vec<u8> = l.iter().map(|x| 1 - x).collect();
            prop_assert!((roc_auc(&s, &l).unwrap() + roc_auc(&s, &inv).unwrap() - 1.0).abs() < 1e-12);
        }
    }
}
