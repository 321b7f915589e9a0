//! Cross-validated AUC of a tree's constructed features.

use rand::seq::SliceRandom;

use super::tree::{extract_features, GpTree};
use crate::classifiers::{train_classifier, ClassifierSpec};
use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::metrics::roc_auc;
use crate::seed::{derive_seed, rng_for};

/// Fold id for every row. Each class is shuffled separately and dealt
/// round-robin, so fold class counts differ by at most one.
pub fn stratified_folds(labels: &[u8], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng_for(seed, &[0]);
    let mut fold = vec![0; labels.len()];
    let mut next = 0;
    for class in [0u8, 1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        for i in idx {
            fold[i] = next % k;
            next += 1;
        }
    }
    fold
}

/// Mean held-fold AUC of `spec` trained on the tree's constructed features.
/// Folds missing a class in either part are skipped; if all are skipped the
/// result is 0.5.
pub fn fitness(tree: &GpTree, train: &LabeledDataset, spec: &ClassifierSpec, k: usize, seed: u64) -> Result<f64> {
    if k < 2 {
        return Err(Error::config("cross-validation needs at least 2 folds"));
    }
    if let Some(m) = tree.max_terminal() {
        if m >= train.features.n_cols() {
            return Err(Error::invalid(format!(
                "tree uses ARG{m} but the table has {} columns",
                train.features.n_cols()
            )));
        }
    }
    let constructed = extract_features(tree, &train.features)?;
    let folds = stratified_folds(&train.labels, k, seed);
    let y = &train.labels;
    let mut total = 0.0;
    let mut used = 0;
    for f in 0..k {
        let (mut xtr, mut ytr, mut xte, mut yte) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (i, row) in constructed.rows.iter().enumerate() {
            if folds[i] == f {
                xte.push(row.clone());
                yte.push(y[i]);
            } else {
                xtr.push(row.clone());
                ytr.push(y[i]);
            }
        }
        let has_both = |v: &[u8]| v.contains(&0) && v.contains(&1);
        if !has_both(&ytr) || !has_both(&yte) {
            continue;
        }
        let model = train_classifier(spec, &xtr, &ytr, derive_seed(seed, &[1, f as u64]))?;
        total += roc_auc(&model.predict_score(&xte)?, &yte)?;
        used += 1;
    }
    Ok(if used == 0 { 0.5 } else { total / used as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::ClassifierKind;
    use crate::features::FeatureMatrix;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    pub(crate) fn toy(n: usize, seed: u64) -> LabeledDataset {
        let mut rng = rng_for(seed, &[]);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let rows = labels
            .iter()
            .map(|&l| {
                let mut r = vec![l as f64 + noise.sample(&mut rng)];
                r.extend((0..4).map(|_| rng.random::<f64>()));
                r
            })
            .collect();
        let fm = FeatureMatrix::new(rows, (0..5).map(|j| format!("ARG{j}")).collect(), (0..n).collect()).unwrap();
        LabeledDataset::new(fm, labels).unwrap()
    }

    #[test]
    fn folds_are_stratified() {
        let labels: Vec<u8> = (0..50).map(|i| (i % 5 == 0) as u8).collect();
        let f = stratified_folds(&labels, 3, 9);
        for k in 0..3 {
            let pos = (0..50).filter(|&i| f[i] == k && labels[i] == 1).count();
            let neg = (0..50).filter(|&i| f[i] == k && labels[i] == 0).count();
            assert!((3..=4).contains(&pos), "{pos}");
            assert!((13..=14).contains(&neg), "{neg}");
        }
        assert_eq!(f, stratified_folds(&labels, 3, 9));
    }

    #[test]
    fn informative_and_constant_trees() {
        let ds = toy(120, 1);
        let knn = ClassifierSpec::of(ClassifierKind::Knn);
        let good: GpTree = "F(ARG0)".parse().unwrap();
        assert!(fitness(&good, &ds, &knn, 3, 5).unwrap() > 0.9);
        let flat: GpTree = "F(1.0)".parse().unwrap();
        let v = fitness(&flat, &ds, &knn, 3, 5).unwrap();
        assert!((v - 0.5).abs() <= 0.1, "{v}");
    }

    #[test]
    fn repeatable() {
        let ds = toy(90, 2);
        let t: GpTree = "F(add(ARG1, mul(ARG0, ARG2)))".parse().unwrap();
        for kind in [ClassifierKind::Knn, ClassifierKind::Mlp, ClassifierKind::GaussianNb] {
            let spec = ClassifierSpec::of(kind);
            assert_eq!(fitness(&t, &ds, &spec, 3, 4).unwrap(), fitness(&t, &ds, &spec, 3, 4).unwrap());
        }
    }

    #[test]
    fn knn_ranking_ignores_feature_scale() {
        let ds = toy(90, 3);
        let mut scaled = ds.clone();
        for r in &mut scaled.features.rows {
            r.iter_mut().for_each(|v| *v *= 37.5);
        }
        let knn = ClassifierSpec::of(ClassifierKind::Knn);
        for s in ["F(ARG0)", "F(mul(ARG1, ARG0))", "F(ARG2)", "add(F(ARG3), F(ARG0))"] {
            let t: GpTree = s.parse().unwrap();
            let a = fitness(&t, &ds, &knn, 3, 1).unwrap();
            let b = fitness(&t, &scaled, &knn, 3, 1).unwrap();
            assert!((a - b).abs() < 1e-12, "{s}: {a} vs {b}");
        }
    }

    #[test]
    fn out_of_range_terminal_is_rejected() {
        let ds = toy(30, 1);
        let t: GpTree = "F(ARG9)".parse().unwrap();
        assert!(fitness(&t, &ds, &ClassifierSpec::default(), 3, 0).is_err());
    }
}
