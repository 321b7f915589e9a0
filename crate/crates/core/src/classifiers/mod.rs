//! KNN, Gaussian naive Bayes, CART decision tree and a one-hidden-layer MLP
//! behind a common fit/score interface.

mod decision_tree;
mod knn;
mod mlp;
mod naive_bayes;

use serde::{Deserialize, Serialize};

use crate::stats::{is_degenerate, mean_sd};
use crate::{Error, Result};

pub use decision_tree::{DtNode, TreeModel};
pub use knn::KnnModel;
pub use mlp::{Activation, MlpModel};
pub use naive_bayes::NaiveBayesModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Knn,
    GaussianNb,
    DecisionTree,
    Mlp,
}

impl ClassifierKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "knn" => Ok(ClassifierKind::Knn),
            "nb" | "gaussian_nb" | "naive_bayes" => Ok(ClassifierKind::GaussianNb),
            "dt" | "decision_tree" => Ok(ClassifierKind::DecisionTree),
            "mlp" => Ok(ClassifierKind::Mlp),
            other => Err(Error::config(format!("unknown classifier {other:?}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassifierKind::Knn => "knn",
            ClassifierKind::GaussianNb => "gaussian_nb",
            ClassifierKind::DecisionTree => "decision_tree",
            ClassifierKind::Mlp => "mlp",
        }
    }

    /// Distance- and gradient-based models see z-scored inputs.
    fn standardizes(self) -> bool {
        matches!(self, ClassifierKind::Knn | ClassifierKind::Mlp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 10,
            min_leaf: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpParams {
    pub hidden: usize,
    pub activation: Activation,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: 15,
            activation: Activation::Relu,
            lr: 0.01,
            epochs: 200,
            batch: 32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    pub knn: KnnParams,
    pub tree: TreeParams,
    pub mlp: MlpParams,
    /// Gaussian NB variance floor.
    pub nb_var_floor: f64,
}

impl Default for ClassifierSpec {
    fn default() -> Self {
        ClassifierSpec {
            kind: ClassifierKind::Mlp,
            knn: KnnParams::default(),
            tree: TreeParams::default(),
            mlp: MlpParams::default(),
            nb_var_floor: 1e-9,
        }
    }
}

impl ClassifierSpec {
    pub fn of(kind: ClassifierKind) -> Self {
        ClassifierSpec {
            kind,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.knn.k == 0 || self.knn.k.is_multiple_of(2) {
            return Err(Error::config(format!("knn.k must be odd and >= 1, got {}", self.knn.k)));
        }
        if self.tree.max_depth == 0 || self.tree.min_leaf == 0 {
            return Err(Error::config("tree.max_depth and tree.min_leaf must be positive"));
        }
        if self.mlp.hidden == 0 || self.mlp.batch == 0 || !(self.mlp.lr > 0.0) {
            return Err(Error::config("mlp.hidden, mlp.batch and mlp.lr must be positive"));
        }
        if !(self.nb_var_floor > 0.0) {
            return Err(Error::config("nb_var_floor must be positive"));
        }
        Ok(())
    }
}

/// Per-column z-scoring fitted on training data. Columns with negligible
/// spread map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Zero for degenerate columns.
    pub sd: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Self {
        let d = x.first().map_or(0, Vec::len);
        let (mut mean, mut sd) = (Vec::with_capacity(d), Vec::with_capacity(d));
        for j in 0..d {
            let (m, s) = mean_sd(x.iter().map(|r| r[j]));
            mean.push(m);
            sd.push(if is_degenerate(s, m) { 0.0 } else { s });
        }
        Standardizer { mean, sd }
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.sd))
            .map(|(&v, (&m, &s))| if s == 0.0 { 0.0 } else { (v - m) / s })
            .collect()
    }

    pub fn apply(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter().map(|r| self.apply_row(r)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    Knn(KnnModel),
    GaussianNb(NaiveBayesModel),
    DecisionTree(TreeModel),
    Mlp(MlpModel),
}

/// A fitted classifier. Immutable after training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub n_features: usize,
    pub standardizer: Option<Standardizer>,
    pub params: ModelParams,
}

fn check_matrix(x: &[Vec<f64>], width: Option<usize>) -> Result<usize> {
    let d = width.unwrap_or_else(|| x.first().map_or(0, Vec::len));
    if let Some(i) = x.iter().position(|r| r.len() != d) {
        return Err(Error::invalid(format!(
            "row {i} has {} columns, expected {d}",
            x[i].len()
        )));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("input contains non-finite values"));
    }
    Ok(d)
}

pub fn train_classifier(spec: &ClassifierSpec, x: &[Vec<f64>], y: &[u8], seed: u64) -> Result<Model> {
    spec.validate()?;
    if x.len() != y.len() {
        return Err(Error::invalid(format!("{} rows but {} labels", x.len(), y.len())));
    }
    let d = check_matrix(x, None)?;
    if d == 0 {
        return Err(Error::invalid("training data has no columns"));
    }
    let pos = y.iter().filter(|&&l| l == 1).count();
    if pos == 0 || pos == y.len() || y.iter().any(|&l| l > 1) {
        return Err(Error::invalid("training labels must be binary with both classes present"));
    }
    let standardizer = spec.kind.standardizes().then(|| Standardizer::fit(x));
    let xs_owned;
    let xs: &[Vec<f64>] = match &standardizer {
        Some(s) => {
            xs_owned = s.apply(x);
            &xs_owned
        }
        None => x,
    };
    let params = match spec.kind {
        ClassifierKind::Knn => ModelParams::Knn(KnnModel::fit(xs, y, spec.knn.k)),
        ClassifierKind::GaussianNb => ModelParams::GaussianNb(NaiveBayesModel::fit(xs, y, spec.nb_var_floor)),
        ClassifierKind::DecisionTree => ModelParams::DecisionTree(TreeModel::fit(xs, y, &spec.tree)),
        ClassifierKind::Mlp => ModelParams::Mlp(MlpModel::fit(xs, y, &spec.mlp, seed)),
    };
    Ok(Model {
        n_features: d,
        standardizer,
        params,
    })
}

impl Model {
    pub fn kind(&self) -> ClassifierKind {
        match self.params {
            ModelParams::Knn(_) => ClassifierKind::Knn,
            ModelParams::GaussianNb(_) => ClassifierKind::GaussianNb,
            ModelParams::DecisionTree(_) => ClassifierKind::DecisionTree,
            ModelParams::Mlp(_) => ClassifierKind::Mlp,
        }
    }

    /// Positive-class scores in `[0, 1]`.
    pub fn predict_score(&self, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        check_matrix(x, Some(self.n_features))?;
        let xs_owned;
        let xs: &[Vec<f64>] = match &self.standardizer {
            Some(s) => {
                xs_owned = s.apply(x);
                &xs_owned
            }
            None => x,
        };
        Ok(match &self.params {
            ModelParams::Knn(m) => xs.iter().map(|r| m.score(r)).collect(),
            ModelParams::GaussianNb(m) => xs.iter().map(|r| m.posterior(r)).collect(),
            ModelParams::DecisionTree(m) => xs.iter().map(|r| m.score(r)).collect(),
            ModelParams::Mlp(m) => xs.iter().map(|r| m.forward(r)).collect(),
        })
    }

    /// Hard labels: score >= 0.5 is positive.
    pub fn predict_label(&self, x: &[Vec<f64>]) -> Result<Vec<u8>> {
        Ok(self.predict_score(x)?.into_iter().map(|s| (s >= 0.5) as u8).collect())
    }
}

pub fn predict_score(m: &Model, x: &[Vec<f64>]) -> Result<Vec<f64>> {
    m.predict_score(x)
}

pub fn predict_label(m: &Model, x: &[Vec<f64>]) -> Result<Vec<u8>> {
    m.predict_label(x)
}
