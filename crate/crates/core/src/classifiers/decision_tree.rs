//! CART with Gini impurity. Candidate thresholds are midpoints between
//! consecutive distinct values; `x <= threshold` goes left.

use serde::{Deserialize, Serialize};

use super::TreeParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DtNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        positive_fraction: f64,
        n: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    /// Node 0 is the root.
    pub nodes: Vec<DtNode>,
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

struct Best {
    score: f64,
    feature: usize,
    threshold: f64,
}

fn best_split(x: &[Vec<f64>], y: &[u8], idx: &[usize], min_leaf: usize) -> Option<Best> {
    let n = idx.len();
    let total_pos = idx.iter().filter(|&&i| y[i] == 1).count();
    let d = x[idx[0]].len();
    let mut best: Option<Best> = None;
    let mut order = idx.to_vec();
    for f in 0..d {
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
        let mut left_pos = 0;
        for k in 0..n - 1 {
            left_pos += (y[order[k]] == 1) as usize;
            let (lo, hi) = (x[order[k]][f], x[order[k + 1]][f]);
            let n_left = k + 1;
            if lo == hi || n_left < min_leaf || n - n_left < min_leaf {
                continue;
            }
            let score = (n_left as f64 * gini(left_pos, n_left)
                + (n - n_left) as f64 * gini(total_pos - left_pos, n - n_left))
                / n as f64;
            if best.as_ref().is_none_or(|b| score < b.score) {
                let mut threshold = lo / 2.0 + hi / 2.0;
                if threshold >= hi {
                    threshold = lo;
                }
                best = Some(Best {
                    score,
                    feature: f,
                    threshold,
                });
            }
        }
    }
    best
}

impl TreeModel {
    pub(super) fn fit(x: &[Vec<f64>], y: &[u8], params: &TreeParams) -> Self {
        let mut model = TreeModel { nodes: Vec::new() };
        let idx: Vec<usize> = (0..x.len()).collect();
        model.grow(x, y, idx, 0, params);
        model
    }

    fn grow(&mut self, x: &[Vec<f64>], y: &[u8], idx: Vec<usize>, depth: usize, params: &TreeParams) -> usize {
        let id = self.nodes.len();
        let pos = idx.iter().filter(|&&i| y[i] == 1).count();
        let leaf = DtNode::Leaf {
            positive_fraction: pos as f64 / idx.len() as f64,
            n: idx.len(),
        };
        self.nodes.push(leaf);
        if depth >= params.max_depth || pos == 0 || pos == idx.len() || idx.len() < 2 * params.min_leaf {
            return id;
        }
        let Some(best) = best_split(x, y, &idx, params.min_leaf) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[i][best.feature] <= best.threshold);
        let left = self.grow(x, y, l, depth + 1, params);
        let right = self.grow(x, y, r, depth + 1, params);
        self.nodes[id] = DtNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        id
    }

    /// Positive fraction of the leaf reached by `q`.
    pub fn score(&self, q: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                DtNode::Leaf { positive_fraction, .. } => return *positive_fraction,
                DtNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if q[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[DtNode], i: usize) -> usize {
            match &nodes[i] {
                DtNode::Leaf { .. } => 0,
                DtNode::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}
