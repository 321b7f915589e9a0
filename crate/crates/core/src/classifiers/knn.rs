use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<u8>,
}

impl KnnModel {
    pub(super) fn fit(x: &[Vec<f64>], y: &[u8], k: usize) -> Self {
        KnnModel {
            k,
            x: x.to_vec(),
            y: y.to_vec(),
        }
    }

    /// Fraction of positives among the `k` nearest training rows (Euclidean;
    /// equal distances resolved by lower row index).
    pub fn score(&self, q: &[f64]) -> f64 {
        let k = self.k.min(self.x.len());
        let mut dist: Vec<(f64, usize)> = self
            .x
            .iter()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, cmp);
        }
        let pos = dist[..k].iter().filter(|&&(_, i)| self.y[i] == 1).count();
        pos as f64 / k as f64
    }
}
