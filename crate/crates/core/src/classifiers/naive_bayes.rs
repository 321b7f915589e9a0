use serde::{Deserialize, Serialize};

use crate::stats::mean_sd;

/// Per-class Gaussian likelihoods with class priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    /// Indexed by class (0 = negative, 1 = positive).
    pub means: [Vec<f64>; 2],
    /// Standard deviations; `sd^2` is at least the variance floor.
    pub sds: [Vec<f64>; 2],
    pub priors: [f64; 2],
}

impl NaiveBayesModel {
    pub(super) fn fit(x: &[Vec<f64>], y: &[u8], var_floor: f64) -> Self {
        let d = x[0].len();
        let sd_floor = var_floor.sqrt();
        let mut means: [Vec<f64>; 2] = [Vec::with_capacity(d), Vec::with_capacity(d)];
        let mut sds: [Vec<f64>; 2] = [Vec::with_capacity(d), Vec::with_capacity(d)];
        let mut priors = [0.0; 2];
        for c in 0..2u8 {
            let rows: Vec<&Vec<f64>> = x.iter().zip(y).filter(|(_, &l)| l == c).map(|(r, _)| r).collect();
            priors[c as usize] = rows.len() as f64 / x.len() as f64;
            for j in 0..d {
                let (m, s) = mean_sd(rows.iter().map(|r| r[j]));
                means[c as usize].push(m);
                sds[c as usize].push(s.max(sd_floor));
            }
        }
        NaiveBayesModel { means, sds, priors }
    }

    pub fn variances(&self, class: usize) -> Vec<f64> {
        self.sds[class].iter().map(|s| s * s).collect()
    }

    /// Joint log density `ln P(c) + Σ ln N(x_j; μ, σ)` for each class.
    pub fn log_joint(&self, q: &[f64]) -> [f64; 2] {
        let half_ln_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
        let mut out = [0.0; 2];
        for (c, o) in out.iter_mut().enumerate() {
            *o = self.priors[c].ln()
                + q.iter()
                    .zip(self.means[c].iter().zip(&self.sds[c]))
                    .map(|(&v, (&m, &s))| {
                        let z = (v - m) / s;
                        -half_ln_2pi - s.ln() - 0.5 * z * z
                    })
                    .sum::<f64>();
        }
        out
    }

    /// Posterior probability of each class.
    pub fn posteriors(&self, q: &[f64]) -> [f64; 2] {
        let [l0, l1] = self.log_joint(q);
        let p1 = logistic(l1 - l0);
        let p0 = logistic(l0 - l1);
        [p0, p1]
    }

    pub fn posterior(&self, q: &[f64]) -> f64 {
        self.posteriors(q)[1]
    }
}

/// `1 / (1 + e^-t)` without overflow.
pub(crate) fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}
