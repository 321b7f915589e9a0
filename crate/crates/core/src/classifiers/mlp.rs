//! Single-hidden-layer perceptron with a logistic output, trained by plain
//! mini-batch gradient descent on binary cross-entropy.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::naive_bayes::logistic;
use super::MlpParams;
use crate::seed::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Logistic,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Logistic => logistic(z),
        }
    }

    /// Derivative expressed through the activation output `a` and input `z`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => (z > 0.0) as u8 as f64,
            Activation::Logistic => a * (1.0 - a),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub n_inputs: usize,
    pub hidden: usize,
    pub activation: Activation,
    /// Row-major `hidden x n_inputs`.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

/// `softplus(z) - y z`, the cross-entropy of a logistic output at logit `z`.
fn bce_from_logit(z: f64, y: f64) -> f64 {
    let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
    softplus - y * z
}

impl MlpModel {
    /// Weights and biases drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn init(n_inputs: usize, hidden: usize, activation: Activation, seed: u64) -> Self {
        let mut rng = rng_for(seed, &[0]);
        let a1 = 1.0 / (n_inputs as f64).sqrt();
        let a2 = 1.0 / (hidden as f64).sqrt();
        MlpModel {
            n_inputs,
            hidden,
            activation,
            w1: (0..hidden * n_inputs).map(|_| rng.random_range(-a1..a1)).collect(),
            b1: (0..hidden).map(|_| rng.random_range(-a1..a1)).collect(),
            w2: (0..hidden).map(|_| rng.random_range(-a2..a2)).collect(),
            b2: rng.random_range(-a2..a2),
        }
    }

    pub(super) fn fit(x: &[Vec<f64>], y: &[u8], p: &MlpParams, seed: u64) -> Self {
        let mut m = MlpModel::init(x[0].len(), p.hidden, p.activation, seed);
        let mut order: Vec<usize> = (0..x.len()).collect();
        let mut rng = rng_for(seed, &[1]);
        let mut grad = m.zeros_like();
        for _ in 0..p.epochs {
            order.shuffle(&mut rng);
            for batch in order.chunks(p.batch) {
                grad.iter_mut().for_each(|g| *g = 0.0);
                for &i in batch {
                    m.accumulate_gradient(&x[i], y[i] as f64, &mut grad);
                }
                let step = p.lr / batch.len() as f64;
                m.apply_step(&grad, step);
            }
        }
        m
    }

    fn zeros_like(&self) -> Vec<f64> {
        vec![0.0; self.n_params()]
    }

    pub fn n_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + 1
    }

    /// Parameters flattened as `w1, b1, w2, b2`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        v.extend(&self.w1);
        v.extend(&self.b1);
        v.extend(&self.w2);
        v.push(self.b2);
        v
    }

    pub fn set_flat(&mut self, v: &[f64]) {
        let (a, rest) = v.split_at(self.w1.len());
        let (b, rest) = rest.split_at(self.b1.len());
        let (c, d) = rest.split_at(self.w2.len());
        self.w1.copy_from_slice(a);
        self.b1.copy_from_slice(b);
        self.w2.copy_from_slice(c);
        self.b2 = d[0];
    }

    fn apply_step(&mut self, grad: &[f64], step: f64) {
        let mut at = 0;
        for p in self.w1.iter_mut().chain(self.b1.iter_mut()).chain(self.w2.iter_mut()) {
            *p -= step * grad[at];
            at += 1;
        }
        self.b2 -= step * grad[at];
    }

    fn hidden_layer(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut z = self.b1.clone();
        for (h, zh) in z.iter_mut().enumerate() {
            let row = &self.w1[h * self.n_inputs..(h + 1) * self.n_inputs];
            *zh += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
        let a = z.iter().map(|&v| self.activation.apply(v)).collect();
        (z, a)
    }

    fn logit(&self, a: &[f64]) -> f64 {
        self.b2 + self.w2.iter().zip(a).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        let (_, a) = self.hidden_layer(x);
        logistic(self.logit(&a))
    }

    fn accumulate_gradient(&self, x: &[f64], y: f64, grad: &mut [f64]) {
        let (z, a) = self.hidden_layer(x);
        let delta_out = logistic(self.logit(&a)) - y;
        let (gw1, rest) = grad.split_at_mut(self.w1.len());
        let (gb1, rest) = rest.split_at_mut(self.b1.len());
        let (gw2, gb2) = rest.split_at_mut(self.w2.len());
        gb2[0] += delta_out;
        for h in 0..self.hidden {
            gw2[h] += delta_out * a[h];
            let delta_h = delta_out * self.w2[h] * self.activation.derivative(z[h], a[h]);
            gb1[h] += delta_h;
            for (g, v) in gw1[h * self.n_inputs..(h + 1) * self.n_inputs].iter_mut().zip(x) {
                *g += delta_h * v;
            }
        }
    }

    /// Mean cross-entropy over the rows.
    pub fn loss(&self, x: &[Vec<f64>], y: &[u8]) -> f64 {
        x.iter()
            .zip(y)
            .map(|(r, &l)| {
                let (_, a) = self.hidden_layer(r);
                bce_from_logit(self.logit(&a), l as f64)
            })
            .sum::<f64>()
            / x.len() as f64
    }

    /// Analytic gradient of [`MlpModel::loss`], flattened like [`MlpModel::to_flat`].
    pub fn gradient(&self, x: &[Vec<f64>], y: &[u8]) -> Vec<f64> {
        let mut g = self.zeros_like();
        for (r, &l) in x.iter().zip(y) {
            self.accumulate_gradient(r, l as f64, &mut g);
        }
        let n = x.len() as f64;
        g.iter_mut().for_each(|v| *v /= n);
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Vec<Vec<f64>>, Vec<u8>) {
        (
            vec![
                vec![0.5, -1.2, 0.3],
                vec![-0.7, 0.4, 1.1],
                vec![1.3, 0.2, -0.5],
                vec![-0.1, -0.9, 0.8],
                vec![0.9, 1.4, -1.0],
            ],
            vec![1, 0, 1, 0, 1],
        )
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (x, y) = toy();
        for act in [Activation::Relu, Activation::Logistic] {
            let m = MlpModel::init(3, 4, act, 17);
            let g = m.gradient(&x, &y);
            let base = m.to_flat();
            let eps = 1e-5;
            for k in 0..base.len() {
                let mut probe = m.clone();
                let mut p = base.clone();
                p[k] += eps;
                probe.set_flat(&p);
                let up = probe.loss(&x, &y);
                p[k] -= 2.0 * eps;
                probe.set_flat(&p);
                let down = probe.loss(&x, &y);
                let fd = (up - down) / (2.0 * eps);
                let rel = (fd - g[k]).abs() / g[k].abs().max(fd.abs()).max(1e-8);
                assert!(rel < 1e-4 || (fd - g[k]).abs() < 1e-9, "{act:?} param {k}: fd {fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn training_is_deterministic_and_learns() {
        let (x, y) = toy();
        let p = MlpParams {
            epochs: 500,
            lr: 0.1,
            ..Default::default()
        };
        let a = MlpModel::fit(&x, &y, &p, 3);
        let b = MlpModel::fit(&x, &y, &p, 3);
        assert_eq!(a, b);
        let before = MlpModel::init(3, 15, Activation::Relu, 3).loss(&x, &y);
        assert!(a.loss(&x, &y) < before);
    }

    #[test]
    fn flat_round_trip() {
        let mut m = MlpModel::init(2, 3, Activation::Relu, 1);
        let v: Vec<f64> = (0..m.n_params()).map(|i| i as f64).collect();
        m.set_flat(&v);
        assert_eq!(m.to_flat(), v);
    }

    #[test]
    fn stable_loss() {
        assert!(bce_from_logit(800.0, 0.0).is_finite());
        assert!(bce_from_logit(-800.0, 1.0).is_finite());
        assert!((bce_from_logit(0.0, 1.0) - 2f64.ln()).abs() < 1e-15);
    }
}
