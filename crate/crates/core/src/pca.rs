//! Principal component analysis via cyclic Jacobi eigendecomposition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Eigenpairs of a symmetric matrix, eigenvalues in descending order and
/// eigenvectors as rows.
pub fn symmetric_eigen(a: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = a.len();
    if a.iter().any(|r| r.len() != n) {
        return Err(Error::invalid("matrix is not square"));
    }
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect()).collect();
    let norm = m.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    let off = |m: &[Vec<f64>]| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[i][j] * m[i][j];
                }
            }
        }
        s.sqrt()
    };
    let mut sweeps = 0;
    while off(&m) > 1e-12 * norm {
        sweeps += 1;
        if sweeps > 100 {
            return Err(Error::Runtime("Jacobi eigensolver did not converge".into()));
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p][q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j][j].total_cmp(&m[i][i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m[i][i]).collect();
    let vectors = order
        .iter()
        .map(|&i| {
            let mut axis: Vec<f64> = v.iter().map(|row| row[i]).collect();
            // Fix the sign so the largest-magnitude entry is positive.
            let big = axis.iter().copied().fold(0.0f64, |b, x| if x.abs() > b.abs() { x } else { b });
            if big < 0.0 {
                axis.iter_mut().for_each(|x| *x = -*x);
            }
            axis
        })
        .collect();
    Ok((values, vectors))
}

/// Sample covariance with divisor `n - 1`.
pub fn covariance(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = x.len();
    let d = x.first().map_or(0, Vec::len);
    let mean: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let mut c = vec![vec![0.0; d]; d];
    for r in x {
        for i in 0..d {
            let di = r[i] - mean[i];
            for j in i..d {
                c[i][j] += di * (r[j] - mean[j]);
            }
        }
    }
    let div = (n.max(2) - 1) as f64;
    for i in 0..d {
        for j in i..d {
            c[i][j] /= div;
            c[j][i] = c[i][j];
        }
    }
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Per-column divisor applied after centering; all ones for covariance PCA.
    pub scale: Vec<f64>,
    /// Unit axes ordered by explained variance.
    pub axes: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub explained_ratio: Vec<f64>,
    pub n_retained: usize,
}

/// Fits PCA and keeps the shortest prefix of components whose cumulative
/// explained variance reaches `var_threshold`. With `standardize`, columns
/// are scaled to unit sample variance first (correlation PCA); constant
/// columns are left unscaled.
pub fn pca_fit(x: &[Vec<f64>], var_threshold: f64, standardize: bool) -> Result<PcaModel> {
    if !(var_threshold > 0.0 && var_threshold <= 1.0) {
        return Err(Error::config(format!("variance threshold {var_threshold} outside (0, 1]")));
    }
    let d = x.first().map_or(0, Vec::len);
    if x.len() < 2 || d == 0 || x.iter().any(|r| r.len() != d) {
        return Err(Error::invalid("PCA needs at least 2 rows of equal, non-zero width"));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("PCA input contains non-finite values"));
    }
    let n = x.len() as f64;
    let mean: Vec<f64> = (0..d).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let scale: Vec<f64> = if standardize {
        (0..d)
            .map(|j| {
                let var = x.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / (n - 1.0);
                let sd = var.sqrt();
                if sd > 1e-12 * mean[j].abs().max(1.0) {
                    sd
                } else {
                    1.0
                }
            })
            .collect()
    } else {
        vec![1.0; d]
    };
    let z: Vec<Vec<f64>> = x.iter().map(|r| (0..d).map(|j| (r[j] - mean[j]) / scale[j]).collect()).collect();
    let (values, axes) = symmetric_eigen(&covariance(&z))?;
    let clipped: Vec<f64> = values.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if !(total > 0.0) {
        return Err(Error::invalid("data has zero total variance"));
    }
    let explained_ratio: Vec<f64> = clipped.iter().map(|v| v / total).collect();
    let mut cum = 0.0;
    let mut n_retained = d;
    for (k, r) in explained_ratio.iter().enumerate() {
        cum += r;
        if cum >= var_threshold - 1e-12 {
            n_retained = k + 1;
            break;
        }
    }
    Ok(PcaModel {
        mean,
        scale,
        axes,
        eigenvalues: values,
        explained_ratio,
        n_retained,
    })
}

impl PcaModel {
    pub fn n_inputs(&self) -> usize {
        self.mean.len()
    }

    /// Scores on the first `k` axes.
    pub fn project(&self, x: &[Vec<f64>], k: usize) -> Result<Vec<Vec<f64>>> {
        let d = self.n_inputs();
        if k > self.axes.len() {
            return Err(Error::invalid(format!("{k} components requested, {} available", self.axes.len())));
        }
        x.iter()
            .map(|r| {
                if r.len() != d {
                    return Err(Error::invalid(format!("row has {} columns, PCA was fitted on {d}", r.len())));
                }
                let z: Vec<f64> = (0..d).map(|j| (r[j] - self.mean[j]) / self.scale[j]).collect();
                Ok(self.axes[..k].iter().map(|a| a.iter().zip(&z).map(|(u, v)| u * v).sum()).collect())
            })
            .collect()
    }

    /// Scores on the retained axes.
    pub fn transform(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.project(x, self.n_retained)
    }

    /// Maps scores on the leading `z[i].len()` axes back to input space.
    pub fn inverse_transform(&self, z: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let d = self.n_inputs();
        z.iter()
            .map(|s| {
                if s.len() > self.axes.len() {
                    return Err(Error::invalid("more scores than axes"));
                }
                let mut r = vec![0.0; d];
                for (a, &w) in self.axes.iter().zip(s) {
                    for (rj, aj) in r.iter_mut().zip(a) {
                        *rj += w * aj;
                    }
                }
                Ok(r.iter().enumerate().map(|(j, v)| v * self.scale[j] + self.mean[j]).collect())
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_for;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn gaussian(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = rng_for(seed, &[]);
        let nd = Normal::new(0.0, 1.0).unwrap();
        (0..n).map(|_| (0..d).map(|_| nd.sample(&mut rng)).collect()).collect()
    }

    #[test]
    fn isotropic_keeps_all_three() {
        let m = pca_fit(&gaussian(2000, 3, 1), 0.95, false).unwrap();
        assert_eq!(m.n_retained, 3);
        for r in &m.explained_ratio {
            assert!((r - 1.0 / 3.0).abs() < 0.05, "{r}");
        }
    }

    #[test]
    fn line_in_five_dims() {
        let dir = [1.0, -2.0, 0.5, 3.0, 0.0];
        let x: Vec<Vec<f64>> = (0..40).map(|i| dir.iter().map(|d| d * (i as f64 * 0.3 - 4.0) + 1.0).collect()).collect();
        for standardize in [false, true] {
            let m = pca_fit(&x, 0.95, standardize).unwrap();
            assert_eq!(m.n_retained, 1);
            let m = pca_fit(&x, 1.0, standardize).unwrap();
            assert_eq!(m.n_retained, 1);
        }
    }

    #[test]
    fn threshold_one_keeps_nonzero_components() {
        let mut x = gaussian(100, 3, 4);
        for r in &mut x {
            r.push(r[0] + r[1]);
        }
        let m = pca_fit(&x, 1.0, false).unwrap();
        assert_eq!(m.n_retained, 3);
    }

    #[test]
    fn constant_data_is_an_error() {
        let x = vec![vec![2.0, 3.0]; 10];
        assert!(pca_fit(&x, 0.95, true).is_err());
        assert!(pca_fit(&gaussian(10, 2, 1), 0.0, true).is_err());
        let m = pca_fit(&gaussian(10, 2, 1), 0.9, true).unwrap();
        assert!(m.transform(&[vec![1.0]]).is_err());
    }

    #[test]
    fn mean_row_maps_to_zero() {
        let x = gaussian(50, 4, 2);
        let m = pca_fit(&x, 0.95, true).unwrap();
        for v in &m.transform(std::slice::from_ref(&m.mean)).unwrap()[0] {
            assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn minimal_prefix() {
        let mut rng = rng_for(5, &[]);
        let x: Vec<Vec<f64>> = (0..300)
            .map(|_| (0..6).map(|j| rng.random_range(-1.0..1.0) * (6 - j) as f64).collect())
            .collect();
        for t in [0.3, 0.6, 0.8, 0.95, 0.99] {
            let m = pca_fit(&x, t, false).unwrap();
            let cum: f64 = m.explained_ratio[..m.n_retained].iter().sum();
            assert!(cum >= t - 1e-12);
            if m.n_retained > 1 {
                let shorter: f64 = m.explained_ratio[..m.n_retained - 1].iter().sum();
                assert!(shorter < t);
            }
        }
    }

    fn arb_matrix() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (2usize..7).prop_flat_map(|d| prop::collection::vec(prop::collection::vec(-10.0f64..10.0, d), d + 2..30))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn eigen_invariants(x in arb_matrix(), standardize in any::<bool>()) {
            let m = match pca_fit(&x, 0.95, standardize) {
                Ok(m) => m,
                Err(_) => return Ok(()),
            };
            let d = m.n_inputs();
            for i in 0..d {
                for j in 0..d {
                    let dot: f64 = m.axes[i].iter().zip(&m.axes[j]).map(|(a, b)| a * b).sum();
                    prop_assert!((dot - (i == j) as u8 as f64).abs() < 1e-9);
                }
            }
            prop_assert!((m.explained_ratio.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for w in m.explained_ratio.windows(2) {
                prop_assert!(w[0] >= w[1]);
            }

            // Reconstruct the covariance from every eigenpair.
            let z: Vec<Vec<f64>> = x.iter().map(|r| (0..d).map(|j| (r[j] - m.mean[j]) / m.scale[j]).collect()).collect();
            let c = covariance(&z);
            let mut err = 0.0;
            let mut norm = 0.0;
            for i in 0..d {
                for j in 0..d {
                    let r: f64 = (0..d).map(|k| m.eigenvalues[k] * m.axes[k][i] * m.axes[k][j]).sum();
                    err += (r - c[i][j]).powi(2);
                    norm += c[i][j].powi(2);
                }
            }
            prop_assert!(err.sqrt() <= 1e-8 * norm.sqrt().max(1e-300));

            // Full projection round trip and uncorrelated scores.
            let scores = m.project(&x, d).unwrap();
            let back = m.inverse_transform(&scores).unwrap();
            for (a, b) in x.iter().zip(&back) {
                for (u, v) in a.iter().zip(b) {
                    prop_assert!((u - v).abs() < 1e-8);
                }
            }
            let sc = covariance(&scores);
            let scale = sc.iter().enumerate().map(|(i, r)| r[i]).fold(1.0f64, f64::max);
            for i in 0..d {
                for j in 0..d {
                    if i != j {
                        prop_assert!(sc[i][j].abs() < 1e-8 * scale);
                    }
                }
            }
        }
    }
}
