//! Multilevel discrete wavelet decomposition (analysis only).

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// An orthogonal two-channel filter bank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletSpec {
    pub name: String,
    pub lowpass: Vec<f64>,
    pub highpass: Vec<f64>,
}

const DB4: [f64; 8] = [
    0.230_377_813_308_896_5,
    0.714_846_570_552_915_7,
    0.630_880_767_929_858_9,
    -0.027_983_769_416_859_854,
    -0.187_034_811_719_093_09,
    0.030_841_381_835_560_764,
    0.032_883_011_666_885_2,
    -0.010_597_401_785_069_032,
];

impl WaveletSpec {
    /// Builds the bank from its lowpass filter; the highpass is the
    /// quadrature mirror `h[k] = (-1)^k g[L-1-k]`.
    pub fn from_lowpass(name: impl Into<String>, lowpass: Vec<f64>) -> Result<Self> {
        let l = lowpass.len();
        if l < 2 || !l.is_multiple_of(2) {
            return Err(Error::invalid(format!("wavelet filter length must be even and >= 2, got {l}")));
        }
        let highpass = (0..l)
            .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 } * lowpass[l - 1 - k])
            .collect();
        Ok(WaveletSpec {
            name: name.into(),
            lowpass,
            highpass,
        })
    }

    pub fn haar() -> Self {
        let c = std::f64::consts::FRAC_1_SQRT_2;
        Self::from_lowpass("haar", vec![c, c]).unwrap()
    }

    /// Daubechies, 4 vanishing moments (8 taps).
    pub fn db4() -> Self {
        Self::from_lowpass("db4", DB4.to_vec()).unwrap()
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "haar" | "db1" => Ok(Self::haar()),
            "db4" => Ok(Self::db4()),
            other => Err(Error::config(format!("unknown wavelet {other:?} (expected haar or db4)"))),
        }
    }

    pub fn len(&self) -> usize {
        self.lowpass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lowpass.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Circular extension. Odd-length inputs first repeat their last sample.
    #[default]
    Periodic,
    /// Half-sample symmetric reflection.
    Symmetric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    /// `details[0]` is D1 (finest), `details[levels-1]` the coarsest.
    pub details: Vec<Vec<f64>>,
    pub approx: Vec<f64>,
}

impl Decomposition {
    pub fn energy(&self) -> f64 {
        self.details
            .iter()
            .chain(std::iter::once(&self.approx))
            .flat_map(|v| v.iter())
            .map(|c| c * c)
            .sum()
    }
}

/// One filter-and-downsample stage: `approx[k] = Σ_j g[j] x[2k+j]`, and
/// likewise for the detail branch with `h`. Output length is `ceil(n/2)`.
pub fn analysis_step(x: &[f64], w: &WaveletSpec, boundary: Boundary) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = x.len();
    if n < w.len() {
        return Err(Error::invalid(format!(
            "sequence of length {n} is shorter than the {}-tap {} filter",
            w.len(),
            w.name
        )));
    }
    let out_len = n.div_ceil(2);
    let mut approx = vec![0.0; out_len];
    let mut detail = vec![0.0; out_len];
    match boundary {
        Boundary::Periodic => {
            let period = 2 * out_len;
            let at = |i: usize| {
                let i = i % period;
                if i < n { x[i] } else { x[n - 1] }
            };
            for k in 0..out_len {
                let (mut a, mut d) = (0.0, 0.0);
                for (j, (g, h)) in w.lowpass.iter().zip(&w.highpass).enumerate() {
                    let v = at(2 * k + j);
                    a += g * v;
                    d += h * v;
                }
                approx[k] = a;
                detail[k] = d;
            }
        }
        Boundary::Symmetric => {
            let period = 2 * n;
            let at = |i: usize| {
                let i = i % period;
                if i < n { x[i] } else { x[period - 1 - i] }
            };
            for k in 0..out_len {
                let (mut a, mut d) = (0.0, 0.0);
                for (j, (g, h)) in w.lowpass.iter().zip(&w.highpass).enumerate() {
                    let v = at(2 * k + j);
                    a += g * v;
                    d += h * v;
                }
                approx[k] = a;
                detail[k] = d;
            }
        }
    }
    Ok((approx, detail))
}

/// Repeats [`analysis_step`] on the approximation branch `levels` times.
pub fn dwt_multilevel(x: &[f64], levels: usize, w: &WaveletSpec, boundary: Boundary) -> Result<Decomposition> {
    if levels == 0 {
        return Err(Error::invalid("at least one decomposition level is required"));
    }
    if levels >= usize::BITS as usize || x.len() < 1usize << levels {
        return Err(Error::invalid(format!(
            "input of length {} is too short for {levels} levels",
            x.len()
        )));
    }
    let mut details = Vec::with_capacity(levels);
    let mut current = x.to_vec();
    for _ in 0..levels {
        let (a, d) = analysis_step(&current, w, boundary)?;
        details.push(d);
        current = a;
    }
    Ok(Decomposition {
        details,
        approx: current,
    })
}
