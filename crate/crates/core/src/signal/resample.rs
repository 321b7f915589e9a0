//! Natural cubic spline resampling on a uniform grid.

use super::Channel;
use crate::{Error, Result};

/// Natural cubic spline through uniformly spaced samples starting at t = 0.
#[derive(Debug, Clone)]
pub struct NaturalCubicSpline<'a> {
    y: &'a [f64],
    h: f64,
    /// Second derivatives at the knots; zero at both ends.
    m: Vec<f64>,
}

impl<'a> NaturalCubicSpline<'a> {
    pub fn new(y: &'a [f64], spacing: f64) -> Result<Self> {
        let n = y.len();
        if n < 4 {
            return Err(Error::invalid(format!(
                "cubic spline needs at least 4 samples, got {n}"
            )));
        }
        // Interior equations: m[i-1] + 4 m[i] + m[i+1] = 6 (y[i+1] - 2 y[i] + y[i-1]) / h^2,
        // solved with the Thomas algorithm.
        let inner = n - 2;
        let scale = 6.0 / (spacing * spacing);
        let mut c = vec![0.0; inner];
        let mut d = vec![0.0; inner];
        for i in 0..inner {
            let rhs = scale * (y[i + 2] - 2.0 * y[i + 1] + y[i]);
            if i == 0 {
                c[0] = 0.25;
                d[0] = rhs / 4.0;
            } else {
                let denom = 4.0 - c[i - 1];
                c[i] = 1.0 / denom;
                d[i] = (rhs - d[i - 1]) / denom;
            }
        }
        let mut m = vec![0.0; n];
        for i in (0..inner).rev() {
            m[i + 1] = d[i] - if i + 1 < inner { c[i] * m[i + 2] } else { 0.0 };
        }
        Ok(NaturalCubicSpline { y, h: spacing, m })
    }

    /// Evaluates the spline at `t` seconds. Points past either end use the
    /// nearest segment's cubic.
    pub fn eval(&self, t: f64) -> f64 {
        let h = self.h;
        let last = self.y.len() - 2;
        let i = ((t / h).floor().max(0.0) as usize).min(last);
        let a = (i + 1) as f64 * h - t;
        let b = t - i as f64 * h;
        let (mi, mj) = (self.m[i], self.m[i + 1]);
        (mi * a * a * a + mj * b * b * b) / (6.0 * h)
            + (self.y[i] / h - mi * h / 6.0) * a
            + (self.y[i + 1] / h - mj * h / 6.0) * b
    }
}

/// Resamples a channel to `target_hz`. The output covers the same duration:
/// `round(n / rate * target_hz)` samples at instants `k / target_hz`.
pub fn resample_cubic(channel: &Channel, target_hz: f64) -> Result<Channel> {
    if !(target_hz > 0.0 && target_hz.is_finite()) {
        return Err(Error::invalid(format!("target rate must be positive, got {target_hz}")));
    }
    let spline = NaturalCubicSpline::new(&channel.samples, 1.0 / channel.rate_hz)?;
    if channel.rate_hz == target_hz {
        return Ok(channel.clone());
    }
    let out_len = (channel.duration_s() * target_hz).round() as usize;
    let samples = (0..out_len)
        .map(|k| spline.eval(k as f64 / target_hz))
        .collect();
    Ok(Channel {
        label: channel.label.clone(),
        rate_hz: target_hz,
        samples,
    })
}
