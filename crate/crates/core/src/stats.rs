//! Small numeric helpers shared by the classifiers and PCA.

/// Mean and population standard deviation, computed on a rescaled copy so
/// that columns near the saturation bound (±1e300) do not overflow.
pub(crate) fn mean_sd(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let mut n = 0usize;
    let mut scale = 0.0f64;
    for v in values.clone() {
        n += 1;
        scale = scale.max(v.abs());
    }
    if n == 0 || scale == 0.0 {
        return (0.0, 0.0);
    }
    let nf = n as f64;
    let mean_s = values.clone().map(|v| v / scale).sum::<f64>() / nf;
    let var_s = values
        .map(|v| {
            let d = v / scale - mean_s;
            d * d
        })
        .sum::<f64>()
        / nf;
    (mean_s * scale, var_s.sqrt() * scale)
}

/// True when `sd` is negligible relative to the column's magnitude.
pub(crate) fn is_degenerate(sd: f64, mean: f64) -> bool {
    !(sd > 1e-12 * mean.abs().max(1.0))
}
