//! MSE, intensity histograms and the level-shift bias diagnostic.

use crate::error::{Error, Result};
use crate::grid::Image;

/// Mean squared difference.
pub fn mse(truth: &Image, estimate: &Image) -> Result<f64> {
    truth.check_shape(estimate)?;
    let s: f64 = truth
        .data()
        .iter()
        .zip(estimate.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(s / truth.len() as f64)
}

/// Counts in `bins` equal-width bins over `[lo, hi]`; out-of-range values
/// land in the end bins, so the counts always sum to the pixel count.
pub fn histogram(img: &Image, bins: usize, lo: f64, hi: f64) -> Result<Vec<usize>> {
    if bins == 0 {
        return Err(Error::Domain {
            name: "bins",
            value: 0.0,
            expected: ">= 1",
        });
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::Domain {
            name: "hi",
            value: hi,
            expected: "finite and > lo",
        });
    }
    let mut counts = vec![0usize; bins];
    let width = (hi - lo) / bins as f64;
    for &v in img.data() {
        let idx = ((v - lo) / width).floor();
        let idx = if idx < 0.0 { 0 } else { (idx as usize).min(bins - 1) };
        counts[idx] += 1;
    }
    Ok(counts)
}

/// Mean of `estimate - truth` over pixels whose truth lies within `tol` of
/// `level`. Positive means the level drifted up.
pub fn level_shift(truth: &Image, estimate: &Image, level: f64, tol: f64) -> Result<f64> {
    truth.check_shape(estimate)?;
    let (sum, count) = truth
        .data()
        .iter()
        .zip(estimate.data())
        .filter(|(t, _)| (**t - level).abs() <= tol)
        .fold((0.0, 0usize), |(s, c), (t, e)| (s + (e - t), c + 1));
    if count == 0 {
        return Err(Error::EmptyMask { level, tol });
    }
    Ok(sum / count as f64)
}

/// Anisotropic total variation `sum |u[i,j+1]-u[i,j]| + |u[i+1,j]-u[i,j]|`.
pub fn total_variation(img: &Image) -> f64 {
    let g = crate::grid::gradient(img);
    g.gx.data().iter().chain(g.gy.data()).map(|v| v.abs()).sum()
}
