//! Noise-level estimation and Monte-Carlo SURE for picking the
//! regularization weight without ground truth.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};
use crate::grid::Image;
use crate::metrics::mse;

/// Median of `|N(0, 2 sigma^2)|` in units of `sigma`.
pub const MEDIAN_ABS_PAIR_DIFF: f64 = 0.954;

/// Robust noise estimate for blocky images: median absolute difference
/// over all horizontally and vertically adjacent pixel pairs, divided by
/// [`MEDIAN_ABS_PAIR_DIFF`]. Each unordered pair is counted once.
pub fn estimate_sigma(f: &Image) -> Result<f64> {
    if f.len() < 2 {
        return Err(Error::DegenerateImage);
    }
    let (w, h) = (f.width(), f.height());
    let u = f.data();
    let mut diffs = Vec::with_capacity(2 * w * h);
    for i in 0..h {
        for j in 0..w {
            let k = i * w + j;
            if j + 1 < w {
                diffs.push((u[k + 1] - u[k]).abs());
            }
            if i + 1 < h {
                diffs.push((u[k + w] - u[k]).abs());
            }
        }
    }
    Ok(median(&mut diffs) / MEDIAN_ABS_PAIR_DIFF)
}

fn median(v: &mut [f64]) -> f64 {
    let n = v.len();
    let mid = n / 2;
    let (_, upper, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Settings for Monte-Carlo SURE.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SureConfig {
    /// Probe amplitude in intensity units.
    pub epsilon: f64,
    /// Seed of the probe stream.
    pub seed: u64,
    /// Noise standard deviation, measured or supplied.
    pub sigma: f64,
    /// Probe vectors averaged for the divergence term.
    pub probes: usize,
}

impl SureConfig {
    pub fn new(sigma: f64) -> Self {
        Self {
            epsilon: 0.5,
            seed: 0,
            sigma,
            probes: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("epsilon", self.epsilon)?;
        check_positive("sigma", self.sigma)?;
        if self.probes == 0 {
            return Err(Error::Domain {
                name: "probes",
                value: 0.0,
                expected: ">= 1",
            });
        }
        Ok(())
    }
}

/// Probe vector `k` for a seed: stream `k` of `ChaCha8Rng::seed_from_u64(seed)`.
pub fn probe_vector(len: usize, seed: u64, k: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Parts of a SURE evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SureEstimate {
    /// `(1/N) ||f - M(f)||^2 - sigma^2 + (2 sigma^2 / N) div`.
    pub sure: f64,
    /// `(1/N) ||f - M(f)||^2`.
    pub residual: f64,
    /// Monte-Carlo divergence estimate.
    pub divergence: f64,
}

/// Monte-Carlo divergence `(1/eps) b^T (M(f + eps b) - M(f))`, averaged over
/// `cfg.probes` probes, given the already computed `M(f)`.
pub fn mc_divergence<M>(f: &Image, denoised: &Image, denoiser: &M, cfg: &SureConfig) -> Result<f64>
where
    M: Fn(&Image) -> Result<Image> + ?Sized,
{
    cfg.validate()?;
    f.check_shape(denoised)?;
    let mut total = 0.0;
    for k in 0..cfg.probes {
        let b = probe_vector(f.len(), cfg.seed, k as u64);
        let perturbed: Vec<f64> = f.data().iter().zip(&b).map(|(v, z)| v + cfg.epsilon * z).collect();
        let out = denoiser(&Image::new(f.width(), f.height(), perturbed)?)?;
        f.check_shape(&out)?;
        let inner: f64 = b
            .iter()
            .zip(out.data().iter().zip(denoised.data()))
            .map(|(z, (p, q))| z * (p - q))
            .sum();
        total += inner / cfg.epsilon;
    }
    Ok(total / cfg.probes as f64)
}

/// Monte-Carlo SURE of a deterministic denoiser at `f`. With one probe this
/// makes exactly two denoiser calls.
pub fn monte_carlo_sure<M>(f: &Image, denoiser: &M, cfg: &SureConfig) -> Result<SureEstimate>
where
    M: Fn(&Image) -> Result<Image> + ?Sized,
{
    cfg.validate()?;
    let denoised = denoiser(f)?;
    let residual = mse(f, &denoised)?;
    let divergence = mc_divergence(f, &denoised, denoiser, cfg)?;
    let n = f.len() as f64;
    let s2 = cfg.sigma * cfg.sigma;
    let sure = residual - s2 + 2.0 * s2 * divergence / n;
    if !sure.is_finite() {
        return Err(Error::NonFiniteSure);
    }
    Ok(SureEstimate {
        sure,
        residual,
        divergence,
    })
}

/// One row of a parameter sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub lambda: f64,
    /// True MSE against ground truth, when known.
    pub mse: Option<f64>,
    /// SURE estimate, when computed.
    pub sure: Option<f64>,
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    for &l in grid {
        check_positive("lambda", l)?;
    }
    Ok(())
}

fn sort_by_lambda(records: &mut [SweepRecord]) {
    records.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
}

/// Index of the smallest finite value; ties go to the larger lambda.
fn argmin_prefer_larger(records: &[SweepRecord], key: impl Fn(&SweepRecord) -> Option<f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, r) in records.iter().enumerate() {
        let Some(v) = key(r).filter(|v| v.is_finite()) else {
            continue;
        };
        match best {
            Some((_, b)) if v > b => {}
            Some((j, b)) if v == b && records[j].lambda > r.lambda => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

/// Evaluates SURE for `denoise(f, lambda)` at every grid point (in
/// parallel, same probe for each) and returns the minimizing lambda and
/// the curve sorted by lambda. A grid point whose denoiser fails is
/// recorded with a missing value.
pub fn select_lambda_sure<D>(f: &Image, lambda_grid: &[f64], cfg: &SureConfig, denoise: D) -> Result<(f64, Vec<SweepRecord>)>
where
    D: Fn(&Image, f64) -> Result<Image> + Sync,
{
    check_grid(lambda_grid)?;
    cfg.validate()?;
    let mut records: Vec<SweepRecord> = lambda_grid
        .par_iter()
        .map(|&lambda| {
            let m = |img: &Image| denoise(img, lambda);
            let sure = monte_carlo_sure(f, &m, cfg).ok().map(|s| s.sure);
            SweepRecord {
                lambda,
                mse: None,
                sure,
            }
        })
        .collect();
    sort_by_lambda(&mut records);
    let best = argmin_prefer_larger(&records, |r| r.sure).ok_or(Error::AllNonFinite)?;
    Ok((records[best].lambda, records))
}

/// True-MSE sweep against a known clean image. Returns the curve sorted by lambda.
pub fn mse_sweep<D>(f: &Image, truth: &Image, lambda_grid: &[f64], denoise: D) -> Result<Vec<SweepRecord>>
where
    D: Fn(&Image, f64) -> Result<Image> + Sync,
{
    check_grid(lambda_grid)?;
    f.check_shape(truth)?;
    let mut records: Vec<SweepRecord> = lambda_grid
        .par_iter()
        .map(|&lambda| SweepRecord {
            lambda,
            mse: denoise(f, lambda).and_then(|u| mse(truth, &u)).ok(),
            sure: None,
        })
        .collect();
    sort_by_lambda(&mut records);
    Ok(records)
}

/// Row with the smallest finite MSE (ties to larger lambda).
pub fn best_by_mse(records: &[SweepRecord]) -> Option<&SweepRecord> {
    argmin_prefer_larger(records, |r| r.mse).map(|i| &records[i])
}

/// Row with the smallest finite SURE (ties to larger lambda).
pub fn best_by_sure(records: &[SweepRecord]) -> Option<&SweepRecord> {
    argmin_prefer_larger(records, |r| r.sure).map(|i| &records[i])
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    check_positive("lo", lo)?;
    check_positive("hi", hi)?;
    match n {
        0 => Err(Error::EmptyGrid),
        1 => Ok(vec![lo]),
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            Ok((0..n)
                .map(|i| {
                    if i == n - 1 {
                        hi
                    } else {
                        (a + (b - a) * i as f64 / (n - 1) as f64).exp()
                    }
                })
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{add_gaussian_noise, generate, PatternSpec};

    #[test]
    fn sigma_of_constant_is_zero() {
        assert_eq!(estimate_sigma(&Image::filled(9, 7, 3.0).unwrap()).unwrap(), 0.0);
        assert!(matches!(
            estimate_sigma(&Image::filled(1, 1, 3.0).unwrap()),
            Err(Error::DegenerateImage)
        ));
    }

    #[test]
    fn sigma_small_hand_case() {
        // pairs: |1-0|, |3-1| horizontally in two rows plus vertical |2-0|, |5-1|, |7-3|
        let img = Image::new(3, 2, vec![0.0, 1.0, 3.0, 2.0, 5.0, 7.0]).unwrap();
        // diffs: 1, 2, 2, 3, 2, 4, 4 -> sorted 1 2 2 2 3 4 4 -> median 2
        assert!((estimate_sigma(&img).unwrap() - 2.0 / 0.954).abs() < 1e-12);
    }

    #[test]
    fn sigma_pure_noise() {
        let flat = Image::filled(256, 256, 0.0).unwrap();
        let s = estimate_sigma(&add_gaussian_noise(&flat, 20.0, 1).unwrap()).unwrap();
        assert!((18.0..=22.0).contains(&s), "{s}");
    }

    #[test]
    fn sigma_on_blocky_image() {
        let truth = generate(&PatternSpec::nested_squares()).unwrap();
        let s = estimate_sigma(&add_gaussian_noise(&truth, 40.0, 2).unwrap()).unwrap();
        assert!((s / 40.0 - 1.0).abs() < 0.15, "{s}");
    }

    #[test]
    fn sigma_shift_invariant_and_scale_equivariant() {
        let base = add_gaussian_noise(&Image::filled(32, 32, 0.0).unwrap(), 5.0, 3).unwrap();
        let s = estimate_sigma(&base).unwrap();
        let shifted = base.map(|v| v + 1000.0).unwrap();
        assert!((estimate_sigma(&shifted).unwrap() - s).abs() < 1e-9);
        let scaled = base.map(|v| -3.0 * v).unwrap();
        assert!((estimate_sigma(&scaled).unwrap() - 3.0 * s).abs() < 1e-9);
    }

    #[test]
    fn identity_denoiser_sure() {
        let f = add_gaussian_noise(&Image::filled(64, 64, 10.0).unwrap(), 5.0, 9).unwrap();
        let cfg = SureConfig::new(5.0);
        let id = |img: &Image| Ok(img.clone());
        let est = monte_carlo_sure(&f, &id, &cfg).unwrap();
        let b = probe_vector(f.len(), cfg.seed, 0);
        let btb: f64 = b.iter().map(|x| x * x).sum();
        assert_eq!(est.residual, 0.0);
        assert!((est.divergence - btb).abs() < 1e-6 * btb);
        let expected = -25.0 + 2.0 * 25.0 * btb / f.len() as f64;
        assert!((est.sure - expected).abs() < 1e-6);
    }

    #[test]
    fn constant_denoiser_sure() {
        let f = add_gaussian_noise(&Image::filled(16, 16, 10.0).unwrap(), 5.0, 9).unwrap();
        let c = |img: &Image| Image::filled(img.width(), img.height(), 7.0);
        let est = monte_carlo_sure(&f, &c, &SureConfig::new(5.0)).unwrap();
        assert_eq!(est.divergence, 0.0);
        let want = mse(&f, &Image::filled(16, 16, 7.0).unwrap()).unwrap() - 25.0;
        assert!((est.sure - want).abs() < 1e-12);
    }

    #[test]
    fn sure_is_reproducible_and_counts_calls() {
        let f = add_gaussian_noise(&Image::filled(8, 8, 0.0).unwrap(), 1.0, 4).unwrap();
        let calls = std::sync::atomic::AtomicUsize::new(0);
        let half = |img: &Image| {
            calls.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            img.map(|v| 0.5 * v)
        };
        let cfg = SureConfig::new(1.0);
        let a = monte_carlo_sure(&f, &half, &cfg).unwrap();
        assert_eq!(calls.load(std::sync::atomic::Ordering::SeqCst), 2);
        let b = monte_carlo_sure(&f, &half, &cfg).unwrap();
        assert_eq!(a.sure.to_bits(), b.sure.to_bits());
    }

    #[test]
    fn bad_sure_config() {
        let f = Image::filled(4, 4, 0.0).unwrap();
        let id = |img: &Image| Ok(img.clone());
        let mut cfg = SureConfig::new(1.0);
        cfg.epsilon = 0.0;
        assert!(monte_carlo_sure(&f, &id, &cfg).is_err());
        assert!(monte_carlo_sure(&f, &id, &SureConfig::new(-1.0)).is_err());
    }

    #[test]
    fn selection_single_point_and_convex_curve() {
        let f = Image::filled(4, 4, 0.0).unwrap();
        let cfg = SureConfig::new(1.0);
        let (l, curve) = select_lambda_sure(&f, &[2.5], &cfg, |img, _| Ok(img.clone())).unwrap();
        assert_eq!(l, 2.5);
        assert_eq!(curve.len(), 1);
        // constant denoiser at level lambda: SURE = mean((0 - lambda)^2) - 1, minimized at lambda -> smallest
        // use (lambda - 3)^2 by shifting the constant
        let grid = [1.0, 2.0, 3.0, 4.0, 5.0];
        let (l, curve) = select_lambda_sure(&f, &grid, &cfg, |img, lam| {
            Image::filled(img.width(), img.height(), lam - 3.0)
        })
        .unwrap();
        assert_eq!(l, 3.0);
        assert!(curve.windows(2).all(|w| w[0].lambda < w[1].lambda));
        assert!(select_lambda_sure(&f, &[], &cfg, |img, _| Ok(img.clone())).is_err());
    }

    #[test]
    fn ties_prefer_larger_lambda() {
        let f = Image::filled(4, 4, 0.0).unwrap();
        let (l, _) = select_lambda_sure(&f, &[3.0, 1.0, 2.0], &SureConfig::new(1.0), |img, _| {
            Image::filled(img.width(), img.height(), 1.0)
        })
        .unwrap();
        assert_eq!(l, 3.0);
    }

    #[test]
    fn all_failures_is_an_error() {
        let f = Image::filled(4, 4, 0.0).unwrap();
        let r = select_lambda_sure(&f, &[1.0, 2.0], &SureConfig::new(1.0), |_, _| Err(Error::EmptyGrid));
        assert!(matches!(r, Err(Error::AllNonFinite)));
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1.0, 100.0, 3).unwrap();
        assert_eq!(g[0], 1.0);
        assert!((g[1] - 10.0).abs() < 1e-12);
        assert_eq!(g[2], 100.0);
        assert_eq!(log_grid(4.0, 9.0, 1).unwrap(), vec![4.0]);
        assert!(log_grid(0.0, 1.0, 3).is_err());
    }
}
