//! The bundled comparison scenario: a synthetic blocky image, Gaussian
//! noise, and a best-of-grid MSE comparison of TV, SATV and SCAD.
//!
//! SATV's second-step weight is swept as the flat-region weight
//! `2 lambda2 / e`, so the same grid serves every `e`; its pilot is TV at
//! TV's best grid point.

use anyhow::{anyhow, Result};
use rayon::prelude::*;
use serde::Serialize;
use tvscad::estimators::{best_by_mse, log_grid, SweepRecord};
use tvscad::metrics::{level_shift, mse};
use tvscad::solvers::{satv_from_pilot, scad_denoise, tv_denoise};
use tvscad::synth::{add_gaussian_noise, generate, PatternSpec};
use tvscad::{Image, ScadParams, SolverConfig};

/// SATV stabilization offsets searched by the comparison.
pub const SATV_E_VALUES: [f64; 4] = [1.0, 10.0, 100.0, 500.0];

#[derive(Debug, Clone)]
pub struct Scenario {
    pub pattern: PatternSpec,
    pub sigma: f64,
    pub seed: u64,
}

impl Scenario {
    /// Thick nested squares at sigma = 20.
    pub fn thick_squares_sigma20() -> Self {
        Self {
            pattern: PatternSpec::nested_squares_thick(),
            sigma: 20.0,
            seed: 2024,
        }
    }

    /// Thin nested squares at sigma = 20.
    pub fn nested_squares_sigma20() -> Self {
        Self {
            pattern: PatternSpec::nested_squares(),
            sigma: 20.0,
            seed: 2024,
        }
    }

    pub fn images(&self) -> Result<(Image, Image)> {
        let truth = generate(&self.pattern)?;
        let noisy = add_gaussian_noise(&truth, self.sigma, self.seed)?;
        Ok((truth, noisy))
    }
}

/// Default weight grid: 12 log-spaced values from 5 to 200.
pub fn default_grid() -> Vec<f64> {
    log_grid(5.0, 200.0, 12).expect("static grid")
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodBest {
    pub method: String,
    /// Grid value at the optimum (flat-region weight for SATV).
    pub lambda: f64,
    pub mse: f64,
    pub e: Option<f64>,
    pub shift_low: f64,
    pub shift_high: f64,
    pub curve: Vec<SweepRecord>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub noisy_mse: f64,
    pub tv: MethodBest,
    /// Best SATV for each searched `e`.
    pub satv_by_e: Vec<MethodBest>,
    pub scad: MethodBest,
}

impl Comparison {
    pub fn satv(&self) -> &MethodBest {
        self.satv_by_e
            .iter()
            .min_by(|a, b| a.mse.total_cmp(&b.mse))
            .expect("at least one e")
    }

    pub fn satv_for(&self, e: f64) -> Option<&MethodBest> {
        self.satv_by_e.iter().find(|m| m.e == Some(e))
    }

    pub fn table(&self) -> String {
        let mut s = format!("{:<6} {:>10} {:>10} {:>8} {:>10} {:>10}\n", "method", "lambda", "mse", "e", "shift_lo", "shift_hi");
        let mut row = |m: &MethodBest| {
            let e = m.e.map(|e| format!("{e}")).unwrap_or_else(|| "-".into());
            s.push_str(&format!(
                "{:<6} {:>10.3} {:>10.3} {:>8} {:>10.3} {:>10.3}\n",
                m.method, m.lambda, m.mse, e, m.shift_low, m.shift_high
            ));
        };
        row(&self.tv);
        for m in &self.satv_by_e {
            row(m);
        }
        row(&self.scad);
        s
    }
}

fn best_of(
    name: &str,
    e: Option<f64>,
    truth: &Image,
    curve: Vec<SweepRecord>,
    restore: impl Fn(f64) -> tvscad::Result<Image>,
    levels: (f64, f64),
) -> Result<MethodBest> {
    let best = *best_by_mse(&curve).ok_or_else(|| anyhow!("{name}: no finite MSE on the grid"))?;
    let restored = restore(best.lambda)?;
    Ok(MethodBest {
        method: name.to_string(),
        lambda: best.lambda,
        mse: best.mse.unwrap_or(f64::NAN),
        e,
        shift_low: level_shift(truth, &restored, levels.0, 0.5)?,
        shift_high: level_shift(truth, &restored, levels.1, 0.5)?,
        curve,
    })
}

fn sweep(grid: &[f64], truth: &Image, restore: impl Fn(f64) -> tvscad::Result<Image> + Sync) -> Vec<SweepRecord> {
    let mut v: Vec<SweepRecord> = grid
        .par_iter()
        .map(|&lambda| SweepRecord {
            lambda,
            mse: restore(lambda).and_then(|u| mse(truth, &u)).ok(),
            sure: None,
        })
        .collect();
    v.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    v
}

/// Sweeps all three methods over `grid` and reports each one's best point.
pub fn compare_methods(
    truth: &Image,
    noisy: &Image,
    grid: &[f64],
    e_values: &[f64],
    a: f64,
    cfg: &SolverConfig,
) -> Result<Comparison> {
    let lo = truth.data().iter().copied().fold(f64::INFINITY, f64::min);
    let hi = truth.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let levels = (lo, hi);

    let tv_restore = |l: f64| tv_denoise(noisy, l, cfg);
    let tv = best_of("tv", None, truth, sweep(grid, truth, tv_restore), tv_restore, levels)?;

    let pilot = tv_denoise(noisy, tv.lambda, cfg)?;
    let satv_by_e = e_values
        .iter()
        .map(|&e| {
            let restore = |flat: f64| satv_from_pilot(noisy, &pilot, flat * e / 2.0, e, cfg);
            best_of("satv", Some(e), truth, sweep(grid, truth, restore), restore, levels)
        })
        .collect::<Result<Vec<_>>>()?;

    let scad_restore = |l: f64| scad_denoise(noisy, &ScadParams::new(l, a)?, cfg);
    let scad = best_of("scad", None, truth, sweep(grid, truth, scad_restore), scad_restore, levels)?;

    Ok(Comparison {
        noisy_mse: mse(truth, noisy)?,
        tv,
        satv_by_e,
        scad,
    })
}
