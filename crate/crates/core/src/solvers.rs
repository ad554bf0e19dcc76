//! TV, SATV and SCAD denoisers built on one weighted-TV gradient flow.
//!
//! The inner solver evolves
//!
//! ```text
//! u_t = div(w grad u / |grad u|_beta) - (u - f)
//! ```
//!
//! from an initial image with explicit Euler steps. The right-hand side is
//! the negative gradient of the discrete energy
//! `E_w(u) = 1/2 sum (u - f)^2 + sum w |grad u|_beta`, so every accepted step
//! is required to lower `E_w`; a step that would raise it is retried with
//! half the time step. The factor 1/2 on the fidelity term is the flow's
//! native scaling: all regularization weights are quoted on that scale.
//!
//! SCAD is handled by majorization-minimization: the concave penalty is
//! replaced by its tangent at the previous iterate, which turns each outer
//! step into a weighted-TV problem with `w = p'(|grad u_prev|_beta)`.

use serde::{Deserialize, Serialize};

use crate::error::{check_nonnegative, check_positive, Error, Result};
use crate::grid::{divergence_into, forward_differences, Field, Image};
use crate::penalty::{satv_weight_unchecked, ScadParams};

/// Hyperparameters shared by all solvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Largest explicit time step.
    pub dt: f64,
    /// Cap on accepted steps per inner solve.
    pub max_inner_iters: usize,
    /// Stop when `||u_next - u|| / max(||u||, 1)` drops below this.
    pub rel_tol: f64,
    /// Gradient magnitude smoothing.
    pub beta: f64,
    /// Number of MM (outer) steps for SCAD.
    pub outer_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            max_inner_iters: 500,
            rel_tol: 1e-4,
            beta: 1e-3,
            outer_iters: 2,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        check_positive("dt", self.dt)?;
        check_positive("rel_tol", self.rel_tol)?;
        check_nonnegative("beta", self.beta)?;
        if self.max_inner_iters == 0 {
            return Err(Error::Domain {
                name: "max_inner_iters",
                value: 0.0,
                expected: ">= 1",
            });
        }
        if self.outer_iters == 0 {
            return Err(Error::Domain {
                name: "outer_iters",
                value: 0.0,
                expected: ">= 1",
            });
        }
        Ok(())
    }
}

/// Diagnostics from one inner solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InnerReport {
    /// Accepted steps.
    pub iterations: usize,
    /// Steps retried with a smaller time step.
    pub rejected: usize,
    /// Whether the relative-change criterion was met.
    pub converged: bool,
    /// Weighted energy at the start and at the end.
    pub initial_energy: f64,
    pub final_energy: f64,
}

/// Penalty selector for [`objective`].
#[derive(Debug, Clone, Copy)]
pub enum Penalty<'a> {
    /// `lambda * |grad u|`.
    Tv(f64),
    /// Spatially varying weight `w * |grad u|`.
    Weighted(&'a Field),
    /// `p_scad(|grad u|)`.
    Scad(ScadParams),
}

/// Discrete energy `1/2 sum (f - u)^2 + sum penalty(|grad u|_beta)`.
///
/// This is the functional the solvers descend, so it is the one to audit
/// when checking MM monotonicity.
pub fn objective(f: &Image, u: &Image, penalty: Penalty<'_>, beta: f64) -> Result<f64> {
    f.check_shape(u)?;
    check_nonnegative("beta", beta)?;
    let (w, h) = (u.width(), u.height());
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    forward_differences(u.data(), w, h, &mut gx, &mut gy);
    let beta2 = beta * beta;
    let fidelity: f64 = f
        .data()
        .iter()
        .zip(u.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        * 0.5;
    let mag = |k: usize| (gx[k] * gx[k] + gy[k] * gy[k] + beta2).sqrt();
    let reg: f64 = match penalty {
        Penalty::Tv(lambda) => {
            check_nonnegative("lambda", lambda)?;
            (0..w * h).map(|k| lambda * mag(k)).sum()
        }
        Penalty::Weighted(weights) => {
            u.check_shape(weights)?;
            (0..w * h).map(|k| weights.data()[k] * mag(k)).sum()
        }
        Penalty::Scad(p) => (0..w * h).map(|k| p.value_unchecked(mag(k))).sum(),
    };
    Ok(fidelity + reg)
}

// Scratch buffers and energy evaluation for the weighted flow.
struct Flow<'a> {
    f: &'a [f64],
    w: &'a [f64],
    width: usize,
    height: usize,
    beta2: f64,
    gx: Vec<f64>,
    gy: Vec<f64>,
    mag: Vec<f64>,
    px: Vec<f64>,
    py: Vec<f64>,
    div: Vec<f64>,
}

impl<'a> Flow<'a> {
    fn new(f: &'a Image, w: &'a Field, beta: f64) -> Self {
        let n = f.len();
        Self {
            f: f.data(),
            w: w.data(),
            width: f.width(),
            height: f.height(),
            beta2: beta * beta,
            gx: vec![0.0; n],
            gy: vec![0.0; n],
            mag: vec![0.0; n],
            px: vec![0.0; n],
            py: vec![0.0; n],
            div: vec![0.0; n],
        }
    }

    // Updates gx, gy, mag for `u` and returns E_w(u).
    fn energy(&mut self, u: &[f64]) -> f64 {
        forward_differences(u, self.width, self.height, &mut self.gx, &mut self.gy);
        let mut fid = 0.0;
        let mut reg = 0.0;
        for k in 0..u.len() {
            let m = (self.gx[k] * self.gx[k] + self.gy[k] * self.gy[k] + self.beta2).sqrt();
            self.mag[k] = m;
            let r = u[k] - self.f[k];
            fid += r * r;
            reg += self.w[k] * m;
        }
        0.5 * fid + reg
    }

    // Velocity of the flow at the state last passed to `energy`.
    fn velocity(&mut self, u: &[f64], out: &mut [f64]) {
        for k in 0..u.len() {
            let m = self.mag[k];
            let c = if m > 0.0 { self.w[k] / m } else { 0.0 };
            self.px[k] = c * self.gx[k];
            self.py[k] = c * self.gy[k];
        }
        divergence_into(&self.px, &self.py, self.width, self.height, &mut self.div);
        for k in 0..u.len() {
            out[k] = self.div[k] - (u[k] - self.f[k]);
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Approximate minimizer of `1/2 ||f - u||^2 + sum w |grad u|_beta`, started from `f`.
pub fn weighted_tv_denoise(f: &Image, w: &Field, cfg: &SolverConfig) -> Result<Image> {
    weighted_tv_denoise_from(f, w, f, cfg).map(|(u, _)| u)
}

/// Weighted-TV flow started from `init` instead of `f`.
///
/// The returned image never has higher weighted energy than `init`.
pub fn weighted_tv_denoise_from(
    f: &Image,
    w: &Field,
    init: &Image,
    cfg: &SolverConfig,
) -> Result<(Image, InnerReport)> {
    cfg.validate()?;
    f.check_shape(w)?;
    f.check_shape(init)?;
    if let Some(index) = w.data().iter().position(|&v| !(v >= 0.0)) {
        return Err(Error::Domain {
            name: "weight",
            value: w.data()[index],
            expected: "finite and >= 0",
        });
    }

    let n = f.len();
    let mut flow = Flow::new(f, w, cfg.beta);
    let mut u = init.data().to_vec();
    let mut energy = flow.energy(&u);
    if !energy.is_finite() {
        return Err(Error::Diverged { iteration: 0 });
    }
    let initial_energy = energy;
    let mut vel = vec![0.0; n];
    let mut cand = vec![0.0; n];
    let mut dt = cfg.dt;
    let mut report = InnerReport {
        iterations: 0,
        rejected: 0,
        converged: false,
        initial_energy,
        final_energy: energy,
    };

    'outer: while report.iterations < cfg.max_inner_iters {
        flow.velocity(&u, &mut vel);
        if norm(&vel) == 0.0 {
            report.converged = true;
            break;
        }
        loop {
            for k in 0..n {
                cand[k] = u[k] + dt * vel[k];
            }
            let e = flow.energy(&cand);
            if !e.is_finite() {
                return Err(Error::Diverged {
                    iteration: report.iterations + 1,
                });
            }
            if e <= energy {
                energy = e;
                break;
            }
            report.rejected += 1;
            dt *= 0.5;
            if dt < cfg.dt * 1e-12 {
                // No representable descent left along the flow.
                flow.energy(&u);
                report.converged = true;
                break 'outer;
            }
        }
        let change = cand.iter().zip(&u).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let scale = norm(&u).max(1.0);
        std::mem::swap(&mut u, &mut cand);
        report.iterations += 1;
        // A shortened step says nothing about stationarity.
        let full_step = dt >= cfg.dt;
        dt = (dt * 2.0).min(cfg.dt);
        if full_step && change / scale < cfg.rel_tol {
            report.converged = true;
            break;
        }
    }
    report.final_energy = energy;
    Ok((Image::new(f.width(), f.height(), u)?, report))
}

/// Standard TV denoising: constant weight `lambda`.
pub fn tv_denoise(f: &Image, lambda: f64, cfg: &SolverConfig) -> Result<Image> {
    check_positive("lambda", lambda)?;
    let w = Image::filled(f.width(), f.height(), lambda)?;
    weighted_tv_denoise(f, &w, cfg)
}

/// SATV edge weights `scale * (1/(|ux| + e) + 1/(|uy| + e))` from a pilot estimate.
pub fn satv_weights(pilot: &Image, scale: f64, e: f64) -> Result<Field> {
    check_positive("e", e)?;
    check_nonnegative("scale", scale)?;
    let (w, h) = (pilot.width(), pilot.height());
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    forward_differences(pilot.data(), w, h, &mut gx, &mut gy);
    let data = gx
        .iter()
        .zip(&gy)
        .map(|(&x, &y)| scale * satv_weight_unchecked(x, y, e))
        .collect();
    Image::new(w, h, data)
}

/// Two-step spatially adaptive TV: a TV pilot with `lambda1`, then weighted
/// TV on `f` with weights `lambda2 * satv_weight(grad pilot, e)`.
pub fn satv_denoise(f: &Image, lambda1: f64, lambda2: f64, e: f64, cfg: &SolverConfig) -> Result<Image> {
    check_positive("lambda2", lambda2)?;
    let pilot = tv_denoise(f, lambda1, cfg)?;
    satv_from_pilot(f, &pilot, lambda2, e, cfg)
}

/// Second SATV step given an existing pilot. Lets sweeps over `e` reuse one pilot.
pub fn satv_from_pilot(f: &Image, pilot: &Image, lambda2: f64, e: f64, cfg: &SolverConfig) -> Result<Image> {
    check_positive("lambda2", lambda2)?;
    f.check_shape(pilot)?;
    let w = satv_weights(pilot, lambda2, e)?;
    weighted_tv_denoise(f, &w, cfg)
}

/// Result of a SCAD MM run.
#[derive(Debug, Clone)]
pub struct ScadOutcome {
    pub image: Image,
    /// SCAD energy of `u^(0) = f, u^(1), ..., u^(K)`.
    pub objectives: Vec<f64>,
    pub inner: Vec<InnerReport>,
}

/// SCAD denoising by `cfg.outer_iters` MM steps from `u^(0) = f`.
pub fn scad_denoise(f: &Image, p: &ScadParams, cfg: &SolverConfig) -> Result<Image> {
    scad_denoise_traced(f, p, cfg).map(|o| o.image)
}

/// [`scad_denoise`] with the objective sequence and per-step diagnostics.
///
/// Each inner solve is warm-started at the previous iterate, so the
/// surrogate energy cannot rise and the SCAD energy is nonincreasing.
pub fn scad_denoise_traced(f: &Image, p: &ScadParams, cfg: &SolverConfig) -> Result<ScadOutcome> {
    cfg.validate()?;
    let mut u = f.clone();
    let mut objectives = vec![objective(f, &u, Penalty::Scad(*p), cfg.beta)?];
    let mut inner = Vec::with_capacity(cfg.outer_iters);
    for _ in 0..cfg.outer_iters {
        let w = scad_weights(&u, p, cfg.beta);
        let (next, report) = weighted_tv_denoise_from(f, &w, &u, cfg)?;
        u = next;
        objectives.push(objective(f, &u, Penalty::Scad(*p), cfg.beta)?);
        inner.push(report);
    }
    Ok(ScadOutcome {
        image: u,
        objectives,
        inner,
    })
}

/// MM weights `p'(|grad u|_beta)`.
pub fn scad_weights(u: &Image, p: &ScadParams, beta: f64) -> Field {
    let (w, h) = (u.width(), u.height());
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    forward_differences(u.data(), w, h, &mut gx, &mut gy);
    let beta2 = beta * beta;
    let data = gx
        .iter()
        .zip(&gy)
        .map(|(x, y)| p.derivative_unchecked((x * x + y * y + beta2).sqrt()))
        .collect();
    Image::from_raw(w, h, data)
}

/// A denoiser family parameterized by a single regularization weight, as
/// swept by parameter-selection routines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Method {
    Tv,
    /// The swept weight is the second-step `lambda2`; the pilot uses
    /// `pilot_lambda`, or the swept weight itself when unset.
    Satv { e: f64, pilot_lambda: Option<f64> },
    Scad { a: f64 },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Tv => "tv",
            Method::Satv { .. } => "satv",
            Method::Scad { .. } => "scad",
        }
    }

    pub fn denoise(&self, f: &Image, lambda: f64, cfg: &SolverConfig) -> Result<Image> {
        match *self {
            Method::Tv => tv_denoise(f, lambda, cfg),
            Method::Satv { e, pilot_lambda } => satv_denoise(f, pilot_lambda.unwrap_or(lambda), lambda, e, cfg),
            Method::Scad { a } => scad_denoise(f, &ScadParams::new(lambda, a)?, cfg),
        }
    }
}
