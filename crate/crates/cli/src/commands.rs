//! Subcommand definitions and their implementations.

use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use tvscad::estimators::{best_by_mse, estimate_sigma, log_grid, mse_sweep, select_lambda_sure, SureConfig};
use tvscad::imageio::{self, write_csv};
use tvscad::metrics::{level_shift, mse, total_variation};
use tvscad::penalty::DEFAULT_SCAD_A;
use tvscad::solvers::{self, InnerReport, Method, SolverConfig};
use tvscad::synth::{self, PatternKind, PatternSpec};
use tvscad::two_pixel::{self, TwoPixelPenalty};
use tvscad::{Image, ScadParams};

use crate::files::{load_image, save_8bit, save_precise};
use crate::scenario::{self, Scenario};

/// Default SATV stabilization offset.
pub const DEFAULT_E: f64 = 10.0;

#[derive(Debug, Parser)]
#[command(name = "tvscad", version, about = "TV, SATV and SCAD denoising of blocky images")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a synthetic blocky test image.
    Generate(GenerateArgs),
    /// Add seeded Gaussian noise, keeping full precision (16-bit + sidecar).
    AddNoise(AddNoiseArgs),
    /// Denoise one image.
    Denoise(DenoiseArgs),
    /// True-MSE sweep over a weight grid (needs ground truth).
    Sweep(SweepArgs),
    /// Monte-Carlo SURE sweep and weight selection (no ground truth).
    Sure(SureArgs),
    /// Closed-form two-pixel problem.
    TwoPixel(TwoPixelArgs),
    /// Run the bundled TV/SATV/SCAD comparison end to end.
    Repro(ReproArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_parser = parse_pattern)]
    pub pattern: PatternKind,
    /// Image side in pixels (preset default when omitted).
    #[arg(long)]
    pub size: Option<usize>,
    /// Comma-separated intensities.
    #[arg(long, value_delimiter = ',')]
    pub levels: Option<Vec<f64>>,
    #[arg(long)]
    pub band_width: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_pattern(s: &str) -> std::result::Result<PatternKind, String> {
    s.parse().map_err(|e: tvscad::Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct AddNoiseArgs {
    #[arg(long)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodName {
    Tv,
    Satv,
    Scad,
}

/// Solver knobs shared by the denoising commands.
#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Largest explicit time step.
    #[arg(long, default_value_t = SolverConfig::default().dt)]
    pub dt: f64,
    /// Maximum accepted steps per inner solve.
    #[arg(long, default_value_t = SolverConfig::default().max_inner_iters)]
    pub iters: usize,
    /// Relative-change stopping tolerance.
    #[arg(long, default_value_t = SolverConfig::default().rel_tol)]
    pub tol: f64,
    /// Gradient magnitude smoothing.
    #[arg(long, default_value_t = SolverConfig::default().beta)]
    pub beta: f64,
}

/// Method-specific parameters.
#[derive(Debug, Clone, Args)]
pub struct MethodArgs {
    #[arg(long, value_enum)]
    pub method: MethodName,
    /// SATV stabilization offset (satv only; default 10).
    #[arg(long)]
    pub e: Option<f64>,
    /// SATV pilot weight (satv only; defaults to the swept/given weight).
    #[arg(long)]
    pub lambda1: Option<f64>,
    /// SCAD shape parameter (scad only; default 3.7).
    #[arg(long)]
    pub a: Option<f64>,
    /// Number of MM steps (scad only; default 2).
    #[arg(long = "K")]
    pub outer: Option<usize>,
}

impl MethodArgs {
    /// Checks flag consistency and builds the method plus solver config.
    pub fn resolve(&self, solver: &SolverArgs) -> Result<(Method, SolverConfig)> {
        let mut cfg = SolverConfig {
            dt: solver.dt,
            max_inner_iters: solver.iters,
            rel_tol: solver.tol,
            beta: solver.beta,
            ..SolverConfig::default()
        };
        let method = match self.method {
            MethodName::Tv => {
                self.reject_satv_flags("tv")?;
                self.reject_scad_flags("tv")?;
                Method::Tv
            }
            MethodName::Satv => {
                self.reject_scad_flags("satv")?;
                let e = self.e.unwrap_or_else(|| {
                    eprintln!("warning: --e not given for satv, using e = {DEFAULT_E}");
                    DEFAULT_E
                });
                Method::Satv {
                    e,
                    pilot_lambda: self.lambda1,
                }
            }
            MethodName::Scad => {
                self.reject_satv_flags("scad")?;
                if let Some(k) = self.outer {
                    cfg.outer_iters = k;
                }
                Method::Scad {
                    a: self.a.unwrap_or(DEFAULT_SCAD_A),
                }
            }
        };
        cfg.validate()?;
        Ok((method, cfg))
    }

    fn reject_satv_flags(&self, method: &str) -> Result<()> {
        if self.e.is_some() || self.lambda1.is_some() {
            return Err(UsageError(format!("--e and --lambda1 apply only to --method satv, not {method}")).into());
        }
        Ok(())
    }

    fn reject_scad_flags(&self, method: &str) -> Result<()> {
        if self.a.is_some() || self.outer.is_some() {
            return Err(UsageError(format!("--a and --K apply only to --method scad, not {method}")).into());
        }
        Ok(())
    }
}

/// Inconsistent flags; reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    #[command(flatten)]
    pub method: MethodArgs,
    #[arg(long)]
    pub lambda: f64,
    /// SATV second-step weight (defaults to --lambda).
    #[arg(long)]
    pub lambda2: Option<f64>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Write the result as 16-bit with sidecar instead of clamped 8-bit.
    #[arg(long)]
    pub precise: bool,
    /// Clean image; when given the MSE is printed.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// JSON report with energy trace and level shifts.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub method: MethodArgs,
    /// Grid as `lo:hi:n` (log-spaced), `lo:hi:n:lin`, or a comma list.
    #[arg(long)]
    pub lambdas: String,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out_csv: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct SureArgs {
    #[command(flatten)]
    pub method: MethodArgs,
    #[arg(long)]
    pub lambdas: String,
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Probe amplitude.
    #[arg(long, default_value_t = 0.5)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Noise level; estimated from the image when omitted.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Probe vectors averaged per grid point.
    #[arg(long, default_value_t = 1)]
    pub probes: usize,
    #[arg(long)]
    pub out_csv: PathBuf,
    /// Also denoise at the selected weight and write it here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PenaltyName {
    Scad,
    Tv,
}

#[derive(Debug, Args)]
pub struct TwoPixelArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub y1: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub y2: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = DEFAULT_SCAD_A)]
    pub a: f64,
    #[arg(long, value_enum, default_value_t = PenaltyName::Scad)]
    pub penalty: PenaltyName,
    /// Cross-check against the exhaustive grid search.
    #[arg(long)]
    pub verify: bool,
}

#[derive(Debug, Args)]
pub struct ReproArgs {
    /// Image side (the bundled scenario uses 256).
    #[arg(long, default_value_t = 256)]
    pub size: usize,
    #[arg(long, default_value_t = 20.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    /// Use the thin nested-squares image instead of the thick one.
    #[arg(long)]
    pub thin: bool,
    /// Weight grid (see `sweep --lambdas`).
    #[arg(long, default_value = "5:200:12")]
    pub lambdas: String,
    /// Optional JSON dump of all curves.
    #[arg(long)]
    pub json: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

/// Parses `lo:hi:n[:log|:lin]` or a comma-separated list.
pub fn parse_lambdas(spec: &str) -> Result<Vec<f64>> {
    let spec = spec.trim();
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if !(3..=4).contains(&parts.len()) {
            bail!("grid must be lo:hi:n[:log|:lin], got {spec:?}");
        }
        let lo: f64 = parts[0].parse().with_context(|| format!("bad grid start {:?}", parts[0]))?;
        let hi: f64 = parts[1].parse().with_context(|| format!("bad grid end {:?}", parts[1]))?;
        let n: usize = parts[2].parse().with_context(|| format!("bad grid count {:?}", parts[2]))?;
        if lo > hi {
            bail!("grid start {lo} exceeds end {hi}");
        }
        match parts.get(3).copied().unwrap_or("log") {
            "log" => Ok(log_grid(lo, hi, n)?),
            "lin" => {
                if n == 0 || !(lo > 0.0) {
                    bail!("grid needs n >= 1 and positive values");
                }
                if n == 1 {
                    return Ok(vec![lo]);
                }
                Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
            }
            other => bail!("unknown grid spacing {other:?}"),
        }
    } else {
        let v = spec
            .split(',')
            .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad grid value {s:?}")))
            .collect::<Result<Vec<_>>>()?;
        if v.is_empty() || v.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
            bail!("grid values must be positive");
        }
        Ok(v)
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Generate(a) => cmd_generate(a, out),
        Command::AddNoise(a) => cmd_add_noise(a, out),
        Command::Denoise(a) => cmd_denoise(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Sure(a) => cmd_sure(a, out),
        Command::TwoPixel(a) => cmd_two_pixel(a, out),
        Command::Repro(a) => cmd_repro(a, out),
    }
}

pub fn cmd_generate(a: GenerateArgs, out: &mut dyn Write) -> Result<()> {
    let mut spec = PatternSpec::preset(a.pattern);
    if let Some(size) = a.size {
        if a.band_width.is_none() {
            spec = spec.scaled_to(size);
        }
        spec.size = size;
    }
    if let Some(levels) = a.levels {
        spec.levels = levels;
    }
    if let Some(bw) = a.band_width {
        spec.band_width = bw;
    }
    let img = synth::generate(&spec)?;
    imageio::write_pgm(&img, &a.out, false).with_context(|| format!("writing {}", a.out.display()))?;
    writeln!(out, "wrote {}x{} image to {}", img.width(), img.height(), a.out.display())?;
    writeln!(out, "total variation: {}", total_variation(&img))?;
    Ok(())
}

pub fn cmd_add_noise(a: AddNoiseArgs, out: &mut dyn Write) -> Result<()> {
    if !(a.sigma > 0.0 && a.sigma.is_finite()) {
        return Err(UsageError(format!("--sigma must be positive, got {}", a.sigma)).into());
    }
    let img = load_image(&a.input)?;
    let noisy = synth::add_gaussian_noise(&img, a.sigma, a.seed)?;
    save_precise(&noisy, &a.out, Some(a.sigma), Some(a.seed))?;
    writeln!(out, "wrote noisy image (sigma {}, seed {}) to {}", a.sigma, a.seed, a.out.display())?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct DenoiseReport {
    method: Method,
    lambda: f64,
    lambda2: Option<f64>,
    config: SolverConfig,
    /// SCAD energy after each MM step (starting at the input); empty otherwise.
    scad_objectives: Vec<f64>,
    inner: Vec<InnerReport>,
    mse: Option<f64>,
    level_shifts: Vec<LevelShift>,
}

#[derive(Debug, Serialize)]
struct LevelShift {
    level: f64,
    shift: f64,
}

fn distinct_levels(truth: &Image) -> Vec<f64> {
    let mut v: Vec<f64> = truth.data().to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

pub fn cmd_denoise(a: DenoiseArgs, out: &mut dyn Write) -> Result<()> {
    let (method, cfg) = a.method.resolve(&a.solver)?;
    if a.lambda2.is_some() && a.method.method != MethodName::Satv {
        return Err(UsageError("--lambda2 applies only to --method satv".into()).into());
    }
    let f = load_image(&a.input)?;
    let truth = a.truth.as_deref().map(load_image).transpose()?;
    if let Some(t) = &truth {
        f.check_shape(t).context("truth and input differ in size")?;
    }

    let mut scad_objectives = Vec::new();
    let mut inner = Vec::new();
    let restored = match method {
        Method::Tv => {
            if !(a.lambda > 0.0) {
                bail!("--lambda must be positive");
            }
            let w = Image::filled(f.width(), f.height(), a.lambda)?;
            let (u, rep) = solvers::weighted_tv_denoise_from(&f, &w, &f, &cfg)?;
            inner.push(rep);
            u
        }
        Method::Satv { e, pilot_lambda } => {
            let lambda1 = pilot_lambda.unwrap_or(a.lambda);
            let lambda2 = a.lambda2.unwrap_or(a.lambda);
            let pilot = solvers::tv_denoise(&f, lambda1, &cfg)?;
            let w = solvers::satv_weights(&pilot, lambda2, e)?;
            let (u, rep) = solvers::weighted_tv_denoise_from(&f, &w, &f, &cfg)?;
            inner.push(rep);
            u
        }
        Method::Scad { a: shape } => {
            let o = solvers::scad_denoise_traced(&f, &ScadParams::new(a.lambda, shape)?, &cfg)?;
            scad_objectives = o.objectives;
            inner = o.inner;
            o.image
        }
    };

    if a.precise {
        save_precise(&restored, &a.out, None, None)?;
    } else {
        save_8bit(&restored, &a.out)?;
    }
    writeln!(out, "wrote {} result to {}", method.name(), a.out.display())?;

    let mut err = None;
    let mut shifts = Vec::new();
    if let Some(t) = &truth {
        let m = mse(t, &restored)?;
        writeln!(out, "mse: {m:.6}")?;
        err = Some(m);
        let levels = distinct_levels(t);
        if levels.len() <= 16 {
            for level in levels {
                shifts.push(LevelShift {
                    level,
                    shift: level_shift(t, &restored, level, 0.5)?,
                });
            }
        }
    }
    if let Some(path) = &a.report {
        let report = DenoiseReport {
            method,
            lambda: a.lambda,
            lambda2: a.lambda2,
            config: cfg,
            scad_objectives,
            inner,
            mse: err,
            level_shifts: shifts,
        };
        imageio::write_atomic(path, serde_json::to_string_pretty(&report)?.as_bytes())?;
    }
    Ok(())
}

pub fn cmd_sweep(a: SweepArgs, out: &mut dyn Write) -> Result<()> {
    let (method, cfg) = a.method.resolve(&a.solver)?;
    let grid = parse_lambdas(&a.lambdas)?;
    let f = load_image(&a.input)?;
    let truth = load_image(&a.truth)?;
    let records = mse_sweep(&f, &truth, &grid, |img, l| method.denoise(img, l, &cfg))?;
    write_csv(&records, &a.out_csv)?;
    match best_by_mse(&records) {
        Some(best) => writeln!(
            out,
            "best: lambda {} mse {}",
            imageio::format_sig9(best.lambda),
            imageio::format_sig9(best.mse.unwrap_or(f64::NAN))
        )?,
        None => bail!("no grid point produced a finite MSE"),
    }
    Ok(())
}

pub fn cmd_sure(a: SureArgs, out: &mut dyn Write) -> Result<()> {
    let (method, cfg) = a.method.resolve(&a.solver)?;
    let grid = parse_lambdas(&a.lambdas)?;
    let f = load_image(&a.input)?;
    let sigma = match a.sigma {
        Some(s) => s,
        None => {
            let s = estimate_sigma(&f)?;
            writeln!(out, "estimated sigma: {}", imageio::format_sig9(s))?;
            s
        }
    };
    let sure_cfg = SureConfig {
        epsilon: a.epsilon,
        seed: a.seed,
        sigma,
        probes: a.probes,
    };
    let (lambda, curve) = select_lambda_sure(&f, &grid, &sure_cfg, |img, l| method.denoise(img, l, &cfg))?;
    write_csv(&curve, &a.out_csv)?;
    writeln!(out, "selected lambda: {}", imageio::format_sig9(lambda))?;
    if let Some(path) = &a.out {
        let u = method.denoise(&f, lambda, &cfg)?;
        save_8bit(&u, path)?;
        writeln!(out, "wrote {} result to {}", method.name(), path.display())?;
    }
    Ok(())
}

pub fn cmd_two_pixel(a: TwoPixelArgs, out: &mut dyn Write) -> Result<()> {
    let pen = match a.penalty {
        PenaltyName::Scad => TwoPixelPenalty::Scad(ScadParams::new(a.lambda, a.a)?),
        PenaltyName::Tv => {
            if !(a.lambda > 0.0) {
                bail!("--lambda must be positive");
            }
            TwoPixelPenalty::Tv(a.lambda)
        }
    };
    let sol = match pen {
        TwoPixelPenalty::Scad(p) => two_pixel::two_pixel_scad(a.y1, a.y2, &p),
        TwoPixelPenalty::Tv(l) => two_pixel::two_pixel_tv(a.y1, a.y2, l),
    };
    let branch = serde_json::to_value(sol.branch)?;
    writeln!(
        out,
        "theta1 {} theta2 {} branch {} objective {}",
        imageio::format_sig9(sol.theta1),
        imageio::format_sig9(sol.theta2),
        branch.as_str().unwrap_or("?"),
        imageio::format_sig9(sol.objective)
    )?;
    if a.verify {
        let hw = two_pixel::default_halfwidth(&pen);
        let step = two_pixel::default_step(a.y1, a.y2);
        // Keep the exhaustive search bounded for wide inputs.
        let span = (a.y1 - a.y2).abs() + 2.0 * hw;
        let step = step.max(span / 4000.0);
        let grid = two_pixel::two_pixel_brute_force(a.y1, a.y2, &pen, hw, step);
        writeln!(
            out,
            "grid theta1 {} theta2 {} objective {} step {}",
            imageio::format_sig9(grid.theta1),
            imageio::format_sig9(grid.theta2),
            imageio::format_sig9(grid.objective),
            imageio::format_sig9(step)
        )?;
        writeln!(out, "objective gap (grid - closed form): {:.3e}", grid.objective - sol.objective)?;
    }
    Ok(())
}

pub fn cmd_repro(a: ReproArgs, out: &mut dyn Write) -> Result<()> {
    let mut sc = if a.thin {
        Scenario::nested_squares_sigma20()
    } else {
        Scenario::thick_squares_sigma20()
    };
    sc.pattern = sc.pattern.scaled_to(a.size);
    sc.sigma = a.sigma;
    sc.seed = a.seed;
    let cfg = SolverConfig {
        dt: a.solver.dt,
        max_inner_iters: a.solver.iters,
        rel_tol: a.solver.tol,
        beta: a.solver.beta,
        ..SolverConfig::default()
    };
    let grid = parse_lambdas(&a.lambdas)?;
    let (truth, noisy) = sc.images()?;
    let cmp = scenario::compare_methods(&truth, &noisy, &grid, &scenario::SATV_E_VALUES, DEFAULT_SCAD_A, &cfg)?;
    writeln!(
        out,
        "{:?} {}px sigma {} seed {} (noisy mse {:.3})",
        sc.pattern.kind, sc.pattern.size, sc.sigma, sc.seed, cmp.noisy_mse
    )?;
    write!(out, "{}", cmp.table())?;
    let best_satv = cmp.satv();
    writeln!(
        out,
        "best mse: tv {:.3}  satv {:.3} (e={})  scad {:.3}",
        cmp.tv.mse,
        best_satv.mse,
        best_satv.e.unwrap_or(f64::NAN),
        cmp.scad.mse
    )?;
    if let Some(path) = &a.json {
        imageio::write_atomic(path, serde_json::to_string_pretty(&cmp)?.as_bytes())?;
    }
    Ok(())
}
