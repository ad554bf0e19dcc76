//! The two-pixel denoising problem
//!
//! ```text
//! Q(t1, t2) = (y1 - t1)^2 + (y2 - t2)^2 + pen(|t1 - t2|)
//! ```
//!
//! solved in closed form for the SCAD and TV penalties, plus an exhaustive
//! grid search used as an independent check.
//!
//! Any minimizer has `t1 + t2 = y1 + y2` and `t1 >= t2` when `y1 >= y2`.
//! Off the diagonal the difference `x = t1 - t2` solves `x + pen'(x) = y1 - y2`.

use serde::Serialize;

use crate::penalty::{ScadParams, DEFAULT_SCAD_A};

/// Which case of the closed form produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// SCAD, difference beyond `a * lambda`: data returned unchanged.
    NoShrinkage,
    /// SCAD, both pixels set to their mean.
    Pooled,
    /// SCAD, stationary point with `0 < t1 - t2 < y1 - y2`.
    InteriorStationary,
    /// TV, difference shrunk by exactly `lambda`.
    TvShrunk,
    /// TV, both pixels set to their mean.
    TvPooled,
    /// Exhaustive grid search.
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TwoPixelSolution {
    pub theta1: f64,
    pub theta2: f64,
    pub branch: Branch,
    pub objective: f64,
}

/// Penalty on the pixel difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TwoPixelPenalty {
    Scad(ScadParams),
    Tv(f64),
}

impl TwoPixelPenalty {
    fn value(&self, diff: f64) -> f64 {
        match self {
            TwoPixelPenalty::Scad(p) => p.value_unchecked(diff.abs()),
            TwoPixelPenalty::Tv(lambda) => lambda * diff.abs(),
        }
    }

    fn lambda(&self) -> f64 {
        match self {
            TwoPixelPenalty::Scad(p) => p.lambda(),
            TwoPixelPenalty::Tv(lambda) => *lambda,
        }
    }

    fn a(&self) -> f64 {
        match self {
            TwoPixelPenalty::Scad(p) => p.a(),
            TwoPixelPenalty::Tv(_) => DEFAULT_SCAD_A,
        }
    }
}

/// `Q(theta1, theta2)` for the given data and penalty.
pub fn two_pixel_objective(y1: f64, y2: f64, theta1: f64, theta2: f64, pen: &TwoPixelPenalty) -> f64 {
    (y1 - theta1).powi(2) + (y2 - theta2).powi(2) + pen.value(theta1 - theta2)
}

fn solution(y1: f64, y2: f64, t1: f64, t2: f64, branch: Branch, pen: &TwoPixelPenalty) -> TwoPixelSolution {
    TwoPixelSolution {
        theta1: t1,
        theta2: t2,
        branch,
        objective: two_pixel_objective(y1, y2, t1, t2, pen),
    }
}

// Runs `solve` on data ordered so that y1 >= y2 and swaps the answer back.
fn ordered(y1: f64, y2: f64, solve: impl Fn(f64, f64) -> (f64, f64, Branch)) -> (f64, f64, Branch) {
    if y1 >= y2 {
        solve(y1, y2)
    } else {
        let (t1, t2, b) = solve(y2, y1);
        (t2, t1, b)
    }
}

/// Closed-form minimizer of the SCAD two-pixel problem.
///
/// Differences above `a * lambda` are left alone and differences below
/// `lambda` are pooled. In between, the pooled point and the unique
/// stationary point are compared on `Q`; ties go to the pooled point.
pub fn two_pixel_scad(y1: f64, y2: f64, p: &ScadParams) -> TwoPixelSolution {
    let pen = TwoPixelPenalty::Scad(*p);
    let (t1, t2, branch) = ordered(y1, y2, |hi, lo| {
        let d = hi - lo;
        let lam = p.lambda();
        let a = p.a();
        let mean = 0.5 * (hi + lo);
        if d > a * lam {
            return (hi, lo, Branch::NoShrinkage);
        }
        if d < lam {
            return (mean, mean, Branch::Pooled);
        }
        let q = |t1: f64, t2: f64| two_pixel_objective(hi, lo, t1, t2, &pen);
        let mut best = (mean, mean, Branch::Pooled);
        let best_q = q(mean, mean);
        // x + p'(x) = d has its unique root on the linear piece when
        // d < 2 lambda and on the ramp piece otherwise (lhs(lambda) = 2 lambda,
        // lhs(a lambda) = a lambda).
        let x = if d < 2.0 * lam {
            d - lam
        } else {
            (((a - 1.0) * d - a * lam) / (a - 2.0)).clamp(lam, a * lam)
        };
        if x > 0.0 {
            let (c1, c2) = (mean + 0.5 * x, mean - 0.5 * x);
            let cq = q(c1, c2);
            if cq < best_q {
                let branch = if x >= d { Branch::NoShrinkage } else { Branch::InteriorStationary };
                best = (c1, c2, branch);
            }
        }
        best
    });
    solution(y1, y2, t1, t2, branch, &pen)
}

/// Closed-form minimizer of the TV two-pixel problem: shrink the difference
/// by `lambda` when it exceeds `lambda`, otherwise pool.
pub fn two_pixel_tv(y1: f64, y2: f64, lambda: f64) -> TwoPixelSolution {
    let pen = TwoPixelPenalty::Tv(lambda);
    let (t1, t2, branch) = ordered(y1, y2, |hi, lo| {
        if hi - lo > lambda {
            (hi - 0.5 * lambda, lo + 0.5 * lambda, Branch::TvShrunk)
        } else {
            let mean = 0.5 * (hi + lo);
            (mean, mean, Branch::TvPooled)
        }
    });
    solution(y1, y2, t1, t2, branch, &pen)
}

/// Default half-width of the search box around the data: `lambda * (a + 1)`.
pub fn default_halfwidth(pen: &TwoPixelPenalty) -> f64 {
    pen.lambda() * (pen.a() + 1.0)
}

/// Default grid step: `max(1e-3, |y1 - y2| * 1e-4)`.
pub fn default_step(y1: f64, y2: f64) -> f64 {
    (1e-3f64).max((y1 - y2).abs() * 1e-4)
}

/// Exhaustive minimization of `Q` over the square grid
/// `[min(y) - halfwidth, max(y) + halfwidth]^2` with spacing `grid_step`.
///
/// Both box edges are always grid points, so an oversized step still
/// searches the four corners. Both axes share the same nodes, so the
/// diagonal `t1 = t2` is represented.
pub fn two_pixel_brute_force(
    y1: f64,
    y2: f64,
    pen: &TwoPixelPenalty,
    grid_halfwidth: f64,
    grid_step: f64,
) -> TwoPixelSolution {
    assert!(grid_step > 0.0 && grid_step.is_finite(), "grid_step must be positive");
    let lo = y1.min(y2) - grid_halfwidth.abs();
    let hi = y1.max(y2) + grid_halfwidth.abs();
    let mut nodes: Vec<f64> = Vec::new();
    let mut k = 0usize;
    loop {
        let t = lo + k as f64 * grid_step;
        if t >= hi {
            break;
        }
        nodes.push(t);
        k += 1;
    }
    nodes.push(hi);

    let mut best = (f64::INFINITY, nodes[0], nodes[0]);
    for &t1 in &nodes {
        let r1 = (y1 - t1) * (y1 - t1);
        if r1 >= best.0 {
            continue;
        }
        for &t2 in &nodes {
            let q = r1 + (y2 - t2) * (y2 - t2) + pen.value(t1 - t2);
            if q < best.0 {
                best = (q, t1, t2);
            }
        }
    }
    TwoPixelSolution {
        theta1: best.1,
        theta2: best.2,
        branch: Branch::Grid,
        objective: best.0,
    }
}
