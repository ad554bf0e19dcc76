//! Variational denoising of blocky images: total variation (TV), spatially
//! adaptive TV (SATV) and the nonconvex SCAD penalty solved by
//! majorization-minimization, with Monte-Carlo SURE for choosing the
//! regularization weight.
//!
//! ```
//! use tvscad::{penalty::ScadParams, solvers, synth};
//!
//! let truth = synth::generate(&synth::PatternSpec::nested_squares().scaled_to(32))?;
//! let noisy = synth::add_gaussian_noise(&truth, 20.0, 1)?;
//! let cfg = solvers::SolverConfig::default();
//! let restored = solvers::scad_denoise(&noisy, &ScadParams::with_lambda(40.0)?, &cfg)?;
//! assert!(tvscad::metrics::mse(&truth, &restored)? < tvscad::metrics::mse(&truth, &noisy)?);
//! # Ok::<(), tvscad::Error>(())
//! ```

pub mod error;
pub mod estimators;
pub mod grid;
pub mod imageio;
pub mod metrics;
pub mod penalty;
pub mod solvers;
pub mod synth;
pub mod two_pixel;

pub use error::{Error, PgmErrorKind, Result};
pub use estimators::{SureConfig, SweepRecord};
pub use grid::{Field, GradientField, Image};
pub use penalty::{SatvParams, ScadParams};
pub use solvers::{Method, SolverConfig};
pub use two_pixel::{Branch, TwoPixelSolution};
