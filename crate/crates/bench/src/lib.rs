//! Shared fixtures for the benchmarks.

use tvscad::synth::{add_gaussian_noise, generate, PatternSpec};
use tvscad::Image;

/// Noisy thick nested squares (sigma 20) at the given side length.
pub fn noisy_squares(size: usize) -> Image {
    let truth = generate(&PatternSpec::nested_squares_thick().scaled_to(size)).expect("valid preset");
    add_gaussian_noise(&truth, 20.0, 7).expect("positive sigma")
}
