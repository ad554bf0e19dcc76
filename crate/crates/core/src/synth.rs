//! Synthetic blocky test images and seeded Gaussian noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};
use crate::grid::Image;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PatternKind {
    /// Concentric axis-aligned square bands, counted from the border inwards.
    NestedSquares,
    /// Same geometry as `NestedSquares`; kept distinct so the thick preset has its own name.
    NestedSquaresThick,
    /// Concentric diamond (L1-ball) bands, counted from the centre outwards.
    RotatedDiamonds,
}

impl std::str::FromStr for PatternKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nested-squares" | "nested_squares" => Ok(Self::NestedSquares),
            "nested-squares-thick" | "nested_squares_thick" => Ok(Self::NestedSquaresThick),
            "rotated-diamonds" | "rotated_diamonds" => Ok(Self::RotatedDiamonds),
            other => Err(Error::InvalidPattern(format!("unknown pattern {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSpec {
    pub kind: PatternKind,
    pub size: usize,
    pub levels: Vec<f64>,
    pub band_width: usize,
}

impl PatternSpec {
    /// Black-and-white nested squares, 256 px, 16 px bands.
    pub fn nested_squares() -> Self {
        Self {
            kind: PatternKind::NestedSquares,
            size: 256,
            levels: vec![0.0, 255.0],
            band_width: 16,
        }
    }

    /// Black-and-white nested squares with 32 px bands.
    pub fn nested_squares_thick() -> Self {
        Self {
            kind: PatternKind::NestedSquaresThick,
            size: 256,
            levels: vec![0.0, 255.0],
            band_width: 32,
        }
    }

    /// Four-level diamonds, 256 px, 16 px bands.
    pub fn rotated_diamonds() -> Self {
        Self {
            kind: PatternKind::RotatedDiamonds,
            size: 256,
            levels: vec![0.0, 85.0, 170.0, 255.0],
            band_width: 16,
        }
    }

    pub fn preset(kind: PatternKind) -> Self {
        match kind {
            PatternKind::NestedSquares => Self::nested_squares(),
            PatternKind::NestedSquaresThick => Self::nested_squares_thick(),
            PatternKind::RotatedDiamonds => Self::rotated_diamonds(),
        }
    }

    /// Same pattern at a different size, band width scaled proportionally.
    pub fn scaled_to(mut self, size: usize) -> Self {
        self.band_width = (self.band_width * size / self.size).max(1);
        self.size = size;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::InvalidPattern("levels must be nonempty".into()));
        }
        if let Some(l) = self.levels.iter().find(|l| !(0.0..=255.0).contains(*l)) {
            return Err(Error::InvalidPattern(format!("level {l} outside [0, 255]")));
        }
        if self.band_width == 0 {
            return Err(Error::InvalidPattern("band width must be positive".into()));
        }
        if self.size < 2 * self.band_width * self.levels.len() {
            return Err(Error::InvalidPattern(format!(
                "size {} is smaller than 2 * band_width * levels = {}",
                self.size,
                2 * self.band_width * self.levels.len()
            )));
        }
        Ok(())
    }
}

/// Renders a pattern. Every pixel is exactly one of `spec.levels`.
pub fn generate(spec: &PatternSpec) -> Result<Image> {
    spec.validate()?;
    let n = spec.size;
    let bw = spec.band_width;
    let levels = &spec.levels;
    Image::from_fn(n, n, |i, j| {
        let band = match spec.kind {
            PatternKind::NestedSquares | PatternKind::NestedSquaresThick => {
                let ring = i.min(j).min(n - 1 - i).min(n - 1 - j);
                ring / bw
            }
            PatternKind::RotatedDiamonds => {
                // Twice the L1 distance to the centre is always even.
                let di = (2 * i).abs_diff(n - 1);
                let dj = (2 * j).abs_diff(n - 1);
                ((di + dj) / 2) / bw
            }
        };
        levels[band % levels.len()]
    })
}

/// `img + n` with `n` i.i.d. `N(0, sigma^2)` from a seeded ChaCha stream. Not clipped.
pub fn add_gaussian_noise(img: &Image, sigma: f64, seed: u64) -> Result<Image> {
    check_positive("sigma", sigma)?;
    let noise = standard_normal_vec(img.len(), seed);
    let data = img
        .data()
        .iter()
        .zip(noise)
        .map(|(v, z)| v + sigma * z)
        .collect();
    Image::new(img.width(), img.height(), data)
}

/// `len` i.i.d. standard normal draws from `ChaCha8Rng::seed_from_u64(seed)`.
pub fn standard_normal_vec(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}
