//! Image container and the discrete differential operators shared by every
//! solver: forward-difference gradient with replicate (Neumann) boundary,
//! its negative adjoint (divergence), and the smoothed gradient magnitude.

use serde::{Deserialize, Serialize};

use crate::error::{check_nonnegative, Error, Result};

/// Dense row-major grid of finite real intensities.
///
/// Nominal range is `[0, 255]` but values outside it are allowed; only the
/// 8-bit export clamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

/// A per-pixel scalar field (weights, fluxes, magnitudes) shares the image layout.
pub type Field = Image;

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage);
        }
        if data.len() != width * height {
            return Err(Error::BadLength {
                width,
                height,
                len: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn zeros_like(other: &Image) -> Self {
        Self {
            width: other.width,
            height: other.height,
            data: vec![0.0; other.len()],
        }
    }

    /// Builds an image from `f(row, col)`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for i in 0..height {
            for j in 0..width {
                data.push(f(i, j));
            }
        }
        Self::new(width, height, data)
    }

    // Callers in this crate uphold the invariants.
    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of pixels.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Pixel at `(row, col)`.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn check_shape(&self, other: &Image) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected_w: self.width,
                expected_h: self.height,
                got_w: other.width,
                got_h: other.height,
            })
        }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.len() as f64
    }

    /// Applies `f` pixelwise, checking the result stays finite.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Image> {
        Image::new(self.width, self.height, self.data.iter().map(|&v| f(v)).collect())
    }

    /// Standard inner product of two equally shaped grids.
    pub fn dot(&self, other: &Image) -> Result<f64> {
        self.check_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }
}

/// Forward differences of an image plus the magnitude smoothing constant.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub gx: Field,
    pub gy: Field,
    pub beta: f64,
}

impl GradientField {
    /// Sets the smoothing constant used by [`smoothed_magnitude`].
    pub fn with_beta(mut self, beta: f64) -> Result<Self> {
        check_nonnegative("beta", beta)?;
        self.beta = beta;
        Ok(self)
    }
}

/// Forward differences `gx[i,j] = u[i,j+1] - u[i,j]`, `gy[i,j] = u[i+1,j] - u[i,j]`;
/// differences across the last column/row are zero. `beta` starts at 0.
pub fn gradient(img: &Image) -> GradientField {
    let (w, h) = (img.width, img.height);
    let mut gx = vec![0.0; w * h];
    let mut gy = vec![0.0; w * h];
    forward_differences(&img.data, w, h, &mut gx, &mut gy);
    GradientField {
        gx: Image::from_raw(w, h, gx),
        gy: Image::from_raw(w, h, gy),
        beta: 0.0,
    }
}

#[inline]
pub(crate) fn forward_differences(u: &[f64], w: usize, h: usize, gx: &mut [f64], gy: &mut [f64]) {
    for i in 0..h {
        let row = i * w;
        for j in 0..w {
            let k = row + j;
            gx[k] = if j + 1 < w { u[k + 1] - u[k] } else { 0.0 };
            gy[k] = if i + 1 < h { u[k + w] - u[k] } else { 0.0 };
        }
    }
}

/// Discrete divergence, the negative adjoint of [`gradient`]:
/// `<gradient(u), p> = -<u, divergence(p)>` for all `u`, `p`.
///
/// Entries of `px` in the last column and of `py` in the last row are
/// ignored, matching the zero differences the gradient produces there.
pub fn divergence(px: &Field, py: &Field) -> Result<Field> {
    px.check_shape(py)?;
    let (w, h) = (px.width, px.height);
    let mut out = vec![0.0; w * h];
    divergence_into(&px.data, &py.data, w, h, &mut out);
    Ok(Image::from_raw(w, h, out))
}

#[inline]
pub(crate) fn divergence_into(px: &[f64], py: &[f64], w: usize, h: usize, out: &mut [f64]) {
    for i in 0..h {
        let row = i * w;
        for j in 0..w {
            let k = row + j;
            let mut d = 0.0;
            if j + 1 < w {
                d += px[k];
            }
            if j > 0 {
                d -= px[k - 1];
            }
            if i + 1 < h {
                d += py[k];
            }
            if i > 0 {
                d -= py[k - w];
            }
            out[k] = d;
        }
    }
}

/// Per-pixel `sqrt(gx^2 + gy^2 + beta^2)`.
pub fn smoothed_magnitude(g: &GradientField) -> Field {
    let beta2 = g.beta * g.beta;
    let data = g
        .gx
        .data
        .iter()
        .zip(&g.gy.data)
        .map(|(x, y)| (x * x + y * y + beta2).sqrt())
        .collect();
    Image::from_raw(g.gx.width, g.gx.height, data)
}
