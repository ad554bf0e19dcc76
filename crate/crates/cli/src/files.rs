//! Image loading/saving with the precision-preserving 16-bit sidecar format.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use tvscad::imageio::{self, AffineEncoding};
use tvscad::Image;

/// Sidecar describing a 16-bit affine-encoded image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub offset: f64,
    pub scale: f64,
    pub sigma_requested: Option<f64>,
    pub seed: Option<u64>,
}

impl Sidecar {
    pub fn encoding(&self) -> AffineEncoding {
        AffineEncoding {
            offset: self.offset,
            scale: self.scale,
        }
    }
}

pub fn sidecar_path(image: &Path) -> PathBuf {
    let mut s = image.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn read_sidecar(image: &Path) -> Result<Option<Sidecar>> {
    let p = sidecar_path(image);
    if !p.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
    Ok(Some(serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?))
}

/// Reads a PGM, inverting the affine encoding when a sidecar is present.
pub fn load_image(path: &Path) -> Result<Image> {
    let raster = imageio::read_pgm_raster(path).with_context(|| format!("reading {}", path.display()))?;
    let img = match read_sidecar(path)? {
        Some(sc) => sc.encoding().decode(&raster)?,
        None => raster.to_image()?,
    };
    Ok(img)
}

/// Writes an 8-bit PGM (clamped) and removes any stale sidecar.
pub fn save_8bit(img: &Image, path: &Path) -> Result<()> {
    imageio::write_pgm(img, path, true).with_context(|| format!("writing {}", path.display()))?;
    let sc = sidecar_path(path);
    if sc.exists() {
        fs::remove_file(&sc)?;
    }
    Ok(())
}

/// Writes a 16-bit affine-encoded PGM plus its JSON sidecar. On failure
/// neither file is left behind.
pub fn save_precise(img: &Image, path: &Path, sigma_requested: Option<f64>, seed: Option<u64>) -> Result<()> {
    let enc = AffineEncoding::default();
    let raster = enc.encode(img).context("value outside the 16-bit encodable range")?;
    let sidecar = Sidecar {
        offset: enc.offset,
        scale: enc.scale,
        sigma_requested,
        seed,
    };
    let sc_path = sidecar_path(path);
    let result = (|| -> Result<()> {
        fs::write(&sc_path, serde_json::to_string_pretty(&sidecar)?)?;
        imageio::write_atomic(path, &imageio::encode_pgm(&raster))?;
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_file(&sc_path);
        let _ = fs::remove_file(path);
    }
    result.with_context(|| format!("writing {}", path.display()))
}
