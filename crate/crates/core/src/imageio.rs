//! PGM (P2/P5) reading and writing, and the sweep CSV format.
//!
//! Intensities stay real-valued in memory; quantization happens only here.
//! 8-bit exports round and optionally clamp to `[0, 255]`. Noisy
//! intermediates that must keep sub-integer precision and out-of-range
//! values go through [`AffineEncoding`] into 16-bit samples instead.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, PgmErrorKind, Result};
use crate::estimators::SweepRecord;
use crate::grid::Image;

/// Raw PGM raster: integer samples and their maxval.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PgmRaster {
    pub width: usize,
    pub height: usize,
    pub maxval: u32,
    pub samples: Vec<u32>,
}

impl PgmRaster {
    /// Maps samples onto `[0, 255]` by `v * 255 / maxval`; exact for maxval 255.
    pub fn to_image(&self) -> Result<Image> {
        let data = if self.maxval == 255 {
            self.samples.iter().map(|&v| v as f64).collect()
        } else {
            let s = 255.0 / self.maxval as f64;
            self.samples.iter().map(|&v| v as f64 * s).collect()
        };
        Image::new(self.width, self.height, data)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, kind: PgmErrorKind) -> Error {
        Error::Pgm { offset: self.pos, kind }
    }

    // Skips whitespace and `#` comments.
    fn skip_space(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &'static str) -> Result<u32> {
        self.skip_space();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err(PgmErrorKind::MalformedHeader(what)));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or(Error::Pgm {
                offset: start,
                kind: PgmErrorKind::MalformedHeader(what),
            })
    }
}

/// Parses a P2 or P5 PGM byte stream.
pub fn decode_pgm(bytes: &[u8]) -> Result<PgmRaster> {
    let mut c = Cursor { bytes, pos: 0 };
    if bytes.len() < 2 {
        return Err(c.err(PgmErrorKind::MalformedHeader("missing magic number")));
    }
    let magic = &bytes[..2];
    let binary = match magic {
        b"P5" => true,
        b"P2" => false,
        other => {
            return Err(c.err(PgmErrorKind::UnsupportedMagic(
                String::from_utf8_lossy(other).into_owned(),
            )))
        }
    };
    c.pos = 2;
    if c.pos < bytes.len() && !(bytes[c.pos].is_ascii_whitespace() || bytes[c.pos] == b'#') {
        return Err(c.err(PgmErrorKind::MalformedHeader("no separator after magic number")));
    }
    let width = c.number("width")? as usize;
    let height = c.number("height")? as usize;
    let maxval = c.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(c.err(PgmErrorKind::MalformedHeader("zero dimension")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(c.err(PgmErrorKind::MalformedHeader("maxval must be in 1..=65535")));
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| c.err(PgmErrorKind::MalformedHeader("dimensions overflow")))?;
    let mut samples = Vec::with_capacity(n);
    if binary {
        if c.pos >= bytes.len() || !bytes[c.pos].is_ascii_whitespace() {
            return Err(c.err(PgmErrorKind::MalformedHeader("no separator before raster")));
        }
        c.pos += 1;
        let bps = if maxval < 256 { 1 } else { 2 };
        let expected = n * bps;
        let payload = &bytes[c.pos..];
        if payload.len() < expected {
            return Err(Error::Pgm {
                offset: bytes.len(),
                kind: PgmErrorKind::Truncated {
                    expected,
                    found: payload.len(),
                },
            });
        }
        for (i, chunk) in payload[..expected].chunks_exact(bps).enumerate() {
            let v = if bps == 1 {
                chunk[0] as u32
            } else {
                u16::from_be_bytes([chunk[0], chunk[1]]) as u32
            };
            if v > maxval {
                return Err(Error::Pgm {
                    offset: c.pos + i * bps,
                    kind: PgmErrorKind::SampleOverMax { value: v, maxval },
                });
            }
            samples.push(v);
        }
    } else {
        for _ in 0..n {
            c.skip_space();
            if c.pos >= bytes.len() {
                return Err(Error::Pgm {
                    offset: c.pos,
                    kind: PgmErrorKind::Truncated {
                        expected: n,
                        found: samples.len(),
                    },
                });
            }
            let at = c.pos;
            let v = c.number("sample").map_err(|_| Error::Pgm {
                offset: at,
                kind: PgmErrorKind::BadSample,
            })?;
            if v > maxval {
                return Err(Error::Pgm {
                    offset: at,
                    kind: PgmErrorKind::SampleOverMax { value: v, maxval },
                });
            }
            samples.push(v);
        }
    }
    Ok(PgmRaster {
        width,
        height,
        maxval,
        samples,
    })
}

/// Encodes a raster as binary P5 (big-endian 16-bit samples when maxval > 255).
pub fn encode_pgm(raster: &PgmRaster) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", raster.width, raster.height, raster.maxval).into_bytes();
    if raster.maxval < 256 {
        out.extend(raster.samples.iter().map(|&v| v as u8));
    } else {
        for &v in &raster.samples {
            out.extend_from_slice(&(v as u16).to_be_bytes());
        }
    }
    out
}

pub fn read_pgm_raster(path: impl AsRef<Path>) -> Result<PgmRaster> {
    decode_pgm(&fs::read(path)?)
}

/// Reads a PGM file into an image on the `[0, 255]` scale.
pub fn read_pgm(path: impl AsRef<Path>) -> Result<Image> {
    read_pgm_raster(path)?.to_image()
}

/// Rounds to 8-bit samples. With `clamp` out-of-range values saturate,
/// otherwise they are an error.
pub fn quantize_8bit(img: &Image, clamp: bool) -> Result<PgmRaster> {
    let mut samples = Vec::with_capacity(img.len());
    for (index, &v) in img.data().iter().enumerate() {
        let r = v.round();
        if !(0.0..=255.0).contains(&r) {
            if !clamp {
                return Err(Error::OutOfRange { index, value: v });
            }
        }
        samples.push(r.clamp(0.0, 255.0) as u32);
    }
    Ok(PgmRaster {
        width: img.width(),
        height: img.height(),
        maxval: 255,
        samples,
    })
}

/// Writes an 8-bit binary PGM. The file appears only once fully written.
pub fn write_pgm(img: &Image, path: impl AsRef<Path>, clamp: bool) -> Result<()> {
    let raster = quantize_8bit(img, clamp)?;
    write_atomic(path.as_ref(), &encode_pgm(&raster))
}

/// Fixed affine map between real intensities and 16-bit samples:
/// `sample = round((value + offset) * scale)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineEncoding {
    pub offset: f64,
    pub scale: f64,
}

impl Default for AffineEncoding {
    fn default() -> Self {
        Self {
            offset: 1024.0,
            scale: 16.0,
        }
    }
}

impl AffineEncoding {
    pub fn encode(&self, img: &Image) -> Result<PgmRaster> {
        let mut samples = Vec::with_capacity(img.len());
        for (index, &v) in img.data().iter().enumerate() {
            let s = ((v + self.offset) * self.scale).round();
            if !(0.0..=65535.0).contains(&s) {
                return Err(Error::OutOfRange { index, value: v });
            }
            samples.push(s as u32);
        }
        Ok(PgmRaster {
            width: img.width(),
            height: img.height(),
            maxval: 65535,
            samples,
        })
    }

    pub fn decode(&self, raster: &PgmRaster) -> Result<Image> {
        let data = raster
            .samples
            .iter()
            .map(|&s| s as f64 / self.scale - self.offset)
            .collect();
        Image::new(raster.width, raster.height, data)
    }
}

/// Writes `bytes` to a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = std::path::PathBuf::from(tmp);
    let result = (|| -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

/// Formats with 9 significant digits, `%g` style.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_fraction(&format!("{x:.decimals$}"))
    } else {
        let s = format!("{x:.8e}");
        let (mantissa, e) = s.split_once('e').unwrap();
        format!("{}e{}", trim_fraction(mantissa), e)
    }
}

fn trim_fraction(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// CSV text with header `lambda,mse,sure`, rows sorted by lambda, missing
/// values as empty fields.
pub fn sweep_csv(records: &[SweepRecord]) -> String {
    let mut rows: Vec<&SweepRecord> = records.iter().collect();
    rows.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let mut out = String::from("lambda,mse,sure\n");
    let opt = |v: Option<f64>| v.map(format_sig9).unwrap_or_default();
    for r in rows {
        out.push_str(&format!("{},{},{}\n", format_sig9(r.lambda), opt(r.mse), opt(r.sure)));
    }
    out
}

pub fn write_csv(records: &[SweepRecord], path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), sweep_csv(records).as_bytes())
}

/// Parses the output of [`sweep_csv`].
pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRecord>> {
    let bad = |line: usize| Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, format!("malformed CSV line {line}")));
    let mut lines = text.lines();
    if lines.next() != Some("lambda,mse,sure") {
        return Err(bad(1));
    }
    let field = |s: &str, line: usize| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|_| bad(line))
        }
    };
    lines
        .enumerate()
        .map(|(i, l)| {
            let parts: Vec<&str> = l.split(',').collect();
            if parts.len() != 3 {
                return Err(bad(i + 2));
            }
            Ok(SweepRecord {
                lambda: field(parts[0], i + 2)?.ok_or_else(|| bad(i + 2))?,
                mse: field(parts[1], i + 2)?,
                sure: field(parts[2], i + 2)?,
            })
        })
        .collect()
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<SweepRecord>> {
    parse_sweep_csv(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minimal_ascii() {
        let r = decode_pgm(b"P2 2 1 255 0 255").unwrap();
        assert_eq!(r.to_image().unwrap().data(), &[0.0, 255.0]);
    }

    #[test]
    fn ascii_with_comments() {
        let r = decode_pgm(b"P2\n# made by hand\n3 1\n# max\n15\n0 15\n 7\n").unwrap();
        assert_eq!(r.samples, vec![0, 15, 7]);
        assert_eq!(r.to_image().unwrap().data(), &[0.0, 255.0, 7.0 * 17.0]);
    }

    #[test]
    fn binary_16bit_scaling() {
        let raster = PgmRaster {
            width: 3,
            height: 1,
            maxval: 65535,
            samples: vec![0, 65535, 257],
        };
        let bytes = encode_pgm(&raster);
        let img = decode_pgm(&bytes).unwrap().to_image().unwrap();
        assert_eq!(img.data()[0], 0.0);
        assert_eq!(img.data()[1], 255.0);
        assert!((img.data()[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn error_kinds_and_offsets() {
        match decode_pgm(b"P6 1 1 255 x") {
            Err(Error::Pgm { offset: 0, kind: PgmErrorKind::UnsupportedMagic(m) }) => assert_eq!(m, "P6"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            decode_pgm(b"P5 2 x 255 "),
            Err(Error::Pgm { kind: PgmErrorKind::MalformedHeader("height"), .. })
        ));
        match decode_pgm(b"P5 4 1 255\nab") {
            Err(Error::Pgm { offset, kind: PgmErrorKind::Truncated { expected: 4, found: 2 } }) => assert_eq!(offset, 13),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            decode_pgm(b"P2 2 1 255 0"),
            Err(Error::Pgm { kind: PgmErrorKind::Truncated { .. }, .. })
        ));
        assert!(matches!(
            decode_pgm(b"P2 2 1 10 0 11"),
            Err(Error::Pgm { offset: 12, kind: PgmErrorKind::SampleOverMax { value: 11, maxval: 10 } })
        ));
        assert!(matches!(decode_pgm(b"P2 2 1 255 0 zz"), Err(Error::Pgm { kind: PgmErrorKind::BadSample, .. })));
        assert!(decode_pgm(b"P5 1 1 0\n\0").is_err());
        assert!(decode_pgm(b"P").is_err());
    }

    #[test]
    fn quantization_rules() {
        let img = Image::new(3, 1, vec![300.0, -3.0, 12.4]).unwrap();
        assert_eq!(quantize_8bit(&img, true).unwrap().samples, vec![255, 0, 12]);
        assert!(matches!(quantize_8bit(&img, false), Err(Error::OutOfRange { index: 0, .. })));
        let neg = Image::new(1, 1, vec![-3.0]).unwrap();
        assert!(quantize_8bit(&neg, false).is_err());
        // -0.4 rounds to 0 and is accepted in strict mode
        let tiny = Image::new(1, 1, vec![-0.4]).unwrap();
        assert_eq!(quantize_8bit(&tiny, false).unwrap().samples, vec![0]);
    }

    #[test]
    fn file_round_trip() {
        let dir = std::env::temp_dir().join(format!("tvscad-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let img = Image::from_fn(7, 5, |i, j| ((i * 37 + j * 11) % 256) as f64).unwrap();
        let p = dir.join("a.pgm");
        write_pgm(&img, &p, false).unwrap();
        assert_eq!(read_pgm(&p).unwrap(), img);
        assert!(!dir.join("a.pgm.partial").exists());
        let bad = Image::new(1, 1, vec![-3.0]).unwrap();
        assert!(write_pgm(&bad, dir.join("b.pgm"), false).is_err());
        assert!(!dir.join("b.pgm").exists());
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn affine_round_trip_precision() {
        let enc = AffineEncoding::default();
        let img = Image::new(4, 1, vec![-40.3, 0.0, 255.0, 301.77]).unwrap();
        let back = enc.decode(&decode_pgm(&encode_pgm(&enc.encode(&img).unwrap())).unwrap()).unwrap();
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() <= 0.5 / 16.0 + 1e-12);
        }
        let huge = Image::new(1, 1, vec![5000.0]).unwrap();
        assert!(enc.encode(&huge).is_err());
    }

    #[test]
    fn csv_examples() {
        assert_eq!(sweep_csv(&[]), "lambda,mse,sure\n");
        let one = [SweepRecord {
            lambda: 1.0,
            mse: Some(17.13),
            sure: Some(18.2),
        }];
        let text = sweep_csv(&one);
        assert_eq!(text, "lambda,mse,sure\n1,17.13,18.2\n");
        assert_eq!(text.lines().count(), 2);
        assert_eq!(parse_sweep_csv(&text).unwrap(), one);
        let partial = [SweepRecord {
            lambda: 2.5,
            mse: None,
            sure: Some(-1.0),
        }];
        assert_eq!(sweep_csv(&partial), "lambda,mse,sure\n2.5,,-1\n");
    }

    #[test]
    fn csv_sorted_by_lambda() {
        let recs = [3.0, 1.0, 2.0].map(|l| SweepRecord {
            lambda: l,
            mse: None,
            sure: None,
        });
        let back = parse_sweep_csv(&sweep_csv(&recs)).unwrap();
        assert_eq!(back.iter().map(|r| r.lambda).collect::<Vec<_>>(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(1.0), "1");
        assert_eq!(format_sig9(0.1), "0.1");
        assert_eq!(format_sig9(123456789.0), "123456789");
        assert_eq!(format_sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(format_sig9(1.5e-9), "1.5e-9");
        assert_eq!(format_sig9(2.0e12), "2e12");
    }

    proptest! {
        #[test]
        fn pgm_round_trip(w in 1usize..12, h in 1usize..12, seed in any::<u64>()) {
            let img = Image::from_fn(w, h, |i, j| ((seed >> ((i + j) % 56)) as usize % 256) as f64).unwrap();
            let bytes = encode_pgm(&quantize_8bit(&img, false).unwrap());
            prop_assert_eq!(decode_pgm(&bytes).unwrap().to_image().unwrap(), img);
        }

        #[test]
        fn csv_reserialization_is_idempotent(vals in proptest::collection::vec((1e-6f64..1e6, proptest::option::of(-1e8f64..1e8), proptest::option::of(-1e8f64..1e8)), 0..20)) {
            let recs: Vec<SweepRecord> = vals.into_iter().map(|(lambda, mse, sure)| SweepRecord { lambda, mse, sure }).collect();
            let once = sweep_csv(&recs);
            let parsed = parse_sweep_csv(&once).unwrap();
            prop_assert_eq!(sweep_csv(&parsed), once);
            for (a, b) in parsed.iter().zip({ let mut r = recs.clone(); r.sort_by(|x, y| x.lambda.total_cmp(&y.lambda)); r }) {
                prop_assert!((a.lambda - b.lambda).abs() <= 1e-8 * b.lambda.abs());
            }
        }
    }
}
