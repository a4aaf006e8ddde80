//! Camouflage patterns: a small RGB grid with continuous channels in `[0, 255]`.
//!
//! Channels stay real-valued during the search. Quantization to 8 bits only
//! happens when a pattern is written as a PPM image; the JSON sidecar written
//! next to it keeps the full-precision values.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHANNEL_MAX: f64 = 255.0;

/// An RGB camouflage texture stored row-major with interleaved `r, g, b` channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPattern")]
pub struct CamouflagePattern {
    width: usize,
    height: usize,
    channels: Vec<f64>,
}

#[derive(Deserialize)]
struct RawPattern {
    width: usize,
    height: usize,
    channels: Vec<f64>,
}

impl TryFrom<RawPattern> for CamouflagePattern {
    type Error = Error;

    fn try_from(raw: RawPattern) -> Result<Self> {
        CamouflagePattern::from_channels(raw.width, raw.height, raw.channels)
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimension(format!(
            "pattern must be at least 1x1, got {width}x{height}"
        )));
    }
    Ok(())
}

fn check_len(width: usize, height: usize, len: usize) -> Result<()> {
    if len != width * height * 3 {
        return Err(Error::DimensionMismatch {
            expected: format!("{} channels ({width}x{height}x3)", width * height * 3),
            got: format!("{len} channels"),
        });
    }
    Ok(())
}

impl CamouflagePattern {
    /// Builds a pattern from explicit channels, rejecting out-of-range or non-finite values.
    pub fn from_channels(width: usize, height: usize, channels: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        check_len(width, height, channels.len())?;
        if let Some(&value) = channels
            .iter()
            .find(|v| !(0.0..=CHANNEL_MAX).contains(*v))
        {
            return Err(Error::InvalidColor { value });
        }
        Ok(Self {
            width,
            height,
            channels,
        })
    }

    /// Uniform random channels on `[0, 255]`; the same seed always yields the same pattern.
    pub fn new_random(width: usize, height: usize, seed: u64) -> Result<Self> {
        check_dims(width, height)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let channels = (0..width * height * 3)
            .map(|_| rng.random::<f64>() * CHANNEL_MAX)
            .collect();
        Ok(Self {
            width,
            height,
            channels,
        })
    }

    /// A single-color pattern.
    pub fn solid(width: usize, height: usize, rgb: [f64; 3]) -> Result<Self> {
        check_dims(width, height)?;
        if let Some(&value) = rgb.iter().find(|v| !(0.0..=CHANNEL_MAX).contains(*v)) {
            return Err(Error::InvalidColor { value });
        }
        let channels = rgb
            .iter()
            .copied()
            .cycle()
            .take(width * height * 3)
            .collect();
        Ok(Self {
            width,
            height,
            channels,
        })
    }

    /// Projects an unconstrained grid onto `[0, 255]` channel by channel.
    ///
    /// NaN channels map to 0.
    pub fn clamp(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        check_dims(width, height)?;
        check_len(width, height, values.len())?;
        let channels = values.into_iter().map(clamp_channel).collect();
        Ok(Self {
            width,
            height,
            channels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of scalar channels (`width * height * 3`).
    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn channels(&self) -> &[f64] {
        &self.channels
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.channels[i], self.channels[i + 1], self.channels[i + 2]]
    }

    pub fn same_shape(&self, other: &CamouflagePattern) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn shape_string(&self) -> String {
        format!("{}x{}", self.width, self.height)
    }

    /// Repeats the pattern over a `target_width x target_height` surface.
    pub fn tile(&self, target_width: usize, target_height: usize) -> Result<TiledImage> {
        if target_width == 0 || target_height == 0 {
            return Err(Error::InvalidDimension(format!(
                "tile target must be positive, got {target_width}x{target_height}"
            )));
        }
        let mut channels = Vec::with_capacity(target_width * target_height * 3);
        for y in 0..target_height {
            for x in 0..target_width {
                channels.extend_from_slice(&self.pixel(x % self.width, y % self.height));
            }
        }
        Ok(TiledImage {
            width: target_width,
            height: target_height,
            channels,
        })
    }

    /// 8-bit display values, rounded to nearest.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.channels.iter().map(|&v| quantize(v)).collect()
    }

    /// Writes `path` as binary PPM plus a full-precision JSON sidecar next to it.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut bytes = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        bytes.extend(self.to_bytes());
        fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
        let sidecar = sidecar_path(path);
        let json = serde_json::to_string(self)?;
        fs::write(&sidecar, json).map_err(|e| Error::io(sidecar, e))?;
        Ok(())
    }

    /// Reads a pattern written by [`save`](Self::save).
    ///
    /// The sidecar is preferred when present; otherwise the rounded PPM
    /// values are returned and [`Loaded::precision`] is `Rounded`.
    pub fn load(path: impl AsRef<Path>) -> Result<Loaded> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let from_ppm = parse_ppm(&bytes)?;
        let sidecar = sidecar_path(path);
        if !sidecar.exists() {
            return Ok(Loaded {
                pattern: from_ppm,
                precision: Precision::Rounded,
            });
        }
        let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        let pattern: CamouflagePattern = serde_json::from_str(&text)?;
        if !pattern.same_shape(&from_ppm) {
            return Err(Error::DimensionMismatch {
                expected: from_ppm.shape_string(),
                got: format!("sidecar {}", pattern.shape_string()),
            });
        }
        Ok(Loaded {
            pattern,
            precision: Precision::Full,
        })
    }
}

pub(crate) fn clamp_channel(v: f64) -> f64 {
    // f64::max returns the non-NaN operand
    v.max(0.0).min(CHANNEL_MAX)
}

fn quantize(v: f64) -> u8 {
    clamp_channel(v).round() as u8
}

/// The JSON sidecar that accompanies `pattern.ppm` is `pattern.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Whether a loaded pattern carries its original precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    Full,
    /// Sidecar missing; channels are the 8-bit PPM values.
    Rounded,
}

#[derive(Debug, Clone)]
pub struct Loaded {
    pub pattern: CamouflagePattern,
    pub precision: Precision,
}

/// A pattern repeated over a larger surface.
#[derive(Debug, Clone, PartialEq)]
pub struct TiledImage {
    pub width: usize,
    pub height: usize,
    pub channels: Vec<f64>,
}

impl TiledImage {
    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.channels[i], self.channels[i + 1], self.channels[i + 2]]
    }
}

struct PpmCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl PpmCursor<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|b| b.is_ascii_digit())
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err(format!("expected {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse {
                offset: start,
                message: format!("{what} out of range"),
            })
    }
}

fn parse_ppm(bytes: &[u8]) -> Result<CamouflagePattern> {
    let mut cur = PpmCursor { bytes, pos: 0 };
    if bytes.len() < 2 || &bytes[..2] != b"P6" {
        return Err(cur.err("missing P6 magic"));
    }
    cur.pos = 2;
    let width = cur.number("width")?;
    let height = cur.number("height")?;
    let maxval_at = cur.pos;
    let maxval = cur.number("maxval")?;
    if maxval != 255 {
        return Err(Error::Parse {
            offset: maxval_at,
            message: format!("unsupported maxval {maxval}"),
        });
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(cur.err("expected single whitespace after maxval")),
    }
    if width == 0 || height == 0 {
        return Err(Error::Parse {
            offset: 2,
            message: format!("zero image dimension {width}x{height}"),
        });
    }
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| cur.err("image dimensions overflow"))?;
    let data = &bytes[cur.pos..];
    if data.len() < expected {
        return Err(Error::Parse {
            offset: bytes.len(),
            message: format!("truncated pixel data: need {expected} bytes, found {}", data.len()),
        });
    }
    let channels = data[..expected].iter().map(|&b| f64::from(b)).collect();
    Ok(CamouflagePattern {
        width,
        height,
        channels,
    })
}
