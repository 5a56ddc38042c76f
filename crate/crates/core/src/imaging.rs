//! Rasters, illumination patterns and the single-pixel forward model.
//!
//! A bucket detector records, for every illumination pattern, the inner
//! product of the pattern with the scene. When several scenes are lit by
//! their own pattern sequences but share one detector, the recorded value is
//! the sum of the individual inner products. Both opaque-key overlap and
//! pattern-share superposition are special cases of [`measure_combined`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, domain};

fn check_dims(width: usize, height: usize) -> Result<usize> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimensions(format!("{width}x{height}")));
    }
    width
        .checked_mul(height)
        .ok_or_else(|| Error::InvalidDimensions(format!("{width}x{height} overflows")))
}

/// Grayscale raster of non-negative finite intensities, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        let len = check_dims(width, height)?;
        if pixels.len() != len {
            return Err(Error::LengthMismatch {
                expected: len,
                actual: pixels.len(),
            });
        }
        if let Some(v) = pixels.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidValue(format!("pixel value {v}")));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        let len = check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            pixels: vec![0.0; len],
        })
    }

    /// Builds an image from arbitrary finite reals, clamping negatives to 0.
    pub fn from_clamped(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        Self::new(
            width,
            height,
            values.into_iter().map(|v| v.max(0.0)).collect(),
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn max(&self) -> f64 {
        self.pixels.iter().copied().fold(0.0, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.pixels.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(
            self.width,
            self.height,
            self.pixels.iter().map(|v| v * c).collect(),
        )
    }
}

impl From<&BitMatrix> for Image {
    fn from(m: &BitMatrix) -> Self {
        Self {
            width: m.width,
            height: m.height,
            pixels: m.bits.iter().map(|&b| b as f64).collect(),
        }
    }
}

/// Binary raster, row-major, entries exactly 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BitMatrix {
    width: usize,
    height: usize,
    bits: Vec<u8>,
}

impl BitMatrix {
    pub fn new(width: usize, height: usize, bits: Vec<u8>) -> Result<Self> {
        let len = check_dims(width, height)?;
        if bits.len() != len {
            return Err(Error::LengthMismatch {
                expected: len,
                actual: bits.len(),
            });
        }
        if let Some(b) = bits.iter().find(|b| **b > 1) {
            return Err(Error::InvalidValue(format!("bit value {b}")));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::filled(width, height, 0)
    }

    pub fn filled(width: usize, height: usize, bit: u8) -> Result<Self> {
        let len = check_dims(width, height)?;
        Self::new(width, height, vec![bit; len])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self> {
        let len = check_dims(width, height)?;
        let mut bits = Vec::with_capacity(len);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y) as u8);
            }
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, bit: bool) {
        self.bits[y * self.width + x] = bit as u8;
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    pub fn complement(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| 1 - b).collect(),
        }
    }
}

/// `count` binary patterns regenerable from `(width, height, count, seed)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternSequence {
    width: usize,
    height: usize,
    seed: u64,
    patterns: Vec<BitMatrix>,
}

impl PatternSequence {
    /// Assembles a sequence from explicit patterns. `seed` is recorded as
    /// provenance only.
    pub fn from_patterns(seed: u64, patterns: Vec<BitMatrix>) -> Result<Self> {
        let first = patterns.first().ok_or(Error::Empty("pattern list"))?;
        let (width, height) = first.dims();
        for p in &patterns {
            if p.dims() != (width, height) {
                return Err(Error::DimensionMismatch {
                    expected: (width, height),
                    actual: p.dims(),
                });
            }
        }
        Ok(Self {
            width,
            height,
            seed,
            patterns,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn count(&self) -> usize {
        self.patterns.len()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn patterns(&self) -> &[BitMatrix] {
        &self.patterns
    }

    pub fn get(&self, n: usize) -> &BitMatrix {
        &self.patterns[n]
    }
}

/// Illumination bit of pattern `n` at `(x, y)`.
#[inline]
pub fn pattern_bit(seed: u64, n: usize, x: usize, y: usize) -> u8 {
    rng::bit(seed, domain::PATTERN, &[n as u64, x as u64, y as u64])
}

/// Generates `count` patterns of i.i.d. fair bits. Each bit depends only on
/// `(seed, n, x, y)`, so sequences with a common seed are prefixes of one
/// another.
pub fn generate_patterns(
    width: usize,
    height: usize,
    count: usize,
    seed: u64,
) -> Result<PatternSequence> {
    check_dims(width, height)?;
    if count == 0 {
        return Err(Error::InvalidDimensions("pattern count is zero".into()));
    }
    let patterns = (0..count)
        .map(|n| BitMatrix::from_fn(width, height, |x, y| pattern_bit(seed, n, x, y) == 1))
        .collect::<Result<Vec<_>>>()?;
    Ok(PatternSequence {
        width,
        height,
        seed,
        patterns,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    PlainSpi,
    OpaqueQr,
    PatternShare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    #[default]
    None,
    AdditiveGaussian,
}

/// Additive Gaussian detector noise. `sigma` is relative to the mean
/// noiseless intensity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn gaussian(sigma: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::AdditiveGaussian,
            sigma,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::InvalidValue(format!("noise sigma {}", self.sigma)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementMeta {
    pub scheme: Scheme,
    pub pattern_seeds: Vec<u64>,
    pub width: usize,
    pub height: usize,
    pub objects: usize,
    #[serde(default)]
    pub noise: NoiseModel,
}

/// Bucket-detector readings, one per illumination pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSeries {
    pub values: Vec<f64>,
    pub meta: MeasurementMeta,
}

impl MeasurementSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Inner product of an object with a binary pattern, summed in row-major
/// order.
#[inline]
fn inner_product(object: &[f64], pattern: &[u8]) -> f64 {
    let mut acc = 0.0;
    for (o, &p) in object.iter().zip(pattern) {
        if p == 1 {
            acc += *o;
        }
    }
    acc
}

pub fn measure(object: &Image, patterns: &PatternSequence) -> Result<MeasurementSeries> {
    let mut series =
        measure_combined(std::slice::from_ref(object), std::slice::from_ref(patterns))?;
    series.meta.scheme = Scheme::PlainSpi;
    Ok(series)
}

/// One detector observing several scenes, each lit by its own sequence.
/// `values[n]` is the sum over scenes (in list order) of the row-major
/// inner products.
pub fn measure_combined(
    objects: &[Image],
    pattern_seqs: &[PatternSequence],
) -> Result<MeasurementSeries> {
    if objects.is_empty() || pattern_seqs.is_empty() {
        return Err(Error::Empty("object or pattern list"));
    }
    if objects.len() != pattern_seqs.len() {
        return Err(Error::LengthMismatch {
            expected: objects.len(),
            actual: pattern_seqs.len(),
        });
    }
    let count = pattern_seqs[0].count();
    for (o, p) in objects.iter().zip(pattern_seqs) {
        if o.dims() != p.dims() {
            return Err(Error::DimensionMismatch {
                expected: o.dims(),
                actual: p.dims(),
            });
        }
        if p.count() != count {
            return Err(Error::LengthMismatch {
                expected: count,
                actual: p.count(),
            });
        }
    }
    let values = (0..count)
        .map(|n| {
            let mut total = 0.0;
            for (o, p) in objects.iter().zip(pattern_seqs) {
                total += inner_product(o.pixels(), p.get(n).bits());
            }
            total
        })
        .collect();
    let scheme = if objects.len() == 1 {
        Scheme::PlainSpi
    } else if pattern_seqs.windows(2).all(|w| w[0] == w[1]) {
        Scheme::OpaqueQr
    } else {
        Scheme::PatternShare
    };
    Ok(MeasurementSeries {
        values,
        meta: MeasurementMeta {
            scheme,
            pattern_seeds: pattern_seqs.iter().map(|p| p.seed()).collect(),
            width: objects[0].width(),
            height: objects[0].height(),
            objects: objects.len(),
            noise: NoiseModel::none(),
        },
    })
}

/// Measures an object against real-valued (e.g. superposed) patterns, each
/// given row-major with the object's dimensions.
pub fn measure_weighted(object: &Image, patterns: &[Vec<f64>]) -> Result<Vec<f64>> {
    patterns
        .iter()
        .map(|p| {
            if p.len() != object.pixels().len() {
                return Err(Error::LengthMismatch {
                    expected: object.pixels().len(),
                    actual: p.len(),
                });
            }
            Ok(object.pixels().iter().zip(p).map(|(o, w)| o * w).sum())
        })
        .collect()
}

/// Adds zero-mean Gaussian noise with standard deviation
/// `sigma * mean(values)`; sample `n` depends only on `(model.seed, n)`.
pub fn add_noise(series: &MeasurementSeries, model: &NoiseModel) -> Result<MeasurementSeries> {
    model.validate()?;
    let mut out = series.clone();
    if model.kind == NoiseKind::None || model.sigma == 0.0 {
        return Ok(out);
    }
    let std = model.sigma * series.mean().abs();
    for (n, v) in out.values.iter_mut().enumerate() {
        *v += std * rng::gaussian(model.seed, domain::NOISE, &[n as u64]);
    }
    out.meta.noise = *model;
    Ok(out)
}
