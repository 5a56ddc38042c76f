//! A secret hidden in two illumination-pattern sequences.
//!
//! Both sequences start as one random sequence. On the secret's support
//! every pattern pair is rewritten to one lit and one dark pixel, with a
//! fresh fair orientation per `(n, x, y)`. Each sequence alone is still a
//! sequence of i.i.d. fair bits. Lighting two copies of a scene with the
//! pair under one detector is equivalent to lighting one copy with the
//! superposed patterns, which are constant (1) on the secret: that region
//! carries no spatial information and drops out of the reconstruction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{generate_patterns, BitMatrix, Image, PatternSequence};
use crate::rng::{self, domain};
use crate::threshold::otsu;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternSharePair {
    pub seq_a: PatternSequence,
    pub seq_b: PatternSequence,
    pub secret: BitMatrix,
    pub base_seed: u64,
    pub orient_seed: u64,
}

impl PatternSharePair {
    pub fn count(&self) -> usize {
        self.seq_a.count()
    }

    pub fn sequence(&self, which: Which) -> &PatternSequence {
        match which {
            Which::A => &self.seq_a,
            Which::B => &self.seq_b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Which {
    #[default]
    A,
    B,
}

/// Value sequence A takes at a foreground pixel of pattern `n`.
pub fn orientation(orient_seed: u64, n: usize, x: usize, y: usize) -> u8 {
    rng::bit(
        orient_seed,
        domain::PATTERN_ORIENT,
        &[n as u64, x as u64, y as u64],
    )
}

pub fn encode_pattern_shares(
    width: usize,
    height: usize,
    count: usize,
    secret: &BitMatrix,
    base_seed: u64,
    orient_seed: u64,
) -> Result<PatternSharePair> {
    if secret.dims() != (width, height) {
        return Err(Error::DimensionMismatch {
            expected: (width, height),
            actual: secret.dims(),
        });
    }
    let base = generate_patterns(width, height, count, base_seed)?;
    let mut a = Vec::with_capacity(count);
    let mut b = Vec::with_capacity(count);
    for (n, p) in base.patterns().iter().enumerate() {
        let mut pa = p.clone();
        let mut pb = p.clone();
        for y in 0..height {
            for x in 0..width {
                if secret.get(x, y) == 1 {
                    let o = orientation(orient_seed, n, x, y);
                    pa.set(x, y, o == 1);
                    pb.set(x, y, o == 0);
                }
            }
        }
        a.push(pa);
        b.push(pb);
    }
    Ok(PatternSharePair {
        seq_a: PatternSequence::from_patterns(base_seed, a)?,
        seq_b: PatternSequence::from_patterns(base_seed, b)?,
        secret: secret.clone(),
        base_seed,
        orient_seed,
    })
}

/// Pointwise sum of two binary patterns, values in {0, 1, 2}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelMatrix {
    pub width: usize,
    pub height: usize,
    pub levels: Vec<u8>,
}

impl LevelMatrix {
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.levels[y * self.width + x]
    }

    pub fn to_weights(&self) -> Vec<f64> {
        self.levels.iter().map(|&l| l as f64).collect()
    }
}

pub fn superpose_sequences(pair: &PatternSharePair) -> Vec<LevelMatrix> {
    let (width, height) = pair.seq_a.dims();
    pair.seq_a
        .patterns()
        .iter()
        .zip(pair.seq_b.patterns())
        .map(|(a, b)| LevelMatrix {
            width,
            height,
            levels: a.bits().iter().zip(b.bits()).map(|(x, y)| x + y).collect(),
        })
        .collect()
}

/// The secret read straight off the first superposed pattern: background
/// levels are 0 or 2, never 1.
pub fn reveal_secret_from_patterns(pair: &PatternSharePair) -> BitMatrix {
    let (w, h) = pair.seq_a.dims();
    let a = pair.seq_a.get(0);
    let b = pair.seq_b.get(0);
    BitMatrix::from_fn(w, h, |x, y| a.get(x, y) + b.get(x, y) == 1)
        .expect("dimensions validated at encode time")
}

/// Least-squares `(alpha, beta)` for `target ~ alpha * source + beta` over
/// the selected pixels.
fn affine_fit(target: &[f64], source: &[f64], select: impl Fn(usize) -> bool) -> (f64, f64) {
    let idx: Vec<usize> = (0..target.len()).filter(|&i| select(i)).collect();
    if idx.is_empty() {
        return (0.0, 0.0);
    }
    let n = idx.len() as f64;
    let ms = idx.iter().map(|&i| source[i]).sum::<f64>() / n;
    let mt = idx.iter().map(|&i| target[i]).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for &i in &idx {
        cov += (source[i] - ms) * (target[i] - mt);
        var += (source[i] - ms).powi(2);
    }
    let alpha = if var > 0.0 { cov / var } else { 0.0 };
    (alpha, mt - alpha * ms)
}

/// Mean 3x3 local variance of `img` over pixels of `class` whose whole
/// neighbourhood shares the class, or `None` when no pixel qualifies.
fn interior_local_variance(img: &Image, mask: &[bool], class: bool) -> Option<f64> {
    let (w, h) = img.dims();
    let px = img.pixels();
    let mut interior = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if mask[y * w + x] != class {
                continue;
            }
            let mut vals = Vec::with_capacity(9);
            let mut pure = true;
            for dy in -1i32..=1 {
                for dx in -1i32..=1 {
                    let (nx, ny) = (x as i32 + dx, y as i32 + dy);
                    if nx < 0 || ny < 0 || nx >= w as i32 || ny >= h as i32 {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    pure &= mask[j] == class;
                    vals.push(px[j]);
                }
            }
            if pure {
                let m = vals.iter().sum::<f64>() / vals.len() as f64;
                interior
                    .push(vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / vals.len() as f64);
            }
        }
    }
    (!interior.is_empty()).then(|| interior.iter().sum::<f64>() / interior.len() as f64)
}

/// Of the two classes of `mask`, the one with the flatter interior in
/// `reference` becomes the foreground. If either class has no interior
/// pixel (strokes one pixel wide, say) the comparison means nothing and
/// `fallback` decides.
fn flatter_class(reference: &Image, mask: &[bool], fallback: bool) -> BitMatrix {
    let fg = match (
        interior_local_variance(reference, mask, true),
        interior_local_variance(reference, mask, false),
    ) {
        (Some(v_true), Some(v_false)) => v_false >= v_true,
        _ => fallback,
    };
    BitMatrix::new(
        reference.width(),
        reference.height(),
        mask.iter().map(|&m| (m == fg) as u8).collect(),
    )
    .expect("mask built from the reference dimensions")
}

const REFINE_PASSES: usize = 10;
const NORMALIZATION_FLOOR: f64 = 0.05;

/// Locates the suppressed secret region by comparing a combined-scene
/// reconstruction with a conventional single-scene one.
///
/// The residual `|combined - alpha * single - beta|` is formed with
/// `(alpha, beta)` fitted by least squares and divided by the predicted
/// intensity `|alpha * single + beta|` (floored at 5% of the combined
/// range), so a fully suppressed pixel scores about 1 whatever its
/// brightness. The normalized residual is Otsu-thresholded and the fit is
/// repeated over the current background only until the labels settle.
/// Of the two residual classes the one whose interior is flatter in
/// `combined` is returned as the secret; when a class has no interior
/// pixels, the high-residual class is.
///
/// The first fit runs over every pixel, so the secret must cover less than
/// half of the scene; a majority secret comes back complemented.
pub fn reveal_secret_from_reconstruction(combined: &Image, single: &Image) -> Result<BitMatrix> {
    if combined.dims() != single.dims() {
        return Err(Error::DimensionMismatch {
            expected: combined.dims(),
            actual: single.dims(),
        });
    }
    let (w, h) = combined.dims();
    let range = combined.max() - combined.min();
    if !(range > 0.0) {
        return Err(Error::Degenerate("constant combined reconstruction"));
    }
    let c = combined.pixels();
    let s = single.pixels();

    let mut fit = affine_fit(c, s, |_| true);
    let mut labels: Vec<bool> = Vec::new();
    for _ in 0..=REFINE_PASSES {
        let floor = NORMALIZATION_FLOOR * range;
        let raw: Vec<f64> = c
            .iter()
            .zip(s)
            .map(|(ci, si)| (ci - fit.0 * si - fit.1).abs())
            .collect();
        if raw.iter().all(|&v| v <= 1e-9 * range) {
            return BitMatrix::zeros(w, h);
        }
        let d: Vec<f64> = raw
            .iter()
            .zip(s)
            .map(|(di, si)| di / (fit.0 * si + fit.1).abs().max(floor))
            .collect();
        let Some(t) = otsu(&d) else {
            return Err(Error::Degenerate("constant difference image"));
        };
        let next: Vec<bool> = d.iter().map(|&v| v > t).collect();
        if next == labels {
            break;
        }
        labels = next;
        fit = affine_fit(c, s, |i| !labels[i]);
    }
    // the fit tracks the low-residual class, so the other one is the secret
    Ok(flatter_class(combined, &labels, true))
}

/// Weaker fallback without a reference reconstruction: Otsu on the
/// combined reconstruction, flatter class as foreground.
pub fn reveal_secret_from_combined_only(combined: &Image) -> Result<BitMatrix> {
    let t = otsu(combined.pixels()).ok_or(Error::Degenerate("constant combined reconstruction"))?;
    let mask: Vec<bool> = combined.pixels().iter().map(|&v| v > t).collect();
    // the suppressed region is the dark one
    Ok(flatter_class(combined, &mask, false))
}

/// On-disk description of a pattern-share pair. The sequences are
/// regenerated from the seeds; only the secret is stored, as a PBM next to
/// the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternShareManifest {
    pub width: usize,
    pub height: usize,
    pub n: usize,
    pub base_seed: u64,
    pub orient_seed: u64,
    /// Secret PBM, relative to the manifest's directory unless absolute.
    pub secret: std::path::PathBuf,
}

impl PatternShareManifest {
    pub fn load(path: impl AsRef<std::path::Path>) -> Result<(Self, PatternSharePair)> {
        let path = path.as_ref();
        let m: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let secret_path = if m.secret.is_absolute() {
            m.secret.clone()
        } else {
            path.parent()
                .unwrap_or(std::path::Path::new("."))
                .join(&m.secret)
        };
        let secret = crate::pnm::load_pbm(secret_path)?;
        let pair =
            encode_pattern_shares(m.width, m.height, m.n, &secret, m.base_seed, m.orient_seed)?;
        Ok((m, pair))
    }
}
