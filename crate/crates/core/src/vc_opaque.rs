//! Two opaque visual keys whose detector-side sum reveals a secret.
//!
//! Where the secret is 0 both keys keep the base module. Where it is 1 one
//! key gets a 1 and the other a 0, so exactly one key departs from the
//! base. Summed intensities are 0 (both dark), 2 (both light) or 1 (mixed),
//! and the mixed level occurs exactly on the secret.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{BitMatrix, Image};
use crate::qr::{module_codewords, QrSymbol};
use crate::rng::{self, domain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Assignment {
    /// Each foreground orientation is an independent fair bit.
    #[default]
    Random,
    /// Modified modules split evenly between the keys.
    Balanced,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SharePair {
    pub key1: BitMatrix,
    pub key2: BitMatrix,
    pub base: BitMatrix,
    pub secret: BitMatrix,
    pub seed: u64,
    pub assignment: Assignment,
}

fn same_dims(a: &BitMatrix, b: &BitMatrix) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch {
            expected: a.dims(),
            actual: b.dims(),
        });
    }
    Ok(())
}

/// Orientation bit for a foreground module under random assignment: the
/// value given to key 1.
pub fn orientation(seed: u64, x: usize, y: usize) -> u8 {
    rng::bit(seed, domain::SHARE_ORIENT, &[x as u64, y as u64])
}

pub fn encode_shares(
    base: &BitMatrix,
    secret: &BitMatrix,
    seed: u64,
    assignment: Assignment,
) -> Result<SharePair> {
    same_dims(base, secret)?;
    let (w, h) = base.dims();
    let mut key1 = base.clone();
    let mut key2 = base.clone();
    match assignment {
        Assignment::Random => {
            for y in 0..h {
                for x in 0..w {
                    if secret.get(x, y) == 1 {
                        let o = orientation(seed, x, y);
                        key1.set(x, y, o == 1);
                        key2.set(x, y, o == 0);
                    }
                }
            }
        }
        Assignment::Balanced => {
            let fg: Vec<usize> = (0..w * h).filter(|&i| secret.bits()[i] == 1).collect();
            let perm = rng::permutation(fg.len(), seed, domain::SHUFFLE);
            for (rank, &k) in perm.iter().enumerate() {
                let i = fg[k];
                let (x, y) = (i % w, i / w);
                let b = base.get(x, y) == 1;
                // first half modifies key 1, second half key 2
                let key1_modified = rank < fg.len() / 2;
                key1.set(x, y, b ^ key1_modified);
                key2.set(x, y, b ^ !key1_modified);
            }
        }
    }
    Ok(SharePair {
        key1,
        key2,
        base: base.clone(),
        secret: secret.clone(),
        seed,
        assignment,
    })
}

/// Pointwise sum of two keys: what one detector sees when identical
/// patterns light both.
pub fn overlay(key1: &BitMatrix, key2: &BitMatrix) -> Result<Image> {
    same_dims(key1, key2)?;
    let (w, h) = key1.dims();
    Image::new(
        w,
        h,
        key1.bits()
            .iter()
            .zip(key2.bits())
            .map(|(&a, &b)| (a + b) as f64)
            .collect(),
    )
}

pub const DEFAULT_TAU: f64 = 0.25;

/// Secret bits from an overlay on the {0, 1, 2} level set: 1 where the
/// value is nearest to level 1. Values outside `[-tau, 2 + tau]` are
/// rejected.
pub fn extract_secret_from_overlay(ov: &Image, tau: f64) -> Result<BitMatrix> {
    if let Some(v) = ov.pixels().iter().find(|&&v| v < -tau || v > 2.0 + tau) {
        return Err(Error::InvalidValue(format!(
            "overlay value {v} outside [{}, {}]",
            -tau,
            2.0 + tau
        )));
    }
    BitMatrix::new(
        ov.width(),
        ov.height(),
        ov.pixels()
            .iter()
            .map(|&v| ((v - 1.0).abs() < 0.5) as u8)
            .collect(),
    )
}

/// Affine map `a * v + b` taking a reconstructed overlay onto the levels
/// {0, 1, 2}: alternate nearest-level labelling and a least-squares fit of
/// the values against the labels until the labels settle. Returns `(a, b)`.
pub fn fit_levels(values: &[f64]) -> Result<(f64, f64)> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::Degenerate("constant reconstruction"));
    }
    let mut a = 2.0 / (hi - lo);
    let mut b = -a * lo;
    let mut labels: Vec<f64> = Vec::new();
    for _ in 0..100 {
        let next: Vec<f64> = values
            .iter()
            .map(|&v| (a * v + b).clamp(0.0, 2.0).round())
            .collect();
        if next == labels {
            break;
        }
        labels = next;
        let n = values.len() as f64;
        let mv = values.iter().sum::<f64>() / n;
        let ml = labels.iter().sum::<f64>() / n;
        // regress values on labels: the noise lives in the values
        let cov: f64 = values
            .iter()
            .zip(&labels)
            .map(|(v, l)| (v - mv) * (l - ml))
            .sum();
        let var: f64 = labels.iter().map(|l| (l - ml).powi(2)).sum();
        if cov <= 0.0 || var == 0.0 {
            break;
        }
        let slope = cov / var;
        a = 1.0 / slope;
        b = ml - a * mv;
    }
    Ok((a, b))
}

/// Rescales a reconstructed overlay onto `[0, 2]` with [`fit_levels`],
/// clamping the result.
pub fn rescale_overlay(recon: &Image) -> Result<Image> {
    let (a, b) = fit_levels(recon.pixels())?;
    Image::new(
        recon.width(),
        recon.height(),
        recon
            .pixels()
            .iter()
            .map(|&v| (a * v + b).clamp(0.0, 2.0))
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    /// Secret modules lying on codeword bits.
    pub codeword_modules: usize,
    /// Modified modules per key expected under random assignment.
    pub per_key_expected: usize,
    /// Largest number of distinct codewords touched in any block.
    pub per_block_worst: usize,
    pub per_block: Vec<usize>,
    pub capacity: Vec<usize>,
    pub ok: bool,
}

/// Worst-case codeword damage a secret inflicts on one key (all
/// modifications landing in that key), per Reed-Solomon block.
pub fn modification_budget(secret: &BitMatrix, symbol: &QrSymbol) -> Result<Budget> {
    same_dims(secret, &symbol.matrix)?;
    let spec = symbol.block_spec();
    let map = module_codewords(symbol.version)?;
    let il = crate::qr::interleave_map(&spec);
    let mut touched = vec![false; spec.total_codewords];
    let mut modules = 0;
    for (i, cw) in map.iter().enumerate() {
        if let (Some(cw), 1) = (cw, secret.bits()[i]) {
            touched[*cw] = true;
            modules += 1;
        }
    }
    let mut per_block = vec![0; spec.blocks];
    for (cw, hit) in touched.iter().enumerate() {
        if *hit {
            per_block[il[cw].0] += 1;
        }
    }
    let capacity = vec![spec.correction_capacity(); spec.blocks];
    let ok = per_block.iter().zip(&capacity).all(|(p, c)| p <= c);
    Ok(Budget {
        codeword_modules: modules,
        per_key_expected: modules.div_ceil(2),
        per_block_worst: per_block.iter().copied().max().unwrap_or(0),
        per_block,
        capacity,
        ok,
    })
}
