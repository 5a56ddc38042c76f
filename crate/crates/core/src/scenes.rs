//! Synthetic test scenes: the "OK" secret glyph and smooth grayscale
//! objects standing in for photographs.
//!
//! Grayscale objects are quantized to 8 bits and normalized to `[0, 1]`
//! (`k / 255`), mimicking a printed 8-bit image.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{BitMatrix, Image};
use crate::rng::{domain, Stream};

const GLYPH_O: [&str; 7] = [
    ".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###.",
];
const GLYPH_K: [&str; 7] = [
    "#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#",
];

/// "OK" in a 5x7 font, each font pixel drawn as a `scale`x`scale` block,
/// one font column of spacing between letters, centred in the raster.
pub fn ok_glyph(width: usize, height: usize, scale: usize) -> Result<BitMatrix> {
    let scale = scale.max(1);
    let gw = 11 * scale;
    let gh = 7 * scale;
    if gw > width || gh > height {
        return Err(Error::InvalidDimensions(format!(
            "OK glyph at scale {scale} needs {gw}x{gh}, raster is {width}x{height}"
        )));
    }
    let ox = (width - gw) / 2;
    let oy = (height - gh) / 2;
    BitMatrix::from_fn(width, height, |x, y| {
        if x < ox || y < oy || x >= ox + gw || y >= oy + gh {
            return false;
        }
        let fx = (x - ox) / scale;
        let fy = (y - oy) / scale;
        let row = match fx {
            0..=4 => GLYPH_O[fy].as_bytes()[fx],
            5 => b'.',
            _ => GLYPH_K[fy].as_bytes()[fx - 6],
        };
        row == b'#'
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectKind {
    /// Overlapping smooth rounded blobs on a shaded backdrop.
    Pepper,
    /// Flat discs and bars on a linear gradient.
    Shapes,
    Zero,
}

fn quantize8(values: Vec<f64>) -> Vec<f64> {
    values
        .into_iter()
        .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() / 255.0)
        .collect()
}

pub fn object(kind: ObjectKind, width: usize, height: usize, seed: u64) -> Result<Image> {
    match kind {
        ObjectKind::Pepper => pepper_like(width, height, seed),
        ObjectKind::Shapes => shapes(width, height, seed),
        ObjectKind::Zero => Image::zeros(width, height),
    }
}

pub fn pepper_like(width: usize, height: usize, seed: u64) -> Result<Image> {
    let mut s = Stream::new(seed, domain::SCENE);
    let (w, h) = (width as f64, height as f64);
    let blobs: Vec<[f64; 6]> = (0..6)
        .map(|_| {
            [
                s.range(0.1, 0.9) * w,
                s.range(0.1, 0.9) * h,
                s.range(0.15, 0.35) * w,
                s.range(0.15, 0.35) * h,
                s.range(-0.35, 0.55),
                s.range(0.0, std::f64::consts::PI),
            ]
        })
        .collect();
    let tilt = s.range(-0.15, 0.15);
    let mut px = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
            let mut v = 0.35 + tilt * (fx / w - 0.5);
            for &[cx, cy, rx, ry, amp, rot] in &blobs {
                let (dx, dy) = (fx - cx, fy - cy);
                let (c, sn) = (rot.cos(), rot.sin());
                let u = (c * dx + sn * dy) / rx;
                let t = (-sn * dx + c * dy) / ry;
                let r2 = u * u + t * t;
                // smooth-edged plateau
                v += amp / (1.0 + (4.0 * (r2 - 1.0)).exp());
            }
            px.push(v.clamp(0.08, 1.0));
        }
    }
    Image::new(width, height, quantize8(px))
}

pub fn shapes(width: usize, height: usize, seed: u64) -> Result<Image> {
    let mut s = Stream::new(seed ^ 0x5348_4150, domain::SCENE);
    let (w, h) = (width as f64, height as f64);
    let discs: Vec<[f64; 4]> = (0..4)
        .map(|_| {
            [
                s.range(0.2, 0.8) * w,
                s.range(0.2, 0.8) * h,
                s.range(0.08, 0.2) * w,
                s.range(0.5, 1.0),
            ]
        })
        .collect();
    let bar_y = s.range(0.3, 0.7) * h;
    let mut px = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
            let mut v = 0.2 + 0.3 * fx / w;
            if (fy - bar_y).abs() < 0.06 * h {
                v = 0.75;
            }
            for &[cx, cy, r, level] in &discs {
                if (fx - cx).hypot(fy - cy) < r {
                    v = level;
                }
            }
            px.push(v);
        }
    }
    Image::new(width, height, quantize8(px))
}
