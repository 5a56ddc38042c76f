//! Netpbm readers and writers for [`BitMatrix`] (PBM, P1/P4) and [`Image`]
//! (PGM, P2/P5), plus full-precision JSON sidecars.
//!
//! PBM stores 1 for black. A `BitMatrix` bit of 1 means white/light, so bits
//! are inverted on the way in and out.
//!
//! PGM output uses maxval 255 and linear quantization against a peak value:
//! `q = round(255 * clamp(v / peak, 0, 1))` with `peak = max(v)` (or 1 when
//! the image is all zero). Reading returns `q / maxval`. Metrics should use
//! the JSON sidecar, which stores the exact doubles.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{BitMatrix, Image};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    Ascii,
    Binary,
}

pub fn write_pbm(m: &BitMatrix, enc: Encoding) -> Vec<u8> {
    let (w, h) = m.dims();
    match enc {
        Encoding::Ascii => {
            let mut s = format!("P1\n{w} {h}\n");
            for y in 0..h {
                let row: Vec<&str> = (0..w)
                    .map(|x| if m.get(x, y) == 1 { "0" } else { "1" })
                    .collect();
                s.push_str(&row.join(" "));
                s.push('\n');
            }
            s.into_bytes()
        }
        Encoding::Binary => {
            let mut out = format!("P4\n{w} {h}\n").into_bytes();
            let stride = w.div_ceil(8);
            for y in 0..h {
                let mut row = vec![0u8; stride];
                for x in 0..w {
                    if m.get(x, y) == 0 {
                        row[x / 8] |= 0x80 >> (x % 8);
                    }
                }
                out.extend_from_slice(&row);
            }
            out
        }
    }
}

/// Peak used to quantize `img` for display.
pub fn quantization_peak(img: &Image) -> f64 {
    let m = img.max();
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

pub fn quantize(v: f64, peak: f64) -> u8 {
    (255.0 * (v / peak).clamp(0.0, 1.0)).round() as u8
}

pub fn write_pgm(img: &Image, enc: Encoding) -> Vec<u8> {
    let (w, h) = img.dims();
    let peak = quantization_peak(img);
    match enc {
        Encoding::Ascii => {
            let mut s = format!("P2\n{w} {h}\n255\n");
            for y in 0..h {
                let row: Vec<String> = (0..w)
                    .map(|x| quantize(img.get(x, y), peak).to_string())
                    .collect();
                s.push_str(&row.join(" "));
                s.push('\n');
            }
            s.into_bytes()
        }
        Encoding::Binary => {
            let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
            out.extend(img.pixels().iter().map(|&v| quantize(v, peak)));
            out
        }
    }
}

struct Header<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Header<'a> {
    fn skip_ws_and_comments(&mut self) {
        while self.pos < self.data.len() {
            let c = self.data[self.pos];
            if c == b'#' {
                while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8]> {
        self.skip_ws_and_comments();
        let start = self.pos;
        while self.pos < self.data.len() && !self.data[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Parse("unexpected end of netpbm data".into()));
        }
        Ok(&self.data[start..self.pos])
    }

    fn number(&mut self) -> Result<usize> {
        let t = self.token()?;
        std::str::from_utf8(t)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Parse(format!("bad number {:?}", String::from_utf8_lossy(t))))
    }

    /// Consumes the single whitespace byte separating header from raster.
    fn raster(mut self) -> Result<&'a [u8]> {
        if self.pos >= self.data.len() || !self.data[self.pos].is_ascii_whitespace() {
            return Err(Error::Parse("missing raster separator".into()));
        }
        self.pos += 1;
        Ok(&self.data[self.pos..])
    }
}

pub fn read_pbm(data: &[u8]) -> Result<BitMatrix> {
    let mut hdr = Header { data, pos: 0 };
    let magic = hdr.token()?;
    let w = hdr.number()?;
    let h = hdr.number()?;
    match magic {
        b"P1" => {
            let mut bits = Vec::with_capacity(w * h);
            while bits.len() < w * h {
                hdr.skip_ws_and_comments();
                match data.get(hdr.pos) {
                    Some(b'0') => bits.push(1),
                    Some(b'1') => bits.push(0),
                    Some(c) => return Err(Error::Parse(format!("bad P1 byte {c}"))),
                    None => return Err(Error::Parse("truncated P1 raster".into())),
                }
                hdr.pos += 1;
            }
            BitMatrix::new(w, h, bits)
        }
        b"P4" => {
            let raster = hdr.raster()?;
            let stride = w.div_ceil(8);
            if raster.len() < stride * h {
                return Err(Error::Parse("truncated P4 raster".into()));
            }
            BitMatrix::from_fn(w, h, |x, y| {
                raster[y * stride + x / 8] & (0x80 >> (x % 8)) == 0
            })
        }
        other => Err(Error::Parse(format!(
            "not a PBM file (magic {:?})",
            String::from_utf8_lossy(other)
        ))),
    }
}

pub fn read_pgm(data: &[u8]) -> Result<Image> {
    let mut hdr = Header { data, pos: 0 };
    let magic = hdr.token()?;
    let w = hdr.number()?;
    let h = hdr.number()?;
    let maxval = hdr.number()?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Parse(format!("bad maxval {maxval}")));
    }
    let scale = 1.0 / maxval as f64;
    let samples: Vec<usize> = match magic {
        b"P2" => (0..w * h).map(|_| hdr.number()).collect::<Result<_>>()?,
        b"P5" => {
            let raster = hdr.raster()?;
            let bps = if maxval < 256 { 1 } else { 2 };
            if raster.len() < w * h * bps {
                return Err(Error::Parse("truncated P5 raster".into()));
            }
            (0..w * h)
                .map(|i| {
                    if bps == 1 {
                        raster[i] as usize
                    } else {
                        ((raster[2 * i] as usize) << 8) | raster[2 * i + 1] as usize
                    }
                })
                .collect()
        }
        other => {
            return Err(Error::Parse(format!(
                "not a PGM file (magic {:?})",
                String::from_utf8_lossy(other)
            )))
        }
    };
    if let Some(s) = samples.iter().find(|&&s| s > maxval) {
        return Err(Error::Parse(format!("sample {s} exceeds maxval {maxval}")));
    }
    Image::new(
        w,
        h,
        samples.into_iter().map(|s| s as f64 * scale).collect(),
    )
}

/// Full-precision image sidecar: `{"width":W,"height":H,"pixels":[...]}`.
#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

pub fn image_to_json(img: &Image) -> Result<String> {
    Ok(serde_json::to_string(&Sidecar {
        width: img.width(),
        height: img.height(),
        pixels: img.pixels().to_vec(),
    })?)
}

pub fn image_from_json(s: &str) -> Result<Image> {
    let sc: Sidecar = serde_json::from_str(s)?;
    Image::new(sc.width, sc.height, sc.pixels)
}

pub fn save_pbm(path: impl AsRef<Path>, m: &BitMatrix) -> Result<()> {
    fs::write(path, write_pbm(m, Encoding::Ascii))?;
    Ok(())
}

pub fn load_pbm(path: impl AsRef<Path>) -> Result<BitMatrix> {
    read_pbm(&fs::read(path)?)
}

/// Writes `path` as binary PGM and `path` with extension `.json` as the
/// sidecar.
pub fn save_image(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, write_pgm(img, Encoding::Binary))?;
    fs::write(path.with_extension("json"), image_to_json(img)?)?;
    Ok(())
}

/// Loads an image from `.json` (exact), `.pbm` (0/1) or any PGM. A PGM with
/// a sibling `.json` sidecar is read from the sidecar.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => image_from_json(&fs::read_to_string(path)?),
        Some("pbm") => Ok(Image::from(&load_pbm(path)?)),
        _ => {
            let side = path.with_extension("json");
            if side.exists() {
                image_from_json(&fs::read_to_string(side)?)
            } else {
                read_pgm(&fs::read(path)?)
            }
        }
    }
}
