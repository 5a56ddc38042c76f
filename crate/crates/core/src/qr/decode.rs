use serde::{Deserialize, Serialize};

use super::layout::{self, Grid};
use super::rs::rs_correct;
use super::{block_spec, interleave_map, version_for_side, EcLevel};
use crate::error::{Error, Result};
use crate::imaging::{BitMatrix, Image};
use crate::threshold::{threshold, ThresholdPolicy};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decoded {
    pub message: Vec<u8>,
    pub corrected_errors: usize,
    pub version: u8,
    pub ec_level: EcLevel,
    pub mask_id: u8,
}

impl Decoded {
    pub fn text(&self) -> String {
        String::from_utf8_lossy(&self.message).into_owned()
    }
}

/// Nearest valid format word to either copy, if within 3 bit errors.
fn read_format(grid: &Grid) -> Result<(EcLevel, u8)> {
    let read = |pos: [(usize, usize); 15]| {
        pos.iter()
            .enumerate()
            .fold(0u16, |acc, (i, &(x, y))| acc | (grid.get(x, y) as u16) << i)
    };
    let copies = [
        read(layout::format_positions_primary()),
        read(layout::format_positions_secondary(grid.size)),
    ];
    let mut best: Option<(u32, EcLevel, u8)> = None;
    for level in EcLevel::ALL {
        for mask in 0..8u8 {
            let word = layout::format_bits(level, mask);
            for c in copies {
                let d = (word ^ c).count_ones();
                if best.is_none_or(|(bd, _, _)| d < bd) {
                    best = Some((d, level, mask));
                }
            }
        }
    }
    match best {
        Some((d, level, mask)) if d <= 3 => Ok((level, mask)),
        _ => Err(Error::FormatInfo),
    }
}

fn parse_segments(data: &[u8]) -> Result<Vec<u8>> {
    let total_bits = data.len() * 8;
    let bit = |i: usize| (data[i / 8] >> (7 - i % 8)) & 1;
    let read = |pos: &mut usize, len: usize| -> Option<u32> {
        if *pos + len > total_bits {
            return None;
        }
        let v = (0..len).fold(0u32, |acc, k| acc << 1 | bit(*pos + k) as u32);
        *pos += len;
        Some(v)
    };
    let mut pos = 0;
    let mut out = Vec::new();
    // a truncated terminator at the end of the stream is allowed
    while let Some(mode) = read(&mut pos, 4) {
        match mode {
            0b0000 => break,
            0b0100 => {
                let count = read(&mut pos, 8)
                    .ok_or_else(|| Error::MalformedSegment("truncated count".into()))?;
                for _ in 0..count {
                    let b = read(&mut pos, 8)
                        .ok_or_else(|| Error::MalformedSegment("payload past end".into()))?;
                    out.push(b as u8);
                }
            }
            other => {
                return Err(Error::MalformedSegment(format!(
                    "unsupported mode {other:04b}"
                )))
            }
        }
    }
    Ok(out)
}

/// Decodes a grid-registered symbol (bit 1 = light).
pub fn qr_decode(matrix: &BitMatrix) -> Result<Decoded> {
    let (w, h) = matrix.dims();
    if w != h {
        return Err(Error::UnsupportedQr(format!("non-square {w}x{h}")));
    }
    let version = version_for_side(w)?;
    let mut grid = Grid::new(w);
    for y in 0..w {
        for x in 0..w {
            grid.set(x, y, matrix.get(x, y) == 0);
        }
    }
    let (ec_level, mask_id) = read_format(&grid)?;
    let spec = block_spec(version, ec_level)?;

    let mut stream = vec![0u8; spec.total_codewords];
    for (i, (x, y)) in layout::placement_order(version).into_iter().enumerate() {
        if i / 8 >= spec.total_codewords {
            break;
        }
        let bit = grid.get(x, y) ^ layout::mask_applies(mask_id, x, y);
        stream[i / 8] |= (bit as u8) << (7 - i % 8);
    }

    let block_len = spec.data_per_block + spec.ec_per_block;
    let mut blocks = vec![vec![0u8; block_len]; spec.blocks];
    for (k, (b, i)) in interleave_map(&spec).into_iter().enumerate() {
        blocks[b][i] = stream[k];
    }

    let mut corrected = 0;
    let mut data = Vec::with_capacity(spec.data_codewords());
    for (b, block) in blocks.iter_mut().enumerate() {
        corrected +=
            rs_correct(block, spec.ec_per_block).map_err(|_| Error::Uncorrectable { block: b })?;
        data.extend_from_slice(&block[..spec.data_per_block]);
    }

    Ok(Decoded {
        message: parse_segments(&data)?,
        corrected_errors: corrected,
        version,
        ec_level,
        mask_id,
    })
}

/// Thresholds a grayscale, module-aligned image (bright = light) and
/// decodes it. Values at or below the threshold are dark.
pub fn qr_decode_gray(image: &Image, policy: ThresholdPolicy) -> Result<Decoded> {
    let t = threshold(image.pixels(), policy)?;
    let m = BitMatrix::new(
        image.width(),
        image.height(),
        image.pixels().iter().map(|&v| (v > t) as u8).collect(),
    )?;
    qr_decode(&m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qr::qr_encode;

    #[test]
    fn empty_message_roundtrip() {
        let sym = qr_encode(b"", 1, EcLevel::L, None).unwrap();
        let d = qr_decode(&sym.matrix).unwrap();
        assert!(d.message.is_empty());
        assert_eq!(d.corrected_errors, 0);
    }

    #[test]
    fn v4h_message_roundtrip() {
        let msg = b"Nanophotonics Research Center";
        let sym = qr_encode(msg, 4, EcLevel::H, None).unwrap();
        let d = qr_decode(&sym.matrix).unwrap();
        assert_eq!(d.message, msg);
        assert_eq!(
            (d.version, d.ec_level, d.mask_id),
            (4, EcLevel::H, sym.mask_id)
        );
    }

    #[test]
    fn segment_parser_errors() {
        assert!(matches!(
            parse_segments(&[0x10, 0x00]),
            Err(Error::MalformedSegment(_))
        ));
        assert!(matches!(
            parse_segments(&[0x40, 0x50, 0x00]),
            Err(Error::MalformedSegment(_))
        ));
        assert_eq!(parse_segments(&[0x40, 0x14, 0x10, 0x00]).unwrap(), b"A");
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(qr_decode(&BitMatrix::zeros(21, 22).unwrap()).is_err());
        assert!(qr_decode(&BitMatrix::zeros(37, 37).unwrap()).is_err());
        assert!(qr_decode(&BitMatrix::zeros(20, 20).unwrap()).is_err());
    }

    #[test]
    fn unreadable_format() {
        let mut m = qr_encode(b"fmt", 1, EcLevel::M, Some(2)).unwrap().matrix;
        let side = m.width();
        let far = (0u16..1 << 15)
            .find(|&w| {
                EcLevel::ALL
                    .iter()
                    .all(|&l| (0..8).all(|k| (layout::format_bits(l, k) ^ w).count_ones() > 3))
            })
            .unwrap();
        for pos in [
            layout::format_positions_primary(),
            layout::format_positions_secondary(side),
        ] {
            for (i, (x, y)) in pos.into_iter().enumerate() {
                // dark is bit 0 in the matrix
                m.set(x, y, (far >> i) & 1 == 0);
            }
        }
        assert_eq!(qr_decode(&m), Err(Error::FormatInfo));
    }

    #[test]
    fn gray_decode_equals_binary_decode() {
        let sym = qr_encode(b"gray", 2, EcLevel::Q, None).unwrap();
        let img = Image::from(&sym.matrix);
        for policy in [ThresholdPolicy::Otsu, ThresholdPolicy::Midpoint] {
            assert_eq!(
                qr_decode_gray(&img, policy).unwrap(),
                qr_decode(&sym.matrix).unwrap()
            );
        }
        let flat = Image::new(21, 21, vec![0.5; 441]).unwrap();
        assert!(matches!(
            qr_decode_gray(&flat, ThresholdPolicy::Otsu),
            Err(Error::Degenerate(_))
        ));
    }
}
