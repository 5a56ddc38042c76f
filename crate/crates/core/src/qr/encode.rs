use super::layout::{self, Grid};
use super::{block_spec, check_version, interleave_map, CodewordBlock, EcLevel, QrSymbol};
use crate::error::{Error, Result};
use crate::imaging::BitMatrix;

struct BitBuffer(Vec<bool>);

impl BitBuffer {
    fn push(&mut self, value: u32, len: usize) {
        for i in (0..len).rev() {
            self.0.push((value >> i) & 1 == 1);
        }
    }
}

/// Byte-mode data codewords: mode, count, payload, terminator, padding.
fn data_codewords(message: &[u8], capacity_cw: usize) -> Vec<u8> {
    let mut bb = BitBuffer(Vec::with_capacity(capacity_cw * 8));
    bb.push(0b0100, 4);
    bb.push(message.len() as u32, 8);
    for &b in message {
        bb.push(b as u32, 8);
    }
    let cap_bits = capacity_cw * 8;
    let term = (cap_bits - bb.0.len()).min(4);
    bb.push(0, term);
    let pad = (8 - bb.0.len() % 8) % 8;
    bb.push(0, pad);
    let mut bytes: Vec<u8> =
        bb.0.chunks(8)
            .map(|c| c.iter().fold(0u8, |acc, &b| acc << 1 | b as u8))
            .collect();
    let mut filler = [0xec, 0x11].into_iter().cycle();
    while bytes.len() < capacity_cw {
        bytes.push(filler.next().unwrap());
    }
    bytes
}

fn penalty(g: &Grid) -> u32 {
    let n = g.size;
    let mut score = 0u32;

    // runs of five or more and finder-like 1:1:3:1:1 sequences
    let line = |i: usize, j: usize, horizontal: bool| {
        if horizontal {
            g.get(j, i)
        } else {
            g.get(i, j)
        }
    };
    const FINDER_A: [bool; 11] = [
        true, false, true, true, true, false, true, false, false, false, false,
    ];
    const FINDER_B: [bool; 11] = [
        false, false, false, false, true, false, true, true, true, false, true,
    ];
    for horizontal in [true, false] {
        for i in 0..n {
            let mut run = 1;
            for j in 1..n {
                if line(i, j, horizontal) == line(i, j - 1, horizontal) {
                    run += 1;
                } else {
                    if run >= 5 {
                        score += 3 + (run - 5);
                    }
                    run = 1;
                }
            }
            if run >= 5 {
                score += 3 + (run - 5);
            }
            for j in 0..n.saturating_sub(10) {
                let w: Vec<bool> = (j..j + 11).map(|k| line(i, k, horizontal)).collect();
                if w == FINDER_A || w == FINDER_B {
                    score += 40;
                }
            }
        }
    }

    for y in 0..n - 1 {
        for x in 0..n - 1 {
            let c = g.get(x, y);
            if c == g.get(x + 1, y) && c == g.get(x, y + 1) && c == g.get(x + 1, y + 1) {
                score += 3;
            }
        }
    }

    let total = (n * n) as i64;
    let dark = g.cells.iter().filter(|&&d| d).count() as i64;
    let k = ((dark * 20 - total * 10).abs() + total - 1) / total - 1;
    score += 10 * k.max(0) as u32;
    score
}

/// Encodes `message` in byte mode. With `mask_id = None` the mask with the
/// lowest penalty score is chosen (lowest id on ties).
pub fn qr_encode(
    message: &[u8],
    version: u8,
    ec_level: EcLevel,
    mask_id: Option<u8>,
) -> Result<QrSymbol> {
    check_version(version)?;
    if let Some(m) = mask_id {
        if m > 7 {
            return Err(Error::UnsupportedQr(format!("mask {m}")));
        }
    }
    let spec = block_spec(version, ec_level)?;
    if message.len() > spec.byte_capacity() {
        return Err(Error::CapacityExceeded {
            len: message.len(),
            capacity: spec.byte_capacity(),
            version,
            level: ec_level.as_char(),
        });
    }

    let data = data_codewords(message, spec.data_codewords());
    let blocks: Vec<CodewordBlock> = data
        .chunks(spec.data_per_block)
        .map(|c| CodewordBlock::encode(c.to_vec(), spec.ec_per_block))
        .collect();
    let stream: Vec<u8> = interleave_map(&spec)
        .into_iter()
        .map(|(b, i)| {
            let blk = &blocks[b];
            if i < blk.data_codewords.len() {
                blk.data_codewords[i]
            } else {
                blk.ec_codewords[i - blk.data_codewords.len()]
            }
        })
        .collect();

    let order = layout::placement_order(version);
    let build = |mask: u8| -> Grid {
        let (mut grid, _) = layout::draw_function_patterns(version, ec_level, mask);
        for (i, &(x, y)) in order.iter().enumerate() {
            let bit = stream
                .get(i / 8)
                .map(|&cw| (cw >> (7 - i % 8)) & 1 == 1)
                .unwrap_or(false);
            grid.set(x, y, bit ^ layout::mask_applies(mask, x, y));
        }
        grid
    };

    let (mask, grid) = match mask_id {
        Some(m) => (m, build(m)),
        None => (0..8u8)
            .map(|m| (m, build(m)))
            .min_by_key(|(m, g)| (penalty(g), *m))
            .expect("eight candidate masks"),
    };

    let size = grid.size;
    let matrix = BitMatrix::from_fn(size, size, |x, y| !grid.get(x, y))?;
    Ok(QrSymbol {
        version,
        ec_level,
        mask_id: mask,
        matrix,
    })
}
