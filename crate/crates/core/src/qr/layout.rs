//! Module geometry: function patterns, format information and the zigzag
//! codeword placement order. Grids here use `dark = true`, the QR data
//! convention; conversion to the light-is-one `BitMatrix` happens at the
//! symbol boundary.

use super::EcLevel;

pub fn side(version: u8) -> usize {
    17 + 4 * version as usize
}

/// Centre of the single alignment pattern (versions 2-6), if any.
pub fn alignment_centre(version: u8) -> Option<usize> {
    (version >= 2).then(|| 4 * version as usize + 10)
}

/// Square grid of booleans, indexed `(x, y)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid {
    pub size: usize,
    pub cells: Vec<bool>,
}

impl Grid {
    pub fn new(size: usize) -> Self {
        Self {
            size,
            cells: vec![false; size * size],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.cells[y * self.size + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.cells[y * self.size + x] = v;
    }
}

/// Positions of the 15 format bits, first copy, bit index 0..15.
pub fn format_positions_primary() -> [(usize, usize); 15] {
    let mut p = [(0, 0); 15];
    for (i, slot) in p.iter_mut().enumerate().take(6) {
        *slot = (8, i);
    }
    p[6] = (8, 7);
    p[7] = (8, 8);
    p[8] = (7, 8);
    for (i, slot) in p.iter_mut().enumerate().skip(9) {
        *slot = (14 - i, 8);
    }
    p
}

/// Positions of the 15 format bits, second copy (split between the
/// top-right and bottom-left finders).
pub fn format_positions_secondary(size: usize) -> [(usize, usize); 15] {
    let mut p = [(0, 0); 15];
    for (i, slot) in p.iter_mut().enumerate().take(8) {
        *slot = (size - 1 - i, 8);
    }
    for (i, slot) in p.iter_mut().enumerate().skip(8) {
        *slot = (8, size - 15 + i);
    }
    p
}

/// 15-bit format word: 2 level bits, 3 mask bits, BCH(15,5) remainder,
/// XORed with 0x5412.
pub fn format_bits(level: EcLevel, mask: u8) -> u16 {
    let data = (level.format_bits() << 3 | mask as u16) & 0x1f;
    let mut rem = data;
    for _ in 0..10 {
        rem = (rem << 1) ^ ((rem >> 9) * 0x537);
    }
    ((data << 10) | (rem & 0x3ff)) ^ 0x5412
}

/// Draws every function pattern (finders, separators, timing, alignment,
/// dark module, format area) into `modules` and marks them in the returned
/// function mask. Format bits are drawn for `(level, mask)`.
pub fn draw_function_patterns(version: u8, level: EcLevel, mask: u8) -> (Grid, Grid) {
    let size = side(version);
    let mut modules = Grid::new(size);
    let mut is_fn = Grid::new(size);
    let mut put = |x: usize, y: usize, dark: bool, modules: &mut Grid| {
        modules.set(x, y, dark);
        is_fn.set(x, y, true);
    };

    for i in 0..size {
        put(6, i, i % 2 == 0, &mut modules);
        put(i, 6, i % 2 == 0, &mut modules);
    }

    for (cx, cy) in [(3, 3), (size - 4, 3), (3, size - 4)] {
        for dy in -4i32..=4 {
            for dx in -4i32..=4 {
                let (x, y) = (cx as i32 + dx, cy as i32 + dy);
                if x < 0 || y < 0 || x >= size as i32 || y >= size as i32 {
                    continue;
                }
                let d = dx.abs().max(dy.abs());
                put(x as usize, y as usize, d != 2 && d != 4, &mut modules);
            }
        }
    }

    if let Some(c) = alignment_centre(version) {
        for dy in -2i32..=2 {
            for dx in -2i32..=2 {
                let d = dx.abs().max(dy.abs());
                put(
                    (c as i32 + dx) as usize,
                    (c as i32 + dy) as usize,
                    d != 1,
                    &mut modules,
                );
            }
        }
    }

    let bits = format_bits(level, mask);
    for (i, (x, y)) in format_positions_primary().into_iter().enumerate() {
        put(x, y, (bits >> i) & 1 == 1, &mut modules);
    }
    for (i, (x, y)) in format_positions_secondary(size).into_iter().enumerate() {
        put(x, y, (bits >> i) & 1 == 1, &mut modules);
    }
    put(8, size - 8, true, &mut modules);

    (modules, is_fn)
}

/// Function-module mask for a version (independent of level and mask).
pub fn function_mask(version: u8) -> Grid {
    draw_function_patterns(version, EcLevel::L, 0).1
}

/// All non-function modules in zigzag placement order: two-column strips
/// from the right edge, alternating upward and downward, skipping the
/// vertical timing column.
pub fn placement_order(version: u8) -> Vec<(usize, usize)> {
    let is_fn = function_mask(version);
    let size = is_fn.size;
    let mut order = Vec::new();
    let mut right = size as i32 - 1;
    while right >= 1 {
        if right == 6 {
            right = 5;
        }
        let upward = ((right + 1) & 2) == 0;
        for vert in 0..size {
            for j in 0..2 {
                let x = (right - j) as usize;
                let y = if upward { size - 1 - vert } else { vert };
                if !is_fn.get(x, y) {
                    order.push((x, y));
                }
            }
        }
        right -= 2;
    }
    order
}

/// Data-mask predicate for mask pattern `mask` at column `x`, row `y`.
pub fn mask_applies(mask: u8, x: usize, y: usize) -> bool {
    match mask {
        0 => (x + y) % 2 == 0,
        1 => y % 2 == 0,
        2 => x % 3 == 0,
        3 => (x + y) % 3 == 0,
        4 => (x / 3 + y / 2) % 2 == 0,
        5 => x * y % 2 + x * y % 3 == 0,
        6 => (x * y % 2 + x * y % 3) % 2 == 0,
        7 => ((x + y) % 2 + x * y % 3) % 2 == 0,
        _ => unreachable!("mask id validated by caller"),
    }
}
