//! Block structure tables, loaded from `data/qr_ec_blocks.csv`.

use std::sync::OnceLock;

use super::EcLevel;
use crate::error::{Error, Result};

const CSV: &str = include_str!("../../data/qr_ec_blocks.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockSpec {
    pub version: u8,
    pub level: EcLevel,
    pub total_codewords: usize,
    pub ec_per_block: usize,
    pub blocks: usize,
    pub data_per_block: usize,
}

impl BlockSpec {
    pub fn data_codewords(&self) -> usize {
        self.blocks * self.data_per_block
    }

    pub fn correction_capacity(&self) -> usize {
        self.ec_per_block / 2
    }

    /// Largest byte-mode payload.
    pub fn byte_capacity(&self) -> usize {
        self.data_codewords() - 2
    }
}

fn parse() -> Vec<BlockSpec> {
    let mut out = Vec::new();
    for line in CSV.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with("version") {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let num = |i: usize| {
            f[i].parse::<usize>()
                .expect("numeric field in qr_ec_blocks.csv")
        };
        let level = match f[1] {
            "L" => EcLevel::L,
            "M" => EcLevel::M,
            "Q" => EcLevel::Q,
            "H" => EcLevel::H,
            other => panic!("bad level {other} in qr_ec_blocks.csv"),
        };
        let spec = BlockSpec {
            version: num(0) as u8,
            level,
            total_codewords: num(2),
            ec_per_block: num(3),
            blocks: num(4),
            data_per_block: num(5),
        };
        assert_eq!(
            spec.blocks * (spec.data_per_block + spec.ec_per_block),
            spec.total_codewords,
            "inconsistent row in qr_ec_blocks.csv: {line}"
        );
        out.push(spec);
    }
    out
}

fn table() -> &'static [BlockSpec] {
    static TABLE: OnceLock<Vec<BlockSpec>> = OnceLock::new();
    TABLE.get_or_init(parse)
}

pub fn block_spec(version: u8, level: EcLevel) -> Result<BlockSpec> {
    table()
        .iter()
        .find(|s| s.version == version && s.level == level)
        .copied()
        .ok_or_else(|| Error::UnsupportedQr(format!("version {version}")))
}
