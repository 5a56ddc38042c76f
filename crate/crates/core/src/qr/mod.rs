//! QR Model 2 symbols, byte mode, versions 1-4.
//!
//! The encoder produces standard symbols; the decoder reads grid-registered
//! matrices (one entry per module, no localization). In the [`BitMatrix`]
//! form a module bit of 1 is light and 0 is dark, the opposite of the
//! QR data convention.

mod decode;
mod encode;
pub mod gf256;
pub mod layout;
pub mod rs;
pub mod tables;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::BitMatrix;

pub use decode::{qr_decode, qr_decode_gray, Decoded};
pub use encode::qr_encode;
pub use rs::rs_ec;
pub use tables::{block_spec, BlockSpec};

pub const MIN_VERSION: u8 = 1;
pub const MAX_VERSION: u8 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EcLevel {
    L,
    M,
    Q,
    H,
}

impl EcLevel {
    pub const ALL: [EcLevel; 4] = [EcLevel::L, EcLevel::M, EcLevel::Q, EcLevel::H];

    pub(crate) fn format_bits(self) -> u16 {
        match self {
            EcLevel::L => 1,
            EcLevel::M => 0,
            EcLevel::Q => 3,
            EcLevel::H => 2,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            EcLevel::L => 'L',
            EcLevel::M => 'M',
            EcLevel::Q => 'Q',
            EcLevel::H => 'H',
        }
    }
}

impl std::str::FromStr for EcLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "L" => Ok(EcLevel::L),
            "M" => Ok(EcLevel::M),
            "Q" => Ok(EcLevel::Q),
            "H" => Ok(EcLevel::H),
            _ => Err(Error::UnsupportedQr(format!(
                "error-correction level {s:?}"
            ))),
        }
    }
}

impl std::fmt::Display for EcLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

pub(crate) fn check_version(version: u8) -> Result<()> {
    if (MIN_VERSION..=MAX_VERSION).contains(&version) {
        Ok(())
    } else {
        Err(Error::UnsupportedQr(format!("version {version}")))
    }
}

pub fn version_for_side(side: usize) -> Result<u8> {
    if side < 21 || (side - 17) % 4 != 0 {
        return Err(Error::UnsupportedQr(format!("side {side}")));
    }
    let v = ((side - 17) / 4) as u8;
    check_version(v)?;
    Ok(v)
}

/// One Reed-Solomon block: data codewords followed by EC codewords.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodewordBlock {
    pub data_codewords: Vec<u8>,
    pub ec_codewords: Vec<u8>,
}

impl CodewordBlock {
    pub fn encode(data: Vec<u8>, ec_len: usize) -> Self {
        let ec_codewords = rs_ec(&data, ec_len);
        Self {
            data_codewords: data,
            ec_codewords,
        }
    }

    pub fn correction_capacity(&self) -> usize {
        self.ec_codewords.len() / 2
    }
}

/// Interleaved codeword index -> (block, index within block). Data
/// codewords of all blocks come first, then EC codewords.
pub fn interleave_map(spec: &BlockSpec) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(spec.total_codewords);
    for i in 0..spec.data_per_block {
        for b in 0..spec.blocks {
            out.push((b, i));
        }
    }
    for i in 0..spec.ec_per_block {
        for b in 0..spec.blocks {
            out.push((b, spec.data_per_block + i));
        }
    }
    out
}

/// For every module, the interleaved codeword index it carries a bit of;
/// `None` for function and remainder modules. Row-major.
pub fn module_codewords(version: u8) -> Result<Vec<Option<usize>>> {
    check_version(version)?;
    let size = layout::side(version);
    let total = block_spec(version, EcLevel::L)?.total_codewords;
    let mut out = vec![None; size * size];
    for (i, (x, y)) in layout::placement_order(version).into_iter().enumerate() {
        if i / 8 < total {
            out[y * size + x] = Some(i / 8);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QrSymbol {
    pub version: u8,
    pub ec_level: EcLevel,
    pub mask_id: u8,
    pub matrix: BitMatrix,
}

impl QrSymbol {
    pub fn side(&self) -> usize {
        layout::side(self.version)
    }

    pub fn block_spec(&self) -> BlockSpec {
        block_spec(self.version, self.ec_level).expect("symbol built from a valid spec")
    }
}
