pub mod error;
pub mod imaging;
pub mod pipeline;
pub mod pnm;
pub mod qr;
pub mod reconstruct;
pub mod rng;
pub mod threshold;

pub use error::{Error, Result};
pub mod scenes;
pub mod vc_opaque;
pub mod vc_patterns;
