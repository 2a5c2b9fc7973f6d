//! Magnetic Weyl quantization on finite position grids.

pub mod coherent;
pub mod error;
pub mod geometry;
pub mod hilbert;
pub mod linalg;
pub mod moyal;
pub mod quad;
pub mod quantize;
pub mod symbol;

pub use error::{Error, Result};
