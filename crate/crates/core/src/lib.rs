pub mod error;
pub mod fem_core;
pub mod geometry;
pub mod harness;
pub mod hp_interp;
pub mod layer_oracles;
pub mod macro_mesh;
pub mod patch_catalog;

pub use error::{Error, Result};
