//! Extension of almost-isometries of finite point sets to globally defined
//! ε-distorted diffeomorphisms of `R^D`, with numerical verification.

pub mod alignment;
pub mod cli;
pub mod clustering;
pub mod error;
pub mod extension;
pub mod geometry;
pub mod json;
pub mod serde_util;
pub mod smooth_maps;
pub mod verifier;

pub use error::{Error, Result};
