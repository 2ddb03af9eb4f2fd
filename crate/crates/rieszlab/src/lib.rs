//! Executable diagnostics for the geometry of singular integrals on discrete
//! measures in `R^(d+1)`: truncated, restricted and reflected Riesz
//! transforms, David-Semmes lattices, flatness and non-BAUP tests, and
//! Carleson packing measurements, all at desk scale and verified against
//! independent oracles.

pub mod error;
pub mod geometry;
pub mod measure;
pub mod riesz;
pub mod spatial;
pub mod util;

pub mod baup;
pub mod carleson;
pub mod flatness;
pub mod lattice;

pub use error::{Error, Result};
