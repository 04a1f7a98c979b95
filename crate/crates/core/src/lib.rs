//! Numerical laboratory for area-preserving diffeomorphisms of the closed unit
//! disk and the Reeb flows on the three-sphere obtained from them by suspension.
//!
//! The crate is `no_std` (it needs `alloc`). Points of the plane are complex
//! numbers; angles on the strip `[0,1] x R` are kept unwrapped.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod calabi;
pub mod diskforms;
pub mod error;
pub mod hamflow;
pub mod maximizer;
pub mod mobius;
pub mod poly;
pub mod quad;
pub mod reebsys;
pub mod striplift;

pub use error::{Error, Result};

/// A point (or tangent vector) of the plane.
pub type C = num_complex::Complex64;

/// Full turn.
pub const TAU: f64 = core::f64::consts::TAU;
pub const PI: f64 = core::f64::consts::PI;
