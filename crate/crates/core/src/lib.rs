//! Numerical laboratory for the curvature of higher direct images
//! `R^{n-p} f_* Ω^p_{X/S}(L)` on families of flat polarized tori.
//!
//! Fibers are `ℝ²/ℤ²` (or a product of two such) with complex coordinate
//! `z = x + τ y`. The line bundle of degree `d` carries the weight
//! `log h = -2π d (Im z)² / Im τ` and is discretized with unitary link
//! phases in Landau gauge.

// `!(x > 0.0)` is the NaN-rejecting comparison; index loops mirror the math
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod config;
pub mod curvature;
pub mod dolbeault;
pub mod error;
pub mod family;
pub mod fiber_geometry;
pub mod forms;
pub mod lattice;
pub mod line_bundle;
pub mod oracles;
pub mod report;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
