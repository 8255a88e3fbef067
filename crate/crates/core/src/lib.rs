//! Normalized pluriclosed flow on Inoue surfaces of type `S_M`.
//!
//! The surface is built from a matrix `M ∈ SL(3, ℤ)` ([`construct`]), the
//! closed-form model geometry lives in [`modelgeom`], the reduced scalar
//! potential flow is integrated by [`solver`], and [`diagnostics`] turns a
//! trajectory into estimate checks.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod construct;
pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod modelgeom;
pub mod run;
pub mod solver;
pub mod verify;

pub use error::{Block, Error, Result};
