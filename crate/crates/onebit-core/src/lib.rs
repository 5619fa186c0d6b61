//! Sparse signal recovery from one-bit (sign-only) measurements.
//!
//! Observations follow `b = zeta .* sgn(phi * x_true + eps)`: linear
//! measurements quantized to a single sign bit, with additive noise and a
//! fraction of adversarially flipped bits. Scale is lost in quantization, so
//! recovery is posed on the unit sphere. This crate implements
//!
//! * a capped one-sided loss that charges flipped measurements a flat
//!   penalty instead of an unbounded one, together with its smooth
//!   approximation ([`model`]),
//! * zero-norm regularization and its SCAD/MCP surrogate penalties built
//!   from conjugate functions ([`model`]),
//! * exact closed-form proximal mappings on the unit sphere for both the
//!   zero-norm and the l1 composite terms ([`prox`]),
//! * proximal gradient solvers with Nesterov-style extrapolation for the
//!   two resulting nonconvex programs ([`solver`]), and
//! * seeded synthetic problem generation, recovery metrics, and on-disk
//!   problem bundles ([`data`]).
//!
//! With the default `parallel` feature, large matrix-vector kernels and
//! batch workloads use rayon; disabling the feature yields a sequential
//! build with identical numerical results.

pub mod data;
mod error;
mod linalg;
pub mod model;
pub mod prox;
pub mod solver;

pub use error::{Error, Result};
