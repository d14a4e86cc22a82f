//! Finite element kernels built around dimension-generic polytopes.
//!
//! The crate is organised bottom-up:
//!
//! * [`polytope`] encodes cell topologies with extrusion bitmaps and enumerates
//!   their n-faces and Lagrangian node sets.
//! * [`polynomial`] provides 1D Lagrange/monomial bases and their
//!   multi-dimensional tensor and truncated spaces.
//! * [`reference_fe`] builds reference elements (Lagrangian, Raviart-Thomas,
//!   void) together with their quadratures.
//! * [`triangulation`] stores static conforming meshes.
//! * [`integration`] maps reference data to physical cells and facets.
//! * [`fe_space`] numbers global DOFs and manages FE functions.
//! * [`linalg`] holds sparse storage, assemblers, the affine operator and solvers.
//! * [`drivers`] implements Poisson (CG and SIPG) and Stokes examples.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod drivers;
pub mod error;
pub mod fe_space;
pub mod integration;
pub mod linalg;
pub mod polynomial;
pub mod polytope;
pub mod reference_fe;
pub mod triangulation;

pub mod cli;

pub use error::{Error, Result};

/// Spatial dimension bound used by fixed-capacity geometric values.
pub const SPACE_DIM: usize = 3;

/// A point (or vector) in physical space; unused trailing entries are zero.
pub type Point = [f64; SPACE_DIM];
