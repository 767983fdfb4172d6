//! Heterogeneous multiscale solver for the Landau-Lifshitz equation with a
//! rapidly oscillating exchange coefficient.
//!
//! A P1 finite element macro solver advances the magnetization on a coarse
//! triangulation. The unknown exchange flux on each triangle is supplied by a
//! finite difference micro problem that resolves the fine scale on a small
//! patch around the triangle barycenter and is averaged with compactly
//! supported kernels. A periodic cell-problem solver provides the homogenized
//! tensor used for reference solutions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod field;
pub mod geometry;
pub mod homogenize;
pub mod kernels;
pub mod linalg;
pub mod lowfields;
pub mod macro_fem;
pub mod material;
pub mod micro;
pub mod quadrature;
pub mod runner;
pub mod upscale;

pub use error::{Error, Result};

/// Planar coordinates.
pub type Point = nalgebra::Vector2<f64>;
/// Magnetization-like 3-vectors.
pub type Vec3 = nalgebra::Vector3<f64>;
/// A 3×2 Jacobian or flux matrix; column `d` is the derivative along `x_d`.
pub type Mat32 = nalgebra::Matrix3x2<f64>;
