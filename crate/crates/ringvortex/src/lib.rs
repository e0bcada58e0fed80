//! Thin vortex rings modelled as rigid toroidal bodies in an axisymmetric
//! ideal fluid: kernels, boundary-integral solvers, the coefficients of the
//! body equation of motion, its integration, and the point-vortex limits.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bodies;
pub mod boundary;
pub mod coefficients;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod interior;
pub mod kernels;
pub mod ode;
pub mod pointvortex;
pub mod quad;
pub mod regime;
pub mod solvers;
pub mod special;
pub mod sweep;
pub mod validate;

pub use error::{Error, Result};
