//! Periodic orbits of the (n+1)-body problem in which `n` equal masses form a
//! rotating, breathing regular polygon and one more body oscillates along the
//! polygon's axis.
//!
//! The crate locates the closed-form bifurcation points of the circular
//! family, continues the emanating branches of symmetric periodic solutions,
//! hunts for members whose rotation angle is a rational multiple of `π`, and
//! reconstructs the resulting closed (n+1)-body orbits.

// `!(x > 0.0)` is used throughout to reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bifurcate;
pub mod cli;
pub mod continuation;
pub mod integrate;
pub mod model;
pub mod orbits;
pub mod shoot;
