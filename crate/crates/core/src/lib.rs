//! Variational toolkit for planar loops of prescribed curvature.
//!
//! An `H`-loop is a closed curve `u` with `u'' = |u'| H(u) iu'`: constant
//! speed and curvature `H(u)` at every point. They are the non-constant
//! critical points of
//!
//! ```text
//! E_H(u) = L(u) + A_H(u),   L(u) = (⨍|u'|²)^{1/2},   A_H(u) = ⨍ Q(u)·iu'   (div Q = H)
//! ```
//!
//! The crate evaluates this energy and its gradient on sampled loops,
//! computes the Hardy-type quantities of curvature fields, searches for
//! critical points and mountain-pass levels, and certifies loops by periodic
//! ODE shooting.

// negated comparisons are how NaN inputs get rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod area;
pub mod curve;
pub mod energy;
pub mod error;
pub mod field;
pub mod hardy;
pub mod mountain_pass;
pub mod quad;
pub mod solver;

pub use curve::Loop;
pub use error::{Error, Result};
pub use field::{CurvatureField, FieldKind, FieldSpec};
pub use rustfft::num_complex::Complex64;
