//! Discretised restricted-projection experiments: curves and frames, dyadic
//! covers and (delta, s)-sets, fractal test sets and Frostman measures,
//! plank geometry, tube incidences, high/low frequency splitting and
//! box-counting dimension estimates.

// negated comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod curve;
pub mod dimension;
pub mod dyadic;
pub mod error;
pub mod fft;
pub mod fractal;
pub mod geometry;
pub mod highlow;
pub mod incidence;

pub use curve::{Curve, CurveSpec, Frame, Vec3};
pub use error::{Error, Result};
