//! Numerical laboratory for cohomogeneity-one Spin(7) holonomy metrics with
//! principal orbit the Aloff-Wallach space N(1,-1).
//!
//! A metric in this class is determined by four coefficient functions
//! (a, b, c, f) of an arclength coordinate t, subject to a first-order flow.
//! Dividing out the overall scale through A = a/c, B = b/c, F = f/c and
//! passing to X = A^2, Y = B^2, Z = ABF turns the flow into a polynomial
//! vector field in a slow time s with dt = (ab/c) ds. Complete metrics
//! correspond to flow lines joining distinguished fixed points of that field:
//! closures on a singular orbit, an asymptotically conical end at the
//! invariant Spin(7) cone, or an asymptotically locally conical end.
//!
//! The crate provides the flow fields and coordinate maps ([`ode`]), series
//! initial data near the singular orbits and the cone ([`series`]), an
//! adaptive integrator with event detection and metric reconstruction
//! ([`integrator`]), phase-portrait analysis ([`analysis`]) and shooting
//! drivers for one-parameter family sweeps ([`shooting`]).
//!
//! The crate is `no_std`-compatible: disable default features and enable
//! `libm` to build without the standard library (allocation is required).

#![cfg_attr(not(feature = "std"), no_std)]
// Guards are written `!(x > 0.0)` so that NaN fails validation; `x <= 0.0`
// would wave NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Series and matrix kernels index by subscript to match the recurrences they
// implement.
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod analysis;
pub mod integrator;
pub mod linalg;
pub mod ode;
pub mod series;
pub mod shooting;

mod error;
mod math;

pub use error::Error;
