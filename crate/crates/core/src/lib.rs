//! Numerical companion for the large-|t| geometry of rank-two irregular
//! Higgs bundle moduli spaces on the Riemann sphere.
//!
//! The crate is layered bottom-up:
//!
//! * [`base`] builds quadratic differentials in the affine Hitchin base from
//!   an irregular divisor and clears denominators into the polynomial `ν̃`.
//! * [`spectral`] finds and classifies the zeros of `ν̃` (the ramification
//!   points of the spectral cover) and computes their local masses.
//! * [`specfun`] holds the special functions: Bessel `K₀`/`K₁`, complete
//!   elliptic `K`, theta nulls and the modular lambda function.
//! * [`painleve`] solves the radial sinh-Gordon boundary value problems for
//!   the fiducial profiles.
//! * [`gluing`] evaluates the residual of the glued approximate metric and
//!   fits its exponential decay.
//! * [`fourdim`] runs the nine four-dimensional case studies: special Kähler
//!   integrals, fibre moduli `τ(t)`, torus metrics and model-space data.
//! * [`cli`] is the command-line front end.
//!
//! [`poly`], [`quad`], [`linalg`] and [`fit`] are supporting numerics.

// `!(x > 0.0)` is used on purpose: it also rejects NaN. Index loops are
// kept where they mirror the recurrences they implement.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod base;
pub mod cli;
pub mod error;
pub mod fit;
pub mod fourdim;
pub mod gluing;
pub mod linalg;
pub mod painleve;
pub mod poly;
pub mod quad;
pub mod specfun;
pub mod spectral;

pub use error::{Error, Result};
pub use num_complex::Complex64;
