//! Graded differential algebra on jet spaces over exact rationals.
//!
//! The crate builds up in layers:
//!
//! * [`expr`] — graded-commutative differential polynomials in independent
//!   variables, jet coordinates of dependent variables, and odd/even
//!   antifield coordinates, with exact rational coefficients.
//! * [`jetcalc`] — total derivatives, Euler operators, evolutionary
//!   derivations, linearizations, horizontal forms, and equation systems in
//!   solved form with normal-form reduction.
//! * [`cdiff`] — matrix operators in total derivatives with polynomial
//!   coefficients: composition, application, formal adjoints, and
//!   multilinear operators with a self-adjoint projector.
//! * [`koszultate`] — the Koszul–Tate differential of an embedded compatibility
//!   complex, the adjoint-linearization differential on its term spaces, and
//!   truncated homology computations.
//! * [`conslaw`] — cosymmetry solving, conservation-law certificates, and
//!   classification of characteristics against the image of skew-adjoint
//!   operators.
//!
//! All computations are exact; no floating point appears anywhere.

pub mod cdiff;
pub mod conslaw;
pub mod context;
pub mod error;
pub mod expr;
pub mod jetcalc;
pub mod koszultate;
pub mod linalg;
pub mod par;

pub use context::{JetContext, Parity, TierSpec};
pub use error::{Error, Result};
