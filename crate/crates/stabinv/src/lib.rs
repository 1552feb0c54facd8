//! Construction, certification, and simulation of stable inverses of
//! linear time-invariant MIMO systems.
//!
//! The crate is built around an exact rational-arithmetic core:
//! polynomials and rational functions with arbitrary-precision rational
//! coefficients ([`rational`]), polynomial and rational matrices with a
//! Smith-form engine that carries full unimodular certificates
//! ([`polymat`]), and a numeric state-space layer ([`lti`]) used where
//! spectral computations are unavoidable. On top of those sit the
//! right-inverse constructions and solvability certificates
//! ([`inversion`]), mixed-sensitivity H-infinity synthesis ([`hinf`]),
//! an L2 frequency-domain geometry toolkit ([`geometry`]), and a
//! fixed-step simulator for the dual feedforward/feedback tracking
//! architecture ([`sim`]).
//!
//! Exact arithmetic is the default; floating point enters only through
//! deliberate escape hatches (root finding, eigenvalue problems, SVD,
//! quadrature), each bracketed by tolerances collected in [`tol`].

pub mod error;
pub mod geometry;
pub mod hinf;
pub mod inversion;
pub mod lti;
pub mod models;
pub mod polymat;
pub mod rational;
pub mod run;
pub mod sim;
pub mod tol;

pub use error::{Error, Result};
pub use polymat::{PolyMatrix, RatMatrix, SmithDecomposition};
pub use rational::{Poly, Rat, RatFn};
