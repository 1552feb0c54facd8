//! Exact scalar arithmetic: arbitrary-precision rationals, dense
//! univariate polynomials, and reduced rational functions.

mod poly;
mod ratfn;
mod roots;

pub use poly::{parse_rat, rat_from_f64, rat_to_f64, snap_rat, Poly, Rat};
pub use ratfn::RatFn;
pub(crate) use roots::balance_in_place;
pub use roots::{poly_roots, Root};
