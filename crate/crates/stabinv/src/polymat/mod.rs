//! Matrices over R[s] and R(s), with an exact Smith normal form.
//!
//! Everything here runs in exact rational arithmetic. The payoff is
//! that structural questions (rank, image membership, invariant
//! factors) get discrete answers, and the Smith certificates come
//! with their inverses attached so later stages never have to invert
//! a polynomial matrix approximately.

mod poly_matrix;
mod rank;
mod rat_matrix;
mod smith;

pub use poly_matrix::PolyMatrix;
pub use rank::{left_null_basis, membership_im, pseudo_inverse, rank_rs, solve_rs};
pub use rat_matrix::RatMatrix;
pub use smith::{smith_form, SmithDecomposition, SmithSummary};
