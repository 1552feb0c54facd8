//! Finite dimensional LTI systems: state space algebra, realization,
//! zero structure, norms, and model reduction.
//!
//! The split of labor with `polymat` is deliberate. Structural facts
//! (ranks, invariant factors, image membership) are settled there in
//! exact arithmetic; this module owns everything that is inherently
//! numeric: eigenvalues, singular values, Riccati-grade linear
//! algebra, and floating point realizations. The bridge functions
//! `realize` and `ss_to_tfm` cross between the two worlds, and
//! `ss_to_tfm` crosses back exactly so a round trip can be audited.

mod balred;
mod linalg;
mod norms;
mod realize;
mod ss;
mod zeros;

pub use balred::{balanced_reduce, hankel_singular_values};
pub use linalg::{
    balanced_eigenvalues, expm, is_hurwitz, lyap, mat_inverse, matrix_sign, orth, orth_with_floor,
    solve_mat, spectral_abscissa, sylvester,
};
pub(crate) use norms::log_grid;
pub use norms::{freq_response, h2_norm, hinf_norm, sigma_max};
pub use realize::{minimal, realize, ss_to_tfm};
pub use ss::{closed_loop, internal_stability, lft_lower, ClosedLoop, StateSpace};
pub(crate) use zeros::{rational_pole_set, smith_mcmillan_fractions};
pub use zeros::{invariant_zeros, mirror_polynomial, transmission_zeros, ZeroInfo, ZeroSet};
