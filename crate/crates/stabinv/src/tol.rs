//! Central registry of numeric tolerances.
//!
//! Every floating-point escape hatch in the crate reads its tolerance
//! from here so that test expectations and library behavior cannot
//! drift apart. Values are chosen for double precision and the system
//! sizes this crate targets (state dimensions up to a few tens).

/// Relative clustering tolerance for grouping numeric roots into
/// multiplicities.
pub const MULT_TOL: f64 = 1e-6;

/// Relative singular-value cutoff for rank decisions in the numeric
/// minimality pass and other SVD-based subspace extractions.
pub const SVD_TOL: f64 = 1e-9;

/// Stability margin: an eigenvalue counts as stable only if its real
/// part is strictly less than `-STAB_MARGIN`.
pub const STAB_MARGIN: f64 = 1e-9;

/// Relative tolerance for the synthesis gamma bisection.
pub const GAMMA_TOL: f64 = 1e-3;

/// Relative slack applied above the smallest feasible gamma before the
/// central controller is extracted.
pub const GAMMA_SLACK: f64 = 0.05;

/// Maximum number of gamma bisection steps.
pub const GAMMA_MAX_ITER: usize = 60;

/// Relative tolerance for H-infinity norm bisection.
pub const NORM_TOL: f64 = 1e-8;

/// Relative tolerance for deciding that a Hamiltonian eigenvalue sits
/// on the imaginary axis.
pub const AXIS_TOL: f64 = 1e-7;

/// Relative residual tolerance for accepting a Riccati solution.
pub const RICCATI_TOL: f64 = 1e-6;

/// Relative tolerance on interpolation residuals when checking that a
/// reference vector vanishes at blocking zeros. Scaled by the peak
/// magnitude of the reference over a frequency grid, floored at one.
pub const INTERP_TOL: f64 = 1e-8;

/// Absolute tolerance for the adaptive quadrature cross-check of the
/// L2 inner product.
pub const QUAD_TOL: f64 = 1e-9;

/// Orthonormality tolerance for the L2 basis: entries of the output
/// Gram matrix may deviate from identity by at most this much.
pub const ORTH_TOL: f64 = 1e-7;

/// A candidate basis vector whose energy falls below this fraction of
/// the largest column energy is declared dependent and dropped.
pub const DEGENERATE_TOL_REL: f64 = 1e-10;

/// Default control-penalty regularization weight appended to the
/// performance channel so synthesis rank assumptions hold.
pub const EPS_U_DEFAULT: f64 = 1e-2;

/// Floor for the control-penalty weight when it is halved in search of
/// a feasible synthesis problem.
pub const EPS_U_MIN: f64 = 1e-6;

/// Real controller poles with magnitude below this are treated as
/// intended integrators and moved exactly to zero.
pub const POLE_TOL: f64 = 1e-2;

/// Output magnitude at which a simulation is flagged as divergent.
pub const OVERFLOW_CAP: f64 = 1e9;

/// Default fixed simulation step.
pub const DT_DEFAULT: f64 = 1e-3;

/// Tolerance for snapping a numeric root to a nearby small rational
/// when extracting exact right-half-plane polynomial factors.
pub const SNAP_TOL: f64 = 1e-9;

/// Largest denominator considered when snapping numeric roots to
/// rationals.
pub const SNAP_DEN_MAX: u64 = 1_000_000;

/// Relative distance at which a numeric pole/zero pair is considered
/// cancelling in the float fallback path.
pub const CANCEL_TOL: f64 = 1e-7;
