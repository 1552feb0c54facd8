//! Dense numeric kernels: matrix exponential, Sylvester and Lyapunov
//! solvers, the matrix sign function, and eigenvalue utilities.
//!
//! The Sylvester solver goes through the Kronecker product, which is
//! cubic in the product of the two state dimensions. That is the
//! right trade here: every caller in this crate works with realizations
//! of a few dozen states, and the Kronecker route has no orthogonal
//! reduction step whose conditioning would need its own audit.

use nalgebra::{DMatrix, DVector};
use num::complex::Complex64;

use crate::error::{Error, Result};
use crate::rational::balance_in_place;

/// Eigenvalues after a diagonal similarity balancing pass. Balancing
/// costs little and buys accuracy on matrices with wide entry spread,
/// which companion and Hamiltonian blocks routinely have.
pub fn balanced_eigenvalues(a: &DMatrix<f64>) -> Vec<Complex64> {
    assert_eq!(a.nrows(), a.ncols(), "eigenvalues need a square matrix");
    if a.nrows() == 0 {
        return Vec::new();
    }
    let mut m = a.clone();
    balance_in_place(&mut m);
    m.complex_eigenvalues().iter().copied().collect()
}

/// Largest real part over the spectrum; -inf for an empty matrix.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    balanced_eigenvalues(a)
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Strict Hurwitz test with an explicit margin.
pub fn is_hurwitz(a: &DMatrix<f64>, margin: f64) -> bool {
    spectral_abscissa(a) < -margin
}

/// Matrix inverse through LU; errors instead of returning garbage.
pub fn mat_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    a.clone().try_inverse().ok_or(Error::SingularMatrix)
}

/// Solves `a * x = b` through LU.
pub fn solve_mat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    a.clone().lu().solve(b).ok_or(Error::SingularMatrix)
}

fn one_norm(a: &DMatrix<f64>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential, degree 13 Pade approximant with scaling and
/// squaring. The scaling threshold is the standard backward-stable
/// bound for the (13,13) approximant.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    const THETA13: f64 = 5.371920351148152;
    #[rustfmt::skip]
    const B: [f64; 14] = [
        64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
        1187353796428800.0, 129060195264000.0, 10559470521600.0,
        670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
        960960.0, 16380.0, 182.0, 1.0,
    ];
    let norm = one_norm(a);
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let m = a / 2f64.powi(s);
    let m2 = &m * &m;
    let m4 = &m2 * &m2;
    let m6 = &m2 * &m4;
    let id = DMatrix::<f64>::identity(n, n);
    let u = &m
        * (&m6 * (&m6 * B[13] + &m4 * B[11] + &m2 * B[9])
            + &m6 * B[7]
            + &m4 * B[5]
            + &m2 * B[3]
            + &id * B[1]);
    let v = &m6 * (&m6 * B[12] + &m4 * B[10] + &m2 * B[8])
        + &m6 * B[6]
        + &m4 * B[4]
        + &m2 * B[2]
        + &id * B[0];
    let mut e = (&v - &u)
        .lu()
        .solve(&(&v + &u))
        .expect("Pade denominator is nonsingular by construction");
    for _ in 0..s {
        e = &e * &e;
    }
    e
}

/// Solves the Sylvester equation `a*x + x*b + q = 0` with `a` n x n,
/// `b` m x m, `q` n x m, through the Kronecker product linear system.
pub fn sylvester(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let m = b.nrows();
    assert_eq!(a.ncols(), n);
    assert_eq!(b.ncols(), m);
    assert_eq!((q.nrows(), q.ncols()), (n, m), "mismatched right hand side");
    let dim = n * m;
    if dim == 0 {
        return Ok(DMatrix::zeros(n, m));
    }
    // Column major stacking: vec index of x[(i,j)] is j*n + i.
    let mut k = DMatrix::<f64>::zeros(dim, dim);
    for j in 0..m {
        for i in 0..n {
            let row = j * n + i;
            for c in 0..n {
                k[(row, j * n + c)] += a[(i, c)];
            }
            for l in 0..m {
                k[(row, l * n + i)] += b[(l, j)];
            }
        }
    }
    let rhs = DVector::<f64>::from_fn(dim, |idx, _| -q[(idx % n, idx / n)]);
    let x = k.lu().solve(&rhs).ok_or(Error::SingularMatrix)?;
    Ok(DMatrix::from_fn(n, m, |i, j| x[j * n + i]))
}

/// Solves the Lyapunov equation `a*x + x*a' + q = 0` for symmetric
/// `q`; the result is symmetrized to remove roundoff skew.
pub fn lyap(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let x = sylvester(a, &a.transpose(), q)?;
    Ok((&x + &x.transpose()) * 0.5)
}

/// Matrix sign function by Newton iteration with determinant scaling.
///
/// Requires the spectrum to stay off the imaginary axis; the caller
/// is expected to have checked that, and non-convergence is reported
/// as an error rather than a panic because for Hamiltonian inputs it
/// is a feasibility verdict, not a bug.
pub fn matrix_sign(a: &DMatrix<f64>, max_iter: usize, tol: f64) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut s = a.clone();
    for _ in 0..max_iter {
        let lu = s.clone().lu();
        let log_det: f64 = lu.u().diagonal().iter().map(|d| d.abs().ln()).sum();
        if !log_det.is_finite() {
            return Err(Error::SingularMatrix);
        }
        let c = (-log_det / n as f64).exp();
        let s_inv = lu.try_inverse().ok_or(Error::SingularMatrix)?;
        let next = (&s * c + &s_inv / c) * 0.5;
        let step = one_norm(&(&next - &s)) / one_norm(&s).max(1.0);
        s = next;
        if step < tol {
            return Ok(s);
        }
    }
    Err(Error::SynthesisInfeasible(
        "sign iteration stalled: spectrum too close to the imaginary axis".into(),
    ))
}

/// Orthonormal basis for the column span: left singular vectors with
/// singular value above `rel_tol` times the largest and above the
/// absolute `floor`. The floor lets callers anchor the cut to the
/// scale of surrounding data, so a matrix that is zero up to roundoff
/// yields an n x 0 basis instead of noise directions.
pub fn orth_with_floor(m: &DMatrix<f64>, rel_tol: f64, floor: f64) -> DMatrix<f64> {
    let n = m.nrows();
    if m.ncols() == 0 {
        return DMatrix::zeros(n, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.as_ref().expect("u requested");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if smax <= floor {
        return DMatrix::zeros(n, 0);
    }
    let keep: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &sv)| sv > rel_tol * smax && sv > floor)
        .map(|(i, _)| i)
        .collect();
    let mut out = DMatrix::zeros(n, keep.len());
    for (k, &i) in keep.iter().enumerate() {
        out.set_column(k, &u.column(i));
    }
    out
}

/// `orth_with_floor` with no absolute floor.
pub fn orth(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    orth_with_floor(m, rel_tol, 0.0)
}
