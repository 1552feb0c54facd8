//! System norms and frequency response.
//!
//! The H-infinity norm is computed by bisection on the bounded real
//! test: gamma exceeds the norm exactly when the associated
//! Hamiltonian has no eigenvalues on the imaginary axis. A frequency
//! sweep seeds the lower bound (including the resonant frequencies of
//! the A matrix, so sharp peaks cannot slip between grid points) and
//! the bisection then squeezes to a relative width where the result
//! is trustworthy to far tighter than any tolerance used downstream.

use nalgebra::DMatrix;
use num::complex::Complex64;

use super::linalg::{balanced_eigenvalues, mat_inverse};
use super::ss::StateSpace;
use crate::error::{Error, Result};
use crate::tol::{AXIS_TOL, NORM_TOL};

/// Largest singular value.
pub fn sigma_max(m: &DMatrix<Complex64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

fn sigma_max_real(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// Frequency response samples (omega, G(j omega)).
pub fn freq_response(ss: &StateSpace, omegas: &[f64]) -> Result<Vec<(f64, DMatrix<Complex64>)>> {
    omegas
        .iter()
        .map(|&w| Ok((w, ss.eval(Complex64::new(0.0, w))?)))
        .collect()
}

/// Log spaced grid from 10^lo to 10^hi.
pub(crate) fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (count - 1).max(1) as f64))
        .collect()
}

/// Bounded real test: true when gamma is strictly larger than the
/// H-infinity norm (no Hamiltonian eigenvalues near the axis).
fn gamma_feasible(ss: &StateSpace, gamma: f64, sd: f64) -> Result<bool> {
    if gamma <= sd * (1.0 + 1e-13) {
        return Ok(false);
    }
    let n = ss.n_states();
    let m = ss.n_inputs();
    let r = DMatrix::<f64>::identity(m, m) * gamma.powi(2) - ss.d.transpose() * &ss.d;
    let r_inv = mat_inverse(&r)?;
    let ar = &ss.a + &ss.b * &r_inv * ss.d.transpose() * &ss.c;
    let mut h = DMatrix::<f64>::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&ar);
    h.view_mut((0, n), (n, n))
        .copy_from(&(&ss.b * &r_inv * ss.b.transpose()));
    let p = ss.n_outputs();
    let inner = DMatrix::<f64>::identity(p, p) + &ss.d * &r_inv * ss.d.transpose();
    h.view_mut((n, 0), (n, n))
        .copy_from(&(-(ss.c.transpose() * inner * &ss.c)));
    h.view_mut((n, n), (n, n)).copy_from(&(-ar.transpose()));
    let eigs = balanced_eigenvalues(&h);
    Ok(!eigs
        .iter()
        .any(|l| l.re.abs() <= AXIS_TOL * (1.0 + l.norm())))
}

/// H-infinity norm of a stable system.
pub fn hinf_norm(ss: &StateSpace) -> Result<f64> {
    if !ss.is_stable() {
        return Err(Error::Unstable(
            "the H-infinity norm needs a Hurwitz realization".into(),
        ));
    }
    let sd = sigma_max_real(&ss.d);
    if ss.n_states() == 0 {
        return Ok(sd);
    }
    // Lower bound sweep: broad log grid plus the resonant frequencies.
    let mut omegas = log_grid(-4.0, 4.0, 160);
    omegas.push(0.0);
    for l in ss.poles() {
        if l.im.abs() > 1e-9 {
            omegas.push(l.im.abs());
        }
        omegas.push(l.norm());
    }
    let mut lo = sd;
    for w in omegas {
        let v = ss.eval(Complex64::new(0.0, w))?;
        lo = lo.max(sigma_max(&v));
    }
    if lo <= 1e-300 {
        return Ok(0.0);
    }
    // Find an infeasible/feasible bracket around the sweep maximum.
    let mut hi = (lo * (1.0 + 1e-4)).max(sd * (1.0 + 1e-10) + 1e-300);
    let mut grow = 0;
    while !gamma_feasible(ss, hi, sd)? {
        hi *= 2.0;
        grow += 1;
        if grow > 200 {
            return Err(Error::Precondition(
                "no finite upper bound for the norm bisection".into(),
            ));
        }
    }
    // lo is a certified lower bound (attained value or sigma(D)).
    let mut lo = lo.min(hi);
    while hi - lo > NORM_TOL * hi {
        let mid = 0.5 * (hi + lo);
        if gamma_feasible(ss, mid, sd)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (hi + lo))
}

/// H2 norm of a strictly proper stable system.
pub fn h2_norm(ss: &StateSpace) -> Result<f64> {
    if !ss.is_stable() {
        return Err(Error::Unstable("the H2 norm needs a Hurwitz realization".into()));
    }
    if ss.d.iter().any(|x| x.abs() > 0.0) {
        return Err(Error::Precondition(
            "nonzero feedthrough makes the H2 norm unbounded".into(),
        ));
    }
    if ss.n_states() == 0 {
        return Ok(0.0);
    }
    let wc = super::linalg::lyap(&ss.a, &(&ss.b * ss.b.transpose()))?;
    let val = (&ss.c * wc * ss.c.transpose()).trace();
    Ok(val.max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn siso(a: f64, b: f64, c: f64, d: f64) -> StateSpace {
        StateSpace::new(
            DMatrix::from_row_slice(1, 1, &[a]),
            DMatrix::from_row_slice(1, 1, &[b]),
            DMatrix::from_row_slice(1, 1, &[c]),
            DMatrix::from_row_slice(1, 1, &[d]),
        )
        .unwrap()
    }

    #[test]
    fn first_order_norm() {
        // |1/(s+1)|_inf = 1 at omega = 0.
        let g = siso(-1.0, 1.0, 1.0, 0.0);
        assert_relative_eq!(hinf_norm(&g).unwrap(), 1.0, max_relative = 1e-7);
    }

    #[test]
    fn resonant_peak_norm() {
        // 10/(s^2 + 0.2 s + 1): peak 10 / (0.2 sqrt(1 - 0.01)).
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -0.2]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let c = DMatrix::from_row_slice(1, 2, &[10.0, 0.0]);
        let g = StateSpace::new(a, b, c, DMatrix::zeros(1, 1)).unwrap();
        let expect = 10.0 / (0.2 * (1.0 - 0.01f64).sqrt());
        assert_relative_eq!(hinf_norm(&g).unwrap(), expect, max_relative = 1e-7);
    }

    #[test]
    fn static_gain_norm() {
        let g = StateSpace::from_gain(DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]));
        assert_relative_eq!(hinf_norm(&g).unwrap(), 3.0, max_relative = 1e-12);
    }

    #[test]
    fn feedthrough_dominates_at_infinity() {
        // 2 + 1/(s+1): sup at omega = 0 is 3.
        let g = siso(-1.0, 1.0, 1.0, 2.0);
        assert_relative_eq!(hinf_norm(&g).unwrap(), 3.0, max_relative = 1e-7);
    }

    #[test]
    fn unstable_rejected() {
        let g = siso(0.5, 1.0, 1.0, 0.0);
        assert!(matches!(hinf_norm(&g), Err(Error::Unstable(_))));
    }

    #[test]
    fn h2_of_first_order() {
        // |1/(s+1)|_2 = 1/sqrt(2).
        let g = siso(-1.0, 1.0, 1.0, 0.0);
        assert_relative_eq!(
            h2_norm(&g).unwrap(),
            std::f64::consts::FRAC_1_SQRT_2,
            max_relative = 1e-12
        );
    }

    #[test]
    fn zero_system_norm() {
        let g = StateSpace::zero(2, 3);
        assert_eq!(hinf_norm(&g).unwrap(), 0.0);
    }
}
