//! Balanced truncation of stable realizations.
//!
//! Square root method: eigenvalue factorizations of the two gramians
//! stand in for Cholesky so rank deficient (non-minimal) systems
//! reduce cleanly instead of failing a positive definiteness check.

use nalgebra::{DMatrix, SymmetricEigen};

use super::linalg::lyap;
use super::ss::StateSpace;
use crate::error::{Error, Result};

fn psd_sqrt(w: &DMatrix<f64>) -> DMatrix<f64> {
    let n = w.nrows();
    let sym = (w + &w.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let lam = eig.eigenvalues[j].max(0.0).sqrt();
        for i in 0..n {
            l[(i, j)] = eig.eigenvectors[(i, j)] * lam;
        }
    }
    l
}

/// Hankel singular values of a stable system, descending.
pub fn hankel_singular_values(ss: &StateSpace) -> Result<Vec<f64>> {
    if !ss.is_stable() {
        return Err(Error::Unstable("gramians need a Hurwitz realization".into()));
    }
    let n = ss.n_states();
    if n == 0 {
        return Ok(Vec::new());
    }
    let wc = lyap(&ss.a, &(&ss.b * ss.b.transpose()))?;
    let wo = lyap(&ss.a.transpose(), &(ss.c.transpose() * &ss.c))?;
    let m = psd_sqrt(&wo).transpose() * psd_sqrt(&wc);
    let mut sv: Vec<f64> = m.svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(sv)
}

/// Balanced truncation. Keeps `order` states when given, otherwise
/// every state whose Hankel singular value exceeds `tol` relative to
/// the largest.
pub fn balanced_reduce(ss: &StateSpace, order: Option<usize>, tol: f64) -> Result<StateSpace> {
    if !ss.is_stable() {
        return Err(Error::Unstable(
            "balanced truncation needs a Hurwitz realization".into(),
        ));
    }
    let n = ss.n_states();
    if n == 0 {
        return Ok(ss.clone());
    }
    let wc = lyap(&ss.a, &(&ss.b * ss.b.transpose()))?;
    let wo = lyap(&ss.a.transpose(), &(ss.c.transpose() * &ss.c))?;
    let lc = psd_sqrt(&wc);
    let lo = psd_sqrt(&wo);
    let svd = (lo.transpose() * &lc).svd(true, true);
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .unwrap()
    });
    let smax = svd.singular_values[idx[0]].max(0.0);
    let k = match order {
        Some(k) => k.min(n),
        None => idx
            .iter()
            .take_while(|&&i| svd.singular_values[i] > tol * smax && svd.singular_values[i] > 0.0)
            .count(),
    };
    if k == 0 {
        return Ok(StateSpace::from_gain(ss.d.clone()));
    }
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let mut t = DMatrix::<f64>::zeros(n, k);
    let mut ti = DMatrix::<f64>::zeros(k, n);
    for (col, &i) in idx.iter().take(k).enumerate() {
        let s_isqrt = 1.0 / svd.singular_values[i].sqrt();
        let tv = &lc * vt.row(i).transpose() * s_isqrt;
        t.set_column(col, &tv);
        let tiv = (u.column(i).transpose() * lo.transpose()) * s_isqrt;
        ti.row_mut(col).copy_from(&tiv);
    }
    StateSpace::new(&ti * &ss.a * &t, &ti * &ss.b, &ss.c * &t, ss.d.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::complex::Complex64;

    #[test]
    fn duplicate_modes_collapse() {
        // Two identical first order systems in parallel: one Hankel
        // value is zero and the reduction has a single state.
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let c = DMatrix::from_row_slice(1, 2, &[0.5, 0.5]);
        let g = StateSpace::new(a, b, c, DMatrix::zeros(1, 1)).unwrap();
        let sv = hankel_singular_values(&g).unwrap();
        assert!(sv[1] < 1e-12 * sv[0]);
        let r = balanced_reduce(&g, None, 1e-9).unwrap();
        assert_eq!(r.n_states(), 1);
        let s = Complex64::new(0.2, 0.9);
        let got = r.eval(s).unwrap()[(0, 0)];
        let expect = g.eval(s).unwrap()[(0, 0)];
        assert!((got - expect).norm() < 1e-10);
    }

    #[test]
    fn explicit_order_is_respected() {
        // Fast and slow mode; keeping one state preserves the
        // dominant (slow, high gain) one.
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -100.0]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 0.1]);
        let g = StateSpace::new(a, b, c, DMatrix::zeros(1, 1)).unwrap();
        let r = balanced_reduce(&g, Some(1), 0.0).unwrap();
        assert_eq!(r.n_states(), 1);
        let dc_err = (r.eval(Complex64::new(0.0, 0.0)).unwrap()[(0, 0)]
            - g.eval(Complex64::new(0.0, 0.0)).unwrap()[(0, 0)])
        .norm();
        assert!(dc_err < 0.01, "dominant mode must survive, err {dc_err}");
    }

    #[test]
    fn zero_transfer_reduces_to_gain() {
        let a = DMatrix::from_row_slice(1, 1, &[-2.0]);
        let b = DMatrix::from_row_slice(1, 1, &[1.0]);
        let c = DMatrix::from_row_slice(1, 1, &[0.0]);
        let g = StateSpace::new(a, b, c, DMatrix::zeros(1, 1)).unwrap();
        let r = balanced_reduce(&g, None, 1e-9).unwrap();
        assert_eq!(r.n_states(), 0);
    }
}
