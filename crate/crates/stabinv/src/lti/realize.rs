//! Realization bridges between rational matrices and state space.
//!
//! `realize` builds a block companion realization entry by entry and
//! then strips unreachable and unobservable directions with orthogonal
//! staircase projections, so the result is minimal to working
//! precision. `ss_to_tfm` goes the other way in exact arithmetic:
//! floats are promoted to the rationals they already are, and the
//! resolvent comes from the Leverrier recursion, so the returned
//! transfer matrix is the exact one of the given realization. Chaining
//! the two on an exactly representable system is the identity, which
//! the tests exploit as a certificate.

use nalgebra::DMatrix;

use super::linalg::orth_with_floor;
use super::ss::StateSpace;
use crate::error::{Error, Result};
use crate::polymat::RatMatrix;
use crate::rational::{rat_from_f64, rat_to_f64, Poly, Rat, RatFn};
use crate::tol::SVD_TOL;
use num::{One, Zero};

/// Minimal (to tolerance) state space realization of a proper
/// rational matrix.
pub fn realize(m: &RatMatrix) -> Result<StateSpace> {
    let raw = realize_companion(m)?;
    Ok(minimal(&raw))
}

/// Block companion realization, one block per entry, no reduction.
pub(crate) fn realize_companion(m: &RatMatrix) -> Result<StateSpace> {
    let (p, q) = (m.rows(), m.cols());
    let mut blocks: Vec<(usize, usize, DMatrix<f64>, Vec<f64>)> = Vec::new();
    let mut d = DMatrix::<f64>::zeros(p, q);
    let mut total = 0usize;
    for i in 0..p {
        for j in 0..q {
            let entry = &m[(i, j)];
            let (poly_part, strict) = entry.poly_split();
            if !poly_part.is_constant() {
                return Err(Error::NotProper(format!(
                    "entry ({i}, {j}) has relative degree {}",
                    entry.relative_degree()
                )));
            }
            d[(i, j)] = rat_to_f64(&poly_part.coeff(0));
            if strict.is_zero() {
                continue;
            }
            let den = strict.den();
            let num = strict.num();
            let n = den.deg_or_zero();
            let mut a = DMatrix::<f64>::zeros(n, n);
            for k in 0..n.saturating_sub(1) {
                a[(k, k + 1)] = 1.0;
            }
            for k in 0..n {
                a[(n - 1, k)] = -rat_to_f64(&den.coeffs()[k]);
            }
            let mut c_row = vec![0.0; n];
            for (k, coeff) in num.coeffs().iter().enumerate() {
                c_row[k] = rat_to_f64(coeff);
            }
            total += n;
            blocks.push((i, j, a, c_row));
        }
    }
    let mut a = DMatrix::<f64>::zeros(total, total);
    let mut b = DMatrix::<f64>::zeros(total, q);
    let mut c = DMatrix::<f64>::zeros(p, total);
    let mut off = 0usize;
    for (i, j, ablk, crow) in blocks {
        let n = ablk.nrows();
        a.view_mut((off, off), (n, n)).copy_from(&ablk);
        b[(off + n - 1, j)] = 1.0;
        for k in 0..n {
            c[(i, off + k)] = crow[k];
        }
        off += n;
    }
    StateSpace::new(a, b, c, d)
}

/// Orthonormal basis of the smallest A invariant subspace containing
/// the columns of `b`, grown one Krylov power per sweep. Directions
/// below SVD_TOL relative to the realization's own scale count as
/// absent, which is what makes this a minimality tolerance.
fn reachable_basis(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let scale = a
        .iter()
        .chain(b.iter())
        .map(|x| x.abs())
        .fold(1.0, f64::max);
    let floor = SVD_TOL * scale;
    let mut v = orth_with_floor(b, SVD_TOL, floor);
    loop {
        if v.ncols() == a.nrows() {
            return v;
        }
        let av = a * &v;
        let mut joint = DMatrix::zeros(a.nrows(), v.ncols() + av.ncols());
        joint.view_mut((0, 0), (v.nrows(), v.ncols())).copy_from(&v);
        joint
            .view_mut((0, v.ncols()), (av.nrows(), av.ncols()))
            .copy_from(&av);
        let next = orth_with_floor(&joint, SVD_TOL, floor);
        if next.ncols() == v.ncols() {
            return next;
        }
        v = next;
    }
}

fn reachable_part(ss: &StateSpace) -> StateSpace {
    if ss.n_states() == 0 {
        return ss.clone();
    }
    let v = reachable_basis(&ss.a, &ss.b);
    let vt = v.transpose();
    StateSpace {
        a: &vt * &ss.a * &v,
        b: &vt * &ss.b,
        c: &ss.c * &v,
        d: ss.d.clone(),
    }
}

/// Removes unreachable then unobservable directions.
pub fn minimal(ss: &StateSpace) -> StateSpace {
    let ctrb = reachable_part(ss);
    reachable_part(&ctrb.transpose()).transpose()
}

/// Exact dense rational matrix, internal to the Leverrier recursion.
struct RMat {
    n: usize,
    e: Vec<Rat>,
}

impl RMat {
    fn identity(n: usize) -> Self {
        let mut e = vec![Rat::zero(); n * n];
        for i in 0..n {
            e[i * n + i] = Rat::one();
        }
        RMat { n, e }
    }

    fn from_f64(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        let mut e = vec![Rat::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                e[i * n + j] = rat_from_f64(m[(i, j)]);
            }
        }
        RMat { n, e }
    }

    fn at(&self, i: usize, j: usize) -> &Rat {
        &self.e[i * self.n + j]
    }

    fn mul(&self, other: &RMat) -> RMat {
        let n = self.n;
        let mut e = vec![Rat::zero(); n * n];
        for i in 0..n {
            for k in 0..n {
                let lik = self.at(i, k);
                if lik.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let r = other.at(k, j);
                    if !r.is_zero() {
                        e[i * n + j] += lik * r;
                    }
                }
            }
        }
        RMat { n, e }
    }

    fn add_scalar_diag(&mut self, s: &Rat) {
        for i in 0..self.n {
            self.e[i * self.n + i] += s;
        }
    }

    fn trace(&self) -> Rat {
        (0..self.n).map(|i| self.at(i, i).clone()).sum()
    }
}

/// Exact transfer matrix of a realization.
///
/// Each float entry is promoted to the rational it exactly encodes,
/// the characteristic polynomial and adjugate of (sI - A) come from
/// the Leverrier recursion, and every output entry is reduced to
/// lowest terms. No rounding happens anywhere in this path.
pub fn ss_to_tfm(ss: &StateSpace) -> RatMatrix {
    let n = ss.n_states();
    let (p, q) = (ss.n_outputs(), ss.n_inputs());
    if n == 0 {
        return RatMatrix::from_fn(p, q, |i, j| {
            RatFn::from_poly(Poly::constant(rat_from_f64(ss.d[(i, j)])))
        });
    }
    let a = RMat::from_f64(&ss.a);
    // char poly s^n + c[0] s^{n-1} + ... + c[n-1]; adjugate powers
    // M_k with (sI - A)^{-1} = sum_k M_k s^{n-1-k} / char.
    let mut coeffs: Vec<Rat> = Vec::with_capacity(n);
    let mut msets: Vec<RMat> = Vec::with_capacity(n);
    let mut mk = RMat::identity(n);
    for k in 1..=n {
        let am = a.mul(&mk);
        let ck = -(am.trace() / Rat::from_integer(k.into()));
        msets.push(mk);
        coeffs.push(ck.clone());
        mk = am;
        mk.add_scalar_diag(&ck);
    }
    debug_assert!(mk.e.iter().all(|x| x.is_zero()), "recursion must close");
    let mut char_poly = vec![Rat::zero(); n + 1];
    char_poly[n] = Rat::one();
    for (k, c) in coeffs.iter().enumerate() {
        // c_k multiplies s^{n-1-k}.
        char_poly[n - 1 - k] = c.clone();
    }
    let den = Poly::new(char_poly);

    let br: Vec<Vec<Rat>> = (0..n)
        .map(|i| (0..q).map(|j| rat_from_f64(ss.b[(i, j)])).collect())
        .collect();
    let cr: Vec<Vec<Rat>> = (0..p)
        .map(|i| (0..n).map(|j| rat_from_f64(ss.c[(i, j)])).collect())
        .collect();

    RatMatrix::from_fn(p, q, |oi, ij| {
        // numerator coefficients of C adj(sI - A) B at (oi, ij)
        let mut num = vec![Rat::zero(); n];
        for (k, m) in msets.iter().enumerate() {
            let power = n - 1 - k;
            let mut acc = Rat::zero();
            for r in 0..n {
                if cr[oi][r].is_zero() {
                    continue;
                }
                for s in 0..n {
                    if !br[s][ij].is_zero() {
                        acc += &cr[oi][r] * m.at(r, s) * &br[s][ij];
                    }
                }
            }
            num[power] = acc;
        }
        let strict = RatFn::new(Poly::new(num), den.clone()).expect("char poly is monic");
        &strict + &RatFn::from_poly(Poly::constant(rat_from_f64(ss.d[(oi, ij)])))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::parse_rat;
    use num::complex::Complex64;

    fn benchmark_plant() -> RatMatrix {
        let half = Poly::new(vec![parse_rat("0.5").unwrap(), Rat::one()]);
        let p11 = RatFn::from_ints(&[1, -1], &[1, 2, 1]).unwrap();
        let p12 = RatFn::new(Poly::constant(parse_rat("0.3").unwrap()), half).unwrap();
        let p21 = RatFn::new(
            Poly::from_ints(&[-1, 1]),
            &Poly::from_ints(&[1, 2, 1]) * &Poly::from_ints(&[2, 1]),
        )
        .unwrap();
        let p22 = RatFn::from_ints(&[2], &[3, 1]).unwrap();
        RatMatrix::new(2, 2, vec![p11, p12, p21, p22])
    }

    #[test]
    fn dyadic_round_trip_is_exact() {
        // All coefficients are dyadic, so float realization loses
        // nothing and the exact return trip must reproduce the input.
        let m = RatMatrix::new(
            2,
            2,
            vec![
                RatFn::from_ints(&[1], &[1, 1]).unwrap(),
                RatFn::from_f64s(&[0.5], &[0.25, 1.0]).unwrap(),
                RatFn::zero(),
                RatFn::from_ints(&[3, 1], &[2, 3, 1]).unwrap(),
            ],
        );
        let ss = realize_companion(&m).unwrap();
        assert_eq!(ss.n_states(), 4);
        let back = ss_to_tfm(&ss);
        assert_eq!(back, m);
    }

    #[test]
    fn feedthrough_splits_off() {
        // (s + 2)/(s + 1) = 1 + 1/(s + 1): one state, D = 1.
        let m = RatMatrix::new(1, 1, vec![RatFn::from_ints(&[2, 1], &[1, 1]).unwrap()]);
        let ss = realize(&m).unwrap();
        assert_eq!(ss.n_states(), 1);
        assert_eq!(ss.d[(0, 0)], 1.0);
        let back = ss_to_tfm(&ss);
        assert_eq!(back, m);
    }

    #[test]
    fn improper_entry_rejected() {
        let m = RatMatrix::new(1, 1, vec![RatFn::from_ints(&[0, 0, 1], &[1, 1]).unwrap()]);
        assert!(matches!(realize(&m), Err(Error::NotProper(_))));
    }

    #[test]
    fn benchmark_plant_minimal_order() {
        // Naive block order is 2+1+3+1 = 7; the shared dynamics leave
        // a minimal order of 5.
        let p = benchmark_plant();
        let raw = realize_companion(&p).unwrap();
        assert_eq!(raw.n_states(), 7);
        let ss = minimal(&raw);
        assert_eq!(ss.n_states(), 5);
        // Reduced realization still matches the plant on the axis.
        for &w in &[0.0, 0.3, 1.0, 7.0] {
            let s = Complex64::new(0.0, w);
            let exact = p.eval(s);
            let reduced = ss.eval(s).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    assert!((exact[(i, j)] - reduced[(i, j)]).norm() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn unobservable_mode_removed() {
        // Two copies of the same first order system subtracted:
        // transfer function is zero, minimal order is zero.
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, -1.0]);
        let ss = StateSpace::new(a, b, c, DMatrix::zeros(1, 1)).unwrap();
        let m = minimal(&ss);
        assert_eq!(m.n_states(), 0);
    }

    #[test]
    fn zero_state_transfer() {
        let ss = StateSpace::from_gain(DMatrix::from_row_slice(1, 2, &[2.0, -0.5]));
        let m = ss_to_tfm(&ss);
        assert!(m[(0, 0)].is_constant());
        assert_eq!(rat_to_f64(&m[(0, 1)].eval_rat(&Rat::zero()).unwrap()), -0.5);
    }
}
