//! Smith normal form over the real polynomial ring, with certificates.
//!
//! `smith_form` factors a polynomial matrix `P = U * S * V` where `U`
//! and `V` are unimodular, `S` is diagonal with monic invariant factors
//! `d_1 | d_2 | ... | d_r`, and the inverses of both certificates are
//! accumulated alongside, so downstream constructions never invert a
//! polynomial matrix numerically. All arithmetic is exact.
//!
//! Pivot selection: minimum degree first, ties broken by smallest
//! coefficient bit-size, then by position. This keeps coefficient
//! growth in check on random inputs without sacrificing determinism.

use serde::{Deserialize, Serialize};

use super::poly_matrix::PolyMatrix;
use crate::rational::{Poly, Rat};
use num::One;

/// Result of `smith_form`: `u * s * v` reproduces the input exactly,
/// `u_inv * u = I` and `v_inv * v = I`.
#[derive(Clone, Debug)]
pub struct SmithDecomposition {
    pub u: PolyMatrix,
    pub s: PolyMatrix,
    pub v: PolyMatrix,
    pub u_inv: PolyMatrix,
    pub v_inv: PolyMatrix,
}

impl SmithDecomposition {
    /// Nonzero diagonal entries, in divisibility order.
    pub fn invariant_factors(&self) -> Vec<Poly> {
        let r = self.rank();
        (0..r).map(|i| self.s[(i, i)].clone()).collect()
    }

    /// Normal rank: number of nonzero invariant factors.
    pub fn rank(&self) -> usize {
        let n = self.s.rows().min(self.s.cols());
        (0..n).take_while(|&i| !self.s[(i, i)].is_zero()).count()
    }
}

/// Serializable summary of a Smith analysis (certificates omitted).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SmithSummary {
    pub rank: usize,
    pub invariant_factors: Vec<Poly>,
}

struct Worker {
    s: PolyMatrix,
    u: PolyMatrix,
    u_inv: PolyMatrix,
    v: PolyMatrix,
    v_inv: PolyMatrix,
}

impl Worker {
    fn new(p: &PolyMatrix) -> Self {
        Worker {
            s: p.clone(),
            u: PolyMatrix::identity(p.rows()),
            u_inv: PolyMatrix::identity(p.rows()),
            v: PolyMatrix::identity(p.cols()),
            v_inv: PolyMatrix::identity(p.cols()),
        }
    }

    fn row_swap(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.s.cols() {
            let t = self.s[(a, j)].clone();
            self.s[(a, j)] = self.s[(b, j)].clone();
            self.s[(b, j)] = t;
        }
        for j in 0..self.u_inv.cols() {
            let t = self.u_inv[(a, j)].clone();
            self.u_inv[(a, j)] = self.u_inv[(b, j)].clone();
            self.u_inv[(b, j)] = t;
        }
        for i in 0..self.u.rows() {
            let t = self.u[(i, a)].clone();
            self.u[(i, a)] = self.u[(i, b)].clone();
            self.u[(i, b)] = t;
        }
    }

    fn col_swap(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.s.rows() {
            let t = self.s[(i, a)].clone();
            self.s[(i, a)] = self.s[(i, b)].clone();
            self.s[(i, b)] = t;
        }
        for i in 0..self.v_inv.rows() {
            let t = self.v_inv[(i, a)].clone();
            self.v_inv[(i, a)] = self.v_inv[(i, b)].clone();
            self.v_inv[(i, b)] = t;
        }
        for j in 0..self.v.cols() {
            let t = self.v[(a, j)].clone();
            self.v[(a, j)] = self.v[(b, j)].clone();
            self.v[(b, j)] = t;
        }
    }

    /// row a <- row a - q * row b
    fn row_axpy(&mut self, a: usize, b: usize, q: &Poly) {
        if q.is_zero() {
            return;
        }
        for j in 0..self.s.cols() {
            self.s[(a, j)] = &self.s[(a, j)] - &(q * &self.s[(b, j)]);
        }
        for j in 0..self.u_inv.cols() {
            self.u_inv[(a, j)] = &self.u_inv[(a, j)] - &(q * &self.u_inv[(b, j)]);
        }
        // U <- U * E^{-1}: column b of U gains q * column a.
        for i in 0..self.u.rows() {
            let add = q * &self.u[(i, a)];
            self.u[(i, b)] = &self.u[(i, b)] + &add;
        }
    }

    /// col a <- col a - q * col b
    fn col_axpy(&mut self, a: usize, b: usize, q: &Poly) {
        if q.is_zero() {
            return;
        }
        for i in 0..self.s.rows() {
            self.s[(i, a)] = &self.s[(i, a)] - &(q * &self.s[(i, b)]);
        }
        for i in 0..self.v_inv.rows() {
            self.v_inv[(i, a)] = &self.v_inv[(i, a)] - &(q * &self.v_inv[(i, b)]);
        }
        // V <- F^{-1} * V: row b of V gains q * row a.
        for j in 0..self.v.cols() {
            let add = q * &self.v[(a, j)];
            self.v[(b, j)] = &self.v[(b, j)] + &add;
        }
    }

    /// row i scaled by nonzero constant c (a unit of the ring).
    fn row_scale(&mut self, i: usize, c: &Rat) {
        let inv = Rat::one() / c.clone();
        for j in 0..self.s.cols() {
            self.s[(i, j)] = self.s[(i, j)].scale(c);
        }
        for j in 0..self.u_inv.cols() {
            self.u_inv[(i, j)] = self.u_inv[(i, j)].scale(c);
        }
        for r in 0..self.u.rows() {
            self.u[(r, i)] = self.u[(r, i)].scale(&inv);
        }
    }

    /// Best pivot in the trailing region: minimal degree, then minimal
    /// coefficient bit-size, then row-major position.
    fn find_pivot(&self, t: usize) -> Option<(usize, usize)> {
        let mut best: Option<(usize, u64, usize, usize)> = None;
        for i in t..self.s.rows() {
            for j in t..self.s.cols() {
                let e = &self.s[(i, j)];
                if e.is_zero() {
                    continue;
                }
                let key = (e.deg_or_zero(), e.height_bits());
                match best {
                    Some((d, h, _, _)) if (key.0, key.1) >= (d, h) => {}
                    _ => best = Some((key.0, key.1, i, j)),
                }
            }
        }
        best.map(|(_, _, i, j)| (i, j))
    }
}

/// Computes the Smith normal form with unimodular certificates.
pub fn smith_form(p: &PolyMatrix) -> SmithDecomposition {
    let mut w = Worker::new(p);
    let rows = p.rows();
    let cols = p.cols();
    let steps = rows.min(cols);

    let mut t = 0;
    while t < steps {
        let (pi, pj) = match w.find_pivot(t) {
            Some(x) => x,
            None => break, // trailing region is zero
        };
        w.row_swap(t, pi);
        w.col_swap(t, pj);

        // Euclidean descent: reduce column and row against the pivot
        // until both are clear; each pass strictly reduces the pivot
        // degree when a nonzero remainder appears.
        loop {
            let mut dirty = false;
            for i in t + 1..rows {
                if w.s[(i, t)].is_zero() {
                    continue;
                }
                let (q, r) = w.s[(i, t)].div_rem(&w.s[(t, t)]).expect("pivot nonzero");
                w.row_axpy(i, t, &q);
                debug_assert_eq!(w.s[(i, t)], r);
                if !r.is_zero() {
                    w.row_swap(t, i);
                    dirty = true;
                }
            }
            for j in t + 1..cols {
                if w.s[(t, j)].is_zero() {
                    continue;
                }
                let (q, r) = w.s[(t, j)].div_rem(&w.s[(t, t)]).expect("pivot nonzero");
                w.col_axpy(j, t, &q);
                debug_assert_eq!(w.s[(t, j)], r);
                if !r.is_zero() {
                    w.col_swap(t, j);
                    dirty = true;
                }
            }
            if !dirty {
                break;
            }
        }

        // Divisibility pass: the pivot must divide every remaining
        // entry; fold offending rows in and re-eliminate.
        let mut offender = None;
        'scan: for i in t + 1..rows {
            for j in t + 1..cols {
                if !w.s[(i, j)].is_zero() && !w.s[(i, j)].divisible_by(&w.s[(t, t)]) {
                    offender = Some(i);
                    break 'scan;
                }
            }
        }
        if let Some(i) = offender {
            // row t <- row t + row i, then repeat stage t.
            let minus_one = Poly::constant(Rat::from_integer((-1).into()));
            w.row_axpy(t, i, &minus_one);
            continue;
        }

        t += 1;
    }

    // Monic normalization of the invariant factors.
    for i in 0..steps {
        if w.s[(i, i)].is_zero() {
            break;
        }
        let lc = w.s[(i, i)].leading();
        if !lc.is_one() {
            let inv = Rat::one() / lc;
            w.row_scale(i, &inv);
        }
    }

    SmithDecomposition {
        u: w.u,
        s: w.s,
        v: w.v,
        u_inv: w.u_inv,
        v_inv: w.v_inv,
    }
}
