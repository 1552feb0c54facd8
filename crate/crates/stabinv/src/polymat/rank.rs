//! Exact rank and image membership over the rational function field.
//!
//! Working over R(s) instead of floating point makes rank decisions
//! discrete: an entry either is or is not the zero function, so no
//! threshold can misclassify a borderline singular value. Pivot
//! columns are chosen lexicographically, which keeps the echelon
//! shape reproducible across runs.

use super::rat_matrix::RatMatrix;
use crate::error::{Error, Result};
use crate::rational::RatFn;

/// Rank over R(s) together with the pivot column indices
/// (lexicographically first independent columns).
pub fn rank_rs(m: &RatMatrix) -> (usize, Vec<usize>) {
    let mut a = m.clone();
    let rows = a.rows();
    let cols = a.cols();
    let mut pivots = Vec::new();
    let mut r = 0;
    for j in 0..cols {
        if r == rows {
            break;
        }
        // First nonzero entry in column j at or below row r.
        let pivot_row = (r..rows).find(|&i| !a[(i, j)].is_zero());
        let pi = match pivot_row {
            Some(i) => i,
            None => continue,
        };
        if pi != r {
            for c in j..cols {
                let t = a[(r, c)].clone();
                a[(r, c)] = a[(pi, c)].clone();
                a[(pi, c)] = t;
            }
        }
        let inv = a[(r, j)].inverse().expect("pivot is nonzero");
        for c in j..cols {
            a[(r, c)] = &a[(r, c)] * &inv;
        }
        for i in 0..rows {
            if i == r || a[(i, j)].is_zero() {
                continue;
            }
            let f = a[(i, j)].clone();
            for c in j..cols {
                let sub = &f * &a[(r, c)];
                a[(i, c)] = &a[(i, c)] - &sub;
            }
        }
        pivots.push(j);
        r += 1;
    }
    (r, pivots)
}

/// Tests whether every column of `y` lies in the column span of `p`
/// over R(s): rank([p | y]) == rank(p). Returns the shared rank too.
pub fn membership_im(p: &RatMatrix, y: &RatMatrix) -> (bool, usize) {
    assert_eq!(p.rows(), y.rows(), "stacked matrices need equal row counts");
    let (rp, _) = rank_rs(p);
    let aug = p.hcat(y);
    let (ra, _) = rank_rs(&aug);
    (ra == rp, rp)
}

/// Solves `p * x = y` over R(s) when a solution exists.
///
/// Returns `None` when `y` is outside the image. When the solution is
/// underdetermined the free variables are set to zero.
pub fn solve_rs(p: &RatMatrix, y: &RatMatrix) -> Option<RatMatrix> {
    assert_eq!(p.rows(), y.rows());
    let rows = p.rows();
    let cols = p.cols();
    let ycols = y.cols();
    let mut a = p.hcat(y);
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut r = 0;
    for j in 0..cols {
        if r == rows {
            break;
        }
        let pivot_row = (r..rows).find(|&i| !a[(i, j)].is_zero());
        let pi = match pivot_row {
            Some(i) => i,
            None => continue,
        };
        if pi != r {
            for c in j..cols + ycols {
                let t = a[(r, c)].clone();
                a[(r, c)] = a[(pi, c)].clone();
                a[(pi, c)] = t;
            }
        }
        let inv = a[(r, j)].inverse().expect("pivot is nonzero");
        for c in j..cols + ycols {
            a[(r, c)] = &a[(r, c)] * &inv;
        }
        for i in 0..rows {
            if i == r || a[(i, j)].is_zero() {
                continue;
            }
            let f = a[(i, j)].clone();
            for c in j..cols + ycols {
                let sub = &f * &a[(r, c)];
                a[(i, c)] = &a[(i, c)] - &sub;
            }
        }
        pivots.push((r, j));
        r += 1;
    }
    // Inconsistent system: a zero row of the coefficient block with a
    // nonzero right-hand side.
    for i in r..rows {
        for c in cols..cols + ycols {
            if !a[(i, c)].is_zero() {
                return None;
            }
        }
    }
    let mut x = RatMatrix::zeros(cols, ycols);
    for &(row, col) in &pivots {
        for k in 0..ycols {
            x[(col, k)] = a[(row, cols + k)].clone();
        }
    }
    Some(x)
}

/// Left annihilator basis: rows spanning the left null space of `p`
/// over R(s), as a (rows - rank) x rows matrix. Empty when full row
/// rank.
pub fn left_null_basis(p: &RatMatrix) -> RatMatrix {
    // Null space of p^T, transposed back.
    let pt = p.transpose();
    let rows = pt.rows();
    let cols = pt.cols();
    let mut a = pt;
    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut r = 0;
    for j in 0..cols {
        if r == rows {
            break;
        }
        let pivot_row = (r..rows).find(|&i| !a[(i, j)].is_zero());
        let pi = match pivot_row {
            Some(i) => i,
            None => continue,
        };
        if pi != r {
            for c in 0..cols {
                let t = a[(r, c)].clone();
                a[(r, c)] = a[(pi, c)].clone();
                a[(pi, c)] = t;
            }
        }
        let inv = a[(r, j)].inverse().expect("pivot is nonzero");
        for c in 0..cols {
            a[(r, c)] = &a[(r, c)] * &inv;
        }
        for i in 0..rows {
            if i == r || a[(i, j)].is_zero() {
                continue;
            }
            let f = a[(i, j)].clone();
            for c in 0..cols {
                let sub = &f * &a[(r, c)];
                a[(i, c)] = &a[(i, c)] - &sub;
            }
        }
        pivots.push((r, j));
        r += 1;
    }
    let pivot_cols: Vec<usize> = pivots.iter().map(|&(_, j)| j).collect();
    let free: Vec<usize> = (0..cols).filter(|j| !pivot_cols.contains(j)).collect();
    let mut basis = RatMatrix::zeros(free.len(), cols);
    for (k, &fj) in free.iter().enumerate() {
        basis[(k, fj)] = RatFn::one();
        for &(row, pj) in &pivots {
            basis[(k, pj)] = -&a[(row, fj)];
        }
    }
    basis
}

/// Least-squares pseudo-inverse (p^T p)^{-1} p^T over R(s), exact with
/// full cancellation. Requires full column rank; p_dagger * p = I.
pub fn pseudo_inverse(p: &RatMatrix) -> Result<RatMatrix> {
    if p.cols() > p.rows() {
        return Err(Error::Precondition(format!(
            "pseudo-inverse needs at least as many rows as columns, got {}x{}",
            p.rows(),
            p.cols()
        )));
    }
    let (rank, _) = rank_rs(p);
    if rank < p.cols() {
        return Err(Error::RankAssumption(format!(
            "rank {} below column count {}",
            rank,
            p.cols()
        )));
    }
    let pt = p.transpose();
    let gram = &pt * p;
    Ok(&gram.inverse()? * &pt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::Poly;

    fn s_plus(c: i64) -> RatFn {
        RatFn::from_poly(Poly::from_ints(&[c, 1]))
    }

    #[test]
    fn pseudo_inverse_left_identity() {
        // Tall full-column-rank plant: dagger * p must be exactly I.
        let p = RatMatrix::new(
            2,
            1,
            vec![
                RatFn::from_ints(&[-50, -5, 1], &[2, 3, 1]).unwrap(),
                RatFn::from_ints(&[-10, 1], &[2, 3, 1]).unwrap(),
            ],
        );
        let dagger = pseudo_inverse(&p).unwrap();
        assert!((&dagger * &p).is_identity());
        // Hand-reduced closed form, exact coefficient equality.
        let want = RatMatrix::new(
            1,
            2,
            vec![
                RatFn::from_ints(&[10, 17, 8, 1], &[-260, -74, 0, 1]).unwrap(),
                RatFn::from_ints(&[2, 3, 1], &[-260, -74, 0, 1]).unwrap(),
            ],
        );
        for i in 0..2 {
            assert_eq!(dagger[(0, i)], want[(0, i)]);
        }
    }

    #[test]
    fn pseudo_inverse_square_is_inverse() {
        let m = RatMatrix::new(
            2,
            2,
            vec![s_plus(1), RatFn::one(), RatFn::zero(), s_plus(2)],
        );
        let dagger = pseudo_inverse(&m).unwrap();
        assert!((&dagger * &m).is_identity());
        assert!((&m * &dagger).is_identity());
    }

    #[test]
    fn pseudo_inverse_constant_column() {
        let p = RatMatrix::new(2, 1, vec![RatFn::one(), RatFn::one()]);
        let dagger = pseudo_inverse(&p).unwrap();
        let half = RatFn::from_ints(&[1], &[2]).unwrap();
        assert_eq!(dagger[(0, 0)], half);
        assert_eq!(dagger[(0, 1)], half);
    }

    #[test]
    fn pseudo_inverse_rejects_rank_deficient() {
        let p = RatMatrix::new(2, 1, vec![RatFn::zero(), RatFn::zero()]);
        assert!(pseudo_inverse(&p).is_err());
    }

    #[test]
    fn full_rank_square() {
        let m = RatMatrix::new(
            2,
            2,
            vec![s_plus(1), RatFn::one(), RatFn::zero(), s_plus(2)],
        );
        let (r, piv) = rank_rs(&m);
        assert_eq!(r, 2);
        assert_eq!(piv, vec![0, 1]);
    }

    #[test]
    fn dependent_columns_detected() {
        // Second column = (s+3) * first column: rank 1, pivot col 0.
        let c = s_plus(3);
        let m = RatMatrix::new(
            2,
            2,
            vec![
                s_plus(1),
                &s_plus(1) * &c,
                s_plus(2),
                &s_plus(2) * &c,
            ],
        );
        let (r, piv) = rank_rs(&m);
        assert_eq!(r, 1);
        assert_eq!(piv, vec![0]);
    }

    #[test]
    fn membership_in_and_out() {
        // p: 2x1 column [1; 1/(s+1)]. y1 = (s+2)*p in the image,
        // y2 = [1; 0] not in it.
        let p = RatMatrix::new(
            2,
            1,
            vec![RatFn::one(), RatFn::from_ints(&[1], &[1, 1]).unwrap()],
        );
        let y_in = RatMatrix::new(
            2,
            1,
            vec![s_plus(2), RatFn::new(Poly::from_ints(&[2, 1]), Poly::from_ints(&[1, 1])).unwrap()],
        );
        let (ok, r) = membership_im(&p, &y_in);
        assert!(ok);
        assert_eq!(r, 1);
        let y_out = RatMatrix::new(2, 1, vec![RatFn::one(), RatFn::zero()]);
        let (ok, _) = membership_im(&p, &y_out);
        assert!(!ok);
    }

    #[test]
    fn solve_recovers_coefficients() {
        let p = RatMatrix::new(
            2,
            2,
            vec![s_plus(1), RatFn::one(), RatFn::zero(), s_plus(2)],
        );
        let x_true = RatMatrix::new(
            2,
            1,
            vec![RatFn::from_ints(&[1], &[3, 1]).unwrap(), s_plus(4)],
        );
        let y = &p * &x_true;
        let x = solve_rs(&p, &y).expect("consistent system");
        assert_eq!(x, x_true);
    }

    #[test]
    fn solve_rejects_outside_image() {
        let p = RatMatrix::new(2, 1, vec![RatFn::one(), RatFn::one()]);
        let y = RatMatrix::new(2, 1, vec![RatFn::one(), RatFn::zero()]);
        assert!(solve_rs(&p, &y).is_none());
    }

    #[test]
    fn left_null_annihilates() {
        // Tall 3x1: left null space has dimension 2.
        let p = RatMatrix::new(3, 1, vec![RatFn::one(), s_plus(1), s_plus(2)]);
        let n = left_null_basis(&p);
        assert_eq!(n.rows(), 2);
        assert_eq!(n.cols(), 3);
        let prod = &n * &p;
        assert!(prod.is_zero());
        let (r, _) = rank_rs(&n);
        assert_eq!(r, 2);
    }
}
