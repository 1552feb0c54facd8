//! Numeric root extraction for exact polynomials.
//!
//! This is the crate's designated escape hatch from exact arithmetic:
//! roots come from the eigenvalues of a balanced companion matrix, are
//! clustered into multiplicities with a relative tolerance, and are
//! symmetrized so complex roots appear in exact conjugate pairs.

use nalgebra::DMatrix;
use num::complex::Complex64;

use super::poly::{rat_to_f64, Poly, Rat};
use num::One;

/// A numeric root with its clustered multiplicity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Root {
    pub value: Complex64,
    pub multiplicity: usize,
}

/// Roots of `p` with multiplicities grouped by relative clustering
/// within `mult_tol`. Deterministic order: ascending real part, then
/// ascending imaginary part. Constants (and zero) have no roots.
pub fn poly_roots(p: &Poly, mult_tol: f64) -> Vec<Root> {
    let deg = match p.degree() {
        Some(d) if d >= 1 => d,
        _ => return vec![],
    };

    // Exact roots at the origin: factor out s^k first.
    let mut low = 0;
    while p.coeff(low) == Rat::from_integer(0.into()) {
        low += 1;
    }
    let mut raw: Vec<Complex64> = Vec::with_capacity(deg);
    for _ in 0..low {
        raw.push(Complex64::new(0.0, 0.0));
    }

    let reduced_deg = deg - low;
    if reduced_deg >= 1 {
        // Monic normalization in exact arithmetic, then conversion.
        let lead = p.coeff(deg);
        let inv = Rat::one() / lead;
        let coeffs: Vec<f64> = (low..deg)
            .map(|i| rat_to_f64(&(&p.coeff(i) * &inv)))
            .collect();
        raw.extend(companion_eigenvalues(&coeffs));
    }

    cluster_roots(&mut raw, mult_tol)
}

/// Eigenvalues of the companion matrix of the monic polynomial
/// `s^n + c[n-1] s^(n-1) + ... + c[0]`, after Parlett-Reinsch balancing.
fn companion_eigenvalues(c: &[f64]) -> Vec<Complex64> {
    let n = c.len();
    if n == 1 {
        return vec![Complex64::new(-c[0], 0.0)];
    }
    if n == 2 {
        // Solve directly for accuracy on the common quadratic case.
        let (b, a) = (c[1], c[0]);
        let disc = b * b - 4.0 * a;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            // Stable form avoiding cancellation.
            let q = -0.5 * (b + b.signum() * sq);
            let (r1, r2) = if b == 0.0 {
                let r = (-a).max(0.0).sqrt();
                (r, -r)
            } else if q != 0.0 {
                (q, a / q)
            } else {
                (0.0, 0.0)
            };
            return vec![Complex64::new(r1, 0.0), Complex64::new(r2, 0.0)];
        }
        let sq = (-disc).sqrt();
        return vec![
            Complex64::new(-b / 2.0, sq / 2.0),
            Complex64::new(-b / 2.0, -sq / 2.0),
        ];
    }
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        m[(i, n - 1)] = -c[i];
    }
    balance_in_place(&mut m);
    m.complex_eigenvalues().iter().copied().collect()
}

/// Diagonal similarity scaling by powers of two so row and column
/// norms agree; improves eigenvalue accuracy without rounding error.
pub(crate) fn balance_in_place(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    let radix = 2.0_f64;
    let mut done = false;
    let mut sweeps = 0;
    while !done && sweeps < 100 {
        done = true;
        sweeps += 1;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].abs();
                    r += m[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let mut f = 1.0;
            let mut cc = c;
            let s = c + r;
            while cc < r / radix {
                f *= radix;
                cc *= radix * radix;
            }
            while cc > r * radix {
                f /= radix;
                cc /= radix * radix;
            }
            if (c * f + r / f) < 0.95 * s {
                done = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                }
                for j in 0..n {
                    m[(j, i)] *= f;
                }
            }
        }
    }
}

fn cluster_roots(raw: &mut [Complex64], mult_tol: f64) -> Vec<Root> {
    // Greedy union into clusters under a relative metric.
    let mut clusters: Vec<Vec<Complex64>> = Vec::new();
    for &z in raw.iter() {
        let mut placed = false;
        for cl in clusters.iter_mut() {
            let centroid = cl.iter().sum::<Complex64>() / cl.len() as f64;
            let scale = 1.0_f64.max(centroid.norm()).max(z.norm());
            if (z - centroid).norm() <= mult_tol * scale {
                cl.push(z);
                placed = true;
                break;
            }
        }
        if !placed {
            clusters.push(vec![z]);
        }
    }

    let mut roots: Vec<Root> = clusters
        .into_iter()
        .map(|cl| {
            let centroid = cl.iter().sum::<Complex64>() / cl.len() as f64;
            Root {
                value: centroid,
                multiplicity: cl.len(),
            }
        })
        .collect();

    // Force conjugate symmetry: snap near-real roots onto the axis and
    // average complex pairs.
    for r in roots.iter_mut() {
        let scale = 1.0_f64.max(r.value.norm());
        if r.value.im.abs() <= mult_tol * scale {
            r.value.im = 0.0;
        }
    }
    let mut paired = vec![false; roots.len()];
    for i in 0..roots.len() {
        if paired[i] || roots[i].value.im <= 0.0 {
            continue;
        }
        let conj = roots[i].value.conj();
        let mut best: Option<(usize, f64)> = None;
        for j in 0..roots.len() {
            if j == i || paired[j] || roots[j].value.im >= 0.0 {
                continue;
            }
            let d = (roots[j].value - conj).norm();
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        if let Some((j, _)) = best {
            let re = 0.5 * (roots[i].value.re + roots[j].value.re);
            let im = 0.5 * (roots[i].value.im - roots[j].value.im);
            roots[i].value = Complex64::new(re, im);
            roots[j].value = Complex64::new(re, -im);
            paired[i] = true;
            paired[j] = true;
        }
    }

    roots.sort_by(|a, b| {
        (a.value.re, a.value.im)
            .partial_cmp(&(b.value.re, b.value.im))
            .expect("finite roots")
    });
    roots
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tol;

    fn roots_of(c: &[i64]) -> Vec<Root> {
        poly_roots(&Poly::from_ints(c), tol::MULT_TOL)
    }

    #[test]
    fn linear_and_quadratic() {
        let r = roots_of(&[-10, 1]);
        assert_eq!(r.len(), 1);
        assert!((r[0].value.re - 10.0).abs() < 1e-12 && r[0].value.im == 0.0);

        // s^2 + 1 -> exact conjugate pair
        let r = roots_of(&[1, 0, 1]);
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].value, r[1].value.conj());
        assert!((r[0].value.im.abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cubic_with_known_roots() {
        // s^3 - 74s - 260 = (s-10)(s^2+10s+26), roots 10, -5 +/- i
        let r = roots_of(&[-260, -74, 0, 1]);
        assert_eq!(r.len(), 3);
        assert!((r[0].value - Complex64::new(-5.0, -1.0)).norm() < 1e-9);
        assert!((r[1].value - Complex64::new(-5.0, 1.0)).norm() < 1e-9);
        assert!((r[2].value - Complex64::new(10.0, 0.0)).norm() < 1e-9);
        assert!(r.iter().all(|x| x.multiplicity == 1));
    }

    #[test]
    fn multiplicities_cluster() {
        // (s+1)^3 (s-2)^2
        let p = &Poly::from_ints(&[1, 1]).pow(3) * &Poly::from_ints(&[-2, 1]).pow(2);
        let r = poly_roots(&p, 1e-4);
        assert_eq!(r.len(), 2);
        assert_eq!(r[0].multiplicity, 3);
        assert!((r[0].value.re + 1.0).abs() < 1e-4);
        assert_eq!(r[1].multiplicity, 2);
        assert!((r[1].value.re - 2.0).abs() < 1e-6);
    }

    #[test]
    fn roots_at_origin_are_exact() {
        // s^2 (s+3)
        let p = Poly::from_ints(&[0, 0, 3, 1]);
        let r = poly_roots(&p, tol::MULT_TOL);
        assert_eq!(r.len(), 2);
        assert!((r[0].value.re + 3.0).abs() < 1e-12);
        assert_eq!(r[1].value, Complex64::new(0.0, 0.0));
        assert_eq!(r[1].multiplicity, 2);
    }

    #[test]
    fn constants_have_no_roots() {
        assert!(roots_of(&[5]).is_empty());
        assert!(poly_roots(&Poly::zero(), tol::MULT_TOL).is_empty());
    }

    #[test]
    fn wide_magnitude_spread() {
        // (s+1e-4)(s+1e4): balancing keeps both accurate
        let p = &Poly::from_f64s(&[1e-4, 1.0]) * &Poly::from_f64s(&[1e4, 1.0]);
        let r = poly_roots(&p, tol::MULT_TOL);
        assert_eq!(r.len(), 2);
        assert!((r[0].value.re + 1e4).abs() / 1e4 < 1e-10);
        assert!((r[1].value.re + 1e-4).abs() / 1e-4 < 1e-6);
    }
}
