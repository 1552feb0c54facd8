//! Zero structure of multivariable systems.
//!
//! Transmission zeros of an exact rational matrix come from the
//! diagonal form of its cleared numerator matrix: divide each
//! invariant factor by the common denominator, reduce, and read the
//! roots off the surviving numerators. That route is exact up to the
//! final scalar root find, and in particular the zero count and the
//! pole cancellation pattern are decided in rational arithmetic.
//!
//! For a realization given only as floats, zeros are eigenvalues of
//! the system pencil. There is no generalized eigensolver here, so a
//! regular square pencil is handled by shift and invert: pick a shift
//! where the pencil is nonsingular and read finite eigenvalues off a
//! standard eigenproblem. Every candidate is then confirmed by a rank
//! drop test, which also screens the spurious values the shift trick
//! can produce. Nonsquare or irregular pencils fall back to the exact
//! route through the transfer matrix, which reports transmission
//! zeros only.

use nalgebra::DMatrix;
use num::complex::Complex64;
use serde::{Deserialize, Serialize};

use super::linalg::balanced_eigenvalues;
use super::realize::ss_to_tfm;
use super::ss::StateSpace;
use crate::polymat::{smith_form, RatMatrix};
use crate::rational::{poly_roots, Poly, RatFn, Root};
use crate::tol::{MULT_TOL, STAB_MARGIN};

/// One zero with its multiplicity and, when they are well defined,
/// the input and output directions at the zero.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ZeroInfo {
    pub re: f64,
    pub im: f64,
    pub multiplicity: usize,
    /// Right singular direction of the system value at the zero;
    /// absent when the zero coincides with a pole.
    pub input_direction: Option<Vec<(f64, f64)>>,
    pub output_direction: Option<Vec<(f64, f64)>>,
    /// True when the zero sits on top of a pole, where a direction
    /// from the transfer matrix value is meaningless.
    pub at_pole: bool,
}

impl ZeroInfo {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    /// A zero that no stable proper inverse can cancel: real part to
    /// the right of the stability margin.
    pub fn is_unstable_region(&self) -> bool {
        self.re >= -STAB_MARGIN
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ZeroSet {
    pub zeros: Vec<ZeroInfo>,
}

impl ZeroSet {
    pub fn unstable(&self) -> Vec<&ZeroInfo> {
        self.zeros.iter().filter(|z| z.is_unstable_region()).collect()
    }

    pub fn is_minimum_phase(&self) -> bool {
        self.unstable().is_empty()
    }

    pub fn values(&self) -> Vec<Complex64> {
        self.zeros.iter().map(|z| z.value()).collect()
    }
}

/// Clusters roots collected from several factors, adding up
/// multiplicities of coincident values.
fn merge_roots(mut roots: Vec<Root>) -> Vec<Root> {
    roots.sort_by(|a, b| {
        (a.value.re, a.value.im)
            .partial_cmp(&(b.value.re, b.value.im))
            .unwrap()
    });
    let mut out: Vec<Root> = Vec::new();
    for r in roots {
        match out.last_mut() {
            Some(last)
                if (last.value - r.value).norm() <= MULT_TOL * (1.0 + last.value.norm()) =>
            {
                last.multiplicity += r.multiplicity;
            }
            _ => out.push(r),
        }
    }
    out
}

/// Smith–McMillan fractions d_i / delta in lowest terms.
pub(crate) fn smith_mcmillan_fractions(p: &RatMatrix) -> Vec<RatFn> {
    let (n, delta) = p.clear_denominators();
    let d = smith_form(&n);
    d.invariant_factors()
        .into_iter()
        .map(|di| RatFn::new(di, delta.clone()).expect("lcm denominator is nonzero"))
        .collect()
}

/// Transmission zeros of a rational matrix, with directions.
pub fn transmission_zeros(p: &RatMatrix) -> ZeroSet {
    let fractions = smith_mcmillan_fractions(p);
    let mut zero_roots = Vec::new();
    let mut pole_roots = Vec::new();
    for f in &fractions {
        zero_roots.extend(poly_roots(f.num(), MULT_TOL));
        pole_roots.extend(poly_roots(f.den(), MULT_TOL));
    }
    let zeros = merge_roots(zero_roots);
    let poles = merge_roots(pole_roots);
    let infos = zeros
        .into_iter()
        .map(|z| {
            let at_pole = poles
                .iter()
                .any(|p| (p.value - z.value).norm() <= MULT_TOL * (1.0 + z.value.norm()));
            let (input_direction, output_direction) = if at_pole {
                (None, None)
            } else {
                directions_from_value(&p.eval(z.value))
            };
            ZeroInfo {
                re: z.value.re,
                im: z.value.im,
                multiplicity: z.multiplicity,
                input_direction,
                output_direction,
                at_pole,
            }
        })
        .collect();
    ZeroSet { zeros: infos }
}

/// Poles of a rational matrix as roots of the Smith–McMillan
/// denominators, multiplicities summed across the diagonal.
pub(crate) fn rational_pole_set(p: &RatMatrix) -> Vec<Root> {
    let mut pole_roots = Vec::new();
    for f in smith_mcmillan_fractions(p) {
        pole_roots.extend(poly_roots(f.den(), MULT_TOL));
    }
    merge_roots(pole_roots)
}

/// Singular directions at the smallest singular value of a complex
/// matrix, phase normalized so the largest entry is real positive.
fn directions_from_value(
    value: &DMatrix<Complex64>,
) -> (Option<Vec<(f64, f64)>>, Option<Vec<(f64, f64)>>) {
    if value.iter().any(|e| !e.re.is_finite() || !e.im.is_finite()) {
        return (None, None);
    }
    let svd = value.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let min_idx = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .expect("nonempty spectrum");
    let input: Vec<Complex64> = vt.row(min_idx).iter().map(|c| c.conj()).collect();
    let output: Vec<Complex64> = u.column(min_idx).iter().copied().collect();
    (Some(phase_normalize(input)), Some(phase_normalize(output)))
}

fn phase_normalize(mut v: Vec<Complex64>) -> Vec<(f64, f64)> {
    let lead = v
        .iter()
        .copied()
        .max_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap())
        .unwrap_or(Complex64::new(1.0, 0.0));
    if lead.norm() > 0.0 {
        let phase = lead / lead.norm();
        for e in v.iter_mut() {
            *e /= phase;
        }
    }
    v.into_iter().map(|c| (c.re, c.im)).collect()
}

/// System pencil [[zI - A, -B], [C, D]] evaluated at z.
fn pencil_value(ss: &StateSpace, z: Complex64) -> DMatrix<Complex64> {
    let n = ss.n_states();
    let (p, m) = (ss.n_outputs(), ss.n_inputs());
    let mut r = DMatrix::<Complex64>::zeros(n + p, n + m);
    for i in 0..n {
        for j in 0..n {
            r[(i, j)] = Complex64::new(-ss.a[(i, j)], 0.0);
        }
        r[(i, i)] += z;
        for j in 0..m {
            r[(i, n + j)] = Complex64::new(-ss.b[(i, j)], 0.0);
        }
    }
    for i in 0..p {
        for j in 0..n {
            r[(n + i, j)] = Complex64::new(ss.c[(i, j)], 0.0);
        }
        for j in 0..m {
            r[(n + i, n + j)] = Complex64::new(ss.d[(i, j)], 0.0);
        }
    }
    r
}

/// Relative rank drop of the pencil at z: smallest singular value
/// over the largest.
fn pencil_rank_gap(ss: &StateSpace, z: Complex64) -> f64 {
    let sv = pencil_value(ss, z).svd(false, false).singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if smax == 0.0 {
        0.0
    } else {
        smin / smax
    }
}

/// Zeros of a state space realization.
///
/// Square systems with a regular pencil use shift and invert plus a
/// rank confirmation. Everything else is routed through the exact
/// transfer matrix, which reports transmission zeros.
pub fn invariant_zeros(ss: &StateSpace) -> ZeroSet {
    let n = ss.n_states();
    let (p, m) = (ss.n_outputs(), ss.n_inputs());
    if p == m {
        if let Some(set) = square_pencil_zeros(ss, n, m) {
            return set;
        }
    }
    transmission_zeros(&ss_to_tfm(ss))
}

fn square_pencil_zeros(ss: &StateSpace, n: usize, m: usize) -> Option<ZeroSet> {
    let dim = n + m;
    // M = [[A, B], [-C, -D]], N = diag(I, 0); zeros solve M v = z N v.
    let mut mm = DMatrix::<f64>::zeros(dim, dim);
    mm.view_mut((0, 0), (n, n)).copy_from(&ss.a);
    mm.view_mut((0, n), (n, m)).copy_from(&ss.b);
    mm.view_mut((n, 0), (m, n)).copy_from(&(-&ss.c));
    mm.view_mut((n, n), (m, m)).copy_from(&(-&ss.d));
    let scale = mm.iter().map(|x| x.abs()).fold(1.0, f64::max);
    // Regularity probe: an identically singular pencil drops rank at
    // a generic point too, and must go through the exact route, since
    // the rank confirmation below would then pass any candidate.
    let probe = Complex64::new(0.7890123, 0.6543211) * scale;
    if pencil_rank_gap(ss, probe) < 1e-10 {
        return None;
    }
    // Deterministic shift sequence, scaled to the data.
    let shifts = [1.2345678, -2.7182818, 3.1415927, -0.5772157, 4.6692016];
    for &raw in &shifts {
        let sigma = raw * scale;
        let mut shifted = mm.clone();
        for i in 0..n {
            shifted[(i, i)] -= sigma;
        }
        let lu = shifted.lu();
        let logdet: f64 = lu.u().diagonal().iter().map(|d| d.abs().ln()).sum();
        if !logdet.is_finite() {
            continue; // singular at this shift, try the next
        }
        // T = (M - sigma N)^{-1} N: eigenvalues mu = 1/(z - sigma).
        let mut nmat = DMatrix::<f64>::zeros(dim, dim);
        for i in 0..n {
            nmat[(i, i)] = 1.0;
        }
        let t = match lu.solve(&nmat) {
            Some(t) => t,
            None => continue,
        };
        let mus = balanced_eigenvalues(&t);
        let mu_max = mus.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let mut candidates = Vec::new();
        for mu in mus {
            if mu.norm() <= 1e-9 * mu_max.max(1.0) {
                continue; // eigenvalue at infinity
            }
            candidates.push(Root {
                value: Complex64::new(sigma, 0.0) + mu.inv(),
                multiplicity: 1,
            });
        }
        let clustered = merge_roots(candidates);
        let confirmed: Vec<Root> = clustered
            .into_iter()
            .filter(|z| pencil_rank_gap(ss, z.value) < 1e-6)
            .collect();
        let infos = confirmed
            .into_iter()
            .map(|z| {
                let value = match ss.eval(z.value) {
                    Ok(v) => Some(v),
                    Err(_) => None,
                };
                let at_pole = value.is_none()
                    || ss
                        .poles()
                        .iter()
                        .any(|p| (p - z.value).norm() <= MULT_TOL * (1.0 + z.value.norm()));
                let (input_direction, output_direction) = match (&value, at_pole) {
                    (Some(v), false) => directions_from_value(v),
                    _ => (None, None),
                };
                ZeroInfo {
                    re: z.value.re,
                    im: z.value.im,
                    multiplicity: z.multiplicity,
                    input_direction,
                    output_direction,
                    at_pole,
                }
            })
            .collect();
        return Some(ZeroSet { zeros: infos });
    }
    None
}

/// All pass polynomial with the mirror images of the given points:
/// real points contribute (s + x), conjugate pairs a real quadratic.
/// Used to reflect unstable zeros into the left half plane.
pub fn mirror_polynomial(points: &[Root]) -> Poly {
    let mut out = Poly::one();
    let mut used = vec![false; points.len()];
    for (i, r) in points.iter().enumerate() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let z = r.value;
        if z.im.abs() <= MULT_TOL * (1.0 + z.norm()) {
            // (s + re)^mult
            let lin = Poly::from_f64s(&[z.re, 1.0]);
            for _ in 0..r.multiplicity {
                out = &out * &lin;
            }
        } else {
            // Pair with the conjugate: s^2 + 2 re s + |z|^2.
            if let Some((j, _)) = points.iter().enumerate().find(|(j, c)| {
                !used[*j] && (c.value - z.conj()).norm() <= MULT_TOL * (1.0 + z.norm())
            }) {
                used[j] = true;
            }
            let quad = Poly::from_f64s(&[z.norm_sqr(), 2.0 * z.re, 1.0]);
            for _ in 0..r.multiplicity {
                out = &out * &quad;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::parse_rat;
    use crate::rational::Rat;
    use nalgebra::DMatrix;

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

    use num::One;

    #[test]
    fn benchmark_plant_transmission_zeros() {
        // det numerator (1-s)(2s^2 + 5.3s + 2.9): zeros at 1 and at
        // (-5.3 +- sqrt(4.89))/4.
        let zs = transmission_zeros(&benchmark_plant());
        assert_eq!(zs.zeros.len(), 3);
        let mut res: Vec<f64> = zs.zeros.iter().map(|z| z.re).collect();
        res.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let r = 4.89f64.sqrt();
        assert!((res[0] - (-5.3 - r) / 4.0).abs() < 1e-9);
        assert!((res[1] - (-5.3 + r) / 4.0).abs() < 1e-9);
        assert!((res[2] - 1.0).abs() < 1e-9);
        assert!(zs.zeros.iter().all(|z| z.im.abs() < 1e-12));
        let unstable = zs.unstable();
        assert_eq!(unstable.len(), 1);
        assert!((unstable[0].re - 1.0).abs() < 1e-9);
        assert!(!zs.is_minimum_phase());
        // Directions exist away from poles and have unit length.
        let u = unstable[0].input_direction.as_ref().unwrap();
        let norm: f64 = u.iter().map(|(re, im)| re * re + im * im).sum();
        assert!((norm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn tall_column_zero() {
        // [(s+5)/(s+1); 1/(s+1)] loses rank only where both entries
        // vanish together: nowhere. Appending the common factor
        // (s-10) to both numerators puts one zero at +10.
        let p = RatMatrix::new(
            2,
            1,
            vec![
                RatFn::new(
                    &Poly::from_ints(&[5, 1]) * &Poly::from_ints(&[-10, 1]),
                    Poly::from_ints(&[1, 2, 1]),
                )
                .unwrap(),
                RatFn::new(Poly::from_ints(&[-10, 1]), Poly::from_ints(&[1, 2, 1])).unwrap(),
            ],
        );
        let zs = transmission_zeros(&p);
        assert_eq!(zs.zeros.len(), 1);
        assert!((zs.zeros[0].re - 10.0).abs() < 1e-9);
        assert_eq!(zs.zeros[0].multiplicity, 1);
    }

    #[test]
    fn pencil_zeros_match_exact_route() {
        // G = (s-1)/(s+2): one zero at +1, from both computations.
        let ss = StateSpace::new(
            DMatrix::from_row_slice(1, 1, &[-2.0]),
            DMatrix::from_row_slice(1, 1, &[1.0]),
            DMatrix::from_row_slice(1, 1, &[-3.0]),
            DMatrix::from_row_slice(1, 1, &[1.0]),
        )
        .unwrap();
        let zs = invariant_zeros(&ss);
        assert_eq!(zs.zeros.len(), 1);
        assert!((zs.zeros[0].re - 1.0).abs() < 1e-7);
        let exact = transmission_zeros(&ss_to_tfm(&ss));
        assert_eq!(exact.zeros.len(), 1);
        assert!((exact.zeros[0].re - 1.0).abs() < 1e-9);
    }

    #[test]
    fn mimo_pencil_zeros() {
        // diag((s-1)/(s+2), (s+3)/(s+4)): zeros at 1 and -3.
        let a = DMatrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, -4.0]);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let c = DMatrix::from_row_slice(2, 2, &[-3.0, 0.0, 0.0, -1.0]);
        let d = DMatrix::identity(2, 2);
        let ss = StateSpace::new(a, b, c, d).unwrap();
        let zs = invariant_zeros(&ss);
        let mut vals: Vec<f64> = zs.zeros.iter().map(|z| z.re).collect();
        vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_eq!(zs.zeros.len(), 2);
        assert!((vals[0] + 3.0).abs() < 1e-7);
        assert!((vals[1] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn mirror_reflects_pairs() {
        let pts = vec![
            Root {
                value: Complex64::new(1.0, 2.0),
                multiplicity: 1,
            },
            Root {
                value: Complex64::new(1.0, -2.0),
                multiplicity: 1,
            },
            Root {
                value: Complex64::new(3.0, 0.0),
                multiplicity: 2,
            },
        ];
        let m = mirror_polynomial(&pts);
        // (s^2 + 2s + 5)(s + 3)^2
        let expect = &Poly::from_ints(&[5, 2, 1]) * &Poly::from_ints(&[9, 6, 1]);
        assert_eq!(m, expect);
    }
}
