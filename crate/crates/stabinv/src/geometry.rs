//! The L2 geometry of rational vector functions on the imaginary axis.
//!
//! A strictly proper stable vector F has finite energy
//! (1/2pi) integral of |F(jw)|^2 over the axis, which makes the span of
//! a plant's columns an inner-product space. This module computes that
//! inner product two independent ways and insists they agree: a
//! Sylvester equation on state-space realizations (exact up to linear
//! algebra) and adaptive quadrature over a compactified frequency axis.
//! On top of the inner product sit modified Gram-Schmidt with real
//! scalar coefficients, orthogonal projection with its residual energy,
//! and the contraction margin that certifies convergence of the
//! perturbed-plant fixed-point iteration.
//!
//! The projection here is deliberately onto the r-dimensional REAL span
//! of the orthonormalized columns, not the module they generate over
//! the rational functions. A vector can be reachable through the plant
//! in the rational-algebra sense while still carrying nonzero residual
//! against the real span; callers that need both verdicts compute
//! membership separately and report the pair.

use num::complex::Complex64;

use crate::error::{Error, Result};
use crate::inversion::AllPass;
use crate::lti::{hinf_norm, minimal, realize, sylvester};
use crate::polymat::RatMatrix;
use crate::rational::rat_from_f64;
use crate::tol::{DEGENERATE_TOL_REL, ORTH_TOL, QUAD_TOL, STAB_MARGIN};

/// Admission test for the inner product: a column vector, strictly
/// proper in every entry, with every pole strictly inside the left
/// half-plane. Marginal poles (steps, sinusoids) have infinite energy
/// and are rejected; persistent content is handled in the time domain.
fn require_l2(f: &RatMatrix, what: &str) -> Result<()> {
    if f.cols() != 1 {
        return Err(Error::Dimension(format!(
            "{what} must be a column vector, got {}x{}",
            f.rows(),
            f.cols()
        )));
    }
    for e in f.entries() {
        if e.is_zero() {
            continue;
        }
        if !e.is_strictly_proper() {
            return Err(Error::Precondition(format!(
                "{what} is not strictly proper, so it has no finite energy"
            )));
        }
        for p in e.poles() {
            if p.value.re >= -STAB_MARGIN {
                return Err(Error::Precondition(format!(
                    "{what} has a pole at {} + {}j outside the open left half-plane",
                    p.value.re, p.value.im
                )));
            }
        }
    }
    Ok(())
}

/// L2 inner product of two rational column vectors, computed through a
/// Sylvester equation and cross-validated against quadrature. The two
/// must agree to one part in a million or the call fails rather than
/// return a number one method disputes.
pub fn l2_inner(f: &RatMatrix, g: &RatMatrix) -> Result<f64> {
    require_l2(f, "the left factor")?;
    require_l2(g, "the right factor")?;
    if f.rows() != g.rows() {
        return Err(Error::Dimension(format!(
            "inner product of a {}-row and a {}-row vector",
            f.rows(),
            g.rows()
        )));
    }
    if f.is_zero() || g.is_zero() {
        return Ok(0.0);
    }
    let fs = realize(f)?;
    let gs = realize(g)?;
    let q = fs.c.transpose() * &gs.c;
    let x = sylvester(&fs.a.transpose(), &gs.a, &q)?;
    let val = (fs.b.transpose() * x * &gs.b)[(0, 0)];
    let quad = l2_inner_quadrature(f, g)?;
    let gate = 1e-6 + 1e-6 * val.abs().max(quad.abs());
    if (val - quad).abs() > gate {
        return Err(Error::Numerical(format!(
            "inner product methods disagree: sylvester {val:.12e} vs quadrature {quad:.12e}"
        )));
    }
    Ok(val)
}

/// The same inner product by adaptive Simpson quadrature after the
/// substitution w = tan(theta), which compactifies the axis. Exposed
/// so the two methods can be compared independently.
pub fn l2_inner_quadrature(f: &RatMatrix, g: &RatMatrix) -> Result<f64> {
    require_l2(f, "the left factor")?;
    require_l2(g, "the right factor")?;
    if f.rows() != g.rows() {
        return Err(Error::Dimension(format!(
            "inner product of a {}-row and a {}-row vector",
            f.rows(),
            g.rows()
        )));
    }
    if f.is_zero() || g.is_zero() {
        return Ok(0.0);
    }
    let integrand = |theta: f64| -> f64 {
        let omega = theta.tan();
        let sec2 = 1.0 + omega * omega;
        let fv = f.eval(Complex64::new(0.0, omega));
        let gv = g.eval(Complex64::new(0.0, omega));
        let mut acc = 0.0;
        for k in 0..f.rows() {
            acc += (fv[(k, 0)].conj() * gv[(k, 0)]).re;
        }
        acc * sec2
    };
    let half = std::f64::consts::FRAC_PI_2 - 1e-9;
    let (a, b) = (-half, half);
    let (fa, fb) = (integrand(a), integrand(b));
    let m = 0.5 * (a + b);
    let fm = integrand(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let scale = 1.0 + whole.abs();
    let total = adaptive_simpson(&integrand, a, b, fa, fm, fb, whole, QUAD_TOL * scale, 48);
    Ok(total / (2.0 * std::f64::consts::PI))
}

#[allow(clippy::too_many_arguments)]
fn adaptive_simpson(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let refined = left + right;
    if depth == 0 || (refined - whole).abs() <= 15.0 * tol {
        return refined + (refined - whole) / 15.0;
    }
    adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Orthonormal basis of a column span in the L2 inner product.
/// `q` holds the surviving unit vectors in construction order,
/// `gram_log` the projection coefficients consumed building each input
/// column (one row per input column, including dropped ones), and
/// `dropped` the indices of columns whose post-projection energy fell
/// below the dependence threshold.
#[derive(Clone, Debug)]
pub struct OrthoBasis {
    pub q: Vec<RatMatrix>,
    pub gram_log: Vec<Vec<f64>>,
    pub dropped: Vec<usize>,
}

impl OrthoBasis {
    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// Pairwise inner products of the basis; identity within the
    /// orthonormality tolerance when construction succeeded.
    pub fn gram(&self) -> Result<Vec<Vec<f64>>> {
        let r = self.q.len();
        let mut out = vec![vec![0.0; r]; r];
        for i in 0..r {
            for j in 0..r {
                out[i][j] = l2_inner(&self.q[i], &self.q[j])?;
            }
        }
        Ok(out)
    }

    /// Audit export: the basis vectors entry by entry together with
    /// the recomputed Gram matrix and the dropped-column report.
    pub fn export_json(&self) -> Result<String> {
        let basis: Vec<Vec<&crate::rational::RatFn>> =
            self.q.iter().map(|v| v.entries().iter().collect()).collect();
        let doc = serde_json::json!({
            "basis": basis,
            "gram": self.gram()?,
            "gram_log": self.gram_log,
            "dropped": self.dropped,
        });
        serde_json::to_string_pretty(&doc).map_err(Error::from)
    }
}

/// Modified Gram-Schmidt over the L2 inner product with real scalar
/// coefficients. Columns whose residual energy falls below
/// `DEGENERATE_TOL_REL` times the largest column energy are reported in
/// `dropped` rather than normalized into noise.
pub fn gram_schmidt(l: &RatMatrix) -> Result<OrthoBasis> {
    if l.cols() == 0 {
        return Err(Error::Dimension("no columns to orthonormalize".into()));
    }
    let mut max_energy = 0.0f64;
    for j in 0..l.cols() {
        let col = l.column(j);
        require_l2(&col, "a basis column")?;
        max_energy = max_energy.max(l2_inner(&col, &col)?);
    }
    let floor = DEGENERATE_TOL_REL * max_energy;
    let mut q: Vec<RatMatrix> = Vec::new();
    let mut gram_log = Vec::new();
    let mut dropped = Vec::new();
    for j in 0..l.cols() {
        let mut v = l.column(j);
        let mut row = Vec::with_capacity(q.len());
        for qi in &q {
            let c = l2_inner(&v, qi)?;
            row.push(c);
            v = &v - &qi.scale_rat(&rat_from_f64(c));
        }
        let energy = l2_inner(&v, &v)?;
        gram_log.push(row);
        if energy < floor {
            dropped.push(j);
            continue;
        }
        q.push(v.scale_rat(&rat_from_f64(1.0 / energy.sqrt())));
    }
    if q.is_empty() {
        return Err(Error::Precondition(
            "every column was dependent; nothing to span".into(),
        ));
    }
    // One round of modified Gram-Schmidt leaves the basis orthonormal
    // to working precision; anything worse means the drop floor let a
    // near-dependent column through.
    for i in 0..q.len() {
        for j in 0..=i {
            let want = if i == j { 1.0 } else { 0.0 };
            let got = l2_inner(&q[i], &q[j])?;
            if (got - want).abs() > ORTH_TOL {
                return Err(Error::Numerical(format!(
                    "orthonormalization failed: <q{i}, q{j}> = {got}"
                )));
            }
        }
    }
    Ok(OrthoBasis {
        q,
        gram_log,
        dropped,
    })
}

/// Orthogonal split of a vector against a basis: the projection onto
/// the real span, the residual, and the residual's energy.
#[derive(Clone, Debug)]
pub struct Projection {
    pub proj: RatMatrix,
    pub res: RatMatrix,
    pub res_energy: f64,
    pub coefficients: Vec<f64>,
}

pub fn project_residual(f: &RatMatrix, basis: &OrthoBasis) -> Result<Projection> {
    require_l2(f, "the projected vector")?;
    let mut proj = RatMatrix::zeros(f.rows(), 1);
    let mut coefficients = Vec::with_capacity(basis.q.len());
    for qi in &basis.q {
        let c = l2_inner(f, qi)?;
        coefficients.push(c);
        proj = &proj + &qi.scale_rat(&rat_from_f64(c));
    }
    let res = f - &proj;
    let res_energy = l2_inner(&res, &res)?;
    Ok(Projection {
        proj,
        res,
        res_energy,
    coefficients,
    })
}

/// Convergence certificate for the perturbed-plant iteration: the
/// H-infinity norm of (z+/z_d+) * Delta * P * Xi. Strictly below one,
/// the loop's Neumann series contracts. A structurally zero gap
/// returns exactly zero; an unstable composition is an error, not a
/// number.
pub fn contraction_margin(
    p: &RatMatrix,
    xi: &RatMatrix,
    ap: &AllPass,
    delta_gap: &RatMatrix,
) -> Result<f64> {
    if delta_gap.cols() != p.rows() || p.cols() != xi.rows() || xi.cols() != delta_gap.rows() {
        return Err(Error::Dimension(format!(
            "gap {}x{}, plant {}x{}, inverse {}x{} do not compose into a square loop",
            delta_gap.rows(),
            delta_gap.cols(),
            p.rows(),
            p.cols(),
            xi.rows(),
            xi.cols()
        )));
    }
    if delta_gap.is_zero() {
        return Ok(0.0);
    }
    let m = (&(delta_gap * p) * xi).scale(&ap.ratio);
    if m.is_zero() {
        return Ok(0.0);
    }
    let ss = minimal(&realize(&m)?);
    if !ss.is_stable() {
        return Err(Error::Unstable(
            "the contraction operator has an unstable mode".into(),
        ));
    }
    hinf_norm(&ss)
}

/// One persistent mode of a reference signal: a step (omega = 0) or a
/// sinusoid pair at +-j*omega listed once with omega > 0, together
/// with the residue vector of the reference at that pole.
#[derive(Clone, Debug)]
pub struct MarginalMode {
    pub omega: f64,
    pub residue: Vec<Complex64>,
}

/// Time-average power of the persistent error when a map `e` (error
/// per unit reference) is driven by marginal reference modes. A step
/// residue r contributes |e(0) r|^2; a sinusoid pair contributes twice
/// |e(j omega) r|^2, the mean square of its oscillation.
pub fn marginal_mode_power(e: &RatMatrix, modes: &[MarginalMode]) -> Result<f64> {
    let mut total = 0.0;
    for mode in modes {
        if mode.residue.len() != e.cols() {
            return Err(Error::Dimension(format!(
                "residue has {} entries for a map with {} inputs",
                mode.residue.len(),
                e.cols()
            )));
        }
        let ev = e.eval(Complex64::new(0.0, mode.omega));
        let mut norm2 = 0.0;
        for i in 0..e.rows() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, r) in mode.residue.iter().enumerate() {
                acc += ev[(i, k)] * r;
            }
            norm2 += acc.norm_sqr();
        }
        total += if mode.omega == 0.0 { norm2 } else { 2.0 * norm2 };
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::RatFn;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn rf(num: &[i64], den: &[i64]) -> RatFn {
        RatFn::from_ints(num, den).unwrap()
    }

    fn col(entries: Vec<RatFn>) -> RatMatrix {
        RatMatrix::col_vector(entries)
    }

    #[test]
    fn inner_product_closed_forms() {
        // <1/(s+1), 1/(s+1)> solves -2x + 1 = 0.
        let f = col(vec![rf(&[1], &[1, 1])]);
        assert_relative_eq!(l2_inner(&f, &f).unwrap(), 0.5, max_relative = 1e-10);
        // <1/(s+1), 1/(s+2)> solves -3x + 1 = 0.
        let g = col(vec![rf(&[1], &[2, 1])]);
        assert_relative_eq!(l2_inner(&f, &g).unwrap(), 1.0 / 3.0, max_relative = 1e-10);
        assert_relative_eq!(
            l2_inner(&g, &f).unwrap(),
            l2_inner(&f, &g).unwrap(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn sylvester_and_quadrature_agree_on_shared_pole() {
        let f = col(vec![rf(&[1], &[1, 1])]);
        let g = col(vec![rf(&[0, 1], &[2, 3, 1])]);
        let syl = l2_inner(&f, &g).unwrap();
        let quad = l2_inner_quadrature(&f, &g).unwrap();
        assert!((syl - quad).abs() < 1e-8, "sylvester {syl} vs quadrature {quad}");
        // Partial fractions: s/((s+1)(s+2)) = -1/(s+1) + 2/(s+2),
        // so the product is -1/2 + 2/3.
        assert_relative_eq!(syl, 1.0 / 6.0, max_relative = 1e-9);
    }

    #[test]
    fn inner_product_rejects_non_l2_input() {
        let stable = col(vec![rf(&[1], &[1, 1])]);
        let proper_not_strict = col(vec![rf(&[0, 1], &[1, 1])]);
        let unstable = col(vec![rf(&[1], &[-1, 1])]);
        let marginal = col(vec![rf(&[1], &[0, 1])]);
        assert!(l2_inner(&proper_not_strict, &stable).is_err());
        assert!(l2_inner(&stable, &unstable).is_err());
        assert!(l2_inner(&marginal, &stable).is_err());
        let wide = stable.hcat(&stable);
        assert!(l2_inner(&wide, &stable).is_err());
    }

    #[test]
    fn zero_vector_has_zero_inner_product() {
        let f = col(vec![rf(&[1], &[1, 1])]);
        let z = RatMatrix::zeros(1, 1);
        assert_eq!(l2_inner(&f, &z).unwrap(), 0.0);
        assert_eq!(l2_inner_quadrature(&z, &f).unwrap(), 0.0);
    }

    #[test]
    fn single_column_normalizes_to_unit_energy() {
        let l = col(vec![rf(&[1], &[1, 1])]);
        let basis = gram_schmidt(&l).unwrap();
        assert_eq!(basis.len(), 1);
        assert!(basis.dropped.is_empty());
        let e = l2_inner(&basis.q[0], &basis.q[0]).unwrap();
        assert_relative_eq!(e, 1.0, max_relative = 1e-9);
        // The unit vector is sqrt(2)/(s+1): check its value at s = 1.
        let v = basis.q[0].eval(Complex64::new(1.0, 0.0))[(0, 0)];
        assert_relative_eq!(v.re, std::f64::consts::SQRT_2 / 2.0, max_relative = 1e-9);
    }

    #[test]
    fn two_columns_give_identity_gram() {
        let l = col(vec![rf(&[1], &[1, 1])]).hcat(&col(vec![rf(&[1], &[2, 1])]));
        let basis = gram_schmidt(&l).unwrap();
        assert_eq!(basis.len(), 2);
        let gram = basis.gram().unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (gram[i][j] - expect).abs() < ORTH_TOL,
                    "gram[{i}][{j}] = {}",
                    gram[i][j]
                );
            }
        }
        // Span check: each original column reconstructs with negligible
        // residual.
        for j in 0..2 {
            let split = project_residual(&l.column(j), &basis).unwrap();
            assert!(split.res_energy < ORTH_TOL, "column {j} not in span");
        }
        let json = basis.export_json().unwrap();
        assert!(json.contains("gram") && json.contains("basis"));
    }

    #[test]
    fn duplicated_column_is_dropped() {
        let c = col(vec![rf(&[1], &[1, 1])]);
        let l = c.hcat(&c);
        let basis = gram_schmidt(&l).unwrap();
        assert_eq!(basis.len(), 1);
        assert_eq!(basis.dropped, vec![1]);
    }

    #[test]
    fn projecting_a_basis_member_leaves_no_residual() {
        let l = col(vec![rf(&[1], &[1, 1])]).hcat(&col(vec![rf(&[1], &[2, 1])]));
        let basis = gram_schmidt(&l).unwrap();
        let split = project_residual(&basis.q[0], &basis).unwrap();
        assert!(split.res_energy < ORTH_TOL);
        assert_relative_eq!(split.coefficients[0], 1.0, max_relative = 1e-8);
        assert!(split.coefficients[1].abs() < 1e-7);
    }

    #[test]
    fn orthogonal_vector_passes_through_projection() {
        // (1-s)/((s+1)(s+2)) = 2/(s+1) - 3/(s+2) is orthogonal to
        // 1/(s+1): 2*(1/2) - 3*(1/3) = 0.
        let basis = gram_schmidt(&col(vec![rf(&[1], &[1, 1])])).unwrap();
        let f = col(vec![rf(&[1, -1], &[2, 3, 1])]);
        let split = project_residual(&f, &basis).unwrap();
        assert!(split.coefficients[0].abs() < 1e-9);
        let own = l2_inner(&f, &f).unwrap();
        assert_relative_eq!(split.res_energy, own, max_relative = 1e-8);
        // Residual is orthogonal to the basis.
        assert!(l2_inner(&split.res, &basis.q[0]).unwrap().abs() < ORTH_TOL);
    }

    #[test]
    fn projection_is_idempotent_and_pythagorean() {
        let l = col(vec![rf(&[1], &[1, 1])]).hcat(&col(vec![rf(&[1], &[2, 1])]));
        let basis = gram_schmidt(&l).unwrap();
        let f = col(vec![rf(&[2, 1], &[6, 5, 1])]);
        let split = project_residual(&f, &basis).unwrap();
        let total = l2_inner(&f, &f).unwrap();
        let proj_e = l2_inner(&split.proj, &split.proj).unwrap();
        assert_relative_eq!(total, proj_e + split.res_energy, max_relative = 1e-6);
        let again = project_residual(&split.proj, &basis).unwrap();
        assert!(again.res_energy < ORTH_TOL);
    }

    #[test]
    fn contraction_margin_zero_gap_and_scaling() {
        let one = rf(&[1], &[1, 1]);
        let p = col(vec![rf(&[1], &[2, 1])]);
        let xi = RatMatrix::col_vector(vec![rf(&[1], &[3, 1])]);
        let ap = AllPass::trivial();
        let zero = RatMatrix::zeros(1, 1);
        assert_eq!(contraction_margin(&p, &xi, &ap, &zero).unwrap(), 0.0);
        let gap = RatMatrix::col_vector(vec![one]);
        let a1 = contraction_margin(&p, &xi, &ap, &gap).unwrap();
        let half = gap.scale_rat(&crate::rational::parse_rat("1/2").unwrap());
        let a2 = contraction_margin(&p, &xi, &ap, &half).unwrap();
        assert!(a1 > 0.0);
        assert_relative_eq!(a2, 0.5 * a1, max_relative = 1e-6);
    }

    #[test]
    fn contraction_margin_static_projector_bound() {
        // P = Xi = I static, gap = 0.5 I: the margin is exactly the
        // gap's norm.
        let p = RatMatrix::identity(2);
        let xi = RatMatrix::identity(2);
        let ap = AllPass::trivial();
        let gap = RatMatrix::identity(2).scale_rat(&crate::rational::parse_rat("1/2").unwrap());
        let a = contraction_margin(&p, &xi, &ap, &gap).unwrap();
        assert!((a - 0.5).abs() < 1e-6, "margin {a}");
    }

    #[test]
    fn contraction_margin_rejects_unstable_composition() {
        let p = col(vec![rf(&[1], &[1, 1])]);
        let xi = RatMatrix::col_vector(vec![rf(&[1], &[2, 1])]);
        let gap = RatMatrix::col_vector(vec![rf(&[1], &[-1, 1])]);
        let ap = AllPass::trivial();
        assert!(matches!(
            contraction_margin(&p, &xi, &ap, &gap),
            Err(Error::Unstable(_))
        ));
    }

    #[test]
    fn marginal_power_combines_step_and_tone() {
        // Static half-gain map: step residue [8, 1] contributes
        // 0.25*65, the unit tone [-j, 0] contributes 2*0.25.
        let e = RatMatrix::identity(2).scale_rat(&crate::rational::parse_rat("1/2").unwrap());
        let modes = [
            MarginalMode {
                omega: 0.0,
                residue: vec![Complex64::new(8.0, 0.0), Complex64::new(1.0, 0.0)],
            },
            MarginalMode {
                omega: 1.0,
                residue: vec![Complex64::new(0.0, -1.0), Complex64::new(0.0, 0.0)],
            },
        ];
        let p = marginal_mode_power(&e, &modes).unwrap();
        assert_relative_eq!(p, 0.25 * 65.0 + 0.5, max_relative = 1e-12);
    }

    fn stable_ratfn_strategy() -> impl Strategy<Value = RatFn> {
        (
            proptest::collection::vec(-3i64..=3, 1..=3),
            proptest::collection::vec(1i64..=5, 1..=3),
        )
            .prop_map(|(nums, poles)| {
                let mut den = crate::rational::Poly::from_ints(&[1]);
                for p in &poles {
                    den = &den * &crate::rational::Poly::from_ints(&[*p, 1]);
                }
                let keep = nums.len().min(poles.len());
                let mut num_coeffs: Vec<i64> = nums.into_iter().take(keep).collect();
                if num_coeffs.iter().all(|c| *c == 0) {
                    num_coeffs[0] = 1;
                }
                let num = crate::rational::Poly::from_ints(&num_coeffs);
                RatFn::new(num, den).unwrap()
            })
    }

    fn stable_col_strategy() -> impl Strategy<Value = RatMatrix> {
        proptest::collection::vec(stable_ratfn_strategy(), 2)
            .prop_map(RatMatrix::col_vector)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn inner_product_is_bilinear(
            f in stable_col_strategy(),
            g in stable_col_strategy(),
            h in stable_col_strategy(),
            a in -2.0f64..2.0,
        ) {
            let af = f.scale_rat(&rat_from_f64(a));
            let lhs = l2_inner(&(&af + &g), &h).unwrap();
            let rhs = a * l2_inner(&f, &h).unwrap() + l2_inner(&g, &h).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs().max(rhs.abs())));
        }

        #[test]
        fn projection_satisfies_pythagoras(f in stable_col_strategy()) {
            let l = col(vec![rf(&[1], &[1, 1]), rf(&[1], &[2, 1])])
                .hcat(&col(vec![rf(&[0], &[1, 1]), rf(&[1], &[3, 1])]));
            let basis = gram_schmidt(&l).unwrap();
            let split = project_residual(&f, &basis).unwrap();
            let total = l2_inner(&f, &f).unwrap();
            let proj_e = l2_inner(&split.proj, &split.proj).unwrap();
            prop_assert!(
                (total - proj_e - split.res_energy).abs() <= 1e-6 * (1.0 + total.abs())
            );
        }
    }
}
