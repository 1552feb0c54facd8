//! State space systems and their interconnections.
//!
//! A `StateSpace` is the quadruple (A, B, C, D) over f64. Systems with
//! zero states are legal and show up constantly as pure gains, so
//! every operation here must tolerate 0 x 0 blocks.
//!
//! Feedback loops are assembled symbolically from the block formulas
//! rather than by matrix inversion of transfer functions, so internal
//! stability can always be read off one closed loop A matrix.

use nalgebra::DMatrix;
use num::complex::Complex64;
use serde::{Deserialize, Serialize};

use super::linalg::{is_hurwitz, mat_inverse, spectral_abscissa};
use super::realize::{minimal, realize};
use crate::error::{Error, Result};
use crate::polymat::RatMatrix;
use crate::rational::RatFn;
use crate::tol::STAB_MARGIN;

#[derive(Clone, Debug, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension("state matrix must be square".into()));
        }
        if b.nrows() != n || c.ncols() != n {
            return Err(Error::Dimension(
                "input and output maps must match the state dimension".into(),
            ));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::Dimension(
                "feedthrough must be outputs x inputs".into(),
            ));
        }
        Ok(StateSpace { a, b, c, d })
    }

    /// Static system y = d * u.
    pub fn from_gain(d: DMatrix<f64>) -> Self {
        let (p, m) = (d.nrows(), d.ncols());
        StateSpace {
            a: DMatrix::zeros(0, 0),
            b: DMatrix::zeros(0, m),
            c: DMatrix::zeros(p, 0),
            d,
        }
    }

    pub fn identity(k: usize) -> Self {
        Self::from_gain(DMatrix::identity(k, k))
    }

    pub fn zero(outputs: usize, inputs: usize) -> Self {
        Self::from_gain(DMatrix::zeros(outputs, inputs))
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    /// Transfer matrix value D + C (sI - A)^{-1} B; errors on poles.
    pub fn eval(&self, s: Complex64) -> Result<DMatrix<Complex64>> {
        let n = self.n_states();
        let dc = self.d.map(Complex64::from);
        if n == 0 {
            return Ok(dc);
        }
        let mut si_a = self.a.map(|x| Complex64::new(-x, 0.0));
        for i in 0..n {
            si_a[(i, i)] += s;
        }
        let bc = self.b.map(Complex64::from);
        let x = si_a.lu().solve(&bc).ok_or(Error::SingularMatrix)?;
        Ok(dc + self.c.map(Complex64::from) * x)
    }

    pub fn poles(&self) -> Vec<Complex64> {
        super::linalg::balanced_eigenvalues(&self.a)
    }

    /// Strict Hurwitz stability of this realization.
    pub fn is_stable(&self) -> bool {
        is_hurwitz(&self.a, STAB_MARGIN)
    }

    /// Largest real part over the realization's poles.
    pub fn stability_margin(&self) -> f64 {
        spectral_abscissa(&self.a)
    }

    /// Dual system (A', C', B', D'); transfer matrix transposes.
    pub fn transpose(&self) -> Self {
        StateSpace {
            a: self.a.transpose(),
            b: self.c.transpose(),
            c: self.b.transpose(),
            d: self.d.transpose(),
        }
    }

    pub fn scale(&self, k: f64) -> Self {
        StateSpace {
            a: self.a.clone(),
            b: self.b.clone(),
            c: &self.c * k,
            d: &self.d * k,
        }
    }

    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    /// Cascade u -> self -> second.
    pub fn series(&self, second: &StateSpace) -> Result<StateSpace> {
        if second.n_inputs() != self.n_outputs() {
            return Err(Error::Dimension(format!(
                "cascade mismatch: {} outputs into {} inputs",
                self.n_outputs(),
                second.n_inputs()
            )));
        }
        let (n1, n2) = (self.n_states(), second.n_states());
        let mut a = DMatrix::zeros(n1 + n2, n1 + n2);
        a.view_mut((0, 0), (n1, n1)).copy_from(&self.a);
        a.view_mut((n1, 0), (n2, n1))
            .copy_from(&(&second.b * &self.c));
        a.view_mut((n1, n1), (n2, n2)).copy_from(&second.a);
        let mut b = DMatrix::zeros(n1 + n2, self.n_inputs());
        b.view_mut((0, 0), (n1, self.n_inputs())).copy_from(&self.b);
        b.view_mut((n1, 0), (n2, self.n_inputs()))
            .copy_from(&(&second.b * &self.d));
        let mut c = DMatrix::zeros(second.n_outputs(), n1 + n2);
        c.view_mut((0, 0), (second.n_outputs(), n1))
            .copy_from(&(&second.d * &self.c));
        c.view_mut((0, n1), (second.n_outputs(), n2))
            .copy_from(&second.c);
        let d = &second.d * &self.d;
        StateSpace::new(a, b, c, d)
    }

    /// Output sum of two systems sharing the input.
    pub fn parallel(&self, other: &StateSpace) -> Result<StateSpace> {
        if self.n_inputs() != other.n_inputs() || self.n_outputs() != other.n_outputs() {
            return Err(Error::Dimension("parallel sum needs equal shapes".into()));
        }
        let (n1, n2) = (self.n_states(), other.n_states());
        let mut a = DMatrix::zeros(n1 + n2, n1 + n2);
        a.view_mut((0, 0), (n1, n1)).copy_from(&self.a);
        a.view_mut((n1, n1), (n2, n2)).copy_from(&other.a);
        let mut b = DMatrix::zeros(n1 + n2, self.n_inputs());
        b.view_mut((0, 0), (n1, self.n_inputs())).copy_from(&self.b);
        b.view_mut((n1, 0), (n2, self.n_inputs()))
            .copy_from(&other.b);
        let mut c = DMatrix::zeros(self.n_outputs(), n1 + n2);
        c.view_mut((0, 0), (self.n_outputs(), n1)).copy_from(&self.c);
        c.view_mut((0, n1), (self.n_outputs(), n2))
            .copy_from(&other.c);
        StateSpace::new(a, b, c, &self.d + &other.d)
    }

    /// Vertical stack [self; bottom] driven by the shared input.
    pub fn stack_outputs(&self, bottom: &StateSpace) -> Result<StateSpace> {
        if self.n_inputs() != bottom.n_inputs() {
            return Err(Error::Dimension("output stack needs equal inputs".into()));
        }
        let (n1, n2) = (self.n_states(), bottom.n_states());
        let (p1, p2) = (self.n_outputs(), bottom.n_outputs());
        let mut a = DMatrix::zeros(n1 + n2, n1 + n2);
        a.view_mut((0, 0), (n1, n1)).copy_from(&self.a);
        a.view_mut((n1, n1), (n2, n2)).copy_from(&bottom.a);
        let mut b = DMatrix::zeros(n1 + n2, self.n_inputs());
        b.view_mut((0, 0), (n1, self.n_inputs())).copy_from(&self.b);
        b.view_mut((n1, 0), (n2, self.n_inputs()))
            .copy_from(&bottom.b);
        let mut c = DMatrix::zeros(p1 + p2, n1 + n2);
        c.view_mut((0, 0), (p1, n1)).copy_from(&self.c);
        c.view_mut((p1, n1), (p2, n2)).copy_from(&bottom.c);
        let mut d = DMatrix::zeros(p1 + p2, self.n_inputs());
        d.view_mut((0, 0), (p1, self.n_inputs())).copy_from(&self.d);
        d.view_mut((p1, 0), (p2, self.n_inputs()))
            .copy_from(&bottom.d);
        StateSpace::new(a, b, c, d)
    }

    /// Horizontal stack [self, right]: input splits, outputs add.
    pub fn stack_inputs(&self, right: &StateSpace) -> Result<StateSpace> {
        if self.n_outputs() != right.n_outputs() {
            return Err(Error::Dimension("input stack needs equal outputs".into()));
        }
        let (n1, n2) = (self.n_states(), right.n_states());
        let (m1, m2) = (self.n_inputs(), right.n_inputs());
        let mut a = DMatrix::zeros(n1 + n2, n1 + n2);
        a.view_mut((0, 0), (n1, n1)).copy_from(&self.a);
        a.view_mut((n1, n1), (n2, n2)).copy_from(&right.a);
        let mut b = DMatrix::zeros(n1 + n2, m1 + m2);
        b.view_mut((0, 0), (n1, m1)).copy_from(&self.b);
        b.view_mut((n1, m1), (n2, m2)).copy_from(&right.b);
        let mut c = DMatrix::zeros(self.n_outputs(), n1 + n2);
        c.view_mut((0, 0), (self.n_outputs(), n1)).copy_from(&self.c);
        c.view_mut((0, n1), (self.n_outputs(), n2))
            .copy_from(&right.c);
        let mut d = DMatrix::zeros(self.n_outputs(), m1 + m2);
        d.view_mut((0, 0), (self.n_outputs(), m1)).copy_from(&self.d);
        d.view_mut((0, m1), (self.n_outputs(), m2))
            .copy_from(&right.d);
        StateSpace::new(a, b, c, d)
    }
}

/// The three transfer paths of a unity negative feedback loop
/// u = K(r - y), y = G u, sharing one state vector [x_g; x_k].
#[derive(Clone, Debug)]
pub struct ClosedLoop {
    /// r -> y.
    pub to_output: StateSpace,
    /// r -> u.
    pub to_control: StateSpace,
    /// r -> e = r - y.
    pub to_error: StateSpace,
}

impl ClosedLoop {
    /// Internal stability: the shared loop A matrix is Hurwitz.
    pub fn is_internally_stable(&self) -> bool {
        self.to_output.is_stable()
    }
}

/// Closes the loop u = controller(r - plant_output). Errors when the
/// algebraic loop is ill posed (I + Dg Dk singular).
pub fn closed_loop(plant: &StateSpace, controller: &StateSpace) -> Result<ClosedLoop> {
    if controller.n_outputs() != plant.n_inputs() || plant.n_outputs() != controller.n_inputs() {
        return Err(Error::Dimension(
            "loop needs controller outputs = plant inputs and vice versa".into(),
        ));
    }
    let (ag, bg, cg, dg) = (&plant.a, &plant.b, &plant.c, &plant.d);
    let (ak, bk, ck, dk) = (&controller.a, &controller.b, &controller.c, &controller.d);
    let ny = plant.n_outputs();
    let nu = plant.n_inputs();
    let (ng, nk) = (plant.n_states(), controller.n_states());

    let m = mat_inverse(&(DMatrix::identity(ny, ny) + dg * dk))
        .map_err(|_| Error::Precondition("feedback loop is not well posed".into()))?;
    // Push-through form of (I + Dk Dg)^{-1}.
    let w = DMatrix::identity(nu, nu) - dk * &m * dg;
    let r_gain = dk * (DMatrix::identity(ny, ny) - &m * dg * dk);

    let mut a = DMatrix::zeros(ng + nk, ng + nk);
    a.view_mut((0, 0), (ng, ng)).copy_from(&(ag - bg * dk * &m * cg));
    a.view_mut((0, ng), (ng, nk)).copy_from(&(bg * &w * ck));
    a.view_mut((ng, 0), (nk, ng)).copy_from(&(-(bk * &m * cg)));
    a.view_mut((ng, ng), (nk, nk)).copy_from(&(ak - bk * &m * dg * ck));

    let mut b = DMatrix::zeros(ng + nk, ny);
    b.view_mut((0, 0), (ng, ny)).copy_from(&(bg * &r_gain));
    b.view_mut((ng, 0), (nk, ny))
        .copy_from(&(bk * (DMatrix::identity(ny, ny) - &m * dg * dk)));

    let mut c_y = DMatrix::zeros(ny, ng + nk);
    c_y.view_mut((0, 0), (ny, ng)).copy_from(&(&m * cg));
    c_y.view_mut((0, ng), (ny, nk)).copy_from(&(&m * dg * ck));
    let d_y = &m * dg * dk;

    let mut c_u = DMatrix::zeros(nu, ng + nk);
    c_u.view_mut((0, 0), (nu, ng)).copy_from(&(-(dk * &m * cg)));
    c_u.view_mut((0, ng), (nu, nk)).copy_from(&(&w * ck));
    let d_u = r_gain;

    let to_output = StateSpace::new(a.clone(), b.clone(), c_y.clone(), d_y.clone())?;
    let to_control = StateSpace::new(a.clone(), b.clone(), c_u, d_u)?;
    let to_error = StateSpace::new(a, b, -c_y, DMatrix::identity(ny, ny) - d_y)?;
    Ok(ClosedLoop {
        to_output,
        to_control,
        to_error,
    })
}

/// Lower linear fractional closure of a two port system.
///
/// `g` maps (w, u) to (z, y) with `nw` exogenous inputs and `nz`
/// performance outputs; `k` closes u = K y. Returns the w -> z map.
pub fn lft_lower(g: &StateSpace, nw: usize, nz: usize, k: &StateSpace) -> Result<StateSpace> {
    let m = g.n_inputs();
    let p = g.n_outputs();
    if nw > m || nz > p {
        return Err(Error::Dimension("partition exceeds system shape".into()));
    }
    let nu = m - nw;
    let ny = p - nz;
    if k.n_inputs() != ny || k.n_outputs() != nu {
        return Err(Error::Dimension(
            "closing block must map measurements to controls".into(),
        ));
    }
    let n = g.n_states();
    let nk = k.n_states();
    let b1 = g.b.view((0, 0), (n, nw)).into_owned();
    let b2 = g.b.view((0, nw), (n, nu)).into_owned();
    let c1 = g.c.view((0, 0), (nz, n)).into_owned();
    let c2 = g.c.view((nz, 0), (ny, n)).into_owned();
    let d11 = g.d.view((0, 0), (nz, nw)).into_owned();
    let d12 = g.d.view((0, nw), (nz, nu)).into_owned();
    let d21 = g.d.view((nz, 0), (ny, nw)).into_owned();
    let d22 = g.d.view((nz, nw), (ny, nu)).into_owned();
    let (ak, bk, ck, dk) = (&k.a, &k.b, &k.c, &k.d);

    let nmat = mat_inverse(&(DMatrix::identity(nu, nu) - dk * &d22))
        .map_err(|_| Error::Precondition("fractional closure is not well posed".into()))?;
    let ndk = &nmat * dk;

    let mut a = DMatrix::zeros(n + nk, n + nk);
    a.view_mut((0, 0), (n, n))
        .copy_from(&(&g.a + &b2 * &ndk * &c2));
    a.view_mut((0, n), (n, nk)).copy_from(&(&b2 * &nmat * ck));
    a.view_mut((n, 0), (nk, n))
        .copy_from(&(bk * (&c2 + &d22 * &ndk * &c2)));
    a.view_mut((n, n), (nk, nk))
        .copy_from(&(ak + bk * &d22 * &nmat * ck));

    let mut b = DMatrix::zeros(n + nk, nw);
    b.view_mut((0, 0), (n, nw))
        .copy_from(&(&b1 + &b2 * &ndk * &d21));
    b.view_mut((n, 0), (nk, nw))
        .copy_from(&(bk * (&d21 + &d22 * &ndk * &d21)));

    let mut c = DMatrix::zeros(nz, n + nk);
    c.view_mut((0, 0), (nz, n))
        .copy_from(&(&c1 + &d12 * &ndk * &c2));
    c.view_mut((0, n), (nz, nk)).copy_from(&(&d12 * &nmat * ck));

    let d = &d11 + &d12 * &ndk * &d21;
    StateSpace::new(a, b, c, d)
}

/// Internal stability of the negative feedback pairing of plant `p`
/// (outputs x inputs) with controller `k` (inputs x outputs).
///
/// All four closed loop blocks are read off the exact rational inverse
/// of [[I, K], [-P, I]], so cancellations that hold at the coefficient
/// level are honored before any floating point enters. A minimal
/// realization of the inverse then drops residual near cancelling
/// dipoles; every surviving pole must sit strictly left of the
/// stability margin. Errors when the algebraic loop is ill posed.
pub fn internal_stability(p: &RatMatrix, k: &RatMatrix) -> Result<bool> {
    let (ny, nu) = (p.rows(), p.cols());
    if k.rows() != nu || k.cols() != ny {
        return Err(Error::Dimension(format!(
            "a {}x{} controller cannot close a {}x{} plant",
            k.rows(),
            k.cols(),
            ny,
            nu
        )));
    }
    let minus_one = RatFn::from_poly(crate::rational::Poly::from_ints(&[-1]));
    let top = RatMatrix::identity(nu).hcat(k);
    let bottom = p.scale(&minus_one).hcat(&RatMatrix::identity(ny));
    let four_block = top
        .vcat(&bottom)
        .inverse()
        .map_err(|_| Error::Precondition("feedback loop is not well posed".into()))?;
    if !four_block.is_proper() {
        return Err(Error::Precondition(
            "feedback loop is not well posed".into(),
        ));
    }
    let ss = realize(&four_block)?;
    Ok(minimal(&ss).is_stable())
}

#[derive(Serialize, Deserialize)]
struct StateSpaceRepr {
    a: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    d: Vec<Vec<f64>>,
}

fn mat_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn rows_to_mat(rows: &[Vec<f64>], ncols_hint: usize) -> std::result::Result<DMatrix<f64>, String> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(ncols_hint, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return Err("ragged matrix rows".into());
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

impl Serialize for StateSpace {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        StateSpaceRepr {
            a: mat_to_rows(&self.a),
            b: mat_to_rows(&self.b),
            c: mat_to_rows(&self.c),
            d: mat_to_rows(&self.d),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for StateSpace {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let r = StateSpaceRepr::deserialize(de)?;
        let a = rows_to_mat(&r.a, 0).map_err(DeError::custom)?;
        let d = rows_to_mat(&r.d, 0).map_err(DeError::custom)?;
        let b = rows_to_mat(&r.b, d.ncols()).map_err(DeError::custom)?;
        let c = rows_to_mat(&r.c, a.ncols()).map_err(DeError::custom)?;
        // An empty c row list still needs the output count from d.
        let c = if r.c.is_empty() && d.nrows() > 0 {
            DMatrix::zeros(d.nrows(), a.nrows())
        } else {
            c
        };
        let b = if r.b.is_empty() && a.nrows() > 0 {
            DMatrix::zeros(a.nrows(), d.ncols())
        } else {
            b
        };
        StateSpace::new(a, b, c, d).map_err(DeError::custom)
    }
}
