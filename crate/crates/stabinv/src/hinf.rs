//! Mixed-sensitivity synthesis and the approximate inverses built on it.
//!
//! The pipeline: wrap a plant with a bandwidth weight into a generalized
//! plant whose closed loop is the weighted output sensitivity, bisect on
//! the performance level solving two Riccati equations per probe through
//! the matrix sign function, and assemble the central controller at the
//! accepted level. Two inverse constructions consume that controller:
//! the closed-loop reference-to-control map for full-row-rank plants,
//! and, for tall plants, a scalar complementary sensitivity multiplying
//! the exact pseudo-inverse, where the scalar loop's numerator carries
//! the plant's unstable zeros so the product cancels them in exact
//! rational arithmetic rather than by nearby-root luck.
//!
//! Two numerical decisions deserve a note. The bandwidth weight is
//! biproper, which puts a direct disturbance-to-performance feedthrough
//! in the generalized plant; synthesis needs that channel strictly
//! proper, so its copy of the weight rides a lag three decades above the
//! bandwidth, and the reported gamma is re-measured afterwards against
//! the biproper weight, never taken from the bisection. And controllers
//! earn their integrators: the weight places them near -omega_B*eps,
//! and purification relocates such modes to exactly zero through the
//! modal decomposition, erroring on a defective cluster rather than
//! guessing a Jordan chain.

use nalgebra::DMatrix;
use num::complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inversion::{allpass_from_plant, first_unstable_pole};
use crate::lti::{
    balanced_eigenvalues, closed_loop, hinf_norm, lft_lower, log_grid, matrix_sign, minimal, orth,
    realize, ss_to_tfm, transmission_zeros, StateSpace,
};
use crate::polymat::{pseudo_inverse, rank_rs, RatMatrix};
use crate::rational::{poly_roots, Poly, Rat, RatFn};
use crate::tol::{
    EPS_U_DEFAULT, EPS_U_MIN, GAMMA_MAX_ITER, GAMMA_SLACK, GAMMA_TOL, INTERP_TOL, MULT_TOL,
    POLE_TOL, RICCATI_TOL, STAB_MARGIN,
};

/// One diagonal channel of the performance weight
/// (s/M + omega_B)/(s + omega_B*eps): the sensitivity peak is bounded
/// by `peak` (M), tracking holds up to `bandwidth` (omega_B) rad/s, and
/// `eps` sets the steady-state error floor the weight tolerates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeightChannel {
    #[serde(rename = "M")]
    pub peak: f64,
    #[serde(rename = "omega_B")]
    pub bandwidth: f64,
    pub eps: f64,
}

impl WeightChannel {
    pub fn new(peak: f64, bandwidth: f64, eps: f64) -> Result<Self> {
        let c = WeightChannel {
            peak,
            bandwidth,
            eps,
        };
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        if !(self.peak >= 1.0) {
            return Err(Error::Precondition(format!(
                "weight peak bound must be at least one, got {}",
                self.peak
            )));
        }
        if !(self.bandwidth > 0.0) {
            return Err(Error::Precondition(format!(
                "weight bandwidth must be positive, got {}",
                self.bandwidth
            )));
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::Precondition(format!(
                "weight eps must lie in (0, 1], got {}",
                self.eps
            )));
        }
        Ok(())
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        (s / self.peak + self.bandwidth) / (s + self.bandwidth * self.eps)
    }
}

/// Diagonal performance weight, one channel per plant output.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PerfWeight {
    pub channels: Vec<WeightChannel>,
}

impl PerfWeight {
    pub fn new(channels: Vec<WeightChannel>) -> Result<Self> {
        if channels.is_empty() {
            return Err(Error::Precondition("weight needs at least one channel".into()));
        }
        for c in &channels {
            c.validate()?;
        }
        Ok(PerfWeight { channels })
    }

    /// Same channel replicated across `n` outputs.
    pub fn uniform(n: usize, peak: f64, bandwidth: f64, eps: f64) -> Result<Self> {
        let c = WeightChannel::new(peak, bandwidth, eps)?;
        PerfWeight::new(vec![c; n.max(1)])
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    /// Diagonal biproper realization: per channel
    /// A = -wb*eps, B = 1, C = wb - wb*eps/M, D = 1/M.
    pub fn realize(&self) -> StateSpace {
        let n = self.channels.len();
        let mut a = DMatrix::zeros(n, n);
        let mut b = DMatrix::zeros(n, n);
        let mut c = DMatrix::zeros(n, n);
        let mut d = DMatrix::zeros(n, n);
        for (i, ch) in self.channels.iter().enumerate() {
            let pole = ch.bandwidth * ch.eps;
            a[(i, i)] = -pole;
            b[(i, i)] = 1.0;
            c[(i, i)] = ch.bandwidth - pole / ch.peak;
            d[(i, i)] = 1.0 / ch.peak;
        }
        StateSpace { a, b, c, d }
    }

    /// Strictly proper synthesis copy: each channel in series with a
    /// unity lag at `rolloff` rad/s, which kills the feedthrough while
    /// matching the biproper response to within rolloff^-1 relative
    /// error below the lag corner. Two states per channel.
    fn realize_strict(&self, rolloff: f64) -> StateSpace {
        let n = self.channels.len();
        let mut a = DMatrix::zeros(2 * n, 2 * n);
        let mut b = DMatrix::zeros(2 * n, n);
        let mut c = DMatrix::zeros(n, 2 * n);
        for (i, ch) in self.channels.iter().enumerate() {
            let (f, w) = (2 * i, 2 * i + 1);
            let pole = ch.bandwidth * ch.eps;
            a[(f, f)] = -rolloff;
            a[(w, f)] = 1.0;
            a[(w, w)] = -pole;
            b[(f, i)] = rolloff;
            c[(i, f)] = 1.0 / ch.peak;
            c[(i, w)] = ch.bandwidth - pole / ch.peak;
        }
        StateSpace {
            a,
            b,
            c,
            d: DMatrix::zeros(n, n),
        }
    }

    pub fn eval(&self, s: Complex64) -> DMatrix<Complex64> {
        let n = self.channels.len();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.channels[i].eval(s)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }
}

/// Generalized plant for weighted output-sensitivity shaping: inputs
/// (w, u), outputs (z, y) with z = [W(w + Pu); eps_u * u] and
/// y = -(w + Pu). Closing u = K y makes the w -> z map equal
/// [W * S_o; eps_u * K S_o]. With eps_u = 0 the penalty rows are
/// omitted entirely and the closed loop is the pure weighted
/// sensitivity.
pub fn augment_plant(p: &StateSpace, w: &PerfWeight, eps_u: f64) -> Result<StateSpace> {
    if w.len() != p.n_outputs() {
        return Err(Error::Dimension(format!(
            "weight has {} channels for a plant with {} outputs",
            w.len(),
            p.n_outputs()
        )));
    }
    if eps_u < 0.0 {
        return Err(Error::Precondition("control penalty must be nonnegative".into()));
    }
    assemble_generalized(p, &w.realize(), eps_u)
}

/// Block assembly shared by the biproper and strictly proper weights.
/// `wss` must be square with one input and output per plant output.
fn assemble_generalized(p: &StateSpace, wss: &StateSpace, eps_u: f64) -> Result<StateSpace> {
    let ny = p.n_outputs();
    let nu = p.n_inputs();
    let (np, nw_states) = (p.n_states(), wss.n_states());
    let n = np + nw_states;
    let nz = if eps_u > 0.0 { ny + nu } else { ny };

    let mut a = DMatrix::zeros(n, n);
    a.view_mut((0, 0), (np, np)).copy_from(&p.a);
    a.view_mut((np, 0), (nw_states, np))
        .copy_from(&(&wss.b * &p.c));
    a.view_mut((np, np), (nw_states, nw_states))
        .copy_from(&wss.a);

    let mut b = DMatrix::zeros(n, ny + nu);
    b.view_mut((np, 0), (nw_states, ny)).copy_from(&wss.b);
    b.view_mut((0, ny), (np, nu)).copy_from(&p.b);
    b.view_mut((np, ny), (nw_states, nu))
        .copy_from(&(&wss.b * &p.d));

    let mut c = DMatrix::zeros(nz + ny, n);
    c.view_mut((0, 0), (ny, np)).copy_from(&(&wss.d * &p.c));
    c.view_mut((0, np), (ny, nw_states)).copy_from(&wss.c);
    c.view_mut((nz, 0), (ny, np)).copy_from(&(-&p.c));

    let mut d = DMatrix::zeros(nz + ny, ny + nu);
    d.view_mut((0, 0), (ny, ny)).copy_from(&wss.d);
    d.view_mut((0, ny), (ny, nu)).copy_from(&(&wss.d * &p.d));
    if eps_u > 0.0 {
        for i in 0..nu {
            d[(ny + i, ny + i)] = eps_u;
        }
    }
    for i in 0..ny {
        d[(nz + i, i)] = -1.0;
    }
    d.view_mut((nz, ny), (ny, nu)).copy_from(&(-&p.d));

    StateSpace::new(a, b, c, d)
}

/// Stabilizing solution of a'X + Xa + q - XwX = 0 through the sign
/// function of the Hamiltonian [[a, -w], [-q, -a']]. Symmetric inputs
/// are assumed for q and w; the result is symmetrized and its residual
/// verified. Failure modes (spectrum touching the axis, no
/// n-dimensional stable subspace) come back as errors because for the
/// synthesis bisection they are feasibility verdicts.
pub fn solve_are(
    a: &DMatrix<f64>,
    w: &DMatrix<f64>,
    q: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n);
    assert_eq!((w.nrows(), w.ncols()), (n, n));
    assert_eq!((q.nrows(), q.ncols()), (n, n));
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-w));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));
    let s = matrix_sign(&h, 120, 1e-13)?;
    let proj = (DMatrix::identity(2 * n, 2 * n) - s) * 0.5;
    let basis = orth(&proj, 1e-6);
    if basis.ncols() != n {
        return Err(Error::SynthesisInfeasible(format!(
            "stable subspace has dimension {}, expected {}",
            basis.ncols(),
            n
        )));
    }
    let u1 = basis.view((0, 0), (n, n)).into_owned();
    let u2 = basis.view((n, 0), (n, n)).into_owned();
    let xt = u1
        .transpose()
        .lu()
        .solve(&u2.transpose())
        .ok_or(Error::SingularMatrix)?;
    let x = (xt.transpose() + xt) * 0.5;
    let res = a.transpose() * &x + &x * a + q - &x * w * &x;
    let scale = 1.0 + q.norm() + x.norm() * (a.norm() + x.norm() * w.norm());
    if res.norm() > RICCATI_TOL * scale {
        return Err(Error::Numerical(format!(
            "Riccati residual {:.3e} exceeds {:.3e}",
            res.norm(),
            RICCATI_TOL * scale
        )));
    }
    Ok(x)
}

/// Output of the gamma bisection: the central controller, the measured
/// closed-loop norm, an internal-stability verdict, and the number of
/// feasibility probes spent.
#[derive(Clone, Debug, Serialize)]
pub struct SynthesisResult {
    pub k: StateSpace,
    pub gamma: f64,
    pub closed_loop_ok: bool,
    pub iterations: usize,
}

struct Partition {
    a: DMatrix<f64>,
    b1: DMatrix<f64>,
    b2: DMatrix<f64>,
    c1: DMatrix<f64>,
    c2: DMatrix<f64>,
    d12: DMatrix<f64>,
    d21: DMatrix<f64>,
    d22: DMatrix<f64>,
}

fn partition(g: &StateSpace, nw: usize, nz: usize) -> Result<Partition> {
    let m = g.n_inputs();
    let p = g.n_outputs();
    if nw == 0 || nz == 0 || nw >= m || nz >= p {
        return Err(Error::Dimension(
            "the partition needs at least one signal in each of the four channels".into(),
        ));
    }
    let nu = m - nw;
    let ny = p - nz;
    let n = g.n_states();
    let pt = Partition {
        a: g.a.clone(),
        b1: g.b.view((0, 0), (n, nw)).into_owned(),
        b2: g.b.view((0, nw), (n, nu)).into_owned(),
        c1: g.c.view((0, 0), (nz, n)).into_owned(),
        c2: g.c.view((nz, 0), (ny, n)).into_owned(),
        d12: g.d.view((0, nw), (nz, nu)).into_owned(),
        d21: g.d.view((nz, 0), (ny, nw)).into_owned(),
        d22: g.d.view((nz, nw), (ny, nu)).into_owned(),
    };
    let d11 = g.d.view((0, 0), (nz, nw));
    let dscale = 1.0 + g.d.norm();
    if d11.iter().any(|x| x.abs() > 1e-12 * dscale) {
        return Err(Error::Precondition(
            "the disturbance feeds through to the performance output; \
             embed the weight with a roll-off first"
                .into(),
        ));
    }
    Ok(pt)
}

fn psd_within_tol(x: &DMatrix<f64>) -> bool {
    let sym = (x + x.transpose()) * 0.5;
    let eigs = sym.symmetric_eigenvalues();
    let peak = eigs.iter().fold(0.0f64, |m, &e| m.max(e.abs()));
    eigs.iter().all(|&e| e >= -RICCATI_TOL * (1.0 + peak))
}

/// Both Riccati solutions at one gamma, or None when that level is
/// infeasible (no dichotomy, indefinite solution, coupling violated).
fn feasible_at(pt: &Partition, gamma: f64) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    let g2 = gamma * gamma;
    let r2 = pt.d12.transpose() * &pt.d12;
    let r2i = r2.try_inverse()?;
    let sx = pt.c1.transpose() * &pt.d12;
    let abar = &pt.a - &pt.b2 * &r2i * sx.transpose();
    let qbar = {
        let q = pt.c1.transpose() * &pt.c1 - &sx * &r2i * sx.transpose();
        (&q + q.transpose()) * 0.5
    };
    let wbar = {
        let w = &pt.b2 * &r2i * pt.b2.transpose() - &pt.b1 * pt.b1.transpose() / g2;
        (&w + w.transpose()) * 0.5
    };
    let x = solve_are(&abar, &wbar, &qbar).ok()?;
    if !psd_within_tol(&x) {
        return None;
    }

    let r2t = &pt.d21 * pt.d21.transpose();
    let r2ti = r2t.try_inverse()?;
    let sy = &pt.b1 * pt.d21.transpose();
    let atil = &pt.a - &sy * &r2ti * &pt.c2;
    let qtil = {
        let q = &pt.b1 * pt.b1.transpose() - &sy * &r2ti * sy.transpose();
        (&q + q.transpose()) * 0.5
    };
    let wtil = {
        let w = pt.c2.transpose() * &r2ti * &pt.c2 - pt.c1.transpose() * &pt.c1 / g2;
        (&w + w.transpose()) * 0.5
    };
    let y = solve_are(&atil.transpose(), &wtil, &qtil).ok()?;
    if !psd_within_tol(&y) {
        return None;
    }

    let rho = balanced_eigenvalues(&(&x * &y))
        .iter()
        .map(|l| l.norm())
        .fold(0.0, f64::max);
    if rho >= g2 * (1.0 - 1e-9) {
        return None;
    }
    Some((x, y))
}

/// Central controller at `gamma` from the two stabilizing solutions.
fn central_controller(
    pt: &Partition,
    gamma: f64,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
) -> Result<StateSpace> {
    let g2i = 1.0 / (gamma * gamma);
    let n = pt.a.nrows();
    let r2 = pt.d12.transpose() * &pt.d12;
    let r2i = r2.try_inverse().ok_or(Error::SingularMatrix)?;
    let sx = pt.c1.transpose() * &pt.d12;
    let f = -(&r2i * (pt.b2.transpose() * x + sx.transpose()));
    let r2t = &pt.d21 * pt.d21.transpose();
    let r2ti = r2t.try_inverse().ok_or(Error::SingularMatrix)?;
    let sy = &pt.b1 * pt.d21.transpose();
    let l = -((y * pt.c2.transpose() + &sy) * &r2ti);
    let z = (DMatrix::identity(n, n) - y * x * g2i)
        .try_inverse()
        .ok_or(Error::SingularMatrix)?;
    let zl = &z * &l;
    let ahat = &pt.a
        + &pt.b1 * pt.b1.transpose() * x * g2i
        + &pt.b2 * &f
        + &zl * (&pt.c2 + &pt.d21 * pt.b1.transpose() * x * g2i);
    let bk = -zl;
    // Nonzero plant feedthrough: the design above saw y - d22*u, so the
    // state equation subtracts the synthetic feedthrough path.
    let ak = &ahat - &bk * &pt.d22 * &f;
    let nu = f.nrows();
    let ny = bk.ncols();
    StateSpace::new(ak, bk, f, DMatrix::zeros(nu, ny))
}

fn pbh_min_sigma(a: &DMatrix<f64>, side: &DMatrix<f64>, lambda: Complex64, by_rows: bool) -> f64 {
    let n = a.nrows();
    let extra = if by_rows { side.nrows() } else { side.ncols() };
    let (rows, cols) = if by_rows {
        (n + extra, n)
    } else {
        (n, n + extra)
    };
    let m = DMatrix::<Complex64>::from_fn(rows, cols, |i, j| {
        if i < n && j < n {
            let mut v = Complex64::new(a[(i, j)], 0.0);
            if i == j {
                v -= lambda;
            }
            v
        } else if by_rows {
            Complex64::new(side[(i - n, j)], 0.0)
        } else {
            Complex64::new(side[(i, j - n)], 0.0)
        }
    });
    m.svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Gamma bisection for the partitioned generalized plant `g` with `nw`
/// exogenous inputs and `nz` performance outputs. Preconditions
/// (strictly proper performance channel, full-rank feedthroughs,
/// stabilizability and detectability of the control loop) are checked
/// up front. The returned gamma is the measured closed-loop norm of
/// the accepted central controller, not the bisection bound.
pub fn hinf_synthesize(
    g: &StateSpace,
    nw: usize,
    nz: usize,
    gamma_range: (f64, f64),
) -> Result<SynthesisResult> {
    let pt = partition(g, nw, nz)?;
    let scale = 1.0 + g.d.norm();
    let svd12 = pt.d12.clone().svd(false, false);
    let min12 = svd12.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    if pt.d12.nrows() < pt.d12.ncols() || min12 <= 1e-9 * scale {
        return Err(Error::RankAssumption(
            "the control-to-performance feedthrough is column rank deficient; \
             increase the control penalty"
                .into(),
        ));
    }
    let svd21 = pt.d21.clone().svd(false, false);
    let min21 = svd21.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    if pt.d21.ncols() < pt.d21.nrows() || min21 <= 1e-9 * scale {
        return Err(Error::RankAssumption(
            "the disturbance-to-measurement feedthrough is row rank deficient".into(),
        ));
    }
    let mscale = 1e-8 * (1.0 + pt.a.norm() + pt.b2.norm() + pt.c2.norm());
    for l in balanced_eigenvalues(&pt.a) {
        if l.re < -1e-7 {
            continue;
        }
        if pbh_min_sigma(&pt.a, &pt.b2, l, false) <= mscale {
            return Err(Error::RankAssumption(format!(
                "mode at {:.4} + {:.4}j is not stabilizable through the control input",
                l.re, l.im
            )));
        }
        if pbh_min_sigma(&pt.a, &pt.c2, l, true) <= mscale {
            return Err(Error::RankAssumption(format!(
                "mode at {:.4} + {:.4}j is not detectable from the measurement",
                l.re, l.im
            )));
        }
    }

    let (mut lo, mut hi) = gamma_range;
    lo = lo.max(1e-6);
    if !(hi > lo) {
        return Err(Error::Precondition(format!(
            "empty gamma bracket [{lo}, {hi}]"
        )));
    }
    let mut iterations = 1usize;
    if feasible_at(&pt, hi).is_none() {
        return Err(Error::SynthesisInfeasible(format!(
            "no stabilizing solution at or below gamma = {hi}"
        )));
    }
    while hi - lo > GAMMA_TOL * hi && iterations < GAMMA_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        iterations += 1;
        if feasible_at(&pt, mid).is_some() {
            hi = mid;
        } else {
            lo = mid;
        }
    }

    // Back off from the feasibility boundary, where the coupling
    // condition makes the controller formulas ill conditioned.
    let mut accepted: Option<(f64, StateSpace, StateSpace)> = None;
    for cand in [
        hi * (1.0 + GAMMA_SLACK),
        hi * (1.0 + 2.0 * GAMMA_SLACK),
        hi,
    ] {
        let Some((x, y)) = feasible_at(&pt, cand) else {
            continue;
        };
        let Ok(k) = central_controller(&pt, cand, &x, &y) else {
            continue;
        };
        let Ok(lft) = lft_lower(g, nw, nz, &k) else {
            continue;
        };
        if lft.is_stable() {
            accepted = Some((cand, k, lft));
            break;
        }
    }
    match accepted {
        Some((_, k, lft)) => {
            let gamma = hinf_norm(&lft)?;
            Ok(SynthesisResult {
                k,
                gamma,
                closed_loop_ok: true,
                iterations,
            })
        }
        None => Err(Error::SynthesisInfeasible(
            "the central controller failed to stabilize the closed loop \
             at any slack level above the bisection bound"
                .into(),
        )),
    }
}

/// Relocates every real pole with |p| < pole_tol to exactly zero,
/// leaving all other modes untouched. The near-zero cluster is
/// extracted by shifted block inverse iteration on both sides; a
/// defective cluster (ill-conditioned left-right pairing) is an error,
/// as is any relocation that moves the frequency response above
/// 10*pole_tol by more than one percent.
pub fn purify_integrators(k: &StateSpace, pole_tol: f64) -> Result<StateSpace> {
    let n = k.n_states();
    if n == 0 {
        return Ok(k.clone());
    }
    let mut a = k.a.clone();
    let mut total_shift = 0.0f64;
    for _pass in 0..3 {
        let eigs = balanced_eigenvalues(&a);
        let cluster: Vec<Complex64> = eigs.iter().copied().filter(|l| l.norm() < pole_tol).collect();
        if cluster.is_empty() {
            break;
        }
        if cluster.iter().any(|l| l.im.abs() > 1e-3 * pole_tol) {
            return Err(Error::Precondition(
                "a complex pole pair sits near the origin; it has no single-integrator \
                 replacement"
                    .into(),
            ));
        }
        if cluster.iter().map(|l| l.re.abs()).fold(0.0, f64::max) < 1e-12 {
            break;
        }
        let kk = cluster.len();
        let shift = cluster.iter().map(|l| l.re).sum::<f64>() / kk as f64;
        let v = invariant_block(&a, shift, kk)?;
        let wt = invariant_block(&a.transpose(), shift, kk)?;
        let m_small = v.transpose() * &a * &v;
        let gram = wt.transpose() * &v;
        let gsvd = gram.clone().svd(false, false);
        let gmax = gsvd.singular_values.iter().copied().fold(0.0, f64::max);
        let gmin = gsvd
            .singular_values
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if !(gmin > 1e-8 * gmax) {
            return Err(Error::Precondition(
                "the near-zero poles are defective (Jordan structure); refusing to \
                 relocate them"
                    .into(),
            ));
        }
        let ginv = gram.try_inverse().ok_or(Error::SingularMatrix)?;
        a -= &v * &m_small * &ginv * wt.transpose();
        total_shift += cluster.iter().map(|l| l.norm()).sum::<f64>();
    }
    let purified = StateSpace {
        a,
        b: k.b.clone(),
        c: k.c.clone(),
        d: k.d.clone(),
    };
    // A clean relocation perturbs the response by about shift/omega; a
    // botched one (ill-conditioned modal pairing) blows past that.
    for decade in 0..6 {
        let omega = 10.0 * pole_tol * 10f64.powi(decade);
        let before = k.eval(Complex64::new(0.0, omega))?;
        let after = purified.eval(Complex64::new(0.0, omega))?;
        let denom = before.norm().max(1e-12);
        let allowed = 0.01 + 3.0 * total_shift / omega;
        if (&after - &before).norm() > allowed * denom {
            return Err(Error::Numerical(format!(
                "integrator relocation moved the response at {omega} rad/s beyond \
                 the pole-shift budget"
            )));
        }
    }
    Ok(purified)
}

/// State reduction that refuses to lie: accepts the minimal
/// realization only when it matches the original response on a
/// frequency grid, falling back to the unreduced system otherwise.
/// Synthesized controllers mix decade-spanning pole scales, and a
/// relative rank floor can truncate a slow mode that still matters.
fn faithful_minimal(ss: &StateSpace) -> StateSpace {
    let m = minimal(ss);
    if m.n_states() == ss.n_states() {
        return m;
    }
    for om in log_grid(-3.0, 3.0, 25) {
        let s = Complex64::new(0.0, om);
        let (Ok(full), Ok(red)) = (ss.eval(s), m.eval(s)) else {
            return ss.clone();
        };
        if (&red - &full).norm() > 1e-6 * (1.0 + full.norm()) {
            return ss.clone();
        }
    }
    m
}

/// Orthonormal basis of the invariant subspace for the `k` eigenvalues
/// nearest `shift`, by inverse subspace iteration.
fn invariant_block(a: &DMatrix<f64>, shift: f64, k: usize) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut shifted = a.clone();
    for i in 0..n {
        shifted[(i, i)] -= shift;
    }
    let mut lu = shifted.clone().lu();
    if lu.determinant().abs() < 1e-300 {
        // The shift hit an eigenvalue exactly; nudge it.
        for i in 0..n {
            shifted[(i, i)] -= 1e-3 * STAB_MARGIN.max(1e-9);
        }
        lu = shifted.clone().lu();
    }
    let mut v = DMatrix::from_fn(n, k, |i, j| {
        let h = (i as u64 + 1).wrapping_mul(2654435761).wrapping_add(j as u64 * 40503);
        ((h % 1000003) as f64) / 1000003.0 - 0.5
    });
    let mut prev = DMatrix::<f64>::zeros(n, n);
    for _ in 0..60 {
        let solved = lu.solve(&v).ok_or(Error::SingularMatrix)?;
        let qr = solved.qr();
        v = qr.q().columns(0, k).into_owned();
        let proj = &v * v.transpose();
        if (&proj - &prev).norm() < 1e-13 {
            break;
        }
        prev = proj;
    }
    Ok(v)
}

/// Interpolation floor for the achievable performance level: the
/// weight cannot be beaten below its own magnitude at any unstable
/// plant zero, because the output sensitivity is pinned to one there.
pub fn weighted_zero_bound(p: &RatMatrix, w: &PerfWeight) -> f64 {
    let zeros = transmission_zeros(p);
    let mut bound: f64 = 0.0;
    for z in zeros.unstable() {
        let s = Complex64::new(z.re, z.im);
        let m = w
            .channels
            .iter()
            .map(|c| c.eval(s).norm())
            .fold(f64::INFINITY, f64::min);
        if m.is_finite() {
            bound = bound.max(m);
        }
    }
    bound
}

/// Full tracking synthesis for a rational plant: roll-off embedding,
/// control-penalty regularization with halving on rank failures,
/// integrator purification, and an honest closed-loop norm re-measured
/// against the biproper weight. The result's controller is the
/// purified one.
pub fn synthesize_tracking(
    p: &RatMatrix,
    w: &PerfWeight,
    eps_u_start: f64,
) -> Result<SynthesisResult> {
    let p_ss = realize(p)?;
    let ny = p_ss.n_outputs();
    let nu = p_ss.n_inputs();
    if w.len() != ny {
        return Err(Error::Dimension(format!(
            "weight has {} channels for a plant with {ny} outputs",
            w.len()
        )));
    }
    let rolloff = 1e3
        * w.channels
            .iter()
            .map(|c| c.bandwidth)
            .fold(0.0, f64::max);
    let bound = weighted_zero_bound(p, w);
    let range = (if bound > 0.0 { 0.5 * bound } else { 1e-4 }, 100.0);

    let mut eps_u = eps_u_start.max(EPS_U_MIN);
    let raw = loop {
        let g = assemble_generalized(&p_ss, &w.realize_strict(rolloff), eps_u)?;
        match hinf_synthesize(&g, ny, ny + nu, range) {
            Ok(s) => break s,
            Err(Error::RankAssumption(_)) if eps_u > EPS_U_MIN => eps_u *= 0.5,
            Err(e) => return Err(e),
        }
    };
    let k = purify_integrators(&raw.k, POLE_TOL)?;
    let g_exact = augment_plant(&p_ss, w, eps_u)?;
    let lft = lft_lower(&g_exact, ny, ny + nu, &k)?;
    let cl = closed_loop(&p_ss, &k)?;
    let ok = lft.is_stable() && cl.is_internally_stable();
    let gamma = if lft.is_stable() {
        hinf_norm(&lft)?
    } else {
        raw.gamma
    };
    Ok(SynthesisResult {
        k,
        gamma,
        closed_loop_ok: ok,
        iterations: raw.iterations,
    })
}

/// Stable approximate inverse for a full-row-rank plant: the closed
/// loop's reference-to-control map. `generator` shares the loop state
/// (plant then controller), so simulations can seed its initial state.
pub struct SikInverse {
    pub xi: RatMatrix,
    pub generator: StateSpace,
    pub synthesis: SynthesisResult,
}

pub fn approx_inverse_sik(p: &RatMatrix, w: &PerfWeight) -> Result<SikInverse> {
    approx_inverse_sik_with(p, w, EPS_U_DEFAULT)
}

/// Same construction with an explicit control penalty. A larger
/// `eps_u` buys a tamer inverse: the synthesized operator stops trying
/// to invert the plant far beyond the weight bandwidth, which lowers
/// the loop gain it presents to unmodeled dynamics.
pub fn approx_inverse_sik_with(p: &RatMatrix, w: &PerfWeight, eps_u: f64) -> Result<SikInverse> {
    let (ny, nu) = (p.rows(), p.cols());
    let (r, _) = rank_rs(p);
    if r != ny || ny > nu {
        return Err(Error::RankAssumption(format!(
            "the reference-to-control inverse needs full row rank with at least as many \
             inputs as outputs; got rank {r} for a {ny}x{nu} plant"
        )));
    }
    let synthesis = synthesize_tracking(p, w, eps_u)?;
    if !synthesis.closed_loop_ok {
        return Err(Error::Unstable(
            "synthesis did not deliver an internally stable loop".into(),
        ));
    }
    let p_ss = realize(p)?;
    let cl = closed_loop(&p_ss, &synthesis.k)?;
    let generator = cl.to_control;
    if !generator.is_stable() {
        return Err(Error::Unstable(
            "the reference-to-control map has an unstable realization".into(),
        ));
    }
    let xi = ss_to_tfm(&faithful_minimal(&generator));
    Ok(SikInverse {
        xi,
        generator,
        synthesis,
    })
}

/// Which scalar stands in for a tall plant in the scalar loop design.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarPick {
    /// A single entry, by (row, column).
    Entry(usize, usize),
    /// The arithmetic mean of one column.
    ColumnAverage(usize),
}

impl Default for ScalarPick {
    fn default() -> Self {
        ScalarPick::Entry(0, 0)
    }
}

/// Stable approximate inverse for a tall plant: a scalar complementary
/// sensitivity, interpolating zero at every unstable plant zero,
/// multiplied onto the exact pseudo-inverse. `scalar_plant` is the
/// loop plant after any zero augmentation.
pub struct TpInverse {
    pub xi: RatMatrix,
    pub t_p: RatFn,
    pub p_dagger: RatMatrix,
    pub scalar_plant: RatFn,
    pub synthesis: SynthesisResult,
}

pub fn approx_inverse_tp(p: &RatMatrix, pick: ScalarPick, w: &PerfWeight) -> Result<TpInverse> {
    let (ny, nu) = (p.rows(), p.cols());
    let (r, _) = rank_rs(p);
    if !(r == nu && nu < ny) {
        return Err(Error::RankAssumption(format!(
            "the scalar-loop inverse needs a tall plant with full column rank; \
             got rank {r} for a {ny}x{nu} plant"
        )));
    }
    if w.len() != 1 {
        return Err(Error::Dimension(
            "the scalar loop takes a single weight channel".into(),
        ));
    }
    let p_dagger = pseudo_inverse(p)?;
    let picked = match pick {
        ScalarPick::Entry(i, j) => {
            if i >= ny || j >= nu {
                return Err(Error::Dimension(format!(
                    "entry ({i}, {j}) is outside a {ny}x{nu} plant"
                )));
            }
            p[(i, j)].clone()
        }
        ScalarPick::ColumnAverage(j) => {
            if j >= nu {
                return Err(Error::Dimension(format!(
                    "column {j} is outside a {ny}x{nu} plant"
                )));
            }
            let mut sum = RatFn::zero();
            for i in 0..ny {
                sum = &sum + &p[(i, j)];
            }
            sum.scale(&Rat::new(1.into(), (ny as i64).into()))
        }
    };
    if picked.is_zero() {
        return Err(Error::Precondition(
            "the picked scalar plant is identically zero".into(),
        ));
    }
    let carrier = allpass_from_plant(p)?;
    let scalar_plant = augment_with_missing_zeros(&picked, &carrier.z_plus)?;

    let p_p_mat = RatMatrix::col_vector(vec![scalar_plant.clone()]);
    let synthesis = synthesize_tracking(&p_p_mat, w, EPS_U_DEFAULT)?;
    if !synthesis.closed_loop_ok {
        return Err(Error::Unstable(
            "scalar synthesis did not deliver an internally stable loop".into(),
        ));
    }
    let k_rat = ss_to_tfm(&faithful_minimal(&synthesis.k));
    let l = &scalar_plant * &k_rat[(0, 0)];
    let t_p = RatFn::new(l.num().clone(), l.den() + l.num())?;

    let grid_peak = log_grid(-3.0, 3.0, 61)
        .into_iter()
        .map(|om| t_p.eval(Complex64::new(0.0, om)).norm())
        .filter(|v| v.is_finite())
        .fold(1.0, f64::max);
    for root in poly_roots(&carrier.z_plus, MULT_TOL) {
        let v = t_p.eval(root.value).norm();
        if v > INTERP_TOL * grid_peak {
            return Err(Error::Precondition(format!(
                "the scalar loop does not vanish at the unstable zero {} + {}j: \
                 |T_p| = {v:.3e}; relax the weight bandwidth",
                root.value.re, root.value.im
            )));
        }
    }
    let xi = p_dagger.scale(&t_p);
    if let Some(pole) = first_unstable_pole(&xi) {
        return Err(Error::Numerical(format!(
            "unstable pole at {pole:.6} survived the scalar-loop cancellation"
        )));
    }
    Ok(TpInverse {
        xi,
        t_p,
        p_dagger,
        scalar_plant,
        synthesis,
    })
}

/// Multiplies the missing part of the unstable carrier into the scalar
/// plant as a proper all-pass-shaped factor missing/mirror(missing),
/// so the scalar loop's numerator carries every unstable plant zero
/// exactly. Factors already present (to multiplicity) are left alone.
fn augment_with_missing_zeros(p_p: &RatFn, z_plus: &Poly) -> Result<RatFn> {
    if z_plus.is_constant() {
        return Ok(p_p.clone());
    }
    let present = p_p.num().gcd(z_plus);
    let (missing, rem) = z_plus.div_rem(&present)?;
    debug_assert!(rem.is_zero(), "gcd must divide the carrier");
    if missing.is_constant() {
        return Ok(p_p.clone());
    }
    let factor = RatFn::new(missing.clone(), mirror_coeffs(&missing))?;
    Ok(p_p * &factor)
}

/// Coefficient-level mirror: p built from roots {z_i} maps to the
/// polynomial with roots {-z_i} and the same leading coefficient.
fn mirror_coeffs(p: &Poly) -> Poly {
    let d = p.deg_or_zero();
    let coeffs: Vec<Rat> = p
        .coeffs()
        .iter()
        .enumerate()
        .map(|(k, c)| {
            if (d - k) % 2 == 1 {
                -c.clone()
            } else {
                c.clone()
            }
        })
        .collect();
    Poly::new(coeffs)
}
