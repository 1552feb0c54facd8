//! Built-in demonstration systems.
//!
//! Every coefficient here is parsed from a decimal string rather than written
//! as an `f64` literal. Decimal fractions such as 0.3 have no exact binary
//! representation, and building a plant from float literals silently replaces
//! 3/10 by the nearest dyadic rational. All downstream exact algebra (Smith
//! forms, pseudo-inverses, zero sets) would then certify the wrong matrix.
//! Parsing strings keeps the models identical to their printed definitions.
//!
//! Three systems are provided: a square two-by-two plant with one
//! right-half-plane zero, a perturbed variant of it with shifted poles and
//! zeros used in robustness scenarios, and a tall single-input plant whose
//! reference signal lies outside the image of the plant. The initial-state
//! vectors used by the robust tracking scenario are also kept here so the
//! command line and the test suite agree on them.

use crate::hinf::PerfWeight;
use crate::polymat::RatMatrix;
use crate::rational::{parse_rat, Poly, Rat, RatFn};
use crate::sim::{Disturbance, InverseSpec, PlantSpec, Scenario, SignalSpec};

/// Polynomial from ascending decimal-string coefficients.
pub(crate) fn poly_dec(coeffs: &[&str]) -> Poly {
    let c: Vec<Rat> = coeffs
        .iter()
        .map(|s| parse_rat(s).expect("valid decimal literal"))
        .collect();
    Poly::new(c)
}

/// Rational function from ascending decimal-string coefficient lists.
pub(crate) fn rf_dec(num: &[&str], den: &[&str]) -> RatFn {
    RatFn::new(poly_dec(num), poly_dec(den)).expect("nonzero denominator")
}

/// Square two-output benchmark plant with a right-half-plane zero at s = 1.
///
/// ```text
///         (1-s)/(s+1)^2            0.3/(s+0.5)
///         -(1-s)/((s+1)^2 (s+2))   2/(s+3)
/// ```
pub fn benchmark_plant() -> RatMatrix {
    RatMatrix::new(
        2,
        2,
        vec![
            rf_dec(&["1", "-1"], &["1", "2", "1"]),
            rf_dec(&["0.3"], &["0.5", "1"]),
            rf_dec(&["-1", "1"], &["2", "5", "4", "1"]),
            rf_dec(&["2"], &["3", "1"]),
        ],
    )
}

/// Perturbed variant of [`benchmark_plant`]: different poles, different
/// zeros, one right-half-plane zero moved to s = 0.2.
///
/// ```text
///         (0.2-s)/(s^2+20s+100)        0.3/(s+0.1)
///         (s^2+1.8s-0.4)/(s^2+8s+16)   2/(s+2.1)
/// ```
pub fn perturbed_plant() -> RatMatrix {
    RatMatrix::new(
        2,
        2,
        vec![
            rf_dec(&["0.2", "-1"], &["100", "20", "1"]),
            rf_dec(&["0.3"], &["0.1", "1"]),
            rf_dec(&["-0.4", "1.8", "1"], &["16", "8", "1"]),
            rf_dec(&["2"], &["2.1", "1"]),
        ],
    )
}

/// Tall single-input plant with an invariant zero at s = 10.
///
/// ```text
///         (s^2-5s-50)/(s^2+3s+2)
///         (s-10)/(s^2+3s+2)
/// ```
pub fn tall_plant() -> RatMatrix {
    RatMatrix::new(
        2,
        1,
        vec![
            rf_dec(&["-50", "-5", "1"], &["2", "3", "1"]),
            rf_dec(&["-10", "1"], &["2", "3", "1"]),
        ],
    )
}

/// Reference vector for the tall plant: a mix of a sinusoid and steps.
///
/// ```text
///         2/(s^2+1) + 8/s
///         1/s
/// ```
///
/// Marginal poles at 0 and +-j are intentional; the simulator generates the
/// matching time signals directly instead of realizing this vector.
pub fn tall_reference() -> RatMatrix {
    let first = &rf_dec(&["2"], &["1", "0", "1"]) + &rf_dec(&["8"], &["0", "1"]);
    let second = rf_dec(&["1"], &["0", "1"]);
    RatMatrix::col_vector(vec![first, second])
}

/// Plant initial state for the robust tracking scenario.
pub fn scenario_plant_x0() -> Vec<f64> {
    vec![3.1, 4.1, -3.7, 4.1, 1.3, -4.0]
}

/// Feedforward-inverse initial state for the robust tracking scenario.
pub fn scenario_ff_x0() -> Vec<f64> {
    vec![
        -0.2, 0.6, 1.9, 1.9, -0.5, 1.9, 1.8, 0.4, 1.4, -0.6, 0.3, 1.7, 1.4, 1.8,
    ]
}

/// Feedback-inverse initial state for the robust tracking scenario.
pub fn scenario_fb_x0() -> Vec<f64> {
    vec![
        0.3, -0.9, 0.7, 0.9, 0.4, 0.5, 0.5, 0.5, -0.2, 0.3, -0.7, 0.4, -1.0, -0.4, -0.9,
    ]
}

/// Canonical robust tracking scenario: the benchmark plant drives the
/// design while the physical system has drifted to the perturbed model,
/// with unit step references on both channels and a unit output step
/// disturbance landing on both channels at t = 125 s.
///
/// The mismatch between the two models is severe: the perturbed DC gain
/// matrix is nearly singular in a direction the nominal inverts with
/// gain one, so the corrective loop keeps a real pole near -0.017 for
/// every stabilizing design. The weights below (bandwidth 1.5, input
/// penalty 1.0, no all-pass filter on the mismatch) were picked by an
/// eigenvalue scan as the fastest design that keeps that loop stable;
/// convergence is still dominated by the slow pole.
pub fn robust_tracking_scenario(use_listed_ics: bool) -> Scenario {
    let step = |amp: f64| vec![SignalSpec::Step { amp, t0: 0.0 }];
    let (x0, xbar0_1, xbar0_2) = if use_listed_ics {
        (scenario_plant_x0(), scenario_ff_x0(), scenario_fb_x0())
    } else {
        (vec![], vec![], vec![])
    };
    Scenario {
        plant_nominal: PlantSpec::Rational(benchmark_plant()),
        plant_actual: Some(PlantSpec::Rational(perturbed_plant())),
        inverse_ff: InverseSpec::Sik {
            weight: PerfWeight::uniform(2, 2.0, 1.5, 1e-3).expect("valid weight"),
            eps_u: Some(1.0),
        },
        inverse_fb: None,
        allpass_filter_in_fb: false,
        y_d: vec![step(1.0), step(1.0)],
        disturbance: Some(Disturbance {
            channels: vec![step(1.0), step(1.0)],
            t0: 125.0,
        }),
        x0,
        xbar0_1,
        xbar0_2,
        t_final: 250.0,
        dt: 1e-3,
        loop_delay_steps: 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::transmission_zeros;
    use crate::polymat::membership_im;
    use crate::rational::poly_roots;

    #[test]
    fn benchmark_plant_zero_set() {
        let zs = transmission_zeros(&benchmark_plant());
        let mut vals: Vec<f64> = zs.zeros.iter().map(|z| z.re).collect();
        vals.sort_by(f64::total_cmp);
        assert_eq!(vals.len(), 3);
        // Roots of 2s^2 + 5.3s + 2.9 alongside the right-half-plane zero.
        let disc = (5.3f64 * 5.3 - 4.0 * 2.0 * 2.9).sqrt();
        assert!((vals[0] - (-5.3 - disc) / 4.0).abs() < 1e-9);
        assert!((vals[1] - (-5.3 + disc) / 4.0).abs() < 1e-9);
        assert!((vals[2] - 1.0).abs() < 1e-9);
        let unstable = zs.unstable();
        assert_eq!(unstable.len(), 1);
        assert!((unstable[0].re - 1.0).abs() < 1e-9);
    }

    #[test]
    fn perturbed_plant_zero_set() {
        // Oracle: the determinant numerator expanded by hand, root-solved
        // directly, bypassing the Smith route used by transmission_zeros.
        let det_num = poly_dec(&["25.84", "-92.84", "-167.388", "-70.214", "-9.17", "-0.3"]);
        let mut direct: Vec<f64> = poly_roots(&det_num, crate::tol::MULT_TOL)
            .iter()
            .map(|r| r.value.re)
            .collect();
        direct.sort_by(f64::total_cmp);

        let zs = transmission_zeros(&perturbed_plant());
        let mut vals: Vec<f64> = zs.zeros.iter().map(|z| z.re).collect();
        vals.sort_by(f64::total_cmp);
        assert_eq!(vals.len(), direct.len());
        for (a, b) in vals.iter().zip(direct.iter()) {
            assert!((a - b).abs() < 1e-7, "zero mismatch {a} vs {b}");
        }
        // s = 0.2 is an exact root: the right-half-plane zero of the
        // perturbation.
        let unstable = zs.unstable();
        assert_eq!(unstable.len(), 1);
        assert!((unstable[0].re - 0.2).abs() < 1e-9);
    }

    #[test]
    fn tall_plant_structure() {
        let p = tall_plant();
        let (cleared, delta) = p.clear_denominators();
        assert_eq!(delta, poly_dec(&["2", "3", "1"]));
        // Numerators share the factor (s - 10).
        let g = cleared[(0, 0)].gcd(&cleared[(1, 0)]);
        assert_eq!(g.monic(), poly_dec(&["-10", "1"]).monic());
        let zs = transmission_zeros(&p);
        assert_eq!(zs.zeros.len(), 1);
        assert!((zs.zeros[0].re - 10.0).abs() < 1e-9);
    }

    #[test]
    fn tall_reference_outside_image() {
        let (ok, _) = membership_im(&tall_plant(), &tall_reference());
        assert!(!ok, "reference must not lie in the plant image");
    }

    #[test]
    fn scenario_state_lengths() {
        assert_eq!(scenario_plant_x0().len(), 6);
        assert_eq!(scenario_ff_x0().len(), 14);
        assert_eq!(scenario_fb_x0().len(), 15);
    }
}
