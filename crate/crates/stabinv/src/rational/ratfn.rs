//! Reduced rational functions over the exact polynomial ring.
//!
//! Canonical form: denominator monic, numerator and denominator
//! coprime, zero represented as 0/1. Every constructor and operator
//! restores this form, so equality is structural.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num::complex::Complex64;
use num::One;
use serde::{Deserialize, Serialize};

use super::poly::{Poly, Rat};
use super::roots::{poly_roots, Root};
use crate::error::{Error, Result};
use crate::tol;

#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RatFn {
    num: Poly,
    den: Poly,
}

impl RatFn {
    /// Builds `num/den` in canonical form. Errors on a zero denominator.
    pub fn new(num: Poly, den: Poly) -> Result<Self> {
        if den.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        Ok(Self::reduce(num, den))
    }

    fn reduce(num: Poly, den: Poly) -> Self {
        if num.is_zero() {
            return RatFn {
                num: Poly::zero(),
                den: Poly::one(),
            };
        }
        let g = num.gcd(&den);
        let (mut n, _) = num.div_rem(&g).expect("gcd divides");
        let (mut d, _) = den.div_rem(&g).expect("gcd divides");
        let lc = d.leading();
        if !lc.is_one() {
            let inv = Rat::one() / lc;
            n = n.scale(&inv);
            d = d.scale(&inv);
        }
        RatFn { num: n, den: d }
    }

    pub fn zero() -> Self {
        RatFn {
            num: Poly::zero(),
            den: Poly::one(),
        }
    }

    pub fn one() -> Self {
        RatFn {
            num: Poly::one(),
            den: Poly::one(),
        }
    }

    pub fn from_poly(p: Poly) -> Self {
        RatFn {
            num: p,
            den: Poly::one(),
        }
    }

    pub fn constant(c: Rat) -> Self {
        RatFn::from_poly(Poly::constant(c))
    }

    /// Parses `num` and `den` coefficient lists given as integers.
    pub fn from_ints(num: &[i64], den: &[i64]) -> Result<Self> {
        RatFn::new(Poly::from_ints(num), Poly::from_ints(den))
    }

    /// Builds from float coefficient lists, each float taken exactly.
    pub fn from_f64s(num: &[f64], den: &[f64]) -> Result<Self> {
        RatFn::new(Poly::from_f64s(num), Poly::from_f64s(den))
    }

    pub fn num(&self) -> &Poly {
        &self.num
    }

    pub fn den(&self) -> &Poly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.num.is_one() && self.den.is_one()
    }

    pub fn is_constant(&self) -> bool {
        self.num.is_constant() && self.den.is_one()
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_one()
    }

    /// Relative degree `deg den - deg num`; zero counts as proper.
    pub fn relative_degree(&self) -> i64 {
        if self.is_zero() {
            return i64::MAX;
        }
        self.den.deg_or_zero() as i64 - self.num.deg_or_zero() as i64
    }

    pub fn is_proper(&self) -> bool {
        self.is_zero() || self.relative_degree() >= 0
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.is_zero() || self.relative_degree() >= 1
    }

    pub fn inverse(&self) -> Result<RatFn> {
        if self.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        RatFn::new(self.den.clone(), self.num.clone())
    }

    pub fn derivative(&self) -> RatFn {
        // (n/d)' = (n'd - nd') / d^2
        let n = &(&self.num.derivative() * &self.den) - &(&self.num * &self.den.derivative());
        RatFn::reduce(n, &self.den * &self.den)
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.num.eval(z) / self.den.eval(z)
    }

    /// Exact evaluation at a rational point; `None` at a pole.
    pub fn eval_rat(&self, x: &Rat) -> Option<Rat> {
        let d = self.den.eval_rat(x);
        if d == Rat::from_integer(0.into()) {
            None
        } else {
            Some(self.num.eval_rat(x) / d)
        }
    }

    pub fn poles(&self) -> Vec<Root> {
        poly_roots(&self.den, tol::MULT_TOL)
    }

    pub fn zeros(&self) -> Vec<Root> {
        poly_roots(&self.num, tol::MULT_TOL)
    }

    /// Splits into polynomial part and strictly proper remainder:
    /// `self = q + r/den`.
    pub fn poly_split(&self) -> (Poly, RatFn) {
        if self.is_strictly_proper() {
            return (Poly::zero(), self.clone());
        }
        let (q, r) = self.num.div_rem(&self.den).expect("nonzero denominator");
        (
            q,
            RatFn {
                num: r,
                den: self.den.clone(),
            },
        )
    }

    pub fn scale(&self, c: &Rat) -> RatFn {
        RatFn::reduce(self.num.scale(c), self.den.clone())
    }

    /// All poles strictly inside the open left half plane, by margin.
    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|r| r.value.re < -tol::STAB_MARGIN)
    }
}

impl fmt::Debug for RatFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for RatFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_one() {
            write!(f, "{}", self.num)
        } else {
            write!(f, "({}) / ({})", self.num, self.den)
        }
    }
}

impl Add for &RatFn {
    type Output = RatFn;
    fn add(self, rhs: &RatFn) -> RatFn {
        let num = &(&self.num * &rhs.den) + &(&rhs.num * &self.den);
        RatFn::reduce(num, &self.den * &rhs.den)
    }
}

impl Sub for &RatFn {
    type Output = RatFn;
    fn sub(self, rhs: &RatFn) -> RatFn {
        let num = &(&self.num * &rhs.den) - &(&rhs.num * &self.den);
        RatFn::reduce(num, &self.den * &rhs.den)
    }
}

impl Mul for &RatFn {
    type Output = RatFn;
    fn mul(self, rhs: &RatFn) -> RatFn {
        // Cross-reduce first to keep intermediate degrees low.
        let g1 = self.num.gcd(&rhs.den);
        let g2 = rhs.num.gcd(&self.den);
        let (n1, _) = self.num.div_rem(&g1).expect("gcd divides");
        let (d2, _) = rhs.den.div_rem(&g1).expect("gcd divides");
        let (n2, _) = rhs.num.div_rem(&g2).expect("gcd divides");
        let (d1, _) = self.den.div_rem(&g2).expect("gcd divides");
        RatFn::reduce(&n1 * &n2, &d1 * &d2)
    }
}

impl Div for &RatFn {
    type Output = RatFn;
    fn div(self, rhs: &RatFn) -> RatFn {
        assert!(!rhs.is_zero(), "division by zero rational function");
        self * &RatFn {
            num: rhs.den.clone(),
            den: rhs.num.clone(),
        }
    }
}

impl Neg for &RatFn {
    type Output = RatFn;
    fn neg(self) -> RatFn {
        RatFn {
            num: -&self.num,
            den: self.den.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_form() {
        // (s^2+3s+2)/(s+1) reduces to s+2 over a monic denominator.
        let f = RatFn::from_ints(&[2, 3, 1], &[1, 1]).unwrap();
        assert_eq!(f.num(), &Poly::from_ints(&[2, 1]));
        assert!(f.den().is_one());
        // 2s/(4s+4): denominator made monic.
        let g = RatFn::from_ints(&[0, 2], &[4, 4]).unwrap();
        assert_eq!(g.num(), &Poly::from_f64s(&[0.0, 0.5]));
        assert_eq!(g.den(), &Poly::from_ints(&[1, 1]));
        assert!(RatFn::new(Poly::one(), Poly::zero()).is_err());
    }

    #[test]
    fn field_ops() {
        let a = RatFn::from_ints(&[1], &[1, 1]).unwrap(); // 1/(s+1)
        let b = RatFn::from_ints(&[1], &[2, 1]).unwrap(); // 1/(s+2)
        let sum = &a + &b; // (2s+3)/((s+1)(s+2))
        assert_eq!(sum, RatFn::from_ints(&[3, 2], &[2, 3, 1]).unwrap());
        let prod = &a * &b;
        assert_eq!(prod, RatFn::from_ints(&[1], &[2, 3, 1]).unwrap());
        let quot = &a / &b; // (s+2)/(s+1)
        assert_eq!(quot, RatFn::from_ints(&[2, 1], &[1, 1]).unwrap());
        let back = &(&sum - &b) * &a.inverse().unwrap();
        assert!(back.is_one());
    }

    #[test]
    fn properness() {
        let f = RatFn::from_ints(&[1, 1], &[1]).unwrap();
        assert!(!f.is_proper());
        let g = RatFn::from_ints(&[1, 1], &[2, 1]).unwrap();
        assert!(g.is_proper() && !g.is_strictly_proper());
        let h = RatFn::from_ints(&[1], &[2, 1]).unwrap();
        assert!(h.is_strictly_proper());
    }

    #[test]
    fn derivative_quotient_rule() {
        // d/ds [1/(s+1)] = -1/(s+1)^2
        let f = RatFn::from_ints(&[1], &[1, 1]).unwrap();
        assert_eq!(f.derivative(), RatFn::from_ints(&[-1], &[1, 2, 1]).unwrap());
    }

    #[test]
    fn poly_split() {
        // (s^2+1)/(s+1) = (s-1) + 2/(s+1)
        let f = RatFn::from_ints(&[1, 0, 1], &[1, 1]).unwrap();
        let (q, r) = f.poly_split();
        assert_eq!(q, Poly::from_ints(&[-1, 1]));
        assert_eq!(r, RatFn::from_ints(&[2], &[1, 1]).unwrap());
    }
}
