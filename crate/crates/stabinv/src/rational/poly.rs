//! Dense univariate polynomials over arbitrary-precision rationals.
//!
//! Coefficients are stored in ascending powers: `[2, 3, 1]` is
//! `s^2 + 3s + 2`. The canonical form carries no trailing zero
//! coefficients, so the zero polynomial is the empty coefficient list.
//! All arithmetic is exact; floating point appears only at the
//! conversion boundaries (`rat_from_f64`, `rat_to_f64`, complex
//! evaluation).

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num::bigint::BigInt;
use num::complex::Complex64;
use num::{BigRational, One, Signed, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type Rat = BigRational;

/// Converts a float to the exact rational it represents in binary.
pub fn rat_from_f64(x: f64) -> Rat {
    Rat::from_float(x).expect("finite float")
}

/// Converts a rational to the nearest double, robust to components far
/// outside the double range.
pub fn rat_to_f64(r: &Rat) -> f64 {
    if let Some(x) = r.to_f64() {
        if x.is_finite() || r.numer().bits() as i64 - r.denom().bits() as i64 > 1000 {
            return x;
        }
    }
    // Shift numerator and denominator into a convertible window while
    // preserving their ratio.
    let nb = r.numer().bits() as i64;
    let db = r.denom().bits() as i64;
    let shift = nb.max(db) - 900;
    if shift <= 0 {
        return 0.0;
    }
    let n = r.numer() >> shift as usize;
    let d = r.denom() >> shift as usize;
    let nf = n.to_f64().unwrap_or(f64::NAN);
    let df = d.to_f64().unwrap_or(f64::NAN);
    nf / df
}

/// Parses an exact rational from `p/q`, integer, or decimal notation.
/// Decimal strings are read exactly (`0.3` becomes 3/10).
pub fn parse_rat(s: &str) -> Result<Rat> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::Parse("empty rational literal".into()));
    }
    if let Some((p, q)) = s.split_once('/') {
        let num: BigInt = p
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad numerator in {s:?}")))?;
        let den: BigInt = q
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad denominator in {s:?}")))?;
        if den.is_zero() {
            return Err(Error::ZeroDenominator);
        }
        return Ok(Rat::new(num, den));
    }
    if let Ok(n) = s.parse::<BigInt>() {
        return Ok(Rat::from_integer(n));
    }
    parse_decimal(s).ok_or_else(|| Error::Parse(format!("bad rational literal {s:?}")))
}

fn parse_decimal(s: &str) -> Option<Rat> {
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i64>().ok()?),
        None => (s, 0),
    };
    let (sign, mant) = match mant.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, mant.strip_prefix('+').unwrap_or(mant)),
    };
    let (int_part, frac_part) = match mant.split_once('.') {
        Some((a, b)) => (a, b),
        None => (mant, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    if !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let n: BigInt = digits.parse().ok()?;
    let scale = frac_part.len() as i64 - exp;
    let ten = BigInt::from(10);
    let r = if scale >= 0 {
        Rat::new(n, ten.pow(scale as u32))
    } else {
        Rat::from_integer(n * ten.pow((-scale) as u32))
    };
    Some(Rat::from_integer(BigInt::from(sign)) * r)
}

/// Nearest small-denominator rational within `tol` of `x`, found by
/// continued-fraction expansion. Returns None when no fraction with
/// denominator at most `max_den` comes close enough.
pub fn snap_rat(x: f64, tol: f64, max_den: u64) -> Option<Rat> {
    if !x.is_finite() {
        return None;
    }
    let scale = tol * x.abs().max(1.0);
    let (mut a, mut rem) = (x.floor(), x - x.floor());
    // Convergents p/q of the continued fraction of x.
    let (mut p0, mut q0, mut p1, mut q1) = (1i128, 0i128, a as i128, 1i128);
    for _ in 0..64 {
        let approx = p1 as f64 / q1 as f64;
        if (approx - x).abs() <= scale {
            return Some(Rat::new(BigInt::from(p1), BigInt::from(q1)));
        }
        if rem.abs() < f64::EPSILON {
            break;
        }
        let next = 1.0 / rem;
        a = next.floor();
        rem = next - a;
        let p2 = (a as i128).checked_mul(p1)?.checked_add(p0)?;
        let q2 = (a as i128).checked_mul(q1)?.checked_add(q0)?;
        if q2 as u64 as i128 != q2 || q2 as u64 > max_den {
            break;
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
    }
    None
}

fn format_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Dense polynomial with exact rational coefficients, ascending powers.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Poly {
    coeffs: Vec<Rat>,
}

impl Poly {
    /// Builds a polynomial from ascending-power coefficients, trimming
    /// trailing zeros.
    pub fn new(mut coeffs: Vec<Rat>) -> Self {
        while coeffs.last().map_or(false, |c| c.is_zero()) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn zero() -> Self {
        Poly { coeffs: vec![] }
    }

    pub fn one() -> Self {
        Poly::constant(Rat::one())
    }

    pub fn constant(c: Rat) -> Self {
        Poly::new(vec![c])
    }

    /// The indeterminate `s`.
    pub fn var() -> Self {
        Poly::new(vec![Rat::zero(), Rat::one()])
    }

    /// Convenience constructor from integer coefficients, ascending.
    pub fn from_ints(c: &[i64]) -> Self {
        Poly::new(c.iter().map(|&x| Rat::from_integer(BigInt::from(x))).collect())
    }

    /// Convenience constructor from floats, each converted exactly.
    pub fn from_f64s(c: &[f64]) -> Self {
        Poly::new(c.iter().map(|&x| rat_from_f64(x)).collect())
    }

    /// Monic polynomial with the given roots.
    pub fn from_roots(roots: &[Rat]) -> Self {
        let mut p = Poly::one();
        for r in roots {
            p = &p * &Poly::new(vec![-r.clone(), Rat::one()]);
        }
        p
    }

    pub fn coeffs(&self) -> &[Rat] {
        &self.coeffs
    }

    /// Coefficient of `s^k` (zero beyond the stored length).
    pub fn coeff(&self, k: usize) -> Rat {
        self.coeffs.get(k).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0].is_one()
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.len() <= 1
    }

    /// Degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    /// Degree with the zero polynomial mapped to zero, for size math.
    pub fn deg_or_zero(&self) -> usize {
        self.degree().unwrap_or(0)
    }

    pub fn leading(&self) -> Rat {
        self.coeffs.last().cloned().unwrap_or_else(Rat::zero)
    }

    pub fn monic(&self) -> Poly {
        if self.is_zero() {
            return Poly::zero();
        }
        let lc = self.leading();
        self.scale(&(Rat::one() / lc))
    }

    pub fn scale(&self, c: &Rat) -> Poly {
        Poly::new(self.coeffs.iter().map(|a| a * c).collect())
    }

    /// Multiplies by `s^k`.
    pub fn shift_up(&self, k: usize) -> Poly {
        if self.is_zero() {
            return Poly::zero();
        }
        let mut coeffs = vec![Rat::zero(); k];
        coeffs.extend(self.coeffs.iter().cloned());
        Poly { coeffs }
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() <= 1 {
            return Poly::zero();
        }
        Poly::new(
            self.coeffs[1..]
                .iter()
                .enumerate()
                .map(|(i, c)| c * Rat::from_integer(BigInt::from(i as u64 + 1)))
                .collect(),
        )
    }

    pub fn pow(&self, mut e: u32) -> Poly {
        let mut base = self.clone();
        let mut acc = Poly::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// Exact evaluation at a rational point.
    pub fn eval_rat(&self, x: &Rat) -> Rat {
        let mut acc = Rat::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    /// Horner evaluation at a complex point in double precision.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for c in self.coeffs.iter().rev() {
            acc = acc * z + Complex64::new(rat_to_f64(c), 0.0);
        }
        acc
    }

    /// Coefficients converted to doubles, ascending.
    pub fn coeffs_f64(&self) -> Vec<f64> {
        self.coeffs.iter().map(rat_to_f64).collect()
    }

    /// Euclidean division: returns `(q, r)` with `self = q*d + r` and
    /// `deg r < deg d`.
    pub fn div_rem(&self, d: &Poly) -> Result<(Poly, Poly)> {
        if d.is_zero() {
            return Err(Error::ZeroPolyDivision);
        }
        let dd = d.degree().unwrap();
        let mut r = self.coeffs.clone();
        if r.len() <= dd {
            return Ok((Poly::zero(), self.clone()));
        }
        let mut q = vec![Rat::zero(); r.len() - dd];
        let lc = d.leading();
        for k in (dd..r.len()).rev() {
            let c = &r[k] / &lc;
            if !c.is_zero() {
                for (i, dc) in d.coeffs.iter().enumerate() {
                    let idx = k - dd + i;
                    r[idx] = &r[idx] - &(dc * &c);
                }
            }
            q[k - dd] = c;
        }
        r.truncate(dd);
        Ok((Poly::new(q), Poly::new(r)))
    }

    /// Monic greatest common divisor.
    ///
    /// Coefficients arriving from floating point are exact dyadic
    /// rationals with hundreds of bits, and a plain Euclid chain over
    /// such inputs compounds fraction sizes catastrophically. Two
    /// defenses keep this fast: a gcd over a prime field first, which
    /// proves the common case (trivial gcd) in one cheap pass, and a
    /// primitive remainder sequence over the integers for the rest,
    /// where content stripping caps the growth.
    pub fn gcd(&self, other: &Poly) -> Poly {
        if self.is_zero() {
            return other.monic();
        }
        if other.is_zero() {
            return self.monic();
        }
        if self.is_constant() || other.is_constant() {
            return Poly::new(vec![Rat::one()]);
        }
        if let (Some(am), Some(bm)) = (modp_image(self), modp_image(other)) {
            if modp_gcd_degree(am, bm) == 0 {
                return Poly::new(vec![Rat::one()]);
            }
        }
        let mut a = int_primitive(self);
        let mut b = int_primitive(other);
        if a.len() < b.len() {
            std::mem::swap(&mut a, &mut b);
        }
        while b.len() > 1 {
            let r = int_prem(&a, &b);
            a = b;
            b = int_content_strip(r);
        }
        if !b.is_empty() {
            // A nonzero constant terminated the chain: coprime.
            return Poly::new(vec![Rat::one()]);
        }
        Poly::new(a.into_iter().map(Rat::from_integer).collect()).monic()
    }

    /// Monic least common multiple.
    pub fn lcm(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let g = self.gcd(other);
        let (q, _) = self.div_rem(&g).expect("gcd divides");
        (&q * other).monic()
    }

    /// Whether `d` divides `self` exactly.
    pub fn divisible_by(&self, d: &Poly) -> bool {
        match self.div_rem(d) {
            Ok((_, r)) => r.is_zero(),
            Err(_) => false,
        }
    }

    /// Structural size used for pivot tie-breaking: total bit length of
    /// all coefficient numerators and denominators.
    pub fn height_bits(&self) -> u64 {
        self.coeffs
            .iter()
            .map(|c| c.numer().bits() + c.denom().bits())
            .sum()
    }
}

/// Prime field modulus for the gcd quick check, 2^61 - 1.
const GCD_PRIME: u64 = 2_305_843_009_213_693_951;

fn mulmod(a: u64, b: u64) -> u64 {
    ((a as u128 * b as u128) % GCD_PRIME as u128) as u64
}

fn submod(a: u64, b: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        a + (GCD_PRIME - b)
    }
}

fn powmod(mut base: u64, mut exp: u64) -> u64 {
    let mut acc = 1u64;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mulmod(acc, base);
        }
        base = mulmod(base, base);
        exp >>= 1;
    }
    acc
}

fn bigint_modp(n: &BigInt) -> u64 {
    let p = BigInt::from(GCD_PRIME);
    let mut r = (n % &p).to_i128().expect("residue fits i128");
    if r < 0 {
        r += GCD_PRIME as i128;
    }
    r as u64
}

/// Image of the polynomial in the prime field, ascending; None when a
/// denominator vanishes mod p or the leading coefficient drops, since
/// either breaks the degree bound the quick check relies on.
fn modp_image(p: &Poly) -> Option<Vec<u64>> {
    let mut out = Vec::with_capacity(p.coeffs.len());
    for c in &p.coeffs {
        let den = bigint_modp(c.denom());
        if den == 0 {
            return None;
        }
        let num = bigint_modp(c.numer());
        out.push(mulmod(num, powmod(den, GCD_PRIME - 2)));
    }
    if out.last() == Some(&0) {
        return None;
    }
    Some(out)
}

fn modp_rem(mut a: Vec<u64>, b: &[u64]) -> Vec<u64> {
    let db = b.len() - 1;
    let lcinv = powmod(b[db], GCD_PRIME - 2);
    while a.len() > db {
        let k = a.len() - 1;
        let q = mulmod(a[k], lcinv);
        if q != 0 {
            for (i, bc) in b.iter().enumerate() {
                let idx = k - db + i;
                a[idx] = submod(a[idx], mulmod(q, *bc));
            }
        }
        a.pop();
        while a.last() == Some(&0) {
            a.pop();
        }
    }
    a
}

/// Degree of gcd over the prime field; an upper bound on the true gcd
/// degree, so zero here proves coprimality.
fn modp_gcd_degree(mut a: Vec<u64>, mut b: Vec<u64>) -> usize {
    if a.len() < b.len() {
        std::mem::swap(&mut a, &mut b);
    }
    while !b.is_empty() {
        let r = modp_rem(a, &b);
        a = b;
        b = r;
    }
    a.len().saturating_sub(1)
}

/// Integer coefficients after clearing denominators and stripping
/// content, ascending, positive leading coefficient.
fn int_primitive(p: &Poly) -> Vec<BigInt> {
    use num::Integer;
    let mut den_lcm = BigInt::one();
    for c in &p.coeffs {
        den_lcm = den_lcm.lcm(c.denom());
    }
    let ints: Vec<BigInt> = p
        .coeffs
        .iter()
        .map(|c| c.numer() * (&den_lcm / c.denom()))
        .collect();
    int_content_strip(ints)
}

fn int_content_strip(mut v: Vec<BigInt>) -> Vec<BigInt> {
    use num::Integer;
    while v.last().map(|c| c.is_zero()).unwrap_or(false) {
        v.pop();
    }
    if v.is_empty() {
        return v;
    }
    let mut content = BigInt::zero();
    for c in &v {
        content = content.gcd(c);
    }
    if v.last().unwrap().sign() == num::bigint::Sign::Minus {
        content = -content;
    }
    for c in v.iter_mut() {
        *c = &*c / &content;
    }
    v
}

/// Pseudo-remainder of `a` by `b` over the integers: the remainder of
/// lc(b)^k * a for the smallest k that keeps division exact.
fn int_prem(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
    let db = b.len() - 1;
    let lc = &b[db];
    let mut r: Vec<BigInt> = a.to_vec();
    while r.len() > db {
        let k = r.len() - 1;
        let coef = r[k].clone();
        for c in r.iter_mut() {
            *c = &*c * lc;
        }
        for (i, bc) in b.iter().enumerate() {
            let idx = k - db + i;
            r[idx] = &r[idx] - &(&coef * bc);
        }
        while r.last().map(|c| c.is_zero()).unwrap_or(false) {
            r.pop();
        }
    }
    r
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let cs = format_rat(&c.abs());
            let sign = if c.is_negative() { "-" } else { "+" };
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
                first = false;
            } else {
                write!(f, " {sign} ")?;
            }
            match i {
                0 => write!(f, "{cs}")?,
                _ => {
                    if cs != "1" {
                        write!(f, "{cs}*")?;
                    }
                    if i == 1 {
                        write!(f, "s")?;
                    } else {
                        write!(f, "s^{i}")?;
                    }
                }
            }
        }
        Ok(())
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            out.push(self.coeff(i) + rhs.coeff(i));
        }
        Poly::new(out)
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            out.push(self.coeff(i) - rhs.coeff(i));
        }
        Poly::new(out)
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        if self.is_zero() || rhs.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![Rat::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] = &out[i + j] + &(a * b);
            }
        }
        Poly::new(out)
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| -c).collect())
    }
}

impl Serialize for Poly {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let strings: Vec<String> = self.coeffs.iter().map(format_rat).collect();
        strings.serialize(serializer)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CoeffRepr {
    Int(i64),
    Float(f64),
    Str(String),
}

impl<'de> Deserialize<'de> for Poly {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<CoeffRepr>::deserialize(deserializer)?;
        let mut coeffs = Vec::with_capacity(raw.len());
        for c in raw {
            let r = match c {
                CoeffRepr::Int(i) => Rat::from_integer(BigInt::from(i)),
                CoeffRepr::Float(x) => {
                    if !x.is_finite() {
                        return Err(D::Error::custom("non-finite coefficient"));
                    }
                    rat_from_f64(x)
                }
                CoeffRepr::Str(s) => parse_rat(&s).map_err(D::Error::custom)?,
            };
            coeffs.push(r);
        }
        Ok(Poly::new(coeffs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: &[i64]) -> Poly {
        Poly::from_ints(c)
    }

    #[test]
    fn canonical_form_trims_trailing_zeros() {
        let q = Poly::new(vec![Rat::one(), Rat::zero(), Rat::zero()]);
        assert_eq!(q.degree(), Some(0));
        assert!(Poly::from_ints(&[0, 0]).is_zero());
        assert_eq!(Poly::zero().degree(), None);
    }

    #[test]
    fn arithmetic_expansion() {
        // (s+1)(s+2) = s^2 + 3s + 2
        let a = p(&[1, 1]);
        let b = p(&[2, 1]);
        assert_eq!(&a * &b, p(&[2, 3, 1]));
        // (s^2 - 5s - 50)^2 = s^4 - 10s^3 - 75s^2 + 500s + 2500
        let c = p(&[-50, -5, 1]);
        assert_eq!(&c * &c, p(&[2500, 500, -75, -10, 1]));
    }

    #[test]
    fn division_and_gcd() {
        let n = p(&[2600, 480, -74, -10, 1]); // (s-10)(s^3-74s-260)... checked below
        let d = p(&[-50, -5, 1]); // (s-10)(s+5)
        let g = n.gcd(&d);
        assert_eq!(g, p(&[-10, 1]));
        let (q, r) = n.div_rem(&g).unwrap();
        assert!(r.is_zero());
        assert_eq!(q, p(&[-260, -74, 0, 1]));
        // lcm of the four benchmark denominators
        let l = p(&[1, 2, 1]) // (s+1)^2
            .lcm(&Poly::from_f64s(&[0.5, 1.0]))
            .lcm(&(&p(&[1, 2, 1]) * &p(&[2, 1])))
            .lcm(&p(&[3, 1]));
        let expect = &(&p(&[1, 2, 1]) * &Poly::from_f64s(&[0.5, 1.0])) * &(&p(&[2, 1]) * &p(&[3, 1]));
        assert_eq!(l, expect.monic());
    }

    #[test]
    fn evaluation() {
        let q = p(&[2, 3, 1]);
        assert_eq!(q.eval_rat(&Rat::from_integer(BigInt::from(-2))), Rat::zero());
        let z = q.eval(Complex64::new(0.0, 1.0)); // (i)^2 + 3i + 2 = 1 + 3i
        assert!((z - Complex64::new(1.0, 3.0)).norm() < 1e-12);
    }

    #[test]
    fn decimal_parsing_is_exact() {
        assert_eq!(parse_rat("0.3").unwrap(), Rat::new(BigInt::from(3), BigInt::from(10)));
        assert_eq!(parse_rat("-1.25e2").unwrap(), Rat::from_integer(BigInt::from(-125)));
        assert_eq!(parse_rat("7/4").unwrap(), Rat::new(BigInt::from(7), BigInt::from(4)));
        assert!(parse_rat("1/0").is_err());
    }

    #[test]
    fn serde_round_trip() {
        let q = Poly::new(vec![
            parse_rat("2").unwrap(),
            parse_rat("3/7").unwrap(),
            parse_rat("1").unwrap(),
        ]);
        let s = serde_json::to_string(&q).unwrap();
        assert_eq!(s, r#"["2","3/7","1"]"#);
        let back: Poly = serde_json::from_str(&s).unwrap();
        assert_eq!(back, q);
        let from_numbers: Poly = serde_json::from_str("[2, 3, 1]").unwrap();
        assert_eq!(from_numbers, p(&[2, 3, 1]));
    }
}
