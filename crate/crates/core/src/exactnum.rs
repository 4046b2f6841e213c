//! Exact arithmetic primitives.
//!
//! Everything here is exact: big rationals, double factorials, binomials and
//! Gamma values at positive integers and half-integers. Gamma at a half-integer
//! carries a factor `sqrt(pi)`, so those values live in [`PiScaled`], which
//! stores `q * pi^(e/2)` with `q` rational.

use std::fmt;
use std::ops::{Div, Mul, Neg};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

pub use num_rational::BigRational;

use crate::error::{Error, Result};

/// Builds a rational from two machine integers.
pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Converts a big rational to the nearest `f64`, even when numerator and
/// denominator overflow `f64` individually.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    if let (Some(n), Some(d)) = (r.numer().to_f64(), r.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && d != 0.0 {
            return n / d;
        }
    }
    // Shift both parts down to ~60 significant bits.
    let nb = r.numer().bits() as i64;
    let db = r.denom().bits() as i64;
    let shift_n = (nb - 60).max(0);
    let shift_d = (db - 60).max(0);
    let n = (r.numer() >> shift_n as usize).to_f64().unwrap_or(0.0);
    let d = (r.denom() >> shift_d as usize).to_f64().unwrap_or(1.0);
    let exp = shift_n - shift_d;
    (n / d) * 2f64.powi(exp.clamp(i32::MIN as i64, i32::MAX as i64) as i32)
}

/// `n!!` for `n >= -1`, with `(-1)!! = 0!! = 1`.
pub fn double_factorial(n: i64) -> Result<BigInt> {
    if n < -1 {
        return Err(Error::domain(
            "double_factorial",
            format!("argument must be >= -1, got {n}"),
        ));
    }
    let mut acc = BigInt::one();
    let mut i = n;
    while i > 1 {
        acc *= i;
        i -= 2;
    }
    Ok(acc)
}

/// Binomial coefficient `C(n, k)`; zero when `k < 0` or `k > n`.
pub fn binomial(n: i64, k: i64) -> Result<BigInt> {
    if n < 0 {
        return Err(Error::domain(
            "binomial",
            format!("upper index must be >= 0, got {n}"),
        ));
    }
    if k < 0 || k > n {
        return Ok(BigInt::zero());
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        // acc = C(n, i) here; C(n, i+1) = C(n, i) * (n - i) / (i + 1) divides exactly.
        acc = acc * (n - i) / (i + 1);
    }
    Ok(acc)
}

/// Row `n` of Pascal's triangle, `C(n, 0..=n)`.
pub fn binomial_row(n: usize) -> Vec<BigInt> {
    let mut row = Vec::with_capacity(n + 1);
    let mut acc = BigInt::one();
    row.push(acc.clone());
    for i in 0..n {
        acc = acc * (n - i) / (i + 1);
        row.push(acc.clone());
    }
    row
}

/// An exact real of the form `q * pi^(e/2)`.
///
/// Because `sqrt(pi)` is transcendental the pair `(q, e)` is unique once
/// `q = 0` forces `e = 0`, so structural equality is value equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PiScaled {
    q: BigRational,
    e: i64,
}

impl PiScaled {
    pub fn new(q: BigRational, e: i64) -> Self {
        let e = if q.is_zero() { 0 } else { e };
        PiScaled { q, e }
    }

    pub fn rational(q: BigRational) -> Self {
        PiScaled::new(q, 0)
    }

    pub fn zero() -> Self {
        PiScaled::rational(BigRational::zero())
    }

    pub fn one() -> Self {
        PiScaled::rational(BigRational::one())
    }

    /// `pi^(e/2)`.
    pub fn pi_power(e: i64) -> Self {
        PiScaled::new(BigRational::one(), e)
    }

    pub fn q(&self) -> &BigRational {
        &self.q
    }

    /// Exponent of `sqrt(pi)`.
    pub fn e(&self) -> i64 {
        self.e
    }

    pub fn is_zero(&self) -> bool {
        self.q.is_zero()
    }

    pub fn scale(&self, r: &BigRational) -> Self {
        PiScaled::new(&self.q * r, self.e)
    }

    /// Sum of two values with the same power of `pi`; `None` when the powers
    /// differ (the sum is then not representable).
    pub fn checked_add(&self, other: &PiScaled) -> Option<PiScaled> {
        if self.is_zero() {
            return Some(other.clone());
        }
        if other.is_zero() {
            return Some(self.clone());
        }
        (self.e == other.e).then(|| PiScaled::new(&self.q + &other.q, self.e))
    }

    pub fn recip(&self) -> Option<PiScaled> {
        (!self.is_zero()).then(|| PiScaled::new(self.q.recip(), -self.e))
    }

    pub fn to_f64(&self) -> f64 {
        let q = rational_to_f64(&self.q);
        q * std::f64::consts::PI.powf(self.e as f64 / 2.0)
    }
}

impl Mul for &PiScaled {
    type Output = PiScaled;
    fn mul(self, rhs: &PiScaled) -> PiScaled {
        PiScaled::new(&self.q * &rhs.q, self.e + rhs.e)
    }
}

impl Mul for PiScaled {
    type Output = PiScaled;
    fn mul(self, rhs: PiScaled) -> PiScaled {
        &self * &rhs
    }
}

impl Mul<&BigRational> for &PiScaled {
    type Output = PiScaled;
    fn mul(self, rhs: &BigRational) -> PiScaled {
        self.scale(rhs)
    }
}

impl Div for &PiScaled {
    type Output = PiScaled;
    /// Panics on division by zero, like the rational division it wraps.
    fn div(self, rhs: &PiScaled) -> PiScaled {
        PiScaled::new(&self.q / &rhs.q, self.e - rhs.e)
    }
}

impl Neg for PiScaled {
    type Output = PiScaled;
    fn neg(self) -> PiScaled {
        PiScaled::new(-self.q, self.e)
    }
}

impl fmt::Display for PiScaled {
    /// `q`, `q*pi^m` or `q*pi^(e/2)` for odd `e`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.q)?;
        match self.e {
            0 => Ok(()),
            e if e % 2 == 0 => write!(f, "*pi^{}", e / 2),
            e => write!(f, "*pi^({e}/2)"),
        }
    }
}

/// Exact `Gamma(two_a / 2)` for `two_a >= 1`.
pub fn gamma_half(two_a: i64) -> Result<PiScaled> {
    if two_a < 1 {
        return Err(Error::domain(
            "gamma_half",
            format!("argument two_a must be >= 1, got {two_a}"),
        ));
    }
    if two_a % 2 == 0 {
        // Gamma(m) = (m-1)!
        let m = two_a / 2;
        let mut acc = BigInt::one();
        for i in 2..m {
            acc *= i;
        }
        Ok(PiScaled::rational(BigRational::from_integer(acc)))
    } else {
        // Gamma(m + 1/2) = (2m-1)!! / 2^m * sqrt(pi)
        let m = (two_a - 1) / 2;
        let num = double_factorial(2 * m - 1)?;
        let den = BigInt::one() << (m as usize);
        Ok(PiScaled::new(BigRational::new(num, den), 1))
    }
}

/// `Gamma(a) / Gamma(a + m)` with `a = two_a / 2`, as the reciprocal rising
/// factorial `1 / (a (a+1) ... (a+m-1))`.
pub fn gamma_ratio(two_a: i64, m: i64) -> Result<BigRational> {
    if two_a < 1 {
        return Err(Error::domain(
            "gamma_ratio",
            format!("argument two_a must be >= 1, got {two_a}"),
        ));
    }
    if m < 0 {
        return Err(Error::domain(
            "gamma_ratio",
            format!("offset m must be >= 0, got {m}"),
        ));
    }
    // prod (two_a + 2i) / 2 over i < m
    let mut den = BigInt::one();
    for i in 0..m {
        den *= two_a + 2 * i;
    }
    Ok(BigRational::new(BigInt::one() << (m as usize), den))
}

/// Area of the unit sphere `S^m` in `R^(m+1)`: `2 pi^((m+1)/2) / Gamma((m+1)/2)`.
pub fn sphere_area(m: i64) -> Result<PiScaled> {
    if m < 0 {
        return Err(Error::domain(
            "sphere_area",
            format!("sphere dimension must be >= 0, got {m}"),
        ));
    }
    let g = gamma_half(m + 1)?;
    let num = PiScaled::new(ratio(2, 1), m + 1);
    Ok(&num / &g)
}

/// `(-1)^n` as a sign multiplier.
pub(crate) fn sign(n: i64) -> i64 {
    if n.is_even() {
        1
    } else {
        -1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn int(n: i64) -> BigInt {
        BigInt::from(n)
    }

    #[test]
    fn double_factorial_values() {
        assert_eq!(double_factorial(0).unwrap(), int(1));
        assert_eq!(double_factorial(-1).unwrap(), int(1));
        assert_eq!(double_factorial(6).unwrap(), int(48));
        assert_eq!(double_factorial(7).unwrap(), int(105));
        assert!(double_factorial(-2).is_err());
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(0, 0).unwrap(), int(1));
        assert_eq!(binomial(4, 2).unwrap(), int(6));
        assert_eq!(binomial(5, 7).unwrap(), int(0));
        assert_eq!(binomial(5, -1).unwrap(), int(0));
        assert!(binomial(-1, 0).is_err());
        assert_eq!(
            binomial_row(6),
            (0..=6).map(|k| binomial(6, k).unwrap()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn gamma_half_values() {
        let g = gamma_half(1).unwrap();
        assert_eq!((g.q().clone(), g.e()), (ratio(1, 1), 1));
        let g = gamma_half(3).unwrap();
        assert_eq!((g.q().clone(), g.e()), (ratio(1, 2), 1));
        let g = gamma_half(5).unwrap();
        assert_eq!((g.q().clone(), g.e()), (ratio(3, 4), 1));
        let g = gamma_half(6).unwrap();
        assert_eq!((g.q().clone(), g.e()), (ratio(2, 1), 0));
        assert_eq!(gamma_half(2).unwrap(), PiScaled::one());
        assert!(gamma_half(0).is_err());
        assert!(gamma_half(-3).is_err());
    }

    #[test]
    fn gamma_half_matches_float_gamma_recurrence() {
        // Gamma(1/2) = sqrt(pi), then Gamma(x+1) = x Gamma(x) in floating point.
        let mut g = std::f64::consts::PI.sqrt();
        for two_a in (1..40).step_by(2) {
            let exact = gamma_half(two_a).unwrap().to_f64();
            assert!((exact - g).abs() <= 1e-13 * g, "two_a={two_a}");
            g *= two_a as f64 / 2.0;
        }
    }

    #[test]
    fn gamma_ratio_values() {
        assert_eq!(gamma_ratio(3, 1).unwrap(), ratio(2, 3));
        assert_eq!(gamma_ratio(7, 0).unwrap(), ratio(1, 1));
        assert_eq!(gamma_ratio(2, 2).unwrap(), ratio(1, 2));
        assert!(gamma_ratio(0, 1).is_err());
        assert!(gamma_ratio(1, -1).is_err());
    }

    #[test]
    fn pi_scaled_canonical_zero() {
        let z = PiScaled::new(BigRational::zero(), 5);
        assert_eq!(z, PiScaled::zero());
        assert_eq!(z.e(), 0);
    }

    #[test]
    fn sphere_areas() {
        assert_eq!(sphere_area(0).unwrap(), PiScaled::rational(ratio(2, 1)));
        assert_eq!(sphere_area(1).unwrap(), PiScaled::new(ratio(2, 1), 2));
        assert_eq!(sphere_area(2).unwrap(), PiScaled::new(ratio(4, 1), 2));
        assert_eq!(sphere_area(3).unwrap(), PiScaled::new(ratio(2, 1), 4));
    }

    #[test]
    fn rational_to_f64_handles_huge_parts() {
        let big = BigInt::one() << 2000usize;
        let r = BigRational::new(&big * 3, &big * 4);
        assert_eq!(rational_to_f64(&r), 0.75);
        let r = BigRational::new(BigInt::from(1), BigInt::one() << 1100usize);
        assert_eq!(rational_to_f64(&r), 0.0);
        let r = BigRational::new((BigInt::one() << 1100usize) + 1, BigInt::one() << 1099usize);
        assert_eq!(rational_to_f64(&r), 2.0);
    }

    #[test]
    fn display_forms() {
        assert_eq!(PiScaled::new(ratio(1, 2), -2).to_string(), "1/2*pi^-1");
        assert_eq!(PiScaled::new(ratio(3, 4), 1).to_string(), "3/4*pi^(1/2)");
        assert_eq!(PiScaled::rational(ratio(2, 1)).to_string(), "2");
    }

    fn small_pi_scaled() -> impl Strategy<Value = PiScaled> {
        (-50i64..50, 1i64..20, -6i64..6).prop_map(|(n, d, e)| PiScaled::new(ratio(n, d), e))
    }

    proptest! {
        #[test]
        fn double_factorial_recurrence(n in 1i64..200) {
            prop_assert_eq!(double_factorial(n).unwrap(), double_factorial(n - 2).unwrap() * n);
        }

        #[test]
        fn pascal_recurrence(n in 1i64..120, k in -2i64..125) {
            prop_assert_eq!(
                binomial(n, k).unwrap(),
                binomial(n - 1, k - 1).unwrap() + binomial(n - 1, k).unwrap()
            );
        }

        #[test]
        fn gamma_half_recurrence(two_a in 1i64..200) {
            let lhs = gamma_half(two_a + 2).unwrap();
            let rhs = gamma_half(two_a).unwrap().scale(&ratio(two_a, 2));
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn gamma_ratio_consistent_with_gamma_half(two_a in 1i64..80, m in 0i64..40) {
            let r = gamma_ratio(two_a, m).unwrap();
            let shifted = gamma_half(two_a + 2 * m).unwrap();
            prop_assert_eq!(shifted.scale(&r), gamma_half(two_a).unwrap());
        }

        #[test]
        fn pi_scaled_mul_commutative_associative(
            a in small_pi_scaled(), b in small_pi_scaled(), c in small_pi_scaled()
        ) {
            prop_assert_eq!(&a * &b, &b * &a);
            prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
            let ab = &a * &b;
            if !ab.is_zero() {
                prop_assert_eq!(ab.q(), &(a.q() * b.q()));
                prop_assert_eq!(ab.e(), a.e() + b.e());
            }
        }
    }
}
