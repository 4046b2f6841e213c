//! Finite Laurent series in the positive infinitesimal `rho`.
//!
//! A [`RhoSeries`] models an element of the ring of nonstandard numbers of
//! at most polynomial growth in `1/rho`. Only the sub-ring of finite Laurent
//! polynomials is representable; that is all the computations here need.
//!
//! A series may be truncated: with `truncation = Some(t)` every coefficient at
//! an exponent `> t` is unknown (not zero). Numerically fitted series carry a
//! truncation; symbolic ones are exact (`None`).
//!
//! [`psi`] maps an element to the canonical representative of its class modulo
//! infinitesimals by dropping every positive power of `rho`.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

/// Coefficient ring for a [`RhoSeries`].
pub trait Coefficient:
    Clone
    + PartialEq
    + fmt::Debug
    + fmt::Display
    + Zero
    + One
    + Add<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
}

impl<T> Coefficient for T where
    T: Clone
        + PartialEq
        + fmt::Debug
        + fmt::Display
        + Zero
        + One
        + Add<Output = T>
        + Mul<Output = T>
        + Neg<Output = T>
{
}

/// Coefficients with a magnitude, for tolerance-based comparison of fitted series.
pub trait Magnitude {
    fn magnitude(&self) -> f64;
}

impl Magnitude for f64 {
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl Magnitude for Complex64 {
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RhoSeries<C = f64> {
    terms: BTreeMap<i32, C>,
    truncation: Option<i32>,
}

/// Order of magnitude of a series relative to the standard reals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Class {
    Zero,
    Infinitesimal,
    Appreciable,
    Infinite,
}

impl<C: Coefficient> RhoSeries<C> {
    fn build(terms: impl IntoIterator<Item = (i32, C)>, truncation: Option<i32>) -> Self {
        let mut map: BTreeMap<i32, C> = BTreeMap::new();
        for (e, c) in terms {
            if truncation.is_some_and(|t| e > t) {
                continue;
            }
            let entry = map.entry(e).or_insert_with(C::zero);
            *entry = entry.clone() + c;
        }
        map.retain(|_, c| !c.is_zero());
        RhoSeries {
            terms: map,
            truncation,
        }
    }

    /// An exactly known Laurent polynomial.
    pub fn exact(terms: impl IntoIterator<Item = (i32, C)>) -> Self {
        Self::build(terms, None)
    }

    /// A series known only up to and including exponent `order`; terms above
    /// it are discarded.
    pub fn truncated(terms: impl IntoIterator<Item = (i32, C)>, order: i32) -> Self {
        Self::build(terms, Some(order))
    }

    pub fn zero() -> Self {
        Self::exact([])
    }

    pub fn one() -> Self {
        Self::exact([(0, C::one())])
    }

    pub fn monomial(coeff: C, exponent: i32) -> Self {
        Self::exact([(exponent, coeff)])
    }

    /// The infinitesimal `rho` itself.
    pub fn rho() -> Self {
        Self::monomial(C::one(), 1)
    }

    pub fn terms(&self) -> impl Iterator<Item = (i32, &C)> {
        self.terms.iter().map(|(e, c)| (*e, c))
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_exact(&self) -> bool {
        self.truncation.is_none()
    }

    pub fn truncation_order(&self) -> Option<i32> {
        self.truncation
    }

    /// Coefficient at `exponent`, `None` if it lies above the truncation order.
    pub fn coeff(&self, exponent: i32) -> Option<C> {
        if self.truncation.is_some_and(|t| exponent > t) {
            return None;
        }
        Some(self.terms.get(&exponent).cloned().unwrap_or_else(C::zero))
    }

    /// Lowest exponent with a nonzero coefficient.
    pub fn leading_exponent(&self) -> Option<i32> {
        self.terms.keys().next().copied()
    }

    /// Lowest exponent that may be nonzero: the leading exponent, or the first
    /// unknown exponent of a truncated zero; `None` for exact zero.
    fn valuation_bound(&self) -> Option<i64> {
        self.leading_exponent()
            .map(i64::from)
            .or_else(|| self.truncation.map(|t| i64::from(t) + 1))
    }

    pub fn add(&self, other: &Self) -> Self {
        let truncation = min_truncation(self.truncation, other.truncation);
        Self::build(
            self.terms
                .iter()
                .chain(other.terms.iter())
                .map(|(e, c)| (*e, c.clone())),
            truncation,
        )
    }

    /// Cauchy product. The result is known up to
    /// `min(t_a + v_b, t_b + v_a)` where `v` is the leading exponent.
    pub fn mul(&self, other: &Self) -> Self {
        let bound = |t: Option<i32>, v: Option<i64>| match (t, v) {
            (Some(t), Some(v)) => Some(i64::from(t) + v),
            // Known-zero factor: exact zero product regardless of the other's truncation.
            (_, None) => None,
            (None, Some(_)) => None,
        };
        let left = bound(self.truncation, other.valuation_bound());
        let right = bound(other.truncation, self.valuation_bound());
        let truncation = match (left, right) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (Some(a), None) | (None, Some(a)) => Some(a),
            (None, None) => None,
        }
        .filter(|_| self.valuation_bound().is_some() && other.valuation_bound().is_some())
        .map(|t| t.clamp(i64::from(i32::MIN), i64::from(i32::MAX)) as i32);

        let mut products = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                products.push((ea + eb, ca.clone() * cb.clone()));
            }
        }
        Self::build(products, truncation)
    }

    /// Classification by the leading exponent.
    pub fn classify(&self) -> Result<Class> {
        match (self.leading_exponent(), self.truncation) {
            (Some(e), _) if e > 0 => Ok(Class::Infinitesimal),
            (Some(0), _) => Ok(Class::Appreciable),
            (Some(_), _) => Ok(Class::Infinite),
            (None, None) => Ok(Class::Zero),
            (None, Some(t)) => Err(Error::Indeterminate(format!(
                "no known term up to rho^{t}; class cannot be decided"
            ))),
        }
    }

    /// Coefficient of `rho^0` of a finite element.
    pub fn standard_part(&self) -> Result<C> {
        if let Some(e) = self.leading_exponent().filter(|&e| e < 0) {
            return Err(Error::NoStandardPart { leading: e });
        }
        match self.coeff(0) {
            Some(c) => Ok(c),
            None => Err(Error::Indeterminate(format!(
                "series truncated at rho^{}; the finite part is unknown",
                self.truncation.unwrap_or_default()
            ))),
        }
    }
}

impl<C: Coefficient + Magnitude> RhoSeries<C> {
    /// Coefficient-wise comparison within `tol`, over the exponents both
    /// series know.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        let limit = min_truncation(self.truncation, other.truncation);
        self.terms
            .keys()
            .chain(other.terms.keys())
            .filter(|e| limit.is_none_or(|t| **e <= t))
            .all(|&e| {
                let a = self.coeff(e).unwrap_or_else(C::zero);
                let b = other.coeff(e).unwrap_or_else(C::zero);
                (a + -b).magnitude() <= tol
            })
    }
}

fn min_truncation(a: Option<i32>, b: Option<i32>) -> Option<i32> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

/// Canonical representative of `a` modulo infinitesimals: drops all positive
/// powers of `rho`.
pub fn psi<C: Coefficient>(a: &RhoSeries<C>) -> RhoSeries<C> {
    RhoSeries {
        terms: a
            .terms
            .iter()
            .filter(|(e, _)| **e <= 0)
            .map(|(e, c)| (*e, c.clone()))
            .collect(),
        truncation: a.truncation,
    }
}

/// The action of the product hyperdistribution on a test function with value
/// `phi_at_0` at the origin: `phi(0) / (2 pi) * rho^-1`.
pub fn theorem1_series(phi_at_0: f64) -> RhoSeries<f64> {
    RhoSeries::exact([(-1, phi_at_0 / (2.0 * std::f64::consts::PI))])
}

impl<C: Coefficient> Add for &RhoSeries<C> {
    type Output = RhoSeries<C>;
    fn add(self, rhs: &RhoSeries<C>) -> RhoSeries<C> {
        RhoSeries::add(self, rhs)
    }
}

impl<C: Coefficient> Mul for &RhoSeries<C> {
    type Output = RhoSeries<C>;
    fn mul(self, rhs: &RhoSeries<C>) -> RhoSeries<C> {
        RhoSeries::mul(self, rhs)
    }
}

impl<C: Coefficient> Neg for &RhoSeries<C> {
    type Output = RhoSeries<C>;
    fn neg(self) -> RhoSeries<C> {
        RhoSeries {
            terms: self.terms.iter().map(|(e, c)| (*e, -c.clone())).collect(),
            truncation: self.truncation,
        }
    }
}

impl<C: Coefficient> Sub for &RhoSeries<C> {
    type Output = RhoSeries<C>;
    fn sub(self, rhs: &RhoSeries<C>) -> RhoSeries<C> {
        self + &(-rhs)
    }
}

impl<C: Coefficient> fmt::Display for RhoSeries<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            match e {
                0 => write!(f, "{c}")?,
                1 => write!(f, "{c}*rho")?,
                e => write!(f, "{c}*rho^{e}")?,
            }
        }
        if first {
            f.write_str("0")?;
        }
        if let Some(t) = self.truncation {
            write!(f, " + O(rho^{})", i64::from(t) + 1)?;
        }
        Ok(())
    }
}
