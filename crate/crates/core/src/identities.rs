//! Exact evaluation of the two double-factorial / Gamma summation identities
//! and of the closed-form coefficients built from them.
//!
//! Odd dimensions `n = 2k + 1` use the double sum over `(j, p)`:
//!
//! ```text
//! sum_{j=1}^{k-1} sum_{p=0}^{j-1} C(k-1, j) C(j-1, p) (-1)^j (2p+1)!! (2j-2p-1)!! / ((2j+2)!! (2p+1))
//!     = 1/(4k) - 1/4
//! ```
//!
//! Even dimensions `n = 2k + 2` use the quintuple sum over `(j, r, p, s, h)`
//! whose terms carry `Gamma(k-j) Gamma(a) / Gamma(a + k - j)`; that quotient
//! is always a rational rising-factorial reciprocal, so no `sqrt(pi)` ever
//! enters the sum. The result is `1/(2k+1) - 1`.

use std::fmt;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exactnum::{
    binomial_row, double_factorial, gamma_ratio, ratio, sign, BigRational, PiScaled,
};

/// Default `k` range for the odd-dimension identity.
pub const DEFAULT_THM2_K: (i64, i64) = (1, 500);
/// Default `k` range for the even-dimension identity (`Theta(k^5)` tuples).
pub const DEFAULT_THM3_K: (i64, i64) = (1, 25);

/// Which identity a report is about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Theorem {
    /// Double-sum identity, odd dimensions.
    Thm2,
    /// Quintuple-sum identity, even dimensions.
    Thm3,
    /// `rho * A(1, 2k+1)` from its closed form.
    CoeffOdd,
    /// `rho * A(1, 2k+2)` from its closed form.
    CoeffEven,
}

impl Theorem {
    pub fn name(self) -> &'static str {
        match self {
            Theorem::Thm2 => "thm2",
            Theorem::Thm3 => "thm3",
            Theorem::CoeffOdd => "coeff_odd",
            Theorem::CoeffEven => "coeff_even",
        }
    }

    /// Smallest admissible `k`.
    pub fn min_k(self) -> i64 {
        match self {
            Theorem::CoeffEven => 0,
            _ => 1,
        }
    }
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An exact value on either side of an identity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExactValue {
    Rational(BigRational),
    Pi(PiScaled),
}

impl ExactValue {
    pub fn to_f64(&self) -> f64 {
        match self {
            ExactValue::Rational(r) => crate::exactnum::rational_to_f64(r),
            ExactValue::Pi(p) => p.to_f64(),
        }
    }
}

impl fmt::Display for ExactValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExactValue::Rational(r) => write!(f, "{r}"),
            ExactValue::Pi(p) => write!(f, "{p}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct IdentityReport {
    pub theorem: Theorem,
    pub k: i64,
    pub lhs: ExactValue,
    pub rhs: ExactValue,
    /// Exact equality, no tolerance.
    pub verified: bool,
    /// Number of summation index tuples contributing to `lhs`.
    pub term_count: u64,
    pub elapsed: Duration,
}

fn check_k(op: &'static str, k: i64, min: i64) -> Result<()> {
    if k < min {
        return Err(Error::domain(op, format!("k must be >= {min}, got {k}")));
    }
    Ok(())
}

/// Inner sums of the odd-dimension identity, shared across `k`.
///
/// Since `(2p+1)!! / (2p+1) = (2p-1)!!`, the inner sum over `p` is the integer
/// `N_j = sum_p C(j-1, p) (2p-1)!! (2j-2p-1)!!`, and the whole left side is
/// `sum_j (-1)^j C(k-1, j) N_j / (2j+2)!!`.
#[derive(Debug, Clone)]
pub struct Theorem2Table {
    /// `inner[j] = N_j`, index 0 unused.
    inner: Vec<BigInt>,
}

impl Theorem2Table {
    /// Table covering every `k <= k_max`.
    pub fn new(k_max: i64) -> Self {
        let j_max = (k_max - 1).max(0) as usize;
        // odd[p] = (2p-1)!!
        let mut odd = Vec::with_capacity(j_max + 1);
        odd.push(BigInt::one());
        for p in 1..=j_max {
            let next = &odd[p - 1] * (2 * p as i64 - 1);
            odd.push(next);
        }
        let inner = (0..=j_max)
            .into_par_iter()
            .map(|j| {
                if j == 0 {
                    return BigInt::zero();
                }
                let row = binomial_row(j - 1);
                row.iter()
                    .enumerate()
                    .map(|(p, c)| c * &odd[p] * &odd[j - p])
                    .sum()
            })
            .collect();
        Theorem2Table { inner }
    }

    pub fn k_max(&self) -> i64 {
        self.inner.len() as i64
    }

    /// Left side for one `k`, over the common denominator `(2k)!!`.
    pub fn lhs(&self, k: i64) -> Result<BigRational> {
        check_k("theorem2_lhs", k, 1)?;
        if k > self.k_max() {
            return Err(Error::domain(
                "theorem2_lhs",
                format!("table covers k <= {}, got {k}", self.k_max()),
            ));
        }
        let outer = binomial_row((k - 1) as usize);
        // (2k)!! / (2j+2)!! built downward from j = k-1.
        let mut cofactor = BigInt::one();
        let mut num = BigInt::zero();
        for j in (1..k).rev() {
            let t = &outer[j as usize] * &self.inner[j as usize] * &cofactor;
            if sign(j) < 0 {
                num -= t;
            } else {
                num += t;
            }
            cofactor *= 2 * (j + 1);
        }
        let den = double_factorial(2 * k)?;
        Ok(BigRational::new(num, den))
    }
}

/// Left side of the odd-dimension identity.
pub fn theorem2_lhs(k: i64) -> Result<BigRational> {
    check_k("theorem2_lhs", k, 1)?;
    Theorem2Table::new(k).lhs(k)
}

/// `1/(4k) - 1/4`.
pub fn theorem2_rhs(k: i64) -> Result<BigRational> {
    check_k("theorem2_rhs", k, 1)?;
    Ok(ratio(1, 4 * k) - ratio(1, 4))
}

/// Index tuples summed by [`theorem2_lhs`]: `k(k-1)/2`.
pub fn theorem2_term_count(k: i64) -> u64 {
    (k * (k - 1) / 2).max(0) as u64
}

/// Per-`j` slice of the even-dimension sum, with its tuple count.
fn even_identity_slice(k: i64, j: i64, pascal: &[Vec<BigInt>]) -> Result<(BigRational, u64)> {
    let c = |n: i64, r: i64| &pascal[n as usize][r as usize];
    // bucket[q][h] collects sign * C(j-r,p) C(r,s) C(q,h) over tuples with p+s = q.
    let mut buckets: Vec<Vec<BigInt>> = (0..=j)
        .map(|q| vec![BigInt::zero(); q as usize + 1])
        .collect();
    let mut count = 0u64;
    for r in 0..=j {
        for p in 0..=(j - r) {
            for s in 0..=r {
                let q = p + s;
                let base = c(j - r, p) * c(r, s);
                let negative = sign(p + r) < 0;
                for h in 0..=q {
                    let t = &base * c(q, h);
                    let slot = &mut buckets[q as usize][h as usize];
                    if negative {
                        *slot -= t;
                    } else {
                        *slot += t;
                    }
                    count += 1;
                }
            }
        }
    }
    let m = k - j;
    let mut acc = BigRational::zero();
    for (q, row) in buckets.iter().enumerate() {
        let q = q as i64;
        for (h, w) in row.iter().enumerate() {
            if w.is_zero() {
                continue;
            }
            // Gamma argument a = 1 - h + (q + j + 1)/2 >= 3/2 since h <= q <= j.
            let two_a = q + j + 3 - 2 * h as i64;
            debug_assert!(two_a >= 1, "Gamma pole reached: two_a = {two_a}");
            let g = gamma_ratio(two_a, m)?;
            acc += g * BigRational::new(w.clone(), BigInt::one() << q as usize);
        }
    }
    // Common factor: (-1)^(j+1) C(2k, k+1+j) (k-j-1)! / 2^(2k-2-j).
    let mut fact = BigInt::one();
    for i in 2..m {
        fact *= i;
    }
    let lead = c(2 * k, k + 1 + j) * fact * sign(j + 1);
    let common = BigRational::new(lead, BigInt::one() << (2 * k - 2 - j) as usize);
    Ok((acc * common, count))
}

fn even_identity_eval(k: i64) -> Result<(BigRational, u64)> {
    check_k("theorem3_lhs", k, 1)?;
    let pascal: Vec<Vec<BigInt>> = (0..=2 * k as usize).map(binomial_row).collect();
    let slices: Vec<(BigRational, u64)> = (0..k)
        .into_par_iter()
        .map(|j| even_identity_slice(k, j, &pascal))
        .collect::<Result<_>>()?;
    let mut sum = BigRational::zero();
    let mut count = 0;
    for (v, c) in slices {
        sum += v;
        count += c;
    }
    Ok((sum, count))
}

/// Left side of the even-dimension identity.
pub fn theorem3_lhs(k: i64) -> Result<BigRational> {
    even_identity_eval(k).map(|(v, _)| v)
}

/// `1/(2k+1) - 1`.
pub fn theorem3_rhs(k: i64) -> Result<BigRational> {
    check_k("theorem3_rhs", k, 1)?;
    Ok(ratio(1, 2 * k + 1) - BigRational::one())
}

fn coeff_odd_from(k: i64, lhs: &BigRational) -> PiScaled {
    // (2k/pi) (1/4 + lhs)
    let q = (ratio(1, 4) + lhs) * ratio(2 * k, 1);
    PiScaled::new(q, -2)
}

fn coeff_even_from(k: i64, lhs: &BigRational) -> PiScaled {
    // ((2k+1)/(2 pi)) (1 + lhs)
    let q = (BigRational::one() + lhs) * ratio(2 * k + 1, 2);
    PiScaled::new(q, -2)
}

/// `rho * A(1, 2k+1)` from the closed form.
pub fn coeff_odd(k: i64) -> Result<PiScaled> {
    check_k("coeff_odd", k, 1)?;
    Ok(coeff_odd_from(k, &theorem2_lhs(k)?))
}

/// `rho * A(1, 2k+2)` from the closed form; `k = 0` is the empty sum.
pub fn coeff_even(k: i64) -> Result<PiScaled> {
    check_k("coeff_even", k, 0)?;
    let lhs = if k == 0 {
        BigRational::zero()
    } else {
        theorem3_lhs(k)?
    };
    Ok(coeff_even_from(k, &lhs))
}

/// `1/(2 pi)`, the value every closed-form coefficient must reach.
pub fn one_over_two_pi() -> PiScaled {
    PiScaled::new(ratio(1, 2), -2)
}

/// Evaluates one identity for every `k` in `k_min..=k_max`, in parallel across
/// `k`, returning reports in index order.
pub fn verify_range(theorem: Theorem, k_min: i64, k_max: i64) -> Result<Vec<IdentityReport>> {
    check_k("verify_range", k_min, theorem.min_k())?;
    if k_max < k_min {
        return Err(Error::domain(
            "verify_range",
            format!("empty range {k_min}..={k_max}"),
        ));
    }
    let table =
        matches!(theorem, Theorem::Thm2 | Theorem::CoeffOdd).then(|| Theorem2Table::new(k_max));
    (k_min..=k_max)
        .into_par_iter()
        .map(|k| {
            let start = Instant::now();
            let (lhs, rhs, term_count) = match theorem {
                Theorem::Thm2 => {
                    let lhs = table.as_ref().expect("table built").lhs(k)?;
                    (
                        ExactValue::Rational(lhs),
                        ExactValue::Rational(theorem2_rhs(k)?),
                        theorem2_term_count(k),
                    )
                }
                Theorem::Thm3 => {
                    let (lhs, count) = even_identity_eval(k)?;
                    (
                        ExactValue::Rational(lhs),
                        ExactValue::Rational(theorem3_rhs(k)?),
                        count,
                    )
                }
                Theorem::CoeffOdd => {
                    let lhs = table.as_ref().expect("table built").lhs(k)?;
                    (
                        ExactValue::Pi(coeff_odd_from(k, &lhs)),
                        ExactValue::Pi(one_over_two_pi()),
                        theorem2_term_count(k),
                    )
                }
                Theorem::CoeffEven => {
                    let (lhs, count) = if k == 0 {
                        (BigRational::zero(), 0)
                    } else {
                        even_identity_eval(k)?
                    };
                    (
                        ExactValue::Pi(coeff_even_from(k, &lhs)),
                        ExactValue::Pi(one_over_two_pi()),
                        count,
                    )
                }
            };
            Ok(IdentityReport {
                theorem,
                k,
                verified: lhs == rhs,
                lhs,
                rhs,
                term_count,
                elapsed: start.elapsed(),
            })
        })
        .collect()
}
