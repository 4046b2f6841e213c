//! Evaluation of the normalized product constant `A_hat(n) = rho * A(1, n)`.
//!
//! Four independent routes are provided:
//!
//! * [`Method::ClosedForm`]: exact, from the summation identities.
//! * [`Method::Formula`]: the spherical-coordinate formula, exact constant
//!   factors times a numerically integrated `(t, xi)` double integral.
//! * [`Method::Direct`]: the defining integral over `R^n` for `n <= 2`.
//! * [`Method::Recursion`]: the dimension descent `A_hat(n) = A_hat(n-2)`,
//!   each step driven by a numerically integrated 2D reduction factor.
//!
//! `A_hat` carries no `rho`: substituting `x = rho u` in the defining integral
//! removes it, and every closed form has exactly one factor `1/rho`.

pub mod adaptive;

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

pub use adaptive::{Integrator, QuadResult, Sample, DEFAULT_MAX_EVALS};

use crate::error::{Error, Result};
use crate::exactnum::{double_factorial, gamma_half, ratio, BigRational, PiScaled};
use crate::identities::{coeff_even, coeff_odd};

/// Tolerance and evaluation budget for one numerical evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    pub tol: f64,
    pub max_evals: u64,
}

impl From<f64> for QuadConfig {
    fn from(tol: f64) -> Self {
        QuadConfig {
            tol,
            max_evals: DEFAULT_MAX_EVALS,
        }
    }
}

impl QuadConfig {
    fn checked(self, op: &'static str) -> Result<Self> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::domain(
                op,
                format!("tol must be positive, got {}", self.tol),
            ));
        }
        Ok(self)
    }

    fn integrator(&self) -> Integrator {
        Integrator::new(self.max_evals)
    }
}

/// `int_0^pi sin^j(theta) d theta`.
pub fn wallis(j: i64) -> Result<PiScaled> {
    if j < 0 {
        return Err(Error::domain(
            "wallis",
            format!("power must be >= 0, got {j}"),
        ));
    }
    let q = BigRational::new(double_factorial(j - 1)?, double_factorial(j)?);
    Ok(if j % 2 == 0 {
        PiScaled::new(q, 2)
    } else {
        PiScaled::rational(q * ratio(2, 1))
    })
}

/// `c_n = pi^((n+1)/2) / Gamma((n+1)/2)`, the Poisson-kernel normalization.
pub fn c_constant(n: i64) -> Result<PiScaled> {
    if n < 1 {
        return Err(Error::domain(
            "c_constant",
            format!("n must be >= 1, got {n}"),
        ));
    }
    Ok(&PiScaled::pi_power(n + 1) / &gamma_half(n + 1)?)
}

/// Checks `c_n = 2 pi / (n-1) * c_(n-2)` exactly.
pub fn c_recursion_check(n: i64) -> Result<bool> {
    if n < 3 {
        return Err(Error::domain(
            "c_recursion_check",
            format!("n must be >= 3, got {n}"),
        ));
    }
    let step = PiScaled::new(ratio(2, n - 1), 2);
    Ok(c_constant(n)? == &step * &c_constant(n - 2)?)
}

/// `prod_{j=1}^{n-3} int_0^pi sin^j`, empty (= 1) for `n = 3`.
pub fn wallis_product(n: i64) -> Result<PiScaled> {
    (1..=n - 3).try_fold(PiScaled::one(), |acc, j| Ok(&acc * &wallis(j)?))
}

fn txi_integrand(n: i32, u: f64, xi: f64) -> f64 {
    let (su, cu) = u.sin_cos();
    let (sx, cx) = xi.sin_cos();
    let cu2 = cu * cu;
    su.powi(n - 1) * sx.powi(n - 2) * cu2 / (cu2 + su * su * cx * cx)
}

/// The `(t, xi)` double integral
/// `int_0^inf int_0^pi t^(n-1) sin^(n-2)(xi) / ((1+t^2)^((n+1)/2) (1 + t^2 cos^2 xi)) dxi dt`.
///
/// With `t = tan u` the integrand becomes
/// `sin^(n-1)(u) sin^(n-2)(xi) cos^2(u) / (cos^2 u + sin^2 u cos^2 xi)`, bounded by 1
/// on `[0, pi/2] x [0, pi]`. The outer `xi` grid is seeded at `pi/2`, where the
/// inner integrand develops a boundary layer at `u = pi/2`.
pub fn inner_txi_integral(n: i64, cfg: impl Into<QuadConfig>) -> Result<QuadResult> {
    let cfg = cfg.into().checked("inner_txi_integral")?;
    if n < 3 {
        return Err(Error::domain(
            "inner_txi_integral",
            format!("n must be >= 3, got {n}"),
        ));
    }
    let n = i32::try_from(n).map_err(|_| Error::domain("inner_txi_integral", "n too large"))?;
    Ok(cfg.integrator().integrate_2d(
        |xi, u| txi_integrand(n, u, xi),
        0.0,
        PI,
        &[FRAC_PI_2],
        |_| (0.0, FRAC_PI_2),
        |_| Vec::new(),
        cfg.tol,
    ))
}

/// Route used to obtain `A_hat(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    ClosedForm,
    Formula,
    Direct,
    Recursion,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::ClosedForm => "closed",
            Method::Formula => "formula",
            Method::Direct => "direct",
            Method::Recursion => "recursion",
        }
    }

    /// Whether `n` is in the method's domain.
    pub fn accepts(self, n: i64) -> bool {
        match self {
            Method::ClosedForm => n >= 2,
            Method::Formula | Method::Recursion => n >= 3,
            Method::Direct => n == 1 || n == 2,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "closed" | "closed-form" => Ok(Method::ClosedForm),
            "formula" => Ok(Method::Formula),
            "direct" => Ok(Method::Direct),
            "recursion" => Ok(Method::Recursion),
            other => Err(format!(
                "unknown method '{other}' (expected closed, formula, direct or recursion)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AHatValue {
    Exact(PiScaled),
    Numeric(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AHatEvaluation {
    pub n: i64,
    pub method: Method,
    pub value: AHatValue,
    /// Absolute error bound on the value (0 for exact routes).
    pub abs_error_estimate: f64,
    /// The underlying numerical integral, when there is exactly one.
    pub quad: Option<QuadResult>,
    pub evaluations: u64,
    pub converged: bool,
}

impl AHatEvaluation {
    pub fn value_f64(&self) -> f64 {
        match &self.value {
            AHatValue::Exact(p) => p.to_f64(),
            AHatValue::Numeric(v) => *v,
        }
    }

    /// Turns a non-converged evaluation into an error.
    pub fn require_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NonConvergence {
                what: "a_hat",
                estimate: self.value_f64(),
                error: self.abs_error_estimate,
                tol: f64::NAN,
                evaluations: self.evaluations,
            })
        }
    }
}

/// `1 / (2 pi)` as a float.
pub const ONE_OVER_TWO_PI: f64 = 0.159_154_943_091_895_35;

/// Exact prefactor `2 pi / (c_1 c_n) * prod wallis` of the formula route.
pub fn formula_prefactor(n: i64) -> Result<PiScaled> {
    let two_pi = PiScaled::new(ratio(2, 1), 2);
    let cc = &c_constant(1)? * &c_constant(n)?;
    Ok(&(&two_pi / &cc) * &wallis_product(n)?)
}

/// `A_hat(n)` from the spherical-coordinate formula, `n >= 3`.
pub fn a_hat_formula(n: i64, cfg: impl Into<QuadConfig>) -> Result<AHatEvaluation> {
    let cfg = cfg.into().checked("a_hat_formula")?;
    if n < 3 {
        return Err(Error::domain(
            "a_hat_formula",
            format!("formula requires n >= 3, got {n}"),
        ));
    }
    let pre = formula_prefactor(n)?.to_f64();
    let inner = inner_txi_integral(
        n,
        QuadConfig {
            tol: cfg.tol / pre,
            ..cfg
        },
    )?;
    Ok(AHatEvaluation {
        n,
        method: Method::Formula,
        value: AHatValue::Numeric(pre * inner.value),
        abs_error_estimate: pre * inner.abs_error_estimate,
        evaluations: inner.evaluations,
        converged: inner.converged,
        quad: Some(inner),
    })
}

/// `A_hat(n)` by direct quadrature of
/// `(1 / (c_1 c_n)) int_{R^n} du / ((|u|^2 + 1)^((n+1)/2) (u_1^2 + 1))`, `n` in {1, 2}.
pub fn a_hat_direct(n: i64, cfg: impl Into<QuadConfig>) -> Result<AHatEvaluation> {
    let cfg = cfg.into().checked("a_hat_direct")?;
    let scale = (&c_constant(1)? * &c_constant(n.clamp(1, 2))?).to_f64();
    let q = cfg.integrator();
    let integral = match n {
        // u = tan(a): (1+u^2)^-2 du = cos^2(a) da
        1 => q.integrate(
            |a: f64| a.cos().powi(2),
            -FRAC_PI_2,
            FRAC_PI_2,
            &[0.0],
            cfg.tol * scale,
        ),
        // u1 = tan(a), u2 = tan(b), even in both; quarter domain times 4.
        2 => {
            let r = q.integrate_2d(
                |a, b| {
                    let (sb, cb) = b.sin_cos();
                    let ca = a.cos();
                    let d = (cb / ca).powi(2) + sb * sb;
                    cb / (d * d.sqrt())
                },
                0.0,
                FRAC_PI_2,
                &[],
                |_| (0.0, FRAC_PI_2),
                |_| Vec::new(),
                cfg.tol * scale / 4.0,
            );
            QuadResult {
                value: 4.0 * r.value,
                abs_error_estimate: 4.0 * r.abs_error_estimate,
                ..r
            }
        }
        _ => {
            return Err(Error::domain(
                "a_hat_direct",
                format!("direct route covers n in {{1, 2}}, got {n}"),
            ))
        }
    };
    Ok(AHatEvaluation {
        n,
        method: Method::Direct,
        value: AHatValue::Numeric(integral.value / scale),
        abs_error_estimate: integral.abs_error_estimate / scale,
        evaluations: integral.evaluations,
        converged: integral.converged,
        quad: Some(integral),
    })
}

/// Result of checking `int_{R^2} du dv / (s + u^2 + v^2)^((n+1)/2) = 2 pi / ((n-1) s^((n-1)/2))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionCheck {
    pub n: i64,
    pub s: f64,
    pub lhs: QuadResult,
    pub rhs: f64,
    pub passed: bool,
}

/// `2 pi / ((n-1) s^((n-1)/2))`.
pub fn reduction_rhs(n: i64, s: f64) -> f64 {
    2.0 * PI / ((n - 1) as f64 * s.powf((n - 1) as f64 / 2.0))
}

/// Numerically integrates the planar reduction integral in Cartesian
/// coordinates (`u = sqrt(s) tan a`, `v = sqrt(s) tan b`) and compares with
/// its polar closed form.
pub fn reduction_lemma(n: i64, s: f64, cfg: impl Into<QuadConfig>) -> Result<ReductionCheck> {
    let cfg = cfg.into().checked("reduction_lemma_check")?;
    if n < 3 {
        return Err(Error::domain(
            "reduction_lemma_check",
            format!("n must be >= 3, got {n}"),
        ));
    }
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::domain(
            "reduction_lemma_check",
            format!("s must be positive, got {s}"),
        ));
    }
    let lhs = planar_reduction(n, s, cfg.tol / 2.0, &cfg.integrator())?;
    let rhs = reduction_rhs(n, s);
    Ok(ReductionCheck {
        n,
        s,
        passed: lhs.converged && (lhs.value - rhs).abs() <= cfg.tol,
        lhs,
        rhs,
    })
}

/// Boolean form of [`reduction_lemma`].
pub fn reduction_lemma_check(n: i64, s: f64, cfg: impl Into<QuadConfig>) -> Result<bool> {
    reduction_lemma(n, s, cfg).map(|c| c.passed)
}

fn planar_reduction(n: i64, s: f64, tol: f64, q: &Integrator) -> Result<QuadResult> {
    let m = i32::try_from(n).map_err(|_| Error::domain("reduction_lemma_check", "n too large"))?;
    // After scaling out s and multiplying through by cos^(n+1) in both angles:
    // cos^(n-1)(a) cos^(n-1)(b) / (cos^2 b + cos^2 a sin^2 b)^((n+1)/2)
    let factor = 4.0 * s.powf((1 - m) as f64 / 2.0);
    let half_power = (m + 1) as f64 / 2.0;
    let r = q.integrate_2d(
        |a, b| {
            let ca = a.cos();
            let (sb, cb) = b.sin_cos();
            let d = cb * cb + ca * ca * sb * sb;
            (ca * cb).powi(m - 1) / d.powf(half_power)
        },
        0.0,
        FRAC_PI_2,
        &[],
        |_| (0.0, FRAC_PI_2),
        |_| Vec::new(),
        tol / factor,
    );
    Ok(QuadResult {
        value: factor * r.value,
        abs_error_estimate: factor * r.abs_error_estimate,
        ..r
    })
}

/// `A_hat(n)` by repeated dimension descent: each step multiplies by the
/// numerically integrated reduction factor `K_m c_(m-2) / c_m` (with
/// `K_m = int_{R^2} (1 + u^2 + v^2)^(-(m+1)/2)`) until the direct route at
/// `n = 1` or `n = 2` finishes the chain.
pub fn a_hat_recursion(n: i64, cfg: impl Into<QuadConfig>) -> Result<AHatEvaluation> {
    let cfg = cfg.into().checked("a_hat_recursion")?;
    if n < 3 {
        return Err(Error::domain(
            "a_hat_recursion",
            format!("recursion requires n >= 3, got {n}"),
        ));
    }
    let steps = ((n - 1) / 2) as f64;
    let base_n = if n % 2 == 1 { 1 } else { 2 };
    // Error budget: each factor is ~1 and the base is ~0.16.
    let share = cfg.tol / (steps + 1.0);
    let q = cfg.integrator();

    let mut product = 1.0;
    let mut rel_err = 0.0;
    let mut evaluations = 0;
    let mut converged = true;
    let mut m = n;
    while m > 2 {
        let ratio_c = (&c_constant(m - 2)? / &c_constant(m)?).to_f64();
        let k = planar_reduction(m, 1.0, share / (0.2 * ratio_c), &q)?;
        let factor = k.value * ratio_c;
        product *= factor;
        rel_err += k.abs_error_estimate * ratio_c / factor.abs();
        evaluations += k.evaluations;
        converged &= k.converged;
        m -= 2;
    }
    let base = a_hat_direct(
        base_n,
        QuadConfig {
            tol: share,
            max_evals: q.remaining().max(1),
        },
    )?;
    let value = product * base.value_f64();
    Ok(AHatEvaluation {
        n,
        method: Method::Recursion,
        value: AHatValue::Numeric(value),
        abs_error_estimate: value.abs() * rel_err + product * base.abs_error_estimate,
        quad: None,
        evaluations: evaluations + base.evaluations,
        converged: converged && base.converged,
    })
}

/// `A_hat(n)` from the closed-form coefficients (`n >= 2`).
pub fn a_hat_closed(n: i64) -> Result<AHatEvaluation> {
    if n < 2 {
        return Err(Error::domain(
            "a_hat_closed",
            format!("closed form requires n >= 2, got {n}"),
        ));
    }
    let k = (n - 1) / 2;
    let value = if n % 2 == 1 {
        coeff_odd(k)?
    } else {
        coeff_even((n - 2) / 2)?
    };
    Ok(AHatEvaluation {
        n,
        method: Method::ClosedForm,
        value: AHatValue::Exact(value),
        abs_error_estimate: 0.0,
        quad: None,
        evaluations: 0,
        converged: true,
    })
}

/// Dispatches on `method`.
pub fn a_hat(n: i64, method: Method, cfg: impl Into<QuadConfig>) -> Result<AHatEvaluation> {
    match method {
        Method::ClosedForm => a_hat_closed(n),
        Method::Formula => a_hat_formula(n, cfg),
        Method::Direct => a_hat_direct(n, cfg),
        Method::Recursion => a_hat_recursion(n, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::identities::one_over_two_pi;

    #[test]
    fn wallis_values() {
        assert_eq!(wallis(0).unwrap(), PiScaled::new(ratio(1, 1), 2));
        assert_eq!(wallis(1).unwrap(), PiScaled::rational(ratio(2, 1)));
        assert_eq!(wallis(2).unwrap(), PiScaled::new(ratio(1, 2), 2));
        assert!(wallis(-1).is_err());
    }

    #[test]
    fn wallis_matches_numeric_quadrature() {
        for j in 0..=20 {
            let num = adaptive::integrate(|t: f64| t.sin().powi(j), 0.0, PI, &[], 1e-13);
            let exact = wallis(j as i64).unwrap().to_f64();
            assert!(
                (num.value - exact).abs() <= 1e-12,
                "j={j}: {} vs {exact}",
                num.value
            );
        }
    }

    #[test]
    fn wallis_pairing() {
        for j in 1..60 {
            let lhs = &wallis(j).unwrap() * &wallis(j - 1).unwrap();
            assert_eq!(lhs, PiScaled::new(ratio(2, j), 2), "j={j}");
        }
    }

    #[test]
    fn c_constant_values() {
        assert_eq!(c_constant(1).unwrap(), PiScaled::new(ratio(1, 1), 2));
        assert_eq!(c_constant(2).unwrap(), PiScaled::new(ratio(2, 1), 2));
        assert_eq!(c_constant(3).unwrap(), PiScaled::new(ratio(1, 1), 4));
        assert_eq!(c_constant(4).unwrap(), PiScaled::new(ratio(4, 3), 4));
        assert!(c_constant(0).is_err());
    }

    #[test]
    fn c_recursion() {
        for n in 3..=50 {
            assert!(c_recursion_check(n).unwrap(), "n={n}");
        }
        assert!(c_recursion_check(2).is_err());
    }

    #[test]
    fn txi_integral_matches_closed_value() {
        // I_n = pi / (2 (n-1)), forced by A_hat(n) = 1/(2 pi) and the prefactor.
        for n in 3..=6 {
            let r = inner_txi_integral(n, 1e-10).unwrap();
            let expect = PI / (2.0 * (n - 1) as f64);
            assert!(r.converged);
            assert!(r.abs_error_estimate <= 1e-10);
            assert!((r.value - expect).abs() <= 1e-9, "n={n}: {}", r.value);
        }
    }

    #[test]
    fn txi_integral_fixed_grid_oracle() {
        // Composite midpoint rule on a fine grid, independent of the adaptive engine.
        let n = 3;
        let (nu, nx) = (2000, 4000);
        let (hu, hx) = (FRAC_PI_2 / nu as f64, PI / nx as f64);
        let mut sum = 0.0;
        for i in 0..nx {
            let xi = (i as f64 + 0.5) * hx;
            for j in 0..nu {
                let u = (j as f64 + 0.5) * hu;
                sum += txi_integrand(n, u, xi);
            }
        }
        let grid = sum * hu * hx;
        let adaptive = inner_txi_integral(3, 1e-10).unwrap().value;
        assert!((grid - adaptive).abs() < 1e-5, "{grid} vs {adaptive}");
    }

    #[test]
    fn formula_examples() {
        for n in [3, 4, 5, 10] {
            let e = a_hat_formula(n, 1e-9).unwrap();
            assert!(e.converged);
            assert!((e.value_f64() - ONE_OVER_TWO_PI).abs() <= 1e-8, "n={n}");
        }
        assert!(a_hat_formula(2, 1e-8).is_err());
    }

    #[test]
    fn formula_n4_uses_wallis_one() {
        assert_eq!(wallis_product(4).unwrap(), wallis(1).unwrap());
        assert_eq!(wallis_product(3).unwrap(), PiScaled::one());
    }

    #[test]
    fn direct_examples() {
        let e = a_hat_direct(1, 1e-12).unwrap();
        assert!((e.value_f64() - 0.159_154_943_091_895).abs() <= 1e-12);
        let e = a_hat_direct(2, 1e-11).unwrap();
        assert!(e.converged);
        assert!((e.value_f64() - ONE_OVER_TWO_PI).abs() <= 1e-10);
        assert!(a_hat_direct(3, 1e-8).is_err());
    }

    #[test]
    fn reduction_examples() {
        let c = reduction_lemma(3, 1.0, 1e-8).unwrap();
        assert!((c.rhs - PI).abs() < 1e-14);
        assert!(c.passed, "{c:?}");
        let c = reduction_lemma(5, 1.0, 1e-8).unwrap();
        assert!((c.rhs - FRAC_PI_2).abs() < 1e-14);
        assert!(c.passed);
        // 2 pi / (2 * 4^1)
        let c = reduction_lemma(3, 4.0, 1e-8).unwrap();
        assert!((c.rhs - PI / 4.0).abs() < 1e-14);
        assert!(c.passed);
        assert!(reduction_lemma_check(3, 0.0, 1e-8).is_err());
    }

    #[test]
    fn recursion_examples() {
        for n in [3, 4, 7] {
            let e = a_hat_recursion(n, 1e-9).unwrap();
            assert!(e.converged);
            assert!((e.value_f64() - ONE_OVER_TWO_PI).abs() <= 1e-8, "n={n}");
        }
    }

    #[test]
    fn closed_route_is_exact() {
        for n in 2..=12 {
            let e = a_hat_closed(n).unwrap();
            assert_eq!(e.value, AHatValue::Exact(one_over_two_pi()));
        }
        assert!(a_hat_closed(1).is_err());
    }

    #[test]
    fn halving_tol_never_increases_error_estimate() {
        for n in [3, 5, 8] {
            let mut prev = f64::INFINITY;
            for tol in [1e-6, 5e-7, 2.5e-7, 1.25e-7, 6.25e-8] {
                let r = inner_txi_integral(n, tol).unwrap();
                assert!(r.converged && r.abs_error_estimate <= tol);
                assert!(r.abs_error_estimate <= prev, "n={n} tol={tol}");
                prev = r.abs_error_estimate;
            }
        }
    }

    #[test]
    fn bad_tolerance_rejected() {
        assert!(inner_txi_integral(3, 0.0).is_err());
        assert!(a_hat_formula(3, -1.0).is_err());
    }
}
