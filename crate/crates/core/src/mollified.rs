//! The harmonic product `delta(x_1..x_n) o delta(x_1)` at a finite height `rho`.
//!
//! Both factors are replaced by their Poisson-kernel representations at
//! `y = rho` and the pairing `<P_n(., rho) P_1(x_1, rho), phi>` is integrated
//! numerically. Its Laurent structure in `rho` is then fitted from a ladder
//! of heights.
//!
//! Integration variables: `x_1 = rho tan a` and, for `n >= 2`, the transverse
//! radius `r = rho tan b`, with the exact sphere-area factor for the remaining
//! angles. In these variables `P_1 dx_1 = da / pi` and the product integrand
//! is bounded, so the normalized action `2 pi rho <...>` needs no `rho`
//! rescaling.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exactnum::sphere_area;
use crate::hypernum::RhoSeries;
use crate::quadrature::{c_constant, Integrator, QuadConfig, QuadResult, Sample};

/// A test function with an exactly known value at the origin.
///
/// Only [`TestFunction::BumpCompact`] has compact support; the Gaussian and
/// constant kinds are non-compact conveniences whose pairings still converge
/// absolutely against the kernel product.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    /// `exp(-|x|^2 / width^2)`.
    GaussianRadial {
        width: f64,
    },
    /// `exp(-|x - center|^2 / width^2)`; `center` has one entry per dimension.
    GaussianShifted {
        center: Vec<f64>,
        width: f64,
    },
    /// `exp(-1 / (1 - |x/radius|^2))` inside the ball, zero outside.
    BumpCompact {
        radius: f64,
    },
    Constant {
        level: f64,
    },
}

impl TestFunction {
    pub fn value_at_origin(&self) -> f64 {
        match self {
            TestFunction::GaussianRadial { .. } => 1.0,
            TestFunction::GaussianShifted { center, width } => {
                (-center.iter().map(|c| c * c).sum::<f64>() / (width * width)).exp()
            }
            TestFunction::BumpCompact { .. } => (-1.0f64).exp(),
            TestFunction::Constant { level } => *level,
        }
    }

    /// `false` for the non-compact conveniences.
    pub fn is_compactly_supported(&self) -> bool {
        matches!(self, TestFunction::BumpCompact { .. })
    }

    /// Upper bound on `|phi|`.
    pub fn sup_abs(&self) -> f64 {
        match self {
            TestFunction::BumpCompact { .. } => (-1.0f64).exp(),
            TestFunction::Constant { level } => level.abs(),
            _ => 1.0,
        }
    }

    /// Length scale where the function varies.
    fn scale(&self) -> Option<f64> {
        match self {
            TestFunction::GaussianRadial { width }
            | TestFunction::GaussianShifted { width, .. } => Some(*width),
            TestFunction::BumpCompact { radius } => Some(*radius),
            TestFunction::Constant { .. } => None,
        }
    }

    /// Depends only on `x_1` and `|x_perp|`.
    pub fn is_axially_symmetric(&self) -> bool {
        match self {
            TestFunction::GaussianShifted { center, .. } => {
                center.iter().skip(1).all(|c| *c == 0.0)
            }
            _ => true,
        }
    }

    /// Value at `x`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let norm2 = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        match self {
            TestFunction::GaussianRadial { width } => (-norm2(x) / (width * width)).exp(),
            TestFunction::GaussianShifted { center, width } => {
                let d: f64 = x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum();
                (-d / (width * width)).exp()
            }
            TestFunction::BumpCompact { radius } => bump(norm2(x) / (radius * radius)),
            TestFunction::Constant { level } => *level,
        }
    }

    /// Value at a point with axial coordinate `x1` and transverse radius `r`.
    fn eval_axial(&self, x1: f64, r: f64) -> f64 {
        match self {
            TestFunction::GaussianRadial { width } => (-(x1 * x1 + r * r) / (width * width)).exp(),
            TestFunction::GaussianShifted { center, width } => {
                let d = x1 - center[0];
                (-(d * d + r * r) / (width * width)).exp()
            }
            TestFunction::BumpCompact { radius } => bump((x1 * x1 + r * r) / (radius * radius)),
            TestFunction::Constant { level } => *level,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::domain(
                    "test_function",
                    format!("{what} must be positive, got {v}"),
                ))
            }
        };
        match self {
            TestFunction::GaussianRadial { width } => positive(*width, "width"),
            TestFunction::GaussianShifted { center, width } => {
                positive(*width, "width")?;
                if center.len() != n {
                    return Err(Error::domain(
                        "test_function",
                        format!("center has {} coordinates, dimension is {n}", center.len()),
                    ));
                }
                Ok(())
            }
            TestFunction::BumpCompact { radius } => positive(*radius, "radius"),
            TestFunction::Constant { level } if !level.is_finite() => {
                Err(Error::domain("test_function", "level must be finite"))
            }
            TestFunction::Constant { .. } => Ok(()),
        }
    }
}

fn bump(t: f64) -> f64 {
    if t < 1.0 {
        (-1.0 / (1.0 - t)).exp()
    } else {
        0.0
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestFunction::GaussianRadial { width } => write!(f, "gaussian:{width}"),
            TestFunction::GaussianShifted { center, width } => {
                let c: Vec<String> = center.iter().map(|v| v.to_string()).collect();
                write!(f, "shifted:{}:{width}", c.join(","))
            }
            TestFunction::BumpCompact { radius } => write!(f, "bump:{radius}"),
            TestFunction::Constant { level } => write!(f, "const:{level}"),
        }
    }
}

impl FromStr for TestFunction {
    type Err = String;

    /// `gaussian:W`, `shifted:C1,C2,...:W`, `bump:R` or `const:L`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| format!("invalid number '{v}' in test function '{s}'"))
        };
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["gaussian", w] => Ok(TestFunction::GaussianRadial { width: num(w)? }),
            ["shifted", c, w] => Ok(TestFunction::GaussianShifted {
                center: c.split(',').map(num).collect::<std::result::Result<_, _>>()?,
                width: num(w)?,
            }),
            ["bump", r] => Ok(TestFunction::BumpCompact { radius: num(r)? }),
            ["const", l] => Ok(TestFunction::Constant { level: num(l)? }),
            _ => Err(format!(
                "unknown test function '{s}' (expected gaussian:W, shifted:C1,..,Cn:W, bump:R or const:L)"
            )),
        }
    }
}

fn check_dim(op: &'static str, n: i64) -> Result<usize> {
    if n < 1 {
        return Err(Error::domain(
            op,
            format!("dimension must be >= 1, got {n}"),
        ));
    }
    usize::try_from(n).map_err(|_| Error::domain(op, "dimension too large"))
}

fn check_positive(op: &'static str, what: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(
            op,
            format!("{what} must be positive, got {v}"),
        ))
    }
}

/// `P_n(x; y) = y / (c_n (|x|^2 + y^2)^((n+1)/2))`.
pub fn poisson_kernel(n: i64, x: &[f64], y: f64) -> Result<f64> {
    let dim = check_dim("poisson_kernel", n)?;
    check_positive("poisson_kernel", "y", y)?;
    if x.len() != dim {
        return Err(Error::domain(
            "poisson_kernel",
            format!("point has {} coordinates, dimension is {n}", x.len()),
        ));
    }
    let c = c_constant(n)?.to_f64();
    let d2: f64 = x.iter().map(|v| v * v).sum::<f64>() + y * y;
    Ok(y / (c * d2.powf((n + 1) as f64 / 2.0)))
}

/// Total mass of `P_n(.; y)` by radial quadrature, truncated at the radius
/// where the tail mass bound `area(S^(n-1)) y / (c_n R)` drops below `tol/10`.
pub fn kernel_mass(n: i64, y: f64, cfg: impl Into<QuadConfig>) -> Result<QuadResult> {
    let cfg = cfg.into();
    check_dim("kernel_mass", n)?;
    check_positive("kernel_mass", "y", y)?;
    check_positive("kernel_mass", "tol", cfg.tol)?;
    let area = sphere_area(n - 1)?.to_f64();
    let c = c_constant(n)?.to_f64();
    let cutoff = 10.0 * area * y / (c * cfg.tol);
    let m = i32::try_from(n).map_err(|_| Error::domain("kernel_mass", "dimension too large"))?;
    // r = y tan(u): area/c_n * sin^(n-1)(u) du
    let pre = area / c;
    let r = Integrator::new(cfg.max_evals).integrate(
        |u: f64| pre * u.sin().powi(m - 1),
        0.0,
        (cutoff / y).atan(),
        &[],
        0.9 * cfg.tol,
    );
    let tail = pre * y / cutoff;
    Ok(QuadResult {
        abs_error_estimate: r.abs_error_estimate + tail,
        ..r
    }
    .with_cutoff(cutoff))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProductActionResult {
    pub n: i64,
    pub rho: f64,
    pub phi: TestFunction,
    /// `<P_n(., rho) P_1(x_1, rho), phi>`.
    pub action: f64,
    /// `2 pi rho * action`.
    pub normalized: f64,
    /// Quadrature of `normalized`; its error includes the truncation tail.
    pub quad: QuadResult,
}

/// Kernel-product weight in `(a, b)` after both tangent substitutions:
/// `sin^(n-2)(b) cos(b) / (cos^2(b) / cos^2(a) + sin^2(b))^((n+1)/2)`.
fn product_weight(n: i32, a: f64, b: f64) -> f64 {
    let ca = a.cos();
    let (sb, cb) = b.sin_cos();
    let d = (cb / ca).powi(2) + sb * sb;
    sb.powi(n - 2) * cb / d.powf((n + 1) as f64 / 2.0)
}

/// Truncation radius making the neglected normalized mass at most `tol / 10`.
fn cutoff_radius(n: i64, rho: f64, phi: &TestFunction, tol: f64) -> Result<f64> {
    if let TestFunction::BumpCompact { radius } = phi {
        return Ok(*radius);
    }
    let m = phi.sup_abs().max(f64::MIN_POSITIVE);
    // |x_1| > R: 4 rho^3 M / (3 pi R^3); |x_perp| > R: 2 rho M area(S^(n-1)) / (c_n R)
    let axial = (80.0 * rho.powi(3) * m / (3.0 * PI * tol)).cbrt();
    let transverse = if n >= 2 {
        let area = sphere_area(n - 1)?.to_f64();
        40.0 * rho * m * area / (c_constant(n)?.to_f64() * tol)
    } else {
        0.0
    };
    Ok(axial.max(transverse).max(rho))
}

/// `<P_n(., rho) P_1(x_1, rho), phi>`, with `tol` applying to the normalized
/// value `2 pi rho * action`.
///
/// `n >= 3` integrates over `(x_1, |x_perp|)`, which needs an axially symmetric
/// `phi` except for `n = 3`, where an extra azimuthal integral is added.
pub fn product_action(
    n: i64,
    rho: f64,
    phi: &TestFunction,
    cfg: impl Into<QuadConfig>,
) -> Result<ProductActionResult> {
    let cfg = cfg.into();
    let dim = check_dim("product_action", n)?;
    check_positive("product_action", "rho", rho)?;
    check_positive("product_action", "tol", cfg.tol)?;
    phi.validate(dim)?;
    if n >= 4 && !phi.is_axially_symmetric() {
        return Err(Error::domain(
            "product_action",
            format!("test function {phi} is not axially symmetric; required for n >= 4"),
        ));
    }
    let m = i32::try_from(n).map_err(|_| Error::domain("product_action", "dimension too large"))?;

    let cutoff = cutoff_radius(n, rho, phi, cfg.tol)?;
    let tail = if phi.is_compactly_supported() {
        0.0
    } else {
        0.1 * cfg.tol
    };
    let limit = (cutoff / rho).atan();
    let q = Integrator::new(cfg.max_evals);
    let tol = 0.9 * cfg.tol;

    let mut breaks = vec![0.0];
    if let Some(s) = phi.scale() {
        breaks.extend([-(s / rho).atan(), (s / rho).atan()]);
    }
    if let TestFunction::GaussianShifted { center, .. } = phi {
        breaks.push((center[0] / rho).atan());
    }

    let (prefactor, raw) = match m {
        1 => {
            let r = q.integrate(
                |a: f64| a.cos().powi(2) * phi.eval(&[rho * a.tan()]),
                -limit,
                limit,
                &breaks,
                tol * PI / 2.0,
            );
            (2.0 / PI, r)
        }
        2 => {
            let pre = 2.0 / c_constant(2)?.to_f64();
            let r = q.integrate_2d(
                |a, b| product_weight(2, a, b) * phi.eval(&[rho * a.tan(), rho * b.tan()]),
                -limit,
                limit,
                &breaks,
                |_| (-limit, limit),
                |_| breaks.clone(),
                tol / pre,
            );
            (pre, r)
        }
        _ if phi.is_axially_symmetric() => {
            let area = sphere_area(n - 2)?.to_f64();
            let pre = 2.0 * area / c_constant(n)?.to_f64();
            let r = q.integrate_2d(
                |a, b| product_weight(m, a, b) * phi.eval_axial(rho * a.tan(), rho * b.tan()),
                -limit,
                limit,
                &breaks,
                |_| (0.0, limit),
                |_| breaks.iter().copied().filter(|v| *v > 0.0).collect(),
                tol / pre,
            );
            (pre, r)
        }
        _ => {
            // n = 3, off-axis center: x_perp = r (cos g, sin g), g in [0, 2 pi).
            let pre = 2.0 / c_constant(3)?.to_f64();
            let inner_tol = 0.1 * (tol / pre) / (2.0 * limit);
            let r = q.integrate(
                |a: f64| {
                    if q.remaining() == 0 {
                        return Sample::exhausted();
                    }
                    let x1 = rho * a.tan();
                    Sample::charged(q.integrate_2d(
                        |b, g| {
                            let rad = rho * b.tan();
                            let (sg, cg) = g.sin_cos();
                            product_weight(3, a, b) * phi.eval(&[x1, rad * cg, rad * sg])
                        },
                        0.0,
                        limit,
                        &breaks,
                        |_| (0.0, 2.0 * PI),
                        |_| vec![PI],
                        inner_tol,
                    ))
                },
                -limit,
                limit,
                &breaks,
                0.9 * tol / pre,
            );
            (pre, r)
        }
    };

    let normalized = prefactor * raw.value;
    let quad = QuadResult {
        value: normalized,
        abs_error_estimate: prefactor * raw.abs_error_estimate + tail,
        ..raw
    }
    .with_cutoff(cutoff);
    Ok(ProductActionResult {
        n,
        rho,
        phi: phi.clone(),
        action: normalized / (2.0 * PI * rho),
        normalized,
        quad,
    })
}

/// `|2 pi rho <., phi> - phi(0) 2 pi rho <., 1>|`, the error of replacing
/// `phi` by its value at the origin inside the pairing.
pub fn localization_gap(
    n: i64,
    rho: f64,
    phi: &TestFunction,
    cfg: impl Into<QuadConfig>,
) -> Result<f64> {
    let cfg = cfg.into();
    let with_phi = product_action(n, rho, phi, cfg)?;
    let with_one = product_action(n, rho, &TestFunction::Constant { level: 1.0 }, cfg)?;
    for r in [&with_phi, &with_one] {
        if !r.quad.converged {
            return Err(Error::NonConvergence {
                what: "localization_gap",
                estimate: r.normalized,
                error: r.quad.abs_error_estimate,
                tol: cfg.tol,
                evaluations: r.quad.evaluations,
            });
        }
    }
    Ok((with_phi.normalized - phi.value_at_origin() * with_one.normalized).abs())
}

/// Default height ladder `0.1 * 2^-m`, `m = 0..=5`.
pub fn default_ladder() -> Vec<f64> {
    (0..=5).map(|m| 0.1 * 0.5f64.powi(m)).collect()
}

/// Largest admissible condition number of the column-scaled design matrix.
pub const MAX_FIT_CONDITION: f64 = 1e10;

#[derive(Debug, Clone)]
pub struct LaurentFit {
    /// Fitted `c_-1 rho^-1 + c_0`, truncated at order 0.
    pub series: RhoSeries<f64>,
    /// Coefficients of the `rho log(rho)` and `rho` correction columns, as
    /// many as were fitted.
    pub corrections: Vec<f64>,
    pub points: Vec<ProductActionResult>,
    pub condition: f64,
    pub residual_rms: f64,
}

impl LaurentFit {
    pub fn c_minus1(&self) -> f64 {
        self.series.coeff(-1).unwrap_or(0.0)
    }

    pub fn c0(&self) -> f64 {
        self.series.coeff(0).unwrap_or(0.0)
    }
}

/// Least-squares fit of the action over a ladder of heights against
/// `c_-1 / rho + c_0`.
///
/// The normalized action approaches `phi(0)` like `rho^2 log(rho)`: the
/// transverse second moment of the kernel product diverges logarithmically.
/// So with three heights a `rho log(rho)` column is fitted too, and with four
/// or more a `rho` column as well; left out, these corrections would bias
/// `c_-1`. Their coefficients are reported separately and are not part of
/// the returned series, which is truncated at `rho^0`.
pub fn laurent_fit(
    n: i64,
    phi: &TestFunction,
    rho_ladder: &[f64],
    cfg: impl Into<QuadConfig>,
) -> Result<LaurentFit> {
    let cfg = cfg.into();
    validate_ladder(rho_ladder)?;
    let points: Vec<ProductActionResult> = rho_ladder
        .par_iter()
        .map(|&rho| product_action(n, rho, phi, cfg))
        .collect::<Result<_>>()?;
    if let Some(bad) = points.iter().find(|p| !p.quad.converged) {
        return Err(Error::NonConvergence {
            what: "laurent_fit",
            estimate: bad.normalized,
            error: bad.quad.abs_error_estimate,
            tol: cfg.tol,
            evaluations: bad.quad.evaluations,
        });
    }
    let samples: Vec<(f64, f64)> = points.iter().map(|p| (p.rho, p.action)).collect();
    let (coef, condition, residual_rms) = fit_laurent_samples(&samples)?;
    Ok(LaurentFit {
        series: RhoSeries::truncated([(-1, coef[0]), (0, coef[1])], 0),
        corrections: coef.get(2..).map(<[f64]>::to_vec).unwrap_or_default(),
        points,
        condition,
        residual_rms,
    })
}

/// Heights must be positive, finite, strictly decreasing, at least two.
pub fn validate_ladder(ladder: &[f64]) -> Result<()> {
    if ladder.len() < 2 {
        return Err(Error::domain(
            "laurent_fit",
            format!("ladder needs at least 2 heights, got {}", ladder.len()),
        ));
    }
    if ladder.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::domain(
            "laurent_fit",
            "ladder heights must be positive",
        ));
    }
    if ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::domain(
            "laurent_fit",
            "ladder must be strictly decreasing",
        ));
    }
    Ok(())
}

/// Solves the least-squares problem on `(rho, action)` samples; returns the
/// coefficients of `rho^-1, rho^0[, rho log(rho)[, rho]]`, the condition number of the
/// column-scaled design, and the residual RMS.
pub fn fit_laurent_samples(samples: &[(f64, f64)]) -> Result<(Vec<f64>, f64, f64)> {
    let rows = samples.len();
    let cols = rows.min(4);
    let mut design = DMatrix::<f64>::zeros(rows, cols);
    let mut rhs = DVector::<f64>::zeros(rows);
    for (i, &(rho, value)) in samples.iter().enumerate() {
        design[(i, 0)] = 1.0 / rho;
        design[(i, 1)] = 1.0;
        if cols >= 3 {
            design[(i, 2)] = rho * rho.ln();
        }
        if cols >= 4 {
            design[(i, 3)] = rho;
        }
        rhs[i] = value;
    }
    let scales: Vec<f64> = (0..cols)
        .map(|j| design.column(j).amax().max(f64::MIN_POSITIVE))
        .collect();
    for (j, s) in scales.iter().enumerate() {
        design.column_mut(j).scale_mut(1.0 / s);
    }
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if condition.is_nan() || condition > MAX_FIT_CONDITION {
        return Err(Error::IllConditioned(format!(
            "design condition number {condition:e} exceeds {MAX_FIT_CONDITION:e}; spread the ladder"
        )));
    }
    let solution = svd
        .solve(&rhs, f64::EPSILON * smax)
        .map_err(|e| Error::IllConditioned(e.to_string()))?;
    let residual = &design * &solution - &rhs;
    let residual_rms = (residual.norm_squared() / rows as f64).sqrt();
    let coef = solution.iter().zip(&scales).map(|(c, s)| c / s).collect();
    Ok((coef, condition, residual_rms))
}
