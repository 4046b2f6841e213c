//! Globally adaptive 15-point Gauss-Kronrod quadrature.
//!
//! The panel with the largest error estimate is bisected until the summed
//! error falls below the tolerance or the evaluation budget runs out. Panel
//! selection breaks ties by creation order and the final sum runs in panel
//! order, so results are bit-for-bit reproducible.
//!
//! Integrands return a [`Sample`], which lets an integrand itself be an inner
//! quadrature: its error is propagated through the Kronrod weights and its
//! evaluations are charged to the shared budget.

use std::cell::Cell;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Default evaluation budget for one (possibly nested) integral.
pub const DEFAULT_MAX_EVALS: u64 = 10_000_000;

/// Outcome of a numerical integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub evaluations: u64,
    /// Set only when the estimate met the requested tolerance.
    pub converged: bool,
    /// Truncation radius of an infinite domain, when one was applied.
    pub cutoff: Option<f64>,
}

impl QuadResult {
    pub fn with_cutoff(mut self, cutoff: f64) -> Self {
        self.cutoff = Some(cutoff);
        self
    }
}

/// One integrand value with its own uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub value: f64,
    pub error: f64,
    pub evaluations: u64,
    pub converged: bool,
}

impl From<f64> for Sample {
    fn from(value: f64) -> Self {
        Sample {
            value,
            error: 0.0,
            evaluations: 1,
            converged: true,
        }
    }
}

impl Sample {
    /// Wraps an inner integral whose evaluations were already charged to the
    /// same [`Integrator`].
    pub fn charged(q: QuadResult) -> Self {
        Sample {
            evaluations: 0,
            ..Sample::from(q)
        }
    }

    /// Placeholder for a point that could not be evaluated within budget.
    pub fn exhausted() -> Self {
        Sample {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
            converged: false,
        }
    }
}

impl From<QuadResult> for Sample {
    fn from(q: QuadResult) -> Self {
        Sample {
            value: q.value,
            error: q.abs_error_estimate,
            evaluations: q.evaluations,
            converged: q.converged,
        }
    }
}

// Gauss-Kronrod 7/15 abscissae and weights (QUADPACK qk15).
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    seq: u64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    // Largest error first; among equal errors the oldest panel.
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct RuleOutput {
    value: f64,
    error: f64,
    evaluations: u64,
    converged: bool,
}

#[allow(clippy::needless_range_loop)]
fn gauss_kronrod<F: FnMut(f64) -> Sample>(f: &mut F, a: f64, b: f64) -> RuleOutput {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let abs_half = half.abs();

    let mut evaluations = 0;
    let mut converged = true;
    let mut propagated = 0.0;
    let mut sample = |x: f64| {
        let s = f(x);
        evaluations += s.evaluations;
        converged &= s.converged;
        s
    };

    let fc = sample(center);
    let mut res_gauss = fc.value * WG[3];
    let mut res_kronrod = fc.value * WGK[7];
    let mut res_abs = res_kronrod.abs();
    propagated += WGK[7] * fc.error;
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];

    for j in 0..3 {
        let jtw = 2 * j + 1;
        let dx = half * XGK[jtw];
        let f1 = sample(center - dx);
        let f2 = sample(center + dx);
        fv1[jtw] = f1.value;
        fv2[jtw] = f2.value;
        let sum = f1.value + f2.value;
        res_gauss += WG[j] * sum;
        res_kronrod += WGK[jtw] * sum;
        res_abs += WGK[jtw] * (f1.value.abs() + f2.value.abs());
        propagated += WGK[jtw] * (f1.error + f2.error);
    }
    for j in 0..4 {
        let jtwm1 = 2 * j;
        let dx = half * XGK[jtwm1];
        let f1 = sample(center - dx);
        let f2 = sample(center + dx);
        fv1[jtwm1] = f1.value;
        fv2[jtwm1] = f2.value;
        let sum = f1.value + f2.value;
        res_kronrod += WGK[jtwm1] * sum;
        res_abs += WGK[jtwm1] * (f1.value.abs() + f2.value.abs());
        propagated += WGK[jtwm1] * (f1.error + f2.error);
    }

    let mean = 0.5 * res_kronrod;
    let mut res_asc = WGK[7] * (fc.value - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let value = res_kronrod * half;
    res_abs *= abs_half;
    res_asc *= abs_half;
    let mut err = ((res_kronrod - res_gauss) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }

    RuleOutput {
        value,
        error: err + propagated * abs_half,
        evaluations,
        converged,
    }
}

/// Adaptive integrator with an evaluation budget shared by nested calls.
#[derive(Debug)]
pub struct Integrator {
    max_evals: u64,
    used: Cell<u64>,
}

impl Integrator {
    pub fn new(max_evals: u64) -> Self {
        Integrator {
            max_evals,
            used: Cell::new(0),
        }
    }

    pub fn remaining(&self) -> u64 {
        self.max_evals.saturating_sub(self.used.get())
    }

    /// Integrates `f` over `[a, b]` (requires `a < b`), seeding panels at
    /// `breaks` (interior points, any order; out-of-range points ignored).
    pub fn integrate<F, S>(&self, mut f: F, a: f64, b: f64, breaks: &[f64], tol: f64) -> QuadResult
    where
        F: FnMut(f64) -> S,
        S: Into<Sample>,
    {
        let mut f = |x: f64| f(x).into();
        let mut points: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
        points.sort_by(f64::total_cmp);
        points.dedup();
        let mut edges = Vec::with_capacity(points.len() + 2);
        edges.push(a);
        edges.extend(points);
        edges.push(b);

        let start_used = self.used.get();
        let mut inner_ok = true;
        let mut seq = 0u64;
        let mut heap = BinaryHeap::new();
        let mut frozen: Vec<Panel> = Vec::new();
        let mut total_err = 0.0;

        let mut eval_panel = |lo: f64, hi: f64, seq: &mut u64, inner_ok: &mut bool| {
            let out = gauss_kronrod(&mut f, lo, hi);
            self.used.set(self.used.get() + out.evaluations);
            *inner_ok &= out.converged;
            *seq += 1;
            Panel {
                a: lo,
                b: hi,
                value: out.value,
                error: out.error,
                seq: *seq,
            }
        };

        for w in edges.windows(2) {
            let p = eval_panel(w[0], w[1], &mut seq, &mut inner_ok);
            total_err += p.error;
            heap.push(p);
        }

        while total_err > tol && self.used.get() < self.max_evals {
            let Some(worst) = heap.pop() else { break };
            let mid = 0.5 * (worst.a + worst.b);
            let scale = worst.a.abs().max(worst.b.abs()).max(f64::MIN_POSITIVE);
            if !(mid > worst.a && mid < worst.b) || (worst.b - worst.a) < 1e3 * f64::EPSILON * scale
            {
                // Too narrow to split further.
                frozen.push(worst);
                continue;
            }
            let left = eval_panel(worst.a, mid, &mut seq, &mut inner_ok);
            let right = eval_panel(mid, worst.b, &mut seq, &mut inner_ok);
            total_err += left.error + right.error - worst.error;
            heap.push(left);
            heap.push(right);
        }

        let mut panels: Vec<Panel> = heap.into_vec();
        panels.extend(frozen);
        panels.sort_by(|x, y| x.a.total_cmp(&y.a));
        let value: f64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        QuadResult {
            value,
            abs_error_estimate: error,
            evaluations: self.used.get() - start_used,
            converged: inner_ok && error <= tol,
            cutoff: None,
        }
    }

    /// Iterated integral `int_a^b int_{lo(x)}^{hi(x)} f(x, y) dy dx`.
    ///
    /// A tenth of `tol` is spent on the inner integrals, whose errors are
    /// propagated into the outer estimate.
    #[allow(clippy::too_many_arguments)]
    pub fn integrate_2d<F>(
        &self,
        f: F,
        a: f64,
        b: f64,
        outer_breaks: &[f64],
        inner: impl Fn(f64) -> (f64, f64),
        inner_breaks: impl Fn(f64) -> Vec<f64>,
        tol: f64,
    ) -> QuadResult
    where
        F: Fn(f64, f64) -> f64,
    {
        let inner_tol = 0.1 * tol / (b - a).abs().max(f64::MIN_POSITIVE);
        self.integrate(
            |x| {
                let (lo, hi) = inner(x);
                if self.remaining() == 0 {
                    return Sample::exhausted();
                }
                if hi <= lo {
                    return Sample::from(0.0);
                }
                Sample::charged(self.integrate(|y| f(x, y), lo, hi, &inner_breaks(x), inner_tol))
            },
            a,
            b,
            outer_breaks,
            0.9 * tol,
        )
    }
}

/// One-shot adaptive integral with the default budget.
pub fn integrate<F, S>(f: F, a: f64, b: f64, breaks: &[f64], tol: f64) -> QuadResult
where
    F: FnMut(f64) -> S,
    S: Into<Sample>,
{
    Integrator::new(DEFAULT_MAX_EVALS).integrate(f, a, b, breaks, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x: f64| x.powi(5) - 2.0 * x, 0.0, 2.0, &[], 1e-12);
        assert!(r.converged);
        assert!((r.value - (64.0 / 6.0 - 4.0)).abs() < 1e-13);
        assert_eq!(r.evaluations, 15);
    }

    #[test]
    fn endpoint_singularity() {
        // int_0^1 ln x dx = -1
        let r = integrate(|x: f64| x.ln(), 0.0, 1.0, &[], 1e-10);
        assert!(r.converged, "{r:?}");
        assert!((r.value + 1.0).abs() <= 1e-10);
    }

    #[test]
    fn breakpoint_kink() {
        let r = integrate(|x: f64| x.abs(), -1.0, 2.0, &[0.0], 1e-12);
        assert_eq!(r.evaluations, 30);
        assert!((r.value - 2.5).abs() < 1e-14);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let r = Integrator::new(200).integrate(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, &[], 1e-14);
        assert!(!r.converged);
        assert!(r.evaluations > 0);
    }

    #[test]
    fn nested_integral_of_gaussian() {
        let q = Integrator::new(DEFAULT_MAX_EVALS);
        let r = q.integrate_2d(
            |x, y| (-(x * x + y * y)).exp(),
            -8.0,
            8.0,
            &[0.0],
            |_| (-8.0, 8.0),
            |_| vec![0.0],
            1e-10,
        );
        assert!(r.converged);
        assert!((r.value - PI).abs() <= 1e-10, "{r:?}");
        assert!(r.abs_error_estimate <= 1e-10);
    }

    #[test]
    fn deterministic() {
        let run = || integrate(|x: f64| 1.0 / (1e-3 + x * x), -1.0, 1.0, &[], 1e-11);
        assert_eq!(run(), run());
    }
}
