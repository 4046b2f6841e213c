//! The `harmprod` command line: identity suites, `A_hat(n)` by any route, and
//! mollified products, each emitted as a JSON, CSV or text report.
//!
//! Exit codes: 0 success, 1 a verification or convergence failure, 2 a usage
//! or configuration error. Settings resolve flag > environment > config file >
//! default; the environment variables are `HARMPROD_TOL` and
//! `HARMPROD_PARALLELISM`.

pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use crate::error::Error;
use crate::identities::{verify_range, ExactValue, Theorem, DEFAULT_THM2_K, DEFAULT_THM3_K};
use crate::mollified::{
    default_ladder, fit_laurent_samples, product_action, validate_ladder, TestFunction,
};
use crate::quadrature::{a_hat, AHatValue, Method, QuadConfig, DEFAULT_MAX_EVALS, ONE_OVER_TWO_PI};

pub use report::{canonical_json, Field, Format, Report};

pub const ENV_TOL: &str = "HARMPROD_TOL";
pub const ENV_PARALLELISM: &str = "HARMPROD_PARALLELISM";

pub const DEFAULT_TOL: f64 = 1e-8;
/// Relative tolerance on the fitted `c_-1`.
pub const DEFAULT_FIT_TOL: f64 = 1e-3;
const DEFAULT_N: (i64, i64) = (1, 10);

pub const IDENTITY_COLUMNS: &[&str] =
    &["theorem", "k", "lhs", "rhs", "verified", "term_count", "ms"];
pub const AHAT_COLUMNS: &[&str] = &[
    "n",
    "method",
    "value",
    "exact",
    "expected",
    "abs_dev",
    "abs_error_estimate",
    "evaluations",
    "converged",
];
pub const PRODUCT_COLUMNS: &[&str] = &[
    "n",
    "rho",
    "phi",
    "action",
    "normalized",
    "abs_error_estimate",
    "converged",
    "c_minus1_fit",
    "gap",
];

#[derive(Debug, Parser)]
#[command(
    name = "harmprod",
    version,
    about = "Verify harmonic-product identities and coefficients"
)]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Report format.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads.
    #[arg(short = 'j', long, global = true)]
    parallelism: Option<usize>,
    /// Absolute quadrature tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Integrand evaluation budget per quadrature.
    #[arg(long, global = true)]
    max_evals: Option<u64>,
    /// Relative tolerance for the fitted rho^-1 coefficient.
    #[arg(long, global = true)]
    fit_tol: Option<f64>,
    /// Settings file with `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Fill the `ms` column with wall-clock times (makes output nondeterministic).
    #[arg(long, global = true)]
    timings: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the exact combinatorial identities over a range of k.
    Identities {
        /// 2, 3, odd or even.
        #[arg(long, value_parser = parse_theorem)]
        theorem: Theorem,
        /// Inclusive range `a..b`, or a single value.
        #[arg(long, value_parser = parse_range)]
        k: Option<(i64, i64)>,
    },
    /// Compute rho * A(1, n) and compare it with 1/(2 pi).
    Ahat {
        /// Inclusive range `a..b`, or a single value.
        #[arg(long, value_parser = parse_range)]
        n: Option<(i64, i64)>,
        /// closed, formula, direct, recursion or auto.
        #[arg(long, default_value = "auto")]
        method: String,
    },
    /// Evaluate the mollified product and fit its rho^-1 coefficient.
    Product {
        #[arg(long, default_value_t = 3)]
        n: i64,
        /// gaussian:W, shifted:C1,..,Cn:W, bump:R or const:L.
        #[arg(long, default_value = "gaussian:1")]
        phi: TestFunction,
        /// A single height.
        #[arg(long, conflicts_with = "ladder")]
        rho: Option<f64>,
        /// Strictly decreasing heights, comma separated.
        #[arg(long, value_delimiter = ',')]
        ladder: Option<Vec<f64>>,
    },
}

fn parse_theorem(s: &str) -> Result<Theorem, String> {
    match s {
        "2" | "thm2" => Ok(Theorem::Thm2),
        "3" | "thm3" => Ok(Theorem::Thm3),
        "odd" | "coeff_odd" => Ok(Theorem::CoeffOdd),
        "even" | "coeff_even" => Ok(Theorem::CoeffEven),
        other => Err(format!(
            "unknown theorem '{other}' (expected 2, 3, odd or even)"
        )),
    }
}

/// `a..b`, `a..=b` (both inclusive) or `a`.
pub fn parse_range(s: &str) -> Result<(i64, i64), String> {
    let int = |v: &str| {
        v.trim()
            .parse::<i64>()
            .map_err(|_| format!("invalid integer '{v}' in range '{s}'"))
    };
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (int(a)?, int(b.strip_prefix('=').unwrap_or(b))?),
        None => {
            let v = int(s)?;
            (v, v)
        }
    };
    if b < a {
        return Err(format!("empty range '{s}'"));
    }
    Ok((a, b))
}

/// Resolved settings shared by all commands.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub format: Format,
    pub parallelism: usize,
    pub tol: f64,
    pub max_evals: u64,
    pub fit_tol: f64,
    pub timings: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            format: Format::Json,
            parallelism: std::thread::available_parallelism().map_or(1, |n| n.get()),
            tol: DEFAULT_TOL,
            max_evals: DEFAULT_MAX_EVALS,
            fit_tol: DEFAULT_FIT_TOL,
            timings: false,
        }
    }
}

impl Settings {
    fn quad(&self) -> QuadConfig {
        QuadConfig {
            tol: self.tol,
            max_evals: self.max_evals,
        }
    }

    fn set(&mut self, key: &str, value: &str, origin: &str) -> Result<(), String> {
        let bad = |what: &str| format!("{origin}: invalid {what} '{value}'");
        match key {
            "format" => self.format = value.parse().map_err(|e| format!("{origin}: {e}"))?,
            "parallelism" => self.parallelism = value.parse().map_err(|_| bad("parallelism"))?,
            "tol" => self.tol = value.parse().map_err(|_| bad("tol"))?,
            "max_evals" => self.max_evals = value.parse().map_err(|_| bad("max_evals"))?,
            "fit_tol" => self.fit_tol = value.parse().map_err(|_| bad("fit_tol"))?,
            "timings" => self.timings = value.parse().map_err(|_| bad("timings"))?,
            other => return Err(format!("{origin}: unknown setting '{other}'")),
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), String> {
        if self.parallelism == 0 {
            return Err("parallelism must be >= 1".into());
        }
        for (name, v) in [("tol", self.tol), ("fit_tol", self.fit_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if self.max_evals == 0 {
            return Err("max_evals must be >= 1".into());
        }
        Ok(())
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str, settings: &mut Settings, origin: &str) -> Result<(), String> {
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("{origin}:{}: expected key = value", i + 1))?;
        settings.set(k.trim(), v.trim(), &format!("{origin}:{}", i + 1))?;
    }
    Ok(())
}

fn resolve(common: &CommonArgs, env: &dyn Fn(&str) -> Option<String>) -> Result<Settings, String> {
    let mut s = Settings::default();
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        parse_config(&text, &mut s, &path.display().to_string())?;
    }
    if let Some(v) = env(ENV_TOL) {
        s.set("tol", &v, ENV_TOL)?;
    }
    if let Some(v) = env(ENV_PARALLELISM) {
        s.set("parallelism", &v, ENV_PARALLELISM)?;
    }
    if let Some(v) = common.format {
        s.format = v;
    }
    if let Some(v) = common.parallelism {
        s.parallelism = v;
    }
    if let Some(v) = common.tol {
        s.tol = v;
    }
    if let Some(v) = common.max_evals {
        s.max_evals = v;
    }
    if let Some(v) = common.fit_tol {
        s.fit_tol = v;
    }
    s.timings |= common.timings;
    s.validate()?;
    Ok(s)
}

/// What a run printed and how it ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Outcome {
    fn usage(msg: impl std::fmt::Display) -> Self {
        Outcome {
            code: 2,
            stdout: String::new(),
            stderr: format!("error: {msg}\n"),
        }
    }
}

/// Failure before a report exists.
enum Failure {
    Usage(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain { .. } | Error::IllConditioned(_) => Failure::Usage(e.to_string()),
            _ => Failure::Run(e.to_string()),
        }
    }
}

/// Runs the command line `args` (including the program name), reading
/// environment overrides through `env`.
pub fn execute<I, T>(args: I, env: &dyn Fn(&str) -> Option<String>) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let (stdout, stderr) = if code == 0 {
                (text, String::new())
            } else {
                (String::new(), text)
            };
            return Outcome {
                code,
                stdout,
                stderr,
            };
        }
    };
    let settings = match resolve(&cli.common, env) {
        Ok(s) => s,
        Err(msg) => return Outcome::usage(msg),
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(settings.parallelism)
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            return Outcome {
                code: 1,
                stdout: String::new(),
                stderr: format!("error: cannot start worker pool: {e}\n"),
            }
        }
    };
    let result = pool.install(|| match &cli.command {
        Command::Identities { theorem, k } => cmd_identities(*theorem, *k, &settings),
        Command::Ahat { n, method } => cmd_ahat(n.unwrap_or(DEFAULT_N), method, &settings),
        Command::Product {
            n,
            phi,
            rho,
            ladder,
        } => {
            let heights = match (rho, ladder) {
                (Some(r), _) => vec![*r],
                (None, Some(l)) => l.clone(),
                (None, None) => default_ladder(),
            };
            cmd_product(*n, phi, &heights, &settings)
        }
    });
    match result {
        Ok(report) => Outcome {
            code: if report.passed { 0 } else { 1 },
            stdout: report.render(settings.format),
            stderr: String::new(),
        },
        Err(Failure::Usage(msg)) => Outcome::usage(msg),
        Err(Failure::Run(msg)) => Outcome {
            code: 1,
            stdout: String::new(),
            stderr: format!("error: {msg}\n"),
        },
    }
}

fn exact_field(v: &ExactValue) -> Field {
    match v {
        ExactValue::Rational(r) => Field::Rational(r.clone()),
        ExactValue::Pi(p) => Field::Pi(p.clone()),
    }
}

fn cmd_identities(
    theorem: Theorem,
    k: Option<(i64, i64)>,
    s: &Settings,
) -> Result<Report, Failure> {
    let (k_min, k_max) = k.unwrap_or(match theorem {
        Theorem::Thm2 => DEFAULT_THM2_K,
        Theorem::Thm3 => DEFAULT_THM3_K,
        Theorem::CoeffOdd => (1, 50),
        Theorem::CoeffEven => (0, 50),
    });
    let reports = verify_range(theorem, k_min, k_max)?;
    let failures = reports.iter().filter(|r| !r.verified).count() as u64;
    let rows = reports
        .iter()
        .map(|r| {
            vec![
                theorem.name().into(),
                r.k.into(),
                exact_field(&r.lhs),
                exact_field(&r.rhs),
                r.verified.into(),
                r.term_count.into(),
                s.timings.then_some(r.elapsed.as_secs_f64() * 1e3).into(),
            ]
        })
        .collect();
    Ok(Report {
        command: "identities",
        columns: IDENTITY_COLUMNS,
        rows,
        summary: vec![
            ("theorem", theorem.name().into()),
            ("k_min", k_min.into()),
            ("k_max", k_max.into()),
            ("failures", failures.into()),
        ],
        passed: failures == 0,
    })
}

fn cmd_ahat(n: (i64, i64), method: &str, s: &Settings) -> Result<Report, Failure> {
    let fixed = match method {
        "auto" => None,
        other => Some(other.parse::<Method>().map_err(Failure::Usage)?),
    };
    let jobs: Vec<(i64, Method)> = (n.0..=n.1)
        .map(|n| {
            let m = fixed.unwrap_or(if n <= 2 {
                Method::Direct
            } else {
                Method::Formula
            });
            if m.accepts(n) {
                Ok((n, m))
            } else {
                Err(Failure::Usage(format!(
                    "method {m} does not accept n = {n}"
                )))
            }
        })
        .collect::<Result<_, _>>()?;
    let cfg = s.quad();
    let evals = jobs
        .par_iter()
        .map(|&(n, m)| a_hat(n, m, cfg))
        .collect::<crate::Result<Vec<_>>>()?;

    let mut passed = true;
    let mut max_dev = 0.0f64;
    let rows = evals
        .iter()
        .map(|e| {
            let value = e.value_f64();
            let dev = (value - ONE_OVER_TWO_PI).abs();
            passed &= e.converged && dev <= 10.0 * s.tol;
            max_dev = max_dev.max(dev);
            let exact = match &e.value {
                AHatValue::Exact(p) => Field::Pi(p.clone()),
                AHatValue::Numeric(_) => Field::Null,
            };
            vec![
                e.n.into(),
                e.method.name().into(),
                value.into(),
                exact,
                ONE_OVER_TWO_PI.into(),
                dev.into(),
                e.abs_error_estimate.into(),
                e.evaluations.into(),
                e.converged.into(),
            ]
        })
        .collect();
    Ok(Report {
        command: "ahat",
        columns: AHAT_COLUMNS,
        rows,
        summary: vec![
            ("tol", s.tol.into()),
            ("expected", ONE_OVER_TWO_PI.into()),
            ("max_abs_dev", max_dev.into()),
        ],
        passed,
    })
}

/// Absolute tolerance on the fitted `c_-1`: `fit_tol` relative to the scale
/// `max(|phi(0)|, sup|phi|) / (2 pi)`, so test functions vanishing at the
/// origin are judged on the size of the function rather than of `phi(0)`.
fn fit_scale(phi: &TestFunction) -> f64 {
    phi.value_at_origin().abs().max(phi.sup_abs()) * ONE_OVER_TWO_PI
}

fn cmd_product(
    n: i64,
    phi: &TestFunction,
    heights: &[f64],
    s: &Settings,
) -> Result<Report, Failure> {
    if heights.len() > 1 {
        validate_ladder(heights)?;
    } else if !heights.iter().all(|r| *r > 0.0 && r.is_finite()) {
        return Err(Failure::Usage(format!(
            "rho must be positive, got {heights:?}"
        )));
    }
    let cfg = s.quad();
    let one = TestFunction::Constant { level: 1.0 };
    let points = heights
        .par_iter()
        .map(|&rho| {
            Ok((
                product_action(n, rho, phi, cfg)?,
                product_action(n, rho, &one, cfg)?,
            ))
        })
        .collect::<crate::Result<Vec<_>>>()?;

    let phi0 = phi.value_at_origin();
    let target = phi0 * ONE_OVER_TWO_PI;
    let all_converged = points
        .iter()
        .all(|(p, o)| p.quad.converged && o.quad.converged);
    let fit = if points.len() >= 2 && all_converged {
        let samples: Vec<(f64, f64)> = points.iter().map(|(p, _)| (p.rho, p.action)).collect();
        Some(fit_laurent_samples(&samples)?)
    } else {
        None
    };
    let c_minus1 = fit.as_ref().map(|(c, _, _)| c[0]);
    let fit_ok = c_minus1.is_none_or(|c| (c - target).abs() <= s.fit_tol * fit_scale(phi));

    let rows = points
        .iter()
        .map(|(p, o)| {
            let gap = (p.normalized - phi0 * o.normalized).abs();
            vec![
                n.into(),
                p.rho.into(),
                phi.to_string().into(),
                p.action.into(),
                p.normalized.into(),
                p.quad.abs_error_estimate.into(),
                (p.quad.converged && o.quad.converged).into(),
                c_minus1.into(),
                gap.into(),
            ]
        })
        .collect();
    Ok(Report {
        command: "product",
        columns: PRODUCT_COLUMNS,
        rows,
        summary: vec![
            ("phi0", phi0.into()),
            ("target_c_minus1", target.into()),
            ("c_minus1_fit", c_minus1.into()),
            ("c0_fit", fit.as_ref().map(|(c, _, _)| c[1]).into()),
            ("condition", fit.as_ref().map(|f| f.1).into()),
            ("residual_rms", fit.as_ref().map(|f| f.2).into()),
            ("fit_tol", s.fit_tol.into()),
        ],
        passed: all_converged && fit_ok,
    })
}

/// Runs `execute` against the process environment.
pub fn main_with_env<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    execute(args, &|k| std::env::var(k).ok())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> Outcome {
        let mut full = vec!["harmprod"];
        full.extend_from_slice(args);
        execute(full, &|_| None)
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("1..100"), Ok((1, 100)));
        assert_eq!(parse_range("2..=4"), Ok((2, 4)));
        assert_eq!(parse_range("7"), Ok((7, 7)));
        assert!(parse_range("5..1").is_err());
        assert!(parse_range("a..3").is_err());
    }

    #[test]
    fn identities_odd_hundred_rows() {
        let out = run(&[
            "identities",
            "--theorem",
            "2",
            "--k",
            "1..100",
            "--format",
            "json",
        ]);
        assert_eq!(out.code, 0, "{}", out.stderr);
        let v: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
        assert_eq!(v["rows"].as_array().unwrap().len(), 100);
        assert_eq!(v["rows"][0]["lhs"], "0/1");
        assert_eq!(v["rows"][1]["lhs"], "-1/8");
        assert!(v["rows"][0]["ms"].is_null());
    }

    #[test]
    fn identities_usage_errors() {
        assert_eq!(
            run(&["identities", "--theorem", "2", "--k", "0..5"]).code,
            2
        );
        assert_eq!(run(&["identities", "--theorem", "9"]).code, 2);
        assert_eq!(run(&["identities"]).code, 2);
        assert_eq!(run(&["bogus"]).code, 2);
        assert_eq!(run(&["identities", "--theorem", "2", "-j", "0"]).code, 2);
    }

    #[test]
    fn ahat_examples() {
        assert_eq!(
            run(&["ahat", "--n", "3..5", "--method", "formula", "--tol", "1e-8"]).code,
            0
        );
        assert_eq!(run(&["ahat", "--n", "1..2", "--method", "direct"]).code, 0);
        assert_eq!(run(&["ahat", "--n", "2", "--method", "formula"]).code, 2);
        assert_eq!(run(&["ahat", "--n", "1", "--method", "closed"]).code, 2);
        assert_eq!(run(&["ahat", "--method", "nope"]).code, 2);
        assert_eq!(run(&["ahat", "--n", "2..4", "--tol", "-1"]).code, 2);
    }

    #[test]
    fn ahat_budget_exhaustion_fails() {
        let out = run(&[
            "ahat",
            "--n",
            "5",
            "--method",
            "formula",
            "--max-evals",
            "50",
        ]);
        assert_eq!(out.code, 1);
        assert!(out.stdout.contains("\"converged\": false"));
    }

    #[test]
    fn product_examples() {
        let single = run(&["product", "--n", "2", "--phi", "const:1", "--rho", "1e-2"]);
        assert_eq!(single.code, 0, "{}", single.stderr);
        let v: serde_json::Value = serde_json::from_str(&single.stdout).unwrap();
        assert!((v["rows"][0]["normalized"].as_f64().unwrap() - 1.0).abs() < 1e-6);
        assert!(v["rows"][0]["c_minus1_fit"].is_null());

        let bump = run(&["product", "--n", "4", "--phi", "bump:1", "--rho", "1e-2"]);
        assert_eq!(bump.code, 0, "{}", bump.stderr);
        let v: serde_json::Value = serde_json::from_str(&bump.stdout).unwrap();
        assert!(v["rows"][0]["gap"].as_f64().unwrap() < 0.05);

        assert_eq!(run(&["product", "--ladder", "0.1,0.2"]).code, 2);
        assert_eq!(run(&["product", "--rho", "0"]).code, 2);
        assert_eq!(run(&["product", "--phi", "weird:1"]).code, 2);
        assert_eq!(
            run(&["product", "--rho", "0.1", "--ladder", "0.1,0.05"]).code,
            2
        );
    }

    #[test]
    fn product_fit_passes_for_gaussian() {
        let out = run(&[
            "product",
            "--n",
            "3",
            "--phi",
            "gaussian:1.0",
            "--ladder",
            "1e-1,5e-2,2.5e-2,1.25e-2",
        ]);
        assert_eq!(out.code, 0, "{}", out.stdout);
        let v: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
        let c = v["summary"]["c_minus1_fit"].as_f64().unwrap();
        assert!((c - ONE_OVER_TWO_PI).abs() < 1e-3 * ONE_OVER_TWO_PI);
    }

    #[test]
    fn settings_precedence() {
        let mut s = Settings::default();
        parse_config(
            "# comment\ntol = 1e-6\nparallelism=3\nformat = csv\n",
            &mut s,
            "cfg",
        )
        .unwrap();
        assert_eq!((s.tol, s.parallelism, s.format), (1e-6, 3, Format::Csv));
        assert!(parse_config("colour = red", &mut s, "cfg").is_err());
        assert!(parse_config("tol", &mut s, "cfg").is_err());

        let common = CommonArgs {
            format: None,
            parallelism: Some(2),
            tol: None,
            max_evals: None,
            fit_tol: None,
            config: None,
            timings: false,
        };
        let env = |k: &str| match k {
            ENV_TOL => Some("1e-5".to_string()),
            ENV_PARALLELISM => Some("7".to_string()),
            _ => None,
        };
        let s = resolve(&common, &env).unwrap();
        assert_eq!(s.tol, 1e-5);
        assert_eq!(s.parallelism, 2);
        assert!(resolve(&common, &|_| Some("x".into())).is_err());
    }

    #[test]
    fn help_exits_zero() {
        let out = run(&["--help"]);
        assert_eq!(out.code, 0);
        assert!(out.stdout.contains("identities"));
    }
}
