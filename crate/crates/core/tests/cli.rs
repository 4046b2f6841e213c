//! End-to-end tests of the `harmprod` binary: report schemas against golden
//! files, JSON round trips, exit codes and determinism across thread counts.

use std::path::PathBuf;
use std::process::{Command, Output};

use harmprod::cli::canonical_json;
use serde_json::Value;

fn harmprod(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_harmprod"))
        .args(args)
        .env_remove("HARMPROD_TOL")
        .env_remove("HARMPROD_PARALLELISM")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 output")
}

/// Compares against `tests/golden/<name>`; `HARMPROD_BLESS=1` rewrites it.
fn golden(name: &str, actual: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    if std::env::var_os("HARMPROD_BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("missing golden file {}: {e}", path.display()));
    assert_eq!(actual, expected, "output differs from {}", path.display());
}

#[test]
fn identities_golden() {
    for (format, file) in [
        ("json", "identities.json"),
        ("csv", "identities.csv"),
        ("text", "identities.txt"),
    ] {
        let out = harmprod(&[
            "identities",
            "--theorem",
            "2",
            "--k",
            "1..5",
            "--format",
            format,
            "-j",
            "2",
        ]);
        assert_eq!(out.status.code(), Some(0));
        golden(file, &stdout(&out));
    }
}

#[test]
fn coefficient_golden() {
    let out = harmprod(&[
        "identities",
        "--theorem",
        "even",
        "--k",
        "0..3",
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    golden("coeff_even.json", &stdout(&out));
}

#[test]
fn ahat_closed_golden() {
    for (format, file) in [("json", "ahat_closed.json"), ("csv", "ahat_closed.csv")] {
        let out = harmprod(&[
            "ahat", "--n", "2..5", "--method", "closed", "--format", format,
        ]);
        assert_eq!(out.status.code(), Some(0));
        golden(file, &stdout(&out));
    }
}

/// Product values depend on floating-point summation, so only the schema is
/// pinned: the CSV header and the JSON key sets.
#[test]
fn product_schema_golden() {
    let csv = harmprod(&[
        "product",
        "--n",
        "2",
        "--phi",
        "const:1",
        "--ladder",
        "0.1,0.05,0.025",
        "--format",
        "csv",
    ]);
    assert_eq!(csv.status.code(), Some(0));
    let header = stdout(&csv).lines().next().unwrap().to_owned();

    let json = harmprod(&[
        "product",
        "--n",
        "2",
        "--phi",
        "const:1",
        "--ladder",
        "0.1,0.05,0.025",
    ]);
    let v: Value = serde_json::from_str(&stdout(&json)).unwrap();
    let keys = |v: &Value| {
        v.as_object()
            .unwrap()
            .keys()
            .cloned()
            .collect::<Vec<_>>()
            .join(",")
    };
    let schema = format!(
        "csv: {header}\ntop: {}\nrow: {}\nsummary: {}\n",
        keys(&v),
        keys(&v["rows"][0]),
        keys(&v["summary"])
    );
    golden("product_schema.txt", &schema);
}

#[test]
fn json_round_trips_byte_for_byte() {
    let cases: &[&[&str]] = &[
        &["identities", "--theorem", "3", "--k", "1..4"],
        &["identities", "--theorem", "odd", "--k", "1..6"],
        &["ahat", "--n", "1..6"],
        &[
            "ahat",
            "--n",
            "3..5",
            "--method",
            "recursion",
            "--tol",
            "1e-7",
        ],
        &[
            "product",
            "--n",
            "3",
            "--phi",
            "bump:1",
            "--ladder",
            "0.1,0.05,0.025,0.0125",
        ],
        &[
            "product",
            "--n",
            "3",
            "--phi",
            "shifted:0.2,0.3,0:1",
            "--rho",
            "0.05",
            "--tol",
            "1e-6",
        ],
    ];
    for args in cases {
        let text = stdout(&harmprod(args));
        let parsed: Value = serde_json::from_str(&text).unwrap_or_else(|e| panic!("{args:?}: {e}"));
        assert_eq!(canonical_json(&parsed), text, "{args:?}");
    }
}

#[test]
fn exit_codes() {
    let code = |args: &[&str]| harmprod(args).status.code();
    assert_eq!(
        code(&[
            "identities",
            "--theorem",
            "2",
            "--k",
            "1..100",
            "--format",
            "json"
        ]),
        Some(0)
    );
    assert_eq!(
        code(&["identities", "--theorem", "3", "--k", "1..10"]),
        Some(0)
    );
    assert_eq!(
        code(&["identities", "--theorem", "2", "--k", "0..5"]),
        Some(2)
    );
    assert_eq!(
        code(&["ahat", "--n", "3..8", "--method", "formula", "--tol", "1e-8"]),
        Some(0)
    );
    assert_eq!(
        code(&["ahat", "--n", "1..2", "--method", "direct"]),
        Some(0)
    );
    assert_eq!(code(&["ahat", "--n", "2", "--method", "formula"]), Some(2));
    assert_eq!(
        code(&[
            "ahat",
            "--n",
            "6",
            "--method",
            "formula",
            "--max-evals",
            "30"
        ]),
        Some(1)
    );
    assert_eq!(code(&["product", "--n", "0"]), Some(2));
    assert_eq!(
        code(&[
            "product",
            "--n",
            "4",
            "--phi",
            "shifted:0,1,0,0:1",
            "--rho",
            "0.1"
        ]),
        Some(2)
    );
    assert_eq!(code(&["--format", "yaml", "ahat"]), Some(2));
    assert_eq!(
        code(&["ahat", "--config", "/nonexistent/harmprod.conf"]),
        Some(2)
    );
    assert_eq!(code(&["--version"]), Some(0));
}

#[test]
fn product_examples() {
    let out = harmprod(&[
        "product",
        "--n",
        "3",
        "--phi",
        "gaussian:1.0",
        "--ladder",
        "1e-1,5e-2,2.5e-2,1.25e-2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    let c = v["summary"]["c_minus1_fit"].as_f64().unwrap();
    assert!((c - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-3 / (2.0 * std::f64::consts::PI));

    let out = harmprod(&["product", "--n", "2", "--phi", "const:1", "--rho", "1e-2"]);
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!((v["rows"][0]["normalized"].as_f64().unwrap() - 1.0).abs() < 1e-6);

    let out = harmprod(&[
        "product", "--n", "4", "--phi", "bump:1", "--rho", "1e-2", "--format", "csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let gap: f64 = row.last().unwrap().parse().unwrap();
    assert!(gap < 0.05, "{gap}");
}

#[test]
fn env_and_config_overrides() {
    let dir = std::env::temp_dir().join(format!("harmprod-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.conf");
    std::fs::write(&cfg, "# settings\nformat = csv\ntol = 1e-6\n").unwrap();
    let cfg = cfg.to_str().unwrap();

    let out = harmprod(&["ahat", "--n", "3", "--config", cfg]);
    assert!(stdout(&out).starts_with("n,method,"));

    let out = Command::new(env!("CARGO_BIN_EXE_harmprod"))
        .args([
            "ahat", "--n", "3", "--method", "formula", "--format", "json",
        ])
        .env("HARMPROD_TOL", "1e-4")
        .output()
        .unwrap();
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["summary"]["tol"].as_f64(), Some(1e-4));

    let out = Command::new(env!("CARGO_BIN_EXE_harmprod"))
        .args(["ahat", "--n", "3"])
        .env("HARMPROD_PARALLELISM", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn reports_do_not_depend_on_thread_count() {
    let cases: &[&[&str]] = &[
        &[
            "identities",
            "--theorem",
            "3",
            "--k",
            "1..8",
            "--format",
            "csv",
        ],
        &["ahat", "--n", "1..8", "--format", "text"],
        &[
            "product",
            "--n",
            "2",
            "--phi",
            "gaussian:1",
            "--ladder",
            "0.1,0.05,0.025,0.0125",
        ],
    ];
    for args in cases {
        let mut one = args.to_vec();
        one.extend(["-j", "1"]);
        let mut eight = args.to_vec();
        eight.extend(["-j", "8"]);
        assert_eq!(harmprod(&one).stdout, harmprod(&eight).stdout, "{args:?}");
    }
}
