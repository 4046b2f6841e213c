//! Report rows and their JSON / CSV / text renderings.
//!
//! JSON output is canonical: object keys sorted, two-space indentation,
//! integers as integers and every float as `{:.16e}` (17 significant digits),
//! so parsing a report and writing it back reproduces it byte for byte.

use std::fmt::Write as _;

use num_rational::BigRational;
use serde_json::{Map, Number, Value};

use crate::exactnum::PiScaled;

/// One cell of a report row.
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Null,
    Bool(bool),
    Int(i64),
    UInt(u64),
    Float(f64),
    Str(String),
    Rational(BigRational),
    Pi(PiScaled),
}

impl From<bool> for Field {
    fn from(v: bool) -> Self {
        Field::Bool(v)
    }
}

impl From<i64> for Field {
    fn from(v: i64) -> Self {
        Field::Int(v)
    }
}

impl From<u64> for Field {
    fn from(v: u64) -> Self {
        Field::UInt(v)
    }
}

impl From<f64> for Field {
    fn from(v: f64) -> Self {
        Field::Float(v)
    }
}

impl From<String> for Field {
    fn from(v: String) -> Self {
        Field::Str(v)
    }
}

impl From<&str> for Field {
    fn from(v: &str) -> Self {
        Field::Str(v.to_owned())
    }
}

impl<T: Into<Field>> From<Option<T>> for Field {
    fn from(v: Option<T>) -> Self {
        v.map_or(Field::Null, Into::into)
    }
}

/// `"num/den"`, denominator always written.
pub fn rational_string(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

pub fn float_string(v: f64) -> String {
    format!("{v:.16e}")
}

fn float_value(v: f64) -> Value {
    Number::from_f64(v).map_or(Value::Null, Value::Number)
}

impl Field {
    pub fn to_json(&self) -> Value {
        match self {
            Field::Null => Value::Null,
            Field::Bool(b) => Value::Bool(*b),
            Field::Int(i) => Value::from(*i),
            Field::UInt(u) => Value::from(*u),
            Field::Float(f) => float_value(*f),
            Field::Str(s) => Value::String(s.clone()),
            Field::Rational(r) => Value::String(rational_string(r)),
            Field::Pi(p) => {
                let mut m = Map::new();
                m.insert("q".into(), Value::String(rational_string(p.q())));
                m.insert("e".into(), Value::from(p.e()));
                m.insert("approx".into(), float_value(p.to_f64()));
                Value::Object(m)
            }
        }
    }

    fn to_csv(&self) -> String {
        match self {
            Field::Null => String::new(),
            Field::Bool(b) => b.to_string(),
            Field::Int(i) => i.to_string(),
            Field::UInt(u) => u.to_string(),
            Field::Float(f) => float_string(*f),
            Field::Str(s) => s.clone(),
            Field::Rational(r) => rational_string(r),
            Field::Pi(p) => p.to_string(),
        }
    }

    fn to_text(&self) -> String {
        match self {
            Field::Null => "-".into(),
            Field::Float(f) => format!("{f:.10e}"),
            Field::Rational(r) => r.to_string(),
            other => other.to_csv(),
        }
    }
}

/// Rows of one command plus a pass/fail verdict and summary fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: &'static str,
    pub columns: &'static [&'static str],
    pub rows: Vec<Vec<Field>>,
    pub summary: Vec<(&'static str, Field)>,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "text" => Ok(Format::Text),
            other => Err(format!(
                "unknown format '{other}' (expected json, csv or text)"
            )),
        }
    }
}

impl Report {
    pub fn to_json(&self) -> Value {
        let rows = self
            .rows
            .iter()
            .map(|row| {
                Value::Object(
                    self.columns
                        .iter()
                        .zip(row)
                        .map(|(k, v)| ((*k).to_owned(), v.to_json()))
                        .collect(),
                )
            })
            .collect();
        let summary = self
            .summary
            .iter()
            .map(|(k, v)| ((*k).to_owned(), v.to_json()))
            .collect();
        let mut m = Map::new();
        m.insert("command".into(), Value::from(self.command));
        m.insert("passed".into(), Value::Bool(self.passed));
        m.insert("rows".into(), Value::Array(rows));
        m.insert("summary".into(), Value::Object(summary));
        Value::Object(m)
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => canonical_json(&self.to_json()),
            Format::Csv => self.to_csv(),
            Format::Text => self.to_text(),
        }
    }

    fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        // Writing into a Vec cannot fail.
        w.write_record(self.columns).expect("in-memory csv");
        for row in &self.rows {
            w.write_record(row.iter().map(Field::to_csv))
                .expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("csv is utf-8")
    }

    fn to_text(&self) -> String {
        let cells: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(Field::to_text).collect())
            .collect();
        let widths: Vec<usize> = self
            .columns
            .iter()
            .enumerate()
            .map(|(i, c)| cells.iter().map(|r| r[i].len()).fold(c.len(), usize::max))
            .collect();
        let mut out = String::new();
        let line = |out: &mut String, items: &mut dyn Iterator<Item = &str>| {
            let parts: Vec<String> = items
                .zip(&widths)
                .map(|(s, w)| format!("{s:>w$}"))
                .collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(&mut out, &mut self.columns.iter().copied());
        for r in &cells {
            line(&mut out, &mut r.iter().map(String::as_str));
        }
        for (k, v) in &self.summary {
            let _ = writeln!(out, "{k}: {}", v.to_text());
        }
        let _ = writeln!(
            out,
            "{}: {}",
            self.command,
            if self.passed { "PASS" } else { "FAIL" }
        );
        out
    }
}

/// Canonical JSON text of `v`, newline-terminated.
pub fn canonical_json(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, v: &Value, depth: usize) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else {
                out.push_str(&float_string(n.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                newline(out, depth + 1);
                write_value(out, item, depth + 1);
            }
            newline(out, depth);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, k) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                newline(out, depth + 1);
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(": ");
                write_value(out, &map[k], depth + 1);
            }
            newline(out, depth);
            out.push('}');
        }
    }
}

fn newline(out: &mut String, depth: usize) {
    out.push('\n');
    for _ in 0..depth {
        out.push_str("  ");
    }
}
