//! Canonical JSON emission.
//!
//! Keys are sorted (the tree uses a `BTreeMap`), floats are written with a
//! fixed six-decimal precision, and pretty output keeps arrays of scalars on a
//! single line. Equal trees always produce identical bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub enum Canon {
    Null,
    Bool(bool),
    Int(i64),
    /// Written as `{:.6}`. Non-finite values are written as `null`.
    Fixed(f64),
    Str(String),
    Array(Vec<Canon>),
    Object(BTreeMap<String, Canon>),
}

impl Canon {
    pub fn object<I, K>(entries: I) -> Canon
    where
        I: IntoIterator<Item = (K, Canon)>,
        K: Into<String>,
    {
        Canon::Object(entries.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    pub fn str(s: impl Into<String>) -> Canon {
        Canon::Str(s.into())
    }

    pub fn opt_fixed(v: Option<f64>) -> Canon {
        v.map_or(Canon::Null, Canon::Fixed)
    }

    /// Single-line rendering, used for JSON-lines output.
    pub fn to_compact(&self) -> String {
        let mut out = String::new();
        self.write_compact(&mut out);
        out
    }

    /// Two-space indented rendering with a trailing newline.
    pub fn to_pretty(&self) -> String {
        let mut out = String::new();
        self.write_pretty(&mut out, 0);
        out.push('\n');
        out
    }

    fn is_scalar(&self) -> bool {
        !matches!(self, Canon::Array(_) | Canon::Object(_))
    }

    fn write_scalar(&self, out: &mut String) {
        match self {
            Canon::Null => out.push_str("null"),
            Canon::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            Canon::Int(i) => {
                let _ = write!(out, "{i}");
            }
            Canon::Fixed(f) => out.push_str(&fixed6(*f)),
            Canon::Str(s) => out.push_str(&quote(s)),
            Canon::Array(_) | Canon::Object(_) => unreachable!("not a scalar"),
        }
    }

    fn write_compact(&self, out: &mut String) {
        match self {
            Canon::Array(items) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    item.write_compact(out);
                }
                out.push(']');
            }
            Canon::Object(map) => {
                out.push('{');
                for (i, (k, v)) in map.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push_str(&quote(k));
                    out.push(':');
                    v.write_compact(out);
                }
                out.push('}');
            }
            scalar => scalar.write_scalar(out),
        }
    }

    fn write_pretty(&self, out: &mut String, depth: usize) {
        match self {
            Canon::Array(items) if items.iter().all(Canon::is_scalar) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    item.write_scalar(out);
                }
                out.push(']');
            }
            Canon::Array(items) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    newline(out, depth + 1);
                    item.write_pretty(out, depth + 1);
                }
                newline(out, depth);
                out.push(']');
            }
            Canon::Object(map) if map.is_empty() => out.push_str("{}"),
            Canon::Object(map) => {
                out.push('{');
                for (i, (k, v)) in map.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    newline(out, depth + 1);
                    out.push_str(&quote(k));
                    out.push_str(": ");
                    v.write_pretty(out, depth + 1);
                }
                newline(out, depth);
                out.push('}');
            }
            scalar => scalar.write_scalar(out),
        }
    }
}

fn newline(out: &mut String, depth: usize) {
    out.push('\n');
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn quote(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization is infallible")
}

/// Formats a float with six decimals, folding negative zero into `0.000000`.
pub fn fixed6(v: f64) -> String {
    if !v.is_finite() {
        return "null".to_string();
    }
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

/// Rounds to the value that survives a six-decimal write/parse round trip.
pub fn quantize6(v: f64) -> f64 {
    fixed6(v).parse().unwrap_or(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_sorted_and_floats_fixed() {
        let c = Canon::object([
            ("b", Canon::Fixed(0.5)),
            ("a", Canon::Array(vec![Canon::Int(1), Canon::Int(2)])),
        ]);
        assert_eq!(c.to_compact(), r#"{"a":[1,2],"b":0.500000}"#);
        assert_eq!(c.to_pretty(), "{\n  \"a\": [1, 2],\n  \"b\": 0.500000\n}\n");
    }

    #[test]
    fn negative_zero_and_non_finite() {
        assert_eq!(fixed6(-0.0000001), "0.000000");
        assert_eq!(fixed6(f64::NAN), "null");
        assert_eq!(quantize6(0.1234567), 0.123457);
    }

    #[test]
    fn nested_arrays_break_lines() {
        let c = Canon::Array(vec![Canon::object([("x", Canon::Null)])]);
        assert_eq!(c.to_pretty(), "[\n  {\n    \"x\": null\n  }\n]\n");
    }
}
