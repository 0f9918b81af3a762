//! JSON encodings shared by reports and file formats.

use std::str::FromStr;

use serde_json::{Number, Value};

use crate::exact::SparseMatrix;
use crate::rational::{format_fraction, format_rational, Q};

/// A float with 17 significant digits; non-finite values become `null`.
pub fn float(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    Value::Number(Number::from_str(&format!("{x:.16e}")).expect("formatted float is valid JSON"))
}

pub fn floats(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| float(x)).collect())
}

pub fn optional_float(x: Option<f64>) -> Value {
    x.map(float).unwrap_or(Value::Null)
}

/// A rational as a `"p/q"` string.
pub fn fraction(x: &Q) -> Value {
    Value::String(format_fraction(x))
}

/// A rational as an exact JSON number when it has a finite decimal expansion, else `"p/q"`.
pub fn rational_value(x: &Q) -> Value {
    let text = format_rational(x);
    if text.contains('/') {
        Value::String(text)
    } else {
        Value::Number(Number::from_str(&text).expect("decimal is valid JSON"))
    }
}

/// A dense row-major array of `"p/q"` strings.
pub fn matrix(m: &SparseMatrix) -> Value {
    Value::Array(m.to_dense().iter().map(|row| Value::Array(row.iter().map(fraction).collect())).collect())
}

/// Serializes with two-space indentation and a trailing newline.
pub fn to_pretty(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("values always serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    #[test]
    fn floats_keep_seventeen_digits() {
        assert_eq!(float(0.1).to_string(), "1.0000000000000001e-1");
        assert_eq!(float(1.0).to_string(), "1.0000000000000000e+0");
        assert_eq!(float(f64::NAN), Value::Null);
        let back: f64 = float(std::f64::consts::PI).as_f64().unwrap();
        assert_eq!(back, std::f64::consts::PI);
    }

    #[test]
    fn rationals() {
        assert_eq!(fraction(&q(1, 3)), Value::String("1/3".into()));
        assert_eq!(rational_value(&q(1, 4)).to_string(), "0.25");
        assert_eq!(rational_value(&q(2, 3)), Value::String("2/3".into()));
    }
}
