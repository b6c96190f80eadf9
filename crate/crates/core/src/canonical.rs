//! Canonical JSON: sorted object keys, no insignificant whitespace, numbers in
//! their shortest round-trip decimal form.
//!
//! Every hash in the event chain is taken over these bytes, so the writer never
//! depends on struct field order or on how `serde_json` was compiled.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::Value;

/// Significant decimal digits kept for stored fractions.
pub const FRACTION_DIGITS: usize = 12;

/// Serializes any value to canonical JSON text.
pub fn to_string<T: Serialize + ?Sized>(value: &T) -> Result<String, serde_json::Error> {
    let value = serde_json::to_value(value)?;
    Ok(value_to_string(&value))
}

/// Writes an already-built JSON tree canonically.
pub fn value_to_string(value: &Value) -> String {
    let mut out = String::new();
    write_value(value, &mut out);
    out
}

/// Appends the canonical form of `value` to `out`.
pub fn write_value(value: &Value, out: &mut String) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        // Negative zero is written as zero so equal values hash equally.
        Value::Number(n) if n.as_f64() == Some(0.0) && n.is_f64() => out.push_str("0.0"),
        Value::Number(n) => {
            let _ = write!(out, "{n}");
        }
        Value::String(s) => write_str(s, out),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(item, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_str(key, out);
                out.push(':');
                write_value(&map[key], out);
            }
            out.push('}');
        }
    }
}

/// Appends `s` as a JSON string literal, escaping exactly what `serde_json`
/// escapes: quote, backslash and control characters.
pub fn write_str(s: &str, out: &mut String) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            '\u{08}' => out.push_str("\\b"),
            '\u{0c}' => out.push_str("\\f"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

/// Rounds a fraction to [`FRACTION_DIGITS`] significant digits so that its
/// shortest decimal form never exceeds that many digits.
pub fn quantize(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", FRACTION_DIGITS - 1, x)
        .parse()
        .expect("formatted float parses")
}
