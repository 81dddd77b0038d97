//! Byte-stable JSON rendering for reports and event traces.
//!
//! Two runs of the same scenario with the same seed must produce identical
//! output files, so all floats are printed with six significant digits and
//! object keys are emitted in sorted order. `serde_json::Value` already
//! keeps object keys sorted (its map is a `BTreeMap`); this module only
//! controls number formatting and layout.

use serde_json::Value;

/// Format a float with six significant digits.
///
/// Fixed-point notation is used for decimal exponents in `[-4, 14]`,
/// scientific notation otherwise. NaN and infinities render as null per
/// JSON rules, but reports never contain them.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0.0".to_string();
    }
    if !x.is_finite() {
        return "null".to_string();
    }
    // Let std do the correctly-rounded 6-digit conversion, then move the
    // decimal point by string surgery so no second float pass is needed.
    let sci = format!("{:.5e}", x);
    let (mantissa, exp_str) = sci.split_once('e').expect("std LowerExp format");
    let exp: i32 = exp_str.parse().expect("std LowerExp exponent");
    if !(-4..=14).contains(&exp) {
        return sci;
    }
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => ("-", rest),
        None => ("", mantissa),
    };
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    debug_assert_eq!(digits.len(), 6);
    let point = exp + 1; // digits before the decimal point
    let body = if point <= 0 {
        format!("0.{}{}", "0".repeat(-point as usize), digits)
    } else if (point as usize) < digits.len() {
        format!("{}.{}", &digits[..point as usize], &digits[point as usize..])
    } else {
        format!("{}{}.0", digits, "0".repeat(point as usize - digits.len()))
    };
    format!("{sign}{body}")
}

fn escape_json(s: &str, out: &mut String) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
}

fn write_value(v: &Value, indent: usize, pretty: bool, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                out.push_str(&fmt_sig(n.as_f64().unwrap_or(f64::NAN)));
            }
        }
        Value::String(s) => escape_json(s, out),
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
                if pretty {
                    out.push('\n');
                    out.push_str(&"  ".repeat(indent + 1));
                }
                write_value(item, indent + 1, pretty, out);
            }
            if pretty {
                out.push('\n');
                out.push_str(&"  ".repeat(indent));
            }
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push('{');
            for (i, (k, item)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                if pretty {
                    out.push('\n');
                    out.push_str(&"  ".repeat(indent + 1));
                }
                escape_json(k, out);
                out.push(':');
                if pretty {
                    out.push(' ');
                }
                write_value(item, indent + 1, pretty, out);
            }
            if pretty {
                out.push('\n');
                out.push_str(&"  ".repeat(indent));
            }
            out.push('}');
        }
    }
}

/// Render a value as a single line. Used for trace records.
pub fn to_stable_line(v: &Value) -> String {
    let mut out = String::new();
    write_value(v, 0, false, &mut out);
    out
}

/// Render a value as an indented document ending in a newline.
pub fn to_stable_document(v: &Value) -> String {
    let mut out = String::new();
    write_value(v, 0, true, &mut out);
    out.push('\n');
    out
}
