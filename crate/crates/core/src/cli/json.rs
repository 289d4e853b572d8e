//! Deterministic JSON text: insertion-ordered keys, floats with 17
//! significant digits, scalar arrays on one line.

use std::fmt::Write;

use serde_json::Value;

pub fn float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "null".to_string()
    }
}

fn scalar(v: &Value, out: &mut String) {
    match v {
        Value::Number(n) => match (n.as_u64(), n.as_i64()) {
            (Some(u), _) => write!(out, "{u}").expect("writing to a string"),
            (None, Some(i)) => write!(out, "{i}").expect("writing to a string"),
            _ => out.push_str(&float(n.as_f64().unwrap_or(f64::NAN))),
        },
        other => out.push_str(&serde_json::to_string(other).expect("scalar serializes")),
    }
}

fn is_scalar(v: &Value) -> bool {
    !matches!(v, Value::Array(_) | Value::Object(_))
}

fn write_value(v: &Value, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent + 1);
    match v {
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) if items.iter().all(is_scalar) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                scalar(item, out);
            }
            out.push(']');
        }
        Value::Array(items) => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                out.push_str(&pad);
                write_value(item, indent + 1, out);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&"  ".repeat(indent));
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            out.push_str("{\n");
            for (i, (k, item)) in map.iter().enumerate() {
                out.push_str(&pad);
                out.push_str(&serde_json::to_string(k).expect("key serializes"));
                out.push_str(": ");
                write_value(item, indent + 1, out);
                out.push_str(if i + 1 < map.len() { ",\n" } else { "\n" });
            }
            out.push_str(&"  ".repeat(indent));
            out.push('}');
        }
        other => scalar(other, out),
    }
}

pub fn to_string(v: &Value) -> String {
    let mut out = String::new();
    write_value(v, 0, &mut out);
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_keep_seventeen_digits() {
        let s = to_string(&json!({"m": [0.5, 0.1], "t": 3, "ok": true, "rows": [[1.0], [2.0]]}));
        assert!(s.contains("\"m\": [5.0000000000000000e-1, 1.0000000000000001e-1]"));
        assert!(s.contains("\"t\": 3"));
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["m"][1].as_f64().unwrap(), 0.1);
        assert_eq!(float(f64::NAN), "null");
    }
}
