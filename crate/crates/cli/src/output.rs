//! Output plumbing: unit conversion on the emitted JSON tree and CSV
//! rendering for trace-style results.

use serde_json::Value;
use std::f64::consts::LN_2;

/// Rename every `*_nats` key to `*_bits` and divide its numeric payload by
/// ln 2, recursively. Non-numeric `*_nats` values are left alone.
pub fn to_bits(v: Value) -> Value {
    match v {
        Value::Object(map) => {
            let mut out = serde_json::Map::with_capacity(map.len());
            for (k, val) in map {
                if let Some(stem) = k.strip_suffix("_nats") {
                    let converted = convert_number(val);
                    out.insert(format!("{stem}_bits"), converted);
                } else {
                    out.insert(k, to_bits(val));
                }
            }
            Value::Object(out)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(to_bits).collect()),
        other => other,
    }
}

fn convert_number(v: Value) -> Value {
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(x) => serde_json::json!(x / LN_2),
            None => Value::Number(n),
        },
        Value::Array(items) => Value::Array(items.into_iter().map(convert_number).collect()),
        other => to_bits(other),
    }
}

/// Render rows as CSV with a fixed header. Floats use shortest-roundtrip
/// formatting, so output is bit-stable for identical inputs.
pub fn csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut s = String::new();
    s.push_str(&header.join(","));
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn bits_conversion_renames_and_scales() {
        let v = json!({
            "objective_nats": LN_2,
            "nested": [{"margin_nats": 2.0 * LN_2, "other": 3}],
            "plain": "x"
        });
        let b = to_bits(v);
        assert_eq!(b["objective_bits"], json!(1.0));
        assert_eq!(b["nested"][0]["margin_bits"], json!(2.0));
        assert_eq!(b["nested"][0]["other"], json!(3));
        assert_eq!(b["plain"], json!("x"));
    }

    #[test]
    fn csv_rows() {
        let s = csv(&["a", "b"], &[vec![1.0, 2.5], vec![0.25, -1.0]]);
        assert_eq!(s, "a,b\n1,2.5\n0.25,-1\n");
    }
}
