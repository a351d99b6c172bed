//! Deterministic JSON rendering of reports.

use serde::Serialize;
use serde_json::Value;

/// Significant digits kept for every float in a report.
pub const SIGNIFICANT_DIGITS: usize = 12;

fn round_value(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            let rounded: f64 = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x);
            serde_json::Number::from_f64(rounded).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_value).collect()),
        // serde_json's default map is a BTreeMap, so keys come out sorted
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, round_value(v))).collect()),
        other => other,
    }
}

/// Pretty JSON with sorted keys, floats rounded to [`SIGNIFICANT_DIGITS`],
/// non-finite values as `null`, and a trailing newline.
pub fn render<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let v = round_value(serde_json::to_value(value)?);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn floats_are_rounded_and_keys_sorted() {
        let mut m = HashMap::new();
        m.insert("zeta", vec![1.0 / 3.0, f64::NAN]);
        m.insert("alpha", vec![2.0e-17 + 1e-30, 1e300]);
        let s = render(&m).unwrap();
        assert!(s.find("alpha").unwrap() < s.find("zeta").unwrap());
        assert!(s.contains("0.333333333333"));
        assert!(!s.contains("0.3333333333333"));
        assert!(s.contains("null"));
        assert!(s.ends_with("}\n"));
    }

    #[test]
    fn integers_are_untouched() {
        assert_eq!(render(&vec![3_u64, 7]).unwrap(), "[\n  3,\n  7\n]\n");
    }
}
