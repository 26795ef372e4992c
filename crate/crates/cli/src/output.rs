//! CSV and flat JSON emission.

use serde_json::{Map, Value};

/// Six significant digits, plain decimal for `1e-4 <= |x| < 1e15` and scientific otherwise.
/// `raw` gives the shortest round-trip form.
pub fn num(x: f64, raw: bool) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if raw {
        return format!("{x:?}");
    }
    if x == 0.0 {
        return "0.00000".into();
    }
    if x.abs() < 1e-4 || x.abs() >= 1e15 {
        return format!("{x:.5e}");
    }
    let mag = x.abs().log10().floor() as i32;
    let rounded: f64 = format!("{:.5e}", x).parse().unwrap_or(x);
    // rounding can carry into the next decade, e.g. 9.999996 -> 10.0000
    let mag = mag.max(rounded.abs().log10().floor() as i32);
    let decimals = (5 - mag).max(0) as usize;
    let s = format!("{rounded:.decimals$}");
    if s.starts_with("-") && s.trim_start_matches(['-', '0', '.']).is_empty() {
        s[1..].to_string()
    } else {
        s
    }
}

pub struct Csv {
    out: String,
    raw: bool,
}

pub enum Cell {
    Num(f64),
    Int(usize),
    Text(String),
    Empty,
}

impl Csv {
    pub fn new(header: &[&str], raw: bool) -> Self {
        Csv { out: header.join(",") + "\n", raw }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        let line: Vec<String> = cells
            .iter()
            .map(|c| match c {
                Cell::Num(x) => num(*x, self.raw),
                Cell::Int(i) => i.to_string(),
                Cell::Text(t) => t.clone(),
                Cell::Empty => String::new(),
            })
            .collect();
        self.out.push_str(&line.join(","));
        self.out.push('\n');
    }

    pub fn finish(self) -> String {
        self.out
    }
}

/// Flattens nested objects into `prefix.key` entries, keeping field order.
pub fn flatten_into(prefix: &str, value: &Value, out: &mut Map<String, Value>) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                flatten_into(&format!("{prefix}.{k}"), v, out);
            }
        }
        Value::Array(items) => {
            let joined: Vec<String> = items.iter().map(|v| v.to_string()).collect();
            out.insert(prefix.to_string(), Value::String(joined.join(";")));
        }
        other => {
            out.insert(prefix.to_string(), other.clone());
        }
    }
}

pub fn json_number(x: f64, raw: bool) -> Value {
    if raw {
        serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
    } else {
        num(x, false).parse::<f64>().ok().and_then(serde_json::Number::from_f64).map_or(Value::Null, Value::Number)
    }
}
