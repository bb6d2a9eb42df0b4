//! Tabular output with embedded configuration, written as CSV or JSON.

use std::fmt::Write as _;

use serde_json::{json, Map, Value};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    /// Pairs that reproduce the run when fed back as a config file.
    pub config: Vec<(String, String)>,
    /// Descriptive metadata and diagnostics.
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// 17 significant digits, exponent form.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

impl Dataset {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), ..Self::default() }
    }

    pub fn push_meta(&mut self, key: &str, value: impl ToString) {
        self.meta.push((key.to_string(), value.to_string()));
    }

    pub fn push_row(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.config {
            let _ = writeln!(s, "#config: {k}={v}");
        }
        for (k, v) in &self.meta {
            let _ = writeln!(s, "#meta: {k}={v}");
        }
        let _ = writeln!(s, "{}", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|x| format_float(*x)).collect();
            let _ = writeln!(s, "{}", cells.join(","));
        }
        s
    }

    /// `{meta: {config: {...}, ...}, columns: [...], rows: [[...]]}`; non-finite
    /// values become `null`.
    pub fn to_json(&self) -> String {
        let mut meta = Map::new();
        let config: Map<String, Value> = self.config.iter().map(|(k, v)| (k.clone(), Value::String(v.clone()))).collect();
        meta.insert("config".into(), Value::Object(config));
        for (k, v) in &self.meta {
            meta.insert(k.clone(), Value::String(v.clone()));
        }
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Array(r.iter().map(|x| if x.is_finite() { json!(x) } else { Value::Null }).collect()))
            .collect();
        let doc = json!({ "meta": meta, "columns": self.columns, "rows": rows });
        let mut out = serde_json::to_string_pretty(&doc).expect("dataset serializes");
        out.push('\n');
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut d = Dataset::new(&["a", "b"]);
        d.config.push(("eta".into(), "1.0".into()));
        d.push_meta("note", "x");
        d.push_row(vec![1.0, f64::NAN]);
        let csv = d.to_csv();
        assert_eq!(csv, "#config: eta=1.0\n#meta: note=x\na,b\n1.0000000000000000e0,NaN\n");
        assert_eq!(format_float(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn json_layout() {
        let mut d = Dataset::new(&["a"]);
        d.config.push(("nodes".into(), "3".into()));
        d.push_row(vec![2.5]);
        d.push_row(vec![f64::INFINITY]);
        let v: Value = serde_json::from_str(&d.to_json()).unwrap();
        assert_eq!(v["meta"]["config"]["nodes"], "3");
        assert_eq!(v["rows"][0][0], 2.5);
        assert!(v["rows"][1][0].is_null());
        assert_eq!(d.column("a").unwrap()[0], 2.5);
    }
}
