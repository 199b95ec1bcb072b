//! CSV and JSON output for the benchmark reports.
//!
//! Every table carries a metadata block (seed, rule variants, point counts,
//! exclusions, tool version). CSV puts it in `# key=value` lines above the
//! header. Floats are rounded to 10 significant digits so that output does
//! not depend on summation order noise below that.

use std::io::Write;
use std::path::Path;

use serde_json::{json, Map, Number};

use crate::bench::{FilterBenchReport, IntegralBenchReport};
use crate::rule_check::ExactnessReport;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Str(String),
    Int(i64),
    Float(f64),
}

impl Value {
    pub fn float(x: f64) -> Self {
        Value::Float(round_sig(x))
    }

    fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Str(s) => json!(s),
            Value::Int(i) => json!(i),
            // non-finite values have no JSON number form
            Value::Float(x) => Number::from_f64(*x)
                .map(serde_json::Value::Number)
                .unwrap_or_else(|| json!(x.to_string())),
        }
    }

    fn from_json(v: &serde_json::Value) -> Result<Self, String> {
        match v {
            serde_json::Value::String(s) => Ok(Value::Str(s.clone())),
            serde_json::Value::Number(n) => {
                if let Some(i) = n.as_i64() {
                    Ok(Value::Int(i))
                } else {
                    n.as_f64().map(Value::Float).ok_or_else(|| format!("bad number {n}"))
                }
            }
            other => Err(format!("unsupported cell {other}")),
        }
    }

    fn to_csv(&self) -> String {
        match self {
            Value::Str(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Value::Str(s) => s.clone(),
            Value::Int(i) => i.to_string(),
            Value::Float(_) => self.to_json().to_string().trim_matches('"').to_string(),
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Str(s)
    }
}

impl From<usize> for Value {
    fn from(i: usize) -> Self {
        Value::Int(i as i64)
    }
}

impl From<u64> for Value {
    fn from(i: u64) -> Self {
        // seeds above i64::MAX keep their exact digits as strings
        i64::try_from(i).map(Value::Int).unwrap_or_else(|_| Value::Str(i.to_string()))
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::float(x)
    }
}

/// Rounds to 10 significant decimal digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.9e}").parse().unwrap_or(x)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub meta: Vec<(String, Value)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            meta: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: impl Into<String>, value: impl Into<Value>) -> &mut Self {
        self.meta.push((key.into(), value.into()));
        self
    }

    pub fn push_row(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn meta_value(&self, key: &str) -> Option<&Value> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            let v = match v {
                Value::Str(s) => s.replace('\n', " "),
                other => other.to_csv(),
            };
            out.push_str(&format!("# {k}={v}\n"));
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Value::to_csv).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let meta: Map<String, serde_json::Value> =
            self.meta.iter().map(|(k, v)| (k.clone(), v.to_json())).collect();
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|r| {
                let obj: Map<String, serde_json::Value> = self
                    .columns
                    .iter()
                    .zip(r)
                    .map(|(c, v)| (c.clone(), v.to_json()))
                    .collect();
                serde_json::Value::Object(obj)
            })
            .collect();
        let doc = json!({ "meta": meta, "columns": self.columns, "rows": rows });
        let mut s = serde_json::to_string_pretty(&doc).expect("table serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let doc: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let meta = doc["meta"]
            .as_object()
            .ok_or("missing meta object")?
            .iter()
            .map(|(k, v)| Value::from_json(v).map(|v| (k.clone(), v)))
            .collect::<Result<Vec<_>, _>>()?;
        let columns: Vec<String> = doc["columns"]
            .as_array()
            .ok_or("missing columns")?
            .iter()
            .map(|c| c.as_str().map(str::to_string).ok_or("column names must be strings"))
            .collect::<Result<_, _>>()?;
        let mut rows = Vec::new();
        for r in doc["rows"].as_array().ok_or("missing rows")? {
            let obj = r.as_object().ok_or("rows must be objects")?;
            let row = columns
                .iter()
                .map(|c| obj.get(c).ok_or(format!("row lacks `{c}`")).and_then(Value::from_json))
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Ok(Self { meta, columns, rows })
    }
}

pub fn integral_table(report: &IntegralBenchReport) -> Table {
    let mut t = Table::new(&["scheme", "re_max_pct", "re_mean_pct", "n_m", "points"]);
    t.meta("command", "integral-bench")
        .meta("tool_version", TOOL_VERSION)
        .meta("seed", report.seed)
        .meta("n", report.n)
        .meta("runs", report.runs)
        .meta("true_value", report.truth);
    for row in &report.rows {
        let k = row.scheme.kind();
        t.meta(format!("variant.{k}"), k.variant());
        t.meta(format!("symmetric_terms.{k}"), row.scheme.symmetric_terms_per_draw(report.n));
        if k == crate::rules::SchemeKind::Mc {
            t.meta("mc_samples", row.scheme.mc_samples());
        }
    }
    let mismatches = report.reference_mismatches();
    t.meta(
        "reference_mismatches",
        if mismatches.is_empty() { "none".to_string() } else { mismatches.join("; ") },
    );
    for row in &report.rows {
        t.push_row(vec![
            row.scheme.kind().label().into(),
            row.re_max_pct.into(),
            row.re_mean_pct.into(),
            row.scheme.n_m().into(),
            row.points.into(),
        ]);
    }
    t
}

pub fn filter_table(report: &FilterBenchReport) -> Table {
    let mut t = Table::new(&["scheme", "k", "rmse"]);
    t.meta("command", "filter-bench")
        .meta("tool_version", TOOL_VERSION)
        .meta("seed", report.seed)
        .meta("n", report.model.n)
        .meta(
            "q",
            report.model.q().map(|q| q.to_string()).unwrap_or_else(|| "linear".into()),
        )
        .meta("n_mc", report.n_mc)
        .meta("steps", report.steps)
        .meta("trajectory_resamples", report.trajectory_resamples);
    for s in &report.series {
        let k = s.scheme.kind();
        t.meta(format!("variant.{k}"), k.variant());
        t.meta(format!("n_m.{k}"), s.scheme.n_m());
        t.meta(format!("points.{k}"), s.scheme.evaluation_count(report.model.n));
        let excluded = if s.excluded.is_empty() {
            "none".to_string()
        } else {
            s.excluded.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ")
        };
        t.meta(format!("excluded.{k}"), excluded);
    }
    for s in &report.series {
        for (k, r) in s.rmse.iter().enumerate() {
            t.push_row(vec![s.scheme.kind().label().into(), (k + 1).into(), (*r).into()]);
        }
    }
    t
}

pub fn rule_check_table(reports: &[ExactnessReport], seed: u64) -> Table {
    let mut t = Table::new(&["scheme", "degree", "max_abs_deviation", "claimed_degree"]);
    t.meta("command", "rule-check").meta("tool_version", TOOL_VERSION).meta("seed", seed);
    if let Some(r) = reports.first() {
        t.meta("n", r.n);
    }
    t.meta("draws", reports.iter().map(|r| r.draws).max().unwrap_or(0));
    for r in reports {
        let k = r.scheme.kind();
        t.meta(format!("variant.{k}"), k.variant());
        t.meta(format!("next_degree_inexact.{k}"), r.next_degree_inexact().to_string());
        for (d, dev) in r.max_deviation.iter().enumerate() {
            t.push_row(vec![k.label().into(), d.into(), (*dev).into(), (r.degree as usize).into()]);
        }
    }
    t
}

/// Writes `table` to `out`, or to stdout when `out` is `None`.
pub fn emit_report(table: &Table, format: crate::config::OutputFormat, out: Option<&Path>) -> std::io::Result<()> {
    let text = match format {
        crate::config::OutputFormat::Csv => table.to_csv(),
        crate::config::OutputFormat::Json => table.to_json(),
    };
    match out {
        Some(path) => std::fs::write(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new(&["scheme", "x", "count"]);
        t.meta("seed", 7u64).meta("note", "a, b");
        t.push_row(vec!["sif5".into(), 0.1f64.into(), 3usize.into()]);
        t.push_row(vec!["ckf3".into(), (1.0f64 / 3.0).into(), 12usize.into()]);
        t
    }

    #[test]
    fn rounding() {
        assert_eq!(round_sig(1.0 / 3.0), 0.3333333333);
        assert_eq!(round_sig(123456789012.0), 123456789000.0);
        assert_eq!(round_sig(0.0), 0.0);
        assert!(round_sig(f64::NAN).is_nan());
    }

    #[test]
    fn csv_layout() {
        let csv = sample().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# seed=7");
        assert_eq!(lines[1], "# note=a, b");
        assert_eq!(lines[2], "scheme,x,count");
        assert_eq!(lines[3], "sif5,0.1,3");
        assert_eq!(lines[4], "ckf3,0.3333333333,12");
    }

    #[test]
    fn json_round_trip() {
        let t = sample();
        let back = Table::from_json(&t.to_json()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn huge_seed_stays_exact() {
        assert_eq!(Value::from(u64::MAX), Value::Str(u64::MAX.to_string()));
    }
}
