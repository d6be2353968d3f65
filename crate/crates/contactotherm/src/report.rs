//! Machine-readable reports. JSON keeps insertion order and prints every
//! float with 17 significant digits; CSV flattens the same per-point
//! records into one row each.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::{json, Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub command: String,
    pub model: Value,
    /// One record per evaluated point.
    pub points: Vec<Value>,
    pub pass: Option<bool>,
    pub max_delta: Option<f64>,
    pub tolerances: Vec<(&'static str, f64)>,
    pub seed: Option<u64>,
}

impl Report {
    pub fn new(command: &str, model: Value) -> Self {
        Self { command: command.into(), model, points: Vec::new(), pass: None, max_delta: None, tolerances: Vec::new(), seed: None }
    }

    pub fn to_value(&self) -> Value {
        let mut v = Map::new();
        v.insert("command".into(), json!(self.command));
        v.insert("model".into(), self.model.clone());
        v.insert("results".into(), json!({ "points": self.points }));
        if let Some(p) = self.pass {
            v.insert("pass".into(), json!(p));
        }
        if let Some(d) = self.max_delta {
            v.insert("max_delta".into(), json!(d));
        }
        let tol: Map<String, Value> = self.tolerances.iter().map(|(k, t)| (k.to_string(), json!(t))).collect();
        v.insert("tolerances".into(), Value::Object(tol));
        if let Some(s) = self.seed {
            v.insert("seed".into(), json!(s));
        }
        Value::Object(v)
    }

    pub fn to_json(&self) -> String {
        to_json_string(&self.to_value())
    }

    pub fn to_csv(&self) -> String {
        points_to_csv(&self.points)
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => self.to_json(),
            Format::Csv => self.to_csv(),
        }
    }
}

/// `{:.16e}` gives 17 significant digits, which round-trips every f64.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

struct FloatFormatter<'a>(PrettyFormatter<'a>);

impl Formatter for FloatFormatter<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(format_f64(value).as_bytes())
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_string(v: &Value) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FloatFormatter(PrettyFormatter::with_indent(b"  ")));
    v.serialize(&mut ser).expect("serializing a Value into memory cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON is UTF-8")
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                flatten(&key(k), x, out);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&key(&i.to_string()), x, out);
            }
        }
        Value::Null => out.push((prefix.to_string(), String::new())),
        Value::Bool(b) => out.push((prefix.to_string(), b.to_string())),
        Value::Number(n) => {
            let s = match (n.as_u64(), n.as_i64()) {
                (Some(u), _) => u.to_string(),
                (None, Some(i)) => i.to_string(),
                _ => format_f64(n.as_f64().expect("finite")),
            };
            out.push((prefix.to_string(), s));
        }
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
    }
}

/// Header is the union of flattened keys in order of first appearance.
pub fn points_to_csv(points: &[Value]) -> String {
    let rows: Vec<Vec<(String, String)>> = points
        .iter()
        .map(|p| {
            let mut r = Vec::new();
            flatten("", p, &mut r);
            r
        })
        .collect();
    let mut header: Vec<String> = Vec::new();
    for r in &rows {
        for (k, _) in r {
            if !header.contains(k) {
                header.push(k.clone());
            }
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).expect("in-memory write");
    for r in &rows {
        let record: Vec<&str> =
            header.iter().map(|h| r.iter().find(|(k, _)| k == h).map_or("", |(_, v)| v.as_str())).collect();
        w.write_record(&record).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_17_digits() {
        let s = to_json_string(&json!({"x": 0.1, "k": 3}));
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        assert!(s.contains("\"k\": 3"));
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["x"].as_f64(), Some(0.1));
    }

    #[test]
    fn csv_flattens_nested_records() {
        let pts = vec![json!({"i": [0.5], "g": {"h": [[1.0]]}, "ok": true}), json!({"i": [1.5], "extra": "a,b"})];
        let csv = points_to_csv(&pts);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("i.0,g.h.0.0,ok,extra"));
        assert_eq!(lines.next(), Some("5.0000000000000000e-1,1.0000000000000000e0,true,"));
        assert_eq!(lines.next(), Some("1.5000000000000000e0,,,\"a,b\""));
    }
}
