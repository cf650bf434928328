use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Text,
}

/// Significant digits of every floating-point metric the CLI prints.
pub const SIG_DIGITS: usize = 9;

pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Rounds every non-integer number in `v` to [`SIG_DIGITS`] digits.
pub fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().map(round_sig).and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Metric output: serialized, rounded, then rendered.
pub fn metric_value<T: Serialize>(x: &T) -> serde_json::Result<Value> {
    let mut v = serde_json::to_value(x)?;
    round_value(&mut v);
    Ok(v)
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "-".to_owned(),
        Value::Array(items) => format!("[{}]", items.iter().map(scalar).collect::<Vec<_>>().join(", ")),
        Value::Object(map) => map
            .iter()
            .map(|(k, v)| format!("{k}={}", scalar(v)))
            .collect::<Vec<_>>()
            .join(" "),
        other => other.to_string(),
    }
}

fn is_table(items: &[Value]) -> bool {
    !items.is_empty() && items.iter().all(|i| i.is_object())
}

fn table(items: &[Value], indent: &str, out: &mut String) {
    let mut columns: Vec<&str> = Vec::new();
    for item in items {
        for k in item.as_object().unwrap().keys() {
            if !columns.contains(&k.as_str()) {
                columns.push(k);
            }
        }
    }
    let cells: Vec<Vec<String>> = items
        .iter()
        .map(|i| {
            columns
                .iter()
                .map(|c| i.get(*c).map_or_else(String::new, scalar))
                .collect()
        })
        .collect();
    let widths: Vec<usize> = columns
        .iter()
        .enumerate()
        .map(|(j, c)| cells.iter().map(|r| r[j].len()).chain([c.len()]).max().unwrap())
        .collect();
    let line = |row: Vec<&str>| -> String {
        let padded: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        format!("{indent}{}\n", padded.join("  ").trim_end())
    };
    out.push_str(&line(columns.clone()));
    for row in &cells {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
    }
}

fn render(v: &Value, indent: &str, out: &mut String) {
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                match v {
                    Value::Array(items) if is_table(items) => {
                        out.push_str(&format!("{indent}{k}:\n"));
                        table(items, &format!("{indent}  "), out);
                    }
                    Value::Object(_) => {
                        out.push_str(&format!("{indent}{k}:\n"));
                        render(v, &format!("{indent}  "), out);
                    }
                    _ => out.push_str(&format!("{indent}{k}: {}\n", scalar(v))),
                }
            }
        }
        Value::Array(items) if is_table(items) => table(items, indent, out),
        other => out.push_str(&format!("{indent}{}\n", scalar(other))),
    }
}

/// Text rendering of a JSON document: scalars as `key: value`, arrays of
/// objects as aligned tables.
pub fn to_text(v: &Value) -> String {
    let mut out = String::new();
    render(v, "", &mut out);
    out
}

/// Destination of command output.
pub struct Sink {
    inner: Box<dyn Write>,
    format: Format,
}

impl Sink {
    pub fn open(path: Option<&Path>, format: Format) -> io::Result<Self> {
        let inner: Box<dyn Write> = match path {
            Some(p) if p != Path::new("-") => Box::new(BufWriter::new(File::create(p)?)),
            _ => Box::new(BufWriter::new(io::stdout().lock())),
        };
        Ok(Self { inner, format })
    }

    /// One complete document.
    pub fn document(&mut self, v: &Value) -> io::Result<()> {
        match self.format {
            Format::Json => {
                serde_json::to_writer_pretty(&mut self.inner, v)?;
                writeln!(self.inner)
            }
            Format::Text => write!(self.inner, "{}", to_text(v)),
        }
    }

    /// One record of a line-oriented stream.
    pub fn record(&mut self, v: &Value) -> io::Result<()> {
        match self.format {
            Format::Json => {
                serde_json::to_writer(&mut self.inner, v)?;
                writeln!(self.inner)
            }
            Format::Text => writeln!(self.inner, "{}", scalar(v)),
        }
    }

    /// Raw bytes, for outputs whose format is fixed (corpus files).
    pub fn raw(&mut self) -> &mut dyn Write {
        &mut self.inner
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.inner.flush()
    }
}
