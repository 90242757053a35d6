//! Number formatting and CSV assembly for command output.

use std::io::Write;

use serde::Serialize;

/// Significant digits in human-facing CSV cells.
pub const CSV_SIGNIFICANT_DIGITS: usize = 9;

/// Formats `v` with [`CSV_SIGNIFICANT_DIGITS`] significant digits, in plain
/// decimal notation for moderate magnitudes and scientific otherwise.
pub fn sig(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "+inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let digits = CSV_SIGNIFICANT_DIGITS - 1;
    let sci = format!("{:.*e}", digits, v);
    let exp: i32 = sci
        .split('e')
        .nth(1)
        .and_then(|e| e.parse().ok())
        .unwrap_or(0);
    if (-5..=9).contains(&exp) {
        let decimals = (digits as i32 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, v))
    } else {
        let (mantissa, e) = sci.split_once('e').unwrap_or((&sci, "0"));
        format!("{}e{}", trim_zeros(mantissa.to_string()), e)
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    t.to_string()
}

pub fn opt(v: Option<f64>) -> String {
    v.map(sig).unwrap_or_default()
}

/// CSV document: `# key=value` comment lines, one header row, then records.
pub struct CsvTable {
    comments: Vec<String>,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self {
            comments: Vec::new(),
            header,
            rows: Vec::new(),
        }
    }

    pub fn comment(&mut self, line: impl Into<String>) {
        self.comments.push(line.into());
    }

    pub fn row(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for c in &self.comments {
            writeln!(out, "# {c}").expect("write to vec");
        }
        let mut w = csv::WriterBuilder::new().from_writer(out);
        w.write_record(&self.header).expect("write to vec");
        for r in &self.rows {
            w.write_record(r).expect("write to vec");
        }
        w.into_inner().expect("flush to vec")
    }
}

/// Pretty JSON document with a trailing newline.
pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable output");
    out.push(b'\n');
    out
}
