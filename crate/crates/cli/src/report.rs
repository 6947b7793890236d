//! CSV reports with a metadata header.

use std::io::{self, Write};

use dolbeault_core::analysis::NormValue;
use sha2::{Digest, Sha256};

pub const SCHEMA: u32 = 1;

/// Rows of one run plus the assertions that failed.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub failures: Vec<String>,
}

impl Report {
    pub fn new(columns: &[&'static str]) -> Self {
        Report {
            columns: columns.to_vec(),
            rows: Vec::new(),
            failures: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    /// Records a failed assertion.
    pub fn fail(&mut self, message: impl Into<String>) {
        self.failures.push(message.into());
    }

    /// Records a failure unless `ok`.
    pub fn check(&mut self, ok: bool, message: impl FnOnce() -> String) {
        if !ok {
            self.fail(message());
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    /// Header comments followed by the CSV body.
    pub fn write<W: Write>(&self, mut out: W, command: &str, config: &[u8], seed: u64) -> io::Result<()> {
        writeln!(out, "# schema={SCHEMA}")?;
        writeln!(out, "# command={command}")?;
        writeln!(out, "# config_sha256={}", config_hash(config))?;
        writeln!(out, "# seed={seed}")?;
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()
    }
}

pub fn config_hash(config: &[u8]) -> String {
    Sha256::digest(config).iter().map(|b| format!("{b:02x}")).collect()
}

/// Shortest round-trip form; `inf`, `-inf` and `nan` otherwise.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:e}")
    }
}

pub fn norm(v: NormValue) -> String {
    num(v.value())
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_body() {
        let mut r = Report::new(&["a", "b"]);
        r.push(vec!["x,y".into(), num(0.5)]);
        let mut out = Vec::new();
        r.write(&mut out, "weights", b"", 0).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "# schema=1\n# command=weights\n\
             # config_sha256=e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855\n\
             # seed=0\na,b\n\"x,y\",5e-1\n"
        );
    }

    #[test]
    fn special_values() {
        assert_eq!(num(f64::INFINITY), "inf");
        assert_eq!(num(f64::NAN), "nan");
        assert_eq!(opt(None), "");
    }
}
