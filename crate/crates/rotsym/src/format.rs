//! Number formatting and CSV tables.

use std::io::Write;
use std::path::Path;

use crate::error::CliResult;

/// Significant digits written for every float.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// `x` rounded to 12 significant digits, `.` decimal separator, no
/// grouping. Plain notation for `1e-4 <= |x| < 1e12`, otherwise `d.ddde±x`.
pub fn number(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let rounded: f64 = sci.parse().expect("formatted float parses");
    let a = rounded.abs();
    if (1e-4..1e12).contains(&a) {
        // shortest round-trip of the rounded value never exceeds 12 digits
        return format!("{rounded}");
    }
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let mantissa = if mantissa.contains('.') { mantissa.trim_end_matches('0').trim_end_matches('.') } else { mantissa };
    format!("{mantissa}e{exp}")
}

pub fn optional(x: Option<f64>) -> String {
    x.map_or_else(String::new, number)
}

/// Header, rows and `# key=value` comment lines written before the header.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    pub comments: Vec<(String, String)>,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(headers: &[&str]) -> Self {
        Self { comments: Vec::new(), headers: headers.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn comment(&mut self, key: &str, value: impl Into<String>) {
        self.comments.push((key.into(), value.into()));
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> CliResult<Vec<u8>> {
        let mut out = Vec::new();
        for (k, v) in &self.comments {
            writeln!(out, "# {k}={v}")?;
        }
        {
            let mut w = csv::WriterBuilder::new().from_writer(&mut out);
            w.write_record(&self.headers)?;
            for r in &self.rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    /// Column `name` parsed as floats.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.headers.iter().position(|h| h == name)?;
        self.rows.iter().map(|r| r[i].parse().ok()).collect()
    }
}

/// Reads a table written by [`CsvTable::to_bytes`].
pub fn read_table(bytes: &[u8]) -> CliResult<CsvTable> {
    let text = String::from_utf8_lossy(bytes);
    let mut comments = Vec::new();
    let mut body = String::new();
    for line in text.lines() {
        match line.strip_prefix("# ") {
            Some(c) if body.is_empty() => {
                let (k, v) = c.split_once('=').unwrap_or((c, ""));
                comments.push((k.to_string(), v.to_string()));
            }
            _ => {
                body.push_str(line);
                body.push('\n');
            }
        }
    }
    let mut r = csv::ReaderBuilder::new().from_reader(body.as_bytes());
    let headers = r.headers()?.iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.map(|x| x.iter().map(String::from).collect())).collect::<Result<_, _>>()?;
    Ok(CsvTable { comments, headers, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers() {
        assert_eq!(number(0.5), "0.5");
        assert_eq!(number(1.39e-3), "0.00139");
        assert_eq!(number(1.0 / 3.0), "0.333333333333");
        assert_eq!(number(2.0 / 3.0 * 1e-7), "6.66666666667e-8");
        assert_eq!(number(1e-10), "1e-10");
        assert_eq!(number(-12345.678901234567), "-12345.6789012");
        assert_eq!(number(3311.0), "3311");
        assert_eq!(number(0.0), "0");
        assert_eq!(number(f64::NAN), "nan");
        for x in [0.123456789012345, 9.87654321e-9, 4.2e15] {
            let back: f64 = number(x).parse().unwrap();
            assert!((back - x).abs() <= 1e-11 * x.abs());
        }
    }

    #[test]
    fn table_round_trip() {
        let mut t = CsvTable::new(&["a", "b"]);
        t.comment("manifest_hash", "abc");
        t.push(vec![number(1.5), number(2e-9)]);
        let back = read_table(&t.to_bytes().unwrap()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.column("b").unwrap(), vec![2e-9]);
    }
}
