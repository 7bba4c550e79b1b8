//! CSV and JSON artifacts.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::CliError;

/// `%.12g`: 12 significant digits, trailing zeros dropped, exponent form
/// outside `[1e-4, 1e12)`.
pub fn sig12(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim(format!("{v:.decimals$}"))
    } else {
        format!(
            "{}e{}{:02}",
            trim(mantissa.to_string()),
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        )
    }
}

fn trim(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Pretty JSON with a trailing newline.
pub fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<(), CliError> {
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| CliError::Io(std::io::Error::other(e));
        out.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            out.write_record(row).map_err(io)?;
        }
        out.flush()?;
        Ok(())
    }

}

impl std::fmt::Display for Table {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut buf = Vec::new();
        self.write_to(&mut buf).map_err(|_| std::fmt::Error)?;
        f.write_str(std::str::from_utf8(&buf).map_err(|_| std::fmt::Error)?)
    }
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), contents)?;
    Ok(())
}

/// Streams a large table straight to `dir/name`.
pub fn csv_file(
    dir: &Path,
    name: &str,
) -> Result<csv::Writer<std::io::BufWriter<std::fs::File>>, CliError> {
    std::fs::create_dir_all(dir)?;
    let f = std::fs::File::create(dir.join(name))?;
    Ok(csv::Writer::from_writer(std::io::BufWriter::new(f)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(sig12(6.868449123456789), "6.86844912346");
        assert_eq!(sig12(100.0), "100");
        assert_eq!(sig12(-0.25), "-0.25");
        assert_eq!(sig12(1.0 / 3.0), "0.333333333333");
        assert_eq!(sig12(123456789012.3), "123456789012");
        assert_eq!(sig12(1.5e-7), "1.5e-07");
        assert_eq!(sig12(2.0e15), "2e+15");
        assert_eq!(sig12(2.69205387002e-5), "2.69205387002e-05");
        assert_eq!(sig12(0.000123), "0.000123");
        assert_eq!(sig12(0.0), "0");
    }

    #[test]
    fn table_keeps_column_order() {
        let mut t = Table::new(&["b", "a"]);
        t.push(vec!["1".into(), "2".into()]);
        assert_eq!(t.to_string(), "b,a\n1,2\n");
    }
}
