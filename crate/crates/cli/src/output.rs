//! Deterministic text formatting for result files.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

/// Decimal rendering with 9 significant digits; `inf`, `-inf`, `nan` for
/// non-finite values.
pub fn fmt_sig9(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    // round through scientific notation so the magnitude is post-rounding
    let sci = format!("{v:.8e}");
    let (_, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let rounded: f64 = sci.parse().expect("round trip");
    let decimals = (8 - exp).max(0) as usize;
    format!("{rounded:.decimals$}")
}

/// Small CSV writer: header row plus formatted numeric rows.
pub struct Csv {
    buf: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut buf = header.join(",");
        buf.push('\n');
        Self { buf, columns: header.len() }
    }

    pub fn row(&mut self, values: &[f64]) {
        debug_assert_eq!(values.len(), self.columns);
        let mut first = true;
        for &v in values {
            if !first {
                self.buf.push(',');
            }
            first = false;
            let _ = write!(self.buf, "{}", fmt_sig9(v));
        }
        self.buf.push('\n');
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

/// Writes `contents` to `dir/name`, returning the path.
pub fn write_file(dir: &Path, name: &str, contents: &str) -> io::Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}

pub fn json_pretty(v: &serde_json::Value) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

/// Frequency label for file names: `500` for 500.0, `1234.5` otherwise.
pub fn freq_label(f: f64) -> String {
    format!("{f}")
}
