//! CSV, JSON-lines and plot-data output.
//!
//! Floats are rounded to 12 significant digits before serialization, so a
//! report is byte-for-byte reproducible across runs and thread counts.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use momentlab_core::moments::MomentReport;

use crate::error::{AppResult, IoContext};

/// `x` rounded to 12 significant digits.
pub fn sig12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().expect("formatted float parses")
}

/// One moment row. Column order is the CSV header order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentRow {
    pub q: u64,
    pub a: u64,
    pub b: u64,
    pub form: String,
    pub brute_re: f64,
    pub brute_im: f64,
    pub m_even: f64,
    pub m_odd: f64,
    pub main_theorem: f64,
    pub main_corollary: f64,
    pub ratio_theorem: f64,
    pub ratio_corollary: f64,
    pub chars_used: usize,
    /// Wall time, only filled when timings are requested (it would break
    /// reproducibility otherwise).
    pub seconds: Option<f64>,
}

pub const MOMENT_COLUMNS: [&str; 14] = [
    "q",
    "a",
    "b",
    "form",
    "brute_re",
    "brute_im",
    "m_even",
    "m_odd",
    "main_theorem",
    "main_corollary",
    "ratio_theorem",
    "ratio_corollary",
    "chars_used",
    "seconds",
];

impl MomentRow {
    pub fn new(r: &MomentReport, seconds: Option<f64>) -> Self {
        Self {
            q: r.query.q,
            a: r.query.a,
            b: r.query.b,
            form: r.form.clone(),
            brute_re: sig12(r.brute.re),
            brute_im: sig12(r.brute.im),
            m_even: sig12(r.even.value.re),
            m_odd: sig12(r.odd.value.re),
            main_theorem: sig12(r.main.theorem),
            main_corollary: sig12(r.main.corollary),
            ratio_theorem: sig12(r.ratio_theorem),
            ratio_corollary: sig12(r.ratio_corollary),
            chars_used: r.chars_used,
            seconds: seconds.map(|s| (s * 1e3).round() / 1e3),
        }
    }
}

/// Writes `rows` as CSV with a header; the header is written even when
/// `rows` is empty.
pub fn write_csv<T: Serialize>(path: &Path, columns: &[&str], rows: &[T]) -> AppResult<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(columns)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().at(path)
}

/// One JSON object per line with the same field names as the CSV.
pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> AppResult<()> {
    let mut out = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    fs::write(path, out).at(path)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> AppResult<()> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    fs::write(path, out).at(path)
}

/// Two-column `x y` data file with a `#` header naming the series.
pub fn write_plot(path: &Path, series: &str, points: &[(f64, f64)]) -> AppResult<()> {
    let mut file = fs::File::create(path).at(path)?;
    let mut body = format!("# {series}\n# x y\n");
    for &(x, y) in points {
        body.push_str(&format!("{:.11e} {:.11e}\n", x, y));
    }
    file.write_all(body.as_bytes()).at(path)
}

/// `stem.csv` → `stem.<ext>` next to it.
pub fn sibling(path: &Path, suffix: &str) -> std::path::PathBuf {
    let stem = path.file_stem().map_or_else(|| "report".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}{suffix}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding() {
        assert_eq!(sig12(1.0 / 3.0), 0.333333333333);
        assert_eq!(sig12(-2.0 / 3.0 * 1e-20), -6.66666666667e-21);
        assert_eq!(sig12(0.0), 0.0);
        assert!(sig12(f64::NAN).is_nan());
    }

    #[test]
    fn siblings() {
        assert_eq!(sibling(Path::new("out/sweep.csv"), ".jsonl"), Path::new("out/sweep.jsonl"));
        assert_eq!(sibling(Path::new("x"), "-summary.json"), Path::new("x-summary.json"));
    }
}
