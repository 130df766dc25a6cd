//! Deterministic CSV text.
//!
//! Floats are written in scientific notation with 17 significant digits, so
//! identical inputs always produce byte-identical files.

use crate::linalg::CMatrix;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

/// A header plus string rows.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len(), "row width");
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        std::fs::write(path, self.render())
    }
}

/// Row-major matrix dump, each complex entry as an `re,im` pair.
pub fn render_matrix(m: &CMatrix) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            let v = m[(i, j)];
            let _ = write!(out, "{},{}", fmt_f64(v.re), fmt_f64(v.im));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;

    #[test]
    fn float_format_is_seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e0");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!(0.1f64, fmt_f64(0.1).parse::<f64>().unwrap());
    }

    #[test]
    fn matrix_rows() {
        let m = CMatrix::from_row_slice(1, 2, &[C64::new(1.0, 0.0), C64::new(0.0, -1.0)]);
        let s = render_matrix(&m);
        assert_eq!(s.trim_end().split(',').count(), 4);
    }
}
