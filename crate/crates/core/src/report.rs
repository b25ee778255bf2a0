//! Text formatting shared by the CSV and JSON writers.

use std::fmt::Write as _;

use ndarray::Array2;

use crate::scalar::Real;

/// Output schema version embedded in every JSON artifact.
pub const SCHEMA_VERSION: u32 = 1;

/// 17 significant digits in scientific notation, `.` as decimal separator.
pub fn fmt_float<T: Real>(x: T) -> String {
    format!("{:.16e}", x.as_f64())
}

/// Row-major CSV dump of a matrix, no header.
pub fn matrix_csv<T: Real>(m: &Array2<T>) -> String {
    let mut out = String::with_capacity(m.len() * 24);
    for row in m.rows() {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            first = false;
            let _ = write!(out, "{}", fmt_float(*v));
        }
        out.push('\n');
    }
    out
}
