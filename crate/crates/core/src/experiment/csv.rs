use std::fmt::Write as _;
use std::path::Path;

use super::sweep::SweepRow;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "lambda,n,nu,start,delta,h_sign,h_log10_abs,status";

/// Rows in the given order, reals in 17 significant digits.
pub fn render_csv(rows: &[SweepRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{:.16e},{},{},{},{:.16e},{},{:.16e},{}",
            r.lambda, r.n, r.nu, r.start, r.delta, r.h_sign, r.h_log10_abs, r.status
        );
    }
    out
}

pub fn emit_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    std::fs::write(path, render_csv(rows)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::StartLabel;

    #[test]
    fn header_only() {
        assert_eq!(render_csv(&[]), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn single_row() {
        let row = SweepRow {
            lambda: 0.01,
            n: 7,
            nu: 3,
            start: StartLabel::Max,
            delta: 1.25,
            h_sign: -1,
            h_log10_abs: -2.5,
            status: "ok",
        };
        let text = render_csv(&[row]);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(
            lines[1],
            "1.0000000000000000e-2,7,3,max,1.2500000000000000e0,-1,-2.5000000000000000e0,ok"
        );
        assert!(!lines[1].ends_with(','));
    }

    #[test]
    fn unwritable_path_names_the_path() {
        let err = emit_csv(&[], Path::new("/nonexistent-dir/x.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x.csv"));
    }
}
