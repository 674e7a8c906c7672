//! Stable text output: a fixed 12-significant-digit float format shared by
//! the CSV and table writers, so identical runs produce identical bytes.

use serde::Serialize;

use crate::approx::SweepResult;
use crate::error::{OscError, Result};

/// Render with 12 significant digits, '.' separator, no locale. Zero prints
/// as "0"; moderate exponents print in plain decimal, the rest in e-notation
/// with an unpadded exponent.
pub fn fmt_sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp_str) = sci.split_once('e').expect("{:e} always carries an exponent");
    let exp: i32 = exp_str.parse().expect("exponent is an integer");
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };
    let sign = if x < 0.0 { "-" } else { "" };

    if (-4..12).contains(&exp) {
        let point = exp + 1;
        let body = if point <= 0 {
            format!("0.{}{}", "0".repeat(-point as usize), digits)
        } else if point as usize >= digits.len() {
            format!("{}{}", digits, "0".repeat(point as usize - digits.len()))
        } else {
            format!("{}.{}", &digits[..point as usize], &digits[point as usize..])
        };
        format!("{sign}{body}")
    } else if digits.len() == 1 {
        format!("{sign}{digits}e{exp}")
    } else {
        format!("{sign}{}.{}e{exp}", &digits[..1], &digits[1..])
    }
}

/// CSV with the fixed sweep header; empty bound cell when no reference
/// bound applies.
pub fn sweep_to_csv(sweep: &SweepResult) -> String {
    let mut out = String::from("param,measured,bound,witness_lo,witness_hi\n");
    for row in &sweep.rows {
        let bound = row.bound.map(fmt_sig12).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_sig12(row.param),
            fmt_sig12(row.measured),
            bound,
            fmt_sig12(row.witness.lo),
            fmt_sig12(row.witness.hi),
        ));
    }
    out
}

/// Pretty JSON with a trailing newline, for files and stdout alike.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)
        .map_err(|e| OscError::InvalidArgument(format!("serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::SweepRow;
    use crate::domain::Interval;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_sig12(0.0), "0");
        assert_eq!(fmt_sig12(-0.0), "0");
        assert_eq!(fmt_sig12(2.0), "2");
        assert_eq!(fmt_sig12(326.0), "326");
        assert_eq!(fmt_sig12(-0.5), "-0.5");
        assert_eq!(fmt_sig12(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_sig12(2.0 / 3.0), "0.666666666667");
        assert_eq!(fmt_sig12(12345.6789), "12345.6789");
        assert_eq!(fmt_sig12(1e-7), "1e-7");
        assert_eq!(fmt_sig12(-2.5e-9), "-2.5e-9");
        assert_eq!(fmt_sig12(3.0e15), "3e15");
        assert_eq!(fmt_sig12(1.23456789012e-4), "0.000123456789012");
        assert_eq!(fmt_sig12(f64::INFINITY), "inf");
        assert_eq!(fmt_sig12(f64::NAN), "nan");
        // round-trip error stays below the 12th digit
        let x = std::f64::consts::E * 0.596347362323194;
        let back: f64 = fmt_sig12(x).parse().unwrap();
        assert!((back - x).abs() <= 1e-11 * x);
    }

    #[test]
    fn sweep_csv_shape() {
        let sweep = SweepResult {
            rows: vec![
                SweepRow {
                    param: 1.0,
                    measured: 0.25,
                    bound: Some(0.5),
                    witness: Interval { lo: 0.0, hi: 0.125 },
                },
                SweepRow {
                    param: 2.0,
                    measured: 0.125,
                    bound: None,
                    witness: Interval { lo: 0.0, hi: 0.0625 },
                },
            ],
        };
        let csv = sweep_to_csv(&sweep);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "param,measured,bound,witness_lo,witness_hi"
        );
        assert_eq!(lines.next().unwrap(), "1,0.25,0.5,0,0.125");
        assert_eq!(lines.next().unwrap(), "2,0.125,,0,0.0625");
        assert!(lines.next().is_none());
    }
}
