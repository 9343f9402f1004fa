//! Plain-text matrix exchange format shared by every module.
//!
//! First line is `rows cols`; each of the following `rows` lines holds
//! `cols` whitespace-separated entries. Real entries are decimal floats;
//! complex entries use `re+imj` / `re-imj` tokens. Values are written with
//! Rust's shortest round-trip formatting, so write/read is lossless.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numerics::C64;

pub fn format_real(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", m.nrows(), m.ncols());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if c > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{:e}", m[(r, c)]);
        }
        out.push('\n');
    }
    out
}

pub fn format_complex(m: &DMatrix<C64>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", m.nrows(), m.ncols());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if c > 0 {
                out.push(' ');
            }
            let z = m[(r, c)];
            if z.im >= 0.0 || z.im.is_nan() {
                let _ = write!(out, "{:e}+{:e}j", z.re, z.im);
            } else {
                let _ = write!(out, "{:e}-{:e}j", z.re, -z.im);
            }
        }
        out.push('\n');
    }
    out
}

pub fn parse_real(text: &str) -> Result<DMatrix<f64>> {
    let m = parse_complex(text)?;
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if m[(r, c)].im != 0.0 {
                return Err(Error::Parse {
                    line: r + 2,
                    message: format!("complex entry at ({r},{c}) where a real matrix was expected"),
                });
            }
        }
    }
    Ok(m.map(|z| z.re))
}

pub fn parse_complex(text: &str) -> Result<DMatrix<C64>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty input".into(),
    })?;
    let mut dims = header.split_whitespace();
    let rows: usize = parse_token(dims.next(), 1, "rows")?;
    let cols: usize = parse_token(dims.next(), 1, "cols")?;

    let mut entries = Vec::with_capacity(rows * cols);
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        for tok in line.split_whitespace() {
            let z = parse_scalar(tok).map_err(|message| Error::Parse {
                line: idx + 1,
                message,
            })?;
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("non-finite entry `{tok}`"),
                });
            }
            entries.push(z);
        }
    }
    if entries.len() != rows * cols {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "expected {} entries for a {rows}x{cols} matrix, found {}",
                rows * cols,
                entries.len()
            ),
        });
    }
    Ok(DMatrix::from_row_iterator(rows, cols, entries))
}

pub fn write_real(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    fs::write(path, format_real(m))?;
    Ok(())
}

pub fn write_complex(path: &Path, m: &DMatrix<C64>) -> Result<()> {
    fs::write(path, format_complex(m))?;
    Ok(())
}

pub fn read_real(path: &Path) -> Result<DMatrix<f64>> {
    parse_real(&fs::read_to_string(path)?)
}

pub fn read_complex(path: &Path) -> Result<DMatrix<C64>> {
    parse_complex(&fs::read_to_string(path)?)
}

fn parse_token<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    tok.and_then(|t| t.parse().ok()).ok_or(Error::Parse {
        line,
        message: format!("missing or invalid {what} in header"),
    })
}

fn parse_scalar(tok: &str) -> std::result::Result<C64, String> {
    if let Some(body) = tok.strip_suffix('j').or_else(|| tok.strip_suffix('J')) {
        // Split `re+im` / `re-im` at the last sign not owned by an exponent.
        let bytes = body.as_bytes();
        let mut split = None;
        for i in (1..bytes.len()).rev() {
            let b = bytes[i];
            if (b == b'+' || b == b'-') && !matches!(bytes[i - 1], b'e' | b'E') {
                split = Some(i);
                break;
            }
        }
        match split {
            Some(i) => {
                let re: f64 = body[..i]
                    .parse()
                    .map_err(|_| format!("bad real part in `{tok}`"))?;
                let sign = if bytes[i] == b'-' { -1.0 } else { 1.0 };
                let im: f64 = body[i + 1..]
                    .parse()
                    .map_err(|_| format!("bad imaginary part in `{tok}`"))?;
                Ok(C64::new(re, sign * im))
            }
            None => {
                // Pure imaginary token such as `2j`.
                let im: f64 = body.parse().map_err(|_| format!("bad token `{tok}`"))?;
                Ok(C64::new(0.0, im))
            }
        }
    } else {
        let re: f64 = tok.parse().map_err(|_| format!("bad token `{tok}`"))?;
        Ok(C64::new(re, 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn real_round_trip_exact() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, -2.5, 3e-13, 0.0, 1e17, -0.125]);
        let back = parse_real(&format_real(&m)).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn complex_tokens() {
        let m = DMatrix::from_row_slice(
            1,
            3,
            &[C64::new(1.5, 2.25), C64::new(0.9, -0.1), C64::new(-3.0, 0.0)],
        );
        let text = format_complex(&m);
        let back = parse_complex(&text).unwrap();
        assert_eq!(m, back);
        assert!(text.contains("1.5e0+2.25e0j"));
        assert!(text.contains("9e-1-1e-1j"));
    }

    #[test]
    fn real_reader_rejects_complex() {
        let err = parse_real("1 1\n1+2j\n").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn rejects_entry_count_mismatch() {
        assert!(parse_real("2 2\n1 2 3\n").is_err());
    }

    proptest! {
        #[test]
        fn round_trip_random_real(values in proptest::collection::vec(-1e6f64..1e6, 12)) {
            let m = DMatrix::from_row_slice(3, 4, &values);
            let back = parse_real(&format_real(&m)).unwrap();
            prop_assert_eq!(m, back);
        }

        #[test]
        fn round_trip_random_complex(values in proptest::collection::vec(-1e3f64..1e3, 12)) {
            let m = DMatrix::from_fn(2, 3, |r, c| {
                let k = 2 * (r * 3 + c);
                C64::new(values[k], values[k + 1])
            });
            let back = parse_complex(&format_complex(&m)).unwrap();
            prop_assert_eq!(m, back);
        }
    }
}
