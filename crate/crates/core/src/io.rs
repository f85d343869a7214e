//! Reading and writing signals and matrices.
//!
//! CSV: one value per cell, rows separated by `\n`; complex values are
//! written as a single `re+imj` token. Binary: a 16-byte little-endian
//! header (`b"PFG1"`, field tag, rows, cols as `u32`) followed by the
//! row-major values as `f64`, complex entries interleaved `re, im`.

use std::fmt::Write as _;
use std::io::{Read, Write};

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{Field, ScalarField};

pub const MAGIC: &[u8; 4] = b"PFG1";
pub const HEADER_LEN: usize = 16;

/// A matrix of either scalar field, as read from a file.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyMatrix {
    Real(Array2<f64>),
    Complex(Array2<Complex64>),
}

impl AnyMatrix {
    pub fn field(&self) -> ScalarField {
        match self {
            AnyMatrix::Real(_) => ScalarField::Real,
            AnyMatrix::Complex(_) => ScalarField::Complex,
        }
    }

    pub fn dim(&self) -> (usize, usize) {
        match self {
            AnyMatrix::Real(a) => a.dim(),
            AnyMatrix::Complex(a) => a.dim(),
        }
    }

    /// Real matrices are promoted; complex matrices are rejected as real.
    pub fn into_field<T: Field>(self) -> Result<Array2<T>> {
        match (self, T::KIND) {
            (AnyMatrix::Real(a), _) => Ok(a.mapv(T::from_real)),
            (AnyMatrix::Complex(a), ScalarField::Complex) => Ok(a.mapv(|v| T::from_parts(v.re, v.im).expect("complex field"))),
            (AnyMatrix::Complex(_), ScalarField::Real) => {
                Err(Error::InvalidArgument("complex data where a real matrix was expected".into()))
            }
        }
    }
}

fn parse_err(location: String, message: impl Into<String>) -> Error {
    Error::Parse { location, message: message.into() }
}

/// Formats one value; `f64` Display is the shortest round-tripping form.
pub fn format_value<T: Field>(v: T) -> String {
    match T::KIND {
        ScalarField::Real => format!("{}", v.re()),
        ScalarField::Complex => {
            let (re, im) = (v.re(), v.im());
            if im.is_sign_negative() && !im.is_nan() {
                format!("{re}-{}j", -im)
            } else {
                format!("{re}+{im}j")
            }
        }
    }
}

/// Parses a real number or an `re+imj` / `re-imj` / `imj` token.
pub fn parse_token(token: &str) -> Option<Complex64> {
    let t = token.trim();
    let Some(body) = t.strip_suffix('j') else {
        return t.parse::<f64>().ok().map(|re| Complex64::new(re, 0.0));
    };
    let bytes = body.as_bytes();
    // Split at the last sign that is neither leading nor an exponent sign.
    let split = (1..bytes.len())
        .rev()
        .find(|&i| matches!(bytes[i], b'+' | b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    match split {
        Some(i) => {
            let re = body[..i].parse::<f64>().ok()?;
            let im = body[i..].trim_start_matches('+').parse::<f64>().ok()?;
            Some(Complex64::new(re, im))
        }
        None => body.parse::<f64>().ok().map(|im| Complex64::new(0.0, im)),
    }
}

pub fn write_csv<T: Field>(out: &mut impl Write, m: &Array2<T>) -> Result<()> {
    out.write_all(to_csv_string(m).as_bytes())?;
    Ok(())
}

/// Reads a CSV matrix. The result is complex if any token has an imaginary part
/// marker; blank lines are ignored.
pub fn read_csv(input: &mut impl Read) -> Result<AnyMatrix> {
    let mut text = String::new();
    input.read_to_string(&mut text).map_err(|e| parse_err("byte 0".into(), e.to_string()))?;
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    let mut complex = false;
    for (ln, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut count = 0;
        for (cn, token) in line.split(',').enumerate() {
            let v = parse_token(token).ok_or_else(|| {
                parse_err(format!("line {}, column {}", ln + 1, cn + 1), format!("invalid value '{}'", token.trim()))
            })?;
            complex |= token.trim().ends_with('j');
            values.push(v);
            count += 1;
        }
        match cols {
            None => cols = Some(count),
            Some(c) if c != count => {
                return Err(parse_err(format!("line {}", ln + 1), format!("expected {c} values, found {count}")));
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.unwrap_or(0);
    let m = Array2::from_shape_vec((rows, cols), values).expect("row lengths checked");
    Ok(if complex { AnyMatrix::Complex(m) } else { AnyMatrix::Real(m.mapv(|v| v.re)) })
}

pub fn write_binary<T: Field>(out: &mut impl Write, m: &Array2<T>) -> Result<()> {
    let (rows, cols) = m.dim();
    let dim = |d: usize| {
        u32::try_from(d).map_err(|_| Error::InvalidArgument(format!("dimension {d} exceeds the binary format limit")))
    };
    let mut buf = Vec::with_capacity(HEADER_LEN + rows * cols * 16);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&T::KIND.tag().to_le_bytes());
    buf.extend_from_slice(&dim(rows)?.to_le_bytes());
    buf.extend_from_slice(&dim(cols)?.to_le_bytes());
    for &v in m.iter() {
        buf.extend_from_slice(&v.re().to_le_bytes());
        if T::KIND == ScalarField::Complex {
            buf.extend_from_slice(&v.im().to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_binary(input: &mut impl Read) -> Result<AnyMatrix> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(|e| parse_err("byte 0".into(), e.to_string()))?;
    if bytes.len() < HEADER_LEN {
        return Err(parse_err(format!("byte {}", bytes.len()), "truncated header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(parse_err("byte 0".into(), "bad magic (expected PFG1)"));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
    let field = ScalarField::from_tag(word(4))
        .ok_or_else(|| parse_err("byte 4".into(), format!("unknown field tag {}", word(4))))?;
    let (rows, cols) = (word(8) as usize, word(12) as usize);
    let width = if field == ScalarField::Complex { 16 } else { 8 };
    let expected = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(width))
        .ok_or_else(|| parse_err("byte 8".into(), "dimensions overflow"))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected {
        let at = HEADER_LEN + payload.len().min(expected);
        return Err(parse_err(
            format!("byte {at}"),
            format!("expected {expected} payload bytes, found {}", payload.len()),
        ));
    }
    let f = |i: usize| f64::from_le_bytes(payload[i * 8..i * 8 + 8].try_into().unwrap());
    Ok(match field {
        ScalarField::Real => AnyMatrix::Real(Array2::from_shape_fn((rows, cols), |(i, j)| f(i * cols + j))),
        ScalarField::Complex => AnyMatrix::Complex(Array2::from_shape_fn((rows, cols), |(i, j)| {
            let k = 2 * (i * cols + j);
            Complex64::new(f(k), f(k + 1))
        })),
    })
}

/// Either format, chosen by the `.csv` extension (anything else is binary).
pub fn write_path<T: Field>(path: &std::path::Path, m: &Array2<T>) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    if is_csv(path) {
        write_csv(&mut file, m)?;
    } else {
        write_binary(&mut file, m)?;
    }
    file.flush()?;
    Ok(())
}

pub fn read_path(path: &std::path::Path) -> Result<AnyMatrix> {
    let mut file = std::fs::File::open(path)?;
    let result = if is_csv(path) { read_csv(&mut file) } else { read_binary(&mut file) };
    result.map_err(|e| match e {
        Error::Parse { location, message } => Error::Parse { location: format!("{}: {location}", path.display()), message },
        other => other,
    })
}

fn is_csv(path: &std::path::Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Renders a matrix as CSV text (convenience for tests and small outputs).
pub fn to_csv_string<T: Field>(m: &Array2<T>) -> String {
    let mut s = String::new();
    for row in m.rows() {
        let cells: Vec<String> = row.iter().map(|&v| format_value(v)).collect();
        let _ = writeln!(s, "{}", cells.join(","));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn complex_tokens() {
        assert_eq!(parse_token("1+2j"), Some(Complex64::new(1.0, 2.0)));
        assert_eq!(parse_token("-1.5-2e-3j"), Some(Complex64::new(-1.5, -2e-3)));
        assert_eq!(parse_token("1e+2+3E-1j"), Some(Complex64::new(100.0, 0.3)));
        assert_eq!(parse_token("4j"), Some(Complex64::new(0.0, 4.0)));
        assert_eq!(parse_token(" 7 "), Some(Complex64::new(7.0, 0.0)));
        assert_eq!(parse_token("1+j"), None);
        assert_eq!(parse_token("abc"), None);
        assert_eq!(format_value(Complex64::new(1.0, -2.0)), "1-2j");
        assert_eq!(format_value(Complex64::new(0.5, 0.0)), "0.5+0j");
    }

    #[test]
    fn csv_roundtrip_and_field_detection() {
        let r = array![[1.0, -2.5], [0.1, 3e-300]];
        let s = to_csv_string(&r);
        assert_eq!(read_csv(&mut s.as_bytes()).unwrap(), AnyMatrix::Real(r));

        let c = array![[Complex64::new(1.0, -1.0)], [Complex64::new(-0.0, 2.0)]];
        let back = read_csv(&mut to_csv_string(&c).as_bytes()).unwrap();
        assert_eq!(back, AnyMatrix::Complex(c));
    }

    #[test]
    fn csv_errors_name_location() {
        let err = read_csv(&mut "1,2\n3,x\n".as_bytes()).unwrap_err().to_string();
        assert!(err.contains("line 2, column 2"), "{err}");
        let err = read_csv(&mut "1,2\n3\n".as_bytes()).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn binary_layout() {
        let m = array![[1.0f64, 2.0, 3.0]];
        let mut buf = Vec::new();
        write_binary(&mut buf, &m).unwrap();
        assert_eq!(buf.len(), 16 + 24);
        assert_eq!(&buf[..4], b"PFG1");
        assert_eq!(&buf[4..8], &0u32.to_le_bytes());
        assert_eq!(&buf[8..12], &1u32.to_le_bytes());
        assert_eq!(&buf[12..16], &3u32.to_le_bytes());
        assert_eq!(&buf[16..24], &1.0f64.to_le_bytes());
    }

    #[test]
    fn binary_errors_name_offset() {
        let err = read_binary(&mut &b"PFG"[..]).unwrap_err().to_string();
        assert!(err.contains("byte 3"), "{err}");
        let err = read_binary(&mut &b"XXXX000000000000"[..]).unwrap_err().to_string();
        assert!(err.contains("byte 0"), "{err}");
        let mut buf = Vec::new();
        write_binary(&mut buf, &array![[1.0f64, 2.0]]).unwrap();
        buf.truncate(20);
        let err = read_binary(&mut buf.as_slice()).unwrap_err().to_string();
        assert!(err.contains("byte 20"), "{err}");
    }

    #[test]
    fn real_into_complex_promotes_and_reverse_fails() {
        let r = AnyMatrix::Real(array![[2.0]]);
        assert_eq!(r.into_field::<Complex64>().unwrap()[[0, 0]], Complex64::new(2.0, 0.0));
        let c = AnyMatrix::Complex(array![[Complex64::new(0.0, 1.0)]]);
        assert!(c.into_field::<f64>().is_err());
    }

    proptest! {
        #[test]
        fn binary_roundtrip_is_bitwise(vals in proptest::collection::vec(any::<f64>(), 6)) {
            let m = Array2::from_shape_vec((3, 2), vals.clone()).unwrap();
            let mut buf = Vec::new();
            write_binary(&mut buf, &m).unwrap();
            let AnyMatrix::Real(back) = read_binary(&mut buf.as_slice()).unwrap() else { panic!() };
            for (a, b) in back.iter().zip(&vals) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }

        #[test]
        fn csv_roundtrip_complex_finite(re in -1e300f64..1e300, im in -1e300f64..1e300) {
            let m = array![[Complex64::new(re, im)]];
            let back = read_csv(&mut to_csv_string(&m).as_bytes()).unwrap();
            prop_assert_eq!(back, AnyMatrix::Complex(m));
        }
    }
}
