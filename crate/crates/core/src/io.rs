//! Text parsing for command-line values: complex frequencies and real windows.

use num_complex::Complex64;

use crate::error::{Error, Result};

fn real(s: &str, what: &str) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| Error::Parse(format!("{what}: '{s}' is not a number")))?;
    if !v.is_finite() {
        return Err(Error::Parse(format!("{what}: '{s}' is not finite")));
    }
    Ok(v)
}

/// Parses `a`, `bi`, `a+bi`, `a-bi`, `i`, `-i` (`j` is accepted for `i`; spaces are ignored).
pub fn parse_complex(text: &str) -> Result<Complex64> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return Err(Error::Parse("empty complex number".into()));
    }
    let Some(body) = s.strip_suffix('i').or_else(|| s.strip_suffix('j')) else {
        return Ok(Complex64::new(real(&s, "real part")?, 0.0));
    };
    // the sign separating the parts: last +/- that is not leading and not an exponent sign
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (real(&body[..k], "real part")?, &body[k..]),
        None => (0.0, body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        other => real(other, "imaginary part")?,
    };
    Ok(Complex64::new(re, im))
}

/// Parses `a,b` into a window with `a <= b`.
pub fn parse_window(text: &str) -> Result<(f64, f64)> {
    let mut parts = text.split(',');
    let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
        return Err(Error::Parse(format!("window '{text}' must be 'a,b'")));
    };
    let a = real(a.trim(), "window start")?;
    let b = real(b.trim(), "window end")?;
    if a > b {
        return Err(Error::Parse(format!("window start {a} exceeds end {b}")));
    }
    Ok((a, b))
}

/// A frequency as `re,im`, `re` or any [`parse_complex`] form.
pub fn parse_omega(text: &str) -> Result<Complex64> {
    match text.split_once(',') {
        Some((re, im)) => Ok(Complex64::new(real(re.trim(), "real part")?, real(im.trim(), "imaginary part")?)),
        None => parse_complex(text),
    }
}

/// Comma-separated complex values.
pub fn parse_complex_list(text: &str) -> Result<Vec<Complex64>> {
    text.split(',').map(parse_complex).collect()
}
