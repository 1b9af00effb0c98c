//! `AFIELD` files: text header, then one line per stored frequency.
//!
//! ```text
//! AFIELD 1
//! n=2 d=2 shape=16,16 real=true
//! xi=(1,0): (5.0000000000000000e-1,0.0000000000000000e0) (0.0000000000000000e0,0.0000000000000000e0)
//! ```
//!
//! Frequencies not listed are zero. Values are written with 17 significant
//! digits, so text round trips are bit-exact. The binary variant stores the
//! same data little-endian after the magic `AFIELDB1`.

use rustfft::num_complex::Complex64;

use super::{SpectralError, TorusField};

fn err(line: usize, message: impl Into<String>) -> SpectralError {
    SpectralError::Format {
        line,
        message: message.into(),
    }
}

pub fn write_afield(w: &TorusField) -> String {
    let mut out = String::from("AFIELD 1\n");
    let shape: Vec<String> = (0..w.n).map(|_| w.m.to_string()).collect();
    out.push_str(&format!(
        "n={} d={} shape={} real={}\n",
        w.n,
        w.d,
        shape.join(","),
        w.real
    ));
    for f in 0..w.nfreqs() {
        let block = &w.coeffs[f * w.d..(f + 1) * w.d];
        if block.iter().all(|z| z.re == 0.0 && z.im == 0.0) {
            continue;
        }
        let xi: Vec<String> = w.frequency(f).iter().map(|k| k.to_string()).collect();
        out.push_str(&format!("xi=({}):", xi.join(",")));
        for z in block {
            out.push_str(&format!(" ({:.16e},{:.16e})", z.re, z.im));
        }
        out.push('\n');
    }
    out
}

fn parse_header(line: &str, lineno: usize) -> Result<(usize, usize, usize, bool), SpectralError> {
    let (mut n, mut d, mut shape, mut real) = (None, None, None, None);
    for item in line.split_whitespace() {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| err(lineno, format!("expected key=value, found `{item}`")))?;
        let bad = || err(lineno, format!("bad value for {key}: `{value}`"));
        match key {
            "n" => n = Some(value.parse::<usize>().map_err(|_| bad())?),
            "d" => d = Some(value.parse::<usize>().map_err(|_| bad())?),
            "shape" => {
                let sizes = value
                    .split(',')
                    .map(|s| s.parse::<usize>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| bad())?;
                shape = Some(sizes);
            }
            "real" => real = Some(value.parse::<bool>().map_err(|_| bad())?),
            _ => return Err(err(lineno, format!("unknown header key `{key}`"))),
        }
    }
    let n = n.ok_or_else(|| err(lineno, "missing n"))?;
    let d = d.ok_or_else(|| err(lineno, "missing d"))?;
    let shape = shape.ok_or_else(|| err(lineno, "missing shape"))?;
    let real = real.ok_or_else(|| err(lineno, "missing real"))?;
    if shape.len() != n || shape.iter().any(|&s| s != shape[0]) || shape[0] == 0 {
        return Err(err(lineno, "shape must list n equal positive sizes"));
    }
    Ok((n, d, shape[0], real))
}

fn parse_complex(text: &str, lineno: usize) -> Result<Complex64, SpectralError> {
    let inner = text
        .strip_prefix('(')
        .and_then(|t| t.strip_suffix(')'))
        .ok_or_else(|| err(lineno, format!("expected (re,im), found `{text}`")))?;
    let (re, im) = inner
        .split_once(',')
        .ok_or_else(|| err(lineno, format!("expected (re,im), found `{text}`")))?;
    let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| err(lineno, format!("bad number `{s}`")));
    Ok(Complex64::new(parse(re)?, parse(im)?))
}

pub fn read_afield(text: &str) -> Result<TorusField, SpectralError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (ln, magic) = lines.next().ok_or_else(|| err(1, "empty file"))?;
    if magic != "AFIELD 1" {
        return Err(err(ln, "expected `AFIELD 1`"));
    }
    let (ln, header) = lines.next().ok_or_else(|| err(ln + 1, "missing header"))?;
    let (n, d, m, real) = parse_header(header, ln)?;
    let mut field = TorusField::zeros(n, m, d);
    field.real = real;
    for (ln, line) in lines {
        let (xi_part, values) = line
            .split_once(':')
            .ok_or_else(|| err(ln, "expected `xi=(..): values`"))?;
        let xi_text = xi_part
            .trim()
            .strip_prefix("xi=(")
            .and_then(|t| t.strip_suffix(')'))
            .ok_or_else(|| err(ln, "expected `xi=(k1,..,kn)`"))?;
        let xi = xi_text
            .split(',')
            .map(|s| s.trim().parse::<i64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| err(ln, "bad frequency"))?;
        let zs = values
            .split_whitespace()
            .map(|t| parse_complex(t, ln))
            .collect::<Result<Vec<_>, _>>()?;
        if zs.len() != d {
            return Err(err(ln, format!("expected {d} values, found {}", zs.len())));
        }
        let slot = field
            .coeff_mut(&xi)
            .ok_or_else(|| err(ln, format!("frequency {xi:?} outside the grid")))?;
        slot.copy_from_slice(&zs);
    }
    Ok(field)
}

const MAGIC: &[u8; 8] = b"AFIELDB1";

pub fn write_afield_binary(w: &TorusField) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    for v in [w.n as u64, w.d as u64, w.m as u64, w.real as u64] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for z in &w.coeffs {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

pub fn read_afield_binary(bytes: &[u8]) -> Result<TorusField, SpectralError> {
    if bytes.len() < 40 || &bytes[..8] != MAGIC {
        return Err(err(0, "not a binary AFIELD file"));
    }
    let word = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().expect("8 bytes"));
    let (n, d, m, real) = (word(8) as usize, word(16) as usize, word(24) as usize, word(32) != 0);
    let count = m.checked_pow(n as u32).and_then(|p| p.checked_mul(d));
    if count.map(|c| bytes.len() != 40 + 16 * c).unwrap_or(true) {
        return Err(err(0, "binary AFIELD payload has the wrong length"));
    }
    let coeffs = bytes[40..]
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().expect("8 bytes")),
                f64::from_le_bytes(c[8..].try_into().expect("8 bytes")),
            )
        })
        .collect();
    TorusField::from_coeffs(n, m, d, coeffs, real)
}

#[cfg(test)]
mod tests {
    use super::super::{random_field, Band};
    use super::*;

    #[test]
    fn text_round_trip_is_bit_exact() {
        let w = random_field(2, 8, 2, Band { max_abs: 3, include_zero: true }, 4).unwrap();
        let text = write_afield(&w);
        let back = read_afield(&text).unwrap();
        assert_eq!(back, w);
        assert_eq!(write_afield(&back), text);
    }

    #[test]
    fn binary_round_trip() {
        let w = random_field(3, 4, 1, Band { max_abs: 1, include_zero: false }, 2).unwrap();
        assert_eq!(read_afield_binary(&write_afield_binary(&w)).unwrap(), w);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = "AFIELD 1\nn=1 d=1 shape=4 real=true\nxi=(9): (1,0)\n";
        assert!(matches!(read_afield(text), Err(SpectralError::Format { line: 3, .. })));
        let text = "AFIELD 1\nn=1 d=2 shape=4 real=true\nxi=(1): (1,0)\n";
        assert!(matches!(read_afield(text), Err(SpectralError::Format { line: 3, .. })));
    }
}
