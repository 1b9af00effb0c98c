//! Operator files.
//!
//! ```text
//! # divergence on R^2
//! n = 2
//! order = 1
//! dim_from = 2
//! dim_to = 1
//! term alpha=(1,0): [[1, 0]]
//! term alpha=(0,1): [[0, 1]]
//! ```
//!
//! Headers come before the first term. Matrices are `dim_to × dim_from` with
//! integer or `p/q` entries. The canonical form lists terms in graded order
//! and writes rationals in lowest terms.

use std::collections::BTreeSet;

use apot_core::diffop::DiffOp;
use apot_core::polymat::{format_rational, parse_rational, MultiIndex, RatMatrix, Rational};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OpFileError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: |alpha| = {found} but order = {order}")]
    Order { line: usize, found: u32, order: u32 },
    #[error("line {line}: coefficient is {got_rows}x{got_cols}, expected {rows}x{cols}")]
    Shape {
        line: usize,
        rows: usize,
        cols: usize,
        got_rows: usize,
        got_cols: usize,
    },
    #[error("missing header `{0}`")]
    MissingHeader(&'static str),
}

const HEADERS: [&str; 4] = ["n", "order", "dim_from", "dim_to"];

pub fn parse_operator(text: &str) -> Result<DiffOp, OpFileError> {
    let mut header: [Option<usize>; 4] = [None; 4];
    let mut terms = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let malformed = |message: String| OpFileError::Malformed { line, message };
        if let Some(rest) = content.strip_prefix("term") {
            let dims = header_values(&header).map_err(|h| malformed(format!("term before header `{h}`")))?;
            let (alpha, matrix) = parse_term(rest.trim()).map_err(malformed)?;
            let [n, order, dim_from, dim_to] = dims;
            if alpha.len() != n {
                return Err(malformed(format!("alpha has {} entries, n = {n}", alpha.len())));
            }
            let found: u32 = alpha.iter().sum();
            if found as usize != order {
                return Err(OpFileError::Order {
                    line,
                    found,
                    order: order as u32,
                });
            }
            let got_rows = matrix.len();
            let got_cols = matrix.first().map(|r| r.len()).unwrap_or(0);
            if got_rows != dim_to || matrix.iter().any(|r| r.len() != dim_from) {
                return Err(OpFileError::Shape {
                    line,
                    rows: dim_to,
                    cols: dim_from,
                    got_rows,
                    got_cols,
                });
            }
            if !seen.insert(alpha.clone()) {
                return Err(malformed(format!("duplicate term for alpha {}", MultiIndex::new(alpha))));
            }
            terms.push((MultiIndex::new(alpha), RatMatrix::new(dim_to, dim_from, matrix.concat())));
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| malformed(format!("expected `key = value` or a term, found `{content}`")))?;
        let key = key.trim();
        let slot = HEADERS
            .iter()
            .position(|h| *h == key)
            .ok_or_else(|| malformed(format!("unknown header `{key}`")))?;
        if !terms.is_empty() {
            return Err(malformed(format!("header `{key}` after the first term")));
        }
        if header[slot].is_some() {
            return Err(malformed(format!("header `{key}` repeated")));
        }
        let value: usize = value
            .trim()
            .parse()
            .map_err(|_| malformed(format!("`{key}` must be a nonnegative integer")))?;
        header[slot] = Some(value);
    }
    let [n, order, dim_from, dim_to] = header_values(&header).map_err(OpFileError::MissingHeader)?;
    DiffOp::new(n, order as u32, dim_from, dim_to, terms).map_err(|e| OpFileError::Malformed {
        line: 0,
        message: e.to_string(),
    })
}

fn header_values(header: &[Option<usize>; 4]) -> Result<[usize; 4], &'static str> {
    let mut out = [0; 4];
    for (i, h) in header.iter().enumerate() {
        out[i] = h.ok_or(HEADERS[i])?;
    }
    Ok(out)
}

fn parse_term(rest: &str) -> Result<(Vec<u32>, Vec<Vec<Rational>>), String> {
    let rest = rest
        .strip_prefix("alpha")
        .map(str::trim_start)
        .and_then(|r| r.strip_prefix('='))
        .ok_or("expected `alpha=(...)` after `term`")?
        .trim_start();
    let rest = rest.strip_prefix('(').ok_or("alpha must be parenthesized")?;
    let (inside, rest) = rest.split_once(')').ok_or("unclosed alpha")?;
    let alpha = inside
        .split(',')
        .map(|s| s.trim().parse::<u32>().map_err(|_| format!("bad alpha entry `{}`", s.trim())))
        .collect::<Result<Vec<_>, _>>()?;
    let rest = rest.trim_start().strip_prefix(':').ok_or("expected `:` after alpha")?;
    Ok((alpha, parse_matrix(rest.trim())?))
}

fn parse_matrix(text: &str) -> Result<Vec<Vec<Rational>>, String> {
    let inner = text
        .strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .ok_or("matrix must be written [[...], ...]")?
        .trim();
    let mut rows = Vec::new();
    let mut rest = inner;
    while !rest.is_empty() {
        let body = rest.strip_prefix('[').ok_or("matrix rows must be bracketed")?;
        let (row, tail) = body.split_once(']').ok_or("unclosed matrix row")?;
        let entries = row
            .split(',')
            .map(|s| parse_rational(s).ok_or_else(|| format!("bad rational `{}`", s.trim())))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(entries);
        rest = tail.trim_start();
        if let Some(t) = rest.strip_prefix(',') {
            rest = t.trim_start();
            if rest.is_empty() {
                return Err("trailing comma in matrix".into());
            }
        } else if !rest.is_empty() {
            return Err(format!("unexpected `{rest}` in matrix"));
        }
    }
    if rows.is_empty() {
        return Err("empty matrix".into());
    }
    Ok(rows)
}

pub fn write_operator(op: &DiffOp) -> String {
    let mut out = format!(
        "n = {}\norder = {}\ndim_from = {}\ndim_to = {}\n",
        op.n(),
        op.order(),
        op.dim_from(),
        op.dim_to()
    );
    for (alpha, m) in op.coeffs() {
        let rows: Vec<String> = (0..m.rows())
            .map(|i| {
                let row: Vec<String> = (0..m.cols()).map(|j| format_rational(m.get(i, j))).collect();
                format!("[{}]", row.join(", "))
            })
            .collect();
        out.push_str(&format!("term alpha={alpha}: [{}]\n", rows.join(", ")));
    }
    out
}
