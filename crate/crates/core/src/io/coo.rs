//! Coordinate text format: a header `N n_1 … n_N`, then `i_1 … i_N value`
//! per line with 1-based indices. Blank lines and lines starting with `#` or
//! `%` are skipped.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::io::{parse_error, tokens};
use crate::tensor::cmp_canonical;
use crate::tensor::SparseTensor;

pub fn read_coo<R: BufRead>(reader: R) -> Result<SparseTensor<f64>> {
    let mut dims: Option<Vec<usize>> = None;
    let mut entries: Vec<(Vec<usize>, f64, usize)> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let trimmed = line.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with('%') {
            continue;
        }
        let toks: Vec<(usize, &str)> = tokens(&line).collect();
        match &dims {
            None => dims = Some(parse_header(&toks, lineno)?),
            Some(d) => {
                let n = d.len();
                if toks.len() != n + 1 {
                    let col = toks.get(n + 1).or(toks.last()).map_or(1, |t| t.0);
                    return Err(parse_error(
                        lineno,
                        col,
                        format!(
                            "expected {} indices and a value, found {} fields",
                            n,
                            toks.len()
                        ),
                    ));
                }
                let mut idx = Vec::with_capacity(n);
                for (m, &(col, tok)) in toks[..n].iter().enumerate() {
                    let i: usize = tok
                        .parse()
                        .map_err(|_| parse_error(lineno, col, format!("bad index `{tok}`")))?;
                    if i == 0 || i > d[m] {
                        return Err(parse_error(
                            lineno,
                            col,
                            format!("index {i} outside 1..={} for mode {}", d[m], m + 1),
                        ));
                    }
                    idx.push(i - 1);
                }
                let (col, tok) = toks[n];
                let v: f64 = tok
                    .parse()
                    .map_err(|_| parse_error(lineno, col, format!("bad value `{tok}`")))?;
                if !v.is_finite() {
                    return Err(parse_error(lineno, col, "value is not finite"));
                }
                entries.push((idx, v, lineno));
            }
        }
    }
    let dims = dims.ok_or_else(|| parse_error(1, 1, "missing header line"))?;
    entries.sort_by(|a, b| cmp_canonical(&a.0, &b.0).then(a.2.cmp(&b.2)));
    for pair in entries.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(Error::DuplicateIndex {
                line: pair[1].2,
                first_line: pair[0].2,
            });
        }
    }
    SparseTensor::new(dims, entries.into_iter().map(|(i, v, _)| (i, v)).collect())
}

fn parse_header(toks: &[(usize, &str)], lineno: usize) -> Result<Vec<usize>> {
    let (col, first) = toks[0];
    let n: usize = first
        .parse()
        .map_err(|_| parse_error(lineno, col, format!("bad order `{first}`")))?;
    if n < 2 {
        return Err(parse_error(lineno, col, "order must be at least 2"));
    }
    if toks.len() != n + 1 {
        let col = toks.last().map_or(col, |t| t.0);
        return Err(parse_error(
            lineno,
            col,
            format!(
                "header declares {n} modes but lists {} sizes",
                toks.len() - 1
            ),
        ));
    }
    toks[1..]
        .iter()
        .map(|&(col, tok)| match tok.parse::<usize>() {
            Ok(v) if v > 0 => Ok(v),
            _ => Err(parse_error(lineno, col, format!("bad mode size `{tok}`"))),
        })
        .collect()
}

/// Values use the shortest representation that parses back to the same bits.
pub fn write_coo<W: Write>(w: &mut W, t: &SparseTensor<f64>) -> Result<()> {
    write!(w, "{}", t.order())?;
    for n in t.dims() {
        write!(w, " {n}")?;
    }
    writeln!(w)?;
    for (idx, v) in t.iter() {
        for i in idx {
            write!(w, "{} ", i + 1)?;
        }
        writeln!(w, "{v:?}")?;
    }
    Ok(())
}
