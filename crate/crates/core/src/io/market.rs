//! Matrix Market `array` and `coordinate` files with real or integer fields
//! and general symmetry.

use std::io::{BufRead, Write};

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::io::{parse_error, tokens};
use crate::tensor::{cmp_canonical, SparseTensor};

#[derive(Debug, Clone, PartialEq)]
pub enum MarketData {
    Dense(Array2<f64>),
    Sparse(SparseTensor<f64>),
}

impl MarketData {
    pub fn into_dense(self) -> Result<Array2<f64>> {
        match self {
            Self::Dense(m) => Ok(m),
            Self::Sparse(s) => s.to_dense()?.to_matrix(),
        }
    }
}

pub fn read_matrix_market<R: BufRead>(reader: R) -> Result<MarketData> {
    let mut lines = reader.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, banner) = lines
        .next()
        .ok_or_else(|| parse_error(1, 1, "empty file"))?;
    let banner = banner?;
    let words: Vec<String> = banner
        .split_ascii_whitespace()
        .map(str::to_ascii_lowercase)
        .collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(parse_error(
            1,
            1,
            "expected `%%MatrixMarket matrix <format> <field> <symmetry>`",
        ));
    }
    let coordinate = match words[2].as_str() {
        "array" => false,
        "coordinate" => true,
        other => return Err(parse_error(1, 1, format!("unsupported format `{other}`"))),
    };
    if !matches!(words[3].as_str(), "real" | "integer" | "double") {
        return Err(parse_error(
            1,
            1,
            format!("unsupported field `{}`", words[3]),
        ));
    }
    if words[4] != "general" {
        return Err(parse_error(
            1,
            1,
            format!("unsupported symmetry `{}`", words[4]),
        ));
    }

    let mut body = lines.filter_map(|(n, l)| match l {
        Ok(l) => {
            let t = l.trim_start();
            if t.is_empty() || t.starts_with('%') {
                None
            } else {
                Some(Ok((n, l)))
            }
        }
        Err(e) => Some(Err(e)),
    });
    let (size_line, size) = body
        .next()
        .transpose()?
        .ok_or_else(|| parse_error(2, 1, "missing size line"))?;
    let size_toks: Vec<(usize, &str)> = tokens(&size).collect();
    let want = if coordinate { 3 } else { 2 };
    if size_toks.len() != want {
        return Err(parse_error(
            size_line,
            1,
            format!("size line needs {want} fields"),
        ));
    }
    let sizes = size_toks
        .iter()
        .map(|&(c, t)| {
            t.parse::<usize>()
                .map_err(|_| parse_error(size_line, c, format!("bad size `{t}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    let (m, n) = (sizes[0], sizes[1]);
    if m == 0 || n == 0 {
        return Err(parse_error(size_line, 1, "matrix sizes must be positive"));
    }

    if !coordinate {
        let mut values = Vec::with_capacity(m * n);
        for item in body {
            let (ln, line) = item?;
            for (c, t) in tokens(&line) {
                values.push(parse_value(t, ln, c)?);
            }
        }
        if values.len() != m * n {
            return Err(parse_error(
                size_line,
                1,
                format!("expected {} values, found {}", m * n, values.len()),
            ));
        }
        // Column-major on disk.
        let mat = Array2::from_shape_vec((n, m), values)
            .map_err(|e| Error::InvalidTensor(e.to_string()))?
            .reversed_axes()
            .as_standard_layout()
            .to_owned();
        return Ok(MarketData::Dense(mat));
    }

    let nnz = sizes[2];
    let mut entries: Vec<(Vec<usize>, f64, usize)> = Vec::with_capacity(nnz);
    for item in body {
        let (ln, line) = item?;
        let toks: Vec<(usize, &str)> = tokens(&line).collect();
        if toks.len() != 3 {
            return Err(parse_error(ln, 1, "expected `row column value`"));
        }
        let mut idx = Vec::with_capacity(2);
        for (&(c, t), bound) in toks[..2].iter().zip([m, n]) {
            match t.parse::<usize>() {
                Ok(i) if i >= 1 && i <= bound => idx.push(i - 1),
                _ => return Err(parse_error(ln, c, format!("bad index `{t}`"))),
            }
        }
        entries.push((idx, parse_value(toks[2].1, ln, toks[2].0)?, ln));
    }
    if entries.len() != nnz {
        return Err(parse_error(
            size_line,
            1,
            format!("size line declares {nnz} entries, found {}", entries.len()),
        ));
    }
    entries.sort_by(|a, b| cmp_canonical(&a.0, &b.0).then(a.2.cmp(&b.2)));
    for pair in entries.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(Error::DuplicateIndex {
                line: pair[1].2,
                first_line: pair[0].2,
            });
        }
    }
    let t = SparseTensor::new(
        vec![m, n],
        entries.into_iter().map(|(i, v, _)| (i, v)).collect(),
    )?;
    Ok(MarketData::Sparse(t))
}

fn parse_value(tok: &str, line: usize, col: usize) -> Result<f64> {
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(parse_error(line, col, format!("bad value `{tok}`"))),
    }
}

pub fn write_matrix_market_array<W: Write>(w: &mut W, m: ArrayView2<'_, f64>) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix array real general")?;
    writeln!(w, "{} {}", m.nrows(), m.ncols())?;
    for col in m.columns() {
        for v in col {
            writeln!(w, "{v:?}")?;
        }
    }
    Ok(())
}

pub fn write_matrix_market_coordinate<W: Write>(w: &mut W, t: &SparseTensor<f64>) -> Result<()> {
    if t.order() != 2 {
        return Err(Error::InvalidTensor(format!(
            "Matrix Market holds matrices, got a {}-way tensor",
            t.order()
        )));
    }
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", t.dims()[0], t.dims()[1], t.nnz())?;
    for (idx, v) in t.iter() {
        writeln!(w, "{} {} {v:?}", idx[0] + 1, idx[1] + 1)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn dense_round_trip() {
        let m = array![[1.0, 2.5], [-3.0, 0.1 + 0.2]];
        let mut buf = Vec::new();
        write_matrix_market_array(&mut buf, m.view()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("2 2\n1.0\n-3.0\n2.5\n"));
        assert_eq!(
            read_matrix_market(buf.as_slice()).unwrap(),
            MarketData::Dense(m)
        );
    }

    #[test]
    fn coordinate_round_trip() {
        let t = SparseTensor::new(vec![3, 2], vec![(vec![2, 1], 4.0), (vec![0, 0], -1.0)]).unwrap();
        let mut buf = Vec::new();
        write_matrix_market_coordinate(&mut buf, &t).unwrap();
        assert_eq!(
            read_matrix_market(buf.as_slice()).unwrap(),
            MarketData::Sparse(t)
        );
    }

    #[test]
    fn rejects_bad_headers_and_counts() {
        assert!(read_matrix_market(
            "%%MatrixMarket matrix array complex general\n1 1\n1\n".as_bytes()
        )
        .is_err());
        assert!(read_matrix_market(
            "%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n".as_bytes()
        )
        .is_err());
        let dup = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n1 1 2\n";
        assert!(matches!(
            read_matrix_market(dup.as_bytes()),
            Err(Error::DuplicateIndex {
                line: 4,
                first_line: 3
            })
        ));
    }

    #[test]
    fn integer_field_and_comments() {
        let text = "%%MatrixMarket matrix array integer general\n% c\n1 2\n3\n4\n";
        assert_eq!(
            read_matrix_market(text.as_bytes()).unwrap(),
            MarketData::Dense(array![[3.0, 4.0]])
        );
    }
}
