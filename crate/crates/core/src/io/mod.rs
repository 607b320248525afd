//! File formats and run configuration.

mod binary;
mod config;
mod coo;
mod factors;
mod market;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{DenseTensor, TensorData};

pub use binary::{read_dense_binary, write_dense_binary};
pub use config::{CompletionRunConfig, DictRunConfig, GridPoint, InputSpec, OutputSpec, RunConfig};
pub use coo::{read_coo, write_coo};
pub use factors::{config_hash, load_factors, save_factors, FactorFormat, Manifest};
pub use market::{
    read_matrix_market, write_matrix_market_array, write_matrix_market_coordinate, MarketData,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TensorFormat {
    Coo,
    MatrixMarket,
    DenseBinary,
}

impl TensorFormat {
    /// Guess from the file extension: `.mtx` Matrix Market, `.bin`/`.ffd`
    /// dense binary, anything else COO text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("mtx") => Self::MatrixMarket,
            Some("bin") | Some("ffd") => Self::DenseBinary,
            _ => Self::Coo,
        }
    }
}

pub fn load_tensor(path: &Path, format: TensorFormat) -> Result<TensorData<f64>> {
    let file = File::open(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })?;
    let reader = BufReader::new(file);
    match format {
        TensorFormat::Coo => Ok(TensorData::Sparse(read_coo(reader)?)),
        TensorFormat::MatrixMarket => Ok(match read_matrix_market(reader)? {
            MarketData::Dense(m) => TensorData::Dense(DenseTensor::from_matrix(&m)?),
            MarketData::Sparse(s) => TensorData::Sparse(s),
        }),
        TensorFormat::DenseBinary => Ok(TensorData::Dense(read_dense_binary(reader)?)),
    }
}

/// Dense data written as COO lists every entry; sparse data written as dense
/// binary is densified.
pub fn save_tensor(t: &TensorData<f64>, path: &Path, format: TensorFormat) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    match (format, t) {
        (TensorFormat::Coo, TensorData::Sparse(s)) => write_coo(&mut w, s)?,
        (TensorFormat::Coo, TensorData::Dense(d)) => {
            write_coo(&mut w, &crate::tensor::SparseTensor::from_dense(d))?
        }
        (TensorFormat::MatrixMarket, TensorData::Sparse(s)) => {
            write_matrix_market_coordinate(&mut w, s)?
        }
        (TensorFormat::MatrixMarket, TensorData::Dense(d)) => {
            write_matrix_market_array(&mut w, d.to_matrix()?.view())?
        }
        (TensorFormat::DenseBinary, t) => write_dense_binary(&mut w, &t.to_dense()?)?,
    }
    w.flush()?;
    Ok(())
}

/// Splits on ASCII whitespace, keeping the 1-based byte column of each token.
pub(crate) fn tokens(line: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut rest = line;
    let mut offset = 0;
    std::iter::from_fn(move || {
        let start = rest.find(|c: char| !c.is_ascii_whitespace())?;
        let tail = &rest[start..];
        let len = tail
            .find(|c: char| c.is_ascii_whitespace())
            .unwrap_or(tail.len());
        let col = offset + start + 1;
        offset += start + len;
        rest = &tail[len..];
        Some((col, &tail[..len]))
    })
}

pub(crate) fn parse_error(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}
