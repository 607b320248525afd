//! Factor sets on disk: one file per mode plus `manifest.json`.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::driver::ProblemConfig;
use crate::error::{Error, Result};
use crate::io::{parse_error, read_matrix_market, tokens, write_matrix_market_array};
use crate::scalar::Scalar;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FactorFormat {
    #[default]
    MatrixMarket,
    /// Comma-separated rows, same `{:?}` value formatting.
    Csv,
}

impl FactorFormat {
    fn extension(self) -> &'static str {
        match self {
            Self::MatrixMarket => "mtx",
            Self::Csv => "csv",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dims: Vec<usize>,
    pub rank: usize,
    pub seed: u64,
    pub config_hash: String,
    pub format: FactorFormat,
    pub files: Vec<String>,
}

/// SHA-256 of the configuration's canonical JSON form.
pub fn config_hash(cfg: &ProblemConfig) -> String {
    let json = serde_json::to_vec(cfg).expect("configs always serialize");
    hex::encode(Sha256::digest(&json))
}

pub fn save_factors<T: Scalar>(
    factors: &[Array2<T>],
    cfg: &ProblemConfig,
    dir: &Path,
    format: FactorFormat,
) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::with_capacity(factors.len());
    for (d, h) in factors.iter().enumerate() {
        let name = format!("mode_{}.{}", d + 1, format.extension());
        let h64 = h.mapv(|v| v.as_f64());
        let mut w = BufWriter::new(File::create(dir.join(&name))?);
        match format {
            FactorFormat::MatrixMarket => write_matrix_market_array(&mut w, h64.view())?,
            FactorFormat::Csv => write_csv(&mut w, &h64)?,
        }
        w.flush()?;
        files.push(name);
    }
    let manifest = Manifest {
        dims: factors.iter().map(|h| h.nrows()).collect(),
        rank: factors.first().map_or(0, |h| h.ncols()),
        seed: cfg.seed,
        config_hash: config_hash(cfg),
        format,
        files,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(dir.join(MANIFEST), json + "\n")?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn load_factors(dir: &Path) -> Result<Vec<Array2<f64>>> {
    let manifest = read_manifest(dir)?;
    let mut out = Vec::with_capacity(manifest.files.len());
    for (d, name) in manifest.files.iter().enumerate() {
        let path = dir.join(name);
        let file = File::open(&path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let reader = BufReader::new(file);
        let h = match manifest.format {
            FactorFormat::MatrixMarket => read_matrix_market(reader)?.into_dense()?,
            FactorFormat::Csv => read_csv(reader)?,
        };
        if h.dim() != (manifest.dims[d], manifest.rank) {
            return Err(Error::DimensionMismatch(format!(
                "{name} is {:?}, manifest says {}x{}",
                h.dim(),
                manifest.dims[d],
                manifest.rank
            )));
        }
        out.push(h);
    }
    Ok(out)
}

fn write_csv<W: Write>(w: &mut W, h: &Array2<f64>) -> Result<()> {
    for row in h.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

fn read_csv<R: BufRead>(reader: R) -> Result<Array2<f64>> {
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (n, line) in reader.lines().enumerate() {
        let line = line?.replace(',', " ");
        let row: Vec<f64> = tokens(&line)
            .map(|(c, t)| {
                t.parse()
                    .map_err(|_| parse_error(n + 1, c, format!("bad value `{t}`")))
            })
            .collect::<Result<_>>()?;
        if row.is_empty() {
            continue;
        }
        if *cols.get_or_insert(row.len()) != row.len() {
            return Err(parse_error(n + 1, 1, "ragged row"));
        }
        values.extend(row);
        rows += 1;
    }
    Array2::from_shape_vec((rows, cols.unwrap_or(0)), values)
        .map_err(|e| Error::InvalidTensor(e.to_string()))
}
