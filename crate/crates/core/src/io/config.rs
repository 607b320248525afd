//! TOML run configurations for the CLI subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::driver::ProblemConfig;
use crate::error::{Error, Result};
use crate::harness::{ClampSpec, DictSpec, SplitSpec};
use crate::io::{load_tensor, FactorFormat, TensorFormat};
use crate::loss::{LossSpec, MaskSource};
use crate::tensor::{Dataset, TensorData};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub path: PathBuf,
    /// Inferred from the extension when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<TensorFormat>,
}

impl InputSpec {
    pub fn format(&self) -> TensorFormat {
        self.format
            .unwrap_or_else(|| TensorFormat::from_path(&self.path))
    }

    pub fn load(&self) -> Result<TensorData<f64>> {
        load_tensor(&self.path, self.format())
    }

    /// Loads the data and attaches the observation mask the loss asks for.
    pub fn load_dataset(&self, loss: &LossSpec) -> Result<Dataset<f64>> {
        let t = self.load()?;
        match (t, loss) {
            (
                TensorData::Dense(d),
                LossSpec::Missing {
                    mask_source: MaskSource::NanEntries,
                },
            ) => Dataset::dense_nan_missing(d),
            (TensorData::Dense(d), _) if d.values().iter().any(|v| !v.is_finite()) => {
                Err(Error::NonFinite("input tensor"))
            }
            (t, _) => Ok(Dataset::new(t)),
        }
    }
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
    /// Progress line on stderr every this many outer iterations (0: quiet).
    #[serde(default)]
    pub log_every: usize,
    #[serde(default)]
    pub factor_format: FactorFormat,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: default_out(),
            log_every: 0,
            factor_format: FactorFormat::MatrixMarket,
        }
    }
}

/// Configuration of `fit` and `eval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: InputSpec,
    #[serde(default)]
    pub output: OutputSpec,
    pub problem: ProblemConfig,
    /// Fraction of the outer budget spent on a least-squares warm-up.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub two_stage: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPoint {
    pub name: String,
    pub problem: ProblemConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub two_stage: Option<f64>,
}

/// Configuration of `complete`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompletionRunConfig {
    pub input: InputSpec,
    #[serde(default)]
    pub output: OutputSpec,
    pub split: SplitSpec,
    #[serde(default)]
    pub clamp: ClampSpec,
    pub grid: Vec<GridPoint>,
}

/// Configuration of `dictlearn`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictRunConfig {
    pub input: InputSpec,
    #[serde(default)]
    pub output: OutputSpec,
    pub dict: DictSpec,
}

trait HasPaths {
    fn paths(&mut self) -> Vec<&mut PathBuf>;
}

impl HasPaths for RunConfig {
    fn paths(&mut self) -> Vec<&mut PathBuf> {
        vec![&mut self.input.path, &mut self.output.dir]
    }
}

impl HasPaths for CompletionRunConfig {
    fn paths(&mut self) -> Vec<&mut PathBuf> {
        vec![&mut self.input.path, &mut self.output.dir]
    }
}

impl HasPaths for DictRunConfig {
    fn paths(&mut self) -> Vec<&mut PathBuf> {
        vec![&mut self.input.path, &mut self.output.dir]
    }
}

fn parse<C: DeserializeOwned>(text: &str, origin: &Path) -> Result<C> {
    toml::from_str(text).map_err(|e| Error::Config(format!("{}: {e}", origin.display())))
}

/// Reads a config file; relative paths inside it are taken relative to the
/// file's directory.
fn read_config<C: DeserializeOwned + HasPaths>(path: &Path) -> Result<C> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg: C = parse(&text, path)?;
    let base = path.parent().unwrap_or(Path::new(""));
    for p in cfg.paths() {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    Ok(cfg)
}

fn to_toml<C: Serialize>(cfg: &C) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::Config(e.to_string()))
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let mut cfg: Self = read_config(path)?;
        if let crate::driver::InitSpec::Provided(dir) = &mut cfg.problem.init {
            let p = Path::new(dir.as_str());
            if p.is_relative() {
                *dir = path
                    .parent()
                    .unwrap_or(Path::new(""))
                    .join(p)
                    .to_string_lossy()
                    .into_owned();
            }
        }
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        parse(text, Path::new("<string>"))
    }

    pub fn to_toml(&self) -> Result<String> {
        to_toml(self)
    }
}

impl CompletionRunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        read_config(path)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        parse(text, Path::new("<string>"))
    }

    pub fn to_toml(&self) -> Result<String> {
        to_toml(self)
    }
}

impl DictRunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        read_config(path)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        parse(text, Path::new("<string>"))
    }

    pub fn to_toml(&self) -> Result<String> {
        to_toml(self)
    }
}
