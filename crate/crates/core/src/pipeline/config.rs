use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::bandcorr::DEFAULT_THRESHOLD;
use crate::classify::{KernelSpec, SvmConfig, DEFAULT_TRAIN_FRACTION};
use crate::error::{Error, Result};
use crate::kv;

pub const DEFAULT_PCA_K: usize = 5;
pub const DEFAULT_SEED: u64 = 42;

/// Feature reduction applied before classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Average-band-correlation threshold selection.
    Abc,
    Pca,
    /// Greedy dissimilarity selection with as many bands as `Abc` keeps.
    Sb,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Pca, Method::Sb, Method::Abc];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Abc => "abc",
            Method::Pca => "pca",
            Method::Sb => "sb",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "abc" => Ok(Method::Abc),
            "pca" => Ok(Method::Pca),
            "sb" => Ok(Method::Sb),
            other => Err(Error::InvalidParameter(format!("unknown method `{other}`"))),
        }
    }
}

/// Every knob of a run. Built from defaults, then a config file, then
/// command-line overrides, all through [`RunConfig::set`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub cube: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    pub method: Method,
    pub threshold: f64,
    pub pca_k: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub svm: SvmConfig,
    pub svm_subsample: Option<usize>,
    pub out_dir: PathBuf,
    pub emit_correlation_csv: bool,
    pub full_map: bool,
    /// Saved selection to use instead of recomputing ABC selection.
    pub selection: Option<PathBuf>,
    /// Overrides the SB band count (default: ABC selection size).
    pub sb_k: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            cube: None,
            ground_truth: None,
            method: Method::Abc,
            threshold: DEFAULT_THRESHOLD,
            pca_k: DEFAULT_PCA_K,
            train_fraction: DEFAULT_TRAIN_FRACTION,
            seed: DEFAULT_SEED,
            svm: SvmConfig::default(),
            svm_subsample: None,
            out_dir: PathBuf::from("out"),
            emit_correlation_csv: false,
            full_map: false,
            selection: None,
            sb_k: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::InvalidParameter(format!(
            "`{key}`: expected a boolean, got `{value}`"
        ))),
    }
}

fn optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>> {
    match value.to_ascii_lowercase().as_str() {
        "" | "none" | "auto" => Ok(None),
        _ => parse(key, value).map(Some),
    }
}

impl RunConfig {
    /// Reads a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| {
            Error::InvalidParameter(format!("cannot read config {}: {e}", path.display()))
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        let mut config = RunConfig::default();
        for (key, value) in kv::parse(&text)
            .map_err(|m| Error::InvalidParameter(format!("{}: {m}", path.display())))?
        {
            let value = match value.find(" #").or_else(|| value.find("\t#")) {
                Some(i) => &value[..i],
                None => &value,
            };
            config.set_relative(&key, value, base)?;
        }
        Ok(config)
    }

    /// Applies one `key = value` setting. Keys accept `-`, `_` or spaces.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        self.set_relative(key, value, Path::new(""))
    }

    fn set_relative(&mut self, key: &str, value: &str, base: &Path) -> Result<()> {
        let key = key.trim().to_ascii_lowercase().replace(['-', ' '], "_");
        let value = value.trim();
        let path = |v: &str| base.join(v);
        match key.as_str() {
            "cube" => self.cube = Some(path(value)),
            "ground_truth" | "gt" => self.ground_truth = Some(path(value)),
            "method" => self.method = value.parse()?,
            "threshold" => self.threshold = parse(&key, value)?,
            "pca_k" => self.pca_k = parse(&key, value)?,
            "train_fraction" => self.train_fraction = parse(&key, value)?,
            "seed" => self.seed = parse(&key, value)?,
            "kernel" => {
                self.svm.kernel = match value.to_ascii_lowercase().as_str() {
                    "linear" => KernelSpec::Linear,
                    "rbf" => match self.svm.kernel {
                        KernelSpec::Rbf { gamma } => KernelSpec::Rbf { gamma },
                        KernelSpec::Linear => KernelSpec::Rbf { gamma: None },
                    },
                    other => {
                        return Err(Error::InvalidParameter(format!("unknown kernel `{other}`")))
                    }
                }
            }
            "c" => self.svm.c = parse(&key, value)?,
            "gamma" => {
                let gamma = optional(&key, value)?;
                self.svm.kernel = KernelSpec::Rbf { gamma };
            }
            "tolerance" => self.svm.tolerance = parse(&key, value)?,
            "max_iterations" => self.svm.max_iterations = parse(&key, value)?,
            "svm_cache_mb" => self.svm.cache_mb = parse(&key, value)?,
            "svm_subsample" => self.svm_subsample = optional(&key, value)?,
            "out_dir" => self.out_dir = path(value),
            "emit_correlation_csv" => self.emit_correlation_csv = parse_bool(&key, value)?,
            "full_map" => self.full_map = parse_bool(&key, value)?,
            "selection" => self.selection = optional::<PathBuf>(&key, value)?.map(|p| base.join(p)),
            "sb_k" => self.sb_k = optional(&key, value)?,
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "unknown config key `{key}`"
                )))
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.threshold > 0.0 && self.threshold <= 1.0) {
            return bad(format!("threshold {} outside (0, 1]", self.threshold));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!(
                "train fraction {} outside (0, 1)",
                self.train_fraction
            ));
        }
        if self.pca_k == 0 {
            return bad("pca_k must be at least 1".into());
        }
        if self.svm_subsample == Some(0) || self.sb_k == Some(0) {
            return bad("svm_subsample and sb_k must be positive".into());
        }
        Ok(())
    }

    pub(crate) fn cube_path(&self) -> Result<&Path> {
        self.cube
            .as_deref()
            .ok_or_else(|| Error::InvalidParameter("no cube header configured".into()))
    }

    pub(crate) fn ground_truth_path(&self) -> Result<&Path> {
        self.ground_truth
            .as_deref()
            .ok_or_else(|| Error::InvalidParameter("no ground-truth header configured".into()))
    }
}
