use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::smo::{self, Problem};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::preprocess::PixelMatrix;

/// A resolved kernel function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

/// Kernel as configured; an RBF gamma of `None` is derived from the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum KernelSpec {
    Linear,
    Rbf { gamma: Option<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub kernel: KernelSpec,
    pub c: f64,
    /// KKT violation tolerance.
    pub tolerance: f64,
    /// SMO step cap per binary problem.
    pub max_iterations: usize,
    /// Kernel row cache budget per binary problem, in MiB.
    pub cache_mb: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            kernel: KernelSpec::Rbf { gamma: None },
            c: 1.0,
            tolerance: 1e-3,
            max_iterations: 1_000_000,
            cache_mb: 100,
        }
    }
}

impl SvmConfig {
    fn validate(&self) -> Result<()> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "SVM C must be positive, got {}",
                self.c
            )));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::InvalidParameter(
                "SVM tolerance must be positive".into(),
            ));
        }
        if let KernelSpec::Rbf { gamma: Some(g) } = self.kernel {
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "RBF gamma must be positive, got {g}"
                )));
            }
        }
        Ok(())
    }

    /// Fills in a data-dependent gamma.
    pub fn resolve_kernel(&self, features: &PixelMatrix) -> Kernel {
        match self.kernel {
            KernelSpec::Linear => Kernel::Linear,
            KernelSpec::Rbf { gamma: Some(gamma) } => Kernel::Rbf { gamma },
            KernelSpec::Rbf { gamma: None } => Kernel::Rbf {
                gamma: default_gamma(features),
            },
        }
    }
}

/// `1 / (d · mean per-feature variance)`, falling back to `1 / d` for
/// constant features.
pub fn default_gamma(features: &PixelMatrix) -> f64 {
    let (n, d) = (features.n_pixels(), features.n_bands());
    if n == 0 {
        return 1.0 / d as f64;
    }
    let mut total = 0.0;
    for b in 0..d {
        let col = features.column(b);
        let mean = col.iter().sum::<f64>() / n as f64;
        total += col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    }
    let mean_var = total / d as f64;
    if mean_var > 0.0 {
        1.0 / (d as f64 * mean_var)
    } else {
        1.0 / d as f64
    }
}

/// One class-vs-rest decision function over the shared support vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryModel {
    pub label: u16,
    /// Indices into [`SvmModel::support_vectors`].
    pub sv_index: Vec<usize>,
    /// `α_i · y_i` for each listed support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// One-vs-rest SVM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub classes: Vec<u16>,
    pub kernel: Kernel,
    pub c: f64,
    pub tolerance: f64,
    pub n_features: usize,
    pub n_support: usize,
    /// `n_support × n_features`, row-major; stored in the sibling raw file.
    #[serde(skip)]
    pub support_vectors: Vec<f64>,
    pub binary: Vec<BinaryModel>,
}

impl SvmModel {
    pub fn converged(&self) -> bool {
        self.binary.iter().all(|b| b.converged)
    }

    fn support_vector(&self, s: usize) -> &[f64] {
        &self.support_vectors[s * self.n_features..(s + 1) * self.n_features]
    }

    /// `f_c(x)` for every class, in `classes` order.
    pub fn decision_values(&self, x: &[f64]) -> Vec<f64> {
        let k: Vec<f64> = (0..self.n_support)
            .map(|s| self.kernel.eval(self.support_vector(s), x))
            .collect();
        self.binary
            .iter()
            .map(|b| {
                let mut f = 0.0;
                for (&s, &a) in b.sv_index.iter().zip(&b.dual_coef) {
                    f += a * k[s];
                }
                f + b.bias
            })
            .collect()
    }

    /// Highest decision value wins; ties go to the lowest label.
    pub fn predict_one(&self, x: &[f64]) -> u16 {
        let f = self.decision_values(x);
        let mut best = 0;
        for c in 1..f.len() {
            if f[c] > f[best] {
                best = c;
            }
        }
        self.classes[best]
    }

    /// JSON header at `path`, support vectors as little-endian f64 in the
    /// sibling `.raw` file.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json + "\n").map_err(|e| Error::io(path, e))?;
        let raw = path.with_extension("raw");
        let bytes: Vec<u8> = self
            .support_vectors
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect();
        fs::write(&raw, bytes).map_err(|e| Error::io(&raw, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut model: SvmModel = serde_json::from_str(&text)?;
        let raw = path.with_extension("raw");
        let bytes = fs::read(&raw).map_err(|e| Error::io(&raw, e))?;
        let expected = (model.n_support * model.n_features * 8) as u64;
        if bytes.len() as u64 != expected {
            return Err(Error::RawSize {
                path: raw,
                expected,
                actual: bytes.len() as u64,
            });
        }
        model.support_vectors = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let bad_index = model
            .binary
            .iter()
            .flat_map(|b| &b.sv_index)
            .any(|&s| s >= model.n_support);
        if bad_index || model.binary.len() != model.classes.len() {
            return Err(Error::header(path, "inconsistent SVM model"));
        }
        Ok(model)
    }
}

/// Trains one binary SVM per class (class vs rest).
pub fn svm_train(features: &PixelMatrix, labels: &[u16], config: &SvmConfig) -> Result<SvmModel> {
    svm_train_with(features, labels, config, Execution::default())
}

pub fn svm_train_with(
    features: &PixelMatrix,
    labels: &[u16],
    config: &SvmConfig,
    exec: Execution,
) -> Result<SvmModel> {
    config.validate()?;
    if labels.len() != features.n_pixels() {
        return Err(Error::LengthMismatch {
            left: labels.len(),
            right: features.n_pixels(),
        });
    }
    if let Some(p) = features.values().iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!(
            "non-finite feature at row {}",
            p / features.n_bands()
        )));
    }
    let classes: Vec<u16> = labels
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if classes.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "SVM training needs at least 2 classes, found {}",
            classes.len()
        )));
    }

    let kernel = config.resolve_kernel(features);
    let d = features.n_bands();
    let solutions = exec.map_range(classes.len(), |c| {
        let y: Vec<f64> = labels
            .iter()
            .map(|&l| if l == classes[c] { 1.0 } else { -1.0 })
            .collect();
        let problem = Problem {
            x: features.values(),
            d,
            y: &y,
            kernel,
            c: config.c,
            tolerance: config.tolerance,
            max_iterations: config.max_iterations,
            cache_bytes: config.cache_mb << 20,
        };
        (smo::solve(&problem), y)
    });

    // Union of support vectors across classes, in training-row order.
    let used: BTreeSet<usize> = solutions
        .iter()
        .flat_map(|(s, _)| (0..s.alpha.len()).filter(|&i| s.alpha[i] > 0.0))
        .collect();
    let mut slot = vec![usize::MAX; features.n_pixels()];
    let mut support_vectors = Vec::with_capacity(used.len() * d);
    for (k, &row) in used.iter().enumerate() {
        slot[row] = k;
        support_vectors.extend_from_slice(features.row(row));
    }

    let binary = solutions
        .into_iter()
        .zip(&classes)
        .map(|((sol, y), &label)| {
            let rows: Vec<usize> = (0..sol.alpha.len())
                .filter(|&i| sol.alpha[i] > 0.0)
                .collect();
            BinaryModel {
                label,
                sv_index: rows.iter().map(|&i| slot[i]).collect(),
                dual_coef: rows.iter().map(|&i| sol.alpha[i] * y[i]).collect(),
                bias: -sol.rho,
                iterations: sol.iterations,
                converged: sol.converged,
            }
        })
        .collect();

    Ok(SvmModel {
        classes,
        kernel,
        c: config.c,
        tolerance: config.tolerance,
        n_features: d,
        n_support: used.len(),
        support_vectors,
        binary,
    })
}

pub fn svm_predict(model: &SvmModel, features: &PixelMatrix) -> Result<Vec<u16>> {
    svm_predict_with(model, features, Execution::default())
}

pub fn svm_predict_with(
    model: &SvmModel,
    features: &PixelMatrix,
    exec: Execution,
) -> Result<Vec<u16>> {
    if features.n_bands() != model.n_features {
        return Err(Error::Dimension(format!(
            "model expects {} features, got {}",
            model.n_features,
            features.n_bands()
        )));
    }
    Ok(exec.map_range(features.n_pixels(), |p| model.predict_one(features.row(p))))
}
