//! Comparison methods: PCA feature extraction and a greedy
//! dissimilarity-based band selector.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bandcorr::{
    average_band_correlation, BandSelection, CorrelationMatrix, SelectionMethod,
};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::preprocess::PixelMatrix;

/// Rows per covariance block. Blocks are summed in index order.
const COV_BLOCK: usize = 2048;
const EIGEN_TOLERANCE: f64 = 1e-12;
const EIGEN_MAX_SWEEPS: usize = 10_000;

/// Principal components of a pixel matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub n_bands: usize,
    pub mean: Vec<f64>,
    /// `k × N`, row-major; rows are unit eigenvectors by descending eigenvalue.
    #[serde(skip)]
    pub components: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub total_variance: f64,
    pub cumulative_variance_ratio: f64,
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn component(&self, c: usize) -> &[f64] {
        &self.components[c * self.n_bands..(c + 1) * self.n_bands]
    }

    /// Writes the JSON description to `path` and the component matrix as
    /// little-endian f64 to the sibling `.raw` file.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json + "\n").map_err(|e| Error::io(path, e))?;
        let raw = path.with_extension("raw");
        let bytes: Vec<u8> = self
            .components
            .iter()
            .flat_map(|v| v.to_le_bytes())
            .collect();
        fs::write(&raw, bytes).map_err(|e| Error::io(&raw, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut model: PcaModel = serde_json::from_str(&text)?;
        let raw = path.with_extension("raw");
        let bytes = fs::read(&raw).map_err(|e| Error::io(&raw, e))?;
        let expected = (model.k() * model.n_bands * 8) as u64;
        if bytes.len() as u64 != expected {
            return Err(Error::RawSize {
                path: raw,
                expected,
                actual: bytes.len() as u64,
            });
        }
        model.components = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        if model.mean.len() != model.n_bands {
            return Err(Error::header(path, "mean length does not match n_bands"));
        }
        Ok(model)
    }
}

/// Column means and the sample covariance (`1/(n-1)`) of `pm`, row-major.
pub fn covariance_with(pm: &PixelMatrix, exec: Execution) -> Result<(Vec<f64>, Vec<f64>)> {
    let (n, nb) = (pm.n_pixels(), pm.n_bands());
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let mean: Vec<f64> = exec.map_range(nb, |b| {
        let mut s = 0.0;
        for p in 0..n {
            s += pm.get(p, b);
        }
        s / n as f64
    });

    let n_blocks = n.div_ceil(COV_BLOCK);
    let partials = exec.map_range(n_blocks, |blk| {
        let mut acc = vec![0.0; nb * nb];
        let mut dev = vec![0.0; nb];
        for p in blk * COV_BLOCK..((blk + 1) * COV_BLOCK).min(n) {
            for (d, (v, m)) in dev.iter_mut().zip(pm.row(p).iter().zip(&mean)) {
                *d = v - m;
            }
            for i in 0..nb {
                let di = dev[i];
                let row = &mut acc[i * nb..(i + 1) * nb];
                for j in i..nb {
                    row[j] += di * dev[j];
                }
            }
        }
        acc
    });

    let mut cov = vec![0.0; nb * nb];
    for part in &partials {
        for (c, p) in cov.iter_mut().zip(part) {
            *c += p;
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..nb {
        for j in i..nb {
            let v = cov[i * nb + j] / denom;
            cov[i * nb + j] = v;
            cov[j * nb + i] = v;
        }
    }
    Ok((mean, cov))
}

/// Fits the top-`k` principal components.
pub fn pca_fit(pm: &PixelMatrix, k: usize) -> Result<PcaModel> {
    pca_fit_with(pm, k, Execution::default())
}

pub fn pca_fit_with(pm: &PixelMatrix, k: usize, exec: Execution) -> Result<PcaModel> {
    let nb = pm.n_bands();
    if k == 0 || k > nb {
        return Err(Error::InvalidParameter(format!(
            "PCA needs 1 <= k <= {nb}, got {k}"
        )));
    }
    let (mean, cov) = covariance_with(pm, exec)?;
    let eig = DMatrix::from_row_slice(nb, nb, &cov)
        .try_symmetric_eigen(EIGEN_TOLERANCE, EIGEN_MAX_SWEEPS)
        .ok_or_else(|| Error::Numeric("symmetric eigendecomposition did not converge".into()))?;

    let mut order: Vec<usize> = (0..nb).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let eigenvalues_all: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total_variance: f64 = eigenvalues_all.iter().sum();
    let kept: f64 = eigenvalues_all[..k].iter().sum();
    let cumulative_variance_ratio = if total_variance > 0.0 {
        (kept / total_variance).min(1.0)
    } else {
        1.0
    };

    let mut components = Vec::with_capacity(k * nb);
    for &col in &order[..k] {
        let v = eig.eigenvectors.column(col);
        let mut pivot = 0;
        for i in 1..nb {
            if v[i].abs() > v[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        components.extend(v.iter().map(|x| sign * x));
    }

    Ok(PcaModel {
        n_bands: nb,
        mean,
        components,
        eigenvalues: eigenvalues_all[..k].to_vec(),
        total_variance,
        cumulative_variance_ratio,
    })
}

/// Projects pixels onto the model's components: `(x - mean) · Cᵀ`.
pub fn pca_transform(pm: &PixelMatrix, model: &PcaModel) -> Result<PixelMatrix> {
    if pm.n_bands() != model.n_bands {
        return Err(Error::Dimension(format!(
            "PCA model expects {} bands, matrix has {}",
            model.n_bands,
            pm.n_bands()
        )));
    }
    let k = model.k();
    let rows = Execution::default().map_range(pm.n_pixels(), |p| {
        let x = pm.row(p);
        (0..k)
            .map(|c| {
                let mut s = 0.0;
                for ((v, m), w) in x.iter().zip(&model.mean).zip(model.component(c)) {
                    s += (v - m) * w;
                }
                s
            })
            .collect::<Vec<f64>>()
    });
    Ok(pm.with_values(k, rows.concat()))
}

/// Maps component scores back to band space: `scores · C + mean`.
pub fn pca_inverse_transform(scores: &PixelMatrix, model: &PcaModel) -> Result<PixelMatrix> {
    if scores.n_bands() != model.k() {
        return Err(Error::Dimension(format!(
            "expected {} component scores, got {}",
            model.k(),
            scores.n_bands()
        )));
    }
    let nb = model.n_bands;
    let mut values = Vec::with_capacity(scores.n_pixels() * nb);
    for p in 0..scores.n_pixels() {
        let s = scores.row(p);
        values.extend((0..nb).map(|b| {
            let mut v = model.mean[b];
            for (c, sc) in s.iter().enumerate() {
                v += sc * model.components[c * nb + b];
            }
            v
        }));
    }
    Ok(scores.with_values(nb, values))
}

/// Greedy max-min dissimilarity band selection in correlation space.
///
/// Starts from the band with the lowest ABC, then repeatedly adds the band
/// whose smallest dissimilarity `1 - |r|` to the chosen set is largest.
/// Ties go to the lowest band index. This is a stand-in for a
/// similarity-based selector and is tagged `sb-greedy`.
pub fn sb_select(cm: &CorrelationMatrix, k: usize) -> Result<BandSelection> {
    let n = cm.n_bands();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "SB selection needs 1 <= k <= {n}, got {k}"
        )));
    }
    let abc = average_band_correlation(cm);
    let (seed, _) = abc.argmin();
    let mut chosen = vec![false; n];
    let mut order = vec![seed];
    chosen[seed] = true;
    // Smallest dissimilarity from each band to the chosen set.
    let mut nearest: Vec<f64> = (0..n).map(|j| 1.0 - cm.get(seed, j).abs()).collect();

    while order.len() < k {
        let mut best: Option<usize> = None;
        for j in (0..n).filter(|&j| !chosen[j]) {
            if best.is_none_or(|b| nearest[j] > nearest[b]) {
                best = Some(j);
            }
        }
        let pick = best.expect("k <= n leaves a candidate");
        chosen[pick] = true;
        order.push(pick);
        for (j, d) in nearest.iter_mut().enumerate() {
            *d = d.min(1.0 - cm.get(pick, j).abs());
        }
    }

    let mut selected = order.clone();
    selected.sort_unstable();
    let mut sel = BandSelection::new(SelectionMethod::SbGreedy, n, selected)?;
    sel.abc = Some(abc);
    sel.params.insert("k".into(), k as f64);
    sel.params.insert("seed_band".into(), seed as f64);
    Ok(sel)
}
