//! Background removal and per-band standardization.

use serde::{Deserialize, Serialize};

use crate::cube::{check_pair, GroundTruthMap, HyperspectralCube};
use crate::error::{Error, Result};
use crate::exec::Execution;

/// Labeled pixels as an `n × N` pixel-major matrix.
///
/// Row `i` came from image position `coords[i]` and carries class
/// `labels[i]` (always ≥ 1).
#[derive(Debug, Clone, PartialEq)]
pub struct PixelMatrix {
    n_bands: usize,
    values: Vec<f64>,
    labels: Vec<u16>,
    coords: Vec<(usize, usize)>,
    image_width: usize,
    image_height: usize,
}

impl PixelMatrix {
    /// Builds a matrix from parts. `coords` must be unique and lie inside
    /// `image_width × image_height`.
    pub fn new(
        n_bands: usize,
        values: Vec<f64>,
        labels: Vec<u16>,
        coords: Vec<(usize, usize)>,
        (image_width, image_height): (usize, usize),
    ) -> Result<Self> {
        let n = labels.len();
        if n_bands == 0 {
            return Err(Error::Dimension(
                "pixel matrix needs at least one band".into(),
            ));
        }
        if values.len() != n * n_bands {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: n * n_bands,
            });
        }
        if coords.len() != n {
            return Err(Error::LengthMismatch {
                left: coords.len(),
                right: n,
            });
        }
        if labels.contains(&0) {
            return Err(Error::InvalidParameter(
                "pixel matrix labels must be >= 1".into(),
            ));
        }
        let mut seen = vec![false; image_width * image_height];
        for &(r, c) in &coords {
            if r >= image_height || c >= image_width {
                return Err(Error::Dimension(format!("pixel ({r}, {c}) outside image")));
            }
            let k = r * image_width + c;
            if std::mem::replace(&mut seen[k], true) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate pixel ({r}, {c})"
                )));
            }
        }
        Ok(Self {
            n_bands,
            values,
            labels,
            coords,
            image_width,
            image_height,
        })
    }

    /// Unlabeled-origin matrix for numeric work: every row gets class 1 and
    /// position `(0, i)` in a `n × 1` strip.
    pub fn from_values(n_bands: usize, values: Vec<f64>) -> Result<Self> {
        if n_bands == 0 || !values.len().is_multiple_of(n_bands) {
            return Err(Error::Dimension(format!(
                "{} values do not fill rows of {n_bands}",
                values.len()
            )));
        }
        let n = values.len() / n_bands;
        let coords = (0..n).map(|i| (0, i)).collect();
        Self::new(n_bands, values, vec![1; n], coords, (n.max(1), 1))
    }

    /// Same pixels, new feature columns.
    pub(crate) fn with_values(&self, n_bands: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.n_pixels() * n_bands);
        Self {
            n_bands,
            values,
            labels: self.labels.clone(),
            coords: self.coords.clone(),
            image_width: self.image_width,
            image_height: self.image_height,
        }
    }

    /// Keeps the listed rows, in the given order.
    pub fn subset(&self, rows: &[usize]) -> Self {
        let mut values = Vec::with_capacity(rows.len() * self.n_bands);
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        Self {
            n_bands: self.n_bands,
            values,
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            coords: rows.iter().map(|&r| self.coords[r]).collect(),
            image_width: self.image_width,
            image_height: self.image_height,
        }
    }

    pub fn n_pixels(&self) -> usize {
        self.labels.len()
    }

    pub fn n_bands(&self) -> usize {
        self.n_bands
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_bands..(i + 1) * self.n_bands]
    }

    pub fn get(&self, pixel: usize, band: usize) -> f64 {
        self.values[pixel * self.n_bands + band]
    }

    /// Copy of one band across all pixels.
    pub fn column(&self, band: usize) -> Vec<f64> {
        self.values
            .iter()
            .skip(band)
            .step_by(self.n_bands)
            .copied()
            .collect()
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn coords(&self) -> &[(usize, usize)] {
        &self.coords
    }

    pub fn image_size(&self) -> (usize, usize) {
        (self.image_width, self.image_height)
    }
}

/// Keeps pixels whose label is nonzero, in row-major scan order.
pub fn mask_background(cube: &HyperspectralCube, gt: &GroundTruthMap) -> Result<PixelMatrix> {
    check_pair(cube, gt)?;
    let (w, n_bands) = (cube.width(), cube.n_bands());
    let plane = cube.n_pixels();
    let kept: Vec<usize> = (0..plane).filter(|&p| gt.labels()[p] != 0).collect();
    if kept.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let data = cube.data();
    let mut values = Vec::with_capacity(kept.len() * n_bands);
    for &p in &kept {
        values.extend((0..n_bands).map(|b| data[b * plane + p] as f64));
    }
    Ok(PixelMatrix {
        n_bands,
        values,
        labels: kept.iter().map(|&p| gt.labels()[p]).collect(),
        coords: kept.iter().map(|&p| (p / w, p % w)).collect(),
        image_width: w,
        image_height: cube.height(),
    })
}

/// Per-band statistics used by [`standardize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandStats {
    pub mean: Vec<f64>,
    /// Population standard deviation.
    pub std: Vec<f64>,
    pub zero_variance: Vec<bool>,
}

impl BandStats {
    pub fn compute(pm: &PixelMatrix) -> Result<Self> {
        Self::compute_with(pm, Execution::default())
    }

    pub fn compute_with(pm: &PixelMatrix, exec: Execution) -> Result<Self> {
        let n = pm.n_pixels();
        if n < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: n });
        }
        let per_band = exec.map_range(pm.n_bands(), |b| {
            let col = pm.column(b);
            let mean = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let constant = col.iter().all(|&v| v == col[0]);
            let std = var.sqrt();
            (mean, std, constant || std == 0.0)
        });
        Ok(Self {
            mean: per_band.iter().map(|s| s.0).collect(),
            std: per_band.iter().map(|s| s.1).collect(),
            zero_variance: per_band.iter().map(|s| s.2).collect(),
        })
    }

    pub fn zero_variance_bands(&self) -> Vec<usize> {
        (0..self.zero_variance.len())
            .filter(|&b| self.zero_variance[b])
            .collect()
    }

    /// Applies `(x - mean) / std`; zero-variance bands become all zeros.
    pub fn apply(&self, pm: &PixelMatrix) -> Result<PixelMatrix> {
        if pm.n_bands() != self.mean.len() {
            return Err(Error::Dimension(format!(
                "stats cover {} bands, matrix has {}",
                self.mean.len(),
                pm.n_bands()
            )));
        }
        let nb = pm.n_bands();
        let values = pm
            .values()
            .iter()
            .enumerate()
            .map(|(k, &v)| {
                let b = k % nb;
                if self.zero_variance[b] {
                    0.0
                } else {
                    (v - self.mean[b]) / self.std[b]
                }
            })
            .collect();
        Ok(pm.with_values(nb, values))
    }
}

/// Per-band z-score over the matrix's pixels (population variance).
pub fn standardize(pm: &PixelMatrix) -> Result<(PixelMatrix, BandStats)> {
    let stats = BandStats::compute(pm)?;
    let out = stats.apply(pm)?;
    Ok((out, stats))
}
