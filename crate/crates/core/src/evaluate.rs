//! Confusion matrices, per-class and overall metrics, and classification
//! map rendering.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cube::LabelRaster;
use crate::error::{Error, Result};
use crate::exec::Execution;

const TALLY_CHUNK: usize = 1 << 16;

/// Counts with rows = true class, columns = predicted class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub n_classes: usize,
    pub counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn from_counts(n_classes: usize, counts: Vec<u64>) -> Result<Self> {
        if n_classes == 0 || counts.len() != n_classes * n_classes {
            return Err(Error::Dimension(format!(
                "{} counts for {n_classes} classes",
                counts.len()
            )));
        }
        Ok(Self { n_classes, counts })
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.n_classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes).map(|c| self.get(c, c)).sum()
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        (0..self.n_classes).map(|p| self.get(c, p)).sum()
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        (0..self.n_classes).map(|t| self.get(t, c)).sum()
    }
}

/// Tallies label pairs; labels must lie in `1..=n_classes`.
pub fn confusion(truth: &[u16], predicted: &[u16], n_classes: usize) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::LengthMismatch {
            left: truth.len(),
            right: predicted.len(),
        });
    }
    if n_classes == 0 {
        return Err(Error::Dimension(
            "confusion matrix needs at least one class".into(),
        ));
    }
    if let Some(&label) = truth
        .iter()
        .chain(predicted)
        .find(|&&l| l == 0 || l as usize > n_classes)
    {
        return Err(Error::LabelOutOfRange { label, n_classes });
    }
    let n_chunks = truth.len().div_ceil(TALLY_CHUNK);
    let partials = Execution::default().map_range(n_chunks, |k| {
        let range = k * TALLY_CHUNK..((k + 1) * TALLY_CHUNK).min(truth.len());
        let mut counts = vec![0u64; n_classes * n_classes];
        for (&t, &p) in truth[range.clone()].iter().zip(&predicted[range]) {
            counts[(t as usize - 1) * n_classes + (p as usize - 1)] += 1;
        }
        counts
    });
    let mut counts = vec![0u64; n_classes * n_classes];
    for part in partials {
        for (c, v) in counts.iter_mut().zip(part) {
            *c += v;
        }
    }
    Ok(ConfusionMatrix { n_classes, counts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: u16,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// Some metric of this class was 0/0 and is reported as 0.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub method: String,
    pub classes: Vec<ClassMetrics>,
    /// Percentage, `100 · trace / total`.
    pub overall_accuracy: f64,
    pub kappa: f64,
    pub confusion: ConfusionMatrix,
}

fn ratio(num: f64, den: f64) -> (f64, bool) {
    if den == 0.0 {
        (0.0, true)
    } else {
        (num / den, false)
    }
}

/// Precision, recall, F1, overall accuracy and Cohen's kappa.
pub fn report(cm: &ConfusionMatrix) -> Result<EvaluationReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::EmptyDataset);
    }
    let classes = (0..cm.n_classes)
        .map(|c| {
            let tp = cm.get(c, c) as f64;
            let (precision, dp) = ratio(tp, cm.col_sum(c) as f64);
            let (recall, dr) = ratio(tp, cm.row_sum(c) as f64);
            let (f1, df) = ratio(2.0 * precision * recall, precision + recall);
            ClassMetrics {
                label: (c + 1) as u16,
                precision,
                recall,
                f1,
                support: cm.row_sum(c),
                degenerate: dp || dr || df,
            }
        })
        .collect();

    let t = total as f64;
    let p_o = cm.trace() as f64 / t;
    let mut chance = 0.0;
    for c in 0..cm.n_classes {
        chance += cm.row_sum(c) as f64 * cm.col_sum(c) as f64;
    }
    let p_e = chance / (t * t);
    // p_e == 1 only when every count sits in one diagonal cell.
    let kappa = if p_e < 1.0 {
        (p_o - p_e) / (1.0 - p_e)
    } else {
        1.0
    };

    Ok(EvaluationReport {
        method: String::new(),
        classes,
        overall_accuracy: 100.0 * p_o,
        kappa,
        confusion: cm.clone(),
    })
}

impl EvaluationReport {
    pub fn with_method(mut self, method: impl Into<String>) -> Self {
        self.method = method.into();
        self
    }

    /// Aligned table: per-class precision, recall and F1, then OA and kappa.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        if !self.method.is_empty() {
            let _ = writeln!(s, "{}", self.method.to_uppercase());
        }
        let _ = writeln!(
            s,
            "{:>6}  {:>9}  {:>6}  {:>5}",
            "CLASS", "PRECISION", "RECALL", "F1"
        );
        for c in &self.classes {
            let _ = writeln!(
                s,
                "{:>6}  {:>9.2}  {:>6.2}  {:>5.2}",
                c.label, c.precision, c.recall, c.f1
            );
        }
        let _ = writeln!(s, "{:>6}  {:>.2}", "OA", self.overall_accuracy);
        let _ = writeln!(s, "{:>6}  {:>.2}", "KAPPA", self.kappa);
        s
    }
}

/// Class → RGB colors; entry `i` colors label `i + 1`. Label 0 is black.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Palette(pub Vec<[u8; 3]>);

impl Default for Palette {
    /// Sixteen distinct colors, enough for the largest benchmark scene.
    fn default() -> Self {
        Palette(vec![
            [230, 25, 75],
            [60, 180, 75],
            [255, 225, 25],
            [0, 130, 200],
            [245, 130, 48],
            [145, 30, 180],
            [70, 240, 240],
            [240, 50, 230],
            [210, 245, 60],
            [250, 190, 212],
            [0, 128, 128],
            [220, 190, 255],
            [170, 110, 40],
            [255, 250, 200],
            [128, 0, 0],
            [170, 255, 195],
        ])
    }
}

impl Palette {
    pub fn color(&self, label: u16) -> Result<[u8; 3]> {
        match label {
            0 => Ok([0, 0, 0]),
            l => self
                .0
                .get(l as usize - 1)
                .copied()
                .ok_or(Error::MissingPaletteEntry(l)),
        }
    }
}

/// Encodes a label raster as an 8-bit RGB PNG, one pixel per cell.
pub fn encode_map_png(raster: &LabelRaster, palette: &Palette) -> Result<Vec<u8>> {
    if raster.labels.len() != raster.width * raster.height {
        return Err(Error::LengthMismatch {
            left: raster.labels.len(),
            right: raster.width * raster.height,
        });
    }
    let mut rgb = Vec::with_capacity(raster.labels.len() * 3);
    for &l in &raster.labels {
        rgb.extend_from_slice(&palette.color(l)?);
    }
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, raster.width as u32, raster.height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header()?;
        writer.write_image_data(&rgb)?;
        writer.finish()?;
    }
    Ok(out)
}

pub fn render_map(raster: &LabelRaster, palette: &Palette, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_map_png(raster, palette)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
