//! Inter-band Pearson correlation, average band correlation (ABC) and
//! threshold band selection.
//!
//! Every sum runs in 64-bit floating point in a fixed sequential order, and
//! parallel work is split by band pair only, so a correlation matrix is
//! bit-identical for any worker count.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cube::HyperspectralCube;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::preprocess::PixelMatrix;

/// Threshold used when none is configured.
pub const DEFAULT_THRESHOLD: f64 = 0.65;

/// Outcome of a single Pearson evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pearson {
    pub r: f64,
    /// Set when either input has zero variance; `r` is then 0.
    pub degenerate: bool,
}

/// A mean-removed sample vector with its sum of squared deviations.
struct Centered {
    dev: Vec<f64>,
    sum_sq: f64,
    degenerate: bool,
}

impl Centered {
    fn new<T: Copy + Into<f64>>(x: &[T]) -> Self {
        let n = x.len() as f64;
        let mut sum = 0.0;
        for &v in x {
            sum += v.into();
        }
        let mean = sum / n;
        let dev: Vec<f64> = x.iter().map(|&v| v.into() - mean).collect();
        let mut sum_sq = 0.0;
        for d in &dev {
            sum_sq += d * d;
        }
        let first: f64 = x[0].into();
        let constant = x.iter().all(|&v| v.into() == first);
        Self {
            dev,
            sum_sq,
            degenerate: constant || sum_sq == 0.0,
        }
    }

    fn correlate(&self, other: &Centered) -> Pearson {
        if self.degenerate || other.degenerate {
            return Pearson {
                r: 0.0,
                degenerate: true,
            };
        }
        let mut cross = 0.0;
        for (a, b) in self.dev.iter().zip(&other.dev) {
            cross += a * b;
        }
        let r = cross / (self.sum_sq * other.sum_sq).sqrt();
        Pearson {
            r: r.clamp(-1.0, 1.0),
            degenerate: false,
        }
    }
}

/// Pearson correlation coefficient of two equal-length sample vectors.
pub fn pearson<T: Copy + Into<f64>>(x: &[T], y: &[T]) -> Result<Pearson> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: x.len(),
        });
    }
    Ok(Centered::new(x).correlate(&Centered::new(y)))
}

/// Symmetric `N × N` matrix of inter-band correlations.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    n_bands: usize,
    values: Vec<f64>,
    zero_variance_bands: Vec<usize>,
}

impl CorrelationMatrix {
    /// Wraps an externally built row-major matrix. It must be square and
    /// exactly symmetric; entries within 1e-12 of `[-1, 1]` are clamped.
    pub fn from_values(n_bands: usize, mut values: Vec<f64>) -> Result<Self> {
        if n_bands < 2 {
            return Err(Error::Dimension("correlation matrix needs N >= 2".into()));
        }
        if values.len() != n_bands * n_bands {
            return Err(Error::LengthMismatch {
                left: values.len(),
                right: n_bands * n_bands,
            });
        }
        for i in 0..n_bands {
            for j in 0..n_bands {
                let v = values[i * n_bands + j];
                if !(-1.0 - 1e-12..=1.0 + 1e-12).contains(&v) {
                    return Err(Error::InvalidParameter(format!(
                        "correlation ({i}, {j}) = {v} outside [-1, 1]"
                    )));
                }
                if v != values[j * n_bands + i] {
                    return Err(Error::InvalidParameter(format!(
                        "correlation matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        for v in &mut values {
            *v = v.clamp(-1.0, 1.0);
        }
        Ok(Self {
            n_bands,
            values,
            zero_variance_bands: Vec::new(),
        })
    }

    pub fn n_bands(&self) -> usize {
        self.n_bands
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_bands + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_bands..(i + 1) * self.n_bands]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn zero_variance_bands(&self) -> &[usize] {
        &self.zero_variance_bands
    }

    /// Row-major CSV with 17 significant digits per entry.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for i in 0..self.n_bands {
            let row: Vec<String> = self.row(i).iter().map(|v| format!("{v:.16e}")).collect();
            let _ = writeln!(s, "{}", row.join(","));
        }
        s
    }
}

/// Correlation of every band pair of `pm`.
pub fn correlation_matrix(pm: &PixelMatrix) -> Result<CorrelationMatrix> {
    correlation_matrix_with(pm, Execution::default())
}

pub fn correlation_matrix_with(pm: &PixelMatrix, exec: Execution) -> Result<CorrelationMatrix> {
    let nb = pm.n_bands();
    if nb < 2 {
        return Err(Error::Dimension(
            "correlation needs at least 2 bands".into(),
        ));
    }
    if pm.n_pixels() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: pm.n_pixels(),
        });
    }
    let columns: Vec<Centered> = exec.map_range(nb, |b| Centered::new(&pm.column(b)));
    let pairs: Vec<(usize, usize)> = (0..nb)
        .flat_map(|i| (i + 1..nb).map(move |j| (i, j)))
        .collect();
    let rs = exec.map_range(pairs.len(), |k| {
        let (i, j) = pairs[k];
        columns[i].correlate(&columns[j]).r
    });

    let mut values = vec![0.0; nb * nb];
    for (&(i, j), &r) in pairs.iter().zip(&rs) {
        values[i * nb + j] = r;
        values[j * nb + i] = r;
    }
    for i in 0..nb {
        values[i * nb + i] = 1.0;
    }
    Ok(CorrelationMatrix {
        n_bands: nb,
        values,
        zero_variance_bands: (0..nb).filter(|&b| columns[b].degenerate).collect(),
    })
}

/// Mean absolute correlation of each band with every other band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AbcVector(Vec<f64>);

impl AbcVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParameter(format!(
                "ABC value {v} outside [0, 1]"
            )));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Lowest ABC and its band (first index on ties).
    pub fn argmin(&self) -> (usize, f64) {
        let mut best = (0, self.0[0]);
        for (i, &v) in self.0.iter().enumerate().skip(1) {
            if v < best.1 {
                best = (i, v);
            }
        }
        best
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("band,abc\n");
        for (i, v) in self.0.iter().enumerate() {
            let _ = writeln!(s, "{i},{v:.16e}");
        }
        s
    }
}

/// `ABC_i = 1/(N-1) · Σ_{j≠i} |r_ij|`.
///
/// The absolute values of a row are summed in ascending order of magnitude,
/// which makes the result independent of band order and lets permuted
/// inputs produce exactly permuted outputs.
pub fn average_band_correlation(cm: &CorrelationMatrix) -> AbcVector {
    let n = cm.n_bands();
    let abc = (0..n)
        .map(|i| {
            let mut terms: Vec<f64> = (0..n)
                .filter(|&j| j != i)
                .map(|j| cm.get(i, j).abs())
                .collect();
            terms.sort_by(f64::total_cmp);
            let mut sum = 0.0;
            for t in terms {
                sum += t;
            }
            (sum / (n - 1) as f64).clamp(0.0, 1.0)
        })
        .collect();
    AbcVector(abc)
}

/// How a [`BandSelection`] was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectionMethod {
    #[serde(rename = "abc-threshold")]
    AbcThreshold,
    #[serde(rename = "pca")]
    Pca,
    #[serde(rename = "sb-greedy")]
    SbGreedy,
    /// Loaded from a bare index list without provenance.
    #[serde(rename = "external")]
    External,
}

impl SelectionMethod {
    pub fn tag(self) -> &'static str {
        match self {
            SelectionMethod::AbcThreshold => "abc-threshold",
            SelectionMethod::Pca => "pca",
            SelectionMethod::SbGreedy => "sb-greedy",
            SelectionMethod::External => "external",
        }
    }
}

/// Ascending band indices plus the provenance that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSelection {
    pub method: SelectionMethod,
    pub n_bands: usize,
    pub selected: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub abc: Option<AbcVector>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl BandSelection {
    /// Checks the index list against `n_bands`; indices must be strictly
    /// increasing and nonempty.
    pub fn new(method: SelectionMethod, n_bands: usize, selected: Vec<usize>) -> Result<Self> {
        if selected.is_empty() {
            return Err(Error::InvalidParameter("empty band selection".into()));
        }
        if selected.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "band indices must be strictly increasing".into(),
            ));
        }
        if let Some(&last) = selected.last() {
            if last >= n_bands {
                return Err(Error::BandOutOfRange {
                    index: last,
                    n_bands,
                });
            }
        }
        Ok(Self {
            method,
            n_bands,
            selected,
            threshold: None,
            abc: None,
            params: BTreeMap::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    /// Writes one index per line to `path` and the full provenance as JSON
    /// next to it (same basename, `.json`).
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = String::new();
        for i in &self.selected {
            let _ = writeln!(text, "{i}");
        }
        fs::write(path, text).map_err(|e| Error::io(path, e))?;
        let json_path = provenance_path(path);
        let json = serde_json::to_string_pretty(self)?;
        fs::write(&json_path, json + "\n").map_err(|e| Error::io(&json_path, e))
    }

    /// Reads an index list; the JSON provenance is used when present and
    /// must agree with the list.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let indices = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                l.parse::<usize>()
                    .map_err(|_| Error::header(path, format!("not a band index: {l}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let json_path = provenance_path(path);
        if json_path.exists() {
            let json = fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
            let sel: BandSelection = serde_json::from_str(&json)?;
            if sel.selected != indices {
                return Err(Error::header(
                    path,
                    "index list disagrees with its JSON provenance",
                ));
            }
            let checked = BandSelection::new(sel.method, sel.n_bands, indices)?;
            return Ok(BandSelection {
                selected: checked.selected,
                ..sel
            });
        }
        let n_bands = indices.iter().max().map_or(0, |m| m + 1);
        BandSelection::new(SelectionMethod::External, n_bands, indices)
    }
}

fn provenance_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Keeps bands with `abc < threshold` (strict), in ascending order.
pub fn select_bands_by_abc(abc: &AbcVector, threshold: f64) -> Result<BandSelection> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "threshold {threshold} outside (0, 1]"
        )));
    }
    if abc.is_empty() {
        return Err(Error::Dimension("empty ABC vector".into()));
    }
    let selected: Vec<usize> = (0..abc.len()).filter(|&i| abc.0[i] < threshold).collect();
    if selected.is_empty() {
        return Err(Error::NoBandBelowThreshold {
            threshold,
            min_abc: abc.argmin().1,
        });
    }
    let mut sel = BandSelection::new(SelectionMethod::AbcThreshold, abc.len(), selected)?;
    sel.threshold = Some(threshold);
    sel.abc = Some(abc.clone());
    Ok(sel)
}

/// Containers that can be reduced to a subset of their bands.
pub trait ExtractBands: Sized {
    fn band_count(&self) -> usize;

    /// Output band `k` is input band `indices[k]`, values copied unchanged.
    fn extract(&self, indices: &[usize]) -> Result<Self>;
}

fn check_indices(indices: &[usize], n_bands: usize) -> Result<()> {
    if indices.is_empty() {
        return Err(Error::InvalidParameter("no bands to extract".into()));
    }
    match indices.iter().find(|&&i| i >= n_bands) {
        Some(&index) => Err(Error::BandOutOfRange { index, n_bands }),
        None => Ok(()),
    }
}

impl ExtractBands for HyperspectralCube {
    fn band_count(&self) -> usize {
        self.n_bands()
    }

    fn extract(&self, indices: &[usize]) -> Result<Self> {
        check_indices(indices, self.n_bands())?;
        let mut data = Vec::with_capacity(indices.len() * self.n_pixels());
        for &b in indices {
            data.extend_from_slice(self.band(b));
        }
        // A single extracted band is valid output even though loaded cubes
        // need two, so build through a two-band shell when necessary.
        let out = if indices.len() >= 2 {
            HyperspectralCube::new(self.width(), self.height(), indices.len(), data)?
        } else {
            HyperspectralCube::single_band(self.width(), self.height(), data)
        };
        match self.wavelengths() {
            Some(w) => out.with_wavelengths(indices.iter().map(|&i| w[i]).collect()),
            None => Ok(out),
        }
    }
}

impl ExtractBands for PixelMatrix {
    fn band_count(&self) -> usize {
        self.n_bands()
    }

    fn extract(&self, indices: &[usize]) -> Result<Self> {
        check_indices(indices, self.n_bands())?;
        let mut values = Vec::with_capacity(self.n_pixels() * indices.len());
        for p in 0..self.n_pixels() {
            let row = self.row(p);
            values.extend(indices.iter().map(|&b| row[b]));
        }
        Ok(self.with_values(indices.len(), values))
    }
}

pub fn extract_bands<T: ExtractBands>(input: &T, selection: &BandSelection) -> Result<T> {
    input.extract(&selection.selected)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_and_negated_correlation() {
        let x = [0.3, 1.7, -2.0, 4.5, 0.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &x).unwrap().r - 1.0).abs() < 1e-15);
        assert_eq!(pearson(&x, &neg).unwrap().r, -1.0);
    }

    #[test]
    fn small_vector_matches_hand_value() {
        // means 2.5 / 2.75; sxy = 6.5, sxx = 5, syy = 8.75
        let r = pearson(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 5.0])
            .unwrap()
            .r;
        let expected = 6.5 / (5.0f64 * 8.75).sqrt();
        assert!((r - expected).abs() < 1e-12);
    }

    #[test]
    fn pearson_errors_and_degenerate() {
        assert!(matches!(
            pearson(&[1.0, 2.0], &[1.0]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            pearson(&[1.0], &[1.0]),
            Err(Error::TooFewSamples { .. })
        ));
        let p = pearson(&[2.0f32, 2.0, 2.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(
            p,
            Pearson {
                r: 0.0,
                degenerate: true
            }
        );
    }

    #[test]
    fn identical_two_band_matrix() {
        let pm = PixelMatrix::from_values(2, vec![1.0, 1.0, 2.0, 2.0, 4.0, 4.0]).unwrap();
        let cm = correlation_matrix(&pm).unwrap();
        assert_eq!(cm.values(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn zero_variance_band_row_is_zero() {
        let pm =
            PixelMatrix::from_values(3, vec![1.0, 7.0, 2.0, 2.0, 7.0, 3.0, 4.0, 7.0, 1.0]).unwrap();
        let cm = correlation_matrix(&pm).unwrap();
        assert_eq!(cm.zero_variance_bands(), &[1]);
        assert_eq!(cm.row(1), &[0.0, 1.0, 0.0]);
        assert_eq!(cm.get(0, 1), 0.0);
    }

    #[test]
    fn abc_examples() {
        let cm = CorrelationMatrix::from_values(2, vec![1.0, -0.4, -0.4, 1.0]).unwrap();
        assert_eq!(average_band_correlation(&cm).values(), &[0.4, 0.4]);

        let cm =
            CorrelationMatrix::from_values(3, vec![1.0, 0.6, -0.2, 0.6, 1.0, 0.8, -0.2, 0.8, 1.0])
                .unwrap();
        let abc = average_band_correlation(&cm);
        for (a, e) in abc.values().iter().zip([0.4, 0.7, 0.5]) {
            assert!((a - e).abs() < 1e-15);
        }

        let cm = CorrelationMatrix::from_values(3, vec![1.0; 9]).unwrap();
        assert_eq!(average_band_correlation(&cm).values(), &[1.0; 3]);
    }

    #[test]
    fn from_values_rejects_asymmetry() {
        assert!(CorrelationMatrix::from_values(2, vec![1.0, 0.5, 0.4, 1.0]).is_err());
        assert!(CorrelationMatrix::from_values(2, vec![1.0, 1.5, 1.5, 1.0]).is_err());
        let cm =
            CorrelationMatrix::from_values(2, vec![1.0, 1.0 + 1e-13, 1.0 + 1e-13, 1.0]).unwrap();
        assert_eq!(cm.get(0, 1), 1.0);
    }

    #[test]
    fn threshold_is_strict() {
        let abc = AbcVector::new(vec![0.9, 0.3, 0.65]).unwrap();
        let sel = select_bands_by_abc(&abc, 0.65).unwrap();
        assert_eq!(sel.selected, vec![1]);
        assert_eq!(sel.method, SelectionMethod::AbcThreshold);

        let all = select_bands_by_abc(&AbcVector::new(vec![0.1; 5]).unwrap(), 0.65).unwrap();
        assert_eq!(all.selected, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn threshold_errors() {
        let abc = AbcVector::new(vec![0.9, 0.8]).unwrap();
        assert!(matches!(
            select_bands_by_abc(&abc, 0.65),
            Err(Error::NoBandBelowThreshold { .. })
        ));
        assert!(select_bands_by_abc(&abc, 0.0).is_err());
        assert!(select_bands_by_abc(&abc, 1.5).is_err());
    }

    #[test]
    fn extract_cube_bands() {
        let data: Vec<f32> = (0..12).map(|v| v as f32).collect();
        let cube = HyperspectralCube::new(2, 2, 3, data).unwrap();
        let sel = BandSelection::new(SelectionMethod::External, 3, vec![0, 2]).unwrap();
        let out = extract_bands(&cube, &sel).unwrap();
        assert_eq!(out.n_bands(), 2);
        assert_eq!(out.band(0), cube.band(0));
        assert_eq!(out.band(1), cube.band(2));

        let all = BandSelection::new(SelectionMethod::External, 3, vec![0, 1, 2]).unwrap();
        assert_eq!(extract_bands(&cube, &all).unwrap(), cube);

        let single = cube.extract(&[1]).unwrap();
        assert_eq!(single.n_bands(), 1);
        assert_eq!(single.band(0), cube.band(1));
        assert!(matches!(
            cube.extract(&[3]),
            Err(Error::BandOutOfRange { index: 3, .. })
        ));
    }

    #[test]
    fn extract_pixel_columns() {
        let pm = PixelMatrix::from_values(3, (0..9).map(f64::from).collect()).unwrap();
        let out = pm.extract(&[2, 0]).unwrap();
        assert_eq!(out.values(), &[2.0, 0.0, 5.0, 3.0, 8.0, 6.0]);
    }

    #[test]
    fn selection_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let abc = AbcVector::new(vec![0.2, 0.7, 0.1]).unwrap();
        let sel = select_bands_by_abc(&abc, 0.65).unwrap();
        let path = dir.path().join("selection.txt");
        sel.write(&path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "0\n2\n");
        assert_eq!(BandSelection::read(&path).unwrap(), sel);

        fs::remove_file(dir.path().join("selection.json")).unwrap();
        let bare = BandSelection::read(&path).unwrap();
        assert_eq!(bare.method, SelectionMethod::External);
        assert_eq!(bare.selected, vec![0, 2]);
    }

    #[test]
    fn csv_uses_seventeen_digits() {
        let cm = CorrelationMatrix::from_values(2, vec![1.0, 0.1, 0.1, 1.0]).unwrap();
        let csv = cm.to_csv();
        assert_eq!(
            csv.lines().next().unwrap(),
            "1.0000000000000000e0,1.0000000000000001e-1"
        );
        let back: f64 = "1.0000000000000001e-1".parse().unwrap();
        assert_eq!(back, 0.1);
    }
}
