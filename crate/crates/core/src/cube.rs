//! Hyperspectral cube and label raster storage.
//!
//! A raster is a text header (`key = value` per line) plus a sibling `.raw`
//! file with the same basename. Cubes are 32-bit little-endian floats in
//! band-sequential order; label rasters are 16-bit little-endian unsigned
//! integers.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kv;

/// Element type tag written to headers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataType {
    F32,
    U16,
}

impl DataType {
    fn tag(self) -> &'static str {
        match self {
            DataType::F32 => "f32",
            DataType::U16 => "u16",
        }
    }

    fn size(self) -> u64 {
        match self {
            DataType::F32 => 4,
            DataType::U16 => 2,
        }
    }
}

/// Parsed raster header.
#[derive(Debug, Clone, PartialEq)]
pub struct CubeHeader {
    pub width: usize,
    pub height: usize,
    pub n_bands: usize,
    pub data_type: DataType,
    pub wavelengths: Option<Vec<f64>>,
    pub classes: Option<usize>,
    pub class_names: Option<Vec<String>>,
}

impl CubeHeader {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let pairs = kv::parse(text).map_err(|m| Error::header(path, m))?;
        let get = |key: &str| {
            pairs
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
        };
        let required =
            |key: &str| get(key).ok_or_else(|| Error::header(path, format!("missing `{key}`")));
        let dim = |key: &str| -> Result<usize> {
            let v = required(key)?;
            v.parse::<usize>()
                .map_err(|_| Error::header(path, format!("`{key}` is not a count: {v}")))
        };

        let width = dim("samples")?;
        let height = dim("lines")?;
        let n_bands = dim("bands")?;
        let data_type = match required("data type")? {
            "f32" => DataType::F32,
            "u16" => DataType::U16,
            other => {
                return Err(Error::header(
                    path,
                    format!("unsupported data type `{other}`"),
                ))
            }
        };
        match required("interleave")? {
            "bsq" => {}
            other => {
                return Err(Error::header(
                    path,
                    format!("unsupported interleave `{other}`"),
                ))
            }
        }
        match required("byte order")? {
            "little" => {}
            other => {
                return Err(Error::header(
                    path,
                    format!("unsupported byte order `{other}`"),
                ))
            }
        }
        if width == 0 || height == 0 || n_bands == 0 {
            return Err(Error::header(path, "zero-sized dimension"));
        }

        let wavelengths = match get("wavelength") {
            None => None,
            Some(v) => {
                let list = kv::split_list(v)
                    .iter()
                    .map(|s| s.parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| Error::header(path, "unparseable wavelength list"))?;
                if list.len() != n_bands {
                    return Err(Error::header(
                        path,
                        format!("{} wavelengths for {} bands", list.len(), n_bands),
                    ));
                }
                Some(list)
            }
        };
        let classes = get("classes")
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| Error::header(path, format!("`classes` is not a count: {v}")))
            })
            .transpose()?;
        let class_names = get("class names").map(kv::split_list);

        Ok(CubeHeader {
            width,
            height,
            n_bands,
            data_type,
            wavelengths,
            classes,
            class_names,
        })
    }

    pub fn render(&self) -> String {
        let mut pairs = vec![
            ("samples", self.width.to_string()),
            ("lines", self.height.to_string()),
            ("bands", self.n_bands.to_string()),
            ("data type", self.data_type.tag().to_string()),
            ("interleave", "bsq".to_string()),
            ("byte order", "little".to_string()),
        ];
        if let Some(w) = &self.wavelengths {
            let list: Vec<String> = w.iter().map(|x| format!("{x:?}")).collect();
            pairs.push(("wavelength", list.join(", ")));
        }
        if let Some(c) = self.classes {
            pairs.push(("classes", c.to_string()));
        }
        if let Some(names) = &self.class_names {
            pairs.push(("class names", names.join(", ")));
        }
        kv::render(pairs)
    }

    fn raw_len(&self) -> u64 {
        (self.width * self.height * self.n_bands) as u64 * self.data_type.size()
    }
}

/// Path of the raw file paired with a header.
pub fn raw_path(header_path: &Path) -> PathBuf {
    header_path.with_extension("raw")
}

fn read_header(path: &Path) -> Result<CubeHeader> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    CubeHeader::parse(&text, path)
}

fn read_raw(header_path: &Path, header: &CubeHeader) -> Result<Vec<u8>> {
    let raw = raw_path(header_path);
    if raw == header_path {
        return Err(Error::header(
            header_path,
            "header must not use the .raw extension",
        ));
    }
    let bytes = fs::read(&raw).map_err(|e| Error::io(&raw, e))?;
    let expected = header.raw_len();
    if bytes.len() as u64 != expected {
        return Err(Error::RawSize {
            path: raw,
            expected,
            actual: bytes.len() as u64,
        });
    }
    Ok(bytes)
}

fn write_pair(header_path: &Path, header: &CubeHeader, bytes: &[u8]) -> Result<()> {
    let raw = raw_path(header_path);
    if raw == header_path {
        return Err(Error::header(
            header_path,
            "header must not use the .raw extension",
        ));
    }
    fs::write(header_path, header.render()).map_err(|e| Error::io(header_path, e))?;
    fs::write(&raw, bytes).map_err(|e| Error::io(&raw, e))
}

/// A `W × H × N` reflectance raster in band-sequential layout.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperspectralCube {
    width: usize,
    height: usize,
    n_bands: usize,
    data: Vec<f32>,
    wavelengths: Option<Vec<f64>>,
}

impl HyperspectralCube {
    /// Builds a cube, checking shape and finiteness.
    pub fn new(width: usize, height: usize, n_bands: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension(
                "cube width and height must be at least 1".into(),
            ));
        }
        if n_bands < 2 {
            return Err(Error::Dimension(format!(
                "cube needs at least 2 bands, got {n_bands}"
            )));
        }
        if data.len() != width * height * n_bands {
            return Err(Error::LengthMismatch {
                left: data.len(),
                right: width * height * n_bands,
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            let plane = width * height;
            return Err(Error::NonFinite {
                band: i / plane,
                row: (i % plane) / width,
                col: i % width,
            });
        }
        Ok(Self {
            width,
            height,
            n_bands,
            data,
            wavelengths: None,
        })
    }

    /// Band extraction may legitimately produce one band.
    pub(crate) fn single_band(width: usize, height: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self {
            width,
            height,
            n_bands: 1,
            data,
            wavelengths: None,
        }
    }

    pub fn with_wavelengths(mut self, wavelengths: Vec<f64>) -> Result<Self> {
        if wavelengths.len() != self.n_bands {
            return Err(Error::LengthMismatch {
                left: wavelengths.len(),
                right: self.n_bands,
            });
        }
        self.wavelengths = Some(wavelengths);
        Ok(self)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn n_bands(&self) -> usize {
        self.n_bands
    }

    pub fn n_pixels(&self) -> usize {
        self.width * self.height
    }

    /// Flat BSQ data.
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn wavelengths(&self) -> Option<&[f64]> {
        self.wavelengths.as_deref()
    }

    /// One band plane, row-major.
    pub fn band(&self, b: usize) -> &[f32] {
        let plane = self.n_pixels();
        &self.data[b * plane..(b + 1) * plane]
    }

    pub fn get(&self, band: usize, row: usize, col: usize) -> f32 {
        self.data[band * self.n_pixels() + row * self.width + col]
    }
}

/// Untyped u16 raster; used for prediction maps where labels need not be
/// contiguous.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelRaster {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u16>,
    pub class_names: Option<Vec<String>>,
}

impl LabelRaster {
    pub fn max_label(&self) -> u16 {
        self.labels.iter().copied().max().unwrap_or(0)
    }
}

/// Per-pixel class labels; 0 is background and classes are `1..=n_classes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruthMap {
    width: usize,
    height: usize,
    labels: Vec<u16>,
    n_classes: usize,
    class_names: Option<Vec<String>>,
}

impl GroundTruthMap {
    /// Validates label contiguity and computes the class count.
    pub fn new(width: usize, height: usize, labels: Vec<u16>) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::LengthMismatch {
                left: labels.len(),
                right: width * height,
            });
        }
        let max = labels.iter().copied().max().unwrap_or(0) as usize;
        let mut present = vec![false; max + 1];
        for &l in &labels {
            present[l as usize] = true;
        }
        let missing: Vec<u16> = (1..=max)
            .filter(|&c| !present[c])
            .map(|c| c as u16)
            .collect();
        if !missing.is_empty() {
            return Err(Error::LabelGap { missing });
        }
        Ok(Self {
            width,
            height,
            labels,
            n_classes: max,
            class_names: None,
        })
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_classes {
            return Err(Error::LengthMismatch {
                left: names.len(),
                right: self.n_classes,
            });
        }
        self.class_names = Some(names);
        Ok(self)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn class_names(&self) -> Option<&[String]> {
        self.class_names.as_deref()
    }

    pub fn n_labeled(&self) -> usize {
        self.labels.iter().filter(|&&l| l != 0).count()
    }

    pub fn to_raster(&self) -> LabelRaster {
        LabelRaster {
            width: self.width,
            height: self.height,
            labels: self.labels.clone(),
            class_names: self.class_names.clone(),
        }
    }
}

pub fn load_cube(header_path: impl AsRef<Path>) -> Result<HyperspectralCube> {
    let path = header_path.as_ref();
    let header = read_header(path)?;
    if header.data_type != DataType::F32 {
        return Err(Error::header(path, "cube must have data type f32"));
    }
    let bytes = read_raw(path, &header)?;
    let data: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let cube = HyperspectralCube::new(header.width, header.height, header.n_bands, data)?;
    match header.wavelengths {
        Some(w) => cube.with_wavelengths(w),
        None => Ok(cube),
    }
}

pub fn save_cube(cube: &HyperspectralCube, header_path: impl AsRef<Path>) -> Result<()> {
    let header = CubeHeader {
        width: cube.width,
        height: cube.height,
        n_bands: cube.n_bands,
        data_type: DataType::F32,
        wavelengths: cube.wavelengths.clone(),
        classes: None,
        class_names: None,
    };
    let bytes: Vec<u8> = cube.data.iter().flat_map(|v| v.to_le_bytes()).collect();
    write_pair(header_path.as_ref(), &header, &bytes)
}

/// Loads any single-band u16 raster without class validation.
pub fn load_label_raster(header_path: impl AsRef<Path>) -> Result<LabelRaster> {
    let path = header_path.as_ref();
    let header = read_header(path)?;
    if header.data_type != DataType::U16 || header.n_bands != 1 {
        return Err(Error::header(
            path,
            "label raster must be a single u16 band",
        ));
    }
    let bytes = read_raw(path, &header)?;
    let labels = bytes
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect();
    Ok(LabelRaster {
        width: header.width,
        height: header.height,
        labels,
        class_names: header.class_names,
    })
}

pub fn save_label_raster(raster: &LabelRaster, header_path: impl AsRef<Path>) -> Result<()> {
    let header = CubeHeader {
        width: raster.width,
        height: raster.height,
        n_bands: 1,
        data_type: DataType::U16,
        wavelengths: None,
        classes: Some(raster.max_label() as usize),
        class_names: raster.class_names.clone(),
    };
    let bytes: Vec<u8> = raster.labels.iter().flat_map(|v| v.to_le_bytes()).collect();
    write_pair(header_path.as_ref(), &header, &bytes)
}

pub fn load_ground_truth(header_path: impl AsRef<Path>) -> Result<GroundTruthMap> {
    let path = header_path.as_ref();
    let header = read_header(path)?;
    let raster = load_label_raster(path)?;
    let gt = GroundTruthMap::new(raster.width, raster.height, raster.labels)?;
    if let Some(declared) = header.classes {
        if declared != gt.n_classes {
            return Err(Error::header(
                path,
                format!(
                    "declares {declared} classes, labels contain {}",
                    gt.n_classes
                ),
            ));
        }
    }
    match raster.class_names {
        Some(names) => gt.with_class_names(names),
        None => Ok(gt),
    }
}

pub fn save_ground_truth(gt: &GroundTruthMap, header_path: impl AsRef<Path>) -> Result<()> {
    save_label_raster(&gt.to_raster(), header_path)
}

/// Checks that a cube and a ground-truth map describe the same image.
pub fn check_pair(cube: &HyperspectralCube, gt: &GroundTruthMap) -> Result<()> {
    if cube.width != gt.width || cube.height != gt.height {
        return Err(Error::Dimension(format!(
            "cube is {}x{}, ground truth is {}x{}",
            cube.width, cube.height, gt.width, gt.height
        )));
    }
    Ok(())
}

/// A run of consecutive bands sharing one latent signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandGroup {
    pub size: usize,
    /// Population correlation between any two bands of the group, `[0, 1)`.
    pub rho: f64,
}

/// Recipe for a synthetic cube with known inter-band correlation.
///
/// Within a class, band `b` of group `g` at a pixel is
/// `mean[class][b] + noise_std * (sqrt(rho) * z_g + sqrt(1 - rho) * e_b)`
/// with `z_g` and `e_b` independent standard normals, so two bands of the
/// same group have correlation exactly `rho` and bands of different groups
/// are independent. Differences between class means add between-class
/// covariance on top of that. Classes occupy equal-width vertical stripes
/// inside an optional background border.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub width: usize,
    pub height: usize,
    pub groups: Vec<BandGroup>,
    /// One mean spectrum (length = total band count) per class.
    pub class_means: Vec<Vec<f64>>,
    pub noise_std: f64,
    #[serde(default)]
    pub background_border: usize,
}

impl SyntheticSpec {
    pub fn n_bands(&self) -> usize {
        self.groups.iter().map(|g| g.size).sum()
    }

    pub fn n_classes(&self) -> usize {
        self.class_means.len()
    }

    /// Small four-class scene: a 12-band group at rho 0.95 followed by four
    /// independent bands. At the default threshold only the independent bands
    /// survive.
    pub fn demo() -> Self {
        let mut groups = vec![BandGroup {
            size: 12,
            rho: 0.95,
        }];
        groups.extend((0..4).map(|_| BandGroup { size: 1, rho: 0.0 }));
        let group_of = |b: usize| b.saturating_sub(11);
        let class_means = (0..4)
            .map(|c| {
                (0..16)
                    .map(|b| ((c * 3 + group_of(b) * 2) % 5) as f64 * 0.6)
                    .collect()
            })
            .collect();
        Self {
            width: 64,
            height: 48,
            groups,
            class_means,
            noise_std: 1.0,
            background_border: 2,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(format!("synthetic spec: {m}")));
        if self.width == 0 || self.height == 0 {
            return bad("width and height must be at least 1".into());
        }
        if self.groups.is_empty() {
            return bad("no band groups".into());
        }
        for (i, g) in self.groups.iter().enumerate() {
            if g.size == 0 {
                return bad(format!("group {i} has size 0"));
            }
            if !(0.0..1.0).contains(&g.rho) {
                return bad(format!("group {i} rho {} outside [0, 1)", g.rho));
            }
        }
        let n = self.n_bands();
        if n < 2 {
            return bad("need at least 2 bands".into());
        }
        if self.class_means.is_empty() || self.class_means.len() > u16::MAX as usize {
            return bad("need at least one class".into());
        }
        if let Some(c) = self.class_means.iter().position(|m| m.len() != n) {
            return bad(format!("class {} mean spectrum length != {n}", c + 1));
        }
        if !self.class_means.iter().flatten().all(|v| v.is_finite()) {
            return bad("non-finite class mean".into());
        }
        if !(self.noise_std.is_finite() && self.noise_std > 0.0) {
            return bad("noise_std must be positive".into());
        }
        let inner_w = self.width.saturating_sub(2 * self.background_border);
        let inner_h = self.height.saturating_sub(2 * self.background_border);
        if inner_w < self.n_classes() || inner_h == 0 {
            return bad("background border leaves no room for every class".into());
        }
        Ok(())
    }

    fn label_at(&self, row: usize, col: usize) -> u16 {
        let b = self.background_border;
        if row < b || row >= self.height - b || col < b || col >= self.width - b {
            return 0;
        }
        let inner_w = self.width - 2 * b;
        (1 + (col - b) * self.n_classes() / inner_w) as u16
    }
}

/// Generates a cube and its ground truth; a pure function of `(spec, seed)`.
pub fn synthesize_cube(
    spec: &SyntheticSpec,
    seed: u64,
) -> Result<(HyperspectralCube, GroundTruthMap)> {
    spec.validate()?;
    let (w, h, n) = (spec.width, spec.height, spec.n_bands());
    let plane = w * h;
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut data = vec![0f32; plane * n];
    let mut labels = vec![0u16; plane];
    let zero_mean = vec![0.0; n];

    for row in 0..h {
        for col in 0..w {
            let p = row * w + col;
            let label = spec.label_at(row, col);
            labels[p] = label;
            let mean = match label {
                0 => &zero_mean,
                c => &spec.class_means[c as usize - 1],
            };
            let mut band = 0;
            for g in &spec.groups {
                let shared: f64 = StandardNormal.sample(&mut rng);
                let (a, b) = (g.rho.sqrt(), (1.0 - g.rho).sqrt());
                for _ in 0..g.size {
                    let own: f64 = StandardNormal.sample(&mut rng);
                    let v = mean[band] + spec.noise_std * (a * shared + b * own);
                    data[band * plane + p] = v as f32;
                    band += 1;
                }
            }
        }
    }

    let cube = HyperspectralCube::new(w, h, n, data)?;
    let gt = GroundTruthMap::new(w, h, labels)?;
    Ok((cube, gt))
}
