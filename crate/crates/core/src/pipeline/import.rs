//! Conversion of externally produced rasters into the internal format.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::cube::{GroundTruthMap, HyperspectralCube};
use crate::error::{Error, Result};

/// Element type of an input raw file (little-endian).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RawType {
    U8,
    U16,
    I16,
    F32,
    F64,
}

impl RawType {
    fn size(self) -> usize {
        match self {
            RawType::U8 => 1,
            RawType::U16 | RawType::I16 => 2,
            RawType::F32 => 4,
            RawType::F64 => 8,
        }
    }

    fn decode(self, b: &[u8]) -> f64 {
        match self {
            RawType::U8 => b[0] as f64,
            RawType::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            RawType::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            RawType::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            RawType::F64 => f64::from_le_bytes(b.try_into().expect("8 bytes")),
        }
    }
}

impl FromStr for RawType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "u8" => Ok(RawType::U8),
            "u16" => Ok(RawType::U16),
            "i16" => Ok(RawType::I16),
            "f32" => Ok(RawType::F32),
            "f64" => Ok(RawType::F64),
            other => Err(Error::InvalidParameter(format!(
                "unsupported input type `{other}`"
            ))),
        }
    }
}

/// Sample order of an input raw file. BIP is what a C-order `H × W × N`
/// array dump produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RawLayout {
    Bsq,
    Bip,
}

impl FromStr for RawLayout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bsq" => Ok(RawLayout::Bsq),
            "bip" => Ok(RawLayout::Bip),
            other => Err(Error::InvalidParameter(format!(
                "unsupported input layout `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RawDims {
    pub width: usize,
    pub height: usize,
    pub bands: usize,
}

fn read_exact_size(path: &Path, expected: usize) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != expected {
        return Err(Error::RawSize {
            path: path.to_path_buf(),
            expected: expected as u64,
            actual: bytes.len() as u64,
        });
    }
    Ok(bytes)
}

/// Reads an external raw cube and converts it to f32 BSQ.
pub fn import_cube(
    path: &Path,
    dims: RawDims,
    ty: RawType,
    layout: RawLayout,
) -> Result<HyperspectralCube> {
    let RawDims {
        width,
        height,
        bands,
    } = dims;
    let plane = width * height;
    let size = ty.size();
    let bytes = read_exact_size(path, plane * bands * size)?;
    let mut data = vec![0f32; plane * bands];
    for (k, chunk) in bytes.chunks_exact(size).enumerate() {
        let dst = match layout {
            RawLayout::Bsq => k,
            RawLayout::Bip => (k % bands) * plane + k / bands,
        };
        data[dst] = ty.decode(chunk) as f32;
    }
    HyperspectralCube::new(width, height, bands, data)
}

/// Reads an external single-band label raster.
pub fn import_ground_truth(
    path: &Path,
    width: usize,
    height: usize,
    ty: RawType,
) -> Result<GroundTruthMap> {
    let size = ty.size();
    let bytes = read_exact_size(path, width * height * size)?;
    let labels = bytes
        .chunks_exact(size)
        .map(|c| {
            let v = ty.decode(c);
            if v.fract() != 0.0 || !(0.0..=u16::MAX as f64).contains(&v) {
                Err(Error::InvalidParameter(format!("label {v} is not a u16")))
            } else {
                Ok(v as u16)
            }
        })
        .collect::<Result<Vec<u16>>>()?;
    GroundTruthMap::new(width, height, labels)
}
