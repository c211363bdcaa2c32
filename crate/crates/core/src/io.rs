//! Tensor files, scene manifests and true-colour previews.
//!
//! # PFT tensor files
//!
//! ```text
//! magic   4 bytes        "PFT1"
//! rank    u32 LE         1..=4
//! dims    rank × u32 LE  outermost first
//! payload f32 LE         product(dims) values, row-major, last dim fastest
//! ```
//!
//! Tensors of rank < 4 are read as `1 × … × dims` (leading axes of size 1).
//! Files are always written with rank 4.

use std::path::{Path, PathBuf};

use byteorder::{ByteOrder, LittleEndian};
use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::resample::ScenePair;
use crate::tensor::{Shape, Tensor};

const PFT_MAGIC: &[u8; 4] = b"PFT1";

pub fn encode_tensor(t: &Tensor<f32>) -> Vec<u8> {
    let s = t.shape();
    let mut out = Vec::with_capacity(24 + t.len() * 4);
    out.extend_from_slice(PFT_MAGIC);
    out.extend_from_slice(&4u32.to_le_bytes());
    for d in [s.n, s.c, s.h, s.w] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in t.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_tensor(bytes: &[u8]) -> std::result::Result<Tensor<f32>, String> {
    if bytes.len() < 8 {
        return Err("file too short for a PFT header".into());
    }
    if &bytes[..4] != PFT_MAGIC {
        return Err(format!("bad magic {:?}, expected \"PFT1\"", String::from_utf8_lossy(&bytes[..4])));
    }
    let rank = LittleEndian::read_u32(&bytes[4..8]) as usize;
    if !(1..=4).contains(&rank) {
        return Err(format!("rank {rank} not supported (1 to 4)"));
    }
    let header = 8 + 4 * rank;
    if bytes.len() < header {
        return Err("truncated dimension list".into());
    }
    let mut dims = [1usize; 4];
    for i in 0..rank {
        dims[4 - rank + i] = LittleEndian::read_u32(&bytes[8 + 4 * i..12 + 4 * i]) as usize;
    }
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .and_then(|c| c.checked_mul(4))
        .ok_or_else(|| format!("dimensions {dims:?} overflow"))?;
    let payload = &bytes[header..];
    if payload.len() != count {
        return Err(format!(
            "payload length {} bytes does not match dimensions {dims:?} ({count} bytes)",
            payload.len()
        ));
    }
    let data = payload.chunks_exact(4).map(LittleEndian::read_f32).collect();
    Tensor::from_vec(Shape::new(dims[0], dims[1], dims[2], dims[3]), data).map_err(|e| e.to_string())
}

pub fn write_tensor(path: impl AsRef<Path>, t: &Tensor<f32>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_tensor(t)).map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor<f32>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_tensor(&bytes).map_err(|reason| Error::format(path, reason))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// One `[[scene]]` table of a manifest. Relative paths are resolved against
/// the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneEntry {
    pub name: String,
    pub ms: PathBuf,
    pub pan: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<PathBuf>,
    pub scale: usize,
    pub bands: usize,
    pub split: Split,
}

/// TOML list of scenes:
///
/// ```toml
/// [[scene]]
/// name = "tile_000"
/// ms = "tile_000_ms.pft"
/// pan = "tile_000_pan.pft"
/// truth = "tile_000_truth.pft"   # optional
/// scale = 4
/// bands = 4
/// split = "train"                # or "test"
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneManifest {
    #[serde(default, rename = "scene")]
    pub scenes: Vec<SceneEntry>,
}

impl SceneManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = toml::to_string(self).map_err(|e| Error::format(path, e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone)]
pub struct LoadedScene {
    pub entry: SceneEntry,
    pub scene: ScenePair<f32>,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn load_entry(base: &Path, entry: &SceneEntry) -> Result<ScenePair<f32>> {
    let fail = |reason: String| Error::Scene {
        scene: entry.name.clone(),
        reason,
    };
    let ms = read_tensor(resolve(base, &entry.ms)).map_err(|e| fail(e.to_string()))?;
    let pan = read_tensor(resolve(base, &entry.pan)).map_err(|e| fail(e.to_string()))?;
    let truth = entry
        .truth
        .as_ref()
        .map(|p| read_tensor(resolve(base, p)))
        .transpose()
        .map_err(|e| fail(e.to_string()))?;
    if ms.shape().c != entry.bands {
        return Err(fail(format!(
            "manifest declares {} bands but {} has {}",
            entry.bands,
            entry.ms.display(),
            ms.shape().c
        )));
    }
    ScenePair::new(ms, pan, entry.scale, truth).map_err(|e| fail(e.to_string()))
}

/// Loads and validates every scene, in manifest order. Stops at the first bad scene.
pub fn load_scenes(manifest: impl AsRef<Path>) -> Result<Vec<LoadedScene>> {
    let manifest = manifest.as_ref();
    let base = manifest.parent().unwrap_or(Path::new("."));
    SceneManifest::load(manifest)?
        .scenes
        .into_iter()
        .map(|entry| {
            let scene = load_entry(base, &entry)?;
            Ok(LoadedScene { entry, scene })
        })
        .collect()
}

/// Value at the `p`-quantile (nearest rank) of `values`.
fn percentile(sorted: &[f32], p: f64) -> f32 {
    let idx = (p * (sorted.len() - 1) as f64).round() as usize;
    sorted[idx]
}

/// Renders three bands of item 0 as 8-bit RGB, each stretched linearly from
/// its 1st to its 99th percentile. Constant bands render as mid-grey.
pub fn render_truecolor(img: &Tensor<f32>, band_map: [usize; 3]) -> Result<RgbImage> {
    let s = img.shape();
    if let Some(&b) = band_map.iter().find(|&&b| b >= s.c) {
        return Err(Error::Config(format!("band index {b} out of range for {} bands", s.c)));
    }
    if s.is_empty() {
        return Err(Error::Config("cannot render an empty image".into()));
    }
    let channels: Vec<Vec<u8>> = band_map
        .iter()
        .map(|&b| {
            let plane = img.plane(0, b);
            let mut sorted = plane.to_vec();
            sorted.sort_by(f32::total_cmp);
            let (lo, hi) = (percentile(&sorted, 0.01), percentile(&sorted, 0.99));
            plane
                .iter()
                .map(|&v| {
                    if hi > lo {
                        (((v - lo) / (hi - lo)) * 255.0).round().clamp(0.0, 255.0) as u8
                    } else {
                        128
                    }
                })
                .collect()
        })
        .collect();
    Ok(RgbImage::from_fn(s.w as u32, s.h as u32, |x, y| {
        let i = y as usize * s.w + x as usize;
        Rgb([channels[0][i], channels[1][i], channels[2][i]])
    }))
}

/// Writes [`render_truecolor`] output; the format follows the file extension (PNG recommended).
pub fn export_truecolor(img: &Tensor<f32>, band_map: [usize; 3], path: impl AsRef<Path>) -> Result<()> {
    render_truecolor(img, band_map)?.save(path.as_ref())?;
    Ok(())
}
