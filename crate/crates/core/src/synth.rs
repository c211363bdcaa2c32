//! Procedural multispectral/panchromatic scenes with known spectral mixing.
//!
//! A latent reflectance image is painted at PAN resolution from a handful of
//! random material spectra (background plus rectangles and discs, modulated by
//! smooth shading). The PAN band is a fixed convex combination of the latent
//! bands and the observed MS image is the latent image downsampled by the
//! scale factor, so PAN detail and MS spectra are consistent by construction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::resample::{bicubic_downsample, ScenePair};
use crate::tensor::{Shape, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub bands: usize,
    /// Side of the observed MS image.
    pub ms_size: usize,
    pub scale: usize,
    pub materials: usize,
    pub shapes: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            bands: 4,
            ms_size: 64,
            scale: 4,
            materials: 6,
            shapes: 14,
        }
    }
}

/// Weights mapping MS bands to PAN: a smooth bump over the band axis, normalised to sum 1.
pub fn pan_weights(bands: usize) -> Vec<f64> {
    let centre = (bands as f64 - 1.0) * 0.6;
    let raw: Vec<f64> = (0..bands)
        .map(|b| 1.0 / (1.0 + ((b as f64 - centre) / (bands as f64 * 0.5)).powi(2)))
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Latent full-resolution reflectance `1 × bands × H × W`, `H = ms_size·scale`.
pub fn latent_image(config: &SynthConfig, seed: u64) -> Result<Tensor<f32>> {
    if config.bands == 0 || config.materials == 0 || config.ms_size == 0 || config.scale < 2 {
        return Err(Error::Config(format!("invalid synthetic scene settings {config:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = config.ms_size * config.scale;
    let spectra: Vec<Vec<f64>> = (0..config.materials)
        .map(|_| (0..config.bands).map(|_| rng.random_range(0.1..0.9)).collect())
        .collect();

    let mut label = vec![0usize; size * size];
    for _ in 0..config.shapes {
        let material = rng.random_range(0..config.materials);
        let cy = rng.random_range(0.0..size as f64);
        let cx = rng.random_range(0.0..size as f64);
        let extent = rng.random_range(size as f64 * 0.04..size as f64 * 0.25);
        let disc = rng.random_bool(0.5);
        let aspect = rng.random_range(0.4..1.0);
        for y in 0..size {
            for x in 0..size {
                let dy = (y as f64 + 0.5 - cy) / extent;
                let dx = (x as f64 + 0.5 - cx) / (extent * aspect);
                let inside = if disc { dy * dy + dx * dx <= 1.0 } else { dy.abs() <= 1.0 && dx.abs() <= 1.0 };
                if inside {
                    label[y * size + x] = material;
                }
            }
        }
    }

    let (fy, fx, phase) = (
        rng.random_range(1.0..3.0) * std::f64::consts::TAU / size as f64,
        rng.random_range(1.0..3.0) * std::f64::consts::TAU / size as f64,
        rng.random_range(0.0..std::f64::consts::TAU),
    );
    let texture: Vec<f64> = (0..size * size).map(|_| rng.random_range(-1.0..1.0)).collect();
    let shade = |y: usize, x: usize| 1.0 + 0.15 * (fy * y as f64 + phase).sin() * (fx * x as f64).cos();

    Ok(Tensor::from_fn(Shape::new(1, config.bands, size, size), |_, b, y, x| {
        let i = y * size + x;
        let v = spectra[label[i]][b] * shade(y, x) * (1.0 + 0.03 * texture[i]);
        v as f32
    }))
}

/// Observed scene: MS at `ms_size`, PAN at `ms_size·scale`, no reference.
pub fn observed_scene(config: &SynthConfig, seed: u64) -> Result<ScenePair<f32>> {
    let latent = latent_image(config, seed)?;
    let weights = pan_weights(config.bands);
    let s = latent.shape();
    let pan = Tensor::from_fn(s.with_channels(1), |_, _, y, x| {
        weights
            .iter()
            .enumerate()
            .map(|(b, w)| w * latent.at(0, b, y, x) as f64)
            .sum::<f64>() as f32
    });
    let ms = bicubic_downsample(&latent, config.scale)?;
    ScenePair::new(ms, pan, config.scale, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenes_are_seeded_and_well_formed() {
        let c = SynthConfig {
            ms_size: 16,
            ..Default::default()
        };
        let a = observed_scene(&c, 3).unwrap();
        assert_eq!(a, observed_scene(&c, 3).unwrap());
        assert_ne!(a, observed_scene(&c, 4).unwrap());
        assert_eq!(a.ms.shape(), Shape::new(1, 4, 16, 16));
        assert_eq!(a.pan.shape(), Shape::new(1, 1, 64, 64));
        assert!(a.ms.data().iter().all(|v| v.is_finite() && *v > 0.0));
    }

    #[test]
    fn pan_weights_are_convex() {
        for bands in [1, 4, 8] {
            let w = pan_weights(bands);
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(w.iter().all(|&v| v > 0.0));
        }
    }
}
