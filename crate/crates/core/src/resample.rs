//! Bicubic resampling, network input construction and reduced-resolution
//! (Wald) scene simulation.
//!
//! Both resamplers use the Keys cubic kernel with `a = −0.5`, pixel-centre
//! alignment (`src = (dst + 0.5)·ratio − 0.5`) and clamp-to-edge sampling.
//! Downsampling stretches the kernel by the scale factor so it acts as an
//! anti-aliasing low-pass filter (`4·scale` taps per axis).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::optim::Sample;
use crate::real::Real;
use crate::tensor::{Shape, Tensor};

pub const DEFAULT_SCALE: usize = 4;
const KEYS_A: f64 = -0.5;

fn keys(x: f64) -> f64 {
    let t = x.abs();
    if t <= 1.0 {
        ((KEYS_A + 2.0) * t - (KEYS_A + 3.0)) * t * t + 1.0
    } else if t < 2.0 {
        ((KEYS_A * t - 5.0 * KEYS_A) * t + 8.0 * KEYS_A) * t - 4.0 * KEYS_A
    } else {
        0.0
    }
}

/// Source indices and normalised weights contributing to each output sample.
type Taps = Vec<Vec<(usize, f64)>>;

fn taps(n_in: usize, n_out: usize, ratio: f64, stretch: f64) -> Taps {
    let support = 2.0 * stretch;
    (0..n_out)
        .map(|o| {
            let centre = (o as f64 + 0.5) * ratio - 0.5;
            let lo = (centre - support).floor() as isize;
            let hi = (centre + support).ceil() as isize;
            let mut taps: Vec<(usize, f64)> = Vec::with_capacity((hi - lo + 1) as usize);
            for j in lo..=hi {
                let w = keys((j as f64 - centre) / stretch);
                if w != 0.0 {
                    taps.push((j.clamp(0, n_in as isize - 1) as usize, w));
                }
            }
            let total: f64 = taps.iter().map(|t| t.1).sum();
            taps.iter_mut().for_each(|t| t.1 /= total);
            taps
        })
        .collect()
}

fn resample_planes<T: Real>(img: &Tensor<T>, oh: usize, ow: usize, rows: &Taps, cols: &Taps) -> Tensor<T> {
    let s = img.shape();
    let out_shape = Shape { h: oh, w: ow, ..s };
    let mut out = Tensor::zeros(out_shape);
    let mut tmp = vec![0.0f64; s.h * ow];
    for n in 0..s.n {
        for c in 0..s.c {
            let src = img.plane(n, c);
            for y in 0..s.h {
                let row = &src[y * s.w..(y + 1) * s.w];
                for (x, col_taps) in cols.iter().enumerate() {
                    tmp[y * ow + x] = col_taps.iter().map(|&(j, w)| w * row[j].as_f64()).sum();
                }
            }
            let dst = out.plane_mut(n, c);
            for (y, row_taps) in rows.iter().enumerate() {
                for x in 0..ow {
                    let v: f64 = row_taps.iter().map(|&(j, w)| w * tmp[j * ow + x]).sum();
                    dst[y * ow + x] = T::from_f64_lossy(v);
                }
            }
        }
    }
    out
}

fn check_scale(scale: usize) -> Result<()> {
    if scale < 2 {
        return Err(Error::Resample(format!("scale factor must be at least 2, got {scale}")));
    }
    Ok(())
}

/// Enlarges every plane by `scale` in both directions.
pub fn bicubic_upsample<T: Real>(img: &Tensor<T>, scale: usize) -> Result<Tensor<T>> {
    check_scale(scale)?;
    let s = img.shape();
    let ratio = 1.0 / scale as f64;
    let rows = taps(s.h, s.h * scale, ratio, 1.0);
    let cols = taps(s.w, s.w * scale, ratio, 1.0);
    Ok(resample_planes(img, s.h * scale, s.w * scale, &rows, &cols))
}

/// Shrinks every plane by `scale` with an anti-aliased (stretched) bicubic filter.
pub fn bicubic_downsample<T: Real>(img: &Tensor<T>, scale: usize) -> Result<Tensor<T>> {
    check_scale(scale)?;
    let s = img.shape();
    if s.h % scale != 0 || s.w % scale != 0 {
        return Err(Error::Resample(format!(
            "image size {}x{} is not divisible by {scale}; crop it to {}x{} first",
            s.h,
            s.w,
            s.h / scale * scale,
            s.w / scale * scale
        )));
    }
    let (oh, ow) = (s.h / scale, s.w / scale);
    let ratio = scale as f64;
    let rows = taps(s.h, oh, ratio, ratio);
    let cols = taps(s.w, ow, ratio, ratio);
    Ok(resample_planes(img, oh, ow, &rows, &cols))
}

/// Co-registered multispectral / panchromatic pair, optionally with the
/// full-resolution multispectral reference.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenePair<T = f32> {
    /// `1 × S × H/scale × W/scale`
    pub ms: Tensor<T>,
    /// `1 × 1 × H × W`
    pub pan: Tensor<T>,
    pub scale: usize,
    /// `1 × S × H × W`
    pub truth: Option<Tensor<T>>,
}

impl<T: Real> ScenePair<T> {
    pub fn new(ms: Tensor<T>, pan: Tensor<T>, scale: usize, truth: Option<Tensor<T>>) -> Result<Self> {
        let scene = ScenePair { ms, pan, scale, truth };
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        check_scale(self.scale)?;
        let (m, p) = (self.ms.shape(), self.pan.shape());
        if m.n != 1 || p.n != 1 || p.c != 1 || m.c == 0 {
            return Err(Error::Config(format!(
                "scene needs a 1xSxhxw MS image and a 1x1xHxW PAN image, got {m} and {p}"
            )));
        }
        if p.h != m.h * self.scale || p.w != m.w * self.scale {
            return Err(Error::Config(format!(
                "PAN {}x{} is not {} times MS {}x{}",
                p.h, p.w, self.scale, m.h, m.w
            )));
        }
        if let Some(t) = &self.truth {
            let expected = Shape::new(1, m.c, p.h, p.w);
            if t.shape() != expected {
                return Err(Error::ShapeMismatch {
                    op: "scene truth",
                    expected,
                    actual: t.shape(),
                });
            }
        }
        Ok(())
    }

    pub fn bands(&self) -> usize {
        self.ms.shape().c
    }

    /// Largest top-left crop whose MS size is divisible by `scale`, the
    /// precondition of [`wald_simulate`].
    pub fn crop_for_simulation(&self) -> Result<Self> {
        let m = self.ms.shape();
        let (h, w) = (m.h / self.scale * self.scale, m.w / self.scale * self.scale);
        if h == 0 || w == 0 {
            return Err(Error::Resample(format!(
                "MS image {}x{} is smaller than the scale factor {}",
                m.h, m.w, self.scale
            )));
        }
        let s = self.scale;
        ScenePair::new(
            self.ms.crop(0, 0, h, w)?,
            self.pan.crop(0, 0, h * s, w * s)?,
            s,
            self.truth.as_ref().map(|t| t.crop(0, 0, h * s, w * s)).transpose()?,
        )
    }
}

/// Network input: bicubically upsampled MS bands followed by the PAN band.
pub fn build_input<T: Real>(scene: &ScenePair<T>) -> Result<Tensor<T>> {
    scene.validate()?;
    let up = bicubic_upsample(&scene.ms, scene.scale)?;
    Tensor::concat_channels(&up, &scene.pan)
}

/// Degrades an observed scene by `scale`; the original MS becomes the truth.
pub fn wald_simulate<T: Real>(scene: &ScenePair<T>) -> Result<ScenePair<T>> {
    scene.validate()?;
    if scene.truth.is_some() {
        return Err(Error::Config("scene already carries a reference; simulate from observed data only".into()));
    }
    let m = scene.ms.shape();
    let s = scene.scale;
    if m.h % s != 0 || m.w % s != 0 {
        return Err(Error::Resample(format!(
            "MS image {}x{} is not divisible by scale {s}; crop MS to {}x{} and PAN to {}x{} first",
            m.h,
            m.w,
            m.h / s * s,
            m.w / s * s,
            m.h / s * s * s,
            m.w / s * s * s
        )));
    }
    ScenePair::new(
        bicubic_downsample(&scene.ms, s)?,
        bicubic_downsample(&scene.pan, s)?,
        s,
        Some(scene.ms.clone()),
    )
}

/// Sliding-window training pairs over a scene with a reference, in seeded random order.
pub fn extract_patches<T: Real>(scene: &ScenePair<T>, patch: usize, stride: usize, seed: u64) -> Result<Vec<Sample<T>>> {
    let truth = scene
        .truth
        .as_ref()
        .ok_or_else(|| Error::Config("patch extraction needs a scene with a reference image".into()))?;
    if stride == 0 || patch == 0 {
        return Err(Error::Config("patch size and stride must be positive".into()));
    }
    let g = build_input(scene)?;
    let s = g.shape();
    if patch > s.h || patch > s.w {
        return Err(Error::Config(format!(
            "patch {patch} larger than scene {}x{}",
            s.h, s.w
        )));
    }
    let mut pairs = Vec::new();
    for y in (0..=s.h - patch).step_by(stride) {
        for x in (0..=s.w - patch).step_by(stride) {
            pairs.push((g.crop(y, x, patch, patch)?, truth.crop(y, x, patch, patch)?));
        }
    }
    pairs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize) -> Tensor<f64> {
        Tensor::from_fn(Shape::new(1, 1, h, w), |_, _, y, x| 0.5 + 0.25 * y as f64 - 0.125 * x as f64)
    }

    #[test]
    fn keys_matches_reference_values() {
        assert_eq!(keys(0.0), 1.0);
        assert_eq!(keys(1.0), 0.0);
        assert_eq!(keys(2.0), 0.0);
        assert!((keys(0.5) - 0.5625).abs() < 1e-15);
        assert!((keys(1.5) + 0.0625).abs() < 1e-15);
    }

    #[test]
    fn downsample_tap_count() {
        for s in [2, 3, 4] {
            let t = taps(64, 64 / s, s as f64, s as f64);
            // interior outputs see 4·s taps; for odd s three of them land
            // exactly on the kernel's zeros at ±1 and ±2 and are dropped
            let mid = &t[t.len() / 2];
            let expected = if s % 2 == 0 { 4 * s } else { 4 * s - 3 };
            assert_eq!(mid.len(), expected, "scale {s}");
            let sum: f64 = mid.iter().map(|p| p.1).sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constants_are_preserved() {
        let c = Tensor::<f32>::full(Shape::new(1, 3, 5, 7), 0.7);
        let up = bicubic_upsample(&c, 4).unwrap();
        assert_eq!(up.shape(), Shape::new(1, 3, 20, 28));
        assert!(up.data().iter().all(|&v| (v - 0.7).abs() < 1e-6));
        let c = Tensor::<f32>::full(Shape::new(1, 2, 8, 12), -3.25);
        let down = bicubic_downsample(&c, 4).unwrap();
        assert_eq!(down.shape(), Shape::new(1, 2, 2, 3));
        assert!(down.data().iter().all(|&v| (v + 3.25).abs() < 1e-6));
    }

    #[test]
    fn upsample_reproduces_ramps_away_from_borders() {
        let scale = 4;
        let img = ramp(8, 8);
        let up = bicubic_upsample(&img, scale).unwrap();
        for y in 2 * scale..6 * scale {
            for x in 2 * scale..6 * scale {
                let sy = (y as f64 + 0.5) / scale as f64 - 0.5;
                let sx = (x as f64 + 0.5) / scale as f64 - 0.5;
                let expected = 0.5 + 0.25 * sy - 0.125 * sx;
                let got = up.at(0, 0, y, x);
                assert!((got - expected).abs() <= 1e-5 * expected.abs().max(1e-3), "({y},{x}) {got} vs {expected}");
            }
        }
    }

    #[test]
    fn resamplers_reject_bad_input() {
        let img = Tensor::<f32>::zeros(Shape::new(1, 1, 10, 8));
        assert!(bicubic_upsample(&img, 1).is_err());
        let err = bicubic_downsample(&img, 4).unwrap_err().to_string();
        assert!(err.contains("crop it to 8x8"), "{err}");
    }

    #[test]
    fn channels_are_independent() {
        let img = Tensor::<f64>::from_fn(Shape::new(1, 3, 8, 8), |_, c, y, x| ((c + 1) * (y * 8 + x)) as f64 % 7.0);
        let swapped = Tensor::<f64>::from_fn(img.shape(), |_, c, y, x| img.at(0, 2 - c, y, x));
        for f in [bicubic_upsample::<f64>, bicubic_downsample::<f64>] {
            let a = f(&img, 2).unwrap();
            let b = f(&swapped, 2).unwrap();
            let s = a.shape();
            let a_swapped = Tensor::from_fn(s, |_, c, y, x| a.at(0, 2 - c, y, x));
            assert_eq!(a_swapped, b);
        }
    }

    fn scene(ms_hw: usize, bands: usize, scale: usize) -> ScenePair<f32> {
        let ms = Tensor::from_fn(Shape::new(1, bands, ms_hw, ms_hw), |_, c, y, x| (c + y + x) as f32 * 0.1);
        let pan = Tensor::from_fn(Shape::new(1, 1, ms_hw * scale, ms_hw * scale), |_, _, y, x| (y * 31 + x) as f32 * 0.01);
        ScenePair::new(ms, pan, scale, None).unwrap()
    }

    #[test]
    fn scene_invariants() {
        let s = scene(4, 4, 4);
        let bad_pan = Tensor::<f32>::zeros(Shape::new(1, 1, 15, 16));
        assert!(ScenePair::new(s.ms.clone(), bad_pan, 4, None).is_err());
        assert!(ScenePair::new(s.ms.clone(), s.pan.clone(), 1, None).is_err());
        let bad_truth = Tensor::<f32>::zeros(Shape::new(1, 3, 16, 16));
        assert!(ScenePair::new(s.ms, s.pan, 4, Some(bad_truth)).is_err());
    }

    #[test]
    fn build_input_layout() {
        let s = scene(4, 4, 4);
        let g = build_input(&s).unwrap();
        assert_eq!(g.shape(), Shape::new(1, 5, 16, 16));
        assert_eq!(g.plane(0, 4), s.pan.data());

        let flat = ScenePair::new(
            Tensor::from_fn(Shape::new(1, 4, 4, 4), |_, c, _, _| c as f32 + 0.5),
            Tensor::full(Shape::new(1, 1, 16, 16), 9.0),
            4,
            None,
        )
        .unwrap();
        let g = build_input(&flat).unwrap();
        for c in 0..4 {
            assert!(g.plane(0, c).iter().all(|&v| (v - (c as f32 + 0.5)).abs() < 1e-6));
        }
        assert!(g.plane(0, 4).iter().all(|&v| v == 9.0));
    }

    #[test]
    fn wald_simulation_shapes_and_truth() {
        let s = scene(8, 4, 4);
        let reduced = wald_simulate(&s).unwrap();
        assert_eq!(reduced.ms.shape(), Shape::new(1, 4, 2, 2));
        assert_eq!(reduced.pan.shape(), Shape::new(1, 1, 8, 8));
        let truth = reduced.truth.as_ref().unwrap();
        assert_eq!(truth, &s.ms);
        assert_eq!(truth.shape().h, reduced.scale * reduced.ms.shape().h);
        assert!(wald_simulate(&reduced).is_err());
    }

    #[test]
    fn wald_simulation_needs_divisible_size() {
        let ms = Tensor::<f32>::zeros(Shape::new(1, 4, 250, 250));
        let pan = Tensor::<f32>::zeros(Shape::new(1, 1, 1000, 1000));
        let s = ScenePair::new(ms, pan, 4, None).unwrap();
        let err = wald_simulate(&s).unwrap_err().to_string();
        assert!(err.contains("crop MS to 248x248"), "{err}");
        let cropped = s.crop_for_simulation().unwrap();
        assert_eq!(cropped.ms.shape(), Shape::new(1, 4, 248, 248));
        assert_eq!(cropped.pan.shape(), Shape::new(1, 1, 992, 992));
    }

    #[test]
    fn constant_scene_simulates_to_constants() {
        let s = ScenePair::new(
            Tensor::<f32>::full(Shape::new(1, 2, 8, 8), 0.25),
            Tensor::full(Shape::new(1, 1, 32, 32), 0.5),
            4,
            None,
        )
        .unwrap();
        let r = wald_simulate(&s).unwrap();
        assert!(r.ms.data().iter().all(|&v| (v - 0.25).abs() < 1e-6));
        assert!(r.pan.data().iter().all(|&v| (v - 0.5).abs() < 1e-6));
        assert_eq!(r.truth.unwrap(), s.ms);
    }

    #[test]
    fn patch_tiling() {
        let r = wald_simulate(&scene(64, 4, 4)).unwrap();
        assert_eq!(r.truth.as_ref().unwrap().shape().h, 64);
        assert_eq!(extract_patches(&r, 32, 32, 0).unwrap().len(), 4);
        assert_eq!(extract_patches(&r, 64, 5, 0).unwrap().len(), 1);
        assert_eq!(extract_patches(&r, 32, 16, 0).unwrap().len(), 9);
        assert!(extract_patches(&r, 65, 1, 0).is_err());
        assert!(extract_patches(&scene(4, 4, 4), 8, 8, 0).is_err());

        let g = build_input(&r).unwrap();
        let truth = r.truth.as_ref().unwrap();
        for (gp, tp) in extract_patches(&r, 16, 16, 7).unwrap() {
            // locate the window through the PAN channel, then compare the truth window bitwise
            let found = (0..4).flat_map(|by| (0..4).map(move |bx| (by * 16, bx * 16))).find(|&(y, x)| {
                g.crop(y, x, 16, 16).unwrap() == gp
            });
            let (y, x) = found.expect("patch comes from a grid window");
            assert_eq!(truth.crop(y, x, 16, 16).unwrap(), tp);
        }
        let a = extract_patches(&r, 16, 16, 7).unwrap();
        let b = extract_patches(&r, 16, 16, 7).unwrap();
        assert_eq!(a, b);
    }
}
