use std::path::{Path, PathBuf};

use drpnn_core::io::{export_truecolor, read_tensor};
use drpnn_core::model::load_checkpoint;
use drpnn_core::{bicubic_upsample, build_input, predict, NetworkParams, NetworkSpec, ScenePair, Tensor};

use super::{normalized, Outputs};
use crate::error::Result;

/// How a scene is fused: the trained network or the plain bicubic baseline.
#[derive(Debug, Clone)]
pub enum Fuser {
    Bicubic,
    Network { params: NetworkParams<f32>, spec: NetworkSpec },
}

impl Fuser {
    pub fn load(checkpoint: &Path) -> Result<Self> {
        let (params, spec) = load_checkpoint(checkpoint)?;
        Ok(Fuser::Network { params, spec })
    }
}

/// Fused `1 × S × H × W` image at PAN resolution. Inputs are divided by
/// `normalize` before the network sees them and the output is scaled back.
pub fn fuse_scene(fuser: &Fuser, scene: &ScenePair<f32>, normalize: f64) -> Result<Tensor<f32>> {
    scene.validate()?;
    match fuser {
        Fuser::Bicubic => Ok(bicubic_upsample(&scene.ms, scene.scale)?),
        Fuser::Network { params, spec } => {
            spec.ensure_bands(scene.bands())?;
            let scene = normalized(scene.clone(), normalize);
            let mut fused = predict(params, spec, &build_input(&scene)?)?;
            if normalize != 1.0 {
                fused.scale(normalize as f32);
            }
            Ok(fused)
        }
    }
}

#[derive(Debug, Clone)]
pub struct FuseOptions {
    pub fuser: Fuser,
    pub ms: PathBuf,
    pub pan: PathBuf,
    pub scale: usize,
    pub normalize: f64,
    pub out: PathBuf,
    /// Optional PNG preview with the given band → (R, G, B) map.
    pub truecolor: Option<(PathBuf, [usize; 3])>,
}

pub fn fuse_files(options: &FuseOptions) -> Result<Tensor<f32>> {
    let scene = ScenePair::new(read_tensor(&options.ms)?, read_tensor(&options.pan)?, options.scale, None)?;
    let fused = fuse_scene(&options.fuser, &scene, options.normalize)?;
    let mut outputs = Outputs::default();
    if let Some(dir) = options.out.parent() {
        outputs.dir(dir)?;
    }
    outputs.tensor(&options.out, &fused)?;
    if let Some((png, map)) = &options.truecolor {
        if let Some(dir) = png.parent() {
            outputs.dir(dir)?;
        }
        outputs.with(png, |p| export_truecolor(&fused, *map, p))?;
    }
    outputs.commit();
    Ok(fused)
}
