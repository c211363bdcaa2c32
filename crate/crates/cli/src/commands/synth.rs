use std::path::{Path, PathBuf};

use drpnn_core::io::{SceneEntry, SceneManifest, Split};
use drpnn_core::synth::{observed_scene, SynthConfig};

use super::Outputs;
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct SynthOptions {
    pub scenes: usize,
    /// The last `test` scenes are tagged for evaluation.
    pub test: usize,
    pub seed: u64,
    pub scene: SynthConfig,
}

/// Writes procedurally generated observed scenes (MS + PAN, no reference)
/// and their manifest into `out`; returns the manifest path.
pub fn synthesize(options: &SynthOptions, out: &Path) -> Result<PathBuf> {
    let mut outputs = Outputs::default();
    outputs.dir(out)?;
    let mut manifest = SceneManifest::default();
    for i in 0..options.scenes {
        let name = format!("scene_{i:03}");
        let seed = options.seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
        let scene = observed_scene(&options.scene, seed)?;
        let ms = PathBuf::from(format!("{name}_ms.pft"));
        let pan = PathBuf::from(format!("{name}_pan.pft"));
        outputs.tensor(&out.join(&ms), &scene.ms)?;
        outputs.tensor(&out.join(&pan), &scene.pan)?;
        manifest.scenes.push(SceneEntry {
            name,
            ms,
            pan,
            truth: None,
            scale: options.scene.scale,
            bands: options.scene.bands,
            split: if i + options.test >= options.scenes { Split::Test } else { Split::Train },
        });
    }
    let path = out.join("manifest.toml");
    outputs.with(&path, |p| manifest.save(p))?;
    outputs.commit();
    Ok(path)
}
