use std::path::{Path, PathBuf};

use drpnn_core::io::{load_scenes, SceneEntry, SceneManifest};
use drpnn_core::{wald_simulate, Error};

use super::Outputs;
use crate::error::Result;

/// Reduced-resolution copy of every scene in `manifest`: MS and PAN degraded
/// by the scene's scale, the original MS kept as the reference. Writes
/// `<out>/manifest.toml` and returns its path.
pub fn simulate(manifest: &Path, out: &Path) -> Result<PathBuf> {
    let scenes = load_scenes(manifest)?;
    let mut outputs = Outputs::default();
    outputs.dir(out)?;
    let mut degraded = SceneManifest::default();
    for loaded in scenes {
        let name = loaded.entry.name.clone();
        let sim = wald_simulate(&loaded.scene).map_err(|e| Error::Scene {
            scene: name.clone(),
            reason: e.to_string(),
        })?;
        let file = |kind: &str| PathBuf::from(format!("{name}_{kind}.pft"));
        let (ms, pan, truth) = (file("ms"), file("pan"), file("truth"));
        outputs.tensor(&out.join(&ms), &sim.ms)?;
        outputs.tensor(&out.join(&pan), &sim.pan)?;
        outputs.tensor(&out.join(&truth), sim.truth.as_ref().expect("simulation sets the reference"))?;
        degraded.scenes.push(SceneEntry {
            ms,
            pan,
            truth: Some(truth),
            ..loaded.entry
        });
    }
    let path = out.join("manifest.toml");
    outputs.with(&path, |p| degraded.save(p))?;
    outputs.commit();
    Ok(path)
}
