//! The batch workflows. Each command writes only below the output location it
//! is given and removes whatever it created if it fails part-way.

use std::path::{Path, PathBuf};

use drpnn_core::io::{load_scenes, write_tensor, LoadedScene, Split};
use drpnn_core::Tensor;

use crate::error::{CliError, Result};

mod evaluate;
mod fuse;
mod simulate;
mod sweep;
mod synth;
mod train;

pub use evaluate::{evaluate_files, evaluate_split, mean_report};
pub use fuse::{fuse_files, fuse_scene, FuseOptions, Fuser};
pub use simulate::simulate;
pub use sweep::{sweep_filters, SweepRow};
pub use synth::{synthesize, SynthOptions};
pub use train::{train, TrainOutcome, LOG_FILE, TIMING_FILE};

/// Files and directories created by a command, deleted on drop unless the
/// command reached [`Outputs::commit`].
#[derive(Default)]
pub(crate) struct Outputs {
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    pub(crate) fn dir(&mut self, dir: &Path) -> Result<()> {
        let mut missing = Vec::new();
        let mut cur = Some(dir);
        while let Some(d) = cur.filter(|d| !d.as_os_str().is_empty() && !d.exists()) {
            missing.push(d.to_path_buf());
            cur = d.parent();
        }
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        self.dirs.extend(missing.into_iter().rev());
        Ok(())
    }

    /// Remembers `path` for cleanup if it does not exist yet.
    fn claim(&mut self, path: &Path) {
        if !path.exists() {
            self.files.push(path.to_path_buf());
        }
    }

    pub(crate) fn write(&mut self, path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
        self.claim(path);
        std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
    }

    pub(crate) fn tensor(&mut self, path: &Path, t: &Tensor<f32>) -> Result<()> {
        self.claim(path);
        Ok(write_tensor(path, t)?)
    }

    /// For files written by library code.
    pub(crate) fn with<R>(&mut self, path: &Path, f: impl FnOnce(&Path) -> drpnn_core::Result<R>) -> Result<R> {
        self.claim(path);
        Ok(f(path)?)
    }

    pub(crate) fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for f in self.files.iter().rev() {
            let _ = std::fs::remove_file(f);
        }
        for d in self.dirs.iter().rev() {
            let _ = std::fs::remove_dir(d);
        }
    }
}

/// Divides every image of a scene by `divisor`.
pub(crate) fn normalized(mut scene: drpnn_core::ScenePair<f32>, divisor: f64) -> drpnn_core::ScenePair<f32> {
    if divisor != 1.0 {
        let inv = (1.0 / divisor) as f32;
        scene.ms.scale(inv);
        scene.pan.scale(inv);
        if let Some(t) = scene.truth.as_mut() {
            t.scale(inv);
        }
    }
    scene
}

/// Scenes of one split, all of which must carry a reference image.
pub fn load_split(manifest: &Path, split: Split) -> Result<Vec<LoadedScene>> {
    let scenes: Vec<_> = load_scenes(manifest)?
        .into_iter()
        .filter(|s| s.entry.split == split)
        .collect();
    if scenes.is_empty() {
        return Err(CliError::Usage(format!(
            "{} lists no {split:?} scenes",
            manifest.display()
        )));
    }
    if let Some(s) = scenes.iter().find(|s| s.scene.truth.is_none()) {
        return Err(CliError::Usage(format!(
            "scene '{}' has no reference image; run `drpnn simulate` on the manifest first",
            s.entry.name
        )));
    }
    Ok(scenes)
}
