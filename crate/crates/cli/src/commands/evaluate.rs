use std::path::Path;

use drpnn_core::io::{read_tensor, Split};
use drpnn_core::metrics::scc_against_pan;
use drpnn_core::{evaluate_all, MetricsReport};

use super::{fuse_scene, load_split, Fuser, Outputs};
use crate::error::{CliError, Result};

/// Metrics of a fused file against its reference. With `pan`, the SCC column
/// is measured against the panchromatic image instead (full-resolution use).
/// The report is written as TOML to `out` when given.
pub fn evaluate_files(
    fused: &Path,
    reference: &Path,
    scale: usize,
    window: usize,
    pan: Option<&Path>,
    out: Option<&Path>,
) -> Result<MetricsReport> {
    let fused_t = read_tensor(fused)?;
    let mut report = evaluate_all(&fused_t, &read_tensor(reference)?, scale, window)?;
    let mut text = String::new();
    if let Some(pan) = pan {
        report.scc = scc_against_pan(&fused_t, &read_tensor(pan)?)?;
        text.push_str(&format!("# scc measured against {}\n", pan.display()));
    }
    text.push_str(&report.to_toml());
    if let Some(out) = out {
        let mut outputs = Outputs::default();
        if let Some(dir) = out.parent() {
            outputs.dir(dir)?;
        }
        outputs.write(out, text)?;
        outputs.commit();
    }
    Ok(report)
}

/// Index-wise mean of several reports with identical settings.
pub fn mean_report(reports: &[MetricsReport]) -> Result<MetricsReport> {
    let first = reports
        .first()
        .ok_or_else(|| CliError::Usage("no reports to average".into()))?;
    let n = reports.len() as f64;
    let mean = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    Ok(MetricsReport {
        q: mean(|r| r.q),
        ergas: mean(|r| r.ergas),
        sam_degrees: mean(|r| r.sam_degrees),
        scc: mean(|r| r.scc),
        ..first.clone()
    })
}

/// Fuses every scene of `split` and scores it against its reference.
/// Returns per-scene reports (in manifest order) and their mean.
pub fn evaluate_split(
    fuser: &Fuser,
    manifest: &Path,
    split: Split,
    window: usize,
    normalize: f64,
) -> Result<(Vec<(String, MetricsReport)>, MetricsReport)> {
    let mut rows = Vec::new();
    for loaded in load_split(manifest, split)? {
        let truth = loaded.scene.truth.as_ref().expect("split scenes carry references");
        let fused = fuse_scene(fuser, &loaded.scene, normalize)?;
        let report = evaluate_all(&fused, truth, loaded.scene.scale, window)?;
        rows.push((loaded.entry.name, report));
    }
    let reports: Vec<_> = rows.iter().map(|(_, r)| r.clone()).collect();
    let mean = mean_report(&reports)?;
    Ok((rows, mean))
}
