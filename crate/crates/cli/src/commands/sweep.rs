use drpnn_core::io::Split;
use drpnn_core::MetricsReport;

use super::{evaluate_split, train, Fuser, Outputs};
use crate::config::RunConfig;
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub size: usize,
    pub report: MetricsReport,
}

impl SweepRow {
    pub const HEADER: &'static str = "size\tQ\tSAM";

    pub fn to_line(&self) -> String {
        format!("{}\t{:.4}\t{:.4}", self.size, self.report.q, self.report.sam_degrees)
    }
}

/// Trains one model per filter size (each in `<output_dir>/filter-<k>`) and
/// scores it on the test split. Writes `<output_dir>/sweep.tsv`.
pub fn sweep_filters(config: &RunConfig, sizes: &[usize], mut progress: impl FnMut(usize, &str)) -> Result<Vec<SweepRow>> {
    if sizes.is_empty() {
        return Err(CliError::Usage("no filter sizes given".into()));
    }
    if let Some(k) = sizes.iter().find(|&&k| k % 2 == 0 || k == 0) {
        return Err(CliError::Usage(format!("filter sizes must be odd, got {k}")));
    }
    let mut outputs = Outputs::default();
    outputs.dir(&config.paths.output_dir)?;
    let mut rows = Vec::new();
    for &size in sizes {
        let mut run = config.clone();
        run.network.filter_size = size;
        run.paths.output_dir = config.paths.output_dir.join(format!("filter-{size}"));
        run.paths.checkpoint = None;
        progress(size, "training");
        let outcome = train(&run, None, |_| {})?;
        let fuser = Fuser::load(&outcome.checkpoint)?;
        let (_, report) = evaluate_split(&fuser, &run.paths.manifest, Split::Test, run.data.q_window, run.data.normalize)?;
        rows.push(SweepRow { size, report });
    }
    let mut table = format!("{}\n", SweepRow::HEADER);
    for row in &rows {
        table.push_str(&row.to_line());
        table.push('\n');
    }
    outputs.write(&config.paths.output_dir.join("sweep.tsv"), table)?;
    outputs.commit();
    Ok(rows)
}
