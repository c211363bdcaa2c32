use std::path::{Path, PathBuf};
use std::time::Instant;

use drpnn_core::io::Split;
use drpnn_core::model::save_checkpoint;
use drpnn_core::optim::{EpochRecord, Sample};
use drpnn_core::{extract_patches, init_network, Trainer};

use super::{load_split, normalized, Outputs};
use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub const LOG_FILE: &str = "train.log";
/// Per-epoch wall time, kept apart from the log so that logs of identical
/// runs are byte-identical.
pub const TIMING_FILE: &str = "timing.tsv";

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: PathBuf,
    pub log: PathBuf,
    pub pairs: usize,
    pub losses: Vec<f64>,
}

pub fn state_file_name(epoch: usize) -> String {
    format!("state-{epoch:04}.drps")
}

fn header(config: &RunConfig, pairs: usize) -> String {
    let n = &config.network;
    let t = &config.train;
    let spec = config.spec();
    let loss = match t.loss {
        drpnn_core::LossNorm::Mean => "mean",
        drpnn_core::LossNorm::Sum => "sum",
    };
    format!(
        "# network L={} filter={f}x{f} channels={} bands={} relu_before_skip={} parameters={}\n\
         # train epochs={} batch={} lr_body={} lr_last={} mu={} gamma={} decay_period={} loss={loss} seed={}\n\
         # data pairs={pairs} patch={} stride={} normalize={}\n\
         epoch\tmean_loss\tlr_body\tlr_last\n",
        n.layers,
        n.hidden_channels,
        n.bands,
        n.relu_before_skip,
        spec.param_count(),
        t.epochs,
        t.batch_size,
        t.lr_body,
        t.lr_last,
        t.momentum,
        t.decay,
        t.decay_period,
        config.seed,
        config.data.patch,
        config.data.stride,
        config.data.normalize,
        f = n.filter_size,
    )
}

/// Keeps the lines of an earlier log that precede `epoch` (header included).
fn log_prefix(path: &Path, epoch: usize) -> Result<String> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut out = String::new();
    for line in text.lines() {
        let record_epoch = line.split('\t').next().and_then(|f| f.parse::<usize>().ok());
        if record_epoch.is_none_or(|e| e < epoch) {
            out.push_str(line);
            out.push('\n');
        }
    }
    Ok(out)
}

fn training_pairs(config: &RunConfig) -> Result<Vec<Sample<f32>>> {
    let scenes = load_split(&config.paths.manifest, Split::Train)?;
    let mut pairs = Vec::new();
    for (i, loaded) in scenes.into_iter().enumerate() {
        config.spec().ensure_bands(loaded.scene.bands()).map_err(|e| drpnn_core::Error::Scene {
            scene: loaded.entry.name.clone(),
            reason: e.to_string(),
        })?;
        let scene = normalized(loaded.scene, config.data.normalize);
        let seed = config.seed.wrapping_add(i as u64);
        pairs.extend(extract_patches(&scene, config.data.patch, config.data.stride, seed)?);
    }
    Ok(pairs)
}

/// Trains on the train split of the configured manifest. Writes the training
/// log, timing, a resumable state every `decay_period` epochs and the final
/// checkpoint into the output directory. `resume` continues from a state file
/// written by an earlier run of the same config.
pub fn train(config: &RunConfig, resume: Option<&Path>, mut progress: impl FnMut(&EpochRecord)) -> Result<TrainOutcome> {
    config.validate()?;
    let data = training_pairs(config)?;
    let spec = config.spec();
    let train_config = config.train_config();
    let trainer = match resume {
        None => Trainer::new(spec.clone(), train_config, init_network(&spec, config.seed)?)?,
        Some(state) => {
            let t = Trainer::load_state(state, train_config)?;
            if t.spec != spec {
                return Err(CliError::Usage(format!(
                    "{} was written for a different network than the config describes",
                    state.display()
                )));
            }
            t
        }
    };
    let mut trainer = trainer;

    let out = &config.paths.output_dir;
    let mut outputs = Outputs::default();
    outputs.dir(out)?;
    let log_path = out.join(LOG_FILE);
    let timing_path = out.join(TIMING_FILE);
    let (mut log, mut timing) = if trainer.epoch > 0 && log_path.exists() {
        (log_prefix(&log_path, trainer.epoch)?, log_prefix(&timing_path, trainer.epoch).unwrap_or_default())
    } else {
        (header(config, data.len()), String::from("epoch\twall_seconds\n"))
    };
    outputs.write(&log_path, &log)?;
    outputs.write(&timing_path, &timing)?;

    let started = Instant::now();
    let period = config.train.decay_period;
    let mut losses = Vec::new();
    let mut failure = None;
    let result = trainer.run(&data, |t, record| {
        log.push_str(&record.to_line(false));
        log.push('\n');
        timing.push_str(&format!("{}\t{:.3}\n", record.epoch, started.elapsed().as_secs_f64()));
        losses.push(record.mean_loss);
        progress(record);
        let mut persist = || -> Result<()> {
            outputs.write(&log_path, &log)?;
            outputs.write(&timing_path, &timing)?;
            if t.epoch % period == 0 && !t.is_finished() {
                outputs.with(&out.join(state_file_name(t.epoch)), |p| t.save_state(p))?;
            }
            Ok(())
        };
        persist().map_err(|e| {
            let message = e.to_string();
            failure = Some(e);
            drpnn_core::Error::Config(message)
        })
    });
    if let Some(e) = failure {
        return Err(e);
    }
    result?;

    let checkpoint = config.checkpoint_path();
    if let Some(dir) = checkpoint.parent() {
        outputs.dir(dir)?;
    }
    outputs.with(&checkpoint, |p| save_checkpoint(&trainer.params, &spec, p))?;
    outputs.commit();
    Ok(TrainOutcome {
        checkpoint,
        log: log_path,
        pairs: data.len(),
        losses,
    })
}
