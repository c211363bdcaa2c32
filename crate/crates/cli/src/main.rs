use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use drpnn_cli::commands::{self, FuseOptions, Fuser, SynthOptions};
use drpnn_cli::{CliError, Profile, Result, RunConfig};
use drpnn_core::io::Split;
use drpnn_core::synth::SynthConfig;
use drpnn_core::MetricsReport;

#[derive(Parser)]
#[command(name = "drpnn", version, about = "Deep residual pan-sharpening")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by the commands that read a run config.
#[derive(clap::Args)]
struct RunArgs {
    /// Run config (TOML). Without it the paper profile is used.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
    /// Overrides the config manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

impl RunArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(dir) = &self.output_dir {
            config.paths.output_dir = dir.clone();
        }
        if let Some(m) = &self.manifest {
            config.paths.manifest = m.clone();
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a config file for one of the built-in profiles.
    InitConfig {
        #[arg(long, value_enum, default_value = "paper")]
        profile: Profile,
        out: PathBuf,
    },
    /// Generate synthetic observed scenes (MS + PAN) and their manifest.
    Synth {
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value_t = 24)]
        scenes: usize,
        /// How many of the scenes (the last ones) form the test split.
        #[arg(long, default_value_t = 6)]
        test: usize,
        #[arg(long, default_value_t = 64)]
        ms_size: usize,
        #[arg(long, default_value_t = 4)]
        bands: usize,
        #[arg(long, default_value_t = 4)]
        scale: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Degrade every scene by its scale; the original MS becomes the reference.
    Simulate {
        #[arg(short, long)]
        manifest: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Train on the train split of the configured manifest.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Continue from a state file written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(short, long)]
        quiet: bool,
    },
    /// Fuse one MS/PAN pair with a checkpoint (or the bicubic baseline).
    Fuse {
        #[arg(long, required_unless_present = "bicubic")]
        checkpoint: Option<PathBuf>,
        /// Plain bicubic upsampling of the MS image instead of the network.
        #[arg(long, conflicts_with = "checkpoint")]
        bicubic: bool,
        #[arg(long)]
        ms: PathBuf,
        #[arg(long)]
        pan: PathBuf,
        #[arg(long, default_value_t = 4)]
        scale: usize,
        #[arg(long, default_value_t = 1.0)]
        normalize: f64,
        #[arg(short, long)]
        out: PathBuf,
        /// Also write a true-color PNG preview.
        #[arg(long)]
        png: Option<PathBuf>,
        /// Bands shown as red, green, blue.
        #[arg(long, value_delimiter = ',', default_values_t = [2, 1, 0])]
        rgb: Vec<usize>,
    },
    /// Score a fused image against a reference (Q, ERGAS, SAM, SCC).
    Evaluate {
        #[arg(long)]
        fused: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long, default_value_t = 4)]
        scale: usize,
        #[arg(long, default_value_t = drpnn_core::metrics::DEFAULT_Q_WINDOW)]
        window: usize,
        /// Measure SCC against this PAN image instead of the reference.
        #[arg(long)]
        scc_pan: Option<PathBuf>,
        /// Write the report as TOML.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Score a checkpoint (or the bicubic baseline) on every scene of a split.
    EvaluateSplit {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, conflicts_with = "bicubic")]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        bicubic: bool,
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Train one model per filter size and tabulate test-split Q and SAM.
    SweepFilters {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_delimiter = ',', default_values_t = [3, 5, 7])]
        sizes: Vec<usize>,
        /// Overrides the number of epochs per size.
        #[arg(long)]
        epochs: Option<usize>,
    },
}

fn print_report(report: &MetricsReport) {
    println!("{}", MetricsReport::HEADER);
    println!("{}", report.to_line());
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::InitConfig { profile, out } => {
            std::fs::write(&out, RunConfig::profile(profile).to_toml()).map_err(|e| CliError::Io { path: out, source: e })?;
        }
        Command::Synth { out, scenes, test, ms_size, bands, scale, seed } => {
            if test > scenes {
                return Err(CliError::Usage(format!("--test {test} exceeds --scenes {scenes}")));
            }
            let options = SynthOptions {
                scenes,
                test,
                seed,
                scene: SynthConfig { bands, ms_size, scale, ..SynthConfig::default() },
            };
            println!("{}", commands::synthesize(&options, &out)?.display());
        }
        Command::Simulate { manifest, out } => {
            println!("{}", commands::simulate(&manifest, &out)?.display());
        }
        Command::Train { run, resume, quiet } => {
            let config = run.load()?;
            let outcome = commands::train(&config, resume.as_deref(), |r| {
                if !quiet {
                    eprintln!("epoch {:>4}  loss {:.6e}  lr {:.3e}", r.epoch, r.mean_loss, r.lr_body);
                }
            })?;
            println!("{}", outcome.checkpoint.display());
        }
        Command::Fuse { checkpoint, bicubic, ms, pan, scale, normalize, out, png, rgb } => {
            let fuser = match (bicubic, checkpoint) {
                (true, _) => Fuser::Bicubic,
                (false, Some(c)) => Fuser::load(&c)?,
                (false, None) => return Err(CliError::Usage("either --checkpoint or --bicubic is required".into())),
            };
            let map: [usize; 3] = rgb
                .try_into()
                .map_err(|v: Vec<usize>| CliError::Usage(format!("--rgb needs three band indices, got {}", v.len())))?;
            let options = FuseOptions {
                fuser,
                ms,
                pan,
                scale,
                normalize,
                out,
                truecolor: png.map(|p| (p, map)),
            };
            commands::fuse_files(&options)?;
        }
        Command::Evaluate { fused, reference, scale, window, scc_pan, out } => {
            let report = commands::evaluate_files(&fused, &reference, scale, window, scc_pan.as_deref(), out.as_deref())?;
            print_report(&report);
        }
        Command::EvaluateSplit { run, checkpoint, bicubic, split } => {
            let config = run.load()?;
            let split = match split.as_str() {
                "train" => Split::Train,
                "test" => Split::Test,
                other => return Err(CliError::Usage(format!("unknown split '{other}' (train or test)"))),
            };
            let fuser = match (bicubic, checkpoint) {
                (true, _) => Fuser::Bicubic,
                (false, Some(c)) => Fuser::load(&c)?,
                (false, None) => Fuser::load(&config.checkpoint_path())?,
            };
            let (rows, mean) = commands::evaluate_split(&fuser, &config.paths.manifest, split, config.data.q_window, config.data.normalize)?;
            println!("scene\t{}", MetricsReport::HEADER);
            for (name, r) in &rows {
                println!("{name}\t{}", r.to_line());
            }
            println!("mean\t{}", mean.to_line());
        }
        Command::SweepFilters { run, sizes, epochs } => {
            let mut config = run.load()?;
            if let Some(e) = epochs {
                config.train.epochs = e;
            }
            let rows = commands::sweep_filters(&config, &sizes, |k, what| eprintln!("filter {k}x{k}: {what}"))?;
            println!("{}", commands::SweepRow::HEADER);
            for row in rows {
                println!("{}", row.to_line());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("drpnn: error: {e}");
            ExitCode::FAILURE
        }
    }
}
