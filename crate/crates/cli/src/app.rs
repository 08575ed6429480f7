use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use lineguide::harness::{layered, to_toml};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::commands;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "lineguide", version, about = "Finger-camera line tracking with directional and Braille feedback")]
pub struct Cli {
    /// TOML file layered over the defaults.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one config key, e.g. `--set deadband.epsilon=0.2`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Print the merged configuration of the subcommand as TOML and exit.
    #[arg(long, global = true)]
    pub show_config: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the frame pipeline over a PNG or a directory of PNGs.
    Pipeline(PipelineArgs),
    /// Simulate tracking runs and write logs, metrics and plots.
    Experiment(ExperimentArgs),
    /// Fit the finger model to the target statistics.
    Calibrate(CalibrateArgs),
    /// Start the live session service.
    Serve(ServeArgs),
    /// Encode text to Braille cells and an optional stimulation waveform.
    Braille(BrailleArgs),
    /// Recompute metrics from a trajectory log (JSONL or CSV).
    Metrics(MetricsArgs),
    /// Measure full-pipeline throughput on synthetic camera frames.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PerceptionArg {
    Vision,
    Geometric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DialectArg {
    Six,
    Eight,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// PNG frame, or a directory whose PNGs are processed in name order.
    #[arg(long, required_unless_present = "show_config")]
    pub input: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Write an annotated overlay per frame under `<out>/overlays`.
    #[arg(long)]
    pub overlays: bool,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub feedback: Option<OnOff>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub perception: Option<PerceptionArg>,
    /// Skip the PNG plots.
    #[arg(long)]
    pub no_plots: bool,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub perception: Option<PerceptionArg>,
    #[arg(long)]
    pub max_rounds: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Listen address, e.g. 127.0.0.1:8787.
    #[arg(long)]
    pub addr: Option<String>,
    /// Directory for per-session JSONL logs.
    #[arg(long)]
    pub log_dir: Option<PathBuf>,
    /// Static client bundle served at `/`.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BrailleArgs {
    #[arg(long, required_unless_present = "show_config")]
    pub text: Option<String>,
    #[arg(long)]
    pub dialect: Option<DialectArg>,
    /// Directory for `waveform.csv`; no waveform is written without it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Display time per cell in seconds.
    #[arg(long, default_value_t = 1.0)]
    pub cell_duration: f64,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Trajectory log, `.jsonl` or `.csv`.
    #[arg(long)]
    pub input: PathBuf,
    /// Directory for `metrics.json`, `metrics.csv` and `envelope.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 30)]
    pub frames: usize,
    #[arg(long, default_value_t = 640)]
    pub width: usize,
    #[arg(long, default_value_t = 480)]
    pub height: usize,
    /// Focal length of the synthetic fisheye camera in pixels.
    #[arg(long, default_value_t = 400.0)]
    pub focal: f64,
}

/// Parses `args`, runs the subcommand and returns the process exit code.
/// Errors are printed to stderr as one JSON object.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let err = CliError::Usage(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return err.exit_code();
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("{}", err.to_json());
            err.exit_code()
        }
    }
}

/// Config layering shared by the subcommands: defaults, `--config`, the
/// environment, `--set`, then the subcommand's own flags.
pub(crate) struct Layers<'a> {
    file: Option<&'a Path>,
    overrides: Vec<String>,
}

impl Layers<'_> {
    pub(crate) fn resolve<T: Serialize + DeserializeOwned + Default>(&self) -> Result<T, CliError> {
        Ok(layered(self.file, std::env::vars(), &self.overrides)?)
    }
}

fn flag<V: std::fmt::Display>(out: &mut Vec<String>, key: &str, value: Option<V>) {
    if let Some(v) = value {
        out.push(format!("{key}={v}"));
    }
}

/// TOML literal for a string flag value.
fn quoted(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn perception_name(p: PerceptionArg) -> String {
    quoted(match p {
        PerceptionArg::Vision => "vision",
        PerceptionArg::Geometric => "geometric",
    })
}

fn show<T: Serialize>(value: &T) -> Result<(), CliError> {
    print!("{}", to_toml(value)?);
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let mut overrides = cli.overrides.clone();
    match &cli.command {
        Command::Experiment(a) => {
            flag(&mut overrides, "feedback_on", a.feedback.map(|f| f == OnOff::On));
            flag(&mut overrides, "repetitions", a.reps);
            flag(&mut overrides, "seed", a.seed);
            flag(&mut overrides, "perception", a.perception.map(perception_name));
        }
        Command::Calibrate(a) => {
            flag(&mut overrides, "experiment.repetitions", a.reps);
            flag(&mut overrides, "experiment.seed", a.seed);
            flag(&mut overrides, "experiment.perception", a.perception.map(perception_name));
            flag(&mut overrides, "targets.max_rounds", a.max_rounds);
        }
        Command::Serve(a) => {
            flag(&mut overrides, "addr", a.addr.as_deref().map(quoted));
            flag(&mut overrides, "log_dir", a.log_dir.as_ref().map(|p| quoted(&p.to_string_lossy())));
            flag(&mut overrides, "static_dir", a.static_dir.as_ref().map(|p| quoted(&p.to_string_lossy())));
        }
        Command::Braille(a) => {
            flag(&mut overrides, "dialect", a.dialect.map(|d| quoted(if d == DialectArg::Six { "Six" } else { "Eight" })));
        }
        Command::Pipeline(_) | Command::Metrics(_) | Command::Bench(_) => {}
    }
    let layers = Layers { file: cli.config.as_deref(), overrides };
    match &cli.command {
        Command::Pipeline(a) => {
            let cfg = layers.resolve()?;
            if cli.show_config {
                return show(&cfg);
            }
            commands::pipeline(a, cfg)
        }
        Command::Experiment(a) => {
            let cfg = layers.resolve()?;
            if cli.show_config {
                return show(&cfg);
            }
            commands::experiment(a, cfg)
        }
        Command::Calibrate(a) => {
            let cfg = layers.resolve()?;
            if cli.show_config {
                return show(&cfg);
            }
            commands::calibrate(a, cfg)
        }
        Command::Serve(_) => {
            let cfg: crate::serve::ServeConfig = layers.resolve()?;
            if cli.show_config {
                return show(&cfg);
            }
            crate::serve::serve_blocking(cfg)
        }
        Command::Braille(a) => {
            let cfg = layers.resolve()?;
            if cli.show_config {
                return show(&cfg);
            }
            commands::braille(a, cfg)
        }
        Command::Metrics(a) => {
            if cli.show_config {
                return Err(CliError::Usage("metrics has no configuration".into()));
            }
            commands::metrics(a)
        }
        Command::Bench(a) => {
            let cfg = layers.resolve()?;
            if cli.show_config {
                return show(&cfg);
            }
            commands::bench(a, cfg)
        }
    }
}
