//! `wavefield` command-line driver.

mod cmd;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use config::{parse_assignment, resolve, Overrides, Params, Resolved};
use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "wavefield", version, about = "Ocean-wave kinematics from stereo surface reconstructions")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// JSON config file; flags override its keys.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Condition preset (A1..A3, B1..B3) or `mono` for the reference wave.
    #[arg(long, global = true)]
    preset: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default `out`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Any config key, dotted for nested keys: `--set kinematics.gravity=9.8`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize elevation and analytic surface velocities.
    Synth(SynthArgs),
    /// Surface potential and velocities from an elevation record.
    SurfaceVel(SurfaceVelArgs),
    /// Subsurface potential fit, depth ladder and streamlines.
    Subsurface(SubsurfaceArgs),
    /// Frequency and directional spectra with wave statistics.
    Spectra(SpectraArgs),
    /// Disparity, point cloud, mean plane and gridded elevation.
    Stereo(StereoArgs),
    /// Occlusion sweep over ratio and kind.
    Occlude(OccludeArgs),
    /// Metrics of a run directory against the analytic truth.
    Evaluate(EvaluateArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long)]
    nt: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    dx: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    dt: Option<f64>,
}

#[derive(Args, Debug)]
struct SurfaceVelArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    iterate_full: bool,
}

#[derive(Args, Debug)]
struct SubsurfaceArgs {
    #[arg(long)]
    input_dir: Option<PathBuf>,
    /// Frames to fit.
    #[arg(long, value_delimiter = ',')]
    frames: Option<Vec<usize>>,
    /// Ladder depths, m.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    depths: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    lambda: Option<f64>,
}

#[derive(Args, Debug)]
struct SpectraArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    segment_len: Option<usize>,
}

#[derive(Args, Debug)]
struct StereoArgs {
    #[arg(long)]
    left: Option<PathBuf>,
    #[arg(long)]
    right: Option<PathBuf>,
    #[arg(long)]
    rig: Option<PathBuf>,
    /// `whvs` or `block`.
    #[arg(long)]
    estimator: Option<String>,
}

#[derive(Args, Debug)]
struct OccludeArgs {
    /// `whvs` or `block`.
    #[arg(long)]
    estimator: Option<String>,
    /// Occlusion ratios, e.g. `0,0.05,0.1,0.15`.
    #[arg(long, value_delimiter = ',')]
    ratios: Option<Vec<f64>>,
    /// Any of `localized,distributed,fov_crop`.
    #[arg(long, value_delimiter = ',')]
    kinds: Option<Vec<String>>,
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    block_px: Option<usize>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    input_dir: Option<PathBuf>,
}

fn put(values: &mut Vec<(String, Value)>, key: &str, v: Option<impl Into<Value>>) {
    if let Some(v) = v {
        values.push((key.to_string(), v.into()));
    }
}

fn path_value(p: &Option<PathBuf>) -> Option<Value> {
    p.as_ref().map(|p| Value::String(p.to_string_lossy().into_owned()))
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Synth(_) => "synth",
            Self::SurfaceVel(_) => "surface-vel",
            Self::Subsurface(_) => "subsurface",
            Self::Spectra(_) => "spectra",
            Self::Stereo(_) => "stereo",
            Self::Occlude(_) => "occlude",
            Self::Evaluate(_) => "evaluate",
        }
    }

    /// Subcommand flags as config-key overrides.
    fn values(&self) -> Vec<(String, Value)> {
        let mut v = Vec::new();
        match self {
            Self::Synth(a) => {
                put(&mut v, "nx", a.nx);
                put(&mut v, "ny", a.ny);
                put(&mut v, "nt", a.nt);
                put(&mut v, "dx", a.dx);
                put(&mut v, "dt", a.dt);
            }
            Self::SurfaceVel(a) => {
                put(&mut v, "input", path_value(&a.input));
                put(&mut v, "kinematics.iterate_full", a.iterate_full.then_some(true));
            }
            Self::Subsurface(a) => {
                put(&mut v, "input_dir", path_value(&a.input_dir));
                put(&mut v, "frames", a.frames.clone());
                put(&mut v, "depths", a.depths.clone());
                put(&mut v, "fit.lambda", a.lambda);
            }
            Self::Spectra(a) => {
                put(&mut v, "input", path_value(&a.input));
                put(&mut v, "segment_len", a.segment_len);
            }
            Self::Stereo(a) => {
                put(&mut v, "left", path_value(&a.left));
                put(&mut v, "right", path_value(&a.right));
                put(&mut v, "rig", path_value(&a.rig));
                put(&mut v, "estimator", a.estimator.clone());
            }
            Self::Occlude(a) => {
                put(&mut v, "estimator", a.estimator.clone());
                put(&mut v, "ratios", a.ratios.clone());
                put(&mut v, "kinds", a.kinds.clone());
                put(&mut v, "seeds", a.seeds);
                put(&mut v, "block_px", a.block_px);
            }
            Self::Evaluate(a) => put(&mut v, "input_dir", path_value(&a.input_dir)),
        }
        v
    }
}

fn execute<P: Params>(name: &str, o: Overrides, f: impl FnOnce(Resolved<P>) -> Result<(), CliError>) -> Result<(), CliError> {
    let r = resolve::<P>(name, o)?;
    if let Some(n) = r.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config("threads", e.to_string()))?;
    }
    f(r)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let mut values = cli.command.values();
    for s in &cli.common.set {
        values.push(parse_assignment(s)?);
    }
    let o = Overrides {
        config: cli.common.config,
        seed: cli.common.seed,
        preset: cli.common.preset,
        out: cli.common.out,
        threads: cli.common.threads,
        values,
    };
    let name = cli.command.name();
    match cli.command {
        Command::Synth(_) => execute(name, o, cmd::synth::run),
        Command::SurfaceVel(_) => execute(name, o, cmd::surface_vel::run),
        Command::Subsurface(_) => execute(name, o, cmd::subsurface::run),
        Command::Spectra(_) => execute(name, o, cmd::spectra::run),
        Command::Stereo(_) => execute(name, o, cmd::stereo::run),
        Command::Occlude(_) => execute(name, o, cmd::occlude::run),
        Command::Evaluate(_) => execute(name, o, cmd::evaluate::run),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let err = CliError::usage(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit)
        }
    }
}

