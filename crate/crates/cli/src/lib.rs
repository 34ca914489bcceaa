//! Command-line front end for omsqueeze.

pub mod commands;
pub mod context;
pub mod error;
pub mod sweep;
pub mod table;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use omsqueeze::config::{Config, Observable, Sweep, SweepAxis};

use context::{load_config, now, Context, Format, RunManifest};
use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "omsqueeze", version, about = "Parametric squeezing in a two-tone optomechanical system")]
pub struct Cli {
    /// TOML configuration, or a run manifest (.json) to replay.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Root seed; defaults to the manifest seed, then run.seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, env = "OMSQUEEZE_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Logarithmic y axis in SVG plots.
    #[arg(long, global = true)]
    pub log: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Axis {
    ParametricGainS,
    GammaEff,
    DetuningDelta,
}

impl From<Axis> for SweepAxis {
    fn from(a: Axis) -> Self {
        match a {
            Axis::ParametricGainS => SweepAxis::ParametricGainS,
            Axis::GammaEff => SweepAxis::GammaEff,
            Axis::DetuningDelta => SweepAxis::DetuningDelta,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Derived rates, occupancy and stability.
    Rates,
    /// Model sidebands and heterodyne spectrum.
    Spectrum,
    /// Synthetic drive-on/drive-off spectra.
    Synth,
    /// Two-stage fit of measured or synthetic spectra.
    Fit {
        #[arg(long)]
        off: PathBuf,
        #[arg(long)]
        on: Option<PathBuf>,
        /// Excluded frequency range `lo:hi` in Hz; repeatable.
        #[arg(long, value_parser = parse_range)]
        mask: Vec<(f64, f64)>,
    },
    /// Observables along one parameter axis; flags override `[sweep]`.
    Sweep {
        #[arg(long, value_enum)]
        axis: Option<Axis>,
        #[arg(long, allow_hyphen_values = true)]
        start: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        stop: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Repeated synthesize-and-fit campaigns against the truth.
    Experiment {
        /// Defaults to run.repeats.
        #[arg(long)]
        repeats: Option<usize>,
    },
    /// Distribution of the fitted s for s = 0 truth.
    Bias {
        /// Defaults to run.trials.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Re-run the command recorded in a manifest.
    Replay { manifest: PathBuf },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Rates => "rates",
            Command::Spectrum => "spectrum",
            Command::Synth => "synth",
            Command::Fit { .. } => "fit",
            Command::Sweep { .. } => "sweep",
            Command::Experiment { .. } => "experiment",
            Command::Bias { .. } => "bias",
            Command::Replay { .. } => "replay",
        }
    }
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or("expected lo:hi")?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("{a}: {e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("{b}: {e}"))?;
    if lo > hi {
        return Err(format!("range {lo}:{hi} is reversed"));
    }
    Ok((lo, hi))
}

fn sweep_from(cfg: &Config, axis: Option<Axis>, start: Option<f64>, stop: Option<f64>, points: Option<usize>) -> CliResult<Sweep> {
    let base = cfg.sweep.clone();
    if base.is_none() && (axis.is_none() || start.is_none() || stop.is_none()) {
        return Err(CliError::Config("no [sweep] section; give --axis, --start and --stop".into()));
    }
    let mut s = base.unwrap_or(Sweep {
        axis: SweepAxis::ParametricGainS,
        start: 0.0,
        stop: 0.0,
        n_points: 101,
        outputs: Observable::ALL.to_vec(),
        s_override: Vec::new(),
    });
    if let Some(a) = axis {
        s.axis = a.into();
    }
    s.start = start.unwrap_or(s.start);
    s.stop = stop.unwrap_or(s.stop);
    s.n_points = points.unwrap_or(s.n_points);
    if s.n_points == 0 {
        return Err(CliError::Config("sweep needs at least one point".into()));
    }
    if s.n_points > 1 && !(s.start < s.stop) {
        return Err(CliError::Config(format!("sweep start {} must be below stop {}", s.start, s.stop)));
    }
    Ok(s)
}

/// Command line that repeats a manifest's run: its own arguments with the
/// configuration taken from the manifest.
pub fn replay_args(manifest: &RunManifest, manifest_path: &Path, out_dir: &Path) -> Vec<String> {
    let mut out = vec![
        "omsqueeze".to_string(),
        "--config".into(),
        manifest_path.display().to_string(),
        "--seed".into(),
        manifest.seed.to_string(),
        "--out-dir".into(),
        out_dir.display().to_string(),
    ];
    let mut it = manifest.args.iter().skip(1);
    while let Some(a) = it.next() {
        match a.as_str() {
            "--config" | "--seed" | "--out-dir" => {
                it.next();
            }
            x if x.starts_with("--config=") || x.starts_with("--seed=") || x.starts_with("--out-dir=") => {}
            _ => out.push(a.clone()),
        }
    }
    out
}

fn execute(cli: Cli, args: &[String]) -> CliResult<()> {
    if let Command::Replay { manifest } = &cli.command {
        let m = RunManifest::load(manifest)?;
        if m.command == "replay" {
            return Err(CliError::Config("manifest records a replay".into()));
        }
        let argv = replay_args(&m, manifest, &cli.out_dir);
        let cli = Cli::try_parse_from(&argv).map_err(|e| CliError::Config(e.to_string()))?;
        return execute(cli, &argv);
    }
    let started = now();
    let (config, manifest_seed) = match &cli.config {
        Some(p) => load_config(p)?,
        None => (Config::default(), None),
    };
    let seed = cli.seed.or(manifest_seed).unwrap_or(config.run.seed);
    let name = cli.command.name();
    let mut ctx = Context::new(config, seed, cli.out_dir.clone(), cli.format, cli.log)?;
    let result = match &cli.command {
        Command::Rates => commands::rates(&mut ctx),
        Command::Spectrum => commands::spectrum(&mut ctx),
        Command::Synth => commands::synth(&mut ctx),
        Command::Fit { off, on, mask } => commands::fit(&mut ctx, off, on.as_deref(), mask),
        Command::Sweep { axis, start, stop, points } => {
            sweep_from(&ctx.config, *axis, *start, *stop, *points).and_then(|s| commands::sweep(&mut ctx, &s))
        }
        Command::Experiment { repeats } => {
            let n = repeats.unwrap_or(ctx.config.run.repeats);
            commands::experiment(&mut ctx, n)
        }
        Command::Bias { trials } => commands::bias(&mut ctx, *trials),
        Command::Replay { .. } => unreachable!(),
    };
    let err = match result {
        Ok(e) => e,
        Err(e) => Some(e),
    };
    ctx.write_manifest(name, args, started, err.as_ref().map_or(0, CliError::exit_code))?;
    err.map_or(Ok(()), Err)
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run(args: Vec<String>) -> i32 {
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli, &args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
