//! Command-line experiment runner.
//!
//! Every command writes one long-format CSV (or JSON-lines) file whose
//! preamble carries a versioned schema string and the full config, seed
//! included. `replay FILE` reruns an emitted file from that preamble.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use optical_bpl::closed_forms::{IntensityLaw, NoiseDepth};

use config::{parse_modes, CommandKind, ExperimentConfig, GateSpec, OutputFormat};

/// Default output directory when `--out` is not given.
pub const OUT_DIR_ENV: &str = "OPTICAL_BPL_OUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid `{field}`: {reason}")]
    Field { field: String, reason: String },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn config(field: &str, reason: impl Into<String>) -> Self {
        CliError::Field {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Field { .. } | CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<optical_bpl::Error> for CliError {
    fn from(e: optical_bpl::Error) -> Self {
        use optical_bpl::Error as E;
        match &e {
            E::InvalidParameter { name, reason } => CliError::config(name, reason.clone()),
            E::DimensionMismatch { .. } | E::OddLength(_) | E::InvalidModes { .. } => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "optical-bpl", version, about = "Gradient-moment experiments for linear optical circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Toy model: closed-form vs Monte Carlo E|∂C|.
    Toy(ExperimentArgs),
    /// Compiling-cost second moment against its prediction.
    Prop1(ExperimentArgs),
    /// Quadratic-cost second moment against its prediction.
    Prop2(ExperimentArgs),
    /// Measurement-cost second moment for coherent targets.
    Heterodyne(ExperimentArgs),
    /// Regime of the measurement cost under layered attenuation.
    Noise(ExperimentArgs),
    /// Regime of the compiling cost under an intensity law.
    Regimes(ExperimentArgs),
    /// Gradient descent on the compiling cost.
    Train(ExperimentArgs),
    /// Run the experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rerun an emitted file from its embedded config.
    Replay {
        file: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Flags shared by all experiment commands. Given flags override values
/// loaded from `--config`.
#[derive(Debug, Args)]
struct ExperimentArgs {
    /// TOML config to start from.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    m: Option<usize>,
    /// `start:stop:step` or a comma-separated list.
    #[arg(long)]
    m_grid: Option<String>,
    /// Total intensities E (input intensities for heterodyne).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    intensity: Vec<f64>,
    /// Target intensities E1 for heterodyne.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    target_intensity: Vec<f64>,
    /// `constant:E`, `power:a,r`, `linear:a`, `expdecay:a,b`, `logpower:a,r`,
    /// or just the name together with --a, --r, --b.
    #[arg(long)]
    law: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    a: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    r: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    b: Option<f64>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    s: Vec<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json
    #[arg(long)]
    format: Option<OutputFormat>,
    /// global, phase:j, two-mode:i,j, beamsplitter:i,j or random
    #[arg(long)]
    gate: Option<GateSpec>,
    /// Amplitude transmissivity of each attenuator.
    #[arg(long, allow_negative_numbers = true)]
    k: Option<f64>,
    /// Attenuator count: linear, sqrt or an integer.
    #[arg(long)]
    layers: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    lr: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    tol: Option<f64>,
    /// Training circuit depth.
    #[arg(long)]
    depth: Option<usize>,
}

fn law_from_args(name: &str, a: Option<f64>, r: Option<f64>, b: Option<f64>) -> Result<IntensityLaw, CliError> {
    let text = if name.contains(':') {
        name.to_string()
    } else {
        let need = |v: Option<f64>, flag: &str| {
            v.ok_or_else(|| CliError::config(flag, format!("required for law `{name}`")))
        };
        match name {
            "constant" | "linear" => format!("{name}:{}", need(a, "a")?),
            "power" | "logpower" => format!("{name}:{},{}", need(a, "a")?, need(r, "r")?),
            "expdecay" => format!("{name}:{},{}", need(a, "a")?, need(b, "b")?),
            _ => return Err(CliError::config("law", format!("unknown law `{name}`"))),
        }
    };
    Ok(text.parse()?)
}

impl ExperimentArgs {
    fn into_config(self, command: CommandKind) -> Result<ExperimentConfig, CliError> {
        let mut c = match &self.config {
            Some(path) => {
                let c = ExperimentConfig::load(path)?;
                if c.command != command {
                    return Err(CliError::config(
                        "command",
                        format!("config file is for `{}`, not `{}`", c.command.name(), command.name()),
                    ));
                }
                c
            }
            None => ExperimentConfig::new(command),
        };
        if self.m.is_some() || self.m_grid.is_some() {
            c.m = self.m;
            c.m_grid = match &self.m_grid {
                Some(text) => Some(parse_modes(text).map_err(|e| CliError::config("m_grid", e))?),
                None => None,
            };
        }
        if !self.intensity.is_empty() && self.law.is_some() {
            return Err(CliError::config("law", "give either --law or --intensity, not both"));
        }
        if !self.intensity.is_empty() {
            c.intensity = self.intensity;
            c.law = None;
        }
        if let Some(name) = &self.law {
            c.law = Some(law_from_args(name, self.a, self.r, self.b)?);
            c.intensity.clear();
        } else if self.a.is_some() || self.r.is_some() || self.b.is_some() {
            return Err(CliError::config("law", "--a, --r and --b need --law"));
        }
        if !self.target_intensity.is_empty() {
            c.target_intensity = self.target_intensity;
        }
        if !self.s.is_empty() {
            c.s = self.s;
        }
        if let Some(v) = self.samples {
            c.samples = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if self.out.is_some() {
            c.out = self.out;
        }
        if let Some(v) = self.format {
            c.format = v;
        }
        if let Some(v) = self.gate {
            c.gate = v;
        }
        if let Some(v) = self.k {
            c.k = Some(v);
        }
        if let Some(v) = &self.layers {
            c.noise_layers = Some(v.parse::<NoiseDepth>()?);
        }
        if let Some(v) = self.lr {
            c.train.lr = v;
        }
        if let Some(v) = self.max_iters {
            c.train.max_iters = v;
        }
        if let Some(v) = self.tol {
            c.train.tol = v;
        }
        if let Some(v) = self.depth {
            c.train.depth = v;
        }
        Ok(c)
    }
}

/// Where an experiment's output went.
#[derive(Debug, PartialEq, Eq)]
pub enum Destination {
    Stdout,
    File(PathBuf),
}

/// Resolve the output path: `--out`, else a file named after the command
/// and seed under `out_dir`, else stdout.
pub fn destination(config: &ExperimentConfig, out_dir: Option<&Path>) -> Destination {
    match (&config.out, out_dir) {
        (Some(p), _) => Destination::File(p.clone()),
        (None, Some(dir)) => Destination::File(dir.join(format!(
            "{}-seed{}.{}",
            config.command.name(),
            config.seed,
            config.format.extension()
        ))),
        (None, None) => Destination::Stdout,
    }
}

/// Run one experiment and return the rendered file and any summary lines.
pub fn execute(config: &ExperimentConfig) -> Result<(String, Vec<String>), CliError> {
    let table = experiments::run_experiment(config)?;
    Ok((output::render(config, &table)?, table.notes))
}

/// Run and write one experiment.
pub fn run(config: &ExperimentConfig, out_dir: Option<&Path>) -> Result<Destination, CliError> {
    let (text, notes) = execute(config)?;
    let dest = destination(config, out_dir);
    match &dest {
        Destination::Stdout => {
            std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| CliError::config("out", e.to_string()))?;
        }
        Destination::File(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent)
                    .map_err(|e| CliError::config("out", format!("{}: {e}", parent.display())))?;
            }
            std::fs::write(path, &text).map_err(|e| CliError::config("out", format!("{}: {e}", path.display())))?;
            for note in notes {
                println!("{note}");
            }
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(dest)
}

fn dispatch(cli: Cli, out_dir: Option<&Path>) -> Result<Destination, CliError> {
    let (command, args) = match cli.command {
        Command::Toy(a) => (CommandKind::Toy, a),
        Command::Prop1(a) => (CommandKind::Prop1, a),
        Command::Prop2(a) => (CommandKind::Prop2, a),
        Command::Heterodyne(a) => (CommandKind::Heterodyne, a),
        Command::Noise(a) => (CommandKind::Noise, a),
        Command::Regimes(a) => (CommandKind::Regimes, a),
        Command::Train(a) => (CommandKind::Train, a),
        Command::Run { config, out } => {
            let mut c = ExperimentConfig::load(&config)?;
            if out.is_some() {
                c.out = out;
            }
            return run(&c, out_dir);
        }
        Command::Replay { file, out } => {
            let text = std::fs::read_to_string(&file)
                .map_err(|e| CliError::config("replay", format!("{}: {e}", file.display())))?;
            let mut c = output::embedded_config(&text)?;
            c.out = out;
            return run(&c, out_dir);
        }
    };
    run(&args.into_config(command)?, out_dir)
}

/// Parse `args` (program name first), run, and return the exit code.
/// `out_dir` stands in for the [`OUT_DIR_ENV`] variable.
pub fn main_with_args<I, T>(args: I, out_dir: Option<&Path>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli, out_dir) {
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
