//! Experiment configuration and its TOML file form.
//!
//! ```toml
//! command = "prop1"
//! m_grid = [2, 3, 4, 6]
//! intensity = [0.25, 1.0, 4.0]
//! samples = 100000
//! seed = 7
//! gate = "global"
//! format = "csv"
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use optical_bpl::closed_forms::{IntensityLaw, NoiseDepth, MIN_GRID_POINTS};
use optical_bpl::estimators::MIN_SAMPLES;
use optical_bpl::{GateKind, GeneratorPair, RandomSource};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Toy,
    Prop1,
    Prop2,
    Heterodyne,
    Noise,
    Regimes,
    Train,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Toy => "toy",
            CommandKind::Prop1 => "prop1",
            CommandKind::Prop2 => "prop2",
            CommandKind::Heterodyne => "heterodyne",
            CommandKind::Noise => "noise",
            CommandKind::Regimes => "regimes",
            CommandKind::Train => "train",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "jsonl",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" | "jsonl" => Ok(OutputFormat::Json),
            _ => Err(format!("expected csv or json, got `{s}`")),
        }
    }
}

/// Parameterized gate under study.
///
/// Text form: `global`, `phase:j`, `two-mode:i,j`, `beamsplitter:i,j` or
/// `random` (a random passive generator drawn from the seed).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum GateSpec {
    #[default]
    Global,
    Phase(usize),
    TwoMode(usize, usize),
    Beamsplitter(usize, usize),
    Random,
}

impl GateSpec {
    pub fn generator(&self, m: usize, source: &RandomSource) -> Result<GeneratorPair, CliError> {
        let kind = match *self {
            GateSpec::Global => GateKind::GlobalPhase,
            GateSpec::Phase(j) => GateKind::PhaseShifter(j),
            GateSpec::TwoMode(i, j) => GateKind::TwoModePhase(i, j),
            GateSpec::Beamsplitter(i, j) => GateKind::Beamsplitter(i, j),
            GateSpec::Random => return Ok(GeneratorPair::random_passive(m, &mut source.rng())),
        };
        GeneratorPair::new(kind, m).map_err(|e| CliError::config("gate", e.to_string()))
    }
}

impl fmt::Display for GateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GateSpec::Global => f.write_str("global"),
            GateSpec::Phase(j) => write!(f, "phase:{j}"),
            GateSpec::TwoMode(i, j) => write!(f, "two-mode:{i},{j}"),
            GateSpec::Beamsplitter(i, j) => write!(f, "beamsplitter:{i},{j}"),
            GateSpec::Random => f.write_str("random"),
        }
    }
}

impl FromStr for GateSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("expected global, phase:j, two-mode:i,j, beamsplitter:i,j or random, got `{s}`");
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let idx: Vec<usize> = if args.is_empty() {
            Vec::new()
        } else {
            args.split(',')
                .map(|x| x.trim().parse().map_err(|_| bad()))
                .collect::<Result<_, _>>()?
        };
        match (name, idx.as_slice()) {
            ("global", []) => Ok(GateSpec::Global),
            ("random", []) => Ok(GateSpec::Random),
            ("phase", &[j]) => Ok(GateSpec::Phase(j)),
            ("two-mode", &[i, j]) => Ok(GateSpec::TwoMode(i, j)),
            ("beamsplitter", &[i, j]) => Ok(GateSpec::Beamsplitter(i, j)),
            _ => Err(bad()),
        }
    }
}

impl TryFrom<String> for GateSpec {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<GateSpec> for String {
    fn from(g: GateSpec) -> Self {
        g.to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSettings {
    #[serde(default = "TrainSettings::default_lr")]
    pub lr: f64,
    #[serde(default = "TrainSettings::default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "TrainSettings::default_tol")]
    pub tol: f64,
    /// Circuit depth `L`.
    #[serde(default = "TrainSettings::default_depth")]
    pub depth: usize,
}

impl TrainSettings {
    fn default_lr() -> f64 {
        0.5
    }
    fn default_max_iters() -> usize {
        2000
    }
    fn default_tol() -> f64 {
        1e-8
    }
    fn default_depth() -> usize {
        4
    }
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            lr: Self::default_lr(),
            max_iters: Self::default_max_iters(),
            tol: Self::default_tol(),
            depth: Self::default_depth(),
        }
    }
}

pub const DEFAULT_SAMPLES: usize = 100_000;

/// Everything needed to reproduce one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: CommandKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_grid: Option<Vec<usize>>,
    /// Explicit total intensities `E` (input intensities `E₀` for the
    /// measurement commands).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub intensity: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub law: Option<IntensityLaw>,
    /// Target intensities `E₁` for `heterodyne`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub target_intensity: Vec<f64>,
    /// `u₁² + u₂²` values for `toy`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub s: Vec<f64>,
    /// Amplitude transmissivity of each attenuator for `noise`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_layers: Option<NoiseDepth>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub gate: GateSpec,
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default)]
    pub train: TrainSettings,
    /// Output path; not embedded in emitted files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}

impl ExperimentConfig {
    pub fn new(command: CommandKind) -> Self {
        Self {
            command,
            m: None,
            m_grid: None,
            intensity: Vec::new(),
            law: None,
            target_intensity: Vec::new(),
            s: Vec::new(),
            k: None,
            noise_layers: None,
            samples: DEFAULT_SAMPLES,
            seed: 0,
            gate: GateSpec::default(),
            format: OutputFormat::default(),
            train: TrainSettings::default(),
            out: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("config", format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// The config as embedded in output files: compact JSON without `out`.
    pub fn embedded(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        serde_json::to_string(&c).expect("config serializes")
    }

    /// Mode counts to sweep.
    pub fn modes(&self) -> Result<Vec<usize>, CliError> {
        match (&self.m, &self.m_grid) {
            (Some(_), Some(_)) => Err(CliError::config("m", "give either m or m_grid, not both")),
            (Some(m), None) => Ok(vec![*m]),
            (None, Some(g)) => Ok(g.clone()),
            (None, None) => Err(CliError::config("m", format!("required for {}", self.command.name()))),
        }
    }

    /// Intensities paired with the mode grid: the law when given, otherwise
    /// every explicit value for every `m`.
    pub fn intensity_pairs(&self) -> Result<Vec<(usize, f64)>, CliError> {
        let ms = self.modes()?;
        match (&self.law, self.intensity.is_empty()) {
            (Some(_), false) => Err(CliError::config("law", "give either law or intensity, not both")),
            (Some(law), true) => ms
                .iter()
                .map(|&m| Ok((m, law.intensity(m).map_err(|e| CliError::config("law", e.to_string()))?.value())))
                .collect(),
            (None, false) => Ok(ms
                .iter()
                .flat_map(|&m| self.intensity.iter().map(move |&e| (m, e)))
                .collect()),
            (None, true) => Err(CliError::config(
                "intensity",
                format!("required for {} (or give law)", self.command.name()),
            )),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let ms = self.modes()?;
        if ms.is_empty() || ms.contains(&0) {
            return Err(CliError::config("m", "mode counts must be >= 1"));
        }
        if ms.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::config("m_grid", "must be strictly ascending"));
        }
        for (name, values) in [
            ("intensity", &self.intensity),
            ("target_intensity", &self.target_intensity),
            ("s", &self.s),
        ] {
            if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
                return Err(CliError::config(name, format!("values must be finite and >= 0, got {v}")));
            }
        }
        let needs_samples = matches!(
            self.command,
            CommandKind::Toy | CommandKind::Prop1 | CommandKind::Prop2 | CommandKind::Heterodyne
        );
        if needs_samples && self.samples < MIN_SAMPLES {
            return Err(CliError::config("samples", format!("must be >= {MIN_SAMPLES}, got {}", self.samples)));
        }
        match self.command {
            CommandKind::Toy => {
                if self.s.is_empty() {
                    return Err(CliError::config("s", "required for toy"));
                }
            }
            CommandKind::Prop1 | CommandKind::Prop2 => {
                self.intensity_pairs()?;
            }
            CommandKind::Heterodyne => {
                self.intensity_pairs()?;
                if self.target_intensity.is_empty() {
                    return Err(CliError::config("target_intensity", "required for heterodyne"));
                }
            }
            CommandKind::Noise => {
                if self.law.is_none() {
                    return Err(CliError::config("law", "required for noise"));
                }
                match self.k {
                    Some(k) if k > 0.0 && k < 1.0 => {}
                    Some(k) => return Err(CliError::config("k", format!("must lie in (0, 1), got {k}"))),
                    None => return Err(CliError::config("k", "required for noise")),
                }
                if self.noise_layers.is_none() {
                    return Err(CliError::config("noise_layers", "required for noise"));
                }
            }
            CommandKind::Regimes
                if self.law.is_none() => {
                    return Err(CliError::config("law", "required for regimes"));
                }
            _ => {}
        }
        if matches!(self.command, CommandKind::Noise | CommandKind::Regimes) && ms.len() < MIN_GRID_POINTS {
            return Err(CliError::config(
                "m_grid",
                format!("need at least {MIN_GRID_POINTS} points to fit, got {}", ms.len()),
            ));
        }
        if self.command == CommandKind::Train {
            if ms.len() != 1 {
                return Err(CliError::config("m", "train takes a single m"));
            }
            if self.intensity.len() != 1 {
                return Err(CliError::config("intensity", "train takes exactly one intensity"));
            }
            let t = &self.train;
            if !(t.lr > 0.0 && t.lr.is_finite()) {
                return Err(CliError::config("lr", format!("must be finite and > 0, got {}", t.lr)));
            }
            if !(t.tol >= 0.0) {
                return Err(CliError::config("tol", format!("must be >= 0, got {}", t.tol)));
            }
            if t.depth == 0 {
                return Err(CliError::config("depth", "must be >= 1"));
            }
        }
        Ok(())
    }
}

/// `a:b:step` or a comma-separated list.
pub fn parse_modes(s: &str) -> Result<Vec<usize>, String> {
    if s.contains(':') {
        optical_bpl::closed_forms::parse_grid(s).map_err(|e| e.to_string())
    } else {
        s.split(',')
            .map(|x| x.trim().parse().map_err(|_| format!("bad mode count `{x}`")))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gate_grammar() {
        for text in ["global", "phase:2", "two-mode:0,1", "beamsplitter:1,3", "random"] {
            let g: GateSpec = text.parse().unwrap();
            assert_eq!(g.to_string(), text);
        }
        for bad in ["phase", "phase:a", "two-mode:1", "swap:0,1", "global:1"] {
            assert!(bad.parse::<GateSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn mode_grammar() {
        assert_eq!(parse_modes("1,2,5,10").unwrap(), vec![1, 2, 5, 10]);
        assert_eq!(parse_modes("4:12:4").unwrap(), vec![4, 8, 12]);
        assert!(parse_modes("4:x:1").is_err());
    }

    #[test]
    fn toml_round_trip() {
        let mut c = ExperimentConfig::new(CommandKind::Noise);
        c.m_grid = Some((4..=64).step_by(4).collect());
        c.law = Some("power:1,0.5".parse().unwrap());
        c.k = Some(0.9);
        c.noise_layers = Some(NoiseDepth::Sqrt);
        c.seed = 11;
        c.gate = GateSpec::TwoMode(0, 1);
        c.intensity = vec![0.1, 1.0 / 3.0];
        let text = c.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), c);
        let json = c.embedded();
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&json).unwrap(), c);
    }

    #[test]
    fn validation_names_fields() {
        let mut c = ExperimentConfig::new(CommandKind::Toy);
        let field = |c: &ExperimentConfig| match c.validate() {
            Err(CliError::Field { field, .. }) => field,
            other => panic!("{other:?}"),
        };
        assert_eq!(field(&c), "m");
        c.m = Some(3);
        assert_eq!(field(&c), "s");
        c.s = vec![0.5];
        c.samples = 10;
        assert_eq!(field(&c), "samples");
        c.samples = 1000;
        c.validate().unwrap();
        c.s = vec![-1.0];
        assert_eq!(field(&c), "s");

        let mut c = ExperimentConfig::new(CommandKind::Noise);
        c.m_grid = Some(vec![4, 8, 12, 16, 20, 24]);
        c.law = Some(IntensityLaw::Linear(1.0));
        c.k = Some(1.5);
        c.noise_layers = Some(NoiseDepth::Linear);
        assert_eq!(field(&c), "k");
        c.m_grid = Some(vec![8, 4]);
        assert_eq!(field(&c), "m_grid");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = ExperimentConfig::from_toml("command = \"toy\"\nmodes = 3\n").unwrap_err();
        assert!(err.to_string().contains("modes"), "{err}");
    }
}
