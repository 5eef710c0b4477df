//! Run configuration: command-line flags merged over an optional flat
//! `key=value` file, and the manifest that records a resolved configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use biot_core::verification::DtRule;
use biot_core::{Diagonal, ElementPair, MaterialParams, TimeScheme};
use clap::{Parser, ValueEnum};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Error and rate table of the manufactured case over a mesh sequence.
    Convergence,
    /// Relative errors of the fixed-load problem across λ against a fine
    /// reference mesh.
    Locking,
    /// Convergence study with vanishing storage coefficient.
    ZeroStorage,
    /// Errors of the manufactured case on one mesh.
    SingleRun,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Md,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DiagonalArg {
    Forward,
    Backward,
}

impl From<DiagonalArg> for Diagonal {
    fn from(d: DiagonalArg) -> Self {
        match d {
            DiagonalArg::Forward => Diagonal::Forward,
            DiagonalArg::Backward => Diagonal::Backward,
        }
    }
}

fn value_name<T: ValueEnum>(v: &T) -> String {
    v.to_possible_value().expect("no skipped variants").get_name().to_string()
}

/// Command-line flags. Every setting is optional so that a configuration
/// file can supply it; flags take precedence over the file.
#[derive(Debug, Parser, Default)]
#[command(name = "biot", version, about = "Mixed finite element experiments for Biot consolidation")]
pub struct Cli {
    /// Experiment to run.
    #[arg(value_enum)]
    pub command: Option<Command>,
    /// Element pair, 1 (lowest order) or 2.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=2))]
    pub element: Option<u32>,
    /// Comma-separated numbers of subdivisions per side, each twice the last.
    #[arg(long, value_delimiter = ',')]
    pub refinements: Option<Vec<usize>>,
    /// Time step: `h2`, `h3` or a fixed positive value.
    #[arg(long)]
    pub dt_rule: Option<DtRule>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Storage coefficient.
    #[arg(long)]
    pub s0: Option<f64>,
    /// Permeability.
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Biot–Willis coefficient.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub t_final: Option<f64>,
    /// Table file; the manifest is written to the same path with
    /// `.manifest` appended. Without it the table goes to stdout and the
    /// manifest to stderr.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Flat `key=value` file with the same keys as the long flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated λ values of a locking run.
    #[arg(long, value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,
    /// Subdivisions of the reference mesh of a locking run.
    #[arg(long)]
    pub reference: Option<usize>,
    /// Direction in which each grid square is bisected.
    #[arg(long, value_enum)]
    pub diagonal: Option<DiagonalArg>,
    /// Write the stepping matrix of a single run in Matrix Market format.
    #[arg(long)]
    pub export_matrix: Option<PathBuf>,
    /// Trapezoidal stepping after one small backward Euler step.
    #[arg(long)]
    pub crank_nicolson: bool,
    /// Report the largest error over all time levels instead of the error
    /// at the final time.
    #[arg(long)]
    pub max_over_steps: bool,
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("cannot read configuration file {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("line {line} of the configuration file is not key=value")]
    Syntax { line: usize },
    #[error("unknown configuration key {0:?}")]
    UnknownKey(String),
    #[error("invalid value {value:?} for {key}: {reason}")]
    BadValue { key: String, value: String, reason: String },
    #[error("no command given (convergence, locking, zero-storage or single-run)")]
    MissingCommand,
    #[error("{0}")]
    Invalid(String),
}

/// Fully resolved settings of one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub element: ElementPair,
    pub refinements: Vec<usize>,
    pub dt_rule: DtRule,
    pub params: MaterialParams,
    pub t_final: f64,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub lambdas: Vec<f64>,
    pub reference: usize,
    pub diagonal: Diagonal,
    pub scheme: TimeScheme,
    pub max_over_steps: bool,
    pub export_matrix: Option<PathBuf>,
}

const KEYS: [&str; 18] = [
    "command",
    "element",
    "refinements",
    "dt-rule",
    "mu",
    "lambda",
    "s0",
    "kappa",
    "alpha",
    "t-final",
    "output",
    "format",
    "lambdas",
    "reference",
    "diagonal",
    "export-matrix",
    "crank-nicolson",
    "max-over-steps",
];

/// Keys a manifest adds after the configuration; accepted and ignored when
/// a manifest is read back as a configuration file.
const RECORD_KEYS: [&str; 1] = ["wall-time-s"];

/// Parses a flat `key=value` file. Blank lines and lines starting with `#`
/// are skipped; keys may use `-` or `_`.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
        let key = k.trim().replace('_', "-");
        if RECORD_KEYS.contains(&key.as_str()) {
            continue;
        }
        if !KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey(key));
        }
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

struct FileValues(BTreeMap<String, String>);

impl FileValues {
    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.0
            .get(key)
            .map(|v| {
                v.parse::<T>().map_err(|e| ConfigError::BadValue { key: key.into(), value: v.clone(), reason: e.to_string() })
            })
            .transpose()
    }

    fn get_enum<T: ValueEnum>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        self.0
            .get(key)
            .map(|v| T::from_str(v, false).map_err(|reason| ConfigError::BadValue { key: key.into(), value: v.clone(), reason }))
            .transpose()
    }

    fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.0
            .get(key)
            .map(|v| {
                v.split(',')
                    .map(|s| {
                        s.trim().parse::<T>().map_err(|e| ConfigError::BadValue {
                            key: key.into(),
                            value: v.clone(),
                            reason: e.to_string(),
                        })
                    })
                    .collect()
            })
            .transpose()
    }
}

impl RunConfig {
    /// Merges the flags over the configuration file named by `--config`, if
    /// any, fills defaults and validates.
    pub fn from_cli(cli: &Cli) -> Result<Self, ConfigError> {
        let file = match &cli.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| ConfigError::Io { path: path.display().to_string(), reason: e.to_string() })?;
                parse_config_text(&text)?
            }
            None => BTreeMap::new(),
        };
        Self::resolve(cli, &FileValues(file))
    }

    fn resolve(cli: &Cli, file: &FileValues) -> Result<Self, ConfigError> {
        let command = match cli.command {
            Some(c) => c,
            None => file.get_enum("command")?.ok_or(ConfigError::MissingCommand)?,
        };
        let element_index = match cli.element {
            Some(e) => e,
            None => file.get::<u32>("element")?.unwrap_or(1),
        };
        let element = ElementPair::from_index(element_index)
            .ok_or_else(|| ConfigError::Invalid(format!("element must be 1 or 2, got {element_index}")))?;
        let default_refinements = match command {
            Command::SingleRun => vec![8],
            _ => vec![4, 8, 16, 32],
        };
        let refinements = match &cli.refinements {
            Some(r) => r.clone(),
            None => file.get_list("refinements")?.unwrap_or(default_refinements),
        };
        let dt_rule = match cli.dt_rule {
            Some(r) => r,
            None => file.get("dt-rule")?.unwrap_or(DtRule::H2),
        };
        let pick = |flag: Option<f64>, key: &str, default: f64| -> Result<f64, ConfigError> {
            Ok(match flag {
                Some(v) => v,
                None => file.get(key)?.unwrap_or(default),
            })
        };
        let s0_default = match command {
            Command::Locking => 1e-3,
            Command::ZeroStorage => 0.0,
            _ => 1.0,
        };
        let params = MaterialParams {
            mu: pick(cli.mu, "mu", 10.0)?,
            lambda: pick(cli.lambda, "lambda", 10.0)?,
            s0: pick(cli.s0, "s0", s0_default)?,
            kappa: pick(cli.kappa, "kappa", 1.0)?,
            alpha: pick(cli.alpha, "alpha", 1.0)?,
        };
        let t_final = pick(cli.t_final, "t-final", 1.0)?;
        let output = match &cli.output {
            Some(p) => Some(p.clone()),
            None => file.get::<PathBuf>("output")?,
        };
        let format = match cli.format {
            Some(f) => f,
            None => file.get_enum("format")?.unwrap_or_default(),
        };
        let lambdas = match &cli.lambdas {
            Some(l) => l.clone(),
            None => file.get_list("lambdas")?.unwrap_or_else(|| vec![1e1, 1e4, 1e7, 1e10]),
        };
        let reference = match cli.reference {
            Some(r) => r,
            None => file.get("reference")?.unwrap_or(64),
        };
        let diagonal = match cli.diagonal {
            Some(d) => d,
            None => file.get_enum("diagonal")?.unwrap_or(DiagonalArg::Forward),
        }
        .into();
        let export_matrix = match &cli.export_matrix {
            Some(p) => Some(p.clone()),
            None => file.get::<PathBuf>("export-matrix")?,
        };
        let crank_nicolson = cli.crank_nicolson || file.get::<bool>("crank-nicolson")?.unwrap_or(false);
        let max_over_steps = cli.max_over_steps || file.get::<bool>("max-over-steps")?.unwrap_or(false);
        let config = RunConfig {
            command,
            element,
            refinements,
            dt_rule,
            params,
            t_final,
            output,
            format,
            lambdas,
            reference,
            diagonal,
            scheme: if crank_nicolson { TimeScheme::CrankNicolson } else { TimeScheme::BackwardEuler },
            max_over_steps,
            export_matrix,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        self.params.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return invalid(format!("final time must be positive, got {}", self.t_final));
        }
        let r = &self.refinements;
        if r.is_empty() || r[0] == 0 {
            return invalid("refinements must be positive".into());
        }
        if r.windows(2).any(|w| w[1] != 2 * w[0]) {
            return invalid(format!("each refinement must double the previous one, got {r:?}"));
        }
        if self.dt_rule == DtRule::H3 {
            for &n in r {
                let steps = self.t_final * (n as f64).powi(3);
                if (steps - steps.round()).abs() > 1e-9 * steps {
                    return invalid(format!("with dt = h^3 the final time must be a multiple of the step, not so for 1/h = {n}"));
                }
            }
        }
        match self.command {
            Command::SingleRun if r.len() != 1 => return invalid("single-run takes exactly one refinement".into()),
            Command::ZeroStorage if self.params.s0 != 0.0 => return invalid("zero-storage runs have s0 = 0".into()),
            Command::Locking => {
                if self.element != ElementPair::One {
                    return invalid("locking runs use element 1".into());
                }
                if self.lambdas.is_empty() || self.lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
                    return invalid("lambdas must be positive".into());
                }
                if r.iter().any(|&n| self.reference < n || self.reference % n != 0) {
                    return invalid(format!("the reference mesh {} must refine every test mesh", self.reference));
                }
            }
            _ => {}
        }
        if self.export_matrix.is_some() && self.command != Command::SingleRun {
            return invalid("matrix export is available for single-run only".into());
        }
        Ok(())
    }

    /// `key=value` lines that [`parse_config_text`] reads back to an equal
    /// configuration.
    pub fn to_manifest(&self) -> String {
        let list = |v: &[String]| v.join(",");
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        line("command", value_name(&self.command));
        line("element", self.element.index().to_string());
        line("refinements", list(&self.refinements.iter().map(|n| n.to_string()).collect::<Vec<_>>()));
        line("dt-rule", self.dt_rule.to_string());
        line("mu", self.params.mu.to_string());
        line("lambda", self.params.lambda.to_string());
        line("s0", self.params.s0.to_string());
        line("kappa", self.params.kappa.to_string());
        line("alpha", self.params.alpha.to_string());
        line("t-final", self.t_final.to_string());
        if let Some(p) = &self.output {
            line("output", p.display().to_string());
        }
        line("format", value_name(&self.format));
        if self.command == Command::Locking {
            line("lambdas", list(&self.lambdas.iter().map(|l| format!("{l:e}")).collect::<Vec<_>>()));
            line("reference", self.reference.to_string());
        }
        let diagonal = match self.diagonal {
            Diagonal::Forward => DiagonalArg::Forward,
            Diagonal::Backward => DiagonalArg::Backward,
        };
        line("diagonal", value_name(&diagonal));
        if let Some(p) = &self.export_matrix {
            line("export-matrix", p.display().to_string());
        }
        line("crank-nicolson", (self.scheme == TimeScheme::CrankNicolson).to_string());
        line("max-over-steps", self.max_over_steps.to_string());
        out
    }

    /// Reads a configuration from file text alone, as `--config` would.
    pub fn from_manifest(text: &str) -> Result<Self, ConfigError> {
        Self::resolve(&Cli::default(), &FileValues(parse_config_text(text)?))
    }
}
