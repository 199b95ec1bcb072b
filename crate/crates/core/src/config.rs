//! Command-line and config-file settings.
//!
//! Precedence is flags, then the `--config` file, then `SRCF_SEED` (seed
//! only), then per-command defaults.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::rules::{IntegrationScheme, SchemeKind};

pub const SEED_ENV: &str = "SRCF_SEED";
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Cli(#[from] clap::Error),
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    File { path: PathBuf, line: usize, message: String },
    #[error("invalid value for `{key}`: {message}")]
    Value { key: String, message: String },
}

fn value_err(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Value {
        key: key.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    IntegralBench,
    FilterBench,
    RuleCheck,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::IntegralBench => "integral-bench",
            Command::FilterBench => "filter-bench",
            Command::RuleCheck => "rule-check",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub command: Command,
    pub n: usize,
    pub q: u32,
    pub steps: usize,
    pub runs: usize,
    pub n_mc: usize,
    pub draws: usize,
    pub schemes: Vec<SchemeKind>,
    pub n_m: BTreeMap<SchemeKind, usize>,
    pub mc_samples: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    pub workers: Option<usize>,
}

impl BenchConfig {
    pub fn defaults(command: Command) -> Self {
        let n_m = BTreeMap::from([(SchemeKind::Sif3, 50), (SchemeKind::Sif5, 10), (SchemeKind::Qsif5, 10)]);
        let (n, schemes) = match command {
            Command::IntegralBench => (6, SchemeKind::ALL.to_vec()),
            Command::FilterBench => (
                10,
                vec![
                    SchemeKind::Ckf3,
                    SchemeKind::Ckf5,
                    SchemeKind::Sif3,
                    SchemeKind::Sif5,
                    SchemeKind::Qsif5,
                ],
            ),
            Command::RuleCheck => (4, SchemeKind::ALL.to_vec()),
        };
        Self {
            command,
            n,
            q: 2,
            steps: 100,
            runs: 1000,
            n_mc: 500,
            draws: 100,
            schemes,
            n_m,
            mc_samples: 600,
            seed: DEFAULT_SEED,
            out: None,
            format: OutputFormat::Csv,
            workers: None,
        }
    }

    /// Repetition count for `kind` (1 when not configured).
    pub fn n_m_for(&self, kind: SchemeKind) -> usize {
        if kind.is_deterministic() {
            1
        } else {
            self.n_m.get(&kind).copied().unwrap_or(1)
        }
    }

    pub fn integration_schemes(&self) -> Result<Vec<IntegrationScheme>, ConfigError> {
        self.schemes
            .iter()
            .map(|&k| {
                IntegrationScheme::new(k, self.n_m_for(k), self.mc_samples)
                    .map_err(|e| value_err("schemes", e.to_string()))
            })
            .collect()
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("n", self.n),
            ("steps", self.steps),
            ("runs", self.runs),
            ("nmc", self.n_mc),
            ("draws", self.draws),
            ("mc-samples", self.mc_samples),
            ("q", self.q as usize),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(value_err(key, "must be at least 1"));
            }
        }
        if self.workers == Some(0) {
            return Err(value_err("workers", "must be at least 1"));
        }
        if self.schemes.is_empty() {
            return Err(value_err("schemes", "at least one scheme is required"));
        }
        for k in &self.schemes {
            if self.n < k.min_dimension() {
                return Err(value_err(
                    "n",
                    format!("{k} needs n >= {}; raise --n or drop {k} from --schemes", k.min_dimension()),
                ));
            }
        }
        for (k, v) in &self.n_m {
            if *v == 0 {
                return Err(value_err("nm", format!("{k}=0, repetition counts must be at least 1")));
            }
        }
        if self.command == Command::FilterBench && self.q > 16 {
            return Err(value_err("q", "exponents above 16 overflow double precision for this model"));
        }
        Ok(())
    }
}

#[derive(Debug, Parser)]
#[command(name = "srcf", version, about = "Stochastic spherical-radial integration benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Debug, Subcommand)]
enum CliCommand {
    /// Relative error of each rule on E[Σ x_i^i] under N(0, I_n).
    IntegralBench(Flags),
    /// RMSE of each filter on the growth model.
    FilterBench(Flags),
    /// Polynomial exactness of each rule against Gaussian moments.
    RuleCheck(Flags),
}

#[derive(Debug, Default, Args)]
struct Flags {
    /// State dimension.
    #[arg(long)]
    n: Option<usize>,
    /// Nonlinearity exponent of the growth model observation.
    #[arg(long)]
    q: Option<u32>,
    /// Time steps per trajectory.
    #[arg(long)]
    steps: Option<usize>,
    /// Independent runs of the integral benchmark.
    #[arg(long)]
    runs: Option<usize>,
    /// Monte-Carlo trajectories of the filter benchmark.
    #[arg(long)]
    nmc: Option<usize>,
    /// Independent rule draws for rule-check.
    #[arg(long)]
    draws: Option<usize>,
    /// Comma-separated list out of ckf3,ckf5,sif3,sif5,qsif5,mc.
    #[arg(long)]
    schemes: Option<String>,
    /// Repetition count per scheme, e.g. `--nm sif5=10`. Repeatable.
    #[arg(long = "nm")]
    nm: Vec<String>,
    /// Samples per Monte-Carlo estimate.
    #[arg(long = "mc-samples")]
    mc_samples: Option<usize>,
    /// Master seed (falls back to $SRCF_SEED).
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    workers: Option<usize>,
    /// Key-value file with the same keys as the long flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

const FILE_KEYS: [&str; 13] = [
    "n",
    "q",
    "steps",
    "runs",
    "nmc",
    "draws",
    "schemes",
    "nm",
    "mc-samples",
    "seed",
    "out",
    "format",
    "workers",
];

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    v.trim()
        .parse()
        .map_err(|e: T::Err| value_err(key, format!("`{v}`: {e}")))
}

pub fn parse_schemes(v: &str) -> Result<Vec<SchemeKind>, ConfigError> {
    let mut out = Vec::new();
    for part in v.split(',').filter(|p| !p.trim().is_empty()) {
        let k: SchemeKind = part.parse().map_err(|e: crate::rules::RuleError| value_err("schemes", e.to_string()))?;
        if out.contains(&k) {
            return Err(value_err("schemes", format!("{k} listed twice")));
        }
        out.push(k);
    }
    Ok(out)
}

/// Parses `scheme=count` items into `map`, rejecting contradicting repeats.
fn parse_nm(items: &[&str], map: &mut BTreeMap<SchemeKind, usize>) -> Result<(), ConfigError> {
    let mut seen = BTreeMap::new();
    for item in items.iter().flat_map(|s| s.split(',')).filter(|s| !s.trim().is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| value_err("nm", format!("`{item}` is not of the form <scheme>=<count>")))?;
        let kind: SchemeKind = k.parse().map_err(|e: crate::rules::RuleError| value_err("nm", e.to_string()))?;
        let count: usize = parse_num("nm", v)?;
        if let Some(prev) = seen.insert(kind, count) {
            if prev != count {
                return Err(value_err("nm", format!("{kind} given both {prev} and {count}")));
            }
        }
        map.insert(kind, count);
    }
    Ok(())
}

fn read_config_file(path: &Path) -> Result<BTreeMap<String, (usize, String)>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let file_err = |message: String| ConfigError::File {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| file_err(format!("expected `key = value`, got `{line}`")))?;
        let key = k.trim().trim_start_matches("--").to_string();
        if !FILE_KEYS.contains(&key.as_str()) {
            return Err(file_err(format!("unknown key `{key}` (allowed: {})", FILE_KEYS.join(", "))));
        }
        let value = v.trim().to_string();
        match out.get_mut(&key) {
            // repeated `nm` lines accumulate
            Some((_, existing)) if key == "nm" => {
                existing.push(',');
                existing.push_str(&value);
            }
            Some(_) => return Err(file_err(format!("key `{key}` given twice"))),
            None => {
                out.insert(key, (i + 1, value));
            }
        }
    }
    Ok(out)
}

fn apply_file(cfg: &mut BenchConfig, file: &BTreeMap<String, (usize, String)>) -> Result<(), ConfigError> {
    for (key, (_, v)) in file {
        match key.as_str() {
            "n" => cfg.n = parse_num(key, v)?,
            "q" => cfg.q = parse_num(key, v)?,
            "steps" => cfg.steps = parse_num(key, v)?,
            "runs" => cfg.runs = parse_num(key, v)?,
            "nmc" => cfg.n_mc = parse_num(key, v)?,
            "draws" => cfg.draws = parse_num(key, v)?,
            "schemes" => cfg.schemes = parse_schemes(v)?,
            "nm" => parse_nm(&[v.as_str()], &mut cfg.n_m)?,
            "mc-samples" => cfg.mc_samples = parse_num(key, v)?,
            "seed" => cfg.seed = parse_num(key, v)?,
            "out" => cfg.out = Some(PathBuf::from(v)),
            "format" => cfg.format = v.parse().map_err(|e: String| value_err(key, e))?,
            "workers" => cfg.workers = Some(parse_num(key, v)?),
            _ => unreachable!("keys are checked while reading"),
        }
    }
    Ok(())
}

fn apply_flags(cfg: &mut BenchConfig, f: &Flags) -> Result<(), ConfigError> {
    macro_rules! set {
        ($($field:ident => $target:ident),*) => {
            $(if let Some(v) = f.$field { cfg.$target = v; })*
        };
    }
    set!(n => n, q => q, steps => steps, runs => runs, nmc => n_mc, draws => draws, mc_samples => mc_samples, seed => seed);
    if let Some(s) = &f.schemes {
        cfg.schemes = parse_schemes(s)?;
    }
    if !f.nm.is_empty() {
        let items: Vec<&str> = f.nm.iter().map(String::as_str).collect();
        parse_nm(&items, &mut cfg.n_m)?;
    }
    if let Some(out) = &f.out {
        cfg.out = Some(out.clone());
    }
    if let Some(fmt) = f.format {
        cfg.format = fmt;
    }
    if let Some(w) = f.workers {
        cfg.workers = Some(w);
    }
    Ok(())
}

/// Parses `argv` (program name first) into a [`BenchConfig`], reading
/// `SRCF_SEED` from the environment.
pub fn parse_config<I, T>(argv: I) -> Result<BenchConfig, ConfigError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let env_seed = std::env::var(SEED_ENV).ok();
    parse_config_with_env(argv, env_seed.as_deref())
}

/// [`parse_config`] with the seed fallback passed explicitly.
pub fn parse_config_with_env<I, T>(argv: I, env_seed: Option<&str>) -> Result<BenchConfig, ConfigError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    let (command, flags) = match cli.command {
        CliCommand::IntegralBench(f) => (Command::IntegralBench, f),
        CliCommand::FilterBench(f) => (Command::FilterBench, f),
        CliCommand::RuleCheck(f) => (Command::RuleCheck, f),
    };
    let mut cfg = BenchConfig::defaults(command);
    if let Some(s) = env_seed {
        cfg.seed = parse_num(SEED_ENV, s)?;
    }
    if let Some(path) = &flags.config {
        apply_file(&mut cfg, &read_config_file(path)?)?;
    }
    apply_flags(&mut cfg, &flags)?;
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn parse(args: &[&str]) -> Result<BenchConfig, ConfigError> {
        parse_config_with_env(std::iter::once("srcf").chain(args.iter().copied()), None)
    }

    #[test]
    fn integral_defaults() {
        let c = parse(&["integral-bench"]).unwrap();
        assert_eq!(c.n, 6);
        assert_eq!(c.runs, 1000);
        assert_eq!(c.n_m_for(SchemeKind::Sif3), 50);
        assert_eq!(c.n_m_for(SchemeKind::Sif5), 10);
        assert_eq!(c.n_m_for(SchemeKind::Qsif5), 10);
        assert_eq!(c.n_m_for(SchemeKind::Ckf5), 1);
        assert_eq!(c.mc_samples, 600);
        assert_eq!(c.schemes.len(), 6);
    }

    #[test]
    fn filter_defaults_and_second_experiment() {
        let c = parse(&["filter-bench"]).unwrap();
        assert_eq!((c.n, c.q, c.n_mc, c.steps), (10, 2, 500, 100));
        let c = parse(&["filter-bench", "--q", "4", "--n", "10"]).unwrap();
        assert_eq!((c.n, c.q), (10, 4));
    }

    #[test]
    fn flags() {
        let c = parse(&[
            "integral-bench",
            "--schemes",
            "sif5,mc",
            "--nm",
            "sif5=20",
            "--mc-samples",
            "100",
            "--seed",
            "42",
            "--format",
            "json",
            "--workers",
            "3",
        ])
        .unwrap();
        assert_eq!(c.schemes, vec![SchemeKind::Sif5, SchemeKind::Mc]);
        assert_eq!(c.n_m_for(SchemeKind::Sif5), 20);
        assert_eq!(c.mc_samples, 100);
        assert_eq!(c.seed, 42);
        assert_eq!(c.format, OutputFormat::Json);
        assert_eq!(c.workers, Some(3));
    }

    #[test]
    fn seed_precedence() {
        let argv = ["srcf", "integral-bench"];
        assert_eq!(parse_config_with_env(argv, None).unwrap().seed, DEFAULT_SEED);
        assert_eq!(parse_config_with_env(argv, Some("9")).unwrap().seed, 9);
        let c = parse_config_with_env(["srcf", "integral-bench", "--seed", "5"], Some("9")).unwrap();
        assert_eq!(c.seed, 5);
        assert!(parse_config_with_env(argv, Some("x")).is_err());
    }

    #[test]
    fn file_then_flags() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "# settings\nn = 8\nruns = 12\nnm = sif5=3\nseed = 77\nformat = json").unwrap();
        let path = f.path().to_str().unwrap();
        let c = parse(&["integral-bench", "--config", path, "--runs", "4"]).unwrap();
        assert_eq!(c.n, 8);
        assert_eq!(c.runs, 4);
        assert_eq!(c.n_m_for(SchemeKind::Sif5), 3);
        assert_eq!(c.seed, 77);
        assert_eq!(c.format, OutputFormat::Json);
    }

    #[test]
    fn file_rejects_unknown_keys() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "n = 8\nbogus = 1").unwrap();
        let err = parse(&["integral-bench", "--config", f.path().to_str().unwrap()]).unwrap_err();
        match err {
            ConfigError::File { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("bogus"));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn invalid_values() {
        assert!(parse(&["integral-bench", "--runs", "0"]).is_err());
        assert!(parse(&["integral-bench", "--schemes", "sif9"]).is_err());
        assert!(parse(&["integral-bench", "--schemes", "sif5,sif5"]).is_err());
        assert!(parse(&["integral-bench", "--nm", "sif5=3", "--nm", "sif5=4"]).is_err());
        assert!(parse(&["integral-bench", "--nm", "sif5"]).is_err());
        assert!(parse(&["integral-bench", "--nm", "sif5=0"]).is_err());
        let err = parse(&["integral-bench", "--n", "1"]).unwrap_err();
        assert!(err.to_string().contains("needs n >= 2"), "{err}");
        assert!(parse(&["integral-bench", "--n", "1", "--schemes", "ckf3,sif3,mc"]).is_ok());
        assert!(parse(&["integral-bench", "--bogus"]).is_err());
        assert!(parse(&["frobnicate"]).is_err());
    }
}
