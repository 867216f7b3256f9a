//! Command-line flags, the optional TOML config file, and their merge.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_TRIALS: usize = 200_000;
pub const DEFAULT_T_OVER_T1: f64 = 5.0;
pub const DEFAULT_DT_OVER_T1: f64 = 1e-3;
pub const DEFAULT_PI0: f64 = 0.5;
pub const MIN_TRIALS: usize = 1000;

/// `{1, 10, 20, …, 200}`.
pub fn default_fig1_snrs() -> Vec<f64> {
    std::iter::once(1.0).chain((1..=20).map(|k| 10.0 * k as f64)).collect()
}

#[derive(Debug, Parser)]
#[command(name = "volterra", version, about = "Volterra filters, detection bounds and qubit-readout figures")]
pub struct Cli {
    /// TOML file with default values; flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalized R-optimal readout filters versus time (fig1.csv).
    Fig1(FigArgs),
    /// Error-probability bounds versus SNR (fig2.csv).
    Fig2(FigArgs),
    /// Monte-Carlo error probabilities versus SNR (fig3.csv).
    Fig3(FigArgs),
    /// Optimal Volterra filter from sample data or moments (filter.csv, error.csv).
    Synthesize(InputArgs),
    /// Linear state tomography (tomo_filter.csv, tomo_summary.csv, tomo_estimates.csv).
    Tomo(InputArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Monte-Carlo records in total, split evenly between hypotheses.
    #[arg(long, value_name = "N")]
    pub trials: Option<usize>,
    /// SNR sweep in dB.
    #[arg(long, value_name = "LO:HI:POINTS")]
    pub snr_db: Option<SnrRange>,
    #[arg(long, value_name = "X")]
    pub dt_over_t1: Option<f64>,
    #[arg(long, value_name = "X")]
    pub t_over_t1: Option<f64>,
    #[arg(long, value_name = "X")]
    pub pi0: Option<f64>,
    /// Polynomial order of the synthesized filter.
    #[arg(long, value_name = "P")]
    pub order: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct FigArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Linear SNR values for fig1, comma separated.
    #[arg(long, value_delimiter = ',', value_name = "LIST")]
    pub snr: Option<Vec<f64>>,
    /// Add tuned-threshold columns to fig3.
    #[arg(long)]
    pub tune_threshold: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct InputArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Sample CSV or model TOML.
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,
    /// Repair estimates to physical states.
    #[arg(long)]
    pub project: bool,
}

/// `LO:HI:POINTS` in dB, evenly spaced and inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrRange {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for SnrRange {
    fn default() -> Self {
        Self {
            lo: 10.0,
            hi: 30.0,
            points: 21,
        }
    }
}

impl SnrRange {
    pub fn db_values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.lo + step * i as f64).collect()
    }
}

impl FromStr for SnrRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected LO:HI:POINTS, got {s:?}"));
        }
        let num = |p: &str| p.trim().parse::<f64>().map_err(|_| format!("bad number {p:?} in {s:?}"));
        let lo = num(parts[0])?;
        let hi = num(parts[1])?;
        let points: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| format!("bad point count {:?} in {s:?}", parts[2]))?;
        if points == 0 || !lo.is_finite() || !hi.is_finite() || hi < lo {
            return Err(format!("need finite LO ≤ HI and POINTS ≥ 1, got {s:?}"));
        }
        if points == 1 && hi != lo {
            return Err(format!("a single point needs LO = HI, got {s:?}"));
        }
        Ok(Self { lo, hi, points })
    }
}

/// `SNR_dB = 10·log₁₀(snr)`.
pub fn db_to_snr(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Keys accepted in the `--config` file; all optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub snr_db: Option<String>,
    pub snr: Option<Vec<f64>>,
    pub dt_over_t1: Option<f64>,
    pub t_over_t1: Option<f64>,
    pub pi0: Option<f64>,
    pub order: Option<usize>,
    pub tune_threshold: Option<bool>,
    pub input: Option<PathBuf>,
    pub project: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub out: PathBuf,
    pub seed: u64,
    pub trials: usize,
    pub snr_db: SnrRange,
    pub fig1_snrs: Vec<f64>,
    pub dt_over_t1: f64,
    pub t_over_t1: f64,
    pub pi0: f64,
    pub order: Option<usize>,
    pub tune_threshold: bool,
    pub input: Option<PathBuf>,
    pub project: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out: PathBuf::from("."),
            seed: DEFAULT_SEED,
            trials: DEFAULT_TRIALS,
            snr_db: SnrRange::default(),
            fig1_snrs: default_fig1_snrs(),
            dt_over_t1: DEFAULT_DT_OVER_T1,
            t_over_t1: DEFAULT_T_OVER_T1,
            pi0: DEFAULT_PI0,
            order: None,
            tune_threshold: false,
            input: None,
            project: false,
        }
    }
}

impl RunConfig {
    /// Flags override file values, which override defaults.
    pub fn resolve(
        common: &CommonArgs,
        snr: Option<&Vec<f64>>,
        tune_threshold: bool,
        input: Option<&PathBuf>,
        project: bool,
        file: &FileConfig,
    ) -> CliResult<Self> {
        let d = Self::default();
        let file_range = file
            .snr_db
            .as_deref()
            .map(|s| s.parse::<SnrRange>().map_err(CliError::Config))
            .transpose()?;
        let cfg = Self {
            out: common.out.clone().or_else(|| file.out.clone()).unwrap_or(d.out),
            seed: common.seed.or(file.seed).unwrap_or(d.seed),
            trials: common.trials.or(file.trials).unwrap_or(d.trials),
            snr_db: common.snr_db.or(file_range).unwrap_or(d.snr_db),
            fig1_snrs: snr.cloned().or_else(|| file.snr.clone()).unwrap_or(d.fig1_snrs),
            dt_over_t1: common.dt_over_t1.or(file.dt_over_t1).unwrap_or(d.dt_over_t1),
            t_over_t1: common.t_over_t1.or(file.t_over_t1).unwrap_or(d.t_over_t1),
            pi0: common.pi0.or(file.pi0).unwrap_or(d.pi0),
            order: common.order.or(file.order),
            tune_threshold: tune_threshold || file.tune_threshold.unwrap_or(false),
            input: input.cloned().or_else(|| file.input.clone()),
            project: project || file.project.unwrap_or(false),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.fig1_snrs.is_empty() || self.fig1_snrs.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return bad(format!("SNR values must be positive, got {:?}", self.fig1_snrs));
        }
        if self.trials < MIN_TRIALS || self.trials % 2 != 0 {
            return bad(format!("trials must be even and at least {MIN_TRIALS}, got {}", self.trials));
        }
        if !(self.dt_over_t1 > 0.0 && self.dt_over_t1 <= 1.0) {
            return bad(format!("dt/T1 must lie in (0, 1], got {}", self.dt_over_t1));
        }
        if !(self.t_over_t1 > 0.0) || !self.t_over_t1.is_finite() {
            return bad(format!("T/T1 must be positive, got {}", self.t_over_t1));
        }
        if !(self.pi0 > 0.0 && self.pi0 < 1.0) {
            return bad(format!("pi0 must lie in (0, 1), got {}", self.pi0));
        }
        Ok(())
    }
}
