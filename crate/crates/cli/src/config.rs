//! Flags and the optional JSON config file share one shape; flags win.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Exact,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Theorem {
    /// Explicit-constant tail bound for a degenerate tensor.
    Main,
    /// Combinatorial Hanson-Wright bound (needs --k).
    HansonWright,
    /// Bennett-type bound; explicit constants unless --k is given.
    Bennett,
    /// Two-term bound for a general tensor (needs --k).
    Corollary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HwArg {
    General,
    Psd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Decomposition,
    Decoupling,
    Dominance,
    Bennett,
    Randomization,
    Statistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatisticArg {
    Kendall,
    Spearman,
    Pearson,
    Chatterjee,
    Mww,
    Graph,
    Regression,
}

/// Parameters shared by every subcommand. Unused ones are ignored.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Input file (tensor JSON, sample CSV, graph JSON, ...).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Second graph for the graph statistic.
    #[arg(long)]
    pub input2: Option<PathBuf>,
    /// Output path (file, or prefix for JSON + CSV pairs, or directory for decompose).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Directory written by `decompose`, checked instead of recomputing.
    #[arg(long)]
    pub decomposition: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replicates: Option<u64>,
    /// tmin:tmax:points
    #[arg(long)]
    pub grid: Option<String>,
    /// Whether the i = j terms enter the statistic.
    #[arg(long)]
    pub include_diagonal: Option<bool>,
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, value_enum)]
    pub theorem: Option<Theorem>,
    #[arg(long, value_enum)]
    pub variant: Option<HwArg>,
    /// Comma-separated list of checks.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub check: Option<Vec<CheckKind>>,
    #[arg(long, value_enum)]
    pub statistic: Option<StatisticArg>,
    /// λ of the randomization check.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// JSON file with any of the above; flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl RunConfig {
    /// Fills unset fields from `other`.
    pub fn or(self, other: RunConfig) -> RunConfig {
        RunConfig {
            input: self.input.or(other.input),
            input2: self.input2.or(other.input2),
            output: self.output.or(other.output),
            decomposition: self.decomposition.or(other.decomposition),
            seed: self.seed.or(other.seed),
            replicates: self.replicates.or(other.replicates),
            grid: self.grid.or(other.grid),
            include_diagonal: self.include_diagonal.or(other.include_diagonal),
            k: self.k.or(other.k),
            mode: self.mode.or(other.mode),
            threads: self.threads.or(other.threads),
            theorem: self.theorem.or(other.theorem),
            variant: self.variant.or(other.variant),
            check: self.check.or(other.check),
            statistic: self.statistic.or(other.statistic),
            lambda: self.lambda.or(other.lambda),
            config: self.config,
        }
    }

    /// Merges the config file named by `--config`, if any.
    pub fn resolve(self) -> Result<RunConfig, CliError> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let file = load_config(&path)?;
        Ok(self.or(file))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.replicates == Some(0) {
            return Err(CliError::Usage("--replicates must be >= 1".into()));
        }
        if self.threads == Some(0) {
            return Err(CliError::Usage("--threads must be >= 1".into()));
        }
        if self.mode == Some(ModeArg::Mc) && self.seed.is_none() {
            return Err(CliError::Usage("--mode mc needs --seed".into()));
        }
        Ok(())
    }

    pub fn require_input(&self) -> Result<&Path, CliError> {
        self.input.as_deref().ok_or_else(|| CliError::Usage("--input is required".into()))
    }

    pub fn require_include_diagonal(&self) -> Result<bool, CliError> {
        self.include_diagonal
            .ok_or_else(|| CliError::Usage("--include-diagonal true|false is required for raw tensors".into()))
    }

    pub fn seed_or_default(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(e.into()))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(e.into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_take_precedence() {
        let flags = RunConfig { seed: Some(1), grid: Some("0:1:2".into()), ..Default::default() };
        let file = RunConfig { seed: Some(9), replicates: Some(50), ..Default::default() };
        let merged = flags.or(file);
        assert_eq!(merged.seed, Some(1));
        assert_eq!(merged.replicates, Some(50));
        assert_eq!(merged.grid.as_deref(), Some("0:1:2"));
    }

    #[test]
    fn validation() {
        assert!(RunConfig { replicates: Some(0), ..Default::default() }.validate().is_err());
        assert!(RunConfig { threads: Some(0), ..Default::default() }.validate().is_err());
        assert!(RunConfig { mode: Some(ModeArg::Mc), ..Default::default() }.validate().is_err());
        assert!(RunConfig { mode: Some(ModeArg::Mc), seed: Some(3), ..Default::default() }.validate().is_ok());
        assert!(RunConfig::default().require_include_diagonal().is_err());
    }

    #[test]
    fn config_json_uses_flag_names() {
        let cfg: RunConfig = serde_json::from_str(
            r#"{"include_diagonal": false, "mode": "mc", "check": ["decomposition", "decoupling"]}"#,
        )
        .unwrap();
        assert_eq!(cfg.include_diagonal, Some(false));
        assert_eq!(cfg.check.unwrap().len(), 2);
        assert!(serde_json::from_str::<RunConfig>(r#"{"seeds": 1}"#).is_err());
    }
}
