//! Experiment configuration: a small key=value file, overridable by
//! command-line flags.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use mrct_core::GraphKind;
use serde::Serialize;

/// Which terminal set a trial uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalSpec {
    /// Every node is a terminal.
    All,
    /// A seeded random subset of the given size.
    Random(u32),
}

impl FromStr for TerminalSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(TerminalSpec::All);
        }
        let k: u32 = s
            .parse()
            .with_context(|| format!("terminals must be `all` or a count, got {s:?}"))?;
        if k < 2 {
            bail!("terminal count must be at least 2, got {k}");
        }
        Ok(TerminalSpec::Random(k))
    }
}

impl fmt::Display for TerminalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TerminalSpec::All => write!(f, "all"),
            TerminalSpec::Random(k) => write!(f, "{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Det,
    Rand,
    Both,
}

impl FromStr for RunMode {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "det" | "deterministic" => Ok(RunMode::Det),
            "rand" | "randomized" => Ok(RunMode::Rand),
            "both" => Ok(RunMode::Both),
            other => bail!("mode must be det, rand or both, got {other:?}"),
        }
    }
}

pub fn parse_graph_kind(s: &str) -> Result<GraphKind> {
    match s.to_ascii_lowercase().as_str() {
        "clique" => Ok(GraphKind::Clique),
        "path" => Ok(GraphKind::Path),
        "grid" => Ok(GraphKind::Grid),
        "random" | "random_connected" => Ok(GraphKind::RandomConnected),
        other => bail!("unknown graph kind {other:?}"),
    }
}

pub fn graph_kind_name(kind: GraphKind) -> &'static str {
    match kind {
        GraphKind::Clique => "clique",
        GraphKind::Path => "path",
        GraphKind::Grid => "grid",
        GraphKind::RandomConnected => "random_connected",
    }
}

/// Full description of one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub graph: GraphKind,
    pub n: u32,
    pub p: f64,
    pub max_delay: u64,
    pub terminals: TerminalSpec,
    pub mode: RunMode,
    pub alpha: f64,
    pub seed: u64,
    pub trials: u32,
    /// Compare against the exact S-MRCT (only valid within the
    /// enumeration budget).
    pub exact: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            graph: GraphKind::RandomConnected,
            n: 16,
            p: 0.3,
            max_delay: 1,
            terminals: TerminalSpec::All,
            mode: RunMode::Det,
            alpha: 1.0,
            seed: 0,
            trials: 1,
            exact: false,
        }
    }
}

impl ExperimentConfig {
    /// Applies one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "graph" => self.graph = parse_graph_kind(value)?,
            "n" => self.n = value.parse().context("n")?,
            "p" => self.p = value.parse().context("p")?,
            "max_delay" => self.max_delay = value.parse().context("max_delay")?,
            "terminals" => self.terminals = value.parse()?,
            "mode" => self.mode = value.parse()?,
            "alpha" => self.alpha = value.parse().context("alpha")?,
            "seed" => self.seed = value.parse().context("seed")?,
            "trials" => self.trials = value.parse().context("trials")?,
            "exact" => self.exact = value.parse().context("exact")?,
            other => bail!("unknown config key {other:?}"),
        }
        Ok(())
    }

    /// Loads `key = value` lines; `#` starts a comment.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = ExperimentConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("line {}: expected `key = value`", idx + 1))?;
            cfg.set(key.trim(), value.trim())
                .with_context(|| format!("line {}", idx + 1))?;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            bail!("n must be at least 2");
        }
        if self.trials < 1 {
            bail!("trials must be at least 1");
        }
        if let TerminalSpec::Random(k) = self.terminals {
            if k > self.n {
                bail!("terminal count {k} exceeds n = {}", self.n);
            }
        }
        if self.exact && self.n > 9 {
            bail!(
                "exact MRCT comparison needs n <= 9 (enumeration budget), got n = {}",
                self.n
            );
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_key_value_lines() {
        let dir = std::env::temp_dir().join("mrct-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("exp.cfg");
        std::fs::write(
            &path,
            "# sample\ngraph = clique\nn = 6\nmode = both\ntrials = 3\n",
        )
        .unwrap();
        let cfg = ExperimentConfig::from_file(&path).unwrap();
        assert_eq!(cfg.graph, GraphKind::Clique);
        assert_eq!(cfg.n, 6);
        assert_eq!(cfg.mode, RunMode::Both);
        assert_eq!(cfg.trials, 3);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let mut cfg = ExperimentConfig::default();
        assert!(cfg.set("frobnicate", "1").is_err());
        assert!(cfg.set("n", "many").is_err());
        assert!("1".parse::<TerminalSpec>().is_err());
    }

    #[test]
    fn validation_catches_budget_misuse() {
        let cfg = ExperimentConfig {
            exact: true,
            n: 20,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
