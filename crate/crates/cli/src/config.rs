//! Experiment configuration: a `key = value` text file whose entries can be
//! overridden from the command line.

use std::path::PathBuf;
use std::str::FromStr;

use clap::ValueEnum;
use serde::Serialize;

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(CliError::Input(format!("unknown output format {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub n_values: Vec<usize>,
    pub sample_counts: Vec<usize>,
    pub repetitions: usize,
    pub output_format: OutputFormat,
    pub output_path: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_values: vec![16, 64, 256],
            sample_counts: vec![10_000],
            repetitions: 1,
            output_format: OutputFormat::Csv,
            output_path: None,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub n_values: Option<Vec<usize>>,
    pub sample_counts: Option<Vec<usize>>,
    pub repetitions: Option<usize>,
    pub output_format: Option<OutputFormat>,
    pub output_path: Option<PathBuf>,
}

fn parse_list(key: &str, value: &str) -> CliResult<Vec<usize>> {
    value
        .split([',', ' '])
        .filter(|t| !t.is_empty())
        .map(|t| parse_count(key, t))
        .collect()
}

fn parse_count(key: &str, value: &str) -> CliResult<usize> {
    value
        .trim()
        .parse()
        .map_err(|e| CliError::Input(format!("{key}: {value:?}: {e}")))
}

impl ExperimentConfig {
    /// Parses `key = value` lines; `#` starts a comment. Unknown keys are
    /// errors.
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut config = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Input(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "seed" => {
                    config.seed = value
                        .parse()
                        .map_err(|e| CliError::Input(format!("seed: {value:?}: {e}")))?
                }
                "n_values" => config.n_values = parse_list(key, value)?,
                "sample_counts" => config.sample_counts = parse_list(key, value)?,
                "repetitions" => config.repetitions = parse_count(key, value)?,
                "output_format" => config.output_format = value.parse()?,
                "output_path" => config.output_path = Some(PathBuf::from(value)),
                other => {
                    return Err(CliError::Input(format!(
                        "line {}: unknown key {other:?}",
                        lineno + 1
                    )))
                }
            }
        }
        Ok(config)
    }

    pub fn apply(mut self, o: Overrides) -> Self {
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.n_values {
            self.n_values = v;
        }
        if let Some(v) = o.sample_counts {
            self.sample_counts = v;
        }
        if let Some(v) = o.repetitions {
            self.repetitions = v;
        }
        if let Some(v) = o.output_format {
            self.output_format = v;
        }
        if o.output_path.is_some() {
            self.output_path = o.output_path;
        }
        self
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.n_values.is_empty() || self.sample_counts.is_empty() {
            return Err(CliError::Validation("n_values and sample_counts must be non-empty".into()));
        }
        if self.n_values.contains(&0) || self.sample_counts.contains(&0) || self.repetitions == 0 {
            return Err(CliError::Validation("dimensions and counts must be positive".into()));
        }
        Ok(())
    }
}
