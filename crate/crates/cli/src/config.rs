//! Analysis configuration. Everything is explicit; no environment
//! variables are consulted anywhere.

use std::path::PathBuf;

use serde::Serialize;

use sdma_core::{ModelKind, ScaleTag};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Framework {
    Classical,
    Bayes,
    Both,
}

impl Framework {
    pub fn classical(self) -> bool {
        matches!(self, Framework::Classical | Framework::Both)
    }

    pub fn bayes(self) -> bool {
        matches!(self, Framework::Bayes | Framework::Both)
    }
}

/// Where the fractional weights come from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSource {
    Equal,
    TeamSplit,
    /// One positive number per line; normalized to sum to one.
    File(PathBuf),
    /// Use the optional `weight` column of the input CSV when present,
    /// falling back to equal weights. This is the default.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InputScale {
    /// Effect sizes are already additive (log OR, log RR, SMD, beta).
    Additive,
    /// Effect sizes arrive exponentiated (OR, RR); ingestion takes logs.
    /// Standard errors must already be on the log scale unless `ci_to_se`
    /// derives them from ratio-scale interval columns.
    Ratio,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisConfig {
    pub model_kind: ModelKind,
    pub framework: Framework,
    pub weights: WeightSource,
    pub scale: ScaleTag,
    pub input_scale: InputScale,
    /// Confidence level for classical intervals.
    pub level: f64,
    /// Derive standard errors from `ci_lower` / `ci_upper` columns via
    /// (upper - lower) / (2 * z_{0.975}) on the additive scale (logs taken
    /// first for ratio input).
    pub ci_to_se: bool,
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(CliError::Config(format!(
                "confidence level must be in (0, 1), got {}",
                self.level
            )));
        }
        if let ScaleTag::Generic { ui } = self.scale {
            if !(ui > 0.0 && ui.is_finite()) {
                return Err(CliError::Config(format!(
                    "generic scale requires a positive unit information, got {ui}"
                )));
            }
        }
        Ok(())
    }
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            model_kind: ModelKind::Random,
            framework: Framework::Both,
            weights: WeightSource::Auto,
            scale: ScaleTag::Generic { ui: 1.0 },
            input_scale: InputScale::Additive,
            level: 0.95,
            ci_to_se: false,
        }
    }
}
