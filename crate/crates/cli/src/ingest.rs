//! CSV ingestion and scale transforms.
//!
//! Required columns: `label`, `team`, `y`, `se`; optional `weight`. With
//! `--ci-to-se`, `ci_lower` / `ci_upper` columns replace `se`. Ratio-scale
//! input (`--input-scale ratio`) is converted to logs here at the boundary;
//! the engines only ever see additive values.

use std::path::Path;

use sdma_core::dist::std_normal_quantile;
use sdma_core::{EstimateRecord, EstimateSet};

use crate::config::{AnalysisConfig, InputScale};
use crate::CliError;

/// A parsed input file: the validated estimates plus any raw weights found
/// in the optional `weight` column.
#[derive(Debug)]
pub struct IngestedData {
    pub set: EstimateSet,
    pub csv_weights: Option<Vec<f64>>,
}

fn find_column(headers: &csv::StringRecord, name: &'static str) -> Option<usize> {
    headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name))
}

fn require_column(headers: &csv::StringRecord, name: &'static str) -> Result<usize, CliError> {
    find_column(headers, name).ok_or(CliError::MissingColumn(name))
}

fn parse_field(record: &csv::StringRecord, idx: usize, row: usize, column: &str) -> Result<f64, CliError> {
    let raw = record.get(idx).unwrap_or("").trim();
    raw.parse::<f64>().map_err(|e| CliError::ParseError {
        row,
        column: column.to_string(),
        message: format!("cannot parse '{raw}': {e}"),
    })
}

/// Read, transform, and validate an estimates CSV.
pub fn read_estimates(path: &Path, config: &AnalysisConfig) -> Result<IngestedData, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::ParseError {
            row: 0,
            column: String::new(),
            message: format!("cannot open {}: {e}", path.display()),
        })?;

    let headers = reader
        .headers()
        .map_err(|e| CliError::ParseError {
            row: 0,
            column: String::new(),
            message: e.to_string(),
        })?
        .clone();

    let label_idx = require_column(&headers, "label")?;
    let team_idx = require_column(&headers, "team")?;
    let y_idx = require_column(&headers, "y")?;
    let se_idx = if config.ci_to_se {
        None
    } else {
        Some(require_column(&headers, "se")?)
    };
    let ci_idx = if config.ci_to_se {
        Some((
            require_column(&headers, "ci_lower")?,
            require_column(&headers, "ci_upper")?,
        ))
    } else {
        None
    };
    let weight_idx = find_column(&headers, "weight");

    let z = std_normal_quantile(0.975);
    let to_additive = |value: f64, row: usize| -> Result<f64, CliError> {
        match config.input_scale {
            InputScale::Additive => Ok(value),
            InputScale::Ratio => {
                if value <= 0.0 {
                    Err(CliError::NonPositiveRatio { row, value })
                } else {
                    Ok(value.ln())
                }
            }
        }
    };

    let mut records = Vec::new();
    let mut csv_weights = Vec::new();
    for (i, result) in reader.records().enumerate() {
        let row = i + 2; // 1-based, after the header line
        let record = result.map_err(|e| CliError::ParseError {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;

        let label = record.get(label_idx).unwrap_or("").to_string();
        let team = record.get(team_idx).unwrap_or("").to_string();
        let y = to_additive(parse_field(&record, y_idx, row, "y")?, row)?;
        let se = match (se_idx, ci_idx) {
            (Some(idx), _) => parse_field(&record, idx, row, "se")?,
            (None, Some((lo_idx, hi_idx))) => {
                let lo = to_additive(parse_field(&record, lo_idx, row, "ci_lower")?, row)?;
                let hi = to_additive(parse_field(&record, hi_idx, row, "ci_upper")?, row)?;
                (hi - lo) / (2.0 * z)
            }
            (None, None) => unreachable!("one of se / ci columns is resolved above"),
        };
        if let Some(idx) = weight_idx {
            csv_weights.push(parse_field(&record, idx, row, "weight")?);
        }
        records.push(EstimateRecord {
            label,
            team,
            y,
            se,
            scale_tag: config.scale,
        });
    }

    let set = EstimateSet::new(records)?;
    Ok(IngestedData {
        set,
        csv_weights: if weight_idx.is_some() {
            Some(csv_weights)
        } else {
            None
        },
    })
}

/// Custom-weights file: one positive number per line; blank lines and
/// `#` comments are skipped.
pub fn read_weights_file(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path.display().to_string()))?;
    let mut weights = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let value = line.parse::<f64>().map_err(|e| CliError::ParseError {
            row: i + 1,
            column: "weight".to_string(),
            message: format!("cannot parse '{line}': {e}"),
        })?;
        weights.push(value);
    }
    Ok(weights)
}
