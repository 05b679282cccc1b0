//! Estimate records and validated estimate collections.
//!
//! An [`EstimateRecord`] is one analysis team's effect size and standard
//! error on an additive scale (log odds ratio, log relative risk,
//! standardized coefficient, ...). Exponentiated inputs (OR, RR) are
//! converted at the I/O boundary, never inside the engines.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Scale on which an effect size is expressed.
///
/// The engines treat all scales identically (they only require additivity);
/// the tag drives display back-transforms and the unit-information prior
/// scale in the Bayesian engine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleTag {
    /// Log odds ratio.
    LogOr,
    /// Log relative risk.
    LogRr,
    /// Standardized mean difference.
    Smd,
    /// Standardized regression coefficient.
    Beta,
    /// Any other additive scale; carries a user-supplied unit-information
    /// prior standard deviation.
    Generic { ui: f64 },
}

impl ScaleTag {
    /// True when display output should be back-transformed with `exp`.
    pub fn is_ratio_scale(self) -> bool {
        matches!(self, ScaleTag::LogOr | ScaleTag::LogRr)
    }
}

/// One effect size estimate with its standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    /// Unique identifier within a set.
    pub label: String,
    /// Analysis team; may repeat across records when a team submits
    /// several estimates.
    pub team: String,
    /// Effect size on an additive scale.
    pub y: f64,
    /// Standard error of `y`; strictly positive.
    pub se: f64,
    pub scale_tag: ScaleTag,
}

/// Validation failures for estimate and weight inputs.
#[derive(Debug, Error, PartialEq)]
pub enum DataError {
    #[error("record '{label}': standard error {se} is not strictly positive")]
    NonPositiveSE { label: String, se: f64 },
    #[error("record '{label}': field '{field}' is not finite")]
    NonFiniteValue { label: String, field: &'static str },
    #[error("duplicate label '{0}'")]
    DuplicateLabel(String),
    #[error("estimate set must contain at least one record")]
    EmptySet,
    #[error("weight at index {index} is {value}; weights must be strictly positive and finite")]
    NonPositiveWeight { index: usize, value: f64 },
    #[error("weights sum to {0}, outside the renormalization tolerance of 1e-6 around 1")]
    WeightSumOutOfTolerance(f64),
}

/// A validated, ordered collection of estimates.
///
/// Invariants: at least one record, strictly positive finite standard
/// errors, finite effect sizes, unique labels. Duplicate `(y, se)` pairs are
/// allowed; duplicated analyses are a meaningful degenerate case.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateSet {
    records: Vec<EstimateRecord>,
}

impl EstimateSet {
    /// Validate `records` and construct a set.
    pub fn new(records: Vec<EstimateRecord>) -> Result<Self, DataError> {
        if records.is_empty() {
            return Err(DataError::EmptySet);
        }
        for rec in &records {
            if !rec.y.is_finite() {
                return Err(DataError::NonFiniteValue {
                    label: rec.label.clone(),
                    field: "y",
                });
            }
            if rec.se.is_nan() {
                return Err(DataError::NonFiniteValue {
                    label: rec.label.clone(),
                    field: "se",
                });
            }
            if !(rec.se > 0.0 && rec.se.is_finite()) {
                return Err(DataError::NonPositiveSE {
                    label: rec.label.clone(),
                    se: rec.se,
                });
            }
        }
        let mut labels: Vec<&str> = records.iter().map(|r| r.label.as_str()).collect();
        labels.sort_unstable();
        if let Some(dup) = labels.windows(2).find(|w| w[0] == w[1]) {
            return Err(DataError::DuplicateLabel(dup[0].to_string()));
        }
        Ok(Self { records })
    }

    /// Number of estimates K.
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        false // K >= 1 by construction
    }

    pub fn records(&self) -> &[EstimateRecord] {
        &self.records
    }

    pub fn effects(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.y)
    }

    pub fn standard_errors(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.se)
    }

    /// Sample standard deviation of the effect sizes (0 when K = 1).
    pub fn effect_sd(&self) -> f64 {
        let k = self.len();
        if k < 2 {
            return 0.0;
        }
        let mean = self.effects().sum::<f64>() / k as f64;
        let ss = self.effects().map(|y| (y - mean).powi(2)).sum::<f64>();
        (ss / (k - 1) as f64).sqrt()
    }
}

/// Build a record with the generic scale; convenient in tests and the
/// simulation harness where the scale is irrelevant.
pub fn record(label: impl Into<String>, team: impl Into<String>, y: f64, se: f64) -> EstimateRecord {
    EstimateRecord {
        label: label.into(),
        team: team.into(),
        y,
        se,
        scale_tag: ScaleTag::Generic { ui: 1.0 },
    }
}
