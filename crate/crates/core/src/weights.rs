//! Fractional likelihood weights.
//!
//! The likelihood of estimate `k` is raised to the power `w_k` with all
//! weights summing to one, so the shared dataset enters the pooled-effect
//! likelihood at most once regardless of how many analyses were run on it.

use std::collections::HashMap;

use serde::Serialize;

use crate::estimates::{DataError, EstimateSet};

/// Normalization slack tolerated on input before a hard error.
const RENORMALIZE_TOL: f64 = 1e-6;
/// Absolute tolerance to which a constructed scheme sums to one.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

/// Fractional likelihood weights aligned with an [`EstimateSet`], each in
/// (0, 1], summing to one within [`WEIGHT_SUM_TOL`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightScheme {
    weights: Vec<f64>,
}

impl WeightScheme {
    /// Validate raw weights that are already meant to sum to one.
    ///
    /// A sum within 1e-6 of one is renormalized silently (text formats round
    /// trip with small slack); anything further off is rejected.
    pub fn new(weights: Vec<f64>) -> Result<Self, DataError> {
        if weights.is_empty() {
            return Err(DataError::EmptySet);
        }
        for (index, &value) in weights.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(DataError::NonPositiveWeight { index, value });
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > RENORMALIZE_TOL {
            return Err(DataError::WeightSumOutOfTolerance(sum));
        }
        let weights = if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            weights.iter().map(|w| w / sum).collect()
        } else {
            weights
        };
        Ok(Self { weights })
    }

    /// Equal weights `1/K`: each analysis contributes the same share.
    pub fn equal(k: usize) -> Result<Self, DataError> {
        if k == 0 {
            return Err(DataError::EmptySet);
        }
        Ok(Self {
            weights: vec![1.0 / k as f64; k],
        })
    }

    /// Each team gets an equal share, split evenly over its submissions:
    /// a record from a team with `m` submissions receives `1/(T * m)` where
    /// `T` is the number of distinct teams.
    pub fn team_split(set: &EstimateSet) -> Self {
        let mut per_team: HashMap<&str, usize> = HashMap::new();
        for rec in set.records() {
            *per_team.entry(rec.team.as_str()).or_insert(0) += 1;
        }
        let t = per_team.len() as f64;
        let weights = set
            .records()
            .iter()
            .map(|rec| 1.0 / (t * per_team[rec.team.as_str()] as f64))
            .collect();
        Self { weights }
    }

    /// Normalize arbitrary positive scores to weights `raw / sum(raw)`.
    pub fn from_raw(raw: &[f64]) -> Result<Self, DataError> {
        if raw.is_empty() {
            return Err(DataError::EmptySet);
        }
        for (index, &value) in raw.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(DataError::NonPositiveWeight { index, value });
            }
        }
        let sum: f64 = raw.iter().sum();
        Ok(Self {
            weights: raw.iter().map(|w| w / sum).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        false // length >= 1 by construction
    }

    pub fn values(&self) -> &[f64] {
        &self.weights
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimates::{record, EstimateSet};
    use proptest::prelude::*;

    #[test]
    fn equal_weights_basics() {
        assert_eq!(WeightScheme::equal(1).unwrap().values(), &[1.0]);
        assert_eq!(
            WeightScheme::equal(4).unwrap().values(),
            &[0.25, 0.25, 0.25, 0.25]
        );
        let w29 = WeightScheme::equal(29).unwrap();
        assert_eq!(w29.len(), 29);
        assert!(w29.values().iter().all(|&w| w == 1.0 / 29.0));
        assert!(matches!(WeightScheme::equal(0), Err(DataError::EmptySet)));
    }

    #[test]
    fn team_split_examples() {
        let two_teams = EstimateSet::new(vec![
            record("1", "A", 0.1, 0.1),
            record("2", "B", 0.2, 0.1),
        ])
        .unwrap();
        assert_eq!(WeightScheme::team_split(&two_teams).values(), &[0.5, 0.5]);

        let lopsided = EstimateSet::new(vec![
            record("1", "A", 0.1, 0.1),
            record("2", "A", 0.2, 0.1),
            record("3", "B", 0.3, 0.1),
        ])
        .unwrap();
        assert_eq!(
            WeightScheme::team_split(&lopsided).values(),
            &[0.25, 0.25, 0.5]
        );

        let single_team = EstimateSet::new(vec![
            record("1", "A", 0.1, 0.1),
            record("2", "A", 0.2, 0.1),
            record("3", "A", 0.3, 0.1),
        ])
        .unwrap();
        assert_eq!(
            WeightScheme::team_split(&single_team).values(),
            &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]
        );
    }

    #[test]
    fn team_split_matches_equal_weights_on_distinct_teams() {
        let set = EstimateSet::new(
            (0..7)
                .map(|i| record(format!("r{i}"), format!("t{i}"), 0.1, 0.2))
                .collect(),
        )
        .unwrap();
        assert_eq!(
            WeightScheme::team_split(&set).values(),
            WeightScheme::equal(7).unwrap().values()
        );
    }

    #[test]
    fn custom_weights_normalize() {
        assert_eq!(WeightScheme::from_raw(&[2.0, 2.0]).unwrap().values(), &[0.5, 0.5]);
        assert_eq!(
            WeightScheme::from_raw(&[1.0, 3.0]).unwrap().values(),
            &[0.25, 0.75]
        );
        assert!(matches!(
            WeightScheme::from_raw(&[1.0, 0.0]),
            Err(DataError::NonPositiveWeight { index: 1, .. })
        ));
    }

    #[test]
    fn renormalization_window() {
        // Slightly off sums are repaired, badly off sums are rejected.
        let repaired = WeightScheme::new(vec![0.5 + 3e-7, 0.5]).unwrap();
        assert!((repaired.values().iter().sum::<f64>() - 1.0).abs() <= WEIGHT_SUM_TOL);
        assert!(matches!(
            WeightScheme::new(vec![0.6, 0.6]),
            Err(DataError::WeightSumOutOfTolerance(_))
        ));
    }

    proptest! {
        #[test]
        fn weights_sum_to_one_and_stay_positive(raw in prop::collection::vec(1e-6..1e6f64, 1..40)) {
            let w = WeightScheme::from_raw(&raw).unwrap();
            let sum: f64 = w.values().iter().sum();
            prop_assert!((sum - 1.0).abs() <= WEIGHT_SUM_TOL);
            prop_assert!(w.values().iter().all(|&v| v > 0.0));
        }

        #[test]
        fn custom_weights_scale_invariant(
            raw in prop::collection::vec(1e-3..1e3f64, 1..20),
            scale in 1e-3..1e3f64,
        ) {
            let base = WeightScheme::from_raw(&raw).unwrap();
            let scaled_raw: Vec<f64> = raw.iter().map(|w| w * scale).collect();
            let scaled = WeightScheme::from_raw(&scaled_raw).unwrap();
            for (a, b) in base.values().iter().zip(scaled.values()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn equal_weights_agree_with_team_split(k in 1usize..50) {
            let set = EstimateSet::new(
                (0..k).map(|i| record(format!("r{i}"), format!("t{i}"), 0.0, 1.0)).collect(),
            ).unwrap();
            let split = WeightScheme::team_split(&set);
            let equal = WeightScheme::equal(k).unwrap();
            prop_assert_eq!(split.values(), equal.values());
        }
    }
}
