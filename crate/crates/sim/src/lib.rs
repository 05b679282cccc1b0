//! Monte Carlo comparison of adjusted and standard random-effects
//! meta-analysis on estimates that share one dataset.
//!
//! Each repetition simulates one dataset (a linear regression with a single
//! standard-normal predictor), fits it once by OLS, and turns the slope
//! estimate into K "analyst" estimates: exact copies when the
//! between-analyst SD is zero, otherwise copies perturbed by
//! Normal(0, tau^2) deviations with standard errors scaled by
//! Uniform(0.75, 1.20) factors. Both meta-analytic methods then pool the K
//! estimates and the harness aggregates standard-error calibration,
//! rejection rates, bias, and RMSE with Monte Carlo standard errors.
//!
//! Repetitions are embarrassingly parallel. Every random draw comes from a
//! counter-based stream keyed by (seed, condition, repetition, stream tag),
//! and aggregation folds repetitions in index order, so reports are
//! bit-identical across runs and thread counts.

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use sdma_core::classical::{fit_sd_random, fit_standard_random, ClassicalFit};
use sdma_core::estimates::{record, EstimateSet};
use sdma_core::weights::WeightScheme;

/// Significance threshold used for rejection rates.
const ALPHA: f64 = 0.05;
const CONFIDENCE_LEVEL: f64 = 0.95;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("simulated predictor had zero variance in every resampling attempt")]
    DegenerateRegression,
    #[error("need at least two samples, got {0}")]
    TooFewSamples(usize),
}

/// One cell of the simulation design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimCondition {
    /// Number of analyst estimates per repetition.
    pub k: usize,
    /// True regression coefficient.
    pub beta: f64,
    /// Between-analyst SD.
    pub tau: f64,
    /// Observations per simulated dataset.
    pub n_obs: usize,
    pub n_reps: usize,
    pub seed: u64,
}

impl SimCondition {
    pub fn new(k: usize, beta: f64, tau: f64, n_obs: usize, n_reps: usize, seed: u64) -> Self {
        assert!(k >= 2 && n_obs >= 2 && n_reps >= 1);
        Self {
            k,
            beta,
            tau,
            n_obs,
            n_reps,
            seed,
        }
    }
}

/// The full factorial reference grid: K in {3, 10, 30, 100, 300} crossed
/// with beta in {0, 0.3} and tau in {0, 0.1}, 100 observations per dataset.
pub fn reference_grid(n_reps: usize, seed: u64) -> Vec<SimCondition> {
    let mut grid = Vec::new();
    for &tau in &[0.0, 0.1] {
        for &beta in &[0.0, 0.3] {
            for &k in &[3usize, 10, 30, 100, 300] {
                grid.push(SimCondition::new(k, beta, tau, 100, n_reps, seed));
            }
        }
    }
    grid
}

/// Aggregated performance of one method in one condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MethodSummary {
    /// Mean of the standard errors the method reported.
    pub avg_se: f64,
    pub mcse_avg_se: f64,
    /// SD of the pooled estimates across repetitions.
    pub emp_se: f64,
    pub mcse_emp_se: f64,
    /// Fraction of repetitions with p < 0.05.
    pub rejection_rate: f64,
    pub mcse_rejection_rate: f64,
    pub bias: f64,
    pub mcse_bias: f64,
    pub rmse: f64,
    pub mcse_rmse: f64,
}

/// Results for one condition: both methods side by side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub condition: SimCondition,
    pub adjusted: MethodSummary,
    pub unadjusted: MethodSummary,
    /// Repetitions that entered the summaries.
    pub n_used: usize,
    /// Repetitions dropped because either method failed to converge.
    pub n_failed: usize,
}

impl SimReport {
    /// (method name, summary) pairs, one table row each.
    pub fn method_rows(&self) -> [(&'static str, &MethodSummary); 2] {
        [("adjusted", &self.adjusted), ("unadjusted", &self.unadjusted)]
    }
}

/// Stream tags for the per-repetition RNG streams.
mod stream {
    pub const DATASET: u64 = 0;
    pub const DEVIATIONS: u64 = 1;
    pub const SE_FACTORS: u64 = 2;
}

fn condition_key(cond: &SimCondition) -> u64 {
    // FNV-1a fold over the condition parameters; stable across runs and
    // independent of the condition's position in any grid.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in [
        cond.k as u64,
        cond.beta.to_bits(),
        cond.tau.to_bits(),
        cond.n_obs as u64,
    ] {
        h ^= v;
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    h
}

fn stream_rng(seed: u64, condition: u64, rep: u64, tag: u64) -> ChaCha12Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&condition.to_le_bytes());
    key[16..24].copy_from_slice(&rep.to_le_bytes());
    key[24..32].copy_from_slice(&tag.to_le_bytes());
    ChaCha12Rng::from_seed(key)
}

/// OLS slope and its standard error for y on x with an intercept, using the
/// unbiased residual variance (n - 2 denominator).
fn ols_slope(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - x_mean) * (x - x_mean);
        sxy += (x - x_mean) * (y - y_mean);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let se = (rss / (n - 2.0) / sxx).sqrt();
    Some((slope, se))
}

/// Simulate one repetition: one dataset, one OLS fit, K analyst estimates.
///
/// With tau = 0 the OLS pair is replicated K times byte-identically. With
/// tau > 0 each estimate receives its own Normal(0, tau^2) deviation and a
/// Uniform(0.75, 1.20) standard-error factor.
pub fn generate_replication(cond: &SimCondition, rep_index: usize) -> Result<EstimateSet, SimError> {
    let ckey = condition_key(cond);
    let mut slope_se = None;
    for attempt in 0..64u64 {
        let mut rng = stream_rng(
            cond.seed,
            ckey,
            rep_index as u64,
            stream::DATASET + (attempt << 8),
        );
        let xs: Vec<f64> = (0..cond.n_obs).map(|_| rng.sample(StandardNormal)).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| {
                let eps: f64 = rng.sample(StandardNormal);
                cond.beta * x + eps
            })
            .collect();
        if let Some(pair) = ols_slope(&xs, &ys) {
            slope_se = Some(pair);
            break;
        }
    }
    let (slope, se) = slope_se.ok_or(SimError::DegenerateRegression)?;

    let records = if cond.tau == 0.0 {
        (0..cond.k)
            .map(|i| record(format!("r{i}"), format!("t{i}"), slope, se))
            .collect()
    } else {
        let mut dev_rng = stream_rng(cond.seed, ckey, rep_index as u64, stream::DEVIATIONS);
        let mut se_rng = stream_rng(cond.seed, ckey, rep_index as u64, stream::SE_FACTORS);
        (0..cond.k)
            .map(|i| {
                let delta: f64 = dev_rng.sample::<f64, _>(StandardNormal) * cond.tau;
                let factor: f64 = se_rng.random_range(0.75..1.20);
                record(format!("r{i}"), format!("t{i}"), slope + delta, se * factor)
            })
            .collect()
    };
    Ok(EstimateSet::new(records).expect("generated records are valid"))
}

struct RepOutcome {
    adjusted: ClassicalFit,
    unadjusted: ClassicalFit,
}

fn run_repetition(cond: &SimCondition, rep_index: usize) -> Option<RepOutcome> {
    let set = generate_replication(cond, rep_index).ok()?;
    let weights = WeightScheme::equal(cond.k).expect("k >= 2");
    let unadjusted = fit_standard_random(&set, CONFIDENCE_LEVEL).ok()?;
    let adjusted = fit_sd_random(&set, &weights, CONFIDENCE_LEVEL).ok()?;
    Some(RepOutcome {
        adjusted,
        unadjusted,
    })
}

/// Measure types with distinct Monte Carlo standard error estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureKind {
    /// Binary rejection indicators; MCSE = sqrt(p (1 - p) / n).
    RejectionRate,
    /// Plain means (bias, average SE); MCSE = sample SD / sqrt(n).
    MeanType,
    /// Root of the mean squared error over the samples (which are the
    /// estimation errors); delta-method MCSE.
    Rmse,
    /// SD of the samples; MCSE = sd / sqrt(2 (n - 1)).
    EmpiricalSd,
}

fn mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

fn sample_sd(samples: &[f64]) -> f64 {
    let m = mean(samples);
    let ss: f64 = samples.iter().map(|&s| (s - m) * (s - m)).sum();
    (ss / (samples.len() - 1) as f64).sqrt()
}

/// Monte Carlo standard error of a performance measure.
pub fn mcse(kind: MeasureKind, samples: &[f64]) -> Result<f64, SimError> {
    let n = samples.len();
    if n < 2 {
        return Err(SimError::TooFewSamples(n));
    }
    let nf = n as f64;
    Ok(match kind {
        MeasureKind::RejectionRate => {
            let p = mean(samples);
            (p * (1.0 - p) / nf).sqrt()
        }
        MeasureKind::MeanType => sample_sd(samples) / nf.sqrt(),
        MeasureKind::Rmse => {
            let squared: Vec<f64> = samples.iter().map(|&e| e * e).collect();
            let msq = mean(&squared);
            if msq == 0.0 {
                0.0
            } else {
                // rmse = sqrt(m); Var(m_hat) = Var(e^2)/n; d rmse/dm = 1/(2 rmse)
                sample_sd(&squared) / nf.sqrt() / (2.0 * msq.sqrt())
            }
        }
        MeasureKind::EmpiricalSd => sample_sd(samples) / (2.0 * (nf - 1.0)).sqrt(),
    })
}

fn summarize(fits: &[&ClassicalFit], beta: f64) -> MethodSummary {
    let mus: Vec<f64> = fits.iter().map(|f| f.mu_hat).collect();
    let ses: Vec<f64> = fits.iter().map(|f| f.se_mu).collect();
    let rejections: Vec<f64> = fits
        .iter()
        .map(|f| if f.p_mu < ALPHA { 1.0 } else { 0.0 })
        .collect();
    let errors: Vec<f64> = mus.iter().map(|&m| m - beta).collect();
    let msq = mean(&errors.iter().map(|&e| e * e).collect::<Vec<f64>>());
    MethodSummary {
        avg_se: mean(&ses),
        mcse_avg_se: mcse(MeasureKind::MeanType, &ses).expect("n >= 2"),
        emp_se: sample_sd(&mus),
        mcse_emp_se: mcse(MeasureKind::EmpiricalSd, &mus).expect("n >= 2"),
        rejection_rate: mean(&rejections),
        mcse_rejection_rate: mcse(MeasureKind::RejectionRate, &rejections).expect("n >= 2"),
        bias: mean(&errors),
        mcse_bias: mcse(MeasureKind::MeanType, &errors).expect("n >= 2"),
        rmse: msq.sqrt(),
        mcse_rmse: mcse(MeasureKind::Rmse, &errors).expect("n >= 2"),
    }
}

/// Run every repetition of one condition and aggregate both methods.
///
/// Repetitions where either method fails to converge are dropped and
/// counted in `n_failed`, never propagated as errors.
pub fn run_condition(cond: &SimCondition) -> SimReport {
    let outcomes: Vec<Option<RepOutcome>> = (0..cond.n_reps)
        .into_par_iter()
        .map(|rep| run_repetition(cond, rep))
        .collect();

    let used: Vec<&RepOutcome> = outcomes.iter().flatten().collect();
    let n_failed = cond.n_reps - used.len();
    let adjusted: Vec<&ClassicalFit> = used.iter().map(|o| &o.adjusted).collect();
    let unadjusted: Vec<&ClassicalFit> = used.iter().map(|o| &o.unadjusted).collect();

    SimReport {
        condition: *cond,
        adjusted: summarize(&adjusted, cond.beta),
        unadjusted: summarize(&unadjusted, cond.beta),
        n_used: used.len(),
        n_failed,
    }
}
