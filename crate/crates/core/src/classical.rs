//! Classical estimation for standard and single-dataset meta-analysis.
//!
//! The standard common-effect and random-effects fits pool with weights
//! `1/se_k^2` and `1/(se_k^2 + tau^2)`. The single-dataset (adjusted)
//! variants maximize the fractional likelihood `prod_k p(y_k | .)^{w_k}`,
//! which for normal likelihoods is ordinary inverse-variance pooling with
//! the sampling variances divided by the weights. The adjusted
//! random-effects fit is two-stage: the heterogeneity SD `tau` is estimated
//! by REML on the *unweighted* variances (every analysis carries unique
//! information about between-analyst spread), then the pooled effect is
//! estimated with variances `se_k^2 / w_k + tau^2` holding `tau` fixed
//! (analyses carry redundant information about the effect itself).

use serde::Serialize;
use thiserror::Error;

use crate::brent;
use crate::dist::{
    chi_squared_quantile, chi_squared_sf, std_normal_quantile, two_sided_p, LN_2PI,
};
use crate::estimates::EstimateSet;
use crate::weights::WeightScheme;

/// Convergence tolerance for the REML search, in tau^2.
const REML_TOL: f64 = 1e-10;
const REML_MAX_ITER: usize = 500;
/// Bisection tolerance for Q-profile bounds, in tau.
const Q_PROFILE_TOL: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum ClassicalError {
    #[error("operation requires at least {required} estimates, got {got}")]
    TooFewEstimates { required: usize, got: usize },
    #[error("weight scheme has {weights} entries but the estimate set has {estimates}")]
    WeightMismatch { weights: usize, estimates: usize },
    #[error("REML optimizer failed to converge within {0} iterations")]
    NonConvergence(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Common,
    Random,
}

/// Pooled estimate, uncertainty, and test statistics from one classical fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassicalFit {
    pub mu_hat: f64,
    pub se_mu: f64,
    pub ci_mu: (f64, f64),
    /// Wald statistic `mu_hat / se_mu`.
    pub z: f64,
    /// Two-sided p-value from the standard normal.
    pub p_mu: f64,
    /// Heterogeneity SD estimate; zero for common-effect fits.
    pub tau_hat: f64,
    /// Q-profile interval for tau; (0, 0) for common-effect fits.
    pub ci_tau: (f64, f64),
    /// Cochran's Q; zero for common-effect fits.
    pub q_stat: f64,
    /// Q-test p-value; one for common-effect fits.
    pub p_tau: f64,
    pub model_kind: ModelKind,
    /// True for single-dataset (fractional-weight) fits.
    pub adjusted: bool,
    /// Confidence level used for `ci_mu` and `ci_tau`.
    pub level: f64,
}

/// Outcome of the REML search for the heterogeneity variance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RemlResult {
    pub tau2_hat: f64,
    /// Optimizer status; values returned by [`reml_tau`] always converged,
    /// a failed search surfaces as [`ClassicalError::NonConvergence`].
    pub converged: bool,
    pub iterations: usize,
    /// Restricted log-likelihood at the optimum.
    pub loglik: f64,
}

fn inverse_variance_pool(ys: &[f64], vars: &[f64]) -> (f64, f64) {
    // Precisions are scaled by the smallest variance so that the K = 1 and
    // duplicated-estimate cases pool back to the input pair up to roundoff.
    let v_ref = vars.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut num = 0.0;
    let mut den = 0.0;
    for (&y, &v) in ys.iter().zip(vars) {
        let r = v_ref / v;
        num += y * r;
        den += r;
    }
    (num / den, (v_ref / den).sqrt())
}

fn wald_fit(
    mu_hat: f64,
    se_mu: f64,
    level: f64,
    model_kind: ModelKind,
    adjusted: bool,
) -> ClassicalFit {
    let z = mu_hat / se_mu;
    let q = std_normal_quantile(0.5 + 0.5 * level);
    ClassicalFit {
        mu_hat,
        se_mu,
        ci_mu: (mu_hat - q * se_mu, mu_hat + q * se_mu),
        z,
        p_mu: two_sided_p(z),
        tau_hat: 0.0,
        ci_tau: (0.0, 0.0),
        q_stat: 0.0,
        p_tau: 1.0,
        model_kind,
        adjusted,
        level,
    }
}

fn check_weights(set: &EstimateSet, w: &WeightScheme) -> Result<(), ClassicalError> {
    if w.len() != set.len() {
        return Err(ClassicalError::WeightMismatch {
            weights: w.len(),
            estimates: set.len(),
        });
    }
    Ok(())
}

fn require_k(set: &EstimateSet, required: usize) -> Result<(), ClassicalError> {
    if set.len() < required {
        return Err(ClassicalError::TooFewEstimates {
            required,
            got: set.len(),
        });
    }
    Ok(())
}

/// Standard common-effect fit: inverse-variance pooling with `1/se_k^2`.
pub fn fit_standard_common(set: &EstimateSet, level: f64) -> ClassicalFit {
    let ys: Vec<f64> = set.effects().collect();
    let vars: Vec<f64> = set.standard_errors().map(|se| se * se).collect();
    let (mu, se) = inverse_variance_pool(&ys, &vars);
    wald_fit(mu, se, level, ModelKind::Common, false)
}

/// Single-dataset common-effect fit: the same algebra with sampling
/// variances divided by the fractional weights.
pub fn fit_sd_common(
    set: &EstimateSet,
    w: &WeightScheme,
    level: f64,
) -> Result<ClassicalFit, ClassicalError> {
    check_weights(set, w)?;
    let ys: Vec<f64> = set.effects().collect();
    let vars: Vec<f64> = set
        .standard_errors()
        .zip(w.values())
        .map(|(se, &wk)| se * se / wk)
        .collect();
    let (mu, se) = inverse_variance_pool(&ys, &vars);
    Ok(wald_fit(mu, se, level, ModelKind::Common, true))
}

/// Restricted log-likelihood of `y_k ~ Normal(mu, se_k^2 + tau2)` with the
/// location profiled out.
pub fn restricted_loglik(set: &EstimateSet, tau2: f64) -> f64 {
    let k = set.len() as f64;
    let ys: Vec<f64> = set.effects().collect();
    let vars: Vec<f64> = set.standard_errors().map(|se| se * se + tau2).collect();
    let (mu, _) = inverse_variance_pool(&ys, &vars);
    let mut log_det = 0.0;
    let mut precision = 0.0;
    let mut quad = 0.0;
    for (&y, &v) in ys.iter().zip(&vars) {
        log_det += v.ln();
        precision += 1.0 / v;
        let r = y - mu;
        quad += r * r / v;
    }
    -0.5 * ((k - 1.0) * LN_2PI + log_det + precision.ln() + quad)
}

/// REML estimate of the heterogeneity variance tau^2.
///
/// Bounded maximization of the restricted log-likelihood over
/// `[0, tau2_max]` with `tau2_max = max(10 var(y), 10 max se_k^2)`. A
/// boundary optimum is legitimate and returned as exactly zero.
pub fn reml_tau(set: &EstimateSet) -> Result<RemlResult, ClassicalError> {
    require_k(set, 2)?;
    let var_y = set.effect_sd().powi(2);
    let max_se2 = set
        .standard_errors()
        .map(|se| se * se)
        .fold(0.0_f64, f64::max);
    let tau2_max = (10.0 * var_y).max(10.0 * max_se2);

    let result = brent::maximize(
        |tau2| restricted_loglik(set, tau2),
        0.0,
        tau2_max,
        REML_TOL,
        REML_MAX_ITER,
    );
    if !result.converged {
        return Err(ClassicalError::NonConvergence(REML_MAX_ITER));
    }

    // Brent never evaluates the endpoints; a monotone restricted likelihood
    // must resolve to the exact boundary value.
    let mut best = (result.x, result.fx);
    for boundary in [0.0, tau2_max] {
        let ll = restricted_loglik(set, boundary);
        if ll >= best.1 {
            best = (boundary, ll);
        }
    }
    Ok(RemlResult {
        tau2_hat: best.0,
        converged: true,
        iterations: result.iterations,
        loglik: best.1,
    })
}

/// Generalized Q statistic at a fixed tau.
fn q_generalized(set: &EstimateSet, tau: f64) -> f64 {
    let ys: Vec<f64> = set.effects().collect();
    let vars: Vec<f64> = set
        .standard_errors()
        .map(|se| se * se + tau * tau)
        .collect();
    let (mu, _) = inverse_variance_pool(&ys, &vars);
    ys.iter()
        .zip(&vars)
        .map(|(&y, &v)| (y - mu) * (y - mu) / v)
        .sum()
}

/// Q-profile confidence interval for tau.
///
/// Inverts the generalized Q statistic against chi-squared(K-1) quantiles;
/// `Q_gen` is decreasing in tau, so each bound is a one-sided bisection.
/// Bounds that would fall below zero truncate to zero; when `Q_gen(0)` is
/// already below the lower quantile the interval collapses to the point
/// (0, 0).
pub fn q_profile_ci(set: &EstimateSet, level: f64) -> Result<(f64, f64), ClassicalError> {
    require_k(set, 2)?;
    let df = (set.len() - 1) as f64;
    let alpha = 1.0 - level;
    let upper_quantile = chi_squared_quantile(df, 1.0 - alpha / 2.0);
    let lower_quantile = chi_squared_quantile(df, alpha / 2.0);
    let q0 = q_generalized(set, 0.0);

    let solve = |target: f64| -> f64 {
        // Expand until the decreasing Q_gen crosses the target, then bisect.
        let mut hi = set.effect_sd().max(set.standard_errors().fold(0.0, f64::max)).max(1.0);
        while q_generalized(set, hi) > target {
            hi *= 2.0;
            if hi > 1e12 {
                return hi;
            }
        }
        let mut lo = 0.0;
        while hi - lo > Q_PROFILE_TOL {
            let mid = 0.5 * (lo + hi);
            if q_generalized(set, mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };

    let lower = if q0 <= upper_quantile { 0.0 } else { solve(upper_quantile) };
    let upper = if q0 <= lower_quantile { 0.0 } else { solve(lower_quantile) };
    Ok((lower, upper))
}

/// Cochran's Q test of homogeneity: `Q = sum (y_k - mu_CE)^2 / se_k^2`
/// with the p-value from the upper chi-squared(K-1) tail.
pub fn q_test(set: &EstimateSet) -> Result<(f64, f64), ClassicalError> {
    require_k(set, 2)?;
    let q = q_generalized(set, 0.0);
    let p = chi_squared_sf((set.len() - 1) as f64, q);
    Ok((q, p))
}

fn random_effects_fit(
    set: &EstimateSet,
    weights: Option<&WeightScheme>,
    tau2: f64,
    level: f64,
) -> Result<ClassicalFit, ClassicalError> {
    require_k(set, 2)?;
    let ys: Vec<f64> = set.effects().collect();
    let vars: Vec<f64> = match weights {
        Some(w) => set
            .standard_errors()
            .zip(w.values())
            .map(|(se, &wk)| se * se / wk + tau2)
            .collect(),
        None => set.standard_errors().map(|se| se * se + tau2).collect(),
    };
    let (mu, se) = inverse_variance_pool(&ys, &vars);
    let mut fit = wald_fit(mu, se, level, ModelKind::Random, weights.is_some());
    fit.tau_hat = tau2.sqrt();
    fit.ci_tau = q_profile_ci(set, level)?;
    let (q_stat, p_tau) = q_test(set)?;
    fit.q_stat = q_stat;
    fit.p_tau = p_tau;
    Ok(fit)
}

/// Standard random-effects fit at an externally fixed tau^2.
pub fn fit_standard_random_at(
    set: &EstimateSet,
    tau2: f64,
    level: f64,
) -> Result<ClassicalFit, ClassicalError> {
    random_effects_fit(set, None, tau2, level)
}

/// Standard random-effects fit: REML tau^2, then pooling with weights
/// `1/(se_k^2 + tau2_hat)`.
pub fn fit_standard_random(set: &EstimateSet, level: f64) -> Result<ClassicalFit, ClassicalError> {
    let reml = reml_tau(set)?;
    fit_standard_random_at(set, reml.tau2_hat, level)
}

/// Single-dataset random-effects fit at an externally fixed tau^2
/// (stage 2 only: variances `se_k^2 / w_k + tau2`).
pub fn fit_sd_random_at(
    set: &EstimateSet,
    w: &WeightScheme,
    tau2: f64,
    level: f64,
) -> Result<ClassicalFit, ClassicalError> {
    check_weights(set, w)?;
    random_effects_fit(set, Some(w), tau2, level)
}

/// Single-dataset random-effects fit, both stages: REML tau^2 on the
/// unweighted variances, then fractional-weight pooling with tau^2 fixed.
pub fn fit_sd_random(
    set: &EstimateSet,
    w: &WeightScheme,
    level: f64,
) -> Result<ClassicalFit, ClassicalError> {
    check_weights(set, w)?;
    let reml = reml_tau(set)?;
    fit_sd_random_at(set, w, reml.tau2_hat, level)
}
