//! Bayesian two-stage single-dataset meta-analysis.
//!
//! Every model here is normal with at most one non-conjugate scalar (the
//! heterogeneity SD `tau`), so nothing is sampled: the `tau` posterior is a
//! smooth one-dimensional density evaluated on a grid, and the pooled-effect
//! posterior given `tau` is conjugate normal in closed form.
//!
//! Stage 1 (random-effects only) estimates `tau` from the *unweighted*
//! likelihood with the effect marginalized under its alternative prior.
//! Stage 2 fixes `tau` at a point mass (the stage-1 posterior median) and
//! applies the fractionally weighted likelihood, i.e. effective variances
//! `se_k^2 / w_k + tau^2`, to estimate and test the pooled effect.
//!
//! Tempering lemma: raising a normal likelihood to the power `w` satisfies
//! `N(y; theta, se^2)^w = c(w, se) * N(y; theta, se^2 / w)` where
//! `c(w, se) = w^{-1/2} (2 pi se^2)^{(1-w)/2}` does not depend on the
//! parameters. This module implements the weighted likelihood as plain
//! variance inflation, dropping `c`. Every Bayes factor computed here
//! compares two models under *identical* weights, so the dropped constant
//! is common to numerator and denominator and cancels exactly. Absolute
//! marginal likelihoods from weighted fits are therefore meaningful only up
//! to that constant; ratios are exact.

use serde::Serialize;
use thiserror::Error;

use crate::classical::ModelKind;
use crate::dist::{half_normal_logpdf, half_normal_quantile, normal_logpdf, std_normal_quantile, LN_2PI};
use crate::estimates::{EstimateSet, ScaleTag};
use crate::weights::WeightScheme;

/// Initial number of grid points for the tau posterior.
const TAU_GRID_START: usize = 2048;
/// Maximum number of times the tau grid is doubled.
const TAU_GRID_MAX_DOUBLINGS: usize = 4;
/// A doubling must move the log marginal by less than this to accept.
const TAU_GRID_STABILITY_TOL: f64 = 1e-4;
/// Upper quantile of the half-normal prior covered by the grid.
const TAU_GRID_PRIOR_COVERAGE: f64 = 0.9999;

#[derive(Debug, Error, PartialEq)]
pub enum BayesError {
    #[error("operation requires at least {required} estimates, got {got}")]
    TooFewEstimates { required: usize, got: usize },
    #[error("weight scheme has {weights} entries but the estimate set has {estimates}")]
    WeightMismatch { weights: usize, estimates: usize },
    #[error("tau must be nonnegative, got {0}")]
    NegativeTau(f64),
    #[error("tau quadrature did not stabilize: doubling the grid still moves the log marginal by {delta:.3e}")]
    QuadratureNonConvergence { delta: f64 },
    #[error("no unit-information scale for this tag: {0}")]
    UnknownScale(String),
    #[error("the point null has no prior density under the alternative prior")]
    NullOutsideSupport,
}

/// Prior for the pooled effect used in a marginal likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuPrior {
    Normal { location: f64, sd: f64 },
    Point(f64),
}

/// Priors for the two-stage Bayesian fit.
///
/// The null hypotheses are fixed point masses at zero for both the effect
/// and the heterogeneity; the alternatives are `mu ~ Normal(location, sd)`
/// and `tau ~ HalfNormal(sd)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PriorSpec {
    pub mu_loc: f64,
    pub mu_sd: f64,
    pub tau_sd: f64,
    /// Optional stage-2 point mass for tau, overriding the stage-1
    /// posterior median.
    pub spike_tau: Option<f64>,
}

impl PriorSpec {
    pub fn new(mu_loc: f64, mu_sd: f64, tau_sd: f64) -> Result<Self, BayesError> {
        if !(mu_sd > 0.0 && mu_sd.is_finite() && tau_sd > 0.0 && tau_sd.is_finite()) {
            return Err(BayesError::UnknownScale(format!(
                "prior standard deviations must be positive and finite (mu_sd {mu_sd}, tau_sd {tau_sd})"
            )));
        }
        Ok(Self {
            mu_loc,
            mu_sd,
            tau_sd,
            spike_tau: None,
        })
    }

    /// Unit-information priors: `mu ~ Normal(0, UI)` and
    /// `tau ~ HalfNormal(UI / 2)`.
    ///
    /// The unit-information SD is 2 for log odds and log risk ratios, 2 for
    /// standardized mean differences (one observation per arm carries a
    /// sampling variance near 4), 0.87 for standardized regression
    /// coefficients, and user-supplied for the generic scale.
    pub fn unit_information(tag: &ScaleTag) -> Result<Self, BayesError> {
        let ui = match tag {
            ScaleTag::LogOr | ScaleTag::LogRr | ScaleTag::Smd => 2.0,
            ScaleTag::Beta => 0.87,
            ScaleTag::Generic { ui } => {
                if !(*ui > 0.0 && ui.is_finite()) {
                    return Err(BayesError::UnknownScale(format!(
                        "generic scale requires a positive finite unit information, got {ui}"
                    )));
                }
                *ui
            }
        };
        Self::new(0.0, ui, ui / 2.0)
    }

    pub fn with_spike_tau(mut self, tau: f64) -> Result<Self, BayesError> {
        if tau < 0.0 || tau.is_nan() {
            return Err(BayesError::NegativeTau(tau));
        }
        self.spike_tau = Some(tau);
        Ok(self)
    }

    pub fn mu_alt(&self) -> MuPrior {
        MuPrior::Normal {
            location: self.mu_loc,
            sd: self.mu_sd,
        }
    }
}

/// Posterior of the heterogeneity SD on a grid, with the marginal
/// likelihoods needed for the heterogeneity Bayes factor.
#[derive(Debug, Clone, Serialize)]
pub struct TauPosterior {
    pub grid: Vec<f64>,
    /// Density normalized to integrate to one over the grid (trapezoid).
    pub density: Vec<f64>,
    pub median: f64,
    /// 95% equal-tailed credible interval.
    pub cri: (f64, f64),
    /// log of `integral p(y | tau) p(tau) dtau` under the alternative.
    pub log_marginal_alt: f64,
    /// log of `p(y | tau = 0)`, the common-effect marginal.
    pub log_marginal_null: f64,
}

impl TauPosterior {
    /// `BF10` for random effects over common effect; may overflow to
    /// infinity for extreme evidence, use [`Self::log_bf_heterogeneity`]
    /// when that matters.
    pub fn bf_heterogeneity(&self) -> f64 {
        self.log_bf_heterogeneity().exp()
    }

    pub fn log_bf_heterogeneity(&self) -> f64 {
        self.log_marginal_alt - self.log_marginal_null
    }
}

/// Posterior summaries and Bayes factors from a two-stage Bayesian fit.
#[derive(Debug, Clone, Serialize)]
pub struct BayesFit {
    /// Posterior median of the pooled effect (equals the posterior mean;
    /// the stage-2 posterior is normal).
    pub mu_median: f64,
    /// Posterior standard deviation of the pooled effect.
    pub mu_sd: f64,
    /// 95% equal-tailed credible interval.
    pub mu_cri: (f64, f64),
    /// log Bayes factor for effect presence (never overflows; see
    /// [`Self::bf10_effect`]).
    pub log_bf10_effect: f64,
    /// Stage-1 posterior median of tau (zero for common-effect fits).
    pub tau_median: f64,
    pub tau_cri: (f64, f64),
    /// log Bayes factor for random over common effects (zero, i.e. BF = 1,
    /// for common-effect fits where heterogeneity is not assessed).
    pub log_bf10_heterogeneity: f64,
    /// The tau value fixed in stage 2.
    pub tau_star: f64,
    pub model_kind: ModelKind,
    /// True for single-dataset (fractional-weight) fits.
    pub adjusted: bool,
}

impl BayesFit {
    pub fn bf10_effect(&self) -> f64 {
        self.log_bf10_effect.exp()
    }

    pub fn bf01_effect(&self) -> f64 {
        (-self.log_bf10_effect).exp()
    }

    pub fn bf10_heterogeneity(&self) -> f64 {
        self.log_bf10_heterogeneity.exp()
    }

    pub fn bf01_heterogeneity(&self) -> f64 {
        (-self.log_bf10_heterogeneity).exp()
    }
}

fn check_weights(set: &EstimateSet, w: &WeightScheme) -> Result<(), BayesError> {
    if w.len() != set.len() {
        return Err(BayesError::WeightMismatch {
            weights: w.len(),
            estimates: set.len(),
        });
    }
    Ok(())
}

fn effective_variances(
    set: &EstimateSet,
    weights: Option<&WeightScheme>,
    tau: f64,
) -> Result<Vec<f64>, BayesError> {
    if tau < 0.0 || tau.is_nan() {
        return Err(BayesError::NegativeTau(tau));
    }
    if let Some(w) = weights {
        check_weights(set, w)?;
    }
    let tau2 = tau * tau;
    Ok(match weights {
        Some(w) => set
            .standard_errors()
            .zip(w.values())
            .map(|(se, &wk)| se * se / wk + tau2)
            .collect(),
        None => set.standard_errors().map(|se| se * se + tau2).collect(),
    })
}

/// Log marginal likelihood of the estimates at a fixed tau, with the pooled
/// effect either marginalized under a normal prior or held at a point.
///
/// Effective variances are `se_k^2 / w_k + tau^2` (weights of one when
/// `weights` is `None`). The normal-prior case is the density of `y` under
/// mean `location * 1` and covariance `diag(v) + sd^2 * 11'`, evaluated in
/// O(K) through the rank-one Woodbury and matrix-determinant identities.
pub fn marginal_loglik_given_tau(
    set: &EstimateSet,
    weights: Option<&WeightScheme>,
    tau: f64,
    mu_prior: &MuPrior,
) -> Result<f64, BayesError> {
    let vars = effective_variances(set, weights, tau)?;
    let ys: Vec<f64> = set.effects().collect();
    match *mu_prior {
        MuPrior::Point(point) => Ok(ys
            .iter()
            .zip(&vars)
            .map(|(&y, &v)| normal_logpdf(y, point, v.sqrt()))
            .sum()),
        MuPrior::Normal { location, sd } => {
            let s2 = sd * sd;
            let k = ys.len() as f64;
            let mut log_det = 0.0;
            let mut precision_sum = 0.0;
            let mut weighted_resid = 0.0;
            let mut quad_diag = 0.0;
            for (&y, &v) in ys.iter().zip(&vars) {
                let r = y - location;
                log_det += v.ln();
                precision_sum += 1.0 / v;
                weighted_resid += r / v;
                quad_diag += r * r / v;
            }
            let denom = 1.0 + s2 * precision_sum;
            let quad = quad_diag - s2 * weighted_resid * weighted_resid / denom;
            Ok(-0.5 * (k * LN_2PI + log_det + denom.ln() + quad))
        }
    }
}

/// Conjugate normal posterior `(mean, sd)` of the pooled effect at a fixed
/// tau under a `Normal(location, sd)` prior.
pub fn mu_posterior_given_tau(
    set: &EstimateSet,
    weights: Option<&WeightScheme>,
    tau: f64,
    prior_location: f64,
    prior_sd: f64,
) -> Result<(f64, f64), BayesError> {
    let vars = effective_variances(set, weights, tau)?;
    let prior_precision = 1.0 / (prior_sd * prior_sd);
    let mut precision = prior_precision;
    let mut weighted_sum = prior_location * prior_precision;
    for (y, v) in set.effects().zip(&vars) {
        precision += 1.0 / v;
        weighted_sum += y / v;
    }
    Ok((weighted_sum / precision, (1.0 / precision).sqrt()))
}

struct TauGrid {
    grid: Vec<f64>,
    log_density: Vec<f64>,
    log_marginal_alt: f64,
}

fn tau_grid_pass(set: &EstimateSet, priors: &PriorSpec, tau_hi: f64, n: usize) -> TauGrid {
    let h = tau_hi / (n - 1) as f64;
    let mu_alt = priors.mu_alt();
    let grid: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
    let log_density: Vec<f64> = grid
        .iter()
        .map(|&tau| {
            marginal_loglik_given_tau(set, None, tau, &mu_alt)
                .expect("tau >= 0 on the grid")
                + half_normal_logpdf(tau, priors.tau_sd)
        })
        .collect();

    // Trapezoid in log space: endpoint weights h/2, interior weights h.
    let peak = log_density.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (i, &ld) in log_density.iter().enumerate() {
        let w = if i == 0 || i == n - 1 { 0.5 * h } else { h };
        total += w * (ld - peak).exp();
    }
    TauGrid {
        grid,
        log_density,
        log_marginal_alt: peak + total.ln(),
    }
}

fn grid_quantile(grid: &[f64], cdf: &[f64], target: f64) -> f64 {
    let total = *cdf.last().unwrap();
    let t = target * total;
    let idx = cdf.partition_point(|&c| c < t);
    if idx == 0 {
        return grid[0];
    }
    if idx >= grid.len() {
        return *grid.last().unwrap();
    }
    let (c0, c1) = (cdf[idx - 1], cdf[idx]);
    let frac = if c1 > c0 { (t - c0) / (c1 - c0) } else { 0.5 };
    grid[idx - 1] + frac * (grid[idx] - grid[idx - 1])
}

/// Stage-1 posterior of the heterogeneity SD under the unweighted
/// likelihood, with the effect marginalized under its alternative prior.
///
/// The grid starts at 2048 points over `[0, tau_hi]` with
/// `tau_hi = max(half-normal 0.9999 quantile, 10 sd(y))` and doubles until
/// the log marginal moves by less than 1e-4 (at most four doublings).
pub fn tau_posterior(set: &EstimateSet, priors: &PriorSpec) -> Result<TauPosterior, BayesError> {
    if set.len() < 2 {
        return Err(BayesError::TooFewEstimates {
            required: 2,
            got: set.len(),
        });
    }
    let tau_hi = half_normal_quantile(TAU_GRID_PRIOR_COVERAGE, priors.tau_sd)
        .max(10.0 * set.effect_sd());

    let mut n = TAU_GRID_START;
    let mut pass = tau_grid_pass(set, priors, tau_hi, n);
    let mut delta = f64::INFINITY;
    for _ in 0..TAU_GRID_MAX_DOUBLINGS {
        n *= 2;
        let refined = tau_grid_pass(set, priors, tau_hi, n);
        delta = (refined.log_marginal_alt - pass.log_marginal_alt).abs();
        pass = refined;
        if delta < TAU_GRID_STABILITY_TOL {
            break;
        }
    }
    if delta >= TAU_GRID_STABILITY_TOL {
        return Err(BayesError::QuadratureNonConvergence { delta });
    }

    let TauGrid {
        grid,
        log_density,
        log_marginal_alt,
    } = pass;
    let h = grid[1] - grid[0];
    let peak = log_density.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = log_density.iter().map(|&ld| (ld - peak).exp()).collect();
    let mut cdf = Vec::with_capacity(raw.len());
    let mut acc = 0.0;
    cdf.push(0.0);
    for i in 1..raw.len() {
        acc += 0.5 * h * (raw[i - 1] + raw[i]);
        cdf.push(acc);
    }
    let total = *cdf.last().unwrap();
    let density: Vec<f64> = raw.iter().map(|&f| f / total).collect();

    let median = grid_quantile(&grid, &cdf, 0.5);
    let cri = (
        grid_quantile(&grid, &cdf, 0.025),
        grid_quantile(&grid, &cdf, 0.975),
    );
    let log_marginal_null = marginal_loglik_given_tau(set, None, 0.0, &priors.mu_alt())?;

    Ok(TauPosterior {
        grid,
        density,
        median,
        cri,
        log_marginal_alt,
        log_marginal_null,
    })
}

/// Bayes factor for the presence of between-analyst heterogeneity
/// (random effects over common effect), from the unweighted likelihood.
pub fn bf_heterogeneity(set: &EstimateSet, priors: &PriorSpec) -> Result<f64, BayesError> {
    Ok(tau_posterior(set, priors)?.bf_heterogeneity())
}

fn fit_bayes(
    set: &EstimateSet,
    weights: Option<&WeightScheme>,
    priors: &PriorSpec,
    model_kind: ModelKind,
) -> Result<BayesFit, BayesError> {
    if let Some(w) = weights {
        check_weights(set, w)?;
    }
    let (tau_star, tau_median, tau_cri, log_bf10_heterogeneity) = match model_kind {
        ModelKind::Common => (0.0, 0.0, (0.0, 0.0), 0.0),
        ModelKind::Random => {
            let stage1 = tau_posterior(set, priors)?;
            let tau_star = match priors.spike_tau {
                Some(spike) => spike,
                None => stage1.median,
            };
            (
                tau_star,
                stage1.median,
                stage1.cri,
                stage1.log_bf_heterogeneity(),
            )
        }
    };

    let (mean, sd) = mu_posterior_given_tau(set, weights, tau_star, priors.mu_loc, priors.mu_sd)?;
    let z = std_normal_quantile(0.975);
    let log_alt = marginal_loglik_given_tau(set, weights, tau_star, &priors.mu_alt())?;
    let log_null = marginal_loglik_given_tau(set, weights, tau_star, &MuPrior::Point(0.0))?;

    Ok(BayesFit {
        mu_median: mean,
        mu_sd: sd,
        mu_cri: (mean - z * sd, mean + z * sd),
        log_bf10_effect: log_alt - log_null,
        tau_median,
        tau_cri,
        log_bf10_heterogeneity,
        tau_star,
        model_kind,
        adjusted: weights.is_some(),
    })
}

/// Two-stage single-dataset Bayesian fit with fractional weights.
pub fn fit_bayes_sd(
    set: &EstimateSet,
    w: &WeightScheme,
    priors: &PriorSpec,
    model_kind: ModelKind,
) -> Result<BayesFit, BayesError> {
    fit_bayes(set, Some(w), priors, model_kind)
}

/// Standard (unadjusted) Bayesian fit: the same two-stage procedure with
/// every weight equal to one, for side-by-side comparison.
pub fn fit_bayes_standard(
    set: &EstimateSet,
    priors: &PriorSpec,
    model_kind: ModelKind,
) -> Result<BayesFit, BayesError> {
    fit_bayes(set, None, priors, model_kind)
}

/// Bayes factor for the effect via the Savage-Dickey density ratio: prior
/// over posterior density of the pooled effect at zero, both normal in
/// closed form. Equals the marginal-likelihood-ratio Bayes factor for these
/// conjugate models; kept as an independent cross-check route.
pub fn bf_effect_savage_dickey(
    set: &EstimateSet,
    weights: Option<&WeightScheme>,
    priors: &PriorSpec,
    tau_star: f64,
) -> Result<f64, BayesError> {
    let log_prior_at_zero = normal_logpdf(0.0, priors.mu_loc, priors.mu_sd);
    if !log_prior_at_zero.is_finite() {
        return Err(BayesError::NullOutsideSupport);
    }
    let (mean, sd) = mu_posterior_given_tau(set, weights, tau_star, priors.mu_loc, priors.mu_sd)?;
    let log_posterior_at_zero = normal_logpdf(0.0, mean, sd);
    Ok((log_prior_at_zero - log_posterior_at_zero).exp())
}
