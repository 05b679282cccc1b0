//! Analysis orchestration and the report data model.
//!
//! Every report carries both the adjusted (single-dataset) and the standard
//! fit for the requested frameworks, with the adjusted fit marked primary:
//! the side-by-side contrast is the point of the method. Internal values
//! stay additive; ratio scales are back-transformed only for display.

use serde::Serialize;

use sdma_core::bayes::{fit_bayes_sd, fit_bayes_standard, BayesFit, PriorSpec};
use sdma_core::classical::{
    fit_sd_common, fit_sd_random, fit_standard_common, fit_standard_random, ClassicalFit,
};
use sdma_core::{EstimateRecord, ModelKind, WeightScheme};

use crate::config::{AnalysisConfig, WeightSource};
use crate::ingest::{read_weights_file, IngestedData};
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    /// SHA-256 of the raw input file bytes.
    pub input_digest: String,
    pub input_path: String,
}

/// Adjusted and standard fits side by side; the adjusted fit is primary.
#[derive(Debug, Clone, Serialize)]
pub struct FitPair<T> {
    pub adjusted: T,
    pub standard: T,
}

/// Bayesian fit with the Bayes factors also materialized on the natural
/// scale where finite (JSON carries no infinities; the log fields inside
/// the fit never overflow).
#[derive(Debug, Clone, Serialize)]
pub struct BayesReportFit {
    #[serde(flatten)]
    pub fit: BayesFit,
    pub bf10_effect: Option<f64>,
    pub bf01_effect: Option<f64>,
    pub bf10_heterogeneity: Option<f64>,
    pub bf01_heterogeneity: Option<f64>,
}

impl From<BayesFit> for BayesReportFit {
    fn from(fit: BayesFit) -> Self {
        let finite = |x: f64| if x.is_finite() { Some(x) } else { None };
        Self {
            bf10_effect: finite(fit.bf10_effect()),
            bf01_effect: finite(fit.bf01_effect()),
            bf10_heterogeneity: finite(fit.bf10_heterogeneity()),
            bf01_heterogeneity: finite(fit.bf01_heterogeneity()),
            fit,
        }
    }
}

/// Pooled results on the display scale (exp back-transform for ratio
/// scales, identity otherwise).
#[derive(Debug, Clone, Serialize)]
pub struct DisplayRow {
    pub framework: &'static str,
    pub fit: &'static str,
    pub mu: f64,
    pub ci: (f64, f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub provenance: Provenance,
    /// The adjusted fits are the primary result; standard fits are the
    /// unadjusted comparison.
    pub primary_fit: &'static str,
    pub config: AnalysisConfig,
    pub estimates: Vec<EstimateRecord>,
    pub weights: Vec<f64>,
    pub classical: Option<FitPair<ClassicalFit>>,
    pub bayesian: Option<FitPair<BayesReportFit>>,
    pub display: Vec<DisplayRow>,
    /// True when display values are exp back-transforms of the internal
    /// additive values.
    pub ratio_display: bool,
}

/// Resolve the weight scheme from the configured source.
pub fn resolve_weights(
    config: &AnalysisConfig,
    data: &IngestedData,
) -> Result<WeightScheme, CliError> {
    let k = data.set.len();
    let scheme = match &config.weights {
        WeightSource::Equal => WeightScheme::equal(k)?,
        WeightSource::TeamSplit => WeightScheme::team_split(&data.set),
        WeightSource::File(path) => {
            let raw = read_weights_file(path)?;
            if raw.len() != k {
                return Err(CliError::Config(format!(
                    "weights file has {} entries but the input has {k} estimates",
                    raw.len()
                )));
            }
            WeightScheme::from_raw(&raw)?
        }
        WeightSource::Auto => match &data.csv_weights {
            Some(raw) => WeightScheme::from_raw(raw)?,
            None => WeightScheme::equal(k)?,
        },
    };
    Ok(scheme)
}

/// Run the configured fits and assemble the report.
pub fn run_analysis(
    config: &AnalysisConfig,
    data: &IngestedData,
    provenance: Provenance,
) -> Result<Report, CliError> {
    config.validate()?;
    let set = &data.set;
    let weights = resolve_weights(config, data)?;

    let classical = if config.framework.classical() {
        let (adjusted, standard) = match config.model_kind {
            ModelKind::Common => (
                fit_sd_common(set, &weights, config.level)?,
                fit_standard_common(set, config.level),
            ),
            ModelKind::Random => (
                fit_sd_random(set, &weights, config.level)?,
                fit_standard_random(set, config.level)?,
            ),
        };
        Some(FitPair { adjusted, standard })
    } else {
        None
    };

    let bayesian = if config.framework.bayes() {
        let priors = PriorSpec::unit_information(&config.scale)?;
        let adjusted = fit_bayes_sd(set, &weights, &priors, config.model_kind)?;
        let standard = fit_bayes_standard(set, &priors, config.model_kind)?;
        Some(FitPair::<BayesReportFit> {
            adjusted: adjusted.into(),
            standard: standard.into(),
        })
    } else {
        None
    };

    let ratio_display = config.scale.is_ratio_scale();
    let back = |x: f64| if ratio_display { x.exp() } else { x };
    let mut display = Vec::new();
    if let Some(pair) = &classical {
        for (fit_name, fit) in [("adjusted", &pair.adjusted), ("standard", &pair.standard)] {
            display.push(DisplayRow {
                framework: "classical",
                fit: fit_name,
                mu: back(fit.mu_hat),
                ci: (back(fit.ci_mu.0), back(fit.ci_mu.1)),
            });
        }
    }
    if let Some(pair) = &bayesian {
        for (fit_name, fit) in [("adjusted", &pair.adjusted), ("standard", &pair.standard)] {
            display.push(DisplayRow {
                framework: "bayesian",
                fit: fit_name,
                mu: back(fit.fit.mu_median),
                ci: (back(fit.fit.mu_cri.0), back(fit.fit.mu_cri.1)),
            });
        }
    }

    Ok(Report {
        provenance,
        primary_fit: "adjusted",
        config: config.clone(),
        estimates: set.records().to_vec(),
        weights: weights.values().to_vec(),
        classical,
        bayesian,
        display,
        ratio_display,
    })
}

fn format_p(p: f64) -> String {
    if p < 0.0001 {
        "p < 0.0001".to_string()
    } else {
        format!("p = {p:.4}")
    }
}

fn format_bf(log_bf10: f64) -> String {
    let bf10 = log_bf10.exp();
    if !bf10.is_finite() || bf10 >= 1e6 {
        format!("log BF10 = {log_bf10:.1}")
    } else if bf10 >= 1.0 {
        format!("BF10 = {bf10:.2}")
    } else {
        format!("BF01 = {:.2}", (-log_bf10).exp())
    }
}

/// Human-readable summary mirroring the usual reporting templates
/// (estimate [interval]; test statistic).
pub fn render_text(report: &Report) -> String {
    let mut out = String::new();
    let scale_note = if report.ratio_display {
        " (ratio scale)"
    } else {
        ""
    };
    let model = match report.config.model_kind {
        ModelKind::Common => "common-effect",
        ModelKind::Random => "random-effects",
    };
    let level_pct = report.config.level * 100.0;
    out.push_str(&format!(
        "Single-dataset {model} meta-analysis of {} estimates\n",
        report.estimates.len()
    ));

    let back = |x: f64| if report.ratio_display { x.exp() } else { x };
    if let Some(pair) = &report.classical {
        out.push_str("\nClassical:\n");
        for (name, fit) in [
            ("adjusted (primary)", &pair.adjusted),
            ("standard (comparison)", &pair.standard),
        ] {
            out.push_str(&format!(
                "  {name:<22} mu{scale_note} = {:.2} ({level_pct:.0}% CI {:.2} to {:.2}; {})\n",
                back(fit.mu_hat),
                back(fit.ci_mu.0),
                back(fit.ci_mu.1),
                format_p(fit.p_mu),
            ));
        }
        let fit = &pair.adjusted;
        if fit.model_kind == ModelKind::Random {
            out.push_str(&format!(
                "  {:<22} tau = {:.2} ({level_pct:.0}% CI {:.2} to {:.2}; Q = {:.2}, {})\n",
                "heterogeneity",
                fit.tau_hat,
                fit.ci_tau.0,
                fit.ci_tau.1,
                fit.q_stat,
                format_p(fit.p_tau),
            ));
        }
    }

    if let Some(pair) = &report.bayesian {
        out.push_str("\nBayesian:\n");
        for (name, fit) in [
            ("adjusted (primary)", &pair.adjusted.fit),
            ("standard (comparison)", &pair.standard.fit),
        ] {
            out.push_str(&format!(
                "  {name:<22} mu{scale_note} median = {:.2} (95% CrI {:.2} to {:.2}; {})\n",
                back(fit.mu_median),
                back(fit.mu_cri.0),
                back(fit.mu_cri.1),
                format_bf(fit.log_bf10_effect),
            ));
        }
        let fit = &pair.adjusted.fit;
        if fit.model_kind == ModelKind::Random {
            out.push_str(&format!(
                "  {:<22} tau median = {:.2} (95% CrI {:.2} to {:.2}; {})\n",
                "heterogeneity",
                fit.tau_median,
                fit.tau_cri.0,
                fit.tau_cri.1,
                format_bf(fit.log_bf10_heterogeneity),
            ));
        }
    }
    out
}
