//! Single-dataset meta-analysis.
//!
//! Many-analysts and multiverse projects produce many effect-size estimates
//! that were all computed from one shared dataset. Pooling them with a
//! standard meta-analysis treats each estimate as new, independent data and
//! therefore understates the uncertainty of the pooled effect: the standard
//! error shrinks toward zero as analyses are added even though no new data
//! arrive. This crate implements the adjusted procedure in which the
//! likelihood of estimate `k` is raised to a fractional weight `w_k` (weights
//! summing to one) so that the shared dataset is counted at most once, next
//! to the standard (unadjusted) procedure used for comparison.
//!
//! Two engines share the same data model:
//!
//! * [`classical`] — inverse-variance pooling, REML heterogeneity
//!   estimation, Q-profile confidence intervals, and the two-stage
//!   fractional-weight fits (unweighted stage for the heterogeneity SD τ,
//!   weighted stage for the pooled effect μ).
//! * [`bayes`] — the Bayesian counterpart with unit-information priors,
//!   a τ posterior computed by one-dimensional quadrature, a point mass at
//!   the τ posterior median in the second stage, and Bayes factors for both
//!   the effect and the heterogeneity. No sampling is used anywhere; every
//!   posterior here is either conjugate normal or a smooth one-dimensional
//!   density.
//!
//! All operations are pure functions of their inputs and all data types are
//! immutable after construction, so values can be shared freely across
//! threads.

pub mod bayes;
pub mod classical;
pub mod dist;
pub mod estimates;
pub mod weights;

mod brent;

pub use bayes::{BayesError, BayesFit, MuPrior, PriorSpec, TauPosterior};
pub use classical::{ClassicalError, ClassicalFit, ModelKind, RemlResult};
pub use estimates::{DataError, EstimateRecord, EstimateSet, ScaleTag};
pub use weights::WeightScheme;
