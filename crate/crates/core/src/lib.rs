//! Species sensitivity distributions fitted to censored toxicity data.
//!
//! Toxicity values may be exact, left-censored, right-censored or
//! interval-censored. Log-normal and log-logistic distributions are fitted
//! by maximum likelihood over all of them, hazardous concentrations HC_p
//! get percentile bootstrap intervals, and the Turnbull estimator gives the
//! matching nonparametric CDF. Moment matching and CDF regression are
//! available for exact-only data as points of comparison.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bootstrap;
pub mod dataset;
pub mod distributions;
pub mod error;
pub mod estimation;
pub mod hc;
pub mod optim;
pub mod plot;
pub mod report;
pub mod turnbull;

pub use bootstrap::{bootstrap_fit, check_convergence, resample, BootstrapPlan, BootstrapResult, Interval};
pub use dataset::{
    aggregate_species, parse_dataset, summarize, transform_to_non_censored, AggregationMode,
    CensorKind, CensusSummary, Dataset, Observation,
};
pub use distributions::{DistributionModel, Family};
pub use error::{Error, Result};
pub use estimation::{
    compare_fits, fit_cvm, fit_mle, fit_moments, hazen_positions, log_lik_censored, FitOptions,
    FitResult, Method, Ranking,
};
pub use hc::{hc_point, hc_with_ci, HCEstimate, DEFAULT_HC_LEVELS};
pub use plot::{render_plot_data, CurveTable};
pub use report::{build_report, AnalysisOptions, Report};
pub use turnbull::{turnbull_estimate, turnbull_intervals, TurnbullCurve, TurnbullOptions};
