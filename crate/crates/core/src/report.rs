//! Analysis orchestration and the JSON report.

use serde::Serialize;
use serde_json::Value;

use crate::bootstrap::{bootstrap_fit, BootstrapPlan, Interval};
use crate::dataset::{summarize, CensusSummary, Dataset};
use crate::distributions::Family;
use crate::error::{Error, Result};
use crate::estimation::{compare_fits, fit_cvm, fit_mle, fit_moments, FitOptions, FitResult, Method};
use crate::hc::{hc_with_ci, HCEstimate, DEFAULT_HC_LEVELS};

pub const SCHEMA: &str = "ssdfit-report/1";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Significant digits of serialized numbers unless full precision is asked for.
pub const SIGNIFICANT_DIGITS: usize = 6;

#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    pub families: Vec<Family>,
    /// Maximum likelihood is always run; moments and CvM are added on request.
    pub methods: Vec<Method>,
    pub bootstrap: Option<BootstrapPlan>,
    pub hc_levels: Vec<f64>,
    pub fit: FitOptions,
    /// Include wall-clock bootstrap timings. Off by default so that reports
    /// are byte-identical across runs.
    pub record_elapsed: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            families: vec![Family::LogNormal],
            methods: vec![Method::Mle],
            bootstrap: None,
            hc_levels: DEFAULT_HC_LEVELS.to_vec(),
            fit: FitOptions::default(),
            record_elapsed: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitSummary {
    pub family: Family,
    pub method: Method,
    pub mu: f64,
    pub sigma: f64,
    pub log_lik: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankEntry {
    pub rank: usize,
    pub family: Family,
    pub method: Method,
    pub log_lik: f64,
    pub delta_log_lik: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HcRow {
    pub family: Family,
    pub method: Method,
    pub estimates: Vec<HCEstimate>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BootstrapSummary {
    pub family: Family,
    pub converged: bool,
    pub advisory: String,
    pub replicates: usize,
    pub failures: usize,
    pub batches: usize,
    pub worst_relative_fluctuation: f64,
    pub time_limit_reached: bool,
    pub mu_ci: Interval,
    pub sigma_ci: Interval,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_seconds: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub tool_version: &'static str,
    pub seed: Option<u64>,
    pub label: String,
    pub unit: String,
    pub census: CensusSummary,
    pub fits: Vec<FitSummary>,
    pub ranking: Vec<RankEntry>,
    pub hc_table: Vec<HcRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bootstrap: Option<Vec<BootstrapSummary>>,
    pub warnings: Vec<String>,
}

/// A report together with the fits it was built from.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub report: Report,
    pub fits: Vec<FitResult>,
}

fn run_fit(d: &Dataset, family: Family, method: Method, opts: &FitOptions) -> Result<FitResult> {
    match method {
        Method::Mle => fit_mle(d, family, opts),
        Method::Moments => fit_moments(d, family),
        Method::Cvm => fit_cvm(d, family),
    }
}

/// Run the requested fits, optional bootstrap and HC table.
pub fn build_report(d: &Dataset, opts: &AnalysisOptions) -> Result<Analysis> {
    if opts.families.is_empty() {
        return Err(Error::InvalidArgument("no distribution requested".into()));
    }
    let mut methods = vec![Method::Mle];
    for &m in &opts.methods {
        if !methods.contains(&m) {
            methods.push(m);
        }
    }
    let mut warnings = Vec::new();
    let mut fits = Vec::new();
    for &family in &opts.families {
        for &method in &methods {
            match run_fit(d, family, method, &opts.fit) {
                Ok(f) => {
                    warnings.extend(f.warnings.iter().map(|w| format!("{family}/{}: {w}", method.name())));
                    fits.push(f);
                }
                Err(e) => warnings.push(format!("{family}/{}: {e}", method.name())),
            }
        }
    }
    if fits.is_empty() {
        return Err(Error::NoFits(warnings.join("; ")));
    }

    let ranking = compare_fits(&fits)?;
    let top = fits[ranking.order[0]].log_lik;
    let ranking = ranking
        .order
        .iter()
        .enumerate()
        .map(|(i, &k)| RankEntry {
            rank: i + 1,
            family: fits[k].model.family,
            method: fits[k].method,
            log_lik: fits[k].log_lik,
            delta_log_lik: top - fits[k].log_lik,
        })
        .collect();

    let mut hc_table = Vec::new();
    let mut boot_summaries = Vec::new();
    for fit in &fits {
        let boot = match (&opts.bootstrap, fit.method) {
            (Some(plan), Method::Mle) => {
                match bootstrap_fit(d, fit.model.family, plan, &opts.hc_levels) {
                    Ok(b) => Some(b),
                    Err(e) => {
                        warnings.push(format!("{}/bootstrap: {e}", fit.model.family));
                        None
                    }
                }
            }
            _ => None,
        };
        let mut estimates = Vec::with_capacity(opts.hc_levels.len());
        for &p in &opts.hc_levels {
            let est = match &boot {
                Some(b) => hc_with_ci(b, &fit.model, p).or_else(|e| {
                    warnings.push(format!("{}/HC{p}: {e}", fit.model.family));
                    HCEstimate::point_only(&fit.model, p)
                })?,
                None => HCEstimate::point_only(&fit.model, p)?,
            };
            if let Some(w) = &est.warning {
                warnings.push(format!("{}/{}: {w}", fit.model.family, fit.method.name()));
            }
            estimates.push(est);
        }
        hc_table.push(HcRow {
            family: fit.model.family,
            method: fit.method,
            estimates,
        });
        if let Some(b) = boot {
            boot_summaries.push(BootstrapSummary {
                family: b.family,
                converged: b.converged,
                advisory: b.advisory.clone(),
                replicates: b.replicates,
                failures: b.failures,
                batches: b.batches,
                worst_relative_fluctuation: b.worst_relative_fluctuation,
                time_limit_reached: b.time_limit_reached,
                mu_ci: b.mu_ci(),
                sigma_ci: b.sigma_ci(),
                elapsed_seconds: opts.record_elapsed.then_some(b.elapsed),
            });
        }
    }

    let report = Report {
        schema: SCHEMA,
        tool_version: TOOL_VERSION,
        seed: opts.bootstrap.as_ref().map(|p| p.seed),
        label: d.label.clone(),
        unit: d.unit.clone(),
        census: summarize(d),
        fits: fits
            .iter()
            .map(|f| FitSummary {
                family: f.model.family,
                method: f.method,
                mu: f.model.mu,
                sigma: f.model.sigma,
                log_lik: f.log_lik,
                converged: f.converged,
                iterations: f.iterations,
            })
            .collect(),
        ranking,
        hc_table,
        bootstrap: opts.bootstrap.as_ref().map(|_| boot_summaries),
        warnings,
    };
    Ok(Analysis { report, fits })
}

/// Round to `digits` significant digits.
pub fn round_significant(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x)
        .parse()
        .expect("formatted float parses")
}

/// Format a number for CSV output.
pub fn format_number(x: f64, full_precision: bool) -> String {
    if full_precision {
        format!("{x}")
    } else {
        format!("{}", round_significant(x, SIGNIFICANT_DIGITS))
    }
}

fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            if let Some(r) = serde_json::Number::from_f64(round_significant(x, SIGNIFICANT_DIGITS)) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

impl Report {
    /// Pretty-printed JSON with a trailing newline.
    pub fn to_json(&self, full_precision: bool) -> Result<String> {
        let mut value = serde_json::to_value(self)?;
        if !full_precision {
            round_floats(&mut value);
        }
        let mut s = serde_json::to_string_pretty(&value)?;
        s.push('\n');
        Ok(s)
    }

    /// True when a bootstrap ran and at least one family failed to converge.
    pub fn bootstrap_unconverged(&self) -> bool {
        self.bootstrap
            .as_ref()
            .is_some_and(|b| b.is_empty() || b.iter().any(|s| !s.converged))
    }
}
