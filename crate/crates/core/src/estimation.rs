//! Censored log-likelihood and the three parameter estimators.
//!
//! The log-likelihood of a dataset is the sum of one term per observation:
//! the log-density for exact values, `ln F(up)` for left-censored,
//! `ln(1 - F(low))` for right-censored and `ln(F(up) - F(low))` for
//! interval-censored values. Maximum likelihood works for any mix of these;
//! moment matching and CDF regression only apply to exact data.

use std::f64::consts::PI;

use serde::Serialize;

use crate::dataset::{CensorKind, Dataset};
use crate::distributions::{DistributionModel, Family};
use crate::error::{Error, Result};
use crate::optim::{nelder_mead, SimplexOptions};

/// Fits outside these bounds are reported as divergent.
const MAX_ABS_MU: f64 = 50.0;
const MIN_SIGMA: f64 = 1e-8;
const MAX_SIGMA: f64 = 1e3;
/// The optimizer's feasible box on (mu, ln sigma), wider than the
/// divergence bounds so that a runaway fit is caught rather than clamped.
const SEARCH_MU: f64 = 1e3;
const SEARCH_LN_SIGMA: (f64, f64) = (-23.0, 9.3);

const RESTART_AGREEMENT: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mle,
    Moments,
    Cvm,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Mle => "mle",
            Method::Moments => "moments",
            Method::Cvm => "cvm",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "mle" => Ok(Method::Mle),
            "moments" => Ok(Method::Moments),
            "cvm" => Ok(Method::Cvm),
            _ => Err(Error::InvalidArgument(format!("unknown method `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub model: DistributionModel,
    pub log_lik: f64,
    pub method: Method,
    pub converged: bool,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Relative log-likelihood tolerance of the simplex stage.
    pub tol: f64,
    pub max_iter: usize,
    /// Re-run the simplex once from a small simplex around the first optimum.
    pub restart: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 500,
            restart: true,
        }
    }
}

impl FitOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Observation bounds on the log scale.
#[derive(Debug, Clone, Copy)]
enum LogObs {
    Exact(f64),
    Left(f64),
    Right(f64),
    Interval(f64, f64),
}

struct LogData(Vec<LogObs>);

impl LogData {
    fn new(d: &Dataset) -> Self {
        let obs = d
            .observations()
            .iter()
            .map(|o| match (o.kind(), o.lower(), o.upper()) {
                (CensorKind::Exact, Some(x), _) => LogObs::Exact(x.ln()),
                (CensorKind::Left, _, Some(u)) => LogObs::Left(u.ln()),
                (CensorKind::Right, Some(l), _) => LogObs::Right(l.ln()),
                (CensorKind::Interval, Some(l), Some(u)) => LogObs::Interval(l.ln(), u.ln()),
                _ => unreachable!("kind matches bounds"),
            })
            .collect();
        Self(obs)
    }

    fn log_lik(&self, m: &DistributionModel) -> f64 {
        let mut total = 0.0;
        for o in &self.0 {
            total += match *o {
                LogObs::Exact(y) => m.log_pdf_log(y),
                LogObs::Left(u) => m.std_cdf(m.standardize(u)).ln(),
                LogObs::Right(l) => m.std_sf(m.standardize(l)).ln(),
                LogObs::Interval(l, u) => m
                    .std_interval_prob(m.standardize(l), m.standardize(u))
                    .ln(),
            };
        }
        total
    }

    /// Gradient of the log-likelihood with respect to (mu, ln sigma).
    fn gradient(&self, m: &DistributionModel) -> [f64; 2] {
        let sigma = m.sigma;
        let mut g = [0.0; 2];
        for o in &self.0 {
            // d/dz of the term; dz/dmu = -1/sigma, dz/dln(sigma) = -z
            match *o {
                LogObs::Exact(y) => {
                    let z = m.standardize(y);
                    let score = log_density_slope(m.family, z);
                    g[0] -= score / sigma;
                    g[1] -= z * score + 1.0;
                }
                LogObs::Left(u) => {
                    let z = m.standardize(u);
                    let r = density_over_cdf(m, z);
                    g[0] -= r / sigma;
                    g[1] -= z * r;
                }
                LogObs::Right(l) => {
                    let z = m.standardize(l);
                    let r = density_over_cdf(m, -z);
                    g[0] += r / sigma;
                    g[1] += z * r;
                }
                LogObs::Interval(l, u) => {
                    let (zl, zu) = (m.standardize(l), m.standardize(u));
                    let p = m.std_interval_prob(zl, zu);
                    let (dl, du) = (
                        m.std_log_density(zl).exp(),
                        m.std_log_density(zu).exp(),
                    );
                    g[0] += (dl - du) / (sigma * p);
                    g[1] += (zl * dl - zu * du) / p;
                }
            }
        }
        g
    }

    /// A point imputation of each observation on the log scale.
    fn imputed(&self) -> Vec<f64> {
        self.0
            .iter()
            .map(|o| match *o {
                LogObs::Exact(y) => y,
                LogObs::Left(u) => u - std::f64::consts::LN_2,
                LogObs::Right(l) => l + std::f64::consts::LN_2,
                LogObs::Interval(l, u) => 0.5 * (l + u),
            })
            .collect()
    }
}

/// d/dz of the standardized log-density.
fn log_density_slope(family: Family, z: f64) -> f64 {
    match family {
        Family::LogNormal => -z,
        Family::LogLogistic => -(0.5 * z).tanh(),
    }
}

/// density(z) / cdf(z) of the standardized family.
fn density_over_cdf(m: &DistributionModel, z: f64) -> f64 {
    match m.family {
        Family::LogLogistic => m.std_sf(z),
        Family::LogNormal => {
            let r = m.std_log_density(z).exp() / m.std_cdf(z);
            if r.is_finite() {
                r
            } else {
                -z
            }
        }
    }
}

/// Log-likelihood of a possibly censored dataset. Returns `-inf` when a
/// censored observation has zero probability under `m`.
pub fn log_lik_censored(d: &Dataset, m: &DistributionModel) -> f64 {
    LogData::new(d).log_lik(m)
}

/// Gradient of [`log_lik_censored`] with respect to `(mu, ln sigma)`.
pub fn log_lik_gradient(d: &Dataset, m: &DistributionModel) -> [f64; 2] {
    LogData::new(d).gradient(m)
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn model_at(family: Family, theta: &[f64]) -> Option<DistributionModel> {
    if theta[0].abs() > SEARCH_MU
        || !(SEARCH_LN_SIGMA.0..=SEARCH_LN_SIGMA.1).contains(&theta[1])
    {
        return None;
    }
    DistributionModel::new(family, theta[0], theta[1].exp()).ok()
}

fn check_identifiable(d: &Dataset) -> Result<()> {
    if d.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "maximum likelihood needs at least 2 observations, got {}",
            d.len()
        )));
    }
    let kinds: Vec<CensorKind> = d.observations().iter().map(|o| o.kind()).collect();
    if kinds.iter().all(|&k| k == CensorKind::Right) {
        return Err(Error::NonIdentifiable(
            "every observation is right-censored".into(),
        ));
    }
    if kinds.iter().all(|&k| k == CensorKind::Left) {
        return Err(Error::NonIdentifiable(
            "every observation is left-censored".into(),
        ));
    }
    if d.is_all_exact() {
        let first = d.observations()[0].value();
        if d.observations().iter().all(|o| o.value() == first) {
            return Err(Error::Degenerate(
                "all exact values are identical; sigma would collapse to zero".into(),
            ));
        }
    }
    Ok(())
}

/// Newton iterations on the analytic gradient, started from a simplex
/// optimum. A simplex can only place the optimum to about the square root
/// of machine precision; the gradient root is located to full precision.
fn newton_polish(data: &LogData, family: Family, theta: [f64; 2]) -> ([f64; 2], usize) {
    const H: f64 = 1e-5;
    let ll = |t: &[f64; 2]| model_at(family, t).map_or(f64::NEG_INFINITY, |m| data.log_lik(&m));
    let grad = |t: &[f64; 2]| model_at(family, t).map(|m| data.gradient(&m));

    let mut theta = theta;
    let mut current = ll(&theta);
    let mut steps = 0;
    for _ in 0..20 {
        let Some(g) = grad(&theta) else { break };
        if !(g[0].is_finite() && g[1].is_finite()) || !current.is_finite() {
            break;
        }
        let mut hess = [[0.0; 2]; 2];
        for j in 0..2 {
            let mut up = theta;
            let mut down = theta;
            up[j] += H;
            down[j] -= H;
            let (Some(gu), Some(gd)) = (grad(&up), grad(&down)) else {
                return (theta, steps);
            };
            for i in 0..2 {
                hess[i][j] = (gu[i] - gd[i]) / (2.0 * H);
            }
        }
        let off = 0.5 * (hess[0][1] + hess[1][0]);
        let det = hess[0][0] * hess[1][1] - off * off;
        if !(hess[0][0] < 0.0 && det > 0.0) {
            break;
        }
        let step = [
            -(hess[1][1] * g[0] - off * g[1]) / det,
            -(-off * g[0] + hess[0][0] * g[1]) / det,
        ];
        let size = step[0].abs().max(step[1].abs());
        if !size.is_finite() || size > 0.1 {
            break;
        }
        let candidate = [theta[0] + step[0], theta[1] + step[1]];
        let value = ll(&candidate);
        if !(value >= current - 1e-12 * (1.0 + current.abs())) {
            break;
        }
        theta = candidate;
        current = value.max(current);
        steps += 1;
        if size < 1e-15 {
            break;
        }
    }
    (theta, steps)
}

/// Maximum-likelihood fit of `family` to a censored dataset.
pub fn fit_mle(d: &Dataset, family: Family, opts: &FitOptions) -> Result<FitResult> {
    opts.validate()?;
    check_identifiable(d)?;
    let data = LogData::new(d);

    let (mu0, sd0) = mean_sd(&data.imputed());
    let sd0 = if sd0 > 1e-8 && sd0.is_finite() { sd0 } else { 1.0 };
    let scale0 = match family {
        Family::LogNormal => sd0,
        Family::LogLogistic => sd0 * 3f64.sqrt() / PI,
    };

    let objective = |t: &[f64]| match model_at(family, t) {
        Some(m) => -data.log_lik(&m),
        None => f64::INFINITY,
    };
    let simplex_opts = SimplexOptions {
        ftol: opts.tol,
        xtol: 1e-7,
        max_iter: opts.max_iter,
    };

    let first = nelder_mead(
        objective,
        &[mu0, scale0.ln()],
        &[0.5 * scale0, 0.25],
        &simplex_opts,
    );
    let mut warnings = Vec::new();
    let mut iterations = first.iterations;
    let mut converged = first.converged;
    let mut best = first.clone();
    if !first.converged {
        warnings.push(format!(
            "simplex stopped at the iteration limit ({})",
            opts.max_iter
        ));
    }
    if opts.restart {
        let sigma1 = first.x[1].exp();
        let second = nelder_mead(
            objective,
            &first.x,
            &[0.05 * sigma1, 0.05],
            &simplex_opts,
        );
        iterations += second.iterations;
        let gap = (first.x[0] - second.x[0])
            .abs()
            .max((sigma1 - second.x[1].exp()).abs());
        if !second.converged {
            converged = false;
        } else if gap > RESTART_AGREEMENT {
            converged = false;
            warnings.push(format!(
                "restarted simplex disagrees with the first run by {gap:.3e}"
            ));
        }
        if second.f < best.f {
            best = second;
        }
    }

    let (theta, polish_steps) = newton_polish(&data, family, [best.x[0], best.x[1]]);
    iterations += polish_steps;
    let (mu, sigma) = (theta[0], theta[1].exp());
    if !(mu.abs() <= MAX_ABS_MU) || !(MIN_SIGMA..=MAX_SIGMA).contains(&sigma) {
        return Err(Error::Divergence(format!(
            "estimate left the admissible region (mu = {mu:.4e}, sigma = {sigma:.4e})"
        )));
    }
    let model = DistributionModel::new(family, mu, sigma)?;
    let log_lik = data.log_lik(&model);
    if !log_lik.is_finite() {
        return Err(Error::Divergence(format!(
            "log-likelihood is not finite at the estimate ({log_lik})"
        )));
    }
    Ok(FitResult {
        model,
        log_lik,
        method: Method::Mle,
        converged,
        iterations,
        warnings,
    })
}

fn exact_log_values(d: &Dataset, method: &'static str) -> Result<Vec<f64>> {
    d.observations()
        .iter()
        .map(|o| {
            o.value().map(f64::ln).ok_or_else(|| Error::MethodNotApplicable {
                method,
                reason: "the dataset contains censored observations".into(),
            })
        })
        .collect()
}

/// Moment matching on the log scale.
pub fn fit_moments(d: &Dataset, family: Family) -> Result<FitResult> {
    let logs = exact_log_values(d, "moments")?;
    if logs.len() < 2 {
        return Err(Error::InvalidArgument(
            "moment matching needs at least 2 observations".into(),
        ));
    }
    let (mu, sd) = mean_sd(&logs);
    if !(sd > 0.0) {
        return Err(Error::Degenerate("all values are identical".into()));
    }
    let sigma = match family {
        Family::LogNormal => sd,
        Family::LogLogistic => sd * 3f64.sqrt() / PI,
    };
    let model = DistributionModel::new(family, mu, sigma)?;
    Ok(FitResult {
        model,
        log_lik: log_lik_censored(d, &model),
        method: Method::Moments,
        converged: true,
        iterations: 0,
        warnings: Vec::new(),
    })
}

/// Hazen plotting positions `(i - 0.5) / n`.
pub fn hazen_positions(n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("no plotting positions for n = 0".into()));
    }
    Ok((1..=n).map(|i| (i as f64 - 0.5) / n as f64).collect())
}

/// Least-squares regression of the model CDF on Hazen plotting positions.
pub fn fit_cvm(d: &Dataset, family: Family) -> Result<FitResult> {
    let mut logs = exact_log_values(d, "cvm")?;
    logs.sort_by(f64::total_cmp);
    let mut distinct = logs.clone();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::Degenerate(format!(
            "CDF regression needs at least 3 distinct values, got {}",
            distinct.len()
        )));
    }
    let positions = hazen_positions(logs.len())?;
    let objective = |t: &[f64]| match model_at(family, t) {
        Some(m) => logs
            .iter()
            .zip(&positions)
            .map(|(&y, p)| (m.cdf_log(y) - p).powi(2))
            .sum(),
        None => f64::INFINITY,
    };

    let start = fit_moments(d, family)?.model;
    let opts = SimplexOptions {
        ftol: 1e-12,
        xtol: 1e-9,
        max_iter: 2000,
    };
    let first = nelder_mead(
        objective,
        &[start.mu, start.sigma.ln()],
        &[0.5 * start.sigma, 0.25],
        &opts,
    );
    let second = nelder_mead(
        objective,
        &first.x,
        &[0.05 * first.x[1].exp(), 0.05],
        &opts,
    );
    let best = if second.f < first.f { &second } else { &first };
    let model = DistributionModel::new(family, best.x[0], best.x[1].exp())?;
    if !(model.mu.abs() <= MAX_ABS_MU) || !(MIN_SIGMA..=MAX_SIGMA).contains(&model.sigma) {
        return Err(Error::Divergence(format!(
            "CDF regression left the admissible region (mu = {:.4e}, sigma = {:.4e})",
            model.mu, model.sigma
        )));
    }
    let mut warnings = Vec::new();
    if !(first.converged && second.converged) {
        warnings.push("CDF regression stopped at the iteration limit".to_string());
    }
    Ok(FitResult {
        model,
        log_lik: log_lik_censored(d, &model),
        method: Method::Cvm,
        converged: first.converged && second.converged,
        iterations: first.iterations + second.iterations,
        warnings,
    })
}

/// Fits ordered by decreasing log-likelihood.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ranking {
    /// Indices into the input list, best first.
    pub order: Vec<usize>,
    /// `logLik(best) - logLik(order[i + 1])` for every fit after the first.
    pub deltas: Vec<f64>,
}

const TIE: f64 = 1e-9;

/// Rank fits on the same data by log-likelihood. Values within 1e-9 are
/// ties, resolved in favour of the log-normal and then input order.
pub fn compare_fits(fits: &[FitResult]) -> Result<Ranking> {
    if fits.is_empty() {
        return Err(Error::InvalidArgument("no fits to compare".into()));
    }
    let beats = |a: usize, b: usize| -> bool {
        let (fa, fb) = (&fits[a], &fits[b]);
        if (fa.log_lik - fb.log_lik).abs() >= TIE {
            return fa.log_lik > fb.log_lik;
        }
        let rank = |f: &FitResult| (f.model.family != Family::LogNormal) as u8;
        (rank(fa), a) < (rank(fb), b)
    };
    let mut remaining: Vec<usize> = (0..fits.len()).collect();
    let mut order = Vec::with_capacity(fits.len());
    while !remaining.is_empty() {
        let mut pick = 0;
        for k in 1..remaining.len() {
            if beats(remaining[k], remaining[pick]) {
                pick = k;
            }
        }
        order.push(remaining.remove(pick));
    }
    let top = fits[order[0]].log_lik;
    let deltas = order[1..].iter().map(|&i| top - fits[i].log_lik).collect();
    Ok(Ranking { order, deltas })
}
