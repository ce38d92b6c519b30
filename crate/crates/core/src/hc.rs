//! Hazardous concentrations: the concentration below which a fraction `p`
//! of species is expected to be affected.

use serde::Serialize;

use crate::bootstrap::{percentile_ci, BootstrapResult};
use crate::distributions::DistributionModel;
use crate::error::{Error, Result};

/// Standard levels reported on the result page.
pub const DEFAULT_HC_LEVELS: [f64; 4] = [5.0, 10.0, 20.0, 50.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HCEstimate {
    /// Percentage in (0, 100).
    pub p: f64,
    pub point: f64,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub converged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl HCEstimate {
    pub fn point_only(m: &DistributionModel, p: f64) -> Result<Self> {
        Ok(Self {
            p,
            point: hc_point(m, p)?,
            ci_lower: None,
            ci_upper: None,
            converged: None,
            warning: None,
        })
    }
}

/// HC_p of a fitted model, `p` in percent.
pub fn hc_point(m: &DistributionModel, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 100.0) {
        return Err(Error::InvalidArgument(format!(
            "HC percentage must lie in (0, 100), got {p}"
        )));
    }
    m.quantile(p / 100.0)
}

/// Point estimate from `m` with the percentile interval of the bootstrap draws.
pub fn hc_with_ci(b: &BootstrapResult, m: &DistributionModel, p: f64) -> Result<HCEstimate> {
    let idx = b.hc_index(p).ok_or(Error::NotTracked(p))?;
    let ci = percentile_ci(&b.hc_draws[idx])?;
    if !(ci.width() > 0.0) {
        return Err(Error::DegenerateBootstrap(format!(
            "HC{p} draws are all identical"
        )));
    }
    let point = hc_point(m, p)?;
    let warning = (!ci.contains(point)).then(|| {
        format!("HC{p} point estimate {point} lies outside its bootstrap interval")
    });
    Ok(HCEstimate {
        p,
        point,
        ci_lower: Some(ci.lower),
        ci_upper: Some(ci.upper),
        converged: Some(b.converged),
        warning,
    })
}
