//! Log-normal and log-logistic distributions parameterized on the log scale.
//!
//! Both families share the same parameter surface: `ln X` has location `mu`
//! and scale `sigma`. For the log-normal `ln X ~ Normal(mu, sigma)`; for the
//! log-logistic `ln X ~ Logistic(mu, sigma)`, i.e. shape `1/sigma` and scale
//! `exp(mu)` in the usual form.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

/// ln(sqrt(2 pi))
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    LogNormal,
    LogLogistic,
}

impl Family {
    pub const ALL: [Family; 2] = [Family::LogNormal, Family::LogLogistic];

    pub fn name(self) -> &'static str {
        match self {
            Family::LogNormal => "lognormal",
            Family::LogLogistic => "loglogistic",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "lognormal" => Ok(Family::LogNormal),
            "loglogistic" => Ok(Family::LogLogistic),
            _ => Err(Error::InvalidArgument(format!("unknown distribution `{s}`"))),
        }
    }
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Standard normal quantile (Wichura, AS241 PPND16; relative accuracy about 1e-16).
#[allow(clippy::excessive_precision)]
pub fn normal_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q
            * (((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_812_8e4) * r
                + 6.726_577_092_700_870_1e4)
                * r
                + 4.592_195_393_154_987_1e4)
                * r
                + 1.373_169_376_550_946e4)
                * r
                + 1.971_590_950_306_551_3e3)
                * r
                + 1.331_416_678_917_843_8e2)
                * r
                + 3.387_132_872_796_366_5)
            / (((((((5.226_495_278_852_545_9e3 * r + 2.872_908_573_572_194_3e4) * r
                + 3.930_789_580_009_271e4)
                * r
                + 2.121_379_430_158_659_7e4)
                * r
                + 5.394_196_021_424_751e3)
                * r
                + 6.871_870_074_920_579e2)
                * r
                + 4.231_333_070_160_091e1)
                * r
                + 1.0);
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        (((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r
            + 2.417_807_251_774_506e-1)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_546)
            * r
            + 1.423_437_110_749_683_5)
            / (((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
                + 1.519_866_656_361_645_7e-2)
                * r
                + 1.481_039_764_274_800_7e-1)
                * r
                + 6.897_673_349_851e-1)
                * r
                + 1.676_384_830_183_803_8)
                * r
                + 2.053_191_626_637_759)
                * r
                + 1.0)
    } else {
        r -= 5.0;
        (((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_4e-2)
            * r
            + 2.965_605_718_285_048_7e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103)
            / (((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
                + 1.846_318_317_510_054_8e-5)
                * r
                + 7.868_691_311_456_133e-4)
                * r
                + 1.487_536_129_085_061_5e-2)
                * r
                + 1.369_298_809_227_358e-1)
                * r
                + 5.998_322_065_558_88e-1)
                * r
                + 1.0)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

fn logistic_cdf(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln of the standard logistic density.
fn logistic_log_density(z: f64) -> f64 {
    let a = z.abs();
    -a - 2.0 * (-a).exp().ln_1p()
}

/// A fitted or hypothesized species sensitivity distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistributionModel {
    pub family: Family,
    pub mu: f64,
    pub sigma: f64,
}

fn check_positive(x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "concentration must be positive and finite, got {x}"
        )))
    }
}

impl DistributionModel {
    pub fn new(family: Family, mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() {
            return Err(Error::InvalidArgument(format!("mu must be finite, got {mu}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma must be positive and finite, got {sigma}"
            )));
        }
        Ok(Self { family, mu, sigma })
    }

    pub fn log_normal(mu: f64, sigma: f64) -> Result<Self> {
        Self::new(Family::LogNormal, mu, sigma)
    }

    pub fn log_logistic(mu: f64, sigma: f64) -> Result<Self> {
        Self::new(Family::LogLogistic, mu, sigma)
    }

    /// Shape/scale form of the log-logistic: `(1/sigma, exp(mu))`.
    pub fn shape_scale(&self) -> (f64, f64) {
        (1.0 / self.sigma, self.mu.exp())
    }

    pub(crate) fn standardize(&self, log_x: f64) -> f64 {
        (log_x - self.mu) / self.sigma
    }

    /// CDF of the standardized log-scale variable.
    pub(crate) fn std_cdf(&self, z: f64) -> f64 {
        match self.family {
            Family::LogNormal => normal_cdf(z),
            Family::LogLogistic => logistic_cdf(z),
        }
    }

    /// Survival function of the standardized variable, accurate in the upper tail.
    pub(crate) fn std_sf(&self, z: f64) -> f64 {
        self.std_cdf(-z)
    }

    pub(crate) fn std_log_density(&self, z: f64) -> f64 {
        match self.family {
            Family::LogNormal => -0.5 * z * z - LN_SQRT_2PI,
            Family::LogLogistic => logistic_log_density(z),
        }
    }

    /// P(z_low < Z <= z_up), computed on whichever tail keeps precision.
    pub(crate) fn std_interval_prob(&self, z_low: f64, z_up: f64) -> f64 {
        if z_low > 0.0 {
            self.std_sf(z_low) - self.std_sf(z_up)
        } else {
            self.std_cdf(z_up) - self.std_cdf(z_low)
        }
    }

    /// CDF evaluated at a log-concentration.
    pub(crate) fn cdf_log(&self, log_x: f64) -> f64 {
        self.std_cdf(self.standardize(log_x))
    }

    /// Log-density of X evaluated at `ln x`.
    pub(crate) fn log_pdf_log(&self, log_x: f64) -> f64 {
        self.std_log_density(self.standardize(log_x)) - self.sigma.ln() - log_x
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        check_positive(x)?;
        Ok(self.cdf_log(x.ln()))
    }

    pub fn log_pdf(&self, x: f64) -> Result<f64> {
        check_positive(x)?;
        Ok(self.log_pdf_log(x.ln()))
    }

    /// Standardized deviate at probability `p`.
    pub(crate) fn std_quantile(&self, p: f64) -> f64 {
        match self.family {
            Family::LogNormal => normal_quantile(p),
            Family::LogLogistic => (p / (1.0 - p)).ln(),
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "probability must lie in (0, 1), got {p}"
            )));
        }
        Ok((self.mu + self.sigma * self.std_quantile(p)).exp())
    }

    /// Variance of `ln X`.
    pub fn log_variance(&self) -> f64 {
        match self.family {
            Family::LogNormal => self.sigma * self.sigma,
            Family::LogLogistic => {
                self.sigma * self.sigma * std::f64::consts::PI * std::f64::consts::PI / 3.0
            }
        }
    }
}
