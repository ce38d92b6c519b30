//! Censored toxicity observations and the two-column text format.
//!
//! A file holds one observation per line. A single column is an exact value.
//! Two columns give the lower and upper bound, with `NA` marking a missing
//! bound: `x NA` is right-censored, `NA x` is left-censored, `a b` with
//! `a < b` is interval-censored and `a a` is exact.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};

const NA: &str = "NA";

/// How much is known about a single toxicity value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CensorKind {
    Exact,
    /// Only an upper bound is known.
    Left,
    /// Only a lower bound is known.
    Right,
    Interval,
}

/// One toxicity datum as a pair of optional bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    lower: Option<f64>,
    upper: Option<f64>,
}

fn check_bound(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::InvalidObservation(format!("non-finite bound {x}")));
    }
    if x <= 0.0 {
        return Err(Error::InvalidObservation(format!(
            "non-positive bound {x}"
        )));
    }
    Ok(x)
}

impl Observation {
    pub fn new(lower: Option<f64>, upper: Option<f64>) -> Result<Self> {
        let lower = lower.map(check_bound).transpose()?;
        let upper = upper.map(check_bound).transpose()?;
        match (lower, upper) {
            (None, None) => Err(Error::InvalidObservation(
                "both bounds are missing".into(),
            )),
            (Some(lo), Some(up)) if lo > up => Err(Error::InvalidObservation(format!(
                "lower bound {lo} exceeds upper bound {up}"
            ))),
            _ => Ok(Self { lower, upper }),
        }
    }

    pub fn exact(x: f64) -> Result<Self> {
        Self::new(Some(x), Some(x))
    }

    /// Value known to lie below `upper`.
    pub fn left_censored(upper: f64) -> Result<Self> {
        Self::new(None, Some(upper))
    }

    /// Value known to lie above `lower`.
    pub fn right_censored(lower: f64) -> Result<Self> {
        Self::new(Some(lower), None)
    }

    /// Value known to lie between the bounds; equal bounds give an exact value.
    pub fn interval(lower: f64, upper: f64) -> Result<Self> {
        Self::new(Some(lower), Some(upper))
    }

    pub fn lower(&self) -> Option<f64> {
        self.lower
    }

    pub fn upper(&self) -> Option<f64> {
        self.upper
    }

    pub fn kind(&self) -> CensorKind {
        match (self.lower, self.upper) {
            (Some(lo), Some(up)) if lo == up => CensorKind::Exact,
            (Some(_), Some(_)) => CensorKind::Interval,
            (Some(_), None) => CensorKind::Right,
            (None, Some(_)) => CensorKind::Left,
            (None, None) => unreachable!("validated on construction"),
        }
    }

    /// The exact value, if this observation is exact.
    pub fn value(&self) -> Option<f64> {
        match self.kind() {
            CensorKind::Exact => self.lower,
            _ => None,
        }
    }

    /// Multiply both bounds by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.lower.map(|x| x * c), self.upper.map(|x| x * c))
    }
}

/// A non-empty, ordered collection of observations for one toxicant.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    observations: Vec<Observation>,
    pub label: String,
    pub unit: String,
}

impl Dataset {
    pub fn new(observations: Vec<Observation>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Self {
            observations,
            label: String::new(),
            unit: String::new(),
        })
    }

    /// Dataset of exact values.
    pub fn from_exact(values: &[f64]) -> Result<Self> {
        let obs = values
            .iter()
            .map(|&x| Observation::exact(x))
            .collect::<Result<Vec<_>>>()?;
        Self::new(obs)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.unit = unit.into();
        self
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn is_all_exact(&self) -> bool {
        self.observations
            .iter()
            .all(|o| o.kind() == CensorKind::Exact)
    }

    /// Multiply every bound by `c > 0`, keeping metadata.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let obs = self
            .observations
            .iter()
            .map(|o| o.scaled(c))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            observations: obs,
            label: self.label.clone(),
            unit: self.unit.clone(),
        })
    }

    /// Every finite bound that appears in the data.
    pub fn finite_bounds(&self) -> impl Iterator<Item = f64> + '_ {
        self.observations
            .iter()
            .flat_map(|o| o.lower.into_iter().chain(o.upper))
    }

    /// Two tab-separated columns with `NA` for missing bounds. Non-empty
    /// label and unit are written as `# label:` / `# unit:` comment lines.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if !self.label.is_empty() {
            let _ = writeln!(out, "# label: {}", self.label);
        }
        if !self.unit.is_empty() {
            let _ = writeln!(out, "# unit: {}", self.unit);
        }
        for o in &self.observations {
            let field = |b: Option<f64>| b.map_or_else(|| NA.to_string(), |x| x.to_string());
            let _ = writeln!(out, "{}\t{}", field(o.lower), field(o.upper));
        }
        out
    }
}

/// Counts of observations by censoring kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CensusSummary {
    pub n_total: usize,
    pub n_exact: usize,
    pub n_left: usize,
    pub n_right: usize,
    pub n_interval: usize,
    pub fraction_censored: f64,
}

pub fn summarize(d: &Dataset) -> CensusSummary {
    let (mut exact, mut left, mut right, mut interval) = (0, 0, 0, 0);
    for o in d.observations() {
        match o.kind() {
            CensorKind::Exact => exact += 1,
            CensorKind::Left => left += 1,
            CensorKind::Right => right += 1,
            CensorKind::Interval => interval += 1,
        }
    }
    let n = d.len();
    CensusSummary {
        n_total: n,
        n_exact: exact,
        n_left: left,
        n_right: right,
        n_interval: interval,
        fraction_censored: (n - exact) as f64 / n as f64,
    }
}

enum Field {
    Na,
    Num(f64),
}

fn parse_field(tok: &str) -> Option<Field> {
    if tok == NA {
        return Some(Field::Na);
    }
    tok.parse::<f64>().ok().map(Field::Num)
}

fn split_fields(line: &str) -> Vec<&str> {
    line.split([',', '\t', ' '])
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .collect()
}

/// Parse the line-oriented dataset format.
///
/// Blank lines and `#` comments are skipped. The first data line is treated
/// as a header and skipped when its first token is neither a number nor `NA`.
pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let mut observations = Vec::new();
    let mut label = String::new();
    let mut unit = String::new();
    let mut columns: Option<usize> = None;
    let mut seen_data_line = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(v) = comment.strip_prefix("label:") {
                label = v.trim().to_string();
            } else if let Some(v) = comment.strip_prefix("unit:") {
                unit = v.trim().to_string();
            }
            continue;
        }
        let err = |message: String| Error::Parse {
            line: line_no,
            message,
        };

        let tokens = split_fields(line);
        if !seen_data_line {
            seen_data_line = true;
            if parse_field(tokens[0]).is_none() {
                continue;
            }
        }
        if tokens.len() > 2 {
            return Err(err(format!("expected 1 or 2 fields, found {}", tokens.len())));
        }
        match columns {
            None => columns = Some(tokens.len()),
            Some(c) if c != tokens.len() => {
                return Err(err(format!(
                    "mixed column counts: expected {c} field(s), found {}",
                    tokens.len()
                )))
            }
            _ => {}
        }

        let fields = tokens
            .iter()
            .map(|t| parse_field(t).ok_or_else(|| err(format!("unparseable token `{t}`"))))
            .collect::<Result<Vec<_>>>()?;
        let as_bound = |f: &Field| match f {
            Field::Na => None,
            Field::Num(x) => Some(*x),
        };
        let obs = match fields.as_slice() {
            [Field::Na] => return Err(err("single column cannot be NA".into())),
            [Field::Num(x)] => Observation::exact(*x),
            [lo, up] => Observation::new(as_bound(lo), as_bound(up)),
            _ => unreachable!(),
        }
        .map_err(|e| match e {
            Error::InvalidObservation(m) => err(m),
            other => other,
        })?;
        observations.push(obs);
    }

    let mut d = Dataset::new(observations)?;
    d.label = label;
    d.unit = unit;
    Ok(d)
}

/// How several values measured on one species are merged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregationMode {
    GeometricMean,
    Interval,
}

pub fn aggregate_species(values: &[f64], mode: AggregationMode) -> Result<Observation> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("no values to aggregate".into()));
    }
    if let Some(bad) = values.iter().find(|&&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidArgument(format!(
            "non-positive or non-finite value {bad}"
        )));
    }
    match mode {
        AggregationMode::GeometricMean => {
            if values.iter().all(|&v| v == values[0]) {
                return Observation::exact(values[0]);
            }
            let mean_log = values.iter().map(|v| v.ln()).sum::<f64>() / values.len() as f64;
            Observation::exact(mean_log.exp())
        }
        AggregationMode::Interval => {
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Observation::interval(lo, hi)
        }
    }
}

/// The customary non-censored rewrite: drop left/right-censored values and
/// replace each interval by its arithmetic midpoint.
pub fn transform_to_non_censored(d: &Dataset) -> Result<Dataset> {
    let mut kept = Vec::with_capacity(d.len());
    for o in d.observations() {
        match (o.kind(), o.lower, o.upper) {
            (CensorKind::Exact, _, _) => kept.push(*o),
            (CensorKind::Interval, Some(lo), Some(up)) => {
                kept.push(Observation::exact((lo + up) / 2.0)?)
            }
            _ => {}
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyTransform);
    }
    Ok(Dataset {
        observations: kept,
        label: d.label.clone(),
        unit: d.unit.clone(),
    })
}
