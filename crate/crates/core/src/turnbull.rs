//! Nonparametric maximum-likelihood CDF for arbitrarily censored data.
//!
//! Observations become intervals on the concentration axis: an exact value
//! `x` is `[x, x]`, an interval `(a, b]`, a left-censored value `(0, u]` and a
//! right-censored value `(l, +inf)`. Mass can only sit on the innermost
//! intersections of these intervals (Turnbull's equivalence classes); the
//! self-consistency EM iteration then distributes it.

use std::cmp::Ordering;

use serde::Serialize;

use crate::dataset::{CensorKind, Dataset};
use crate::error::{Error, Result};

/// A position on the concentration axis, optionally nudged just below or
/// just above the value to encode open endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Key {
    value: f64,
    /// -1: just below `value`, 0: at `value`, +1: just above `value`.
    nudge: i8,
}

impl Key {
    fn cmp(&self, other: &Key) -> Ordering {
        self.value
            .total_cmp(&other.value)
            .then(self.nudge.cmp(&other.nudge))
    }
}

/// The support set of one observation: everything from `start` to `end`
/// inclusive, in key order.
#[derive(Debug, Clone, Copy)]
struct Span {
    start: Key,
    end: Key,
}

impl Span {
    fn of(o: &crate::dataset::Observation) -> Self {
        let at = |value| Key { value, nudge: 0 };
        let above = |value| Key { value, nudge: 1 };
        match (o.kind(), o.lower(), o.upper()) {
            (CensorKind::Exact, Some(x), _) => Span { start: at(x), end: at(x) },
            (CensorKind::Interval, Some(a), Some(b)) => Span { start: above(a), end: at(b) },
            (CensorKind::Left, _, Some(u)) => Span { start: above(0.0), end: at(u) },
            (CensorKind::Right, Some(l), _) => Span {
                start: above(l),
                end: Key { value: f64::INFINITY, nudge: -1 },
            },
            _ => unreachable!("kind matches bounds"),
        }
    }

    fn covers(&self, class: &Span) -> bool {
        self.start.cmp(&class.start) != Ordering::Greater
            && class.end.cmp(&self.end) != Ordering::Greater
    }
}

/// One equivalence class where the estimator may place mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupportInterval {
    pub lower: f64,
    pub upper: f64,
    pub lower_closed: bool,
    pub upper_closed: bool,
}

impl SupportInterval {
    fn from_span(s: &Span) -> Self {
        Self {
            lower: s.start.value,
            upper: s.end.value,
            lower_closed: s.start.nudge <= 0,
            upper_closed: s.end.nudge >= 0,
        }
    }

    pub fn is_point(&self) -> bool {
        self.lower == self.upper
    }
}

/// Stepwise nonparametric CDF over the finite equivalence classes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TurnbullCurve {
    pub intervals: Vec<SupportInterval>,
    pub masses: Vec<f64>,
    pub cumulative: Vec<f64>,
    /// Mass on the unbounded class above the largest right-censored bound;
    /// the curve ends at `1 - deficit`.
    pub deficit: f64,
    pub iterations: usize,
}

impl TurnbullCurve {
    /// CDF value under the flat-within-class convention: a class contributes
    /// its mass from its lower endpoint onwards.
    pub fn cdf_at(&self, x: f64) -> f64 {
        let mut value = 0.0;
        for (iv, &cum) in self.intervals.iter().zip(&self.cumulative) {
            let reached = if iv.lower_closed { x >= iv.lower } else { x > iv.lower };
            if reached {
                value = cum;
            } else {
                break;
            }
        }
        value
    }
}

/// Maximal intersections of the observation intervals, in increasing order.
/// The unbounded class `(l, +inf)` is included when it exists.
pub fn turnbull_intervals(d: &Dataset) -> Vec<SupportInterval> {
    classes(&spans(d)).iter().map(SupportInterval::from_span).collect()
}

fn spans(d: &Dataset) -> Vec<Span> {
    d.observations().iter().map(Span::of).collect()
}

fn classes(spans: &[Span]) -> Vec<Span> {
    // (key, is_end); at equal keys starts sort before ends so that a closed
    // point [x, x] forms a class
    let mut marks: Vec<(Key, bool)> = spans
        .iter()
        .flat_map(|s| [(s.start, false), (s.end, true)])
        .collect();
    marks.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
    marks.dedup_by(|a, b| a.1 == b.1 && a.0.cmp(&b.0) == Ordering::Equal);
    marks
        .windows(2)
        .filter(|w| !w[0].1 && w[1].1)
        .map(|w| Span { start: w[0].0, end: w[1].0 })
        .collect()
}

/// Options for the EM iteration.
#[derive(Debug, Clone, Copy)]
pub struct TurnbullOptions {
    /// Stop when no class mass changes by more than this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for TurnbullOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 10_000,
        }
    }
}

/// Self-consistency estimate of the CDF.
pub fn turnbull_estimate(d: &Dataset, opts: &TurnbullOptions) -> Result<TurnbullCurve> {
    turnbull_estimate_traced(d, opts, |_| {})
}

/// As [`turnbull_estimate`], calling `on_iteration` with the nonparametric
/// log-likelihood of the masses entering each EM step.
pub fn turnbull_estimate_traced(
    d: &Dataset,
    opts: &TurnbullOptions,
    mut on_iteration: impl FnMut(f64),
) -> Result<TurnbullCurve> {
    if !(opts.tol > 0.0) || opts.max_iter == 0 {
        return Err(Error::InvalidArgument(
            "Turnbull tolerance and iteration limit must be positive".into(),
        ));
    }
    let spans = spans(d);
    let classes = classes(&spans);
    let m = classes.len();
    let n = spans.len() as f64;
    let cover: Vec<Vec<usize>> = spans
        .iter()
        .map(|s| (0..m).filter(|&j| s.covers(&classes[j])).collect())
        .collect();

    let mut mass = vec![1.0 / m as f64; m];
    let mut next = vec![0.0; m];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        next.iter_mut().for_each(|v| *v = 0.0);
        let mut log_lik = 0.0;
        for cols in &cover {
            let total: f64 = cols.iter().map(|&j| mass[j]).sum();
            log_lik += total.ln();
            for &j in cols {
                next[j] += mass[j] / total;
            }
        }
        on_iteration(log_lik);
        let mut change = 0.0f64;
        for (p, q) in mass.iter_mut().zip(&next) {
            let q = q / n;
            change = change.max((q - *p).abs());
            *p = q;
        }
        if change < opts.tol {
            converged = true;
            break;
        }
    }

    let curve = build_curve(&classes, &mass, iterations);
    if converged {
        Ok(curve)
    } else {
        Err(Error::TurnbullNonConvergence {
            iterations,
            last: Box::new(curve),
        })
    }
}

fn build_curve(classes: &[Span], mass: &[f64], iterations: usize) -> TurnbullCurve {
    let mut intervals = Vec::new();
    let mut masses = Vec::new();
    let mut deficit = 0.0;
    for (c, &p) in classes.iter().zip(mass) {
        if c.end.value.is_infinite() {
            deficit += p;
        } else {
            intervals.push(SupportInterval::from_span(c));
            masses.push(p);
        }
    }
    let cumulative = masses
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    TurnbullCurve {
        intervals,
        masses,
        cumulative,
        deficit,
        iterations,
    }
}

/// Nonparametric log-likelihood of class masses for a dataset, with masses
/// given over the classes returned by [`turnbull_intervals`].
pub fn nonparametric_log_lik(d: &Dataset, masses: &[f64]) -> f64 {
    let spans = spans(d);
    let classes = classes(&spans);
    assert_eq!(classes.len(), masses.len(), "one mass per class");
    spans
        .iter()
        .map(|s| {
            classes
                .iter()
                .zip(masses)
                .filter(|(c, _)| s.covers(c))
                .map(|(_, p)| p)
                .sum::<f64>()
                .ln()
        })
        .sum()
}
