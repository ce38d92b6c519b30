//! Nonparametric bootstrap with percentile intervals and a batch-replicate
//! convergence check.
//!
//! Replicates are grouped into batches. After the planned batches finish,
//! the 2.5% and 97.5% quantiles of each batch are compared with the pooled
//! ones; if they fluctuate by more than `eta` times the pooled interval
//! width, the number of batches is doubled and the run continues while
//! the time budget allows.
//!
//! Replicate `b` draws from its own ChaCha stream `(seed, b)`, so results do
//! not depend on thread count or scheduling.

use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::Dataset;
use crate::distributions::{DistributionModel, Family};
use crate::error::{Error, Result};
use crate::estimation::{fit_mle, FitOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapPlan {
    /// Initial number of batches (K).
    pub batches: usize,
    /// Replicates per batch (B).
    pub batch_size: usize,
    pub seed: u64,
    pub time_budget: Duration,
    /// Largest accepted batch fluctuation relative to the pooled CI width.
    pub eta: f64,
    pub max_fail_fraction: f64,
    /// Doubling of K stops here even if time remains.
    pub max_batches: usize,
}

impl Default for BootstrapPlan {
    fn default() -> Self {
        Self {
            batches: 5,
            batch_size: 1000,
            seed: 0,
            time_budget: Duration::from_secs(300),
            eta: 0.05,
            max_fail_fraction: 0.10,
            max_batches: 80,
        }
    }
}

impl BootstrapPlan {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.batches < 2 {
            return bad(format!("need at least 2 batches, got {}", self.batches));
        }
        if self.batch_size < 100 {
            return bad(format!("batch size must be at least 100, got {}", self.batch_size));
        }
        if !(self.eta > 0.0) {
            return bad(format!("eta must be positive, got {}", self.eta));
        }
        if !(0.0..=1.0).contains(&self.max_fail_fraction) {
            return bad(format!(
                "max_fail_fraction must lie in [0, 1], got {}",
                self.max_fail_fraction
            ));
        }
        if self.max_batches < self.batches {
            return bad("max_batches is below the initial batch count".into());
        }
        Ok(())
    }
}

/// A closed interval `[lower, upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            lower: self.lower * c,
            upper: self.upper * c,
        }
    }
}

/// Empirical quantile of sorted data, interpolating linearly between order
/// statistics at position `(n - 1) q`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// 95% percentile interval of the draws.
pub fn percentile_ci(draws: &[f64]) -> Result<Interval> {
    if draws.len() < 2 {
        return Err(Error::DegenerateBootstrap(format!(
            "{} draw(s) cannot form an interval",
            draws.len()
        )));
    }
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Interval {
        lower: quantile_sorted(&sorted, 0.025),
        upper: quantile_sorted(&sorted, 0.975),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceVerdict {
    pub converged: bool,
    pub worst_relative_fluctuation: f64,
    pub advisory: String,
}

/// Compare per-batch interval endpoints with the pooled ones.
///
/// `per_batch[k][q]` is batch `k`'s interval for tracked quantity `q`, and
/// `pooled[q]` the interval from all draws. The fluctuation of a quantity
/// is the largest endpoint deviation over batches, divided by the pooled
/// width; the run has converged when the worst one is at most `eta`.
pub fn check_convergence(
    per_batch: &[Vec<Interval>],
    pooled: &[Interval],
    eta: f64,
) -> Result<ConvergenceVerdict> {
    if per_batch.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "convergence check needs at least 2 batches, got {}",
            per_batch.len()
        )));
    }
    let mut worst = 0.0f64;
    for (q, p) in pooled.iter().enumerate() {
        let width = p.width();
        if !(width > 0.0) {
            return Err(Error::DegenerateBootstrap(format!(
                "pooled interval of quantity {q} has zero width"
            )));
        }
        let fluctuation = per_batch
            .iter()
            .map(|b| (b[q].lower - p.lower).abs().max((b[q].upper - p.upper).abs()))
            .fold(0.0, f64::max);
        worst = worst.max(fluctuation / width);
    }
    let converged = worst <= eta;
    let advisory = if converged {
        format!(
            "bootstrap converged: the confidence intervals are reliable \
             (largest batch fluctuation {worst:.3} of the interval width, limit {eta})"
        )
    } else {
        format!(
            "bootstrap did not converge: the confidence intervals are not reliable \
             (largest batch fluctuation {worst:.3} of the interval width, limit {eta})"
        )
    };
    Ok(ConvergenceVerdict {
        converged,
        worst_relative_fluctuation: worst,
        advisory,
    })
}

/// Random stream of replicate `index` under `seed`.
pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draw `d.len()` rows uniformly with replacement.
pub fn resample<R: Rng + ?Sized>(d: &Dataset, rng: &mut R) -> Dataset {
    let obs = d.observations();
    let drawn = (0..obs.len())
        .map(|_| obs[rng.gen_range(0..obs.len())])
        .collect();
    Dataset::new(drawn)
        .expect("resample of a non-empty dataset is non-empty")
        .with_label(d.label.clone())
        .with_unit(d.unit.clone())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapResult {
    pub family: Family,
    /// Tracked HC levels in percent.
    pub hc_levels: Vec<f64>,
    /// `(mu, sigma)` of every successful refit, in replicate order.
    pub param_draws: Vec<(f64, f64)>,
    /// `hc_draws[i]` holds HC at `hc_levels[i]` for every successful refit.
    pub hc_draws: Vec<Vec<f64>>,
    /// Per batch, the 95% interval of each tracked quantity
    /// (mu, sigma, then each HC level). Batches with fewer than two
    /// successful refits are left out.
    pub per_batch_endpoints: Vec<Vec<Interval>>,
    /// Pooled 95% intervals in the same quantity order.
    pub pooled: Vec<Interval>,
    pub replicates: usize,
    pub failures: usize,
    pub batches: usize,
    pub converged: bool,
    pub worst_relative_fluctuation: f64,
    pub advisory: String,
    pub time_limit_reached: bool,
    pub elapsed: f64,
}

impl BootstrapResult {
    pub fn mu_ci(&self) -> Interval {
        self.pooled[0]
    }

    pub fn sigma_ci(&self) -> Interval {
        self.pooled[1]
    }

    pub fn hc_index(&self, p: f64) -> Option<usize> {
        self.hc_levels.iter().position(|&l| (l - p).abs() < 1e-12)
    }

    pub fn hc_ci(&self, p: f64) -> Option<Interval> {
        self.hc_index(p).map(|i| self.pooled[2 + i])
    }

    pub fn quantity_names(&self) -> Vec<String> {
        let mut names = vec!["mu".to_string(), "sigma".to_string()];
        names.extend(self.hc_levels.iter().map(|p| format!("HC{p}")));
        names
    }
}

enum Outcome {
    Fit(DistributionModel),
    Failed,
    OutOfTime,
}

fn tracked(m: &DistributionModel, levels: &[f64]) -> Vec<f64> {
    let mut v = vec![m.mu, m.sigma];
    v.extend(levels.iter().map(|p| {
        m.quantile(p / 100.0)
            .expect("levels validated to lie in (0, 100)")
    }));
    v
}

fn intervals_of(columns: &[Vec<f64>]) -> Result<Vec<Interval>> {
    columns.iter().map(|c| percentile_ci(c)).collect()
}

/// Resample-and-refit bootstrap of the maximum-likelihood fit.
pub fn bootstrap_fit(
    d: &Dataset,
    family: Family,
    plan: &BootstrapPlan,
    hc_levels: &[f64],
) -> Result<BootstrapResult> {
    plan.validate()?;
    if let Some(p) = hc_levels.iter().find(|&&p| !(p > 0.0 && p < 100.0)) {
        return Err(Error::InvalidArgument(format!("HC level {p} is outside (0, 100)")));
    }
    let fit_opts = FitOptions::default();
    fit_mle(d, family, &fit_opts)?;

    let start = Instant::now();
    let deadline = start + plan.time_budget;
    let out_of_time = AtomicBool::new(false);
    let n_quantities = 2 + hc_levels.len();

    // columns[q] pools quantity q over all successful refits
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); n_quantities];
    let mut per_batch = Vec::new();
    let mut failures = 0;
    let mut batches = 0;
    let mut target = plan.batches;
    let mut time_limit_reached = false;

    let verdict = loop {
        while batches < target {
            let first = (batches * plan.batch_size) as u64;
            let outcomes: Vec<Outcome> = (first..first + plan.batch_size as u64)
                .into_par_iter()
                .map(|b| {
                    if out_of_time.load(Ordering::Relaxed) || Instant::now() > deadline {
                        out_of_time.store(true, Ordering::Relaxed);
                        return Outcome::OutOfTime;
                    }
                    let sample = resample(d, &mut replicate_rng(plan.seed, b));
                    match fit_mle(&sample, family, &fit_opts) {
                        Ok(f) => Outcome::Fit(f.model),
                        Err(_) => Outcome::Failed,
                    }
                })
                .collect();
            if outcomes.iter().any(|o| matches!(o, Outcome::OutOfTime)) {
                if batches == 0 {
                    return Err(Error::TimeBudgetExhausted);
                }
                time_limit_reached = true;
                break;
            }
            let mut batch_columns: Vec<Vec<f64>> = vec![Vec::new(); n_quantities];
            for o in &outcomes {
                match o {
                    Outcome::Fit(m) => {
                        for (col, v) in batch_columns.iter_mut().zip(tracked(m, hc_levels)) {
                            col.push(v);
                        }
                    }
                    Outcome::Failed => failures += 1,
                    Outcome::OutOfTime => unreachable!(),
                }
            }
            if batch_columns[0].len() >= 2 {
                per_batch.push(intervals_of(&batch_columns)?);
            }
            for (all, new) in columns.iter_mut().zip(batch_columns) {
                all.extend(new);
            }
            batches += 1;
        }

        if columns[0].is_empty() {
            return Err(Error::Bootstrap("every bootstrap refit failed".into()));
        }
        let pooled = intervals_of(&columns)?;
        let verdict = if per_batch.len() >= 2 {
            check_convergence(&per_batch, &pooled, plan.eta)?
        } else {
            ConvergenceVerdict {
                converged: false,
                worst_relative_fluctuation: f64::INFINITY,
                advisory: "bootstrap did not converge: the confidence intervals are not \
                           reliable (fewer than two usable batches)"
                    .into(),
            }
        };
        if start.elapsed() >= plan.time_budget {
            time_limit_reached = true;
        }
        let next = (target * 2).min(plan.max_batches);
        if verdict.converged || time_limit_reached || next == target {
            break (verdict, pooled);
        }
        target = next;
    };
    let (verdict, pooled) = verdict;

    let replicates = batches * plan.batch_size;
    let fail_ok = failures as f64 <= plan.max_fail_fraction * replicates as f64;
    let converged = verdict.converged && fail_ok;
    let mut advisory = verdict.advisory;
    if verdict.converged && !fail_ok {
        advisory = format!(
            "bootstrap did not converge: the confidence intervals are not reliable \
             ({failures} of {replicates} refits failed)"
        );
    }
    if time_limit_reached && !converged {
        advisory.push_str("; the time limit was reached");
    }

    let mut columns = columns.into_iter();
    let mus = columns.next().unwrap_or_default();
    let sigmas = columns.next().unwrap_or_default();
    Ok(BootstrapResult {
        family,
        hc_levels: hc_levels.to_vec(),
        param_draws: mus.into_iter().zip(sigmas).collect(),
        hc_draws: columns.collect(),
        per_batch_endpoints: per_batch,
        pooled,
        replicates,
        failures,
        batches,
        converged,
        worst_relative_fluctuation: verdict.worst_relative_fluctuation,
        advisory,
        time_limit_reached,
        elapsed: start.elapsed().as_secs_f64(),
    })
}
