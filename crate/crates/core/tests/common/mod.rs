//! Shared helpers for the integration suites: seeded data generators and
//! oracles written independently of the library's numerical code.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use ssdfit::{Dataset, DistributionModel, Family, Observation};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn lognormal_sample(rng: &mut ChaCha8Rng, n: usize, mu: f64, sigma: f64) -> Vec<f64> {
    let dist = LogNormal::new(mu, sigma).unwrap();
    (0..n).map(|_| dist.sample(rng)).collect()
}

/// Random small dataset mixing all four censoring kinds.
pub fn random_mixed_dataset(rng: &mut ChaCha8Rng, n: usize) -> Dataset {
    let draw = |rng: &mut ChaCha8Rng| 10f64.powf(rng.gen_range(-1.0..2.0));
    let obs = (0..n)
        .map(|i| {
            let a = draw(rng);
            // cycle the kinds so every dataset with n >= 4 has all of them
            match (i + rng.gen_range(0..4)) % 4 {
                0 => Observation::exact(a),
                1 => Observation::left_censored(a),
                2 => Observation::right_censored(a),
                _ => {
                    let b = draw(rng);
                    Observation::interval(a.min(b), a.max(b) * 1.01)
                }
            }
            .unwrap()
        })
        .collect();
    Dataset::new(obs).unwrap()
}

/// The generating process of the censored MLE example: n values from
/// log-normal(ln 10, 0.8), values above `threshold` right-censored there.
pub fn right_censored_sample(seed: u64, n: usize, threshold: f64) -> Dataset {
    let xs = lognormal_sample(&mut rng(seed), n, 10f64.ln(), 0.8);
    let obs = xs
        .into_iter()
        .map(|x| {
            if x > threshold {
                Observation::right_censored(threshold)
            } else {
                Observation::exact(x)
            }
            .unwrap()
        })
        .collect();
    Dataset::new(obs).unwrap()
}

// ---- independent normal CDF: Taylor series for erf, continued fraction for erfc

fn erf_series(x: f64) -> f64 {
    // erf(x) = 2/sqrt(pi) * sum (-1)^n x^(2n+1) / (n! (2n+1))
    let mut term = x;
    let mut sum = x;
    let x2 = x * x;
    for n in 1..200 {
        term *= -x2 / n as f64;
        let add = term / (2 * n + 1) as f64;
        sum += add;
        if add.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum * 2.0 / std::f64::consts::PI.sqrt()
}

fn erfc_continued_fraction(x: f64) -> f64 {
    // erfc(x) = exp(-x^2)/sqrt(pi) * 1/(x + 1/2/(x + 1/(x + 3/2/(x + ...)))), x > 0
    // evaluated bottom-up with a fixed depth
    let mut f = x;
    for k in (1..400).rev() {
        f = x + (k as f64 / 2.0) / f;
    }
    (-x * x).exp() / std::f64::consts::PI.sqrt() / f
}

pub fn oracle_normal_cdf(z: f64) -> f64 {
    let x = z / std::f64::consts::SQRT_2;
    if x.abs() < 1.5 {
        0.5 * (1.0 + erf_series(x))
    } else if x > 0.0 {
        1.0 - 0.5 * erfc_continued_fraction(x)
    } else {
        0.5 * erfc_continued_fraction(-x)
    }
}

fn oracle_std_cdf(family: Family, z: f64) -> f64 {
    match family {
        Family::LogNormal => oracle_normal_cdf(z),
        Family::LogLogistic => 1.0 / (1.0 + (-z).exp()),
    }
}

fn oracle_std_density(family: Family, z: f64) -> f64 {
    match family {
        Family::LogNormal => (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt(),
        Family::LogLogistic => {
            let e = (-z).exp();
            e / ((1.0 + e) * (1.0 + e))
        }
    }
}

/// Direct-sum censored log-likelihood: densities from closed forms, tail
/// probabilities from the series/continued-fraction CDF, upper tails by
/// symmetry.
pub fn oracle_log_lik(d: &Dataset, m: &DistributionModel) -> f64 {
    let (fam, mu, sigma) = (m.family, m.mu, m.sigma);
    let z = |x: f64| (x.ln() - mu) / sigma;
    let mut total = 0.0;
    for o in d.observations() {
        let term = match (o.lower(), o.upper()) {
            (Some(a), Some(b)) if a == b => (oracle_std_density(fam, z(a)) / (sigma * a)).ln(),
            (None, Some(u)) => oracle_std_cdf(fam, z(u)).ln(),
            (Some(l), None) => oracle_std_cdf(fam, -z(l)).ln(),
            (Some(a), Some(b)) => {
                let (za, zb) = (z(a), z(b));
                // difference taken in whichever tail keeps both terms small
                let p = if za > 0.0 {
                    oracle_std_cdf(fam, -za) - oracle_std_cdf(fam, -zb)
                } else {
                    oracle_std_cdf(fam, zb) - oracle_std_cdf(fam, za)
                };
                p.ln()
            }
            (None, None) => unreachable!(),
        };
        total += term;
    }
    total
}

/// Kaplan-Meier survival just after each distinct exact value, for data
/// with exact and right-censored observations only. A right-censored bound
/// `l` means the value exceeds `l`, so it is still at risk at `t = l`.
pub fn kaplan_meier(d: &Dataset) -> Vec<(f64, f64)> {
    let mut events: Vec<f64> = d.observations().iter().filter_map(|o| o.value()).collect();
    events.sort_by(f64::total_cmp);
    events.dedup();
    let mut s = 1.0;
    let mut out = Vec::new();
    for t in events {
        let deaths = d.observations().iter().filter(|o| o.value() == Some(t)).count() as f64;
        let at_risk = d
            .observations()
            .iter()
            .filter(|o| match o.value() {
                Some(v) => v >= t,
                None => o.lower().unwrap() >= t,
            })
            .count() as f64;
        s *= 1.0 - deaths / at_risk;
        out.push((t, s));
    }
    out
}

/// Print one acceptance line and fail the test if `ok` is false.
pub fn verdict(criterion: &str, ok: bool, detail: impl std::fmt::Display) {
    println!("[{}] {criterion}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "{criterion} failed: {detail}");
}
