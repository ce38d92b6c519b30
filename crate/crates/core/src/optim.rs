//! Nelder-Mead simplex minimizer.

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Stop when the spread of objective values across the simplex falls
    /// below `ftol * (|f_best| + ftol)`...
    pub ftol: f64,
    /// ...and every vertex lies within `xtol` (max-norm) of the best one.
    pub xtol: f64,
    pub max_iter: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            ftol: 1e-8,
            xtol: 1e-7,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

const ALPHA: f64 = 1.0;
const GAMMA: f64 = 2.0;
const RHO: f64 = 0.5;
const SHRINK: f64 = 0.5;

/// Minimize `f` starting from `x0`, with the initial simplex built by
/// stepping `steps[i]` along coordinate `i`.
///
/// Non-finite objective values are treated as `+inf`, which lets the
/// objective reject infeasible points.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], steps: &[f64], opts: &SimplexOptions) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    assert_eq!(steps.len(), n, "one step per coordinate");
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    let f0 = eval(x0);
    simplex.push((x0.to_vec(), f0));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += steps[i];
        let fx = eval(&x);
        simplex.push((x, fx));
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let f_spread = worst - best;
        let x_spread = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if best.is_finite()
            && f_spread <= opts.ftol * (best.abs() + opts.ftol)
            && x_spread <= opts.xtol
        {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let toward = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };

        let xr = toward(-ALPHA);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = toward(-GAMMA);
            let fe = eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        // contraction, outside if the reflection improved on the worst point
        let (xc, fc) = if fr < worst {
            let xc = toward(-RHO);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = toward(RHO);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < fr.min(worst) {
            simplex[n] = (xc, fc);
            continue;
        }
        let x_best = simplex[0].0.clone();
        for (x, fx) in simplex.iter_mut().skip(1) {
            for (xi, bi) in x.iter_mut().zip(&x_best) {
                *xi = bi + SHRINK * (*xi - bi);
            }
            *fx = eval(x);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, f) = simplex.swap_remove(0);
    SimplexResult {
        x,
        f,
        iterations,
        evaluations,
        converged,
    }
}
