//! Curve data behind the result plot, as CSV and SVG.

use std::fmt::Write as _;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::estimation::{hazen_positions, FitResult};
use crate::report::format_number;
use crate::turnbull::{turnbull_estimate, TurnbullCurve, TurnbullOptions};

pub const GRID_POINTS: usize = 200;
pub const CSV_HEADER: &str = "series,x,y";

#[derive(Debug, Clone, PartialEq)]
pub enum Empirical {
    /// Censored input: nonparametric step curve.
    Turnbull(TurnbullCurve),
    /// Exact input: sorted values at Hazen plotting positions.
    Hazen(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveTable {
    pub grid: Vec<f64>,
    /// `(series name, cdf on grid)` per fit.
    pub fitted: Vec<(String, Vec<f64>)>,
    pub empirical: Empirical,
}

pub fn series_name(fit: &FitResult) -> String {
    format!("{}_{}", fit.model.family, fit.method.name())
}

/// Vertices of the Turnbull step polyline: a jump at the lower end of each
/// class, flat across the class, plus the upper end of the last class.
pub fn turnbull_steps(curve: &TurnbullCurve) -> Vec<(f64, f64)> {
    let mut pts = Vec::with_capacity(2 * curve.intervals.len() + 1);
    let mut prev = 0.0;
    for (iv, &cum) in curve.intervals.iter().zip(&curve.cumulative) {
        pts.push((iv.lower, prev));
        pts.push((iv.lower, cum));
        prev = cum;
    }
    if let Some(last) = curve.intervals.last() {
        if last.upper > last.lower {
            pts.push((last.upper, prev));
        }
    }
    pts
}

fn push_rows(out: &mut String, series: &str, pts: impl IntoIterator<Item = (f64, f64)>, full: bool) {
    for (x, y) in pts {
        let _ = writeln!(out, "{series},{},{}", format_number(x, full), format_number(y, full));
    }
}

/// Rows of the `turnbull` series, without header.
pub fn turnbull_rows(curve: &TurnbullCurve, full_precision: bool) -> String {
    let mut out = String::new();
    push_rows(&mut out, "turnbull", turnbull_steps(curve), full_precision);
    out
}

/// Standalone step table as written by the `turnbull` subcommand.
pub fn turnbull_csv(curve: &TurnbullCurve, full_precision: bool) -> String {
    format!("{CSV_HEADER}\n{}", turnbull_rows(curve, full_precision))
}

/// Log-spaced grid covering the 0.1% to 99.9% range of every fit and all
/// finite data bounds, plus the empirical curve.
pub fn render_plot_data(d: &Dataset, fits: &[FitResult]) -> Result<CurveTable> {
    if fits.is_empty() {
        return Err(Error::InvalidArgument("no fitted distribution to plot".into()));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for f in fits {
        lo = lo.min(f.model.quantile(0.001)?);
        hi = hi.max(f.model.quantile(0.999)?);
    }
    for b in d.finite_bounds() {
        lo = lo.min(b);
        hi = hi.max(b);
    }
    let (llo, lhi) = (lo.ln(), hi.ln());
    let grid: Vec<f64> = (0..GRID_POINTS)
        .map(|i| match i {
            0 => lo,
            i if i == GRID_POINTS - 1 => hi,
            i => (llo + (lhi - llo) * i as f64 / (GRID_POINTS - 1) as f64).exp(),
        })
        .collect();
    let fitted = fits
        .iter()
        .map(|f| {
            let ys = grid.iter().map(|&x| f.model.cdf_log(x.ln())).collect();
            (series_name(f), ys)
        })
        .collect();

    let empirical = if d.is_all_exact() {
        let mut xs: Vec<f64> = d.observations().iter().filter_map(|o| o.value()).collect();
        xs.sort_by(f64::total_cmp);
        let ps = hazen_positions(xs.len())?;
        Empirical::Hazen(xs.into_iter().zip(ps).collect())
    } else {
        Empirical::Turnbull(turnbull_estimate(d, &TurnbullOptions::default())?)
    };
    Ok(CurveTable {
        grid,
        fitted,
        empirical,
    })
}

impl CurveTable {
    /// Long-format CSV: `series,x,y`, fitted curves first.
    pub fn to_csv(&self, full_precision: bool) -> String {
        let mut out = format!("{CSV_HEADER}\n");
        for (name, ys) in &self.fitted {
            push_rows(&mut out, name, self.grid.iter().copied().zip(ys.iter().copied()), full_precision);
        }
        match &self.empirical {
            Empirical::Turnbull(c) => out.push_str(&turnbull_rows(c, full_precision)),
            Empirical::Hazen(pts) => push_rows(&mut out, "ecdf", pts.iter().copied(), full_precision),
        }
        out
    }

    /// SVG plot on a log concentration axis. `hc` is `(p in percent,
    /// concentration)` of the highlighted hazardous concentration.
    pub fn to_svg(&self, hc: Option<(f64, f64)>) -> String {
        const W: f64 = 640.0;
        const H: f64 = 420.0;
        const LEFT: f64 = 60.0;
        const RIGHT: f64 = 20.0;
        const TOP: f64 = 20.0;
        const BOTTOM: f64 = 50.0;
        const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

        let (lx0, lx1) = (self.grid[0].log10(), self.grid[self.grid.len() - 1].log10());
        let px = |x: f64| {
            let lx = if x > 0.0 { x.log10().clamp(lx0, lx1) } else { lx0 };
            LEFT + (lx - lx0) / (lx1 - lx0) * (W - LEFT - RIGHT)
        };
        let py = |y: f64| H - BOTTOM - y * (H - TOP - BOTTOM);
        let path = |pts: &mut dyn Iterator<Item = (f64, f64)>| {
            let mut d = String::new();
            for (i, (x, y)) in pts.enumerate() {
                let _ = write!(d, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, px(x), py(y));
            }
            d.trim_end().to_string()
        };

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
        );
        s.push_str(
            "<defs><marker id=\"arrow\" markerWidth=\"8\" markerHeight=\"8\" refX=\"4\" refY=\"4\" orient=\"auto\">\
             <path d=\"M0,0 L8,4 L0,8 z\" fill=\"black\"/></marker></defs>\n",
        );
        let _ = writeln!(
            s,
            r#"<g class="axes" stroke="black"><line x1="{LEFT}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}"/><line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{0:.2}"/></g>"#,
            H - BOTTOM,
            W - RIGHT
        );
        for decade in (lx0.ceil() as i32)..=(lx1.floor() as i32) {
            let x = px(10f64.powi(decade));
            let _ = writeln!(
                s,
                r#"<text x="{x:.2}" y="{:.2}" font-size="11" text-anchor="middle">1e{decade}</text>"#,
                H - BOTTOM + 16.0
            );
        }
        for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{tick}</text>"#,
                LEFT - 6.0,
                py(tick) + 4.0
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">concentration</text>"#,
            (LEFT + W - RIGHT) / 2.0,
            H - 12.0
        );

        match &self.empirical {
            Empirical::Turnbull(c) => {
                let d = path(&mut turnbull_steps(c).into_iter());
                let _ = writeln!(s, r#"<path class="empirical turnbull" d="{d}" fill="none" stroke="black" stroke-width="1.5"/>"#);
            }
            Empirical::Hazen(pts) => {
                for &(x, y) in pts {
                    let _ = writeln!(
                        s,
                        r#"<circle class="empirical ecdf" cx="{:.2}" cy="{:.2}" r="3" fill="black"/>"#,
                        px(x),
                        py(y)
                    );
                }
            }
        }
        for (i, (name, ys)) in self.fitted.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let d = path(&mut self.grid.iter().copied().zip(ys.iter().copied()));
            let _ = writeln!(s, r#"<path class="fit" data-series="{name}" d="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>"#);
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" font-size="11" fill="{color}">{name}</text>"#,
                LEFT + 10.0,
                TOP + 14.0 * (i + 1) as f64
            );
        }
        if let Some((p, x)) = hc {
            let (hx, hy) = (px(x), py(p / 100.0));
            let _ = writeln!(
                s,
                r#"<line class="hc-level" x1="{LEFT}" y1="{hy:.2}" x2="{hx:.2}" y2="{hy:.2}" stroke="black" stroke-dasharray="4,3"/>"#
            );
            let _ = writeln!(
                s,
                r#"<line class="hc-arrow" x1="{hx:.2}" y1="{hy:.2}" x2="{hx:.2}" y2="{:.2}" stroke="black" marker-end="url(#arrow)"/>"#,
                H - BOTTOM - 4.0
            );
        }
        s.push_str("</svg>\n");
        s
    }
}
