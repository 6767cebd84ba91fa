//! SVG output: Boltzmann-transform panels and training-loss bands.
//!
//! Rendering is plain string formatting with fixed precision, so identical
//! inputs give identical bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::experiment::{mean_std, RunRecord};
use crate::targets::{Batch, Objective};
use crate::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Grid values of `V` and of `exp(−V/σ)` for each σ.
#[derive(Clone, Debug, PartialEq)]
pub struct BoltzmannCurves {
    pub xs: Vec<f64>,
    pub loss: Vec<f64>,
    pub sigmas: Vec<f64>,
    /// `transformed[k][i] = exp(−V(xs[i]) / sigmas[k])`, unnormalised.
    pub transformed: Vec<Vec<f64>>,
}

impl BoltzmannCurves {
    pub fn argmin_loss(&self) -> usize {
        crate::mcsfp::argmin(&self.loss)
    }

    pub fn argmax(&self, k: usize) -> usize {
        let neg: Vec<f64> = self.transformed[k].iter().map(|v| -v).collect();
        crate::mcsfp::argmin(&neg)
    }
}

/// Evaluates a one-dimensional objective on `points` evenly spaced grid
/// points over `[lo, hi]`.
pub fn boltzmann_curves(objective: &Objective, sigmas: &[f64], lo: f64, hi: f64, points: usize) -> Result<BoltzmannCurves> {
    if objective.dim() != 1 {
        return Err(Error::invalid(format!(
            "Boltzmann plots need a univariate objective, got dimension {}",
            objective.dim()
        )));
    }
    if points < 2 || !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::invalid(format!("bad plot grid [{lo}, {hi}] with {points} points")));
    }
    if sigmas.is_empty() || sigmas.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::invalid("plot needs at least one positive sigma"));
    }
    let xs: Vec<f64> = (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect();
    let loss = xs
        .iter()
        .map(|x| objective.value(&[*x], &Batch::Full))
        .collect::<Result<Vec<_>>>()?;
    let transformed = sigmas
        .iter()
        .map(|s| loss.iter().map(|v| (-v / s).exp()).collect())
        .collect();
    Ok(BoltzmannCurves {
        xs,
        loss,
        sigmas: sigmas.to_vec(),
        transformed,
    })
}

struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    xr: (f64, f64),
    yr: (f64, f64),
}

impl Frame {
    fn new(x0: f64, y0: f64, w: f64, h: f64, xs: &[f64], ys: impl Iterator<Item = f64>) -> Self {
        let xr = bounds(xs.iter().copied());
        let yr = bounds(ys);
        Self { x0, y0, w, h, xr, yr }
    }

    fn px(&self, x: f64) -> f64 {
        self.x0 + (x - self.xr.0) / (self.xr.1 - self.xr.0) * self.w
    }

    fn py(&self, y: f64) -> f64 {
        self.y0 + self.h - (y - self.yr.0) / (self.yr.1 - self.yr.0) * self.h
    }

    fn axes(&self, svg: &mut String, title: &str) {
        let _ = writeln!(
            svg,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#444"/>"##,
            self.x0, self.y0, self.w, self.h
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">{}</text>"#,
            self.x0 + self.w / 2.0,
            self.y0 - 8.0,
            escape(title)
        );
        for (v, anchor, x, y) in [
            (self.xr.0, "start", self.x0, self.y0 + self.h + 14.0),
            (self.xr.1, "end", self.x0 + self.w, self.y0 + self.h + 14.0),
            (self.yr.0, "end", self.x0 - 4.0, self.y0 + self.h),
            (self.yr.1, "end", self.x0 - 4.0, self.y0 + 10.0),
        ] {
            let _ = writeln!(
                svg,
                r#"<text x="{x:.2}" y="{y:.2}" font-size="10" text-anchor="{anchor}">{}</text>"#,
                tick(v)
            );
        }
    }

    fn polyline(&self, svg: &mut String, xs: &[f64], ys: &[f64], colour: &str) {
        let pts: Vec<String> = xs
            .iter()
            .zip(ys)
            .filter(|(_, y)| y.is_finite())
            .map(|(x, y)| format!("{:.2},{:.2}", self.px(*x), self.py(*y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
    }

    fn band(&self, svg: &mut String, xs: &[f64], lo: &[f64], hi: &[f64], colour: &str) {
        let mut pts: Vec<String> = xs
            .iter()
            .zip(hi)
            .map(|(x, y)| format!("{:.2},{:.2}", self.px(*x), self.py(*y)))
            .collect();
        pts.extend(
            xs.iter()
                .zip(lo)
                .rev()
                .map(|(x, y)| format!("{:.2},{:.2}", self.px(*x), self.py(*y))),
        );
        let _ = writeln!(
            svg,
            r#"<polygon fill="{colour}" fill-opacity="0.2" stroke="none" points="{}"/>"#,
            pts.join(" ")
        );
    }
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(w: f64, h: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w:.0}\" height=\"{h:.0}\" viewBox=\"0 0 {w:.0} {h:.0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

fn legend(svg: &mut String, x: f64, y: f64, entries: &[(String, &str)]) {
    for (i, (label, colour)) in entries.iter().enumerate() {
        let yy = y + 14.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="{colour}" stroke-width="2"/><text x="{:.2}" y="{:.2}" font-size="10">{}</text>"#,
            x + 16.0,
            x + 20.0,
            yy + 3.5,
            escape(label)
        );
    }
}

pub fn boltzmann_svg(curves: &BoltzmannCurves) -> String {
    let panel_w = (WIDTH * 2.0 - 4.0 * MARGIN) / 2.0;
    let panel_h = HEIGHT - 2.0 * MARGIN;
    let mut svg = header(WIDTH * 2.0, HEIGHT);
    let left = Frame::new(MARGIN, MARGIN, panel_w, panel_h, &curves.xs, curves.loss.iter().copied());
    left.axes(&mut svg, "V(x)");
    left.polyline(&mut svg, &curves.xs, &curves.loss, "#000000");
    let right = Frame::new(
        3.0 * MARGIN + panel_w,
        MARGIN,
        panel_w,
        panel_h,
        &curves.xs,
        curves.transformed.iter().flatten().copied().chain([0.0]),
    );
    right.axes(&mut svg, "exp(−V(x)/σ)");
    let mut entries = Vec::new();
    for (k, ys) in curves.transformed.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        right.polyline(&mut svg, &curves.xs, ys, colour);
        entries.push((format!("σ = {}", curves.sigmas[k]), colour));
    }
    legend(&mut svg, right.x0 + 8.0, right.y0 + 12.0, &entries);
    svg.push_str("</svg>\n");
    svg
}

/// Evaluates, renders and writes the Boltzmann panels.
pub fn plot_boltzmann(
    objective: &Objective,
    sigmas: &[f64],
    lo: f64,
    hi: f64,
    points: usize,
    out_path: &Path,
) -> Result<BoltzmannCurves> {
    let curves = boltzmann_curves(objective, sigmas, lo, hi, points)?;
    std::fs::write(out_path, boltzmann_svg(&curves)).map_err(|e| Error::io(out_path, e))?;
    Ok(curves)
}

/// Mean training loss and its ±1 population std band for one optimiser.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveBand {
    pub optimiser: String,
    pub steps: Vec<f64>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub seeds: usize,
}

/// Groups records by optimiser and reduces the train loss across seeds at
/// each row index shared by every seed.
pub fn curve_bands(records: &[RunRecord]) -> Vec<CurveBand> {
    let mut groups: BTreeMap<&str, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.optimiser.as_str()).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(name, recs)| {
            let len = recs.iter().map(|r| r.rows.len()).min().unwrap_or(0);
            let mut band = CurveBand {
                optimiser: name.to_string(),
                steps: Vec::with_capacity(len),
                mean: Vec::with_capacity(len),
                std: Vec::with_capacity(len),
                seeds: recs.len(),
            };
            for i in 0..len {
                let vals: Vec<f64> = recs.iter().map(|r| r.rows[i].train_loss).collect();
                let (m, s) = mean_std(&vals);
                band.steps.push(recs[0].rows[i].step as f64);
                band.mean.push(m);
                band.std.push(s);
            }
            band
        })
        .collect()
}

pub fn curves_svg(bands: &[CurveBand]) -> String {
    let mut svg = header(WIDTH, HEIGHT);
    let xs: Vec<f64> = bands.iter().flat_map(|b| b.steps.iter().copied()).collect();
    let ys = bands.iter().flat_map(|b| {
        b.mean
            .iter()
            .zip(&b.std)
            .flat_map(|(m, s)| [m - s, m + s])
            .collect::<Vec<_>>()
    });
    let frame = Frame::new(MARGIN, MARGIN, WIDTH - 2.0 * MARGIN, HEIGHT - 2.0 * MARGIN, &xs, ys);
    frame.axes(&mut svg, "training loss V(x) by step (mean ± 1 std)");
    let mut entries = Vec::new();
    for (k, b) in bands.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let lo: Vec<f64> = b.mean.iter().zip(&b.std).map(|(m, s)| m - s).collect();
        let hi: Vec<f64> = b.mean.iter().zip(&b.std).map(|(m, s)| m + s).collect();
        frame.band(&mut svg, &b.steps, &lo, &hi, colour);
        frame.polyline(&mut svg, &b.steps, &b.mean, colour);
        entries.push((format!("{} ({} seeds)", b.optimiser, b.seeds), colour));
    }
    legend(&mut svg, frame.x0 + frame.w - 150.0, frame.y0 + 12.0, &entries);
    svg.push_str("</svg>\n");
    svg
}

/// Writes the band plot for `records` and returns the bands drawn.
pub fn emit_curves(records: &[RunRecord], out_path: &Path) -> Result<Vec<CurveBand>> {
    if records.is_empty() {
        return Err(Error::invalid("emit_curves needs at least one record"));
    }
    let bands = curve_bands(records);
    std::fs::write(out_path, curves_svg(&bands)).map_err(|e| Error::io(out_path, e))?;
    Ok(bands)
}
