//! SVG rendering: corner plots of pooled posteriors and simple line plots
//! (SLD profiles, reflectivity curves, prior densities).
//!
//! Output is a pure function of the input; every coordinate is printed with
//! fixed precision.

use std::fmt::Write as _;

use crate::sampler::Pooled;

pub const CORNER_BINS: usize = 30;
const PANEL: f64 = 170.0;
const GAP: f64 = 12.0;
const MARGIN: f64 = 70.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram1d {
    pub param: usize,
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram2d {
    /// Parameter on the horizontal axis (column of the grid).
    pub x_param: usize,
    /// Parameter on the vertical axis (row of the grid).
    pub y_param: usize,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    /// `counts[iy][ix]`
    pub counts: Vec<Vec<usize>>,
}

impl Histogram2d {
    fn centre(range: (f64, f64), bins: usize, i: usize) -> f64 {
        range.0 + (i as f64 + 0.5) * (range.1 - range.0) / bins as f64
    }

    /// Slope dy/dx of the principal axis of the binned density.
    pub fn major_axis_slope(&self) -> f64 {
        let ny = self.counts.len();
        let nx = self.counts[0].len();
        let (mut w, mut sx, mut sy) = (0.0, 0.0, 0.0);
        for (iy, row) in self.counts.iter().enumerate() {
            for (ix, &c) in row.iter().enumerate() {
                let c = c as f64;
                w += c;
                sx += c * Self::centre(self.x_range, nx, ix);
                sy += c * Self::centre(self.y_range, ny, iy);
            }
        }
        let (mx, my) = (sx / w, sy / w);
        let (mut cxx, mut cyy, mut cxy) = (0.0, 0.0, 0.0);
        for (iy, row) in self.counts.iter().enumerate() {
            for (ix, &c) in row.iter().enumerate() {
                let c = c as f64;
                let dx = Self::centre(self.x_range, nx, ix) - mx;
                let dy = Self::centre(self.y_range, ny, iy) - my;
                cxx += c * dx * dx;
                cyy += c * dy * dy;
                cxy += c * dx * dy;
            }
        }
        let angle = 0.5 * (2.0 * cxy).atan2(cxx - cyy);
        angle.tan()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Panel {
    Marginal(Histogram1d),
    Joint(Histogram2d),
}

fn range_of(xs: &[f64]) -> (f64, f64) {
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if hi > lo {
        (lo, hi)
    } else {
        let pad = if lo == 0.0 { 0.5 } else { 0.5 * lo.abs() * 1e-3 };
        (lo - pad, hi + pad)
    }
}

fn bin(x: f64, range: (f64, f64), bins: usize) -> usize {
    ((((x - range.0) / (range.1 - range.0)) * bins as f64) as usize).min(bins - 1)
}

/// Panels of the lower-triangular corner grid: `m` marginals on the diagonal
/// and `m(m−1)/2` joint histograms below it, in row-major order.
pub fn corner_panels(samples: &Pooled, bins: usize) -> Vec<Panel> {
    let m = samples.dim();
    let columns: Vec<Vec<f64>> = (0..m).map(|j| samples.column(j)).collect();
    let ranges: Vec<(f64, f64)> = columns.iter().map(|c| range_of(c)).collect();
    let mut panels = Vec::new();
    for row in 0..m {
        for col in 0..=row {
            if row == col {
                let mut counts = vec![0; bins];
                for &x in &columns[row] {
                    counts[bin(x, ranges[row], bins)] += 1;
                }
                panels.push(Panel::Marginal(Histogram1d {
                    param: row,
                    lo: ranges[row].0,
                    hi: ranges[row].1,
                    counts,
                }));
            } else {
                let mut counts = vec![vec![0; bins]; bins];
                for (&x, &y) in columns[col].iter().zip(&columns[row]) {
                    counts[bin(y, ranges[row], bins)][bin(x, ranges[col], bins)] += 1;
                }
                panels.push(Panel::Joint(Histogram2d {
                    x_param: col,
                    y_param: row,
                    x_range: ranges[col],
                    y_range: ranges[row],
                    counts,
                }));
            }
        }
    }
    panels
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn axis_label(name: &str, unit: &str) -> String {
    if unit.is_empty() {
        escape(name)
    } else {
        format!("{} / {}", escape(name), escape(unit))
    }
}

fn tick(v: f64) -> String {
    format!("{v:.4}")
}

/// Renders a corner plot. `units` may be shorter than `names`.
pub fn corner_plot(samples: &Pooled, names: &[String], units: &[String]) -> String {
    let panels = corner_panels(samples, CORNER_BINS);
    render_corner(&panels, names, units)
}

pub fn render_corner(panels: &[Panel], names: &[String], units: &[String]) -> String {
    let m = names.len();
    let size = 2.0 * MARGIN + m as f64 * PANEL + (m.saturating_sub(1)) as f64 * GAP;
    let origin = |row: usize, col: usize| (MARGIN + col as f64 * (PANEL + GAP), MARGIN * 0.5 + row as f64 * (PANEL + GAP));
    let unit = |i: usize| units.get(i).map(String::as_str).unwrap_or("");
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size:.1}" height="{size:.1}" viewBox="0 0 {size:.1} {size:.1}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{size:.1}" height="{size:.1}" fill="white"/>"#);
    for panel in panels {
        match panel {
            Panel::Marginal(h) => {
                let (x0, y0) = origin(h.param, h.param);
                let _ = writeln!(svg, r#"<g class="panel marginal" data-row="{0}" data-col="{0}">"#, h.param);
                let _ = writeln!(
                    svg,
                    r#"<rect x="{x0:.2}" y="{y0:.2}" width="{PANEL:.2}" height="{PANEL:.2}" fill="none" stroke="black"/>"#
                );
                let max = h.counts.iter().copied().max().unwrap_or(1).max(1) as f64;
                let bw = PANEL / h.counts.len() as f64;
                let mut path = String::new();
                for (i, &c) in h.counts.iter().enumerate() {
                    let top = y0 + PANEL - 0.92 * PANEL * c as f64 / max;
                    let left = x0 + i as f64 * bw;
                    if i == 0 {
                        let _ = write!(path, "M{left:.2},{:.2} ", y0 + PANEL);
                    }
                    let _ = write!(path, "L{left:.2},{top:.2} L{:.2},{top:.2} ", left + bw);
                }
                let _ = write!(path, "L{:.2},{:.2}", x0 + PANEL, y0 + PANEL);
                let _ = writeln!(svg, r#"<path d="{path}" fill="none" stroke="steelblue" stroke-width="1.2"/>"#);
                let _ = writeln!(svg, "</g>");
            }
            Panel::Joint(h) => {
                let (x0, y0) = origin(h.y_param, h.x_param);
                let _ = writeln!(
                    svg,
                    r#"<g class="panel joint" data-row="{}" data-col="{}">"#,
                    h.y_param, h.x_param
                );
                let _ = writeln!(
                    svg,
                    r#"<rect x="{x0:.2}" y="{y0:.2}" width="{PANEL:.2}" height="{PANEL:.2}" fill="none" stroke="black"/>"#
                );
                let ny = h.counts.len();
                let nx = h.counts[0].len();
                let max = h.counts.iter().flatten().copied().max().unwrap_or(1).max(1) as f64;
                let (cw, ch) = (PANEL / nx as f64, PANEL / ny as f64);
                for (iy, row) in h.counts.iter().enumerate() {
                    for (ix, &c) in row.iter().enumerate() {
                        if c == 0 {
                            continue;
                        }
                        let _ = writeln!(
                            svg,
                            r#"<rect x="{:.2}" y="{:.2}" width="{cw:.2}" height="{ch:.2}" fill="steelblue" fill-opacity="{:.4}"/>"#,
                            x0 + ix as f64 * cw,
                            y0 + PANEL - (iy + 1) as f64 * ch,
                            c as f64 / max
                        );
                    }
                }
                let _ = writeln!(svg, "</g>");
            }
        }
    }
    // axis labels: bottom row for every column, left column for rows > 0
    let ranges: Vec<(f64, f64)> = (0..m)
        .map(|i| {
            panels
                .iter()
                .find_map(|p| match p {
                    Panel::Marginal(h) if h.param == i => Some((h.lo, h.hi)),
                    _ => None,
                })
                .unwrap_or((0.0, 1.0))
        })
        .collect();
    for col in 0..m {
        let (x0, y0) = origin(m - 1, col);
        let yb = y0 + PANEL;
        let _ = writeln!(
            svg,
            r#"<text class="tick" x="{x0:.2}" y="{:.2}" text-anchor="start">{}</text>"#,
            yb + 14.0,
            tick(ranges[col].0)
        );
        let _ = writeln!(
            svg,
            r#"<text class="tick" x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 + PANEL,
            yb + 14.0,
            tick(ranges[col].1)
        );
        let _ = writeln!(
            svg,
            r#"<text class="axis-label" x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            x0 + PANEL / 2.0,
            yb + 34.0,
            axis_label(&names[col], unit(col))
        );
    }
    for (row, name) in names.iter().enumerate().skip(1) {
        let (x0, y0) = origin(row, 0);
        let _ = writeln!(
            svg,
            r#"<text class="axis-label" x="{:.2}" y="{:.2}" text-anchor="middle" transform="rotate(-90 {:.2} {:.2})">{}</text>"#,
            x0 - 40.0,
            y0 + PANEL / 2.0,
            x0 - 40.0,
            y0 + PANEL / 2.0,
            axis_label(name, unit(row))
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Options for [`line_plot`].
#[derive(Debug, Clone)]
pub struct LinePlot<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub log_y: bool,
}

/// A single-series line plot, optionally with markers for measured points.
pub fn line_plot(opts: &LinePlot<'_>, x: &[f64], y: &[f64], points: Option<(&[f64], &[f64])>) -> String {
    let (w, h) = (560.0, 380.0);
    let (left, right, top, bottom) = (75.0, 20.0, 35.0, 50.0);
    let ty = |v: f64| if opts.log_y { v.max(1e-300).log10() } else { v };
    let all_y = y.iter().chain(points.map_or(&[][..], |p| p.1)).map(|&v| ty(v));
    let all_x = x.iter().chain(points.map_or(&[][..], |p| p.0)).copied();
    let (xmin, xmax) = range_of(&all_x.collect::<Vec<_>>());
    let (ymin, ymax) = range_of(&all_y.collect::<Vec<_>>());
    let px = |v: f64| left + (v - xmin) / (xmax - xmin) * (w - left - right);
    let py = |v: f64| top + (1.0 - (ty(v) - ymin) / (ymax - ymin)) * (h - top - bottom);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - left - right,
        h - top - bottom
    );
    let _ = writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, w / 2.0, escape(opts.title));
    let mut path = String::new();
    for (i, (&xv, &yv)) in x.iter().zip(y).enumerate() {
        let _ = write!(path, "{}{:.2},{:.2} ", if i == 0 { "M" } else { "L" }, px(xv), py(yv));
    }
    let _ = writeln!(
        svg,
        r#"<path class="curve" d="{}" fill="none" stroke="steelblue" stroke-width="1.5"/>"#,
        path.trim_end()
    );
    if let Some((qx, qy)) = points {
        for (&xv, &yv) in qx.iter().zip(qy) {
            let _ = writeln!(
                svg,
                r#"<circle class="point" cx="{:.2}" cy="{:.2}" r="2" fill="darkorange"/>"#,
                px(xv),
                py(yv)
            );
        }
    }
    let fmt_y = |v: f64| if opts.log_y { format!("1e{v:.1}") } else { tick(v) };
    let _ = writeln!(svg, r#"<text x="{left}" y="{}" text-anchor="start">{}</text>"#, h - bottom + 15.0, tick(xmin));
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, w - right, h - bottom + 15.0, tick(xmax));
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, left - 4.0, h - bottom, fmt_y(ymin));
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, left - 4.0, top + 10.0, fmt_y(ymax));
    let _ = writeln!(
        svg,
        r#"<text class="axis-label" x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (left + w - right) / 2.0,
        h - 12.0,
        escape(opts.x_label)
    );
    let cy = (top + h - bottom) / 2.0;
    let _ = writeln!(
        svg,
        r#"<text class="axis-label" x="18" y="{cy}" text-anchor="middle" transform="rotate(-90 18 {cy})">{}</text>"#,
        escape(opts.y_label)
    );
    svg.push_str("</svg>\n");
    svg
}
