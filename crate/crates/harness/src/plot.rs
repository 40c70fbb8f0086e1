//! Minimal SVG line charts: one panel per metric, raw series faint and the
//! smoothed series bold.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};

const PANEL_W: f64 = 360.0;
const PANEL_H: f64 = 260.0;
const MARGIN_L: f64 = 58.0;
const MARGIN_R: f64 = 14.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 40.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub raw: Vec<f64>,
    pub smooth: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub title: String,
    pub x: Vec<f64>,
    pub series: Vec<Series>,
}

fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

/// `[lo, hi]` padded so that constant series still get a visible band.
fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let pad = lo.abs().max(1.0) * 0.05;
        return (lo - pad, hi + pad);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

fn polyline(out: &mut String, xs: &[f64], ys: &[f64], map: &dyn Fn(f64, f64) -> (f64, f64), style: &str) {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(_, y)| y.is_finite())
        .map(|(&x, &y)| map(x, y))
        .collect();
    match pts.len() {
        0 => {}
        1 => {
            let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="3" {style}/>"#, pts[0].0, pts[0].1);
        }
        _ => {
            let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = writeln!(out, r#"<polyline fill="none" points="{}" {style}/>"#, coords.join(" "));
        }
    }
}

fn panel(out: &mut String, p: &Panel, ox: f64) {
    let (x0, x1) = range(p.x.iter().copied());
    let (y0, y1) = range(p.series.iter().flat_map(|s| s.raw.iter().chain(&s.smooth)).copied());
    let (pl, pr) = (ox + MARGIN_L, ox + PANEL_W - MARGIN_R);
    let (pt, pb) = (MARGIN_T, PANEL_H - MARGIN_B);
    let map = |x: f64, y: f64| {
        (
            pl + (x - x0) / (x1 - x0) * (pr - pl),
            pb - (y - y0) / (y1 - y0) * (pb - pt),
        )
    };
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="18" text-anchor="middle" font-size="14" font-weight="bold">{}</text>"#,
        (pl + pr) / 2.0,
        p.title
    );
    let _ = writeln!(
        out,
        r##"<rect x="{pl:.1}" y="{pt:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#444"/>"##,
        pr - pl,
        pb - pt
    );
    for (v, y) in [(y1, pt), (y0, pb)] {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="10">{}</text>"#,
            pl - 4.0,
            y + 4.0,
            fmt_num(v)
        );
    }
    for (v, x) in [(x0, pl), (x1, pr)] {
        let _ = writeln!(
            out,
            r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle" font-size="10">{}</text>"#,
            pb + 14.0,
            fmt_num(v)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11">epoch</text>"#,
        (pl + pr) / 2.0,
        pb + 30.0
    );
    for (i, s) in p.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        polyline(out, &p.x, &s.raw, &map, &format!(r#"stroke="{color}" fill="{color}" stroke-width="1" opacity="0.3""#));
        polyline(out, &p.x, &s.smooth, &map, &format!(r#"stroke="{color}" fill="{color}" stroke-width="2.5""#));
    }
}

pub fn render(panels: &[Panel]) -> String {
    let labels: Vec<&str> = panels
        .first()
        .map(|p| p.series.iter().map(|s| s.label.as_str()).collect())
        .unwrap_or_default();
    let legend_h = if labels.len() > 1 { 22.0 } else { 0.0 };
    let width = PANEL_W * panels.len().max(1) as f64;
    let height = PANEL_H + legend_h;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, p) in panels.iter().enumerate() {
        panel(&mut out, p, i as f64 * PANEL_W);
    }
    if legend_h > 0.0 {
        for (i, l) in labels.iter().enumerate() {
            let x = MARGIN_L + i as f64 * 130.0;
            let y = PANEL_H + 10.0;
            let color = PALETTE[i % PALETTE.len()];
            let _ = writeln!(
                out,
                r#"<line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="{color}" stroke-width="2.5"/><text x="{:.1}" y="{:.1}" font-size="11">{l}</text>"#,
                x + 20.0,
                x + 25.0,
                y + 4.0
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// The three panels of a metrics CSV (`epoch, reward_raw, reward_smooth, ...`).
pub fn panels_from_csv(path: &Path, label: &str) -> Result<Vec<Panel>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .with_context(|| format!("{} has no column {name}", path.display()))
    };
    let metrics = [("Reward", "reward"), ("Fréchet Distance", "frechet"), ("MSE", "mse")];
    let epoch = col("epoch")?;
    let cols: Vec<(usize, usize)> = metrics
        .iter()
        .map(|(_, k)| Ok((col(&format!("{k}_raw"))?, col(&format!("{k}_smooth"))?)))
        .collect::<Result<_>>()?;
    let mut x = Vec::new();
    let mut data = vec![(Vec::new(), Vec::new()); metrics.len()];
    for row in reader.records() {
        let row = row?;
        let num = |i: usize| -> Result<f64> {
            row.get(i)
                .context("short row")?
                .parse::<f64>()
                .with_context(|| format!("bad number in {}", path.display()))
        };
        x.push(num(epoch)?);
        for (d, &(r, s)) in data.iter_mut().zip(&cols) {
            d.0.push(num(r)?);
            d.1.push(num(s)?);
        }
    }
    if x.is_empty() {
        bail!("{} has no rows", path.display());
    }
    Ok(metrics
        .iter()
        .zip(data)
        .map(|((title, _), (raw, smooth))| Panel {
            title: title.to_string(),
            x: x.clone(),
            series: vec![Series {
                label: label.to_string(),
                raw,
                smooth,
            }],
        })
        .collect())
}

/// Overlay several single-series panel sets (same metrics, same x) into one.
pub fn overlay(sets: Vec<Vec<Panel>>) -> Vec<Panel> {
    let mut iter = sets.into_iter();
    let Some(mut base) = iter.next() else {
        return Vec::new();
    };
    for set in iter {
        for (b, p) in base.iter_mut().zip(set) {
            b.series.extend(p.series);
        }
    }
    base
}
