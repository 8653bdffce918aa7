//! Minimal self-contained SVG rendering of a chart trajectory: one polyline
//! for the statistic, a path for the recorded control limit, and a circle
//! marking the first signal. Output is byte-stable for a fixed input.

use std::path::Path;

use sns_core::chart::ChartPoint;

use crate::commands::CliError;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

pub fn write_svg(points: &[ChartPoint], path: &Path) -> Result<(), CliError> {
    let svg = render_svg(points)?;
    std::fs::write(path, svg)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

pub fn render_svg(points: &[ChartPoint]) -> Result<String, CliError> {
    if points.is_empty() {
        return Err(CliError::Data("plot: empty statistic path".into()));
    }

    let x_min = points.first().unwrap().step as f64;
    let x_max = points.last().unwrap().step as f64;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for p in points {
        y_min = y_min.min(p.value).min(p.limit);
        y_max = y_max.max(p.value).max(p.limit);
    }
    if y_min == y_max {
        y_min -= 1.0;
        y_max += 1.0;
    }
    let pad = 0.05 * (y_max - y_min);
    let (y_min, y_max) = (y_min - pad, y_max + pad);

    let sx = |step: f64| -> f64 {
        if x_max == x_min {
            0.5 * WIDTH
        } else {
            MARGIN + (step - x_min) / (x_max - x_min) * (WIDTH - 2.0 * MARGIN)
        }
    };
    let sy = |v: f64| -> f64 { HEIGHT - MARGIN - (v - y_min) / (y_max - y_min) * (HEIGHT - 2.0 * MARGIN) };

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    // axes
    s.push_str(&format!(
        "  <line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#444\" stroke-width=\"1\"/>\n",
        MARGIN, HEIGHT - MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN
    ));
    s.push_str(&format!(
        "  <line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#444\" stroke-width=\"1\"/>\n",
        MARGIN, MARGIN, MARGIN, HEIGHT - MARGIN
    ));

    // control limit as a path (may vary with time)
    let mut d = String::new();
    for (i, p) in points.iter().enumerate() {
        let cmd = if i == 0 { 'M' } else { 'L' };
        d.push_str(&format!("{cmd}{:.2} {:.2} ", sx(p.step as f64), sy(p.limit)));
    }
    s.push_str(&format!(
        "  <path d=\"{}\" fill=\"none\" stroke=\"#c33\" stroke-width=\"1\" stroke-dasharray=\"5 3\"/>\n",
        d.trim_end()
    ));

    // the statistic
    let verts: Vec<String> = points
        .iter()
        .map(|p| format!("{:.2},{:.2}", sx(p.step as f64), sy(p.value)))
        .collect();
    s.push_str(&format!(
        "  <polyline points=\"{}\" fill=\"none\" stroke=\"#06c\" stroke-width=\"1.5\"/>\n",
        verts.join(" ")
    ));

    // first signal marker
    if let Some(p) = points.iter().find(|p| p.signal) {
        s.push_str(&format!(
            "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"#c33\"/>\n",
            sx(p.step as f64),
            sy(p.value)
        ));
    }
    s.push_str("</svg>\n");
    Ok(s)
}
