//! Minimal SVG emission for rate-vs-threshold and precision-recall curves.

use crate::detector::PrPoint;
use crate::error::{Error, Result};
use crate::scoring::DetCurve;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f6fb2", "#c23b22", "#2e8540", "#8e5ba6", "#b8860b", "#3b3b3b"];

/// One named polyline.
#[derive(Debug, Clone)]
pub struct PlotSeries {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders series as an SVG line chart with axes and a legend.
pub fn emit_plot(title: &str, x_label: &str, y_label: &str, series: &[PlotSeries]) -> Result<String> {
    if series.is_empty() || series.iter().any(|s| s.points.is_empty()) {
        return Err(Error::Data("plot needs at least one nonempty series".into()));
    }
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::Data("plot points must be finite".into()));
        }
        x_min = x_min.min(x);
        x_max = x_max.max(x);
        y_min = y_min.min(y);
        y_max = y_max.max(y);
    }
    if x_max == x_min {
        x_min -= 0.5;
        x_max += 0.5;
    }
    if y_max == y_min {
        y_min -= 0.5;
        y_max += 0.5;
    }
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let px = |x: f64| MARGIN + (x - x_min) / (x_max - x_min) * plot_w;
    let py = |y: f64| MARGIN + (1.0 - (y - y_min) / (y_max - y_min)) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
        WIDTH / 2.0,
        escape_xml(title)
    ));
    // Axes.
    svg.push_str(&format!(
        "  <line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    ));
    svg.push_str(&format!(
        "  <line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
        m = MARGIN,
        b = HEIGHT - MARGIN
    ));
    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\">{}</text>\n",
        WIDTH / 2.0,
        HEIGHT - 12.0,
        escape_xml(x_label)
    ));
    svg.push_str(&format!(
        "  <text x=\"16\" y=\"{}\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape_xml(y_label)
    ));
    // Extremal tick labels.
    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\" font-size=\"10\">{:.3}</text>\n",
        MARGIN,
        HEIGHT - MARGIN + 14.0,
        x_min
    ));
    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"10\">{:.3}</text>\n",
        WIDTH - MARGIN,
        HEIGHT - MARGIN + 14.0,
        x_max
    ));
    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"10\">{:.3}</text>\n",
        MARGIN - 6.0,
        HEIGHT - MARGIN,
        y_min
    ));
    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"10\">{:.3}</text>\n",
        MARGIN - 6.0,
        MARGIN + 4.0,
        y_max
    ));

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
            .collect();
        svg.push_str(&format!(
            "  <polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            points.join(" ")
        ));
        let ly = MARGIN + 16.0 * i as f64;
        svg.push_str(&format!(
            "  <line x1=\"{x}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            WIDTH - MARGIN - 12.0,
            x = WIDTH - MARGIN - 36.0,
        ));
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"11\">{}</text>\n",
            WIDTH - MARGIN - 42.0,
            ly + 4.0,
            escape_xml(&s.name)
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// FAR and FRR vs threshold, one pair of series per named curve.
pub fn det_plot(curves: &[(String, DetCurve)]) -> Result<String> {
    let mut series = Vec::with_capacity(curves.len() * 2);
    for (name, curve) in curves {
        series.push(PlotSeries {
            name: format!("{name} FAR"),
            points: curve.points.iter().map(|p| (p.threshold, p.far)).collect(),
        });
        series.push(PlotSeries {
            name: format!("{name} FRR"),
            points: curve.points.iter().map(|p| (p.threshold, p.frr)).collect(),
        });
    }
    emit_plot("FAR/FRR vs threshold", "threshold", "rate", &series)
}

/// Precision vs recall.
pub fn pr_plot(points: &[PrPoint]) -> Result<String> {
    emit_plot(
        "Precision-Recall",
        "recall",
        "precision",
        &[PlotSeries {
            name: "detector".into(),
            points: points.iter().map(|p| (p.recall, p.precision)).collect(),
        }],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn polyline_count(svg: &str) -> usize {
        svg.matches("<polyline").count()
    }

    #[test]
    fn one_polyline_per_series() {
        let svg = emit_plot(
            "t",
            "x",
            "y",
            &[
                PlotSeries {
                    name: "a".into(),
                    points: vec![(0.0, 0.0), (1.0, 1.0)],
                },
                PlotSeries {
                    name: "b".into(),
                    points: vec![(0.0, 1.0), (1.0, 0.0)],
                },
            ],
        )
        .unwrap();
        assert_eq!(polyline_count(&svg), 2);
    }

    #[test]
    fn empty_series_rejected() {
        assert!(emit_plot("t", "x", "y", &[]).is_err());
        assert!(emit_plot(
            "t",
            "x",
            "y",
            &[PlotSeries {
                name: "a".into(),
                points: vec![],
            }]
        )
        .is_err());
    }

    #[test]
    fn escapes_markup_in_labels() {
        let svg = emit_plot(
            "a<b>&\"c\"",
            "x",
            "y",
            &[PlotSeries {
                name: "s".into(),
                points: vec![(0.0, 0.0), (1.0, 1.0)],
            }],
        )
        .unwrap();
        assert!(svg.contains("a&lt;b&gt;&amp;&quot;c&quot;"));
        assert!(!svg.contains("a<b>"));
    }
}
