//! Minimal self-contained SVG renderer for log-log rate plots. Output is a
//! pure function of the inputs (fixed canvas, fixed palette, fixed number
//! formatting), so plots are byte-identical across runs unless a timestamp is
//! explicitly supplied.

use crate::fit::SlopeFit;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 614.0;
const TOP: f64 = 46.0;
const BOTTOM: f64 = 368.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// One plotted error curve; `slope` adds a dashed fitted power law
/// `y = e^intercept · x^slope` over the curve's x-range.
pub struct Series<'a> {
    pub label: &'a str,
    pub xs: &'a [f64],
    pub ys: &'a [f64],
    pub slope: Option<&'a SlopeFit>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct LogAxis {
    e0: f64,
    e1: f64,
    lo_px: f64,
    hi_px: f64,
}

impl LogAxis {
    fn new(values: impl Iterator<Item = f64>, lo_px: f64, hi_px: f64) -> LogAxis {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for v in values {
            if v.is_finite() && v > 0.0 {
                min = min.min(v);
                max = max.max(v);
            }
        }
        if !min.is_finite() {
            min = 1e-1;
            max = 1.0;
        }
        let mut e0 = min.log10().floor();
        let mut e1 = max.log10().ceil();
        if e1 - e0 < 1.0 {
            e0 -= 0.5;
            e1 += 0.5;
        }
        LogAxis { e0, e1, lo_px, hi_px }
    }

    fn project(&self, v: f64) -> f64 {
        let t = (v.log10() - self.e0) / (self.e1 - self.e0);
        self.lo_px + t * (self.hi_px - self.lo_px)
    }

    fn decades(&self) -> Vec<i32> {
        let a = self.e0.ceil() as i32;
        let b = self.e1.floor() as i32;
        (a..=b).collect()
    }
}

fn fmt_px(v: f64) -> String {
    format!("{v:.1}")
}

fn tick_label(e: i32) -> String {
    format!("1e{e}")
}

/// Render a log-log plot of the given series. `timestamp`, when present, is
/// printed in the bottom-right corner; passing `None` keeps the output a pure
/// function of the data.
pub fn log_log_plot(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    timestamp: Option<&str>,
) -> String {
    let xaxis = LogAxis::new(series.iter().flat_map(|s| s.xs.iter().copied()), LEFT, RIGHT);
    let yaxis = LogAxis::new(series.iter().flat_map(|s| s.ys.iter().copied()), BOTTOM, TOP);

    let mut out = String::new();
    out.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"monospace\" font-size=\"12\">\n"
    ));
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    out.push_str(&format!(
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        fmt_px((LEFT + RIGHT) / 2.0),
        esc(title)
    ));

    // Grid and ticks.
    for e in xaxis.decades() {
        let px = fmt_px(xaxis.project(10f64.powi(e)));
        out.push_str(&format!(
            "<line x1=\"{px}\" y1=\"{}\" x2=\"{px}\" y2=\"{}\" stroke=\"#dddddd\"/>\n",
            fmt_px(TOP),
            fmt_px(BOTTOM)
        ));
        out.push_str(&format!(
            "<text x=\"{px}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            fmt_px(BOTTOM + 18.0),
            tick_label(e)
        ));
    }
    for e in yaxis.decades() {
        let py = fmt_px(yaxis.project(10f64.powi(e)));
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{py}\" x2=\"{}\" y2=\"{py}\" stroke=\"#dddddd\"/>\n",
            fmt_px(LEFT),
            fmt_px(RIGHT)
        ));
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            fmt_px(LEFT - 8.0),
            fmt_px(yaxis.project(10f64.powi(e)) + 4.0),
            tick_label(e)
        ));
    }
    out.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
        fmt_px(LEFT),
        fmt_px(TOP),
        fmt_px(RIGHT - LEFT),
        fmt_px(BOTTOM - TOP)
    ));
    out.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        fmt_px((LEFT + RIGHT) / 2.0),
        fmt_px(HEIGHT - 8.0),
        esc(x_label)
    ));
    out.push_str(&format!(
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>\n",
        fmt_px((TOP + BOTTOM) / 2.0),
        fmt_px((TOP + BOTTOM) / 2.0),
        esc(y_label)
    ));

    // Series: dashed fitted power law underneath, then the data polyline.
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if let (Some(fit), Some(x_min), Some(x_max)) = (
            s.slope,
            s.xs.iter().copied().reduce(f64::min),
            s.xs.iter().copied().reduce(f64::max),
        ) {
            let y_at = |x: f64| (fit.intercept + fit.slope * x.ln()).exp();
            out.push_str(&format!(
                "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{color}\" \
                 stroke-dasharray=\"6 4\" opacity=\"0.7\"/>\n",
                fmt_px(xaxis.project(x_min)),
                fmt_px(yaxis.project(y_at(x_min))),
                fmt_px(xaxis.project(x_max)),
                fmt_px(yaxis.project(y_at(x_max)))
            ));
        }
        let pts: Vec<String> = s
            .xs
            .iter()
            .zip(s.ys)
            .filter(|(x, y)| **x > 0.0 && **y > 0.0)
            .map(|(x, y)| format!("{},{}", fmt_px(xaxis.project(*x)), fmt_px(yaxis.project(*y))))
            .collect();
        out.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            pts.join(" ")
        ));
        for p in &pts {
            let (px, py) = p.split_once(',').unwrap();
            out.push_str(&format!(
                "<circle cx=\"{px}\" cy=\"{py}\" r=\"3\" fill=\"{color}\"/>\n"
            ));
        }
        // Legend entry.
        let ly = TOP + 16.0 + 18.0 * i as f64;
        out.push_str(&format!(
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{color}\" stroke-width=\"3\"/>\n",
            fmt_px(LEFT + 12.0),
            fmt_px(ly - 4.0),
            fmt_px(LEFT + 34.0),
            fmt_px(ly - 4.0)
        ));
        let label = match s.slope {
            Some(fit) => format!("{} (slope {:.2})", s.label, fit.slope),
            None => s.label.to_string(),
        };
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\">{}</text>\n",
            fmt_px(LEFT + 40.0),
            fmt_px(ly),
            esc(&label)
        ));
    }

    if let Some(ts) = timestamp {
        out.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" fill=\"#888888\" font-size=\"10\">{}</text>\n",
            fmt_px(RIGHT),
            fmt_px(HEIGHT - 8.0),
            esc(ts)
        ));
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::fit_slope;

    #[test]
    fn plot_is_deterministic_and_well_formed() {
        let xs = [0.125, 0.25, 0.5, 1.0];
        let ys = [1e-3, 4e-3, 1.6e-2, 6.4e-2];
        let fit = fit_slope(&xs, &ys).unwrap();
        let series = [Series { label: "strong h", xs: &xs, ys: &ys, slope: Some(&fit) }];
        let a = log_log_plot("rates", "h", "error", &series, None);
        let b = log_log_plot("rates", "h", "error", &series, None);
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.ends_with("</svg>\n"));
        assert!(a.contains("slope 2.00"));
        assert!(!a.contains("NaN"));
    }

    #[test]
    fn timestamp_is_the_only_difference() {
        let xs = [0.1, 0.2, 0.4, 0.8];
        let ys = [1.0, 2.0, 4.0, 8.0];
        let series = [Series { label: "s", xs: &xs, ys: &ys, slope: None }];
        let plain = log_log_plot("t", "x", "y", &series, None);
        let stamped = log_log_plot("t", "x", "y", &series, Some("2024-01-01T00:00:00Z"));
        assert_ne!(plain, stamped);
        assert!(stamped.contains("2024-01-01T00:00:00Z"));
        assert!(stamped.replace("<text x=\"614.0\" y=\"432.0\" text-anchor=\"end\" fill=\"#888888\" font-size=\"10\">2024-01-01T00:00:00Z</text>\n", "") == plain);
    }
}
