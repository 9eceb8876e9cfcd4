use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::MetricsRow;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum XAxis {
    Iteration,
    UsvCount,
    UavCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum YAxis {
    Reward,
    Delay,
}

impl XAxis {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "iteration" => Ok(Self::Iteration),
            "usv-count" => Ok(Self::UsvCount),
            "uav-count" => Ok(Self::UavCount),
            _ => Err(Error::config("x", format!("unknown axis `{s}` (iteration, usv-count, uav-count)"))),
        }
    }

    fn label(self) -> &'static str {
        match self {
            Self::Iteration => "iteration",
            Self::UsvCount => "number of USVs",
            Self::UavCount => "number of UAVs",
        }
    }
}

impl YAxis {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "reward" => Ok(Self::Reward),
            "delay" => Ok(Self::Delay),
            _ => Err(Error::config("y", format!("unknown axis `{s}` (reward, delay)"))),
        }
    }

    fn label(self) -> &'static str {
        match self {
            Self::Reward => "mean reward",
            Self::Delay => "mean delay (s)",
        }
    }
}

/// Axes plus optional scenario filters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlotSpec {
    pub x: XAxis,
    pub y: YAxis,
    pub usvs: Option<usize>,
    pub uavs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub x: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub variant: String,
    pub points: Vec<Point>,
}

fn y_of(r: &MetricsRow, y: YAxis) -> f64 {
    match y {
        YAxis::Reward => r.mean_reward,
        YAxis::Delay => r.mean_delay_s,
    }
}

/// Mean and min-max over seeds, one series per variant in name order.
/// Count axes use each run's last iteration.
pub fn aggregate(rows: &[MetricsRow], spec: &PlotSpec) -> Result<Vec<Series>> {
    let kept: Vec<&MetricsRow> = rows
        .iter()
        .filter(|r| spec.usvs.is_none_or(|n| r.usvs == n) && spec.uavs.is_none_or(|n| r.uavs == n))
        .collect();
    let selected: Vec<&MetricsRow> = match spec.x {
        XAxis::Iteration => kept,
        XAxis::UsvCount | XAxis::UavCount => {
            let mut last: BTreeMap<(&str, usize, usize, usize, u64), &MetricsRow> = BTreeMap::new();
            for r in kept {
                let key = (r.variant.as_str(), r.usvs, r.uavs, r.gss, r.seed);
                if last.get(&key).is_none_or(|p| r.iteration >= p.iteration) {
                    last.insert(key, r);
                }
            }
            last.into_values().collect()
        }
    };
    if selected.is_empty() {
        return Err(Error::Empty("no metrics rows match the plot selection".into()));
    }
    let mut groups: BTreeMap<&str, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for r in selected {
        let x = match spec.x {
            XAxis::Iteration => r.iteration,
            XAxis::UsvCount => r.usvs,
            XAxis::UavCount => r.uavs,
        };
        groups.entry(r.variant.as_str()).or_default().entry(x).or_default().push(y_of(r, spec.y));
    }
    Ok(groups
        .into_iter()
        .map(|(v, pts)| Series {
            variant: v.to_string(),
            points: pts
                .into_iter()
                .map(|(x, ys)| Point {
                    x: x as f64,
                    mean: ys.iter().sum::<f64>() / ys.len() as f64,
                    min: ys.iter().cloned().fold(f64::INFINITY, f64::min),
                    max: ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                })
                .collect(),
        })
        .collect())
}

const PALETTE: [&str; 8] =
    ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];
const W: f64 = 720.0;
const H: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 20.0;
const BOTTOM: f64 = 50.0;

fn tick_label(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-2..1e4).contains(&a) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.3}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" { "0".into() } else { s.to_string() }
    }
}

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
    if hi > lo {
        (lo, hi)
    } else {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        (lo - pad, hi + pad)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Self-contained SVG; identical input gives identical bytes.
pub fn render_svg(series: &[Series], spec: &PlotSpec) -> String {
    let pts = || series.iter().flat_map(|s| s.points.iter());
    let (x0, x1) = range(pts().map(|p| p.x));
    let (y0, y1) = range(pts().flat_map(|p| [p.min, p.max]));
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{LEFT:.2},{TOP:.2}V{:.2}H{:.2}" fill="none" stroke="black"/>"#,
        TOP + ph,
        LEFT + pw
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(
            s,
            r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 18.0,
            tick_label(xv)
        );
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{LEFT:.2}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            py + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        H - 10.0,
        spec.x.label()
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        spec.y.label()
    );
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if ser.points.len() > 1 {
            let upper = ser.points.iter().map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.max)));
            let lower = ser.points.iter().rev().map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.min)));
            let band: Vec<String> = upper.chain(lower).collect();
            let _ = writeln!(s, r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, band.join(" "));
        }
        let line: Vec<String> = ser.points.iter().map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.mean))).collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            line.join(" ")
        );
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = LEFT + pw + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&ser.variant)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Read a metrics CSV and write the SVG to `out`.
pub fn emit_plot(metrics: &Path, spec: &PlotSpec, out: &Path) -> Result<()> {
    let rows = super::metrics::read_metrics(metrics)?;
    let series = aggregate(&rows, spec)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(out, render_svg(&series, spec))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(variant: &str, seed: u64, it: usize, reward: f64) -> MetricsRow {
        MetricsRow {
            variant: variant.into(),
            usvs: 6,
            uavs: 4,
            gss: 2,
            seed,
            iteration: it,
            mean_reward: reward,
            mean_delay_s: 1.0,
            wall_clock_s: 0.0,
        }
    }

    const BY_IT: PlotSpec = PlotSpec { x: XAxis::Iteration, y: YAxis::Reward, usvs: None, uavs: None };

    #[test]
    fn single_row_single_point() {
        let s = aggregate(&[r("happo", 0, 1, 3.0)], &BY_IT).unwrap();
        let svg = render_svg(&s, &BY_IT);
        let line = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        let pts = line.split('"').nth(1).unwrap();
        assert_eq!(pts.split(' ').count(), 1);
    }

    #[test]
    fn legend_is_sorted_and_means_are_hand_averages() {
        let rows = vec![
            r("transformer-happo", 0, 1, 1.0),
            r("happo", 0, 1, 2.0),
            r("happo", 1, 1, 4.0),
            r("happo", 2, 1, 9.0),
            r("gai-happo", 0, 1, 1.0),
        ];
        let s = aggregate(&rows, &BY_IT).unwrap();
        let names: Vec<&str> = s.iter().map(|x| x.variant.as_str()).collect();
        assert_eq!(names, vec!["gai-happo", "happo", "transformer-happo"]);
        assert_eq!(s[1].points[0], Point { x: 1.0, mean: 5.0, min: 2.0, max: 9.0 });
        assert_eq!(render_svg(&s, &BY_IT), render_svg(&aggregate(&rows, &BY_IT).unwrap(), &BY_IT));
    }

    #[test]
    fn count_axes_use_the_last_iteration() {
        let mut rows = vec![r("happo", 0, 1, 100.0), r("happo", 0, 2, 5.0)];
        rows.push(MetricsRow { usvs: 4, ..r("happo", 0, 2, 7.0) });
        let spec = PlotSpec { x: XAxis::UsvCount, y: YAxis::Reward, usvs: None, uavs: Some(4) };
        let s = aggregate(&rows, &spec).unwrap();
        let pts: Vec<(f64, f64)> = s[0].points.iter().map(|p| (p.x, p.mean)).collect();
        assert_eq!(pts, vec![(4.0, 7.0), (6.0, 5.0)]);
        let none = PlotSpec { uavs: Some(9), ..spec };
        assert!(aggregate(&rows, &none).is_err());
    }
}
