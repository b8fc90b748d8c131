//! Static SVG plots. Each plot is written next to a CSV holding exactly the
//! values drawn, so figures can be checked numerically.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aggregate::Quartiles;
use crate::formats::{write_atomic, Table};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    /// One parametric curve `(x_t, y_t)`.
    Trajectory2d,
    /// One or more curves against a shared abscissa.
    Series,
    /// Box and whiskers per group.
    Boxplot,
}

impl FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "trajectory2d" => Ok(PlotKind::Trajectory2d),
            "series" => Ok(PlotKind::Series),
            "boxplot" => Ok(PlotKind::Boxplot),
            _ => Err(Error::Data(format!("unknown plot kind {s:?}"))),
        }
    }
}

/// What to draw.
#[derive(Debug, Clone, PartialEq)]
pub enum PlotData {
    Trajectory2d {
        x_label: String,
        y_label: String,
        points: Vec<(f64, f64)>,
    },
    Series {
        x_label: String,
        x: Vec<f64>,
        curves: Vec<(String, Vec<f64>)>,
    },
    Boxplot {
        label: String,
        groups: Vec<(String, Quartiles)>,
    },
}

impl PlotData {
    pub fn kind(&self) -> PlotKind {
        match self {
            PlotData::Trajectory2d { .. } => PlotKind::Trajectory2d,
            PlotData::Series { .. } => PlotKind::Series,
            PlotData::Boxplot { .. } => PlotKind::Boxplot,
        }
    }

    fn check(&self) -> Result<(), Error> {
        let empty = match self {
            PlotData::Trajectory2d { points, .. } => points.is_empty(),
            PlotData::Series { x, curves, .. } => {
                if curves.iter().any(|(_, c)| c.len() != x.len()) {
                    return Err(Error::Data("series lengths differ from the abscissa".into()));
                }
                x.is_empty() || curves.is_empty()
            }
            PlotData::Boxplot { groups, .. } => groups.is_empty(),
        };
        if empty {
            Err(Error::Data("nothing to plot".into()))
        } else {
            Ok(())
        }
    }

    /// The plotted values as a table.
    pub fn table(&self) -> Table {
        match self {
            PlotData::Trajectory2d {
                x_label,
                y_label,
                points,
            } => {
                let mut t = Table::new([x_label.as_str(), y_label.as_str()]);
                for &(x, y) in points {
                    t.push(vec![Some(x), Some(y)]);
                }
                t
            }
            PlotData::Series { x_label, x, curves } => {
                let mut t = Table::new(std::iter::once(x_label.clone()).chain(curves.iter().map(|(n, _)| n.clone())));
                for (k, xv) in x.iter().enumerate() {
                    let mut row = vec![Some(*xv)];
                    row.extend(curves.iter().map(|(_, c)| Some(c[k])));
                    t.push(row);
                }
                t
            }
            PlotData::Boxplot { groups, .. } => {
                let mut t = Table::new(["group", "min", "q1", "median", "q3", "max"]);
                for (k, (_, q)) in groups.iter().enumerate() {
                    t.push(vec![
                        Some(k as f64),
                        Some(q.min),
                        Some(q.q1),
                        Some(q.median),
                        Some(q.q3),
                        Some(q.max),
                    ]);
                }
                t
            }
        }
    }
}

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Linear map from data bounds to the drawing area; flat ranges are padded.
struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let (x0, x1) = bounds(xs);
        let (y0, y1) = bounds(ys);
        Frame { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0) * (W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        H - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (H - 2.0 * MARGIN)
    }

    fn axes(&self, svg: &mut String, x_label: &str, y_label: &str) {
        let (l, r, t, b) = (MARGIN, W - MARGIN, MARGIN, H - MARGIN);
        let _ = writeln!(
            svg,
            r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#,
            r - l,
            b - t
        );
        for (v, x) in [(self.x0, l), (self.x1, r)] {
            let _ = writeln!(
                svg,
                r#"<text x="{x}" y="{}" font-size="11" text-anchor="middle">{}</text>"#,
                b + 16.0,
                tick(v)
            );
        }
        for (v, y) in [(self.y0, b), (self.y1, t)] {
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{}</text>"#,
                l - 4.0,
                y + 4.0,
                tick(v)
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">{}</text>"#,
            W / 2.0,
            H - 16.0,
            escape(x_label)
        );
        let _ = writeln!(
            svg,
            r#"<text x="16" y="{}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
            H / 2.0,
            H / 2.0,
            escape(y_label)
        );
    }
}

fn tick(v: f64) -> String {
    format!("{v:.4}")
}

fn bounds(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    let pad = if hi > lo {
        0.05 * (hi - lo)
    } else {
        lo.abs().max(1.0) * 0.5
    };
    (lo - pad, hi + pad)
}

fn polyline(svg: &mut String, frame: &Frame, pts: impl Iterator<Item = (f64, f64)>, color: &str) {
    let coords: Vec<String> = pts
        .filter(|(x, y)| x.is_finite() && y.is_finite())
        .map(|(x, y)| format!("{:.3},{:.3}", frame.px(x), frame.py(y)))
        .collect();
    let _ = writeln!(
        svg,
        r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
        coords.join(" ")
    );
}

/// The SVG document for `data`.
pub fn render_svg(data: &PlotData) -> Result<String, Error> {
    data.check()?;
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    match data {
        PlotData::Trajectory2d {
            x_label,
            y_label,
            points,
        } => {
            let frame = Frame::new(points.iter().map(|p| p.0), points.iter().map(|p| p.1));
            frame.axes(&mut svg, x_label, y_label);
            polyline(&mut svg, &frame, points.iter().copied(), COLORS[0]);
            let (sx, sy) = points[0];
            let (ex, ey) = points[points.len() - 1];
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.3}" cy="{:.3}" r="3" fill="{}"/>"#,
                frame.px(sx),
                frame.py(sy),
                COLORS[2]
            );
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.3}" cy="{:.3}" r="3" fill="{}"/>"#,
                frame.px(ex),
                frame.py(ey),
                COLORS[1]
            );
        }
        PlotData::Series { x_label, x, curves } => {
            let frame = Frame::new(x.iter().copied(), curves.iter().flat_map(|(_, c)| c.iter().copied()));
            let y_label = curves.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>().join(", ");
            frame.axes(&mut svg, x_label, &y_label);
            for (k, (name, c)) in curves.iter().enumerate() {
                let color = COLORS[k % COLORS.len()];
                polyline(&mut svg, &frame, x.iter().copied().zip(c.iter().copied()), color);
                let _ = writeln!(
                    svg,
                    r#"<text x="{}" y="{}" font-size="11" fill="{color}">{}</text>"#,
                    W - MARGIN + 4.0,
                    MARGIN + 14.0 * (k as f64 + 1.0),
                    escape(name)
                );
            }
        }
        PlotData::Boxplot { label, groups } => {
            let n = groups.len() as f64;
            let frame = Frame {
                x0: 0.0,
                x1: n,
                ..Frame::new(std::iter::empty(), groups.iter().flat_map(|(_, q)| [q.min, q.max]))
            };
            frame.axes(&mut svg, "", label);
            let half = 0.3;
            for (k, (name, q)) in groups.iter().enumerate() {
                let c = k as f64 + 0.5;
                let (l, r, mid) = (frame.px(c - half), frame.px(c + half), frame.px(c));
                let color = COLORS[k % COLORS.len()];
                let _ = writeln!(
                    svg,
                    r#"<rect x="{l:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="none" stroke="{color}"/>"#,
                    frame.py(q.q3),
                    r - l,
                    frame.py(q.q1) - frame.py(q.q3)
                );
                let _ = writeln!(
                    svg,
                    r#"<line x1="{l:.3}" x2="{r:.3}" y1="{0:.3}" y2="{0:.3}" stroke="{color}" stroke-width="2"/>"#,
                    frame.py(q.median)
                );
                for (from, to) in [(q.q3, q.max), (q.q1, q.min)] {
                    let _ = writeln!(
                        svg,
                        r#"<line x1="{mid:.3}" x2="{mid:.3}" y1="{:.3}" y2="{:.3}" stroke="{color}"/>"#,
                        frame.py(from),
                        frame.py(to)
                    );
                    let _ = writeln!(
                        svg,
                        r#"<line x1="{:.3}" x2="{:.3}" y1="{2:.3}" y2="{2:.3}" stroke="{color}"/>"#,
                        frame.px(c - half / 2.0),
                        frame.px(c + half / 2.0),
                        frame.py(to)
                    );
                }
                let _ = writeln!(
                    svg,
                    r#"<text x="{mid:.3}" y="{}" font-size="11" text-anchor="middle">{}</text>"#,
                    H - MARGIN + 30.0,
                    escape(name)
                );
            }
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Companion CSV path: the SVG path with its extension replaced.
pub fn companion_csv(svg_path: &Path) -> PathBuf {
    svg_path.with_extension("csv")
}

/// Writes `svg_path` and its companion CSV. Returns the CSV path.
pub fn emit_plot(data: &PlotData, svg_path: &Path) -> Result<PathBuf, Error> {
    let svg = render_svg(data)?;
    let csv = companion_csv(svg_path);
    data.table().write(&csv)?;
    write_atomic(svg_path, svg.as_bytes())?;
    Ok(csv)
}

/// Plot data from table columns: `columns[0]` against `columns[1]` for a
/// 2-D trajectory, or the first column against the rest for series. Rows
/// with an empty cell in a used column are skipped.
pub fn from_table(table: &Table, kind: PlotKind, columns: &[String]) -> Result<PlotData, Error> {
    let cols: Vec<Vec<Option<f64>>> = columns.iter().map(|c| table.column(c)).collect::<Result<_, _>>()?;
    let complete: Vec<usize> = (0..table.rows.len())
        .filter(|&r| cols.iter().all(|c| c[r].is_some()))
        .collect();
    let pick = |k: usize| -> Vec<f64> { complete.iter().map(|&r| cols[k][r].unwrap()).collect() };
    match kind {
        PlotKind::Trajectory2d => {
            if columns.len() != 2 {
                return Err(Error::Data("trajectory2d needs exactly two columns".into()));
            }
            Ok(PlotData::Trajectory2d {
                x_label: columns[0].clone(),
                y_label: columns[1].clone(),
                points: pick(0).into_iter().zip(pick(1)).collect(),
            })
        }
        PlotKind::Series => {
            if columns.len() < 2 {
                return Err(Error::Data("series needs an abscissa and at least one curve".into()));
            }
            Ok(PlotData::Series {
                x_label: columns[0].clone(),
                x: pick(0),
                curves: (1..columns.len()).map(|k| (columns[k].clone(), pick(k))).collect(),
            })
        }
        PlotKind::Boxplot => {
            let groups = columns
                .iter()
                .enumerate()
                .map(|(k, name)| Ok((name.clone(), Quartiles::of(&pick(k))?)))
                .collect::<Result<Vec<_>, Error>>()?;
            Ok(PlotData::Boxplot {
                label: "value".into(),
                groups,
            })
        }
    }
}
