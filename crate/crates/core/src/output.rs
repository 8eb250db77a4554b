//! Trajectory CSV and hand-written SVG plots.
//!
//! CSV columns are fixed: `t, x, y, theta, mu_x, mu_y, mu_theta, segment,
//! event, branch_path`. Columns a mode does not produce are left empty. Every
//! event contributes two rows at the same time, the pre-reset state followed
//! by the post-reset state, both flagged `event = 1`.

use std::fmt::Write as _;
use std::io::{self, Write};

use crate::group::wrap_angle;
use crate::hybrid::{branch_path_string, Branch, HybridTrajectory};

pub const CSV_HEADER: &str = "t,x,y,theta,mu_x,mu_y,mu_theta,segment,event,branch_path";

/// Columns extracted from one state.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Columns {
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub theta: Option<f64>,
    pub mu: Option<[f64; 3]>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub t: f64,
    pub columns: Columns,
    pub segment: usize,
    pub event: bool,
    pub branch_path: String,
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl CsvRow {
    pub fn to_line(&self) -> String {
        let c = &self.columns;
        let [mx, my, mt] = match c.mu {
            Some(m) => m.map(Some),
            None => [None; 3],
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.t,
            opt(c.x),
            opt(c.y),
            opt(c.theta.map(wrap_angle)),
            opt(mx),
            opt(my),
            opt(mt),
            self.segment,
            u8::from(self.event),
            self.branch_path
        )
    }
}

/// Rows for a trajectory. `project` maps `(segment, t, state)` to columns;
/// `path` holds the branch choices of the whole run.
pub fn trajectory_rows<P>(traj: &HybridTrajectory, path: &[Branch], project: P) -> Vec<CsvRow>
where
    P: Fn(usize, f64, &[f64]) -> Columns,
{
    let last_arc = traj.arcs.len().saturating_sub(1);
    let mut rows = Vec::with_capacity(traj.sample_count());
    for (k, arc) in traj.arcs.iter().enumerate() {
        let prefix = branch_path_string(&path[..k.min(path.len())]);
        let n = arc.times.len();
        for (i, (t, x)) in arc.times.iter().zip(&arc.states).enumerate() {
            let event = (i == 0 && k > 0) || (i + 1 == n && k < last_arc);
            rows.push(CsvRow {
                t: *t,
                columns: project(arc.segment, *t, x),
                segment: arc.segment,
                event,
                branch_path: prefix.clone(),
            });
        }
    }
    rows
}

pub fn write_csv<W: Write>(mut w: W, rows: &[CsvRow]) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", r.to_line())?;
    }
    w.flush()
}

/// Arbitrary columns with a header, for auxiliary series such as costs.
pub fn write_table<W: Write>(mut w: W, header: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        writeln!(w, "{}", r.join(","))?;
    }
    w.flush()
}

/// One curve of a plot. A new `pieces` entry starts a disconnected run, so
/// jumps are not drawn as lines.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Series {
    pub label: String,
    pub pieces: Vec<Vec<(f64, f64)>>,
    pub markers: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn bounds(plot: &Plot) -> (f64, f64, f64, f64) {
    let pts = plot
        .series
        .iter()
        .flat_map(|s| s.pieces.iter().flatten().chain(&s.markers));
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return (0.0, 1.0, 0.0, 1.0);
    }
    let pad = |lo: f64, hi: f64| {
        let span = if hi > lo { hi - lo } else { 1.0 };
        (lo - 0.05 * span, hi + 0.05 * span)
    };
    let (x0, x1) = pad(x0, x1);
    let (y0, y1) = pad(y0, y1);
    (x0, x1, y0, y1)
}

pub fn render_svg(plot: &Plot) -> String {
    let (x0, x1, y0, y1) = bounds(plot);
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, plot.title);

    // axes with min/max tick labels
    let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        out,
        r#"<path class="axes" d="M{left} {top} L{left} {bottom} L{right} {bottom}" stroke="black" fill="none"/>"#
    );
    let _ = writeln!(out, r#"<text x="{left}" y="{}" text-anchor="middle">{x0:.3}</text>"#, bottom + 16.0);
    let _ = writeln!(out, r#"<text x="{right}" y="{}" text-anchor="middle">{x1:.3}</text>"#, bottom + 16.0);
    let _ = writeln!(out, r#"<text x="{}" y="{bottom}" text-anchor="end">{y0:.3}</text>"#, left - 6.0);
    let _ = writeln!(out, r#"<text x="{}" y="{top}" text-anchor="end">{y1:.3}</text>"#, left - 6.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 16.0, plot.x_label);
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        plot.y_label
    );

    for (i, s) in plot.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut d = String::new();
        for piece in &s.pieces {
            for (j, &(x, y)) in piece.iter().enumerate() {
                let _ = write!(d, "{}{:.2} {:.2} ", if j == 0 { 'M' } else { 'L' }, sx(x), sy(y));
            }
        }
        let _ = writeln!(
            out,
            r#"<path class="branch" data-label="{}" d="{}" stroke="{color}" stroke-width="1.5" fill="none"/>"#,
            s.label,
            d.trim_end()
        );
        for &(x, y) in &s.markers {
            let _ = writeln!(
                out,
                r#"<circle class="event" cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                sx(x),
                sy(y)
            );
        }
        let ly = MARGIN + 16.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{ly}" fill="{color}">{}</text>"#,
            WIDTH - MARGIN + 4.0,
            s.label
        );
    }
    out.push_str("</svg>\n");
    out
}
