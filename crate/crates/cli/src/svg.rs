//! Minimal SVG drawings of curves. Coordinates are printed with a fixed
//! number of decimals so re-runs give identical files.

use std::fmt::Write as _;

use acsf_core::{Point, SupportCurve};

const SIZE: f64 = 480.0;
const MARGIN: f64 = 16.0;
const PALETTE: [&str; 6] = [
    "#1b6ca8", "#c0392b", "#27ae60", "#8e44ad", "#d68910", "#2c3e50",
];

/// Axis-aligned window in flow coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    min: Point,
    span: f64,
}

impl Window {
    /// Square window around `points` with 5% padding.
    pub fn around<'a>(points: impl IntoIterator<Item = &'a Point>) -> Window {
        let (mut lo, mut hi) = (
            Point::repeat(f64::INFINITY),
            Point::repeat(f64::NEG_INFINITY),
        );
        for p in points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let span = (hi - lo).max().max(1e-12) * 1.1;
        let mid = 0.5 * (lo + hi);
        Window {
            min: mid - Point::repeat(0.5 * span),
            span,
        }
    }

    fn map(&self, p: &Point) -> (f64, f64) {
        let s = (SIZE - 2.0 * MARGIN) / self.span;
        (
            MARGIN + (p.x - self.min.x) * s,
            SIZE - MARGIN - (p.y - self.min.y) * s,
        )
    }
}

pub struct Drawing {
    window: Window,
    body: String,
}

impl Drawing {
    pub fn new(window: Window) -> Self {
        Drawing {
            window,
            body: String::new(),
        }
    }

    pub fn closed_path(&mut self, points: &[Point], stroke: &str, width: f64, dashed: bool) {
        let mut d = String::new();
        for (i, p) in points.iter().enumerate() {
            let (x, y) = self.window.map(p);
            write!(d, "{}{x:.2},{y:.2} ", if i == 0 { 'M' } else { 'L' }).unwrap();
        }
        d.push('Z');
        let dash = if dashed {
            " stroke-dasharray=\"6 4\""
        } else {
            ""
        };
        writeln!(
            self.body,
            "<path d=\"{d}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"{width}\"{dash}/>"
        )
        .unwrap();
    }

    pub fn curve(&mut self, curve: &SupportCurve, stroke: &str) {
        self.closed_path(&curve.to_points(), stroke, 1.5, false);
    }

    pub fn marker(&mut self, p: &Point, fill: &str) {
        let (x, y) = self.window.map(p);
        writeln!(
            self.body,
            "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"2.5\" fill=\"{fill}\"/>"
        )
        .unwrap();
    }

    pub fn caption(&mut self, line: usize, text: &str) {
        let y = MARGIN + 14.0 * line as f64;
        writeln!(
            self.body,
            "<text x=\"{MARGIN}\" y=\"{y}\" font-family=\"monospace\" font-size=\"12\">{}</text>",
            escape(text)
        )
        .unwrap();
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.body
        )
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub fn circle_points(center: Point, radius: f64, n: usize) -> Vec<Point> {
    (0..n)
        .map(|j| {
            let th = std::f64::consts::TAU * j as f64 / n as f64;
            center + radius * Point::new(th.cos(), th.sin())
        })
        .collect()
}

/// One snapshot drawn in a window shared by the whole run.
pub fn frame(curve: &SupportCurve, t: f64, window: Window) -> String {
    let mut d = Drawing::new(window);
    d.curve(curve, PALETTE[0]);
    d.caption(1, &format!("t = {t:.6}  area = {:.6}", curve.area()));
    d.finish()
}

/// All snapshots overlaid, cycling through a small palette.
pub fn nested(curves: &[&SupportCurve]) -> String {
    let window = Window::around(
        curves
            .iter()
            .flat_map(|c| c.to_points())
            .collect::<Vec<_>>()
            .iter(),
    );
    let mut d = Drawing::new(window);
    for (i, c) in curves.iter().enumerate() {
        d.curve(c, PALETTE[i % PALETTE.len()]);
    }
    d.caption(1, &format!("{} snapshots", curves.len()));
    d.finish()
}

/// Normalized snapshot against the disk its John ellipse became.
pub fn overlay(normalized: &SupportCurve, disk_radius: f64, k: usize, eps: f64) -> String {
    let pts = normalized.to_points();
    let disk = circle_points(Point::zeros(), disk_radius, 256);
    let window = Window::around(pts.iter().chain(&disk));
    let mut d = Drawing::new(window);
    d.closed_path(&disk, PALETTE[1], 1.0, true);
    d.closed_path(&pts, PALETTE[0], 1.5, false);
    d.marker(&Point::zeros(), PALETTE[5]);
    d.caption(1, &format!("milestone {k}  eps = {eps:.3e}"));
    d.finish()
}
