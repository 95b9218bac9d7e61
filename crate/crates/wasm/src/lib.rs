//! Browser entry points. Shapes come in and results go out as JSON strings,
//! which keeps the JavaScript side to `JSON.parse`.

use acsf_core::arrival::{log_concavity_check, reconstruct, GridSpec};
use acsf_core::experiments::{classify, ClassifyOptions};
use acsf_core::flow::{evolve, Cadence, EvolveOptions, Stop};
use acsf_core::invariants::{iso_ratio, ratio_sup};
use acsf_core::{
    support_of_ellipse, ConvexPolygon, Ellipse, Error, FourierMode, Point, Result, SupportCurve,
};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

const MAX_GRID: usize = 1024;
const MAX_NODES: usize = 256;
const DRAWN_POINTS: usize = 128;

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Shape {
    Ellipse {
        a: f64,
        b: f64,
        #[serde(default)]
        angle: f64,
    },
    Fourier {
        modes: Vec<FourierMode>,
    },
    Polygon {
        vertices: Vec<[f64; 2]>,
    },
}

fn curve(shape: &str, grid: usize) -> Result<SupportCurve> {
    if !(16..=MAX_GRID).contains(&grid) {
        return Err(Error::InvalidInput(format!(
            "grid {grid} must lie in 16..={MAX_GRID}"
        )));
    }
    let shape: Shape =
        serde_json::from_str(shape).map_err(|e| Error::InvalidInput(format!("shape: {e}")))?;
    match shape {
        Shape::Ellipse { a, b, angle } => {
            support_of_ellipse(&Ellipse::from_axes(Point::zeros(), a, b, angle)?, grid)
        }
        Shape::Fourier { modes } => SupportCurve::from_fourier(grid, 1.0, &modes, Point::zeros()),
        Shape::Polygon { vertices } => {
            let pts: Vec<Point> = vertices.iter().map(|v| Point::new(v[0], v[1])).collect();
            acsf_core::from_polygon(&ConvexPolygon::convex_hull(&pts)?, grid)
        }
    }
}

fn outline(c: &SupportCurve) -> Vec<[f64; 2]> {
    let pts = c.to_points();
    let stride = (pts.len() / DRAWN_POINTS).max(1);
    pts.iter().step_by(stride).map(|p| [p.x, p.y]).collect()
}

#[derive(Serialize)]
struct Frame {
    t: f64,
    area: f64,
    ratio: f64,
    outline: Vec<[f64; 2]>,
}

#[derive(Serialize)]
struct Evolution {
    frames: Vec<Frame>,
    extinction: f64,
    sup: f64,
}

pub fn evolution_json(shape: &str, grid: usize, frames: usize) -> Result<String> {
    let c = curve(shape, grid)?;
    let opts = EvolveOptions {
        cadence: Cadence::AreaLoss(1.0 / frames.clamp(2, 400) as f64),
        ..EvolveOptions::default()
    };
    let traj = evolve(&c, Stop::AreaFloor(1e-3 * c.area()), &opts)?;
    let frames = traj
        .states()
        .iter()
        .map(|s| {
            Ok(Frame {
                t: s.t,
                area: s.curve.area(),
                ratio: iso_ratio(&s.curve)?,
                outline: outline(&s.curve),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(serde_json::to_string(&Evolution {
        frames,
        extinction: traj.extinction().time,
        sup: ratio_sup(),
    })
    .expect("plain numbers serialize"))
}

#[derive(Serialize)]
struct MilestoneView {
    k: usize,
    lambda: f64,
    eps: f64,
    gap: f64,
    disk_radius: f64,
    outline: Vec<[f64; 2]>,
}

#[derive(Serialize)]
struct Classification {
    milestones: Vec<MilestoneView>,
    eps_decreasing: bool,
    failure: Option<String>,
}

pub fn classification_json(shape: &str, grid: usize, milestones: usize) -> Result<String> {
    let c = curve(shape, grid)?;
    let opts = ClassifyOptions {
        milestones: milestones.clamp(1, 8),
        ..ClassifyOptions::default()
    };
    let report = classify(&c, &opts)?;
    let views = report
        .milestones
        .iter()
        .map(|m| MilestoneView {
            k: m.k,
            lambda: m.lambda,
            eps: m.eps,
            gap: m.gap,
            disk_radius: m.disk_radius,
            outline: m.normalized.as_ref().map(outline).unwrap_or_default(),
        })
        .collect();
    Ok(serde_json::to_string(&Classification {
        milestones: views,
        eps_decreasing: report.eps_decreasing,
        failure: report.failure,
    })
    .expect("plain numbers serialize"))
}

#[derive(Serialize)]
struct FieldView {
    nx: usize,
    ny: usize,
    origin: [f64; 2],
    spacing: f64,
    extinction_time: f64,
    /// Row-major `u`, `null` where unresolved.
    u: Vec<Option<f64>>,
    concavity_level: f64,
    log_concave: Option<bool>,
}

/// Smallest area fraction, at least 1e-2, at which the final curve should
/// still span about nine grid cells, assuming it shrinks roughly
/// self-similarly.
fn area_floor_fraction(c: &SupportCurve, spacing: f64) -> f64 {
    let h = c.h();
    let half = h.len() / 2;
    let width = (0..half)
        .map(|j| h[j] + h[j + half])
        .fold(f64::INFINITY, f64::min);
    (9.0 * spacing / width).powi(2).clamp(1e-2, 0.25)
}

pub fn arrival_json(shape: &str, grid: usize, nodes: usize) -> Result<String> {
    if !(8..=MAX_NODES).contains(&nodes) {
        return Err(Error::InvalidInput(format!(
            "nodes {nodes} must lie in 8..={MAX_NODES}"
        )));
    }
    let c = curve(shape, grid)?;
    let opts = EvolveOptions {
        cadence: Cadence::AreaRatio(0.97),
        ..EvolveOptions::default()
    };
    let grid = GridSpec::covering(&c, nodes)?;
    let floor = area_floor_fraction(&c, grid.spacing);
    let traj = evolve(&c, Stop::AreaFloor(floor * c.area()), &opts)?;
    let field = reconstruct(&traj, &grid)?;
    let level = 0.6 * field.extinction_time();
    let log_concave = log_concavity_check(&field, level).ok().map(|r| r.passed);
    let g = *field.grid();
    let u = field
        .u()
        .iter()
        .zip(field.resolved())
        .map(|(&u, &ok)| ok.then_some(u))
        .collect();
    Ok(serde_json::to_string(&FieldView {
        nx: g.nx,
        ny: g.ny,
        origin: g.origin,
        spacing: g.spacing,
        extinction_time: field.extinction_time(),
        u,
        concavity_level: level,
        log_concave,
    })
    .expect("plain numbers serialize"))
}

fn js(r: Result<String>) -> std::result::Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

/// Snapshots of the flow from `shape` down to a thousandth of its area.
#[wasm_bindgen]
pub fn evolve_shape(
    shape: &str,
    grid: usize,
    frames: usize,
) -> std::result::Result<String, JsError> {
    js(evolution_json(shape, grid, frames))
}

/// Normalized snapshots at the area milestones and their distance from a disk.
#[wasm_bindgen]
pub fn classify_shape(
    shape: &str,
    grid: usize,
    milestones: usize,
) -> std::result::Result<String, JsError> {
    js(classification_json(shape, grid, milestones))
}

/// Arrival-time field on a `nodes x nodes` grid.
#[wasm_bindgen]
pub fn arrival_field(
    shape: &str,
    grid: usize,
    nodes: usize,
) -> std::result::Result<String, JsError> {
    js(arrival_json(shape, grid, nodes))
}
