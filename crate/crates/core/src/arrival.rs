//! Arrival times of the flow on a Cartesian grid.
//!
//! A node `x` swept by the shrinking curves gets the time `τ(x)` at which the
//! boundary passes it, and `u(x) = T − τ(x)` with `T` the extinction-time
//! estimate. Level sets `{u = s}` are then the snapshots at time `T − s`, and
//! `u` solves `div(Du/|Du|) = |Du|^{−3}` away from the extinction point.

use serde::{Deserialize, Serialize};

use crate::curve::{unit, ConvexPolygon, Point, SupportCurve};
use crate::error::{Error, Result};
use crate::flow::Trajectory;
use crate::spectral::{angle_grid, TrigSeries};

/// Fewest grid nodes allowed across the narrowest width of the final curve.
pub const MIN_NODES_ACROSS: f64 = 8.0;
/// Radius, in grid spacings, of the disk about the extinction point that is
/// left out of residual checks.
pub const CORE_EXCLUSION: f64 = 4.0;
/// Slack of the midpoint-convexity test.
pub const MIDPOINT_SLACK: f64 = 1e-6;
/// Node strides used for midpoint triples.
const STRIDES: [usize; 4] = [1, 2, 4, 8];
const LEVEL_COUNT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Position of node `(0, 0)`.
    pub origin: [f64; 2],
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn new(origin: Point, spacing: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::invalid(format!(
                "grid spacing {spacing} must be positive"
            )));
        }
        if nx < 3 || ny < 3 {
            return Err(Error::invalid("grid needs at least 3 nodes per axis"));
        }
        Ok(GridSpec {
            origin: [origin.x, origin.y],
            spacing,
            nx,
            ny,
        })
    }

    /// Square `nodes × nodes` grid centered on the bounding box of `curve`,
    /// padded by 2% on each side.
    pub fn covering(curve: &SupportCurve, nodes: usize) -> Result<Self> {
        if nodes < 3 {
            return Err(Error::invalid("grid needs at least 3 nodes per axis"));
        }
        let s = curve.support_series();
        let o = curve.origin();
        let (right, top) = (s.eval(0.0), s.eval(0.5 * std::f64::consts::PI));
        let (left, bottom) = (
            s.eval(std::f64::consts::PI),
            s.eval(1.5 * std::f64::consts::PI),
        );
        let center = o + Point::new(0.5 * (right - left), 0.5 * (top - bottom));
        let half = 0.5 * (right + left).max(top + bottom) * 1.02;
        let spacing = 2.0 * half / (nodes - 1) as f64;
        GridSpec::new(center - Point::new(half, half), spacing, nodes, nodes)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// `(i, j)` of a flat index.
    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    pub fn node(&self, i: usize, j: usize) -> Point {
        Point::new(
            self.origin[0] + i as f64 * self.spacing,
            self.origin[1] + j as f64 * self.spacing,
        )
    }
}

/// Grid metadata written next to an exported field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub grid: GridSpec,
    pub extinction_time: f64,
    pub t_stop: f64,
    pub u_floor: f64,
    pub extinction_point: [f64; 2],
}

/// Arrival time `τ` and level-set function `u = T − τ` on a grid. Nodes
/// outside the initial curve, or never swept, hold NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalField {
    grid: GridSpec,
    tau: Vec<f64>,
    u: Vec<f64>,
    inside: Vec<bool>,
    resolved: Vec<bool>,
    extinction_time: f64,
    t_stop: f64,
    u_floor: f64,
    extinction_point: Point,
}

impl ArrivalField {
    /// Field sampled from a closed-form `u`, taken as fully swept with
    /// extinction at time 0 (so `τ = −u`).
    pub fn from_function(
        grid: GridSpec,
        extinction_point: Point,
        u: impl Fn(Point) -> f64,
    ) -> Self {
        let values: Vec<f64> = (0..grid.len())
            .map(|k| {
                let (i, j) = grid.coords(k);
                u(grid.node(i, j))
            })
            .collect();
        let resolved: Vec<bool> = values.iter().map(|v| v.is_finite()).collect();
        ArrivalField {
            grid,
            tau: values.iter().map(|v| -v).collect(),
            u: values,
            inside: resolved.clone(),
            resolved,
            extinction_time: 0.0,
            t_stop: 0.0,
            u_floor: 0.0,
            extinction_point,
        }
    }

    /// Same field with `u` replaced by `f(u)` on resolved nodes.
    pub fn map_u(&self, f: impl Fn(f64) -> f64) -> Self {
        let u: Vec<f64> = self
            .u
            .iter()
            .zip(&self.resolved)
            .map(|(&v, &r)| if r { f(v) } else { v })
            .collect();
        ArrivalField {
            tau: u.iter().map(|v| self.extinction_time - v).collect(),
            u,
            ..self.clone()
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn inside(&self) -> &[bool] {
        &self.inside
    }

    pub fn resolved(&self) -> &[bool] {
        &self.resolved
    }

    pub fn extinction_time(&self) -> f64 {
        self.extinction_time
    }

    pub fn t_stop(&self) -> f64 {
        self.t_stop
    }

    /// Remaining time `T − t_stop` after the last snapshot.
    pub fn u_floor(&self) -> f64 {
        self.u_floor
    }

    pub fn extinction_point(&self) -> Point {
        self.extinction_point
    }

    pub fn resolved_count(&self) -> usize {
        self.resolved.iter().filter(|&&r| r).count()
    }

    pub fn meta(&self) -> FieldMeta {
        FieldMeta {
            grid: self.grid,
            extinction_time: self.extinction_time,
            t_stop: self.t_stop,
            u_floor: self.u_floor,
            extinction_point: [self.extinction_point.x, self.extinction_point.y],
        }
    }

    /// Largest `|u − exact|` over resolved nodes.
    pub fn max_error(&self, exact: impl Fn(Point) -> f64) -> f64 {
        (0..self.grid.len())
            .filter(|&k| self.resolved[k])
            .map(|k| {
                let (i, j) = self.grid.coords(k);
                (self.u[k] - exact(self.grid.node(i, j))).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Nodes of the sublevel set `{u ≤ level}`; swept-out-last nodes inside
    /// the final curve count as members.
    fn sublevel(&self, level: f64) -> Vec<usize> {
        (0..self.grid.len())
            .filter(|&k| self.inside[k] && (!self.resolved[k] || self.u[k] <= level))
            .collect()
    }

    /// Support samples of the node set `{u ≤ level}` about `origin`, on `n`
    /// uniform normals.
    pub fn level_set_support(&self, level: f64, n: usize, origin: Point) -> Result<Vec<f64>> {
        let members = self.sublevel(level);
        if members.is_empty() {
            return Err(Error::invalid(format!("level {level} contains no nodes")));
        }
        let normals: Vec<Point> = angle_grid(n).into_iter().map(unit).collect();
        Ok(normals
            .iter()
            .map(|u| {
                members
                    .iter()
                    .map(|&k| {
                        let (i, j) = self.grid.coords(k);
                        (self.grid.node(i, j) - origin).dot(u)
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect())
    }
}

/// `(3/4)|x|^{4/3}`, the arrival-time function of the circle shrinking to
/// the origin at time 0.
pub fn radial_exact(x: Point) -> f64 {
    0.75 * x.norm().powf(4.0 / 3.0)
}

struct Snapshot {
    t: f64,
    h: Vec<f64>,
    rate: Vec<f64>,
    h_series: TrigSeries,
    rate_series: TrigSeries,
}

/// Support function and its derivatives at `(θ, t)` from cubic Hermite
/// interpolation in time between two snapshots.
struct Local {
    h: f64,
    h_th: f64,
    h_thth: f64,
    h_t: f64,
    h_tht: f64,
}

struct Reconstructor {
    snaps: Vec<Snapshot>,
    normals: Vec<Point>,
    dtheta: f64,
}

enum Node {
    Outside,
    Unswept,
    Swept(f64),
}

impl Reconstructor {
    fn new(traj: &Trajectory) -> Result<Self> {
        let origin = traj.first().curve.origin();
        let snaps = traj
            .states()
            .iter()
            .map(|s| {
                let curve = s.curve.recentered(origin);
                let rate: Vec<f64> = curve
                    .radius_of_curvature()?
                    .iter()
                    .map(|r| -r.cbrt().recip())
                    .collect();
                Ok(Snapshot {
                    t: s.t,
                    h_series: TrigSeries::from_samples(curve.h()),
                    rate_series: TrigSeries::from_samples(&rate),
                    h: curve.h().to_vec(),
                    rate,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let n = traj.first().curve.n_samples();
        Ok(Reconstructor {
            snaps,
            normals: angle_grid(n).into_iter().map(unit).collect(),
            dtheta: 2.0 * std::f64::consts::PI / n as f64,
        })
    }

    /// Grid argmax of `⟨p, u⟩ − h` refined by Newton in `θ`.
    fn max_gap(&self, h: &[f64], eval: impl Fn(f64) -> [f64; 3], p: &Point) -> (f64, f64) {
        let (j, g) = h
            .iter()
            .zip(&self.normals)
            .map(|(hv, u)| p.dot(u) - hv)
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |a, (j, g)| if g > a.1 { (j, g) } else { a },
            );
        let mut best = (j as f64 * self.dtheta, g);
        let mut theta = best.0;
        for _ in 0..8 {
            let [hv, d1, d2] = eval(theta);
            let u = unit(theta);
            let slope = p.x * -u.y + p.y * u.x - d1;
            let curv = -p.dot(&u) - d2;
            if !(curv < 0.0) {
                break;
            }
            let step = (-slope / curv).clamp(-self.dtheta, self.dtheta);
            theta += step;
            let [hv2, _, _] = eval(theta);
            let g2 = p.dot(&unit(theta)) - hv2;
            if g2 > best.1 {
                best = (theta, g2);
            }
            if step.abs() < 1e-14 || (g2 - (p.dot(&u) - hv)).abs() < 1e-16 {
                break;
            }
        }
        best
    }

    fn snapshot_gap(&self, k: usize, p: &Point) -> (f64, f64) {
        let s = &self.snaps[k];
        self.max_gap(&s.h, |t| s.h_series.eval_with_derivatives(t), p)
    }

    fn local(&self, k: usize, theta: f64, t: f64) -> Local {
        let (a, b) = (&self.snaps[k], &self.snaps[k + 1]);
        let dt = b.t - a.t;
        let s = (t - a.t) / dt;
        let (s2, s3) = (s * s, s * s * s);
        let w = [
            2.0 * s3 - 3.0 * s2 + 1.0,
            (s3 - 2.0 * s2 + s) * dt,
            -2.0 * s3 + 3.0 * s2,
            (s3 - s2) * dt,
        ];
        let dw = [
            (6.0 * s2 - 6.0 * s) / dt,
            3.0 * s2 - 4.0 * s + 1.0,
            (-6.0 * s2 + 6.0 * s) / dt,
            3.0 * s2 - 2.0 * s,
        ];
        let parts = [
            a.h_series.eval_with_derivatives(theta),
            a.rate_series.eval_with_derivatives(theta),
            b.h_series.eval_with_derivatives(theta),
            b.rate_series.eval_with_derivatives(theta),
        ];
        let mut out = Local {
            h: 0.0,
            h_th: 0.0,
            h_thth: 0.0,
            h_t: 0.0,
            h_tht: 0.0,
        };
        for (q, f) in parts.iter().enumerate() {
            out.h += w[q] * f[0];
            out.h_th += w[q] * f[1];
            out.h_thth += w[q] * f[2];
            out.h_t += dw[q] * f[0];
            out.h_tht += dw[q] * f[1];
        }
        out
    }

    /// Gap at time `t` inside interval `k`, maximized over `θ`.
    fn interval_gap(&self, k: usize, t: f64, p: &Point) -> f64 {
        let (a, b) = (&self.snaps[k], &self.snaps[k + 1]);
        let dt = b.t - a.t;
        let s = (t - a.t) / dt;
        let (s2, s3) = (s * s, s * s * s);
        let w = [
            2.0 * s3 - 3.0 * s2 + 1.0,
            (s3 - 2.0 * s2 + s) * dt,
            -2.0 * s3 + 3.0 * s2,
            (s3 - s2) * dt,
        ];
        let h: Vec<f64> = (0..a.h.len())
            .map(|j| w[0] * a.h[j] + w[1] * a.rate[j] + w[2] * b.h[j] + w[3] * b.rate[j])
            .collect();
        let eval = |theta: f64| {
            let l = self.local(k, theta, t);
            [l.h, l.h_th, l.h_thth]
        };
        self.max_gap(&h, eval, p).1
    }

    fn arrival(&self, p: Point) -> Node {
        let last = self.snaps.len() - 1;
        let (_, g0) = self.snapshot_gap(0, &p);
        if g0 >= 0.0 {
            return Node::Outside;
        }
        if last == 0 || self.snapshot_gap(last, &p).1 < 0.0 {
            return Node::Unswept;
        }
        let (mut lo, mut hi) = (0, last);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.snapshot_gap(mid, &p).1 < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (ta, tb) = (self.snaps[lo].t, self.snaps[hi].t);
        let (_, ga) = self.snapshot_gap(lo, &p);
        let (theta_b, gb) = self.snapshot_gap(hi, &p);
        if gb == 0.0 {
            return Node::Swept(tb);
        }
        let t0 = ta + (tb - ta) * (-ga / (gb - ga));
        self.newton(lo, p, theta_b, t0)
            .map(Node::Swept)
            .unwrap_or_else(|| Node::Swept(self.bisect(lo, p)))
    }

    /// Newton on `⟨p, u⟩ = h` and `⟨p, u^⊥⟩ = h_θ`: the node is the boundary
    /// point with normal `θ` at time `t`.
    fn newton(&self, k: usize, p: Point, mut theta: f64, mut t: f64) -> Option<f64> {
        let (ta, tb) = (self.snaps[k].t, self.snaps[k + 1].t);
        let slack = 1e-9 * (tb - ta);
        for _ in 0..40 {
            let l = self.local(k, theta, t);
            let u = unit(theta);
            let perp = Point::new(-u.y, u.x);
            let g1 = p.dot(&u) - l.h;
            let g2 = p.dot(&perp) - l.h_th;
            let (a11, a12) = (g2, -l.h_t);
            let (a21, a22) = (-p.dot(&u) - l.h_thth, -l.h_tht);
            let det = a11 * a22 - a12 * a21;
            if !(det.abs() > 0.0) {
                return None;
            }
            let d_theta = -(a22 * g1 - a12 * g2) / det;
            let d_t = -(-a21 * g1 + a11 * g2) / det;
            theta += d_theta.clamp(-4.0 * self.dtheta, 4.0 * self.dtheta);
            t += d_t;
            if !(t >= ta - slack && t <= tb + slack) {
                return None;
            }
            if d_t.abs() <= 1e-14 * t.abs().max(1e-3) && d_theta.abs() <= 1e-12 {
                return Some(t.clamp(ta, tb));
            }
        }
        None
    }

    fn bisect(&self, k: usize, p: Point) -> f64 {
        let (mut lo, mut hi) = (self.snaps[k].t, self.snaps[k + 1].t);
        while hi - lo > 1e-14 * hi.abs().max(1e-3) {
            let mid = 0.5 * (lo + hi);
            if self.interval_gap(k, mid, &p) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

fn map_nodes<T: Send>(count: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(f).collect()
    }
}

/// Narrowest width of `curve` over its grid normals.
fn min_width(curve: &SupportCurve) -> f64 {
    let s = curve.support_series();
    (0..curve.n_samples())
        .map(|j| {
            let theta = curve.angle(j);
            s.eval(theta) + s.eval(theta + std::f64::consts::PI)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Arrival times of `traj` on `grid`.
///
/// The snapshot bracketing each node is found by bisection on containment;
/// inside it the support function is interpolated by cubic Hermite
/// polynomials in time (slopes `h_t = −ρ^{−1/3}`) and the crossing is solved
/// by Newton in `(θ, t)`, with bisection in `t` as fallback. Snapshots should
/// be dense enough in time for the cubic to be accurate; an area-ratio
/// cadence near 0.97 works well.
pub fn reconstruct(traj: &Trajectory, grid: &GridSpec) -> Result<ArrivalField> {
    let last = &traj.last().curve;
    let across = min_width(last) / grid.spacing;
    if across < MIN_NODES_ACROSS {
        let scale = MIN_NODES_ACROSS / across;
        return Err(Error::Resolution {
            nodes_across: across,
            suggested_grid: (grid.nx.max(grid.ny) as f64 * scale).ceil() as usize,
        });
    }
    let rec = Reconstructor::new(traj)?;
    let origin = traj.first().curve.origin();
    let nodes = map_nodes(grid.len(), |k| {
        let (i, j) = grid.coords(k);
        rec.arrival(grid.node(i, j) - origin)
    });

    let extinction_time = traj.extinction().time;
    let t_stop = traj.last().t;
    let mut tau = vec![f64::NAN; grid.len()];
    let mut u = vec![f64::NAN; grid.len()];
    let mut inside = vec![false; grid.len()];
    let mut resolved = vec![false; grid.len()];
    for (k, node) in nodes.into_iter().enumerate() {
        match node {
            Node::Outside => {}
            Node::Unswept => inside[k] = true,
            Node::Swept(t) => {
                inside[k] = true;
                resolved[k] = true;
                tau[k] = t;
                u[k] = extinction_time - t;
            }
        }
    }
    Ok(ArrivalField {
        grid: *grid,
        tau,
        u,
        inside,
        resolved,
        extinction_time,
        t_stop,
        u_floor: extinction_time - t_stop,
        extinction_point: last.steiner_point(),
    })
}

/// Per-node residual of `div(Du/|Du|) − |Du|^{−3}` by central differences;
/// `None` on nodes whose stencil is not fully resolved, where `Du` vanishes,
/// or within [`CORE_EXCLUSION`] spacings of the extinction point.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    grid: GridSpec,
    values: Vec<Option<f64>>,
    excluded_core: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    pub max: f64,
    pub median: f64,
    pub count: usize,
    /// Eligible-stencil nodes dropped for lying near the extinction point.
    pub excluded_core: usize,
}

impl Residual {
    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    /// Max and median of `|residual|` over nodes accepted by `filter`.
    pub fn stats(&self, filter: impl Fn(Point) -> bool) -> ResidualStats {
        let mut abs: Vec<f64> = (0..self.grid.len())
            .filter_map(|k| {
                let (i, j) = self.grid.coords(k);
                self.values[k]
                    .filter(|_| filter(self.grid.node(i, j)))
                    .map(f64::abs)
            })
            .collect();
        abs.sort_by(f64::total_cmp);
        let median = match abs.len() {
            0 => f64::NAN,
            m if m % 2 == 1 => abs[m / 2],
            m => 0.5 * (abs[m / 2 - 1] + abs[m / 2]),
        };
        ResidualStats {
            max: abs.last().copied().unwrap_or(f64::NAN),
            median,
            count: abs.len(),
            excluded_core: self.excluded_core,
        }
    }
}

pub fn pde_residual(field: &ArrivalField) -> Residual {
    let g = &field.grid;
    let hs = g.spacing;
    let core = CORE_EXCLUSION * hs;
    let mut excluded_core = 0;
    let mut values = vec![None; g.len()];
    for j in 1..g.ny.saturating_sub(1) {
        for i in 1..g.nx.saturating_sub(1) {
            let at = |di: isize, dj: isize| {
                let k = g.index((i as isize + di) as usize, (j as isize + dj) as usize);
                field.resolved[k].then_some(field.u[k])
            };
            let mut s = [[0.0; 3]; 3];
            let mut ok = true;
            for (a, row) in s.iter_mut().enumerate() {
                for (b, v) in row.iter_mut().enumerate() {
                    match at(a as isize - 1, b as isize - 1) {
                        Some(x) => *v = x,
                        None => ok = false,
                    }
                }
            }
            if !ok {
                continue;
            }
            if (g.node(i, j) - field.extinction_point).norm() <= core {
                excluded_core += 1;
                continue;
            }
            // s[a][b] = u(i + a − 1, j + b − 1)
            let ux = (s[2][1] - s[0][1]) / (2.0 * hs);
            let uy = (s[1][2] - s[1][0]) / (2.0 * hs);
            let uxx = (s[2][1] - 2.0 * s[1][1] + s[0][1]) / (hs * hs);
            let uyy = (s[1][2] - 2.0 * s[1][1] + s[1][0]) / (hs * hs);
            let uxy = (s[2][2] - s[2][0] - s[0][2] + s[0][0]) / (4.0 * hs * hs);
            let grad2 = ux * ux + uy * uy;
            if !(grad2 > 0.0) {
                continue;
            }
            let grad3 = grad2 * grad2.sqrt();
            let curvature = (uxx * uy * uy - 2.0 * ux * uy * uxy + uyy * ux * ux) / grad3;
            values[g.index(i, j)] = Some(curvature - grad3.recip());
        }
    }
    Residual {
        grid: *g,
        values,
        excluded_core,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelCheck {
    pub level: f64,
    pub nodes: usize,
    /// Nodes strictly inside the hull of the sublevel set but above the level.
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcavityReport {
    pub h0: f64,
    pub passed: bool,
    pub triples: usize,
    pub midpoint_violations: usize,
    /// Largest `φ(mid) − (φ(a) + φ(b))/2`; negative when every triple is
    /// strictly convex.
    pub worst_excess: f64,
    pub worst_at: Option<[f64; 2]>,
    pub levels: Vec<LevelCheck>,
}

/// Convexity of `φ = −log(h0 − u)` on `Ω = {u < h0}` and of sampled level
/// sets `{u ≤ s}`, `s < h0`.
///
/// Midpoint triples along the axes and diagonals at strides 1, 2, 4 and 8
/// must satisfy `φ(mid) ≤ (φ(a) + φ(b))/2 + 1e−6`. Nodes never swept (the
/// core inside the final snapshot) are skipped; `Ω` must reach past them and
/// must not touch the edge of the swept region.
pub fn log_concavity_check(field: &ArrivalField, h0: f64) -> Result<ConcavityReport> {
    if !(h0 > 0.0 && h0.is_finite()) {
        return Err(Error::invalid(format!(
            "domain level {h0} must be positive"
        )));
    }
    if h0 <= field.u_floor {
        return Err(Error::Unresolved(format!(
            "domain level {h0} lies inside the unswept core (u_floor = {})",
            field.u_floor
        )));
    }
    let g = &field.grid;
    let in_omega = |k: usize| field.resolved[k] && field.u[k] < h0;
    for k in 0..g.len() {
        if !in_omega(k) {
            continue;
        }
        let (i, j) = g.coords(k);
        if i == 0 || j == 0 || i + 1 == g.nx || j + 1 == g.ny {
            return Err(Error::invalid(format!(
                "domain level {h0} reaches the grid edge"
            )));
        }
        let nbrs = [
            g.index(i - 1, j),
            g.index(i + 1, j),
            g.index(i, j - 1),
            g.index(i, j + 1),
        ];
        if nbrs.iter().any(|&m| !field.inside[m]) {
            return Err(Error::invalid(format!(
                "domain level {h0} reaches the edge of the swept region"
            )));
        }
    }

    let phi: Vec<f64> = (0..g.len())
        .map(|k| {
            if in_omega(k) {
                -(h0 - field.u[k]).ln()
            } else {
                f64::NAN
            }
        })
        .collect();
    let dirs: [(isize, isize); 4] = [(1, 0), (0, 1), (1, 1), (1, -1)];
    let mut triples = 0;
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut worst_at = None;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let k = g.index(i, j);
            if !in_omega(k) {
                continue;
            }
            for &(dx, dy) in &dirs {
                for &s in &STRIDES {
                    let (s, ii, jj) = (s as isize, i as isize, j as isize);
                    let (ax, ay, bx, by) = (ii - s * dx, jj - s * dy, ii + s * dx, jj + s * dy);
                    let in_grid = |x: isize, y: isize| {
                        x >= 0 && y >= 0 && (x as usize) < g.nx && (y as usize) < g.ny
                    };
                    if !in_grid(ax, ay) || !in_grid(bx, by) {
                        continue;
                    }
                    let (ka, kb) = (
                        g.index(ax as usize, ay as usize),
                        g.index(bx as usize, by as usize),
                    );
                    if !in_omega(ka) || !in_omega(kb) {
                        continue;
                    }
                    triples += 1;
                    let excess = phi[k] - 0.5 * (phi[ka] + phi[kb]);
                    if excess > worst {
                        worst = excess;
                        let p = g.node(i, j);
                        worst_at = Some([p.x, p.y]);
                    }
                    if excess > MIDPOINT_SLACK {
                        violations += 1;
                    }
                }
            }
        }
    }

    let levels = level_checks(field, h0)?;
    let passed = violations == 0 && levels.iter().all(|l| l.violations == 0);
    Ok(ConcavityReport {
        h0,
        passed,
        triples,
        midpoint_violations: violations,
        worst_excess: worst,
        worst_at,
        levels,
    })
}

fn level_checks(field: &ArrivalField, h0: f64) -> Result<Vec<LevelCheck>> {
    let g = &field.grid;
    let lowest = (0..g.len())
        .filter(|&k| field.resolved[k])
        .map(|k| field.u[k])
        .fold(f64::INFINITY, f64::min)
        .max(field.u_floor);
    let mut out = Vec::with_capacity(LEVEL_COUNT);
    for m in 1..=LEVEL_COUNT {
        let level = lowest + (h0 - lowest) * m as f64 / (LEVEL_COUNT + 1) as f64;
        let members = field.sublevel(level);
        let pts: Vec<Point> = members
            .iter()
            .map(|&k| {
                let (i, j) = g.coords(k);
                g.node(i, j)
            })
            .collect();
        if pts.len() < 3 {
            out.push(LevelCheck {
                level,
                nodes: pts.len(),
                violations: 0,
            });
            continue;
        }
        let hull = match ConvexPolygon::convex_hull(&pts) {
            Ok(h) => h,
            Err(_) => {
                out.push(LevelCheck {
                    level,
                    nodes: pts.len(),
                    violations: 0,
                });
                continue;
            }
        };
        let violations = (0..g.len())
            .filter(|&k| field.resolved[k] && field.u[k] > level + MIDPOINT_SLACK)
            .filter(|&k| {
                let (i, j) = g.coords(k);
                hull.contains(&g.node(i, j), -1e-9 * g.spacing)
            })
            .count();
        out.push(LevelCheck {
            level,
            nodes: pts.len(),
            violations,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{support_of_ellipse, AffineMap, Ellipse};
    use crate::flow::{evolve, Cadence, EvolveOptions, Stop};
    use crate::normalization::unimodular_normalizer;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn fine_options() -> EvolveOptions {
        EvolveOptions {
            cadence: Cadence::AreaRatio(0.97),
            ..EvolveOptions::default()
        }
    }

    fn circle_field(nodes: usize) -> ArrivalField {
        let c = SupportCurve::circle(128, 1.0, Point::zeros()).unwrap();
        let traj = evolve(&c, Stop::AreaFloor(PI / 100.0), &fine_options()).unwrap();
        let grid = GridSpec::covering(&c, nodes).unwrap();
        reconstruct(&traj, &grid).unwrap()
    }

    #[test]
    fn radial_examples() {
        assert_eq!(radial_exact(Point::zeros()), 0.0);
        assert_abs_diff_eq!(radial_exact(Point::new(0.6, 0.8)), 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(radial_exact(Point::new(0.0, 8.0)), 12.0, epsilon = 1e-12);
    }

    #[test]
    fn grid_covers_curve() {
        let c = SupportCurve::circle(64, 2.0, Point::new(1.0, -1.0)).unwrap();
        let g = GridSpec::covering(&c, 101).unwrap();
        assert_abs_diff_eq!(g.node(50, 50).x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.node(50, 50).y, -1.0, epsilon = 1e-12);
        assert!(g.node(0, 0).x < -1.0 && g.node(100, 100).y > 1.0);
        let (i, j) = g.coords(g.index(7, 9));
        assert_eq!((i, j), (7, 9));
    }

    #[test]
    fn circle_field_matches_radial_solution() {
        let f = circle_field(96);
        assert!(f.resolved_count() > 5000);
        assert!(
            f.max_error(radial_exact) < 1e-3,
            "max error {}",
            f.max_error(radial_exact)
        );
        let g = f.grid();
        // corners lie outside the unit disk
        assert!(!f.inside()[g.index(0, 0)]);
        assert!(f.tau()[g.index(0, 0)].is_nan());
        assert_abs_diff_eq!(f.extinction_time(), 0.75, epsilon = 1e-6);
        assert!(f.extinction_point().norm() < 1e-12);
    }

    #[test]
    fn ellipse_field_is_affine_radial() {
        let e = Ellipse::from_axes(Point::zeros(), 2.0, 0.5, 0.4).unwrap();
        let c = support_of_ellipse(&e, 128).unwrap();
        let traj = evolve(&c, Stop::AreaFloor(PI / 10.0), &fine_options()).unwrap();
        let grid = GridSpec::covering(&c, 128).unwrap();
        let f = reconstruct(&traj, &grid).unwrap();
        let a: AffineMap = unimodular_normalizer(&e).unwrap();
        let err = f.max_error(|x| radial_exact(a.apply(&x)));
        assert!(err < 1e-3, "max error {err}");
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let c = SupportCurve::circle(64, 1.0, Point::zeros()).unwrap();
        let traj = evolve(&c, Stop::AreaFloor(PI / 100.0), &EvolveOptions::default()).unwrap();
        let grid = GridSpec::covering(&c, 16).unwrap();
        match reconstruct(&traj, &grid) {
            Err(Error::Resolution { suggested_grid, .. }) => assert!(suggested_grid > 16),
            other => panic!("expected resolution error, got {other:?}"),
        }
    }

    #[test]
    fn level_sets_match_snapshots() {
        let f = circle_field(128);
        let h = f.grid().spacing;
        for level in [0.1, 0.3, 0.6] {
            let support = f.level_set_support(level, 64, Point::zeros()).unwrap();
            let radius = (level / 0.75).powf(0.75);
            for s in support {
                assert!((s - radius).abs() < 2.0 * h);
            }
        }
    }

    #[test]
    fn exact_residual_examples() {
        let grid = GridSpec::new(Point::new(-1.0, -1.0), 2.0 / 255.0, 256, 256).unwrap();
        let field = ArrivalField::from_function(grid, Point::zeros(), radial_exact);
        let annulus = |p: Point| (0.2..=0.9).contains(&p.norm());
        let stats = pde_residual(&field).stats(annulus);
        assert!(stats.max < 1e-2, "max {}", stats.max);

        let linear = ArrivalField::from_function(grid, Point::new(5.0, 5.0), |p| 2.0 * p.x);
        let stats = pde_residual(&linear).stats(|_| true);
        assert_abs_diff_eq!(stats.median, 0.125, epsilon = 1e-9);
        assert_abs_diff_eq!(stats.max, 0.125, epsilon = 1e-9);
    }

    #[test]
    fn residual_converges_under_refinement() {
        let annulus = |p: Point| (0.2..=0.9).contains(&p.norm());
        let median = |n: usize| {
            let grid = GridSpec::new(Point::new(-1.0, -1.0), 2.0 / (n - 1) as f64, n, n).unwrap();
            let field = ArrivalField::from_function(grid, Point::zeros(), radial_exact);
            pde_residual(&field).stats(annulus).median
        };
        assert!(median(257) <= 0.5 * median(129));
    }

    #[test]
    fn log_concavity_of_radial_field() {
        let grid = GridSpec::new(Point::new(-1.2, -1.2), 2.4 / 120.0, 121, 121).unwrap();
        let field = ArrivalField::from_function(grid, Point::zeros(), radial_exact);
        let report = log_concavity_check(&field, 0.75).unwrap();
        assert!(report.passed, "{report:?}");
        assert!(report.triples > 10_000);
        assert!(report.levels.iter().all(|l| l.nodes > 0));

        // a concave profile along rays must be caught
        let root = field.map_u(f64::sqrt);
        let report = log_concavity_check(&root, 0.75f64.sqrt()).unwrap();
        assert!(!report.passed);
        assert!(report.midpoint_violations > 0);
    }

    #[test]
    fn log_concavity_guards() {
        let f = circle_field(96);
        assert!(matches!(
            log_concavity_check(&f, 0.5 * f.u_floor()),
            Err(Error::Unresolved(_))
        ));
        assert!(matches!(
            log_concavity_check(&f, 10.0),
            Err(Error::InvalidInput(_))
        ));
        let report = log_concavity_check(&f, 0.7).unwrap();
        assert!(report.passed, "{report:?}");
    }
}
