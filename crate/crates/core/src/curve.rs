//! Convex curves stored as support-function samples, plus the planar
//! primitives (polygons, ellipses, affine maps) that feed them.
//!
//! A [`SupportCurve`] holds `h_j = h(θ_j)` on the uniform grid
//! `θ_j = 2πj/n`, measured about `origin`. With `u = (cos θ, sin θ)` the
//! boundary point of normal `u` is `origin + h u + h' u^⊥` and the radius of
//! curvature is `ρ = h + h''`.

use std::f64::consts::PI;

use nalgebra::{Matrix2, SymmetricEigen, Vector2};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{self, SpectralWorkspace, TrigSeries};

pub type Point = Vector2<f64>;

/// Smallest grid accepted for a [`SupportCurve`].
pub const MIN_SAMPLES: usize = 16;

/// Default rounding radius for polygon input, as a fraction of the diameter.
pub const DEFAULT_ROUNDING: f64 = 1e-2;

#[inline]
pub fn unit(theta: f64) -> Point {
    Point::new(theta.cos(), theta.sin())
}

#[inline]
fn cross(a: &Point, b: &Point) -> f64 {
    a.x * b.y - a.y * b.x
}

// ---------------------------------------------------------------------------
// ConvexPolygon

/// Counterclockwise polygon with vertices in convex position.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon {
    vertices: Vec<Point>,
}

impl ConvexPolygon {
    pub fn new(vertices: Vec<Point>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::invalid("polygon needs at least 3 vertices"));
        }
        if vertices
            .iter()
            .any(|v| !v.x.is_finite() || !v.y.is_finite())
        {
            return Err(Error::invalid("polygon has non-finite coordinates"));
        }
        let poly = ConvexPolygon { vertices };
        let area = poly.signed_area();
        if area <= 0.0 {
            return Err(Error::invalid(format!(
                "polygon must be counterclockwise with positive area (signed area {area:e})"
            )));
        }
        let scale = poly.diameter().powi(2);
        let m = poly.vertices.len();
        let mut turning = 0.0;
        for i in 0..m {
            let a = poly.vertices[(i + m - 1) % m];
            let b = poly.vertices[i];
            let c = poly.vertices[(i + 1) % m];
            let (d_in, d_out) = (b - a, c - b);
            let turn = cross(&d_in, &d_out);
            if turn < -1e-9 * scale {
                return Err(Error::invalid(format!(
                    "polygon is not convex at vertex {i}"
                )));
            }
            turning += turn.atan2(d_in.dot(&d_out));
        }
        if (turning - 2.0 * PI).abs() > 1e-6 {
            return Err(Error::invalid("polygon winds more than once"));
        }
        Ok(poly)
    }

    /// Convex hull (Andrew's monotone chain) of a point cloud.
    pub fn convex_hull(points: &[Point]) -> Result<Self> {
        let mut pts: Vec<Point> = points.to_vec();
        pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
        pts.dedup();
        if pts.len() < 3 {
            return Err(Error::invalid(
                "convex hull needs at least 3 distinct points",
            ));
        }
        let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
        for pass in 0..2 {
            let start = hull.len();
            let iter: Box<dyn Iterator<Item = &Point>> = if pass == 0 {
                Box::new(pts.iter())
            } else {
                Box::new(pts.iter().rev())
            };
            for p in iter {
                while hull.len() >= start + 2 {
                    let a = hull[hull.len() - 2];
                    let b = hull[hull.len() - 1];
                    if cross(&(b - a), &(p - a)) <= 0.0 {
                        hull.pop();
                    } else {
                        break;
                    }
                }
                hull.push(*p);
            }
            hull.pop();
        }
        if hull.len() < 3 {
            return Err(Error::invalid("points are collinear"));
        }
        ConvexPolygon::new(hull)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn signed_area(&self) -> f64 {
        let m = self.vertices.len();
        (0..m)
            .map(|i| cross(&self.vertices[i], &self.vertices[(i + 1) % m]))
            .sum::<f64>()
            / 2.0
    }

    pub fn vertex_centroid(&self) -> Point {
        self.vertices.iter().sum::<Point>() / self.vertices.len() as f64
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                d = d.max((a - b).norm());
            }
        }
        d
    }

    /// Edges as `(start, end)` pairs, counterclockwise.
    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let m = self.vertices.len();
        (0..m).map(move |i| (self.vertices[i], self.vertices[(i + 1) % m]))
    }

    /// Support value `max_v ⟨v - origin, u⟩`.
    pub fn support(&self, origin: &Point, u: &Point) -> f64 {
        self.vertices
            .iter()
            .map(|v| (v - origin).dot(u))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Steiner point: vertices weighted by exterior angle.
    pub fn steiner_point(&self) -> Point {
        let m = self.vertices.len();
        let mut s = Point::zeros();
        for i in 0..m {
            let d_in = self.vertices[i] - self.vertices[(i + m - 1) % m];
            let d_out = self.vertices[(i + 1) % m] - self.vertices[i];
            let ext = cross(&d_in, &d_out).atan2(d_in.dot(&d_out));
            s += self.vertices[i] * ext;
        }
        s / (2.0 * PI)
    }

    /// True if `p` lies inside or within `slack` of the boundary.
    pub fn contains(&self, p: &Point, slack: f64) -> bool {
        self.edges().all(|(a, b)| {
            let d = b - a;
            cross(&d, &(p - a)) / d.norm() >= -slack
        })
    }

    /// Parses the exchange format: one `x y` pair per line. Blank lines and
    /// `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut vertices = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split_whitespace().map(str::parse::<f64>);
            match (fields.next(), fields.next(), fields.next()) {
                (Some(Ok(x)), Some(Ok(y)), None) => vertices.push(Point::new(x, y)),
                _ => {
                    return Err(Error::invalid(format!(
                        "line {}: expected `x y`, got {line:?}",
                        lineno + 1
                    )))
                }
            }
        }
        ConvexPolygon::new(vertices)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            out.push_str(&format!("{} {}\n", v.x, v.y));
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Ellipse

/// `E = { x : (x - c)ᵀ M⁻¹ (x - c) ≤ 1 }` for a symmetric positive-definite `M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EllipseRepr", into = "EllipseRepr")]
pub struct Ellipse {
    center: Point,
    shape: Matrix2<f64>,
}

#[derive(Serialize, Deserialize)]
struct EllipseRepr {
    center: [f64; 2],
    shape: [[f64; 2]; 2],
}

impl From<Ellipse> for EllipseRepr {
    fn from(e: Ellipse) -> Self {
        let m = e.shape;
        EllipseRepr {
            center: [e.center.x, e.center.y],
            shape: [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]],
        }
    }
}

impl TryFrom<EllipseRepr> for Ellipse {
    type Error = Error;
    fn try_from(r: EllipseRepr) -> Result<Self> {
        Ellipse::new(
            Point::new(r.center[0], r.center[1]),
            Matrix2::new(r.shape[0][0], r.shape[0][1], r.shape[1][0], r.shape[1][1]),
        )
    }
}

impl Ellipse {
    pub fn new(center: Point, shape: Matrix2<f64>) -> Result<Self> {
        if shape.iter().any(|v| !v.is_finite()) || !center.x.is_finite() || !center.y.is_finite() {
            return Err(Error::invalid("ellipse has non-finite entries"));
        }
        let asym = (shape[(0, 1)] - shape[(1, 0)]).abs();
        if asym > 1e-12 * shape.norm().max(1e-300) {
            return Err(Error::invalid("ellipse shape matrix is not symmetric"));
        }
        let shape = (shape + shape.transpose()) / 2.0;
        let eig = SymmetricEigen::new(shape);
        if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
            return Err(Error::invalid(
                "ellipse shape matrix is not positive definite",
            ));
        }
        Ok(Ellipse { center, shape })
    }

    pub fn disk(center: Point, radius: f64) -> Result<Self> {
        Ellipse::new(center, Matrix2::identity() * (radius * radius))
    }

    /// Ellipse with semi-axes `a` (along `angle`) and `b`.
    pub fn from_axes(center: Point, a: f64, b: f64, angle: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::invalid("semi-axes must be positive"));
        }
        let (c, s) = (angle.cos(), angle.sin());
        let r = Matrix2::new(c, -s, s, c);
        let d = Matrix2::new(a * a, 0.0, 0.0, b * b);
        Ellipse::new(center, r * d * r.transpose())
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn shape(&self) -> Matrix2<f64> {
        self.shape
    }

    /// Semi-axes `(major, minor)`.
    pub fn semi_axes(&self) -> (f64, f64) {
        let eig = SymmetricEigen::new(self.shape);
        let (l0, l1) = (eig.eigenvalues[0], eig.eigenvalues[1]);
        (l0.max(l1).sqrt(), l0.min(l1).sqrt())
    }

    pub fn area(&self) -> f64 {
        PI * self.shape.determinant().sqrt()
    }

    /// Symmetric square root of the shape matrix.
    pub fn sqrt_shape(&self) -> Matrix2<f64> {
        let eig = SymmetricEigen::new(self.shape);
        let d = Matrix2::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
        eig.eigenvectors * d * eig.eigenvectors.transpose()
    }

    /// `⟨c - origin, u⟩ + sqrt(uᵀ M u)`.
    pub fn support(&self, origin: &Point, u: &Point) -> f64 {
        (self.center - origin).dot(u) + (u.transpose() * self.shape * u)[(0, 0)].sqrt()
    }

    /// `(p - c)ᵀ M⁻¹ (p - c)`; at most 1 inside the ellipse.
    pub fn quad_form(&self, p: &Point) -> f64 {
        let d = p - self.center;
        let inv = self
            .shape
            .try_inverse()
            .expect("positive-definite shape is invertible");
        (d.transpose() * inv * d)[(0, 0)]
    }

    pub fn boundary_point(&self, t: f64) -> Point {
        self.center + self.sqrt_shape() * unit(t)
    }

    /// Same ellipse dilated by `factor` about its center.
    pub fn dilated(&self, factor: f64) -> Ellipse {
        Ellipse {
            center: self.center,
            shape: self.shape * (factor * factor),
        }
    }
}

// ---------------------------------------------------------------------------
// AffineMap

/// `x ↦ linear · x + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    linear: Matrix2<f64>,
    translation: Point,
    unimodular: bool,
}

const UNIMODULAR_TOL: f64 = 1e-12;

impl AffineMap {
    pub fn new(linear: Matrix2<f64>, translation: Point) -> Result<Self> {
        let det = linear.determinant();
        if !det.is_finite() || det.abs() <= 1e-14 * linear.norm_squared().max(1e-300) {
            return Err(Error::invalid("affine map is singular"));
        }
        Ok(AffineMap {
            linear,
            translation,
            unimodular: (det - 1.0).abs() <= UNIMODULAR_TOL,
        })
    }

    /// Like [`new`](Self::new) but rejects maps whose determinant is not 1.
    pub fn unimodular(linear: Matrix2<f64>, translation: Point) -> Result<Self> {
        let map = AffineMap::new(linear, translation)?;
        if !map.unimodular {
            return Err(Error::invalid(format!(
                "map is not unimodular (det = {})",
                linear.determinant()
            )));
        }
        Ok(map)
    }

    /// Caller guarantees `det(linear) = 1` up to round-off.
    pub(crate) fn unimodular_trusted(linear: Matrix2<f64>, translation: Point) -> Self {
        AffineMap {
            linear,
            translation,
            unimodular: true,
        }
    }

    pub fn identity() -> Self {
        AffineMap {
            linear: Matrix2::identity(),
            translation: Point::zeros(),
            unimodular: true,
        }
    }

    pub fn scaling(factor: f64) -> Result<Self> {
        AffineMap::new(Matrix2::identity() * factor, Point::zeros())
    }

    pub fn linear(&self) -> Matrix2<f64> {
        self.linear
    }

    pub fn translation(&self) -> Point {
        self.translation
    }

    pub fn is_unimodular(&self) -> bool {
        self.unimodular
    }

    pub fn det(&self) -> f64 {
        self.linear.determinant()
    }

    pub fn condition_number(&self) -> f64 {
        let sv = self.linear.singular_values();
        sv.max() / sv.min()
    }

    pub fn apply(&self, p: &Point) -> Point {
        self.linear * p + self.translation
    }

    /// `other ∘ self`.
    pub fn then(&self, other: &AffineMap) -> AffineMap {
        let linear = other.linear * self.linear;
        AffineMap {
            linear,
            translation: other.linear * self.translation + other.translation,
            unimodular: (linear.determinant() - 1.0).abs() <= UNIMODULAR_TOL,
        }
    }

    pub fn inverse(&self) -> AffineMap {
        let inv = self
            .linear
            .try_inverse()
            .expect("constructor rejects singular maps");
        AffineMap {
            linear: inv,
            translation: -(inv * self.translation),
            unimodular: self.unimodular,
        }
    }

    pub fn apply_ellipse(&self, e: &Ellipse) -> Result<Ellipse> {
        Ellipse::new(
            self.apply(&e.center),
            self.linear * e.shape * self.linear.transpose(),
        )
    }
}

// ---------------------------------------------------------------------------
// SupportCurve

/// Cosine/sine amplitudes of one Fourier mode of a support function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierMode {
    pub k: usize,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

/// Strictly convex closed curve sampled through its support function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SupportCurveRepr", into = "SupportCurveRepr")]
pub struct SupportCurve {
    h: Vec<f64>,
    origin: Point,
}

#[derive(Serialize, Deserialize)]
struct SupportCurveRepr {
    n_samples: usize,
    origin: [f64; 2],
    h: Vec<f64>,
}

impl From<SupportCurve> for SupportCurveRepr {
    fn from(c: SupportCurve) -> Self {
        SupportCurveRepr {
            n_samples: c.h.len(),
            origin: [c.origin.x, c.origin.y],
            h: c.h,
        }
    }
}

impl TryFrom<SupportCurveRepr> for SupportCurve {
    type Error = Error;
    fn try_from(r: SupportCurveRepr) -> Result<Self> {
        if r.n_samples != r.h.len() {
            return Err(Error::invalid(format!(
                "n_samples = {} but {} support values given",
                r.n_samples,
                r.h.len()
            )));
        }
        SupportCurve::new(r.h, Point::new(r.origin[0], r.origin[1]))
    }
}

impl SupportCurve {
    /// Validates grid size, finiteness, strict convexity and positive area.
    pub fn new(h: Vec<f64>, origin: Point) -> Result<Self> {
        if h.len() < MIN_SAMPLES {
            return Err(Error::invalid(format!(
                "need at least {MIN_SAMPLES} support samples, got {}",
                h.len()
            )));
        }
        if h.iter().any(|v| !v.is_finite()) || !origin.x.is_finite() || !origin.y.is_finite() {
            return Err(Error::invalid("support samples must be finite"));
        }
        let curve = SupportCurve { h, origin };
        curve.radius_of_curvature()?;
        let area = curve.area();
        if !(area > 0.0) {
            return Err(Error::invalid(format!("curve encloses no area ({area:e})")));
        }
        Ok(curve)
    }

    /// Skips validation; callers must already know `h + h'' > 0`.
    pub(crate) fn from_raw(h: Vec<f64>, origin: Point) -> Self {
        SupportCurve { h, origin }
    }

    pub fn circle(n: usize, radius: f64, center: Point) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::invalid("circle radius must be positive"));
        }
        SupportCurve::new(vec![radius; n], center)
    }

    /// `h(θ) = base + Σ (cos_k cos kθ + sin_k sin kθ)` about `center`.
    pub fn from_fourier(n: usize, base: f64, modes: &[FourierMode], center: Point) -> Result<Self> {
        let h = spectral::angle_grid(n)
            .iter()
            .map(|&t| {
                base + modes
                    .iter()
                    .map(|m| {
                        let kt = m.k as f64 * t;
                        m.cos * kt.cos() + m.sin * kt.sin()
                    })
                    .sum::<f64>()
            })
            .collect();
        SupportCurve::new(h, center)
    }

    pub fn n_samples(&self) -> usize {
        self.h.len()
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn dtheta(&self) -> f64 {
        2.0 * PI / self.h.len() as f64
    }

    pub fn angle(&self, j: usize) -> f64 {
        j as f64 * self.dtheta()
    }

    pub fn normal(&self, j: usize) -> Point {
        unit(self.angle(j))
    }

    /// `ρ_j = h_j + h''_j`; errors on the first non-positive sample.
    pub fn radius_of_curvature(&self) -> Result<Vec<f64>> {
        let mut rho = vec![0.0; self.h.len()];
        SpectralWorkspace::new(self.h.len()).plus_second_derivative(&self.h, &mut rho);
        check_positive(&rho, None)?;
        Ok(rho)
    }

    pub fn derivative(&self) -> Vec<f64> {
        spectral::first_derivative(&self.h)
    }

    /// `½ ∫ (h² − h'²) dθ`, trapezoid rule.
    pub fn area(&self) -> f64 {
        let dh = self.derivative();
        0.5 * self.dtheta()
            * self
                .h
                .iter()
                .zip(&dh)
                .map(|(h, d)| h * h - d * d)
                .sum::<f64>()
    }

    /// Boundary points `origin + h u + h' u^⊥`, one per grid normal.
    pub fn to_points(&self) -> Vec<Point> {
        let dh = self.derivative();
        (0..self.h.len())
            .map(|j| {
                let u = self.normal(j);
                let perp = Point::new(-u.y, u.x);
                self.origin + u * self.h[j] + perp * dh[j]
            })
            .collect()
    }

    pub fn to_polygon(&self) -> Result<ConvexPolygon> {
        self.radius_of_curvature()?;
        ConvexPolygon::new(self.to_points())
    }

    /// Trigonometric interpolant of the support samples.
    pub fn support_series(&self) -> TrigSeries {
        TrigSeries::from_samples(&self.h)
    }

    /// `s = origin + (1/π) ∫ h u dθ`.
    pub fn steiner_point(&self) -> Point {
        let sum: Point = (0..self.h.len()).map(|j| self.normal(j) * self.h[j]).sum();
        self.origin + sum * (self.dtheta() / PI)
    }

    /// Same body, support measured about `p`.
    pub fn recentered(&self, p: Point) -> SupportCurve {
        let shift = p - self.origin;
        let h = (0..self.h.len())
            .map(|j| self.h[j] - shift.dot(&self.normal(j)))
            .collect();
        SupportCurve { h, origin: p }
    }

    /// Body translated by `v`; the samples are unchanged.
    pub fn translated(&self, v: Point) -> SupportCurve {
        SupportCurve {
            h: self.h.clone(),
            origin: self.origin + v,
        }
    }

    /// Body scaled by `factor > 0` about the coordinate origin.
    pub fn scaled(&self, factor: f64) -> SupportCurve {
        assert!(factor > 0.0, "scale factor must be positive");
        SupportCurve {
            h: self.h.iter().map(|v| v * factor).collect(),
            origin: self.origin * factor,
        }
    }

    /// Trigonometric resampling onto `m` normals.
    pub fn resampled(&self, m: usize) -> Result<SupportCurve> {
        SupportCurve::new(spectral::resample(&self.h, m), self.origin)
    }

    /// Image under an affine map, resampled on `n` normals about the mapped
    /// origin, via `h_{LK}(ξ) = h_K(Lᵀξ)`.
    pub fn apply_affine(&self, map: &AffineMap, n: usize) -> Result<SupportCurve> {
        if n < MIN_SAMPLES {
            return Err(Error::invalid(format!("grid size {n} below {MIN_SAMPLES}")));
        }
        let series = self.support_series();
        let lt = map.linear().transpose();
        let h = spectral::angle_grid(n)
            .iter()
            .map(|&phi| {
                let w = lt * unit(phi);
                w.norm() * series.eval(w.y.atan2(w.x))
            })
            .collect();
        SupportCurve::new(h, map.apply(&self.origin))
    }

    /// Hausdorff distance `max_j |h1_j − h2_j|`, with `other` re-expressed
    /// about this curve's origin and both grids brought to the finer size.
    pub fn hausdorff(&self, other: &SupportCurve) -> f64 {
        let m = self.n_samples().max(other.n_samples());
        let a = spectral::resample(&self.h, m);
        let b = spectral::resample(&other.recentered(self.origin).h, m);
        a.iter()
            .zip(&b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    /// Discrete membership test `⟨p − o, u_j⟩ ≤ h_j + slack` for all `j`.
    pub fn contains(&self, p: &Point, slack: f64) -> bool {
        let d = p - self.origin;
        (0..self.h.len()).all(|j| d.dot(&self.normal(j)) <= self.h[j] + slack)
    }
}

pub(crate) fn check_positive(rho: &[f64], stage: Option<usize>) -> Result<()> {
    match rho.iter().position(|&r| !(r > 0.0)) {
        Some(index) => Err(Error::LostConvexity {
            index,
            rho: rho[index],
            stage,
        }),
        None => Ok(()),
    }
}

/// Exact support samples of an ellipse.
pub fn support_of_ellipse(e: &Ellipse, n: usize) -> Result<SupportCurve> {
    let origin = e.center();
    let h = spectral::angle_grid(n)
        .iter()
        .map(|&t| e.support(&origin, &unit(t)))
        .collect();
    SupportCurve::new(h, origin)
}

/// Raw support samples `max_v ⟨v − origin, u_j⟩` of a polygon. These have
/// kinks at edge normals and in general do not form a valid [`SupportCurve`].
pub fn polygon_support(poly: &ConvexPolygon, n: usize, origin: &Point) -> Vec<f64> {
    spectral::angle_grid(n)
        .iter()
        .map(|&t| poly.support(origin, &unit(t)))
        .collect()
}

/// Polygon rounded by a disk of radius `0.01 · diameter`; see
/// [`from_polygon_rounded`].
pub fn from_polygon(poly: &ConvexPolygon, n: usize) -> Result<SupportCurve> {
    from_polygon_rounded(poly, n, DEFAULT_ROUNDING * poly.diameter())
}

/// Smooth strictly convex approximation of a polygon, measured about the
/// vertex centroid.
///
/// The polygon's curvature measure (a point mass of edge length at each edge
/// normal) is spread with a wrapped Gaussian of angular width two grid cells,
/// a disk of radius `r_smooth` is added, and the support function is rebuilt
/// from its Fourier series. The first harmonic is kept exact so the Steiner
/// point does not move.
pub fn from_polygon_rounded(poly: &ConvexPolygon, n: usize, r_smooth: f64) -> Result<SupportCurve> {
    if n < MIN_SAMPLES {
        return Err(Error::invalid(format!("grid size {n} below {MIN_SAMPLES}")));
    }
    if !(r_smooth >= 0.0) {
        return Err(Error::invalid("rounding radius must be non-negative"));
    }
    let origin = poly.vertex_centroid();
    let steiner = poly.steiner_point() - origin;
    let width = 2.0 * 2.0 * PI / n as f64;

    let edges: Vec<(f64, f64)> = poly
        .edges()
        .map(|(a, b)| {
            let d = b - a;
            (d.norm(), (-d.x).atan2(d.y))
        })
        .collect();

    let mut coeffs = vec![Complex64::default(); n];
    let perimeter: f64 = edges.iter().map(|e| e.0).sum();
    coeffs[0] = Complex64::new(perimeter / (2.0 * PI) + r_smooth, 0.0);
    coeffs[1] = Complex64::new(steiner.x / 2.0, -steiner.y / 2.0);
    coeffs[n - 1] = coeffs[1].conj();
    // strictly below Nyquist so every mode has its conjugate partner
    for k in 2..(n + 1) / 2 {
        let kf = k as f64;
        let mass: Complex64 = edges
            .iter()
            .map(|&(len, theta)| Complex64::from_polar(len, -kf * theta))
            .sum();
        let damp = (-0.5 * kf * kf * width * width).exp();
        let c = mass * (damp / ((1.0 - kf * kf) * 2.0 * PI));
        coeffs[k] = c;
        coeffs[n - k] = c.conj();
    }
    let mut h = vec![0.0; n];
    SpectralWorkspace::new(n).synthesize(&coeffs, &mut h);
    SupportCurve::new(h, origin).map_err(|e| match e {
        Error::LostConvexity { .. } => Error::invalid(format!(
            "rounding radius {r_smooth} too small for grid size {n}: {e}"
        )),
        other => other,
    })
}
