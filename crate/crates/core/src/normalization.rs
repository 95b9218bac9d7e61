//! John-ellipse normalization and blow-down rescaling.
//!
//! The minimum-volume enclosing (John) ellipse is found by a log-barrier
//! Newton method over the five ellipse parameters; Khachiyan's
//! multiplicative-weights iteration is available as a cross-check. A
//! unimodular map then sends the ellipse to a disk, and distances to that
//! disk measure how elliptic a curve is.

use nalgebra::{Matrix2, Matrix3, SMatrix, SVector, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::curve::{AffineMap, Ellipse, Point, SupportCurve};
use crate::error::{Error, Result};
use crate::flow::{FlowState, Trajectory};

pub const DEFAULT_MVEE_TOL: f64 = 1e-6;
pub const MVEE_MAX_ITERS: usize = 100_000;
/// Largest shape-matrix condition number accepted by the normalizer.
pub const MAX_CONDITION: f64 = 1e12;

/// MVEE together with its optimality certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct Mvee {
    pub ellipse: Ellipse,
    /// Normalized dual weights; the support points are those with weight
    /// bounded away from zero.
    pub weights: Vec<f64>,
    pub iterations: usize,
    /// `max_i (p_i − c)ᵀ M⁻¹ (p_i − c)`; at most `1 + tol`.
    pub max_quad_form: f64,
}

/// Minimum-volume enclosing ellipse of `points`, up to relative tolerance
/// `tol` in `(0, 1e-2]`: all points lie in `(1 + tol)·E` and the area is
/// within a factor `(1 + tol)²` of optimal.
pub fn mvee(points: &[Point], tol: f64) -> Result<Ellipse> {
    Ok(mvee_detailed(points, tol)?.ellipse)
}

/// Centered, unit-scale copy of `points`, rejecting degenerate input.
fn normalized_cloud(points: &[Point], tol: f64) -> Result<(Point, f64, Vec<Point>)> {
    if !(tol > 0.0 && tol <= 1e-2) {
        return Err(Error::invalid(format!(
            "MVEE tolerance {tol} not in (0, 1e-2]"
        )));
    }
    if points.len() < 3 {
        return Err(Error::invalid("MVEE needs at least 3 points"));
    }
    if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(Error::invalid("MVEE points must be finite"));
    }
    let mean = points.iter().sum::<Point>() / points.len() as f64;
    let scale = points.iter().map(|p| (p - mean).amax()).fold(0.0, f64::max);
    if !(scale > 0.0) {
        return Err(Error::invalid("MVEE points coincide"));
    }
    let cloud: Vec<Point> = points.iter().map(|p| (p - mean) / scale).collect();
    let cov: Matrix2<f64> = cloud
        .iter()
        .map(|q| q * q.transpose())
        .sum::<Matrix2<f64>>()
        / cloud.len() as f64;
    if cov.determinant() <= 1e-24 {
        return Err(Error::invalid("MVEE points are collinear"));
    }
    Ok((mean, scale, cloud))
}

type Vec5 = SVector<f64, 5>;
type Mat5 = SMatrix<f64, 5, 5>;

/// Parameters `(a11, a12, a22, b1, b2)` of `E = { x : |A x + b| ≤ 1 }`.
struct Barrier<'a> {
    cloud: &'a [Point],
    t: f64,
}

impl Barrier<'_> {
    fn matrix(x: &Vec5) -> Matrix2<f64> {
        Matrix2::new(x[0], x[1], x[1], x[2])
    }

    /// `−t log det A − Σ log(1 − |A p_i + b|²)`, or `None` when infeasible.
    fn value(&self, x: &Vec5) -> Option<f64> {
        let a = Self::matrix(x);
        let det = a.determinant();
        if !(x[0] > 0.0 && det > 0.0) {
            return None;
        }
        let b = Point::new(x[3], x[4]);
        let mut f = -self.t * det.ln();
        for p in self.cloud {
            let s = 1.0 - (a * p + b).norm_squared();
            if !(s > 0.0) {
                return None;
            }
            f -= s.ln();
        }
        Some(f)
    }

    fn gradient_hessian(&self, x: &Vec5) -> (Vec5, Mat5) {
        let a = Self::matrix(x);
        let ai = a.try_inverse().expect("feasible iterate has det A > 0");
        let basis = [
            Matrix2::new(1.0, 0.0, 0.0, 0.0),
            Matrix2::new(0.0, 1.0, 1.0, 0.0),
            Matrix2::new(0.0, 0.0, 0.0, 1.0),
        ];
        let mut g = Vec5::zeros();
        let mut h = Mat5::zeros();
        for m in 0..3 {
            g[m] = -self.t * (ai * basis[m]).trace();
            for n in 0..3 {
                h[(m, n)] = self.t * (ai * basis[m] * ai * basis[n]).trace();
            }
        }
        let b = Point::new(x[3], x[4]);
        for p in self.cloud {
            let r = a * p + b;
            let s = 1.0 - r.norm_squared();
            let jac = SMatrix::<f64, 2, 5>::new(p.x, p.y, 0.0, 1.0, 0.0, 0.0, p.x, p.y, 0.0, 1.0);
            let jr = jac.transpose() * r;
            g += jr * (2.0 / s);
            h += jac.transpose() * jac * (2.0 / s) + jr * jr.transpose() * (4.0 / (s * s));
        }
        (g, h)
    }
}

/// Log-barrier Newton method on `min −log det A` subject to
/// `|A p_i + b| ≤ 1`. The barrier weight grows tenfold per outer round until
/// the duality bound `N / t` drops below `tol`, so every iterate is strictly
/// feasible and the final area is within `e^{tol}` of optimal.
pub fn mvee_detailed(points: &[Point], tol: f64) -> Result<Mvee> {
    let (mean, scale, cloud) = normalized_cloud(points, tol)?;
    let n = cloud.len() as f64;
    let mut x = Vec5::new(1.0 / 1.5, 0.0, 1.0 / 1.5, 0.0, 0.0);
    let mut barrier = Barrier {
        cloud: &cloud,
        t: 1.0,
    };
    let mut iterations = 0;
    let max_newton = 200;
    loop {
        for _ in 0..max_newton {
            iterations += 1;
            let (g, h) = barrier.gradient_hessian(&x);
            let Some(chol) = h.cholesky() else {
                return Err(Error::Convergence {
                    iterations,
                    residual: f64::INFINITY,
                });
            };
            let step = -chol.solve(&g);
            let decrement = -g.dot(&step);
            if decrement / 2.0 <= 1e-12 {
                break;
            }
            let f0 = barrier.value(&x).expect("iterates stay feasible");
            let mut alpha = 1.0;
            let accepted = loop {
                let trial = x + step * alpha;
                if let Some(f) = barrier.value(&trial) {
                    if f <= f0 - 0.25 * alpha * decrement {
                        break Some(trial);
                    }
                }
                alpha *= 0.5;
                if alpha < 1e-12 {
                    break None;
                }
            };
            match accepted {
                Some(trial) => x = trial,
                // no representable decrease left at this barrier weight
                None => break,
            }
        }
        if n / barrier.t <= tol {
            break;
        }
        if iterations > MVEE_MAX_ITERS {
            return Err(Error::Convergence {
                iterations,
                residual: n / barrier.t,
            });
        }
        barrier.t *= 10.0;
    }

    let a = Barrier::matrix(&x);
    let ai = a.try_inverse().expect("final iterate is feasible");
    let b = Point::new(x[3], x[4]);
    let center = -(ai * b);
    let shape = ai * ai * (scale * scale);
    let ellipse = Ellipse::new(mean + center * scale, (shape + shape.transpose()) / 2.0)?;

    let mut weights: Vec<f64> = cloud
        .iter()
        .map(|p| 1.0 / (1.0 - (a * p + b).norm_squared()))
        .collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let max_quad_form = points
        .iter()
        .map(|p| ellipse.quad_form(p))
        .fold(0.0, f64::max);
    Ok(Mvee {
        ellipse,
        weights,
        iterations,
        max_quad_form,
    })
}

/// Khachiyan's multiplicative-weights MVEE with Todd–Yıldırım away steps.
///
/// Simple and dual-certified, but it can crawl when many points nearly tie
/// on the optimal boundary (densely sampled smooth curves); kept as an
/// independent cross-check of [`mvee_detailed`] at moderate tolerances.
pub fn mvee_khachiyan(points: &[Point], tol: f64, max_iters: usize) -> Result<Mvee> {
    let (mean, scale, cloud) = normalized_cloud(points, tol)?;
    let lifted: Vec<Vector3<f64>> = cloud.iter().map(|q| Vector3::new(q.x, q.y, 1.0)).collect();
    let n = lifted.len();
    let dim1 = 3.0;
    let mut u = vec![1.0 / n as f64; n];
    let mut g = vec![0.0; n];
    let mut iterations = 0;
    loop {
        let x: Matrix3<f64> = lifted
            .iter()
            .zip(&u)
            .filter(|(_, &w)| w > 0.0)
            .map(|(q, &w)| q * q.transpose() * w)
            .sum();
        let xinv = x.try_inverse().ok_or(Error::Convergence {
            iterations,
            residual: f64::INFINITY,
        })?;
        for (gi, q) in g.iter_mut().zip(&lifted) {
            *gi = (q.transpose() * xinv * q)[(0, 0)];
        }
        let (jmax, kmax) =
            g.iter()
                .copied()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
                );
        let (jmin, kmin) = g
            .iter()
            .copied()
            .enumerate()
            .filter(|&(i, _)| u[i] > 0.0)
            .fold(
                (0, f64::INFINITY),
                |acc, (i, v)| if v < acc.1 { (i, v) } else { acc },
            );
        let eps_plus = kmax / dim1 - 1.0;
        let eps_minus = 1.0 - kmin / dim1;
        if eps_plus <= tol && eps_minus <= tol {
            break;
        }
        if iterations == max_iters {
            return Err(Error::Convergence {
                iterations,
                residual: eps_plus.max(eps_minus),
            });
        }
        iterations += 1;
        if eps_plus >= eps_minus {
            let beta = (kmax - dim1) / (dim1 * (kmax - 1.0));
            u.iter_mut().for_each(|w| *w *= 1.0 - beta);
            u[jmax] += beta;
        } else {
            let drop = (dim1 - kmin) / (dim1 * (kmin - 1.0));
            let beta = drop.min(u[jmin] / (1.0 - u[jmin]));
            u.iter_mut().for_each(|w| *w *= 1.0 + beta);
            u[jmin] -= beta;
            if u[jmin] < 1e-300 {
                u[jmin] = 0.0;
            }
        }
    }

    let c: Point = cloud.iter().zip(&u).map(|(q, &w)| q * w).sum();
    let second: Matrix2<f64> = cloud
        .iter()
        .zip(&u)
        .map(|(q, &w)| q * q.transpose() * w)
        .sum();
    let shape = (second - c * c.transpose()) * 2.0 * (scale * scale);
    let ellipse = Ellipse::new(mean + c * scale, (shape + shape.transpose()) / 2.0)?;
    let max_quad_form = points
        .iter()
        .map(|p| ellipse.quad_form(p))
        .fold(0.0, f64::max);
    Ok(Mvee {
        ellipse,
        weights: u,
        iterations,
        max_quad_form,
    })
}

/// Determinant-one map `x ↦ (det M)^{1/4} M^{−1/2} (x − c)` taking `E` to
/// the centered disk of radius `(det M)^{1/4}`.
pub fn unimodular_normalizer(e: &Ellipse) -> Result<AffineMap> {
    let eig = SymmetricEigen::new(e.shape());
    let (lo, hi) = (eig.eigenvalues.min(), eig.eigenvalues.max());
    let condition = hi / lo;
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Conditioning { condition });
    }
    let det4 = (lo * hi).powf(0.25);
    let inv_sqrt = Matrix2::from_diagonal(&eig.eigenvalues.map(|l| det4 / l.sqrt()));
    let linear = eig.eigenvectors * inv_sqrt * eig.eigenvectors.transpose();
    let map = AffineMap::unimodular_trusted(linear, -(linear * e.center()));
    debug_assert!((map.det() - 1.0).abs() < 1e-10);
    Ok(map)
}

/// Radius of the disk `unimodular_normalizer(e)` maps `e` onto.
pub fn normalized_radius(e: &Ellipse) -> f64 {
    e.shape().determinant().powf(0.25)
}

/// Support of `c` after normalizing `e` to the unit disk, measured about
/// the image of the ellipse center.
pub fn normalized_support(c: &SupportCurve, e: &Ellipse) -> Result<Vec<f64>> {
    let map = unimodular_normalizer(e)?;
    let radius = normalized_radius(e);
    let img = c
        .apply_affine(&map, c.n_samples())?
        .recentered(Point::zeros());
    Ok(img.h().iter().map(|v| v / radius).collect())
}

/// `ε` with `(1 − ε)E ⊆ c ⊆ (1 + ε)E`, dilations about the ellipse center.
pub fn ellipse_eps(c: &SupportCurve, e: &Ellipse) -> Result<f64> {
    let h = normalized_support(c, e)?;
    let max = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = h.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((max - 1.0).max(1.0 - min))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoodShape {
    /// `(1/2)E ⊆ c ⊆ (1 + tol)E`.
    pub good: bool,
    /// Largest `λ` with `λE ⊆ c`.
    pub inner: f64,
    /// Smallest `μ` with `c ⊆ μE`.
    pub outer: f64,
}

/// Planar John containment check against `e` (normally the MVEE of `c`).
pub fn good_shape_check(c: &SupportCurve, e: &Ellipse, tol: f64) -> Result<GoodShape> {
    let h = normalized_support(c, e)?;
    let inner = h.iter().copied().fold(f64::INFINITY, f64::min);
    let outer = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(GoodShape {
        good: inner >= 0.5 && outer <= 1.0 + tol,
        inner,
        outer,
    })
}

/// Blow-down `X ↦ λ^{−3/4} X(λ t)` applied to every snapshot; the snapshot
/// at time `t` lands at time `t / λ`.
pub fn blow_down(traj: &Trajectory, lambda: f64) -> Result<Trajectory> {
    check_lambda(lambda)?;
    let mu = lambda.powf(-0.75);
    let states = traj
        .states()
        .iter()
        .map(|s| FlowState {
            t: s.t / lambda,
            curve: s.curve.scaled(mu),
        })
        .collect();
    Trajectory::from_states(states, traj.policy().clone())
}

/// Blow-down sampled at requested rescaled times, interpolating the source
/// trajectory linearly in time. Errors if some `λ t` is not covered.
pub fn blow_down_at(traj: &Trajectory, lambda: f64, times: &[f64]) -> Result<Trajectory> {
    check_lambda(lambda)?;
    let mu = lambda.powf(-0.75);
    let states = times
        .iter()
        .map(|&t| {
            Ok(FlowState {
                t,
                curve: traj.curve_at(lambda * t)?.scaled(mu),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Trajectory::from_states(states, traj.policy().clone())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!(
            "blow-down factor {lambda} must be positive"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedSnapshot {
    /// Unit-area curve whose John ellipse is a centered disk.
    pub curve: SupportCurve,
    /// Composite map from the input curve to `curve` (not unimodular).
    pub map: AffineMap,
    /// John ellipse of the input curve.
    pub ellipse: Ellipse,
    /// Isotropic factor applied after the unimodular map.
    pub area_scale: f64,
    pub eps: f64,
}

/// Recenter at the Steiner point, fit the John ellipse, map it to a disk and
/// rescale to unit area.
pub fn normalize_snapshot(c: &SupportCurve, tol: f64) -> Result<NormalizedSnapshot> {
    let centered = c.recentered(c.steiner_point());
    let ellipse = mvee(&centered.to_points(), tol)?;
    let unimodular = unimodular_normalizer(&ellipse)?;
    let img = centered
        .apply_affine(&unimodular, c.n_samples())?
        .recentered(Point::zeros());
    let area_scale = img.area().sqrt().recip();
    let curve = img.scaled(area_scale);
    let map = unimodular.then(&AffineMap::scaling(area_scale)?);
    let radius = normalized_radius(&ellipse);
    let max = img.h().iter().copied().fold(f64::NEG_INFINITY, f64::max) / radius;
    let min = img.h().iter().copied().fold(f64::INFINITY, f64::min) / radius;
    Ok(NormalizedSnapshot {
        curve,
        map,
        ellipse,
        area_scale,
        eps: (max - 1.0).max(1.0 - min),
    })
}
