//! Closed-form affine normal flow of spheres and ellipsoids in any dimension.
//!
//! A sphere of radius `R` in `R^{n+1}` has Gauss curvature `R^{−n}` and moves
//! with normal speed `K^{1/(n+2)}`, so `dR/dt = −R^{−n/(n+2)}`. Ellipsoids are
//! unimodular images of spheres and shrink homothetically.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest hypersurface dimension accepted.
pub const MAX_DIM: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidND {
    dim: usize,
    semiaxes: Vec<f64>,
    center: Vec<f64>,
}

impl EllipsoidND {
    /// Hypersurface of dimension `semiaxes.len() − 1` centered at `center`.
    pub fn new(semiaxes: Vec<f64>, center: Vec<f64>) -> Result<Self> {
        if semiaxes.len() < 2 || semiaxes.len() > MAX_DIM + 1 {
            return Err(Error::invalid(format!(
                "need between 2 and {} semi-axes, got {}",
                MAX_DIM + 1,
                semiaxes.len()
            )));
        }
        if semiaxes.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(Error::invalid("semi-axes must be positive and finite"));
        }
        if center.len() != semiaxes.len() || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid(
                "center must be finite with one entry per semi-axis",
            ));
        }
        Ok(EllipsoidND {
            dim: semiaxes.len() - 1,
            semiaxes,
            center,
        })
    }

    /// Centered sphere of radius `r` of hypersurface dimension `n`.
    pub fn sphere(n: usize, r: f64) -> Result<Self> {
        EllipsoidND::new(vec![r; n + 1], vec![0.0; n + 1])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn semiaxes(&self) -> &[f64] {
        &self.semiaxes
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    /// Radius of the sphere with the same enclosed volume.
    pub fn equivalent_radius(&self) -> f64 {
        let log_sum: f64 = self.semiaxes.iter().map(|a| a.ln()).sum();
        (log_sum / self.semiaxes.len() as f64).exp()
    }

    pub fn volume(&self) -> f64 {
        ball_volume(self.dim + 1) * self.semiaxes.iter().product::<f64>()
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n == 0 || n > MAX_DIM {
        return Err(Error::invalid(format!(
            "dimension {n} not in 1..={MAX_DIM}"
        )));
    }
    Ok(())
}

/// `(2n + 2)/(n + 2)`: the power of `R` that decreases linearly in time.
fn exponent(n: usize) -> f64 {
    (2 * n + 2) as f64 / (n + 2) as f64
}

/// `((n + 2)/(2n + 2)) R0^{(2n+2)/(n+2)}`.
pub fn extinction_time_nd(r0: f64, n: usize) -> Result<f64> {
    check_dim(n)?;
    if !(r0 > 0.0 && r0.is_finite()) {
        return Err(Error::invalid(format!("radius {r0} must be positive")));
    }
    let p = exponent(n);
    Ok(r0.powf(p) / p)
}

/// `R(t) = (R0^p − p t)^{1/p}` with `p = (2n + 2)/(n + 2)`.
pub fn sphere_radius_nd(r0: f64, n: usize, t: f64) -> Result<f64> {
    let end = extinction_time_nd(r0, n)?;
    if !(t >= 0.0 && t < end) {
        return Err(Error::Range {
            requested: t,
            lo: 0.0,
            hi: end,
        });
    }
    let p = exponent(n);
    Ok((r0.powf(p) - p * t).powf(p.recip()))
}

/// The ellipsoid at time `t`: every semi-axis scaled by `R(t)/R0` for the
/// volume-equivalent sphere.
pub fn ellipsoid_evolution_nd(e: &EllipsoidND, t: f64) -> Result<EllipsoidND> {
    let r0 = e.equivalent_radius();
    let factor = sphere_radius_nd(r0, e.dim, t)? / r0;
    Ok(EllipsoidND {
        dim: e.dim,
        semiaxes: e.semiaxes.iter().map(|a| a * factor).collect(),
        center: e.center.clone(),
    })
}

/// Surface measure of the unit `n`-sphere, `2π^{(n+1)/2} / Γ((n+1)/2)`.
pub fn sphere_measure(n: usize) -> f64 {
    let half = (n + 1) as f64 / 2.0;
    2.0 * PI.powf(half) / gamma_half_integer(n + 1)
}

/// Volume of the unit ball in `R^d`.
pub fn ball_volume(d: usize) -> f64 {
    sphere_measure(d - 1) / d as f64
}

/// `Γ(m/2)` for a positive integer `m`, by the exact recurrence from
/// `Γ(1/2) = √π` or `Γ(1) = 1`.
fn gamma_half_integer(m: usize) -> f64 {
    let (mut value, mut x) = if m % 2 == 0 {
        (1.0, 1.0)
    } else {
        (PI.sqrt(), 0.5)
    };
    let target = m as f64 / 2.0;
    while x < target {
        value *= x;
        x += 1.0;
    }
    value
}

/// `V^{−n/(n+2)} ∫ K^{−(n+1)/(n+2)} dΩ` for an ellipsoid, which equals the
/// sphere value `σ_n (σ_n / (n + 1))^{−n/(n+2)}`.
pub fn iso_ratio_nd(e: &EllipsoidND) -> f64 {
    let n = e.dim;
    let sigma = sphere_measure(n);
    let ball = sigma / (n + 1) as f64;
    sigma * ball.powf(-(n as f64) / (n + 2) as f64)
}

/// Largest gap between `λ^{−1/p} R(λ t)` from `R0` and `R(t)` from
/// `λ^{−1/p} R0` over 64 times spanning the rescaled lifespan.
pub fn rescale_invariance_check(r0: f64, n: usize, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!(
            "scaling factor {lambda} must be positive"
        )));
    }
    let p = exponent(n);
    let mu = lambda.powf(-p.recip());
    let end = extinction_time_nd(r0, n)? / lambda;
    let mut worst: f64 = 0.0;
    for i in 0..64 {
        let t = end * i as f64 / 64.0;
        let scaled = mu * sphere_radius_nd(r0, n, lambda * t)?;
        let direct = sphere_radius_nd(mu * r0, n, t)?;
        worst = worst.max((scaled - direct).abs());
    }
    Ok(worst)
}
