//! Affine arclength and the affine isoperimetric ratio.
//!
//! In support form the affine length is `∫ ρ^{2/3} dθ` and the ratio is
//! `A^{−1/3} ∫ ρ^{2/3} dθ`, bounded above by `2π^{2/3}` with equality exactly
//! on ellipses.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::curve::SupportCurve;
use crate::error::Result;
use crate::flow::Trajectory;

/// Slack allowed when checking monotonicity and the upper bound.
pub const RATIO_SLACK: f64 = 1e-6;

/// `2π^{2/3}`, the value attained by every ellipse.
pub fn ratio_sup() -> f64 {
    2.0 * PI.powf(2.0 / 3.0)
}

/// `∫ ρ^{2/3} dθ`, trapezoid rule on the normal-angle grid.
pub fn affine_length(c: &SupportCurve) -> Result<f64> {
    let rho = c.radius_of_curvature()?;
    Ok(rho.iter().map(|r| r.powf(2.0 / 3.0)).sum::<f64>() * c.dtheta())
}

/// `A^{−1/3} · affine_length`.
pub fn iso_ratio(c: &SupportCurve) -> Result<f64> {
    Ok(affine_length(c)? * c.area().powf(-1.0 / 3.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSeries {
    pub times: Vec<f64>,
    pub ratios: Vec<f64>,
    pub sup_value: f64,
}

impl RatioSeries {
    /// Smallest consecutive increment `ratio_{k+1} − ratio_k` (infinite for
    /// fewer than two entries).
    pub fn min_increment(&self) -> f64 {
        self.ratios
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_nondecreasing(&self, slack: f64) -> bool {
        self.min_increment() >= -slack
    }

    pub fn max_ratio(&self) -> f64 {
        self.ratios
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `sup − ratio` per entry.
    pub fn gaps(&self) -> Vec<f64> {
        self.ratios.iter().map(|r| self.sup_value - r).collect()
    }

    pub fn final_gap(&self) -> f64 {
        self.sup_value - self.ratios.last().copied().unwrap_or(f64::NAN)
    }

    pub fn exceeds_sup(&self, slack: f64) -> bool {
        self.max_ratio() > self.sup_value + slack
    }
}

pub fn ratio_series(traj: &Trajectory) -> Result<RatioSeries> {
    let mut times = Vec::with_capacity(traj.len());
    let mut ratios = Vec::with_capacity(traj.len());
    for s in traj.states() {
        times.push(s.t);
        ratios.push(iso_ratio(&s.curve)?);
    }
    Ok(RatioSeries {
        times,
        ratios,
        sup_value: ratio_sup(),
    })
}
