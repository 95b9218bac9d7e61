//! End-to-end experiments shared by the command line and the browser demo:
//! the blow-down classification run and the symmetry checks of the flow.

use serde::{Deserialize, Serialize};

use crate::curve::{AffineMap, Ellipse, SupportCurve};
use crate::error::{Error, Result};
use crate::flow::{
    evolve, evolve_from, Cadence, EvolveOptions, FlowState, Stop, StopReason, Trajectory,
};
use crate::invariants::{iso_ratio, ratio_sup};
use crate::normalization::{normalize_snapshot, normalized_radius, DEFAULT_MVEE_TOL};

pub const DEFAULT_MILESTONES: usize = 6;
pub const DEFAULT_BASE: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOptions {
    /// Milestone `k` is reached at area `A0 / base^k`, for `k = 0..=milestones`.
    pub base: f64,
    pub milestones: usize,
    pub mvee_tol: f64,
    pub evolve: EvolveOptions,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            base: DEFAULT_BASE,
            milestones: DEFAULT_MILESTONES,
            mvee_tol: DEFAULT_MVEE_TOL,
            evolve: EvolveOptions {
                cadence: Cadence::AreaRatio(0.5),
                ..EvolveOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Milestone {
    pub k: usize,
    pub lambda: f64,
    pub t: f64,
    pub area: f64,
    pub iso_ratio: f64,
    pub gap: f64,
    pub eps: f64,
    /// John ellipse of the snapshot in flow coordinates.
    pub ellipse: Ellipse,
    /// Radius of the disk the John ellipse becomes after normalization.
    pub disk_radius: f64,
    /// Unit-area normalized snapshot.
    #[serde(skip)]
    pub normalized: Option<SupportCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyReport {
    pub milestones: Vec<Milestone>,
    pub eps_decreasing: bool,
    pub gap_decreasing: bool,
    pub stop_reason: StopReason,
    pub failure: Option<String>,
    pub extinction_estimate: f64,
}

impl ClassifyReport {
    pub fn final_eps(&self) -> f64 {
        self.milestones.last().map_or(f64::NAN, |m| m.eps)
    }

    pub fn final_gap(&self) -> f64 {
        self.milestones.last().map_or(f64::NAN, |m| m.gap)
    }

    pub fn max_eps(&self) -> f64 {
        self.milestones
            .iter()
            .map(|m| m.eps)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn milestone(k: usize, lambda: f64, state: &FlowState, tol: f64) -> Result<Milestone> {
    let ratio = iso_ratio(&state.curve)?;
    let norm = normalize_snapshot(&state.curve, tol)?;
    Ok(Milestone {
        k,
        lambda,
        t: state.t,
        area: state.curve.area(),
        iso_ratio: ratio,
        gap: ratio_sup() - ratio,
        eps: norm.eps,
        disk_radius: normalized_radius(&norm.ellipse) * norm.area_scale,
        ellipse: norm.ellipse,
        normalized: Some(norm.curve),
    })
}

/// Evolves `curve` through the area milestones `A0 / base^k` and measures
/// how elliptic each normalized snapshot is.
///
/// A run that loses convexity returns the milestones reached so far with the
/// stop reason recorded.
pub fn classify(curve: &SupportCurve, options: &ClassifyOptions) -> Result<ClassifyReport> {
    if !(options.base > 1.0 && options.base.is_finite()) {
        return Err(Error::invalid(format!(
            "milestone base {} must exceed 1",
            options.base
        )));
    }
    if options.milestones == 0 {
        return Err(Error::invalid("need at least one milestone"));
    }
    let a0 = curve.area();
    let mut state = FlowState {
        t: 0.0,
        curve: curve.clone(),
    };
    let mut milestones = vec![milestone(0, 1.0, &state, options.mvee_tol)?];
    let mut stop_reason = StopReason::AreaFloor;
    let mut failure = None;
    let mut extinction = f64::NAN;
    for k in 1..=options.milestones {
        let lambda = options.base.powi(k as i32);
        let traj = evolve_from(state.clone(), Stop::AreaFloor(a0 / lambda), &options.evolve)?;
        extinction = traj.extinction().time;
        state = traj.last().clone();
        if traj.stop_reason() != StopReason::AreaFloor {
            stop_reason = traj.stop_reason();
            failure = traj.policy().failure.clone();
            break;
        }
        milestones.push(milestone(k, lambda, &state, options.mvee_tol)?);
    }
    let eps_decreasing = milestones.windows(2).all(|w| w[1].eps < w[0].eps);
    let gap_decreasing = milestones.windows(2).all(|w| w[1].gap < w[0].gap);
    Ok(ClassifyReport {
        milestones,
        eps_decreasing,
        gap_decreasing,
        stop_reason,
        failure,
        extinction_estimate: extinction,
    })
}

/// Hausdorff gap between `evolve(A c)` and `A evolve(c)` at time `t`.
pub fn affine_commutation(
    curve: &SupportCurve,
    map: &AffineMap,
    t: f64,
    options: &EvolveOptions,
) -> Result<f64> {
    if !map.is_unimodular() {
        return Err(Error::invalid(format!(
            "map has determinant {} but must be unimodular",
            map.det()
        )));
    }
    let n = curve.n_samples();
    let image = curve.apply_affine(map, n)?;
    let direct = end_of(evolve(&image, Stop::TargetTime(t), options)?, t)?;
    let mapped = end_of(evolve(curve, Stop::TargetTime(t), options)?, t)?.apply_affine(map, n)?;
    Ok(direct.hausdorff(&mapped))
}

/// Hausdorff gap between `μ evolve(c, t)` and `evolve(μ c, t / λ)` with
/// `μ = λ^{−3/4}`, both measured at the rescaled time.
pub fn scaling_commutation(
    curve: &SupportCurve,
    lambda: f64,
    t: f64,
    options: &EvolveOptions,
) -> Result<f64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!(
            "scaling factor {lambda} must be positive"
        )));
    }
    let mu = lambda.powf(-0.75);
    let big = end_of(evolve(curve, Stop::TargetTime(t), options)?, t)?.scaled(mu);
    let small = end_of(
        evolve(&curve.scaled(mu), Stop::TargetTime(t / lambda), options)?,
        t / lambda,
    )?;
    Ok(big.hausdorff(&small))
}

fn end_of(traj: Trajectory, t: f64) -> Result<SupportCurve> {
    if traj.stop_reason() != StopReason::TargetTime {
        return Err(match &traj.policy().failure {
            Some(msg) => Error::Stopped(msg.clone()),
            None => Error::Range {
                requested: t,
                lo: 0.0,
                hi: traj.last().t,
            },
        });
    }
    Ok(traj.last().curve.clone())
}
