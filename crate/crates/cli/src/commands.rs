//! One function per subcommand. Each computes everything in memory and hands
//! back the files to write plus a short text summary.

use std::f64::consts::PI;
use std::fmt::Write as _;

use acsf_core::arrival::{
    log_concavity_check, pde_residual, reconstruct, ConcavityReport, FieldMeta, GridSpec,
    ResidualStats,
};
use acsf_core::experiments::{
    affine_commutation, classify, scaling_commutation, ClassifyOptions, ClassifyReport,
};
use acsf_core::flow::{
    area_law_check, evolve, Cadence, EvolveOptions, Extinction, Stop, StopReason, Trajectory,
};
use acsf_core::invariants::{iso_ratio, ratio_series, ratio_sup, RATIO_SLACK};
use acsf_core::io::{field_csv, field_meta_json, ratio_csv, summary_csv, trajectory_jsonl};
use acsf_core::ndim::{
    extinction_time_nd, iso_ratio_nd, rescale_invariance_check, sphere_radius_nd, EllipsoidND,
};
use acsf_core::{AffineMap, Error, Point, SupportCurve};
use nalgebra::{Matrix2, Rotation2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{Config, CurveSpec};
use crate::error::{CliError, EXIT_NUMERICAL};
use crate::output::Artifacts;
use crate::svg;

pub struct Outcome {
    pub artifacts: Artifacts,
    pub summary: String,
    /// Exit status once the files are written: 0, or 3 when the run ended in
    /// a recorded numerical failure.
    pub status: u8,
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

fn options(config: &Config, cadence: Cadence) -> EvolveOptions {
    EvolveOptions {
        safety: config.safety,
        cadence,
        ..EvolveOptions::default()
    }
}

fn lost_convexity(traj: &Trajectory) -> Result<(), CliError> {
    if traj.stop_reason() == StopReason::LostConvexity {
        let msg = traj
            .policy()
            .failure
            .clone()
            .unwrap_or_else(|| "lost convexity".into());
        return Err(Error::Stopped(msg).into());
    }
    Ok(())
}

/// Circle-law lifespan `(3/4)(A/π)^{2/3}` of a curve.
fn lifespan(curve: &SupportCurve) -> f64 {
    0.75 * (curve.area() / PI).powf(2.0 / 3.0)
}

#[derive(Serialize)]
struct RatioSummary {
    initial: f64,
    last: f64,
    sup: f64,
    min_increment: f64,
    nondecreasing: bool,
}

#[derive(Serialize)]
struct EvolveReport<'a> {
    curve: &'a CurveSpec,
    grid: usize,
    safety: f64,
    stop: Stop,
    stop_reason: StopReason,
    steps: usize,
    retries: usize,
    snapshots: usize,
    t_final: f64,
    area_initial: f64,
    area_final: f64,
    extinction: &'a Extinction,
    area_law_deviation: f64,
    ratio: RatioSummary,
}

pub fn cmd_evolve(config: &Config) -> Result<Outcome, CliError> {
    let curve = config.initial_curve()?;
    let ev = &config.evolve;
    let stop = match (ev.target_time, ev.area_floor) {
        (Some(t), _) => Stop::TargetTime(t),
        (None, Some(a)) => Stop::AreaFloor(a),
        (None, None) => Stop::AreaFloor(ev.floor_fraction * curve.area()),
    };
    let traj = evolve(
        &curve,
        stop,
        &options(config, Cadence::AreaLoss(ev.snapshot_every)),
    )?;
    lost_convexity(&traj)?;
    let series = ratio_series(&traj)?;
    let law = area_law_check(&traj)?;

    let report = EvolveReport {
        curve: &config.curve,
        grid: config.grid,
        safety: config.safety,
        stop,
        stop_reason: traj.stop_reason(),
        steps: traj.policy().steps,
        retries: traj.policy().retries,
        snapshots: traj.len(),
        t_final: traj.last().t,
        area_initial: curve.area(),
        area_final: traj.last().curve.area(),
        extinction: traj.extinction(),
        area_law_deviation: law,
        ratio: RatioSummary {
            initial: series.ratios[0],
            last: *series.ratios.last().expect("trajectory is non-empty"),
            sup: ratio_sup(),
            min_increment: series.min_increment(),
            nondecreasing: series.is_nondecreasing(RATIO_SLACK),
        },
    };

    let mut files = Artifacts::new();
    files.add("trajectory.jsonl", trajectory_jsonl(&traj));
    files.add("summary.csv", summary_csv(&traj)?);
    files.add("ratio.csv", ratio_csv(&series));
    files.add("evolve.json", json(&report));
    if ev.frames {
        let window = svg::Window::around(curve.to_points().iter());
        for (i, s) in traj.states().iter().enumerate() {
            files.add(
                format!("frames/frame_{i:04}.svg"),
                svg::frame(&s.curve, s.t, window),
            );
        }
    }
    let curves: Vec<&SupportCurve> = traj.states().iter().map(|s| &s.curve).collect();
    files.add("snapshots.svg", svg::nested(&curves));

    let summary = format!(
        "evolve: {} steps, {} snapshots, stopped by {:?} at t = {:.6}\n\
         extinction estimate {:.6}; area law deviation {:.2e}\n\
         iso ratio {:.6} -> {:.6} (sup {:.6}), nondecreasing: {}\n",
        report.steps,
        report.snapshots,
        report.stop_reason,
        report.t_final,
        report.extinction.time,
        law,
        report.ratio.initial,
        report.ratio.last,
        report.ratio.sup,
        report.ratio.nondecreasing
    );
    Ok(Outcome {
        artifacts: files,
        summary,
        status: 0,
    })
}

#[derive(Serialize)]
struct ClassifyDocument<'a> {
    curve: &'a CurveSpec,
    grid: usize,
    safety: f64,
    base: f64,
    mvee_tol: f64,
    #[serde(flatten)]
    report: &'a ClassifyReport,
}

pub fn cmd_classify(config: &Config) -> Result<Outcome, CliError> {
    let curve = config.initial_curve()?;
    let cl = &config.classify;
    let opts = ClassifyOptions {
        base: cl.base,
        milestones: cl.milestones,
        mvee_tol: cl.mvee_tol,
        evolve: options(config, Cadence::AreaRatio(0.5)),
    };
    let report = classify(&curve, &opts)?;

    let mut files = Artifacts::new();
    files.add(
        "classify.json",
        json(&ClassifyDocument {
            curve: &config.curve,
            grid: config.grid,
            safety: config.safety,
            base: cl.base,
            mvee_tol: cl.mvee_tol,
            report: &report,
        }),
    );
    let mut csv = String::from("k,lambda,t,area,iso_ratio,gap,eps\n");
    let mut table = String::from(
        "  k      lambda           t        area   iso_ratio         gap         eps\n",
    );
    for m in &report.milestones {
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            m.k, m.lambda, m.t, m.area, m.iso_ratio, m.gap, m.eps
        )
        .unwrap();
        writeln!(
            table,
            "{:>3} {:>11} {:>11.6} {:>11.4e} {:>11.7} {:>11.3e} {:>11.3e}",
            m.k, m.lambda, m.t, m.area, m.iso_ratio, m.gap, m.eps
        )
        .unwrap();
        if let Some(normalized) = &m.normalized {
            files.add(
                format!("overlays/milestone_{}.svg", m.k),
                svg::overlay(normalized, m.disk_radius, m.k, m.eps),
            );
        }
    }
    files.add("milestones.csv", csv);

    let status = if report.stop_reason == StopReason::AreaFloor {
        0
    } else {
        EXIT_NUMERICAL
    };
    let mut summary = format!(
        "classify: {} milestones\n{table}eps decreasing: {}, gap decreasing: {}\n",
        report.milestones.len(),
        report.eps_decreasing,
        report.gap_decreasing
    );
    if let Some(f) = &report.failure {
        writeln!(summary, "run stopped early ({:?}): {f}", report.stop_reason).unwrap();
    }
    Ok(Outcome {
        artifacts: files,
        summary,
        status,
    })
}

#[derive(Serialize)]
struct MapDeviation {
    label: String,
    matrix: [[f64; 2]; 2],
    translation: [f64; 2],
    deviation: f64,
}

#[derive(Serialize)]
struct ScalingDeviation {
    lambda: f64,
    deviation: f64,
}

#[derive(Serialize)]
struct InvarianceReport {
    time: f64,
    seed: u64,
    maps: Vec<MapDeviation>,
    scalings: Vec<ScalingDeviation>,
    max_map_deviation: f64,
    max_scaling_deviation: f64,
}

/// Rotation, area-preserving stretch, rotation.
fn random_unimodular(rng: &mut ChaCha8Rng) -> ([[f64; 2]; 2], [f64; 2]) {
    let a = Rotation2::new(rng.gen_range(0.0..PI)).into_inner();
    let b = Rotation2::new(rng.gen_range(0.0..PI)).into_inner();
    let s = rng.gen_range(0.7..1.4);
    let m = a * Matrix2::new(s, 0.0, 0.0, 1.0 / s) * b;
    (
        [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]],
        [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
    )
}

fn to_map(m: [[f64; 2]; 2], v: [f64; 2]) -> Result<AffineMap, CliError> {
    Ok(AffineMap::unimodular(
        Matrix2::new(m[0][0], m[0][1], m[1][0], m[1][1]),
        Point::new(v[0], v[1]),
    )?)
}

pub fn cmd_invariance(config: &Config) -> Result<Outcome, CliError> {
    let inv = &config.invariance;
    let configured = to_map(inv.matrix, inv.translation)?;
    let curve = config.initial_curve()?;
    let time = inv.time.unwrap_or(inv.time_fraction * lifespan(&curve));
    let opts = options(config, Cadence::AreaLoss(0.05));

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut cases = vec![
        (
            "configured".to_string(),
            inv.matrix,
            inv.translation,
            configured,
        ),
        (
            "identity".to_string(),
            [[1.0, 0.0], [0.0, 1.0]],
            [0.0; 2],
            AffineMap::identity(),
        ),
    ];
    for i in 0..inv.random_maps {
        let (m, v) = random_unimodular(&mut rng);
        cases.push((format!("random_{i}"), m, v, to_map(m, v)?));
    }

    let mut maps = Vec::with_capacity(cases.len());
    for (label, matrix, translation, map) in cases {
        let deviation = affine_commutation(&curve, &map, time, &opts)?;
        maps.push(MapDeviation {
            label,
            matrix,
            translation,
            deviation,
        });
    }
    let scalings = inv
        .lambdas
        .iter()
        .map(|&lambda| {
            Ok(ScalingDeviation {
                lambda,
                deviation: scaling_commutation(&curve, lambda, time, &opts)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let report = InvarianceReport {
        time,
        seed: config.seed,
        max_map_deviation: maps.iter().map(|m| m.deviation).fold(0.0, f64::max),
        max_scaling_deviation: scalings.iter().map(|s| s.deviation).fold(0.0, f64::max),
        maps,
        scalings,
    };
    let mut summary = format!("invariance at t = {time:.6}\n");
    for m in &report.maps {
        writeln!(summary, "  {:<12} hausdorff {:.3e}", m.label, m.deviation).unwrap();
    }
    for s in &report.scalings {
        writeln!(
            summary,
            "  lambda {:<7} hausdorff {:.3e}",
            s.lambda, s.deviation
        )
        .unwrap();
    }
    let mut files = Artifacts::new();
    files.add("invariance.json", json(&report));
    Ok(Outcome {
        artifacts: files,
        summary,
        status: 0,
    })
}

#[derive(Serialize)]
struct LevelVerdict {
    h0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<ConcavityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    skipped: Option<String>,
}

#[derive(Serialize)]
struct ArrivalReport {
    meta: FieldMeta,
    snapshots: usize,
    resolved_nodes: usize,
    annulus: Option<[f64; 2]>,
    residual: ResidualStats,
    concavity: Vec<LevelVerdict>,
    all_levels_pass: bool,
}

pub fn cmd_arrival(config: &Config) -> Result<Outcome, CliError> {
    let ar = &config.arrival;
    let curve = config.initial_curve()?;
    let grid = GridSpec::covering(&curve, config.arrival_nodes())?;
    let traj = evolve(
        &curve,
        Stop::AreaFloor(ar.floor_fraction * curve.area()),
        &options(config, Cadence::AreaRatio(ar.snapshot_ratio)),
    )?;
    lost_convexity(&traj)?;
    let field = reconstruct(&traj, &grid)?;
    let center = field.extinction_point();
    let residual = pde_residual(&field).stats(|p| match ar.annulus {
        Some([lo, hi]) => (lo..=hi).contains(&(p - center).norm()),
        None => true,
    });

    let levels: Vec<f64> = match &ar.levels {
        Some(l) => l.clone(),
        None => ar
            .level_fractions
            .iter()
            .map(|f| f * field.extinction_time())
            .collect(),
    };
    let mut concavity = Vec::with_capacity(levels.len());
    for h0 in levels {
        let verdict = match log_concavity_check(&field, h0) {
            Ok(report) => LevelVerdict {
                h0,
                report: Some(report),
                skipped: None,
            },
            Err(e @ (Error::Unresolved(_) | Error::InvalidInput(_))) => LevelVerdict {
                h0,
                report: None,
                skipped: Some(e.to_string()),
            },
            Err(e) => return Err(e.into()),
        };
        concavity.push(verdict);
    }
    let all_levels_pass = concavity
        .iter()
        .all(|v| v.report.as_ref().map_or(true, |r| r.passed));

    let report = ArrivalReport {
        meta: field.meta(),
        snapshots: traj.len(),
        resolved_nodes: field.resolved_count(),
        annulus: ar.annulus,
        residual,
        concavity,
        all_levels_pass,
    };
    let mut summary = format!(
        "arrival: {} x {} grid, {} resolved nodes, extinction time {:.6}\n\
         residual median {:.3e}, max {:.3e} over {} nodes\n",
        grid.nx,
        grid.ny,
        report.resolved_nodes,
        report.meta.extinction_time,
        residual.median,
        residual.max,
        residual.count
    );
    for v in &report.concavity {
        match (&v.report, &v.skipped) {
            (Some(r), _) => writeln!(
                summary,
                "  h0 = {:.6}: log-concavity {} ({} triples, {} violations)",
                v.h0,
                if r.passed { "pass" } else { "FAIL" },
                r.triples,
                r.midpoint_violations
            ),
            (None, Some(why)) => writeln!(summary, "  h0 = {:.6}: skipped, {why}", v.h0),
            (None, None) => Ok(()),
        }
        .unwrap();
    }

    let mut files = Artifacts::new();
    files.add("field.csv", field_csv(&field));
    files.add("field_meta.json", field_meta_json(&field) + "\n");
    files.add("arrival.json", json(&report));
    let stride = (traj.len() / 16).max(1);
    let curves: Vec<&SupportCurve> = traj
        .states()
        .iter()
        .step_by(stride)
        .map(|s| &s.curve)
        .collect();
    files.add("snapshots.svg", svg::nested(&curves));
    Ok(Outcome {
        artifacts: files,
        summary,
        status: 0,
    })
}

#[derive(Debug, Clone, Serialize)]
struct NdRow {
    check: &'static str,
    n: usize,
    lambda: Option<f64>,
    deviation: f64,
    tolerance: f64,
    pass: bool,
}

impl NdRow {
    fn new(
        check: &'static str,
        n: usize,
        lambda: Option<f64>,
        deviation: f64,
        tolerance: f64,
    ) -> Self {
        NdRow {
            check,
            n,
            lambda,
            deviation,
            tolerance,
            pass: deviation <= tolerance,
        }
    }
}

/// Classical RK4 for `dR/dt = −R^{−n/(n+2)}` from `r0` up to `t`.
fn radius_ode(r0: f64, n: usize, t: f64) -> f64 {
    let q = n as f64 / (n + 2) as f64;
    let f = |r: f64| -r.powf(-q);
    let steps = 4000;
    let dt = t / steps as f64;
    let mut r = r0;
    for _ in 0..steps {
        let k1 = f(r);
        let k2 = f(r + 0.5 * dt * k1);
        let k3 = f(r + 0.5 * dt * k2);
        let k4 = f(r + dt * k3);
        r += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    r
}

pub fn cmd_ndcheck(config: &Config) -> Result<Outcome, CliError> {
    let nd = &config.ndcheck;
    let r0 = nd.radius;
    let mut rows = Vec::new();
    for n in 1..=nd.max_dim {
        for &lambda in &nd.lambdas {
            rows.push(NdRow::new(
                "rescaling",
                n,
                Some(lambda),
                rescale_invariance_check(r0, n, lambda)?,
                1e-12,
            ));
        }
        let half = 0.5 * extinction_time_nd(r0, n)?;
        let ode = (sphere_radius_nd(r0, n, half)? - radius_ode(r0, n, half)).abs();
        rows.push(NdRow::new("radius_vs_ode", n, None, ode, 1e-10));
    }

    let planar = iso_ratio_nd(&EllipsoidND::sphere(1, r0)?);
    rows.push(NdRow::new(
        "planar_ratio",
        1,
        None,
        (planar - ratio_sup()).abs(),
        1e-10,
    ));
    let circle = SupportCurve::circle(config.grid, r0, Point::zeros())?;
    rows.push(NdRow::new(
        "planar_ratio_vs_2d",
        1,
        None,
        (planar - iso_ratio(&circle)?).abs(),
        1e-10,
    ));

    let horizon = 0.9 * extinction_time_nd(r0, 1)?;
    let traj = evolve(
        &circle,
        Stop::AreaFloor(1e-2 * circle.area()),
        &options(config, Cadence::AreaLoss(0.01)),
    )?;
    lost_convexity(&traj)?;
    let mut solver_dev: f64 = 0.0;
    for s in traj.states().iter().filter(|s| s.t <= horizon) {
        let r = (s.curve.area() / PI).sqrt();
        solver_dev = solver_dev.max((r - sphere_radius_nd(r0, 1, s.t)?).abs());
    }
    rows.push(NdRow::new("n1_vs_2d_solver", 1, None, solver_dev, 1e-4));

    let mut csv = String::from("check,n,lambda,deviation,tolerance,pass\n");
    let mut table = format!(
        "{:<20} {:>3} {:>8} {:>12} {:>9}  result\n",
        "check", "n", "lambda", "deviation", "tol"
    );
    for r in &rows {
        let lambda = r.lambda.map(|l| l.to_string()).unwrap_or_default();
        writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.check, r.n, lambda, r.deviation, r.tolerance, r.pass
        )
        .unwrap();
        writeln!(
            table,
            "{:<20} {:>3} {:>8} {:>12.3e} {:>9.0e}  {}",
            r.check,
            r.n,
            lambda,
            r.deviation,
            r.tolerance,
            if r.pass { "pass" } else { "FAIL" }
        )
        .unwrap();
    }
    let failed = rows.iter().filter(|r| !r.pass).count();
    writeln!(table, "{} checks, {failed} failed", rows.len()).unwrap();

    let mut files = Artifacts::new();
    files.add("ndcheck.csv", csv);
    files.add("ndcheck.json", json(&rows));
    Ok(Outcome {
        artifacts: files,
        summary: table,
        status: if failed == 0 { 0 } else { EXIT_NUMERICAL },
    })
}
