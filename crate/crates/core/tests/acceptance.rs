//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use acsf_core::arrival::{
    log_concavity_check, pde_residual, radial_exact, reconstruct, ArrivalField, GridSpec,
};
use acsf_core::experiments::{affine_commutation, classify, scaling_commutation, ClassifyOptions};
use acsf_core::flow::{evolve, Cadence, EvolveOptions, Stop, StopReason, Trajectory};
use acsf_core::invariants::{iso_ratio, ratio_series, ratio_sup, RATIO_SLACK};
use acsf_core::ndim::{iso_ratio_nd, rescale_invariance_check, sphere_radius_nd, EllipsoidND};
use acsf_core::normalization::{mvee_detailed, normalize_snapshot};
use acsf_core::{
    support_of_ellipse, AffineMap, ConvexPolygon, Ellipse, FourierMode, Point, Result, SupportCurve,
};
use nalgebra::Matrix2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRID: usize = 256;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { passed, detail })
}

fn fmt_time(d: Duration) -> String {
    format!("{:.2} s", d.as_secs_f64())
}

fn trefoil(n: usize) -> SupportCurve {
    let modes = [FourierMode {
        k: 3,
        cos: 0.1,
        sin: 0.0,
    }];
    SupportCurve::from_fourier(n, 1.0, &modes, Point::zeros()).unwrap()
}

fn circle_run() -> Result<Trajectory> {
    let c = SupportCurve::circle(GRID, 1.0, Point::zeros())?;
    evolve(&c, Stop::AreaFloor(PI / 100.0), &EvolveOptions::default())
}

fn arrival_options() -> EvolveOptions {
    EvolveOptions {
        cadence: Cadence::AreaRatio(0.97),
        ..EvolveOptions::default()
    }
}

fn circle_field(nodes: usize) -> Result<ArrivalField> {
    let c = SupportCurve::circle(GRID, 1.0, Point::zeros())?;
    let traj = evolve(&c, Stop::AreaFloor(PI / 100.0), &arrival_options())?;
    reconstruct(&traj, &GridSpec::covering(&c, nodes)?)
}

fn annulus(p: Point) -> bool {
    (0.2..=0.9).contains(&p.norm())
}

fn circle_law() -> Result<Verdict> {
    let start = Instant::now();
    let traj = circle_run()?;
    let elapsed = start.elapsed();
    let worst = traj
        .states()
        .iter()
        .map(|s| {
            let r = (s.curve.area() / PI).sqrt();
            let exact = (1.0 - 4.0 / 3.0 * s.t).powf(0.75);
            (r / exact - 1.0).abs()
        })
        .fold(0.0, f64::max);
    let ext = (traj.extinction().time - 0.75).abs();
    verdict(
        worst < 1e-4 && ext < 1e-3 && elapsed < Duration::from_secs(5),
        format!(
            "max rel radius error {worst:.2e} (< 1e-4), |T - 3/4| = {ext:.2e} (< 1e-3), {} (< 5 s)",
            fmt_time(elapsed)
        ),
    )
}

fn ellipse_self_similarity() -> Result<Verdict> {
    let start = Instant::now();
    let e = Ellipse::from_axes(Point::zeros(), 2.0, 0.5, 0.0)?;
    let c = support_of_ellipse(&e, GRID)?;
    let traj = evolve(&c, Stop::AreaFloor(PI / 10.0), &EvolveOptions::default())?;
    let elapsed = start.elapsed();
    let drift = traj
        .states()
        .iter()
        .map(|s| (s.curve.h()[0] / s.curve.h()[GRID / 4] / 4.0 - 1.0).abs())
        .fold(0.0, f64::max);
    let (ts, ys): (Vec<f64>, Vec<f64>) = traj
        .states()
        .iter()
        .map(|s| (s.t, s.curve.area().powf(2.0 / 3.0)))
        .unzip();
    let m = ts.len() as f64;
    let (tm, ym) = (ts.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let slope = ts
        .iter()
        .zip(&ys)
        .map(|(t, y)| (t - tm) * (y - ym))
        .sum::<f64>()
        / ts.iter().map(|t| (t - tm).powi(2)).sum::<f64>();
    let expected = -4.0 / 3.0 * PI.powf(2.0 / 3.0);
    let rel = (slope / expected - 1.0).abs();
    verdict(
        drift < 1e-3 && rel < 1e-3 && elapsed < Duration::from_secs(10),
        format!(
            "axis ratio drift {drift:.2e} (< 1e-3), slope {slope:.6} vs {expected:.6} rel {rel:.2e} (< 1e-3), {} (< 10 s)",
            fmt_time(elapsed)
        ),
    )
}

fn ratio_monotonicity() -> Result<Verdict> {
    let start = Instant::now();
    let c = trefoil(GRID);
    let traj = evolve(
        &c,
        Stop::AreaFloor(1e-3 * c.area()),
        &EvolveOptions::default(),
    )?;
    let series = ratio_series(&traj)?;
    let elapsed = start.elapsed();
    let min_inc = series.min_increment();
    let over = series.max_ratio() - ratio_sup();
    let best_gap = series.gaps().into_iter().fold(f64::INFINITY, f64::min);
    verdict(
        series.is_nondecreasing(RATIO_SLACK)
            && !series.exceeds_sup(RATIO_SLACK)
            && best_gap < 1e-2
            && traj.stop_reason() == StopReason::AreaFloor
            && elapsed < Duration::from_secs(20),
        format!(
            "min increment {min_inc:.2e} (>= -1e-6), max - sup {over:.2e} (<= 1e-6), closest gap {best_gap:.2e} (< 1e-2), {} snapshots, {} (< 20 s)",
            series.ratios.len(),
            fmt_time(elapsed)
        ),
    )
}

fn classification() -> Result<Verdict> {
    let start = Instant::now();
    let report = classify(&trefoil(GRID), &ClassifyOptions::default())?;
    let e = Ellipse::from_axes(Point::new(0.3, -0.2), 2.0, 0.5, 0.6)?;
    let ellipse_report = classify(&support_of_ellipse(&e, GRID)?, &ClassifyOptions::default())?;
    let elapsed = start.elapsed();
    let eps: Vec<String> = report
        .milestones
        .iter()
        .map(|m| format!("{:.2e}", m.eps))
        .collect();
    verdict(
        report.milestones.len() == 7
            && report.eps_decreasing
            && report.final_eps() < 0.01
            && ellipse_report.milestones.len() == 7
            && ellipse_report.max_eps() < 1e-4
            && elapsed < Duration::from_secs(60),
        format!(
            "trefoil eps_k [{}] strictly decreasing: {}, eps_6 {:.2e} (< 0.01); ellipse max eps {:.2e} (< 1e-4); {} (< 60 s)",
            eps.join(", "),
            report.eps_decreasing,
            report.final_eps(),
            ellipse_report.max_eps(),
            fmt_time(elapsed)
        ),
    )
}

fn affine_invariance() -> Result<Verdict> {
    let c = trefoil(GRID);
    let opts = EvolveOptions::default();
    let shear = AffineMap::unimodular(Matrix2::new(1.0, 1.0, 0.0, 1.0), Point::zeros())?;
    let shear_dev = affine_commutation(&c, &shear, 0.3, &opts)?;
    let scale_dev = scaling_commutation(&c, 16.0, 0.3, &opts)?;
    verdict(
        shear_dev < 1e-3 && scale_dev < 1e-3,
        format!("shear hausdorff {shear_dev:.2e} (< 1e-3), lambda = 16 scaling hausdorff {scale_dev:.2e} (< 1e-3)"),
    )
}

fn level_set_solution() -> Result<Verdict> {
    let field = circle_field(GRID)?;
    let max_err = field.max_error(radial_exact);
    let stats = pde_residual(&field).stats(annulus);

    let exact_median = |n: usize| -> Result<f64> {
        let grid = GridSpec::new(Point::new(-1.02, -1.02), 2.04 / (n - 1) as f64, n, n)?;
        let f = ArrivalField::from_function(grid, Point::zeros(), radial_exact);
        Ok(pde_residual(&f).stats(annulus).median)
    };
    let (coarse, fine) = (exact_median(GRID)?, exact_median(2 * GRID - 1)?);
    let recon_fine = pde_residual(&circle_field(2 * GRID - 1)?)
        .stats(annulus)
        .median;
    verdict(
        max_err < 1e-3 && stats.median < 2e-2 && fine <= 0.5 * coarse,
        format!(
            "max |u - (3/4)|x|^(4/3)| {max_err:.2e} (< 1e-3) on {} nodes; residual median {:.2e} (< 2e-2), max {:.2e}; exact-field median {coarse:.2e} -> {fine:.2e} on halving (ratio {:.2}, <= 0.5); reconstructed {:.2e} -> {recon_fine:.2e}",
            field.resolved_count(),
            stats.median,
            stats.max,
            fine / coarse,
            stats.median
        ),
    )
}

fn log_concavity() -> Result<Verdict> {
    let circle = circle_field(GRID)?;
    let circle_report = log_concavity_check(&circle, 0.7)?;

    let e = Ellipse::from_axes(Point::zeros(), 2.0, 0.5, 0.0)?;
    let c = support_of_ellipse(&e, GRID)?;
    let traj = evolve(&c, Stop::AreaFloor(PI / 10.0), &arrival_options())?;
    let ellipse = reconstruct(&traj, &GridSpec::covering(&c, GRID)?)?;
    let ellipse_report = log_concavity_check(&ellipse, 0.7)?;

    let squared = circle.map_u(|u| u * u);
    let squared_report = log_concavity_check(&squared, 0.49)?;
    let root = circle.map_u(f64::sqrt);
    let root_report = log_concavity_check(&root, 0.7f64.sqrt())?;
    verdict(
        circle_report.passed && ellipse_report.passed && !squared_report.passed,
        format!(
            "circle pass {} ({} triples, worst excess {:.2e}); ellipse pass {} (worst {:.2e}); u^2 control flagged {} ({} violations, worst {:.2e}); sqrt(u) control flagged {} ({} violations)",
            circle_report.passed,
            circle_report.triples,
            circle_report.worst_excess,
            ellipse_report.passed,
            ellipse_report.worst_excess,
            !squared_report.passed,
            squared_report.midpoint_violations,
            squared_report.worst_excess,
            !root_report.passed,
            root_report.midpoint_violations
        ),
    )
}

fn random_polygon(rng: &mut ChaCha8Rng) -> ConvexPolygon {
    loop {
        let m = rng.gen_range(3..40);
        let a = Matrix2::new(
            rng.gen_range(0.2..3.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(0.2..3.0),
        );
        let shift = Point::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let pts: Vec<Point> = (0..m)
            .map(|_| a * Point::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) + shift)
            .collect();
        if let Ok(p) = ConvexPolygon::convex_hull(&pts) {
            return p;
        }
    }
}

fn john_normalization() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let tol = 1e-6;
    let mut worst_quad: f64 = 0.0;
    let mut worst_half: f64 = f64::NEG_INFINITY;
    let mut half_ok = true;
    for _ in 0..100 {
        let poly = random_polygon(&mut rng);
        let fit = mvee_detailed(poly.vertices(), tol)?;
        worst_quad = worst_quad.max(fit.max_quad_form - 1.0);
        let half = fit.ellipse.dilated(0.5);
        let slack = tol * fit.ellipse.semi_axes().0;
        let mut reach_max = f64::NEG_INFINITY;
        // (1/2)E lies in the hull iff its support stays behind every edge line
        for (a, b) in poly.edges() {
            let d = b - a;
            let outward = Point::new(d.y, -d.x).normalize();
            let reach = half.support(&Point::zeros(), &outward) - a.dot(&outward);
            reach_max = reach_max.max(reach);
        }
        worst_half = worst_half.max(reach_max);
        half_ok &= reach_max <= slack;
    }
    let mut worst_eps: f64 = 0.0;
    for _ in 0..10 {
        let e = Ellipse::from_axes(
            Point::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)),
            rng.gen_range(0.5..3.0),
            rng.gen_range(0.3..0.5),
            rng.gen_range(0.0..PI),
        )?;
        let snap = normalize_snapshot(&support_of_ellipse(&e, GRID)?, 1e-9)?;
        worst_eps = worst_eps.max(snap.eps);
    }
    verdict(
        worst_quad <= tol && half_ok && worst_eps < 1e-8,
        format!(
            "100 polygons: max quad form - 1 = {worst_quad:.2e} (<= 1e-6), max reach of E/2 past an edge {worst_half:.2e} (<= 1e-6 x major semi-axis); ellipse eps {worst_eps:.2e} (< 1e-8)"
        ),
    )
}

fn closed_forms() -> Result<Verdict> {
    let traj = circle_run()?;
    let horizon = 0.9 * 0.75;
    let solver_dev = traj
        .states()
        .iter()
        .filter(|s| s.t <= horizon)
        .map(|s| Ok(((s.curve.area() / PI).sqrt() - sphere_radius_nd(1.0, 1, s.t)?).abs()))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let mut rescale: f64 = 0.0;
    for n in 1..=5 {
        for lambda in [0.25, 1.0, 4.0, 16.0] {
            rescale = rescale.max(rescale_invariance_check(1.0, n, lambda)?);
        }
    }
    let planar = iso_ratio_nd(&EllipsoidND::sphere(1, 1.0)?);
    let circle_ratio = iso_ratio(&SupportCurve::circle(GRID, 1.0, Point::zeros())?)?;
    let ratio_dev = (planar - 2.0 * PI.powf(2.0 / 3.0))
        .abs()
        .max((planar - circle_ratio).abs());
    verdict(
        solver_dev < 1e-4 && rescale < 1e-12 && ratio_dev < 1e-10,
        format!(
            "n = 1 radius vs 2-D solver {solver_dev:.2e} (< 1e-4); rescaling {rescale:.2e} (< 1e-12); planar ratio deviation {ratio_dev:.2e} (< 1e-10)"
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Result<Verdict>); 9] = [
        ("circle law", circle_law),
        ("ellipse self-similarity", ellipse_self_similarity),
        ("ratio monotone up to 2pi^(2/3)", ratio_monotonicity),
        ("classification by blow-down", classification),
        ("affine and scaling invariance", affine_invariance),
        ("level-set solution", level_set_solution),
        ("log-concavity of the arrival time", log_concavity),
        ("John normalization", john_normalization),
        ("higher-dimensional closed forms", closed_forms),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (passed, detail) = match run() {
            Ok(v) => (v.passed, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failed += 1;
        }
        println!(
            "{} {}. {name}: {detail}",
            if passed { "PASS" } else { "FAIL" },
            i + 1
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
