use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn acsf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_acsf"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path
}

fn run_in(dir: &TempDir, cmd: &str, config: &str, out: &str, extra: &[&str]) -> (Output, PathBuf) {
    let cfg = write_config(dir.path(), config);
    let out_dir = dir.path().join(out);
    let mut args = vec![
        cmd,
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    (acsf(&args), out_dir)
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines
        .map(|l| l.split(',').nth(idx).unwrap().parse().unwrap())
        .collect()
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.push((
                    path.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&path).unwrap(),
                ));
            }
        }
    }
    files.sort();
    files
}

const CIRCLE: &str =
    "grid = 64\n[curve]\nkind = \"circle\"\nradius = 1.0\n[evolve]\nfloor_fraction = 0.05\n";

#[test]
fn evolve_circle_matches_circle_law() {
    let dir = TempDir::new().unwrap();
    let (out, out_dir) = run_in(&dir, "evolve", CIRCLE, "out", &[]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    let (ts, areas) = (column(&csv, "t"), column(&csv, "area"));
    assert!(ts.len() > 10);
    for (t, a) in ts.iter().zip(&areas) {
        let radius = (a / PI).sqrt();
        assert!((radius - (1.0 - 4.0 / 3.0 * t).powf(0.75)).abs() < 1e-6);
    }
    assert!(out_dir.join("trajectory.jsonl").exists());
    assert!(out_dir.join("frames/frame_0000.svg").exists());
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(out_dir.join("evolve.json")).unwrap()).unwrap();
    assert_eq!(report["stop_reason"], "area_floor");
}

#[test]
fn evolve_ellipse_keeps_ratio_at_sup() {
    let dir = TempDir::new().unwrap();
    let config = "grid = 128\n[curve]\nkind = \"ellipse\"\na = 1.5\nb = 0.8\nangle = 0.7\n[evolve]\nfloor_fraction = 0.05\nframes = false\n";
    let (out, out_dir) = run_in(&dir, "evolve", config, "out", &[]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    let sup = 2.0 * PI.powf(2.0 / 3.0);
    for r in column(&csv, "iso_ratio") {
        assert!((r - sup).abs() < 1e-5, "{r}");
    }
    assert!(!out_dir.join("frames").exists());
}

#[test]
fn runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let (a, a_dir) = run_in(&dir, "evolve", CIRCLE, "a", &[]);
    let (b, b_dir) = run_in(&dir, "evolve", CIRCLE, "b", &[]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(tree(&a_dir), tree(&b_dir));

    let inv = "grid = 64\n[invariance]\nrandom_maps = 2\n";
    let (a, a_dir) = run_in(&dir, "invariance", inv, "ia", &["--seed", "11"]);
    let (b, b_dir) = run_in(&dir, "invariance", inv, "ib", &["--seed", "11"]);
    assert!(a.status.success() && b.status.success());
    assert_eq!(tree(&a_dir), tree(&b_dir));
}

#[test]
fn malformed_config_is_invalid_input_without_output() {
    let dir = TempDir::new().unwrap();
    let (out, out_dir) = run_in(&dir, "evolve", "grid = \"many\"\n", "out", &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.exists());

    let (out, out_dir) = run_in(&dir, "evolve", CIRCLE, "out", &["--safety", "3.0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.exists());
}

#[test]
fn io_failures_exit_four() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("absent.toml");
    let out = acsf(&["ndcheck", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));

    let blocker = dir.path().join("blocker");
    fs::write(&blocker, "a file, not a directory").unwrap();
    let (out, _) = run_in(&dir, "ndcheck", "grid = 64\n", "blocker", &[]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(
        fs::read_to_string(&blocker).unwrap(),
        "a file, not a directory"
    );
}

#[test]
fn classify_writes_report_and_overlays() {
    let dir = TempDir::new().unwrap();
    let config = "grid = 128\n[classify]\nmilestones = 3\n";
    let (out, out_dir) = run_in(&dir, "classify", config, "out", &[]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(out_dir.join("classify.json")).unwrap()).unwrap();
    assert_eq!(report["eps_decreasing"], true);
    assert_eq!(report["milestones"].as_array().unwrap().len(), 4);
    for k in 0..=3 {
        assert!(out_dir.join(format!("overlays/milestone_{k}.svg")).exists());
    }
    let eps = column(
        &fs::read_to_string(out_dir.join("milestones.csv")).unwrap(),
        "eps",
    );
    assert!(eps.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn invariance_rejects_non_unimodular() {
    let dir = TempDir::new().unwrap();
    let (out, out_dir) = run_in(
        &dir,
        "invariance",
        "grid = 64\n[invariance]\nmatrix = [[2.0, 0.0], [0.0, 1.0]]\n",
        "out",
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.exists());
}

#[test]
fn invariance_shear_within_tolerance() {
    let dir = TempDir::new().unwrap();
    let (out, out_dir) = run_in(
        &dir,
        "invariance",
        "grid = 128\n[invariance]\nrandom_maps = 0\n",
        "out",
        &[],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(out_dir.join("invariance.json")).unwrap()).unwrap();
    assert!(report["max_map_deviation"].as_f64().unwrap() < 1e-3);
    assert!(report["max_scaling_deviation"].as_f64().unwrap() < 1e-3);
    assert!(report["maps"][1]["deviation"].as_f64().unwrap() < 1e-9);
}

#[test]
fn arrival_circle_and_coarse_guard() {
    let dir = TempDir::new().unwrap();
    let config =
        "grid = 96\n[curve]\nkind = \"circle\"\nradius = 1.0\n[arrival]\nannulus = [0.2, 0.9]\n";
    let (out, out_dir) = run_in(&dir, "arrival", config, "out", &[]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(out_dir.join("arrival.json")).unwrap()).unwrap();
    assert_eq!(report["all_levels_pass"], true);
    assert!(report["residual"]["median"].as_f64().unwrap() < 2e-2);
    let csv = fs::read_to_string(out_dir.join("field.csv")).unwrap();
    assert_eq!(csv.lines().count(), 96 * 96 + 1);

    let coarse = "[curve]\nkind = \"circle\"\nradius = 1.0\n[arrival]\nnodes = 16\n";
    let (out, out_dir) = run_in(&dir, "arrival", coarse, "coarse", &["--grid", "64"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--grid"));
    assert!(!out_dir.exists());
}

#[test]
fn polygon_file_is_resolved_next_to_config() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("tri.txt"), "# triangle\n0 0\n3 0\n0.5 1\n").unwrap();
    let config = "grid = 128\n[curve]\nkind = \"polygon\"\nfile = \"tri.txt\"\n[evolve]\nfloor_fraction = 0.2\nframes = false\n";
    let (out, out_dir) = run_in(&dir, "evolve", config, "out", &[]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out_dir.join("snapshots.svg").exists());
}

#[test]
fn ndcheck_table_passes() {
    let dir = TempDir::new().unwrap();
    let (out, out_dir) = run_in(&dir, "ndcheck", "grid = 128\n", "out", &[]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let csv = fs::read_to_string(out_dir.join("ndcheck.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",true")));
    let rescale_rows = csv.lines().filter(|l| l.starts_with("rescaling,")).count();
    assert_eq!(rescale_rows, 5 * 4);
    assert!(csv.lines().any(|l| l.starts_with("rescaling,3,1,0,")));
}
