//! TOML experiment configuration. Every section is optional; missing keys
//! fall back to the defaults below.

use std::path::{Path, PathBuf};

use acsf_core::flow::{DEFAULT_FLOOR_FRACTION, DEFAULT_GRID, DEFAULT_SAFETY};
use acsf_core::normalization::DEFAULT_MVEE_TOL;
use acsf_core::{support_of_ellipse, ConvexPolygon, Ellipse, FourierMode, Point, SupportCurve};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const MAX_GRID: usize = 1 << 14;
pub const MAX_ND_DIM: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurveSpec {
    Circle {
        radius: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    Ellipse {
        a: f64,
        b: f64,
        #[serde(default)]
        angle: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    Fourier {
        #[serde(default = "one")]
        base: f64,
        #[serde(default)]
        modes: Vec<FourierMode>,
        #[serde(default)]
        center: [f64; 2],
    },
    /// Vertices in a text file, one `x y` pair per line, relative to the
    /// config file.
    Polygon {
        file: PathBuf,
        rounding: Option<f64>,
    },
}

fn one() -> f64 {
    1.0
}

impl Default for CurveSpec {
    fn default() -> Self {
        CurveSpec::Fourier {
            base: 1.0,
            modes: vec![FourierMode {
                k: 3,
                cos: 0.1,
                sin: 0.0,
            }],
            center: [0.0; 2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveSection {
    /// Stop once the area falls below this fraction of the initial area.
    pub floor_fraction: f64,
    pub area_floor: Option<f64>,
    pub target_time: Option<f64>,
    /// Fraction of the initial area lost between recorded snapshots.
    pub snapshot_every: f64,
    pub frames: bool,
}

impl Default for EvolveSection {
    fn default() -> Self {
        EvolveSection {
            floor_fraction: DEFAULT_FLOOR_FRACTION,
            area_floor: None,
            target_time: None,
            snapshot_every: 0.05,
            frames: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifySection {
    pub base: f64,
    pub milestones: usize,
    pub mvee_tol: f64,
}

impl Default for ClassifySection {
    fn default() -> Self {
        ClassifySection {
            base: 4.0,
            milestones: 6,
            mvee_tol: DEFAULT_MVEE_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InvarianceSection {
    /// Row-major 2x2 matrix; must have determinant one.
    pub matrix: [[f64; 2]; 2],
    pub translation: [f64; 2],
    /// Comparison time; defaults to `time_fraction` of the circle-law lifespan.
    pub time: Option<f64>,
    pub time_fraction: f64,
    pub lambdas: Vec<f64>,
    /// Extra unimodular maps drawn from the seed.
    pub random_maps: usize,
}

impl Default for InvarianceSection {
    fn default() -> Self {
        InvarianceSection {
            matrix: [[1.0, 1.0], [0.0, 1.0]],
            translation: [0.0; 2],
            time: None,
            time_fraction: 0.4,
            lambdas: vec![16.0],
            random_maps: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArrivalSection {
    /// Field nodes per side; defaults to the curve grid.
    pub nodes: Option<usize>,
    pub floor_fraction: f64,
    /// Area ratio between consecutive snapshots used for reconstruction.
    pub snapshot_ratio: f64,
    /// Absolute domain levels `h0`; overrides `level_fractions`.
    pub levels: Option<Vec<f64>>,
    /// Domain levels as fractions of the extinction time.
    pub level_fractions: Vec<f64>,
    /// Residual statistics only between these distances from the extinction
    /// point.
    pub annulus: Option<[f64; 2]>,
}

impl Default for ArrivalSection {
    fn default() -> Self {
        ArrivalSection {
            nodes: None,
            floor_fraction: 1e-2,
            snapshot_ratio: 0.97,
            levels: None,
            level_fractions: vec![0.3, 0.6, 0.9],
            annulus: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NdSection {
    pub max_dim: usize,
    pub radius: f64,
    pub lambdas: Vec<f64>,
}

impl Default for NdSection {
    fn default() -> Self {
        NdSection {
            max_dim: 5,
            radius: 1.0,
            lambdas: vec![0.25, 1.0, 4.0, 16.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub curve: CurveSpec,
    pub grid: usize,
    pub safety: f64,
    pub seed: u64,
    pub evolve: EvolveSection,
    pub classify: ClassifySection,
    pub invariance: InvarianceSection,
    pub arrival: ArrivalSection,
    pub ndcheck: NdSection,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            curve: CurveSpec::default(),
            grid: DEFAULT_GRID,
            safety: DEFAULT_SAFETY,
            seed: 0,
            evolve: EvolveSection::default(),
            classify: ClassifySection::default(),
            invariance: InvarianceSection::default(),
            arrival: ArrivalSection::default(),
            ndcheck: NdSection::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(format!("{name} = {v} must be positive and finite")))
    }
}

fn fraction(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(bad(format!("{name} = {v} must lie in (0, 1)")))
    }
}

impl Config {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let mut config: Config = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        config.base_dir = base_dir.to_path_buf();
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Config::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(16..=MAX_GRID).contains(&self.grid) {
            return Err(bad(format!(
                "grid = {} must lie in 16..={MAX_GRID}",
                self.grid
            )));
        }
        positive("safety", self.safety)?;
        if self.safety > 1.0 {
            return Err(bad(format!("safety = {} must not exceed 1", self.safety)));
        }

        let ev = &self.evolve;
        fraction("evolve.floor_fraction", ev.floor_fraction)?;
        fraction("evolve.snapshot_every", ev.snapshot_every)?;
        if let Some(a) = ev.area_floor {
            positive("evolve.area_floor", a)?;
        }
        if let Some(t) = ev.target_time {
            positive("evolve.target_time", t)?;
        }

        let cl = &self.classify;
        if !(cl.base > 1.0 && cl.base.is_finite()) {
            return Err(bad(format!("classify.base = {} must exceed 1", cl.base)));
        }
        if !(1..=12).contains(&cl.milestones) {
            return Err(bad(format!(
                "classify.milestones = {} must lie in 1..=12",
                cl.milestones
            )));
        }
        if !(cl.mvee_tol > 0.0 && cl.mvee_tol <= 1e-2) {
            return Err(bad(format!(
                "classify.mvee_tol = {} must lie in (0, 1e-2]",
                cl.mvee_tol
            )));
        }

        let inv = &self.invariance;
        if inv
            .matrix
            .iter()
            .flatten()
            .chain(&inv.translation)
            .any(|v| !v.is_finite())
        {
            return Err(bad("invariance.matrix and translation must be finite"));
        }
        if let Some(t) = inv.time {
            positive("invariance.time", t)?;
        }
        fraction("invariance.time_fraction", inv.time_fraction)?;
        for &l in &inv.lambdas {
            positive("invariance.lambdas entry", l)?;
        }
        if inv.random_maps > 64 {
            return Err(bad("invariance.random_maps must not exceed 64"));
        }

        let ar = &self.arrival;
        if let Some(n) = ar.nodes {
            if !(3..=4096).contains(&n) {
                return Err(bad(format!("arrival.nodes = {n} must lie in 3..=4096")));
            }
        }
        fraction("arrival.floor_fraction", ar.floor_fraction)?;
        fraction("arrival.snapshot_ratio", ar.snapshot_ratio)?;
        for &f in &ar.level_fractions {
            fraction("arrival.level_fractions entry", f)?;
        }
        if let Some(levels) = &ar.levels {
            for &l in levels {
                positive("arrival.levels entry", l)?;
            }
        }
        if let Some([lo, hi]) = ar.annulus {
            if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
                return Err(bad(format!(
                    "arrival.annulus = [{lo}, {hi}] must satisfy 0 <= lo < hi"
                )));
            }
        }

        let nd = &self.ndcheck;
        if !(1..=MAX_ND_DIM).contains(&nd.max_dim) {
            return Err(bad(format!(
                "ndcheck.max_dim = {} must lie in 1..={MAX_ND_DIM}",
                nd.max_dim
            )));
        }
        positive("ndcheck.radius", nd.radius)?;
        for &l in &nd.lambdas {
            positive("ndcheck.lambdas entry", l)?;
        }
        Ok(())
    }

    pub fn arrival_nodes(&self) -> usize {
        self.arrival.nodes.unwrap_or(self.grid)
    }

    /// The initial curve sampled on `self.grid` normal angles.
    pub fn initial_curve(&self) -> Result<SupportCurve, CliError> {
        let n = self.grid;
        let point = |c: [f64; 2]| Point::new(c[0], c[1]);
        let curve = match &self.curve {
            CurveSpec::Circle { radius, center } => {
                SupportCurve::circle(n, *radius, point(*center))?
            }
            CurveSpec::Ellipse {
                a,
                b,
                angle,
                center,
            } => support_of_ellipse(&Ellipse::from_axes(point(*center), *a, *b, *angle)?, n)?,
            CurveSpec::Fourier {
                base,
                modes,
                center,
            } => SupportCurve::from_fourier(n, *base, modes, point(*center))?,
            CurveSpec::Polygon { file, rounding } => {
                let path = self.base_dir.join(file);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| bad(format!("polygon file {}: {e}", path.display())))?;
                let poly = ConvexPolygon::parse(&text)?;
                match rounding {
                    Some(r) => acsf_core::from_polygon_rounded(&poly, n, *r)?,
                    None => acsf_core::from_polygon(&poly, n)?,
                }
            }
        };
        Ok(curve)
    }
}
