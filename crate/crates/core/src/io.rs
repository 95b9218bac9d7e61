//! Text exchange formats: trajectory JSON lines, summary and ratio CSVs, and
//! the arrival-field CSV with its JSON sidecar.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::arrival::ArrivalField;
use crate::curve::{Point, SupportCurve};
use crate::error::{Error, Result};
use crate::flow::{FlowState, Trajectory};
use crate::invariants::{affine_length, RatioSeries};

/// One trajectory line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StateRecord {
    t: f64,
    n_samples: usize,
    origin: [f64; 2],
    h: Vec<f64>,
}

pub fn trajectory_jsonl(traj: &Trajectory) -> String {
    let mut out = String::new();
    for s in traj.states() {
        let o = s.curve.origin();
        let rec = StateRecord {
            t: s.t,
            n_samples: s.curve.n_samples(),
            origin: [o.x, o.y],
            h: s.curve.h().to_vec(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("plain numbers serialize"));
        out.push('\n');
    }
    out
}

/// Parses trajectory JSON lines; `origin` defaults to the coordinate origin.
pub fn parse_trajectory_jsonl(text: &str) -> Result<Vec<FlowState>> {
    #[derive(Deserialize)]
    struct Loose {
        t: f64,
        n_samples: usize,
        #[serde(default)]
        origin: [f64; 2],
        h: Vec<f64>,
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let rec: Loose = serde_json::from_str(line)
                .map_err(|e| Error::invalid(format!("line {}: {e}", i + 1)))?;
            if rec.n_samples != rec.h.len() {
                return Err(Error::invalid(format!(
                    "line {}: n_samples = {} but {} values",
                    i + 1,
                    rec.n_samples,
                    rec.h.len()
                )));
            }
            let curve = SupportCurve::new(rec.h, Point::new(rec.origin[0], rec.origin[1]))?;
            Ok(FlowState { t: rec.t, curve })
        })
        .collect()
}

/// `t,area,affine_length,iso_ratio` per snapshot.
pub fn summary_csv(traj: &Trajectory) -> Result<String> {
    let mut out = String::from("t,area,affine_length,iso_ratio\n");
    for s in traj.states() {
        let area = s.curve.area();
        let length = affine_length(&s.curve)?;
        let ratio = length * area.powf(-1.0 / 3.0);
        writeln!(out, "{},{},{},{}", s.t, area, length, ratio).expect("writing to a String");
    }
    Ok(out)
}

/// `t,ratio,gap_to_sup` per entry.
pub fn ratio_csv(series: &RatioSeries) -> String {
    let mut out = String::from("t,ratio,gap_to_sup\n");
    for (t, r) in series.times.iter().zip(&series.ratios) {
        writeln!(out, "{},{},{}", t, r, series.sup_value - r).expect("writing to a String");
    }
    out
}

/// `i,j,x,y,tau,u,resolved` per node; NaN marks nodes without a value.
pub fn field_csv(field: &ArrivalField) -> String {
    let g = field.grid();
    let mut out = String::with_capacity(48 * g.len());
    out.push_str("i,j,x,y,tau,u,resolved\n");
    for k in 0..g.len() {
        let (i, j) = g.coords(k);
        let p = g.node(i, j);
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            i,
            j,
            p.x,
            p.y,
            field.tau()[k],
            field.u()[k],
            u8::from(field.resolved()[k])
        )
        .expect("writing to a String");
    }
    out
}

pub fn field_meta_json(field: &ArrivalField) -> String {
    serde_json::to_string_pretty(&field.meta()).expect("plain numbers serialize")
}
