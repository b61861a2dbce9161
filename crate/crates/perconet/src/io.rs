//! CSV and JSON file formats.

use std::path::{Path, PathBuf};

use perconet_core::chain::{ArrivalChain, DeviationRow, PairHistogram};
use perconet_core::connectivity::ConnectivitySeries;
use perconet_core::mobility::{DensityField, DensityLabel, Trajectory};
use perconet_core::percolation::ThetaTable;
use serde::{Deserialize, Serialize};

use crate::error::RunError;

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>, RunError> {
    csv::Writer::from_path(path).map_err(RunError::from)
}

fn num(x: f64) -> String {
    format!("{x}")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| RunError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, RunError> {
    let text = std::fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Metadata stored next to a theta table CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaSidecar {
    pub seed: u64,
    pub d: usize,
    pub eps_lambda: f64,
    pub lambda_cr: f64,
    /// Absent for tables not produced by simulation.
    pub box_half_width: Option<f64>,
    pub hits: Vec<usize>,
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// `lambda,raw,stderr,fit,trials,L` plus a JSON sidecar.
pub fn write_theta_table(path: &Path, table: &ThetaTable, seed: u64) -> Result<Vec<PathBuf>, RunError> {
    let mut w = writer(path)?;
    w.write_record(["lambda", "raw", "stderr", "fit", "trials", "L"])?;
    for i in 0..table.len() {
        w.write_record([
            num(table.lambda_grid[i]),
            num(table.raw_estimates[i]),
            num(table.std_errors[i]),
            num(table.monotone_fit[i]),
            table.trials.to_string(),
            num(table.box_side()),
        ])?;
    }
    w.flush().map_err(|e| RunError::io(path, e))?;
    let side = ThetaSidecar {
        seed,
        d: table.dim,
        eps_lambda: table.eps_lambda,
        lambda_cr: table.lambda_cr_const,
        box_half_width: table.box_half_width.is_finite().then_some(table.box_half_width),
        hits: table.hits.clone(),
    };
    let json = sidecar_path(path);
    write_json(&json, &side)?;
    Ok(vec![path.to_path_buf(), json])
}

#[derive(Debug, Deserialize)]
struct ThetaRow {
    lambda: f64,
    raw: f64,
    stderr: f64,
    fit: f64,
    trials: usize,
    #[serde(rename = "L")]
    _l: f64,
}

pub fn read_theta_table(path: &Path) -> Result<ThetaTable, RunError> {
    let side: ThetaSidecar = read_json(&sidecar_path(path))?;
    let mut r = csv::Reader::from_path(path)?;
    let rows: Vec<ThetaRow> = r.deserialize().collect::<Result<_, _>>()?;
    if rows.is_empty() {
        return Err(RunError::Format(format!("{}: empty theta table", path.display())));
    }
    let grid: Vec<f64> = rows.iter().map(|r| r.lambda).collect();
    let fit: Vec<f64> = rows.iter().map(|r| r.fit).collect();
    let mut t = ThetaTable::from_fit(grid, fit, side.d, side.lambda_cr)?;
    t.raw_estimates = rows.iter().map(|r| r.raw).collect();
    t.std_errors = rows.iter().map(|r| r.stderr).collect();
    t.trials = rows[0].trials;
    t.hits = side.hits;
    t.box_half_width = side.box_half_width.unwrap_or(f64::INFINITY);
    t.eps_lambda = side.eps_lambda;
    Ok(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySidecar {
    pub resolution: usize,
    pub samples: usize,
    pub label: String,
    pub time: Option<f64>,
    pub seed: u64,
    pub mass: f64,
}

/// `cell_x,cell_y[,cell_z],value` per stored cell plus a JSON sidecar.
pub fn write_density_field(path: &Path, field: &DensityField, seed: u64) -> Result<Vec<PathBuf>, RunError> {
    let d = field.grid.dim();
    let mut w = writer(path)?;
    let mut header = vec!["cell_x", "cell_y"];
    if d == 3 {
        header.push("cell_z");
    }
    header.push("value");
    w.write_record(&header)?;
    for (c, v) in field.grid.centers().iter().zip(&field.values) {
        let mut rec: Vec<String> = c.coords().iter().map(|x| num(*x)).collect();
        rec.push(num(*v));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| RunError::io(path, e))?;
    let (label, time) = match field.label {
        DensityLabel::Stationary => ("stationary".to_string(), None),
        DensityLabel::Transient { time } => ("transient".to_string(), Some(time)),
    };
    let side = DensitySidecar {
        resolution: field.grid.resolution(),
        samples: field.sample_count,
        label,
        time,
        seed,
        mass: field.mass(),
    };
    let json = sidecar_path(path);
    write_json(&json, &side)?;
    Ok(vec![path.to_path_buf(), json])
}

/// `k,Wx,Wy,V,R`; `V` is the speed of the trip ending at waypoint `k`.
pub fn write_trajectory(path: &Path, t: &Trajectory) -> Result<(), RunError> {
    let mut w = writer(path)?;
    w.write_record(["k", "Wx", "Wy", "V", "R"])?;
    for (k, (p, r)) in t.waypoints().iter().zip(t.arrivals()).enumerate() {
        let v = if k == 0 { String::new() } else { num(t.velocities()[k - 1]) };
        w.write_record([k.to_string(), num(p.x()), num(p.y()), v, num(*r)])?;
    }
    w.flush().map_err(|e| RunError::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConnectRow {
    pub trial: usize,
    pub n: usize,
    pub r: f64,
    pub dt: f64,
    pub tau: f64,
    pub tau_over_t: f64,
}

pub fn write_connect_times(path: &Path, rows: &[ConnectRow]) -> Result<(), RunError> {
    let mut w = writer(path)?;
    w.write_record(["trial", "N", "R", "dt", "tau", "tau_over_T"])?;
    for r in rows {
        w.write_record([r.trial.to_string(), r.n.to_string(), num(r.r), num(r.dt), num(r.tau), num(r.tau_over_t)])?;
    }
    w.flush().map_err(|e| RunError::io(path, e))
}

/// `s,connected` with `connected` written as 0/1.
pub fn write_series(path: &Path, s: &ConnectivitySeries) -> Result<(), RunError> {
    let mut w = writer(path)?;
    w.write_record(["s", "connected"])?;
    for (t, c) in s.times.iter().zip(&s.connected) {
        w.write_record([num(*t), (*c as u8).to_string()])?;
    }
    w.flush().map_err(|e| RunError::io(path, e))
}

/// `j,S,x1x,x1y,w1x,w1y,v1,x2x,x2y,w2x,w2y,v2`.
pub fn write_chain(path: &Path, chain: &ArrivalChain) -> Result<(), RunError> {
    let mut w = writer(path)?;
    w.write_record(["j", "S", "x1x", "x1y", "w1x", "w1y", "v1", "x2x", "x2y", "w2x", "w2y", "v2"])?;
    for (j, (s, z)) in chain.times.iter().zip(&chain.states).enumerate() {
        let [a, b] = &z.walkers;
        w.write_record([
            j.to_string(),
            num(*s),
            num(a.position.x()),
            num(a.position.y()),
            num(a.target.x()),
            num(a.target.y()),
            num(a.velocity),
            num(b.position.x()),
            num(b.position.y()),
            num(b.target.x()),
            num(b.target.y()),
            num(b.velocity),
        ])?;
    }
    w.flush().map_err(|e| RunError::io(path, e))
}

/// `p,T,trials,hits,log_prob_over_T,flag`; zero-hit rows carry the
/// resolution bound in `log_prob_over_T` and `flag = below_resolution`.
pub fn write_deviations(path: &Path, rows: &[DeviationRow]) -> Result<(), RunError> {
    let mut w = writer(path)?;
    w.write_record(["p", "T", "trials", "hits", "log_prob_over_T", "flag"])?;
    for r in rows {
        let (v, flag) = match (r.log_prob_over_t, r.below_resolution) {
            (Some(v), _) => (num(v), ""),
            (None, Some(b)) => (num(b), "below_resolution"),
            (None, None) => (String::new(), "missing"),
        };
        w.write_record([num(r.p), num(r.horizon), r.trials.to_string(), r.hits.to_string(), v, flag.to_string()])?;
    }
    w.flush().map_err(|e| RunError::io(path, e))
}

/// Serializable view of a pair histogram with its bin specification.
#[derive(Debug, Clone, Serialize)]
pub struct HistogramJson {
    pub feature_map: &'static str,
    pub bins: [usize; 5],
    pub radius_max: f64,
    pub dist_max: f64,
    pub v_minus: f64,
    pub v_plus: f64,
    pub total: f64,
    pub entries: Vec<(u32, u32, f64)>,
}

impl From<&PairHistogram> for HistogramJson {
    fn from(h: &PairHistogram) -> Self {
        HistogramJson {
            feature_map: "(|x1-c|, |x2-c|, |x1-x2|, v1, v2)",
            bins: h.bins.counts,
            radius_max: h.bins.radius_max,
            dist_max: h.bins.dist_max,
            v_minus: h.bins.v_minus,
            v_plus: h.bins.v_plus,
            total: h.total,
            entries: h.weights.iter().map(|(&(a, b), &w)| (a, b, w)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("theta.csv");
        let t = ThetaTable::from_fit(vec![0.1, 0.5, 1.0], vec![0.0, 0.25, 0.75], 2, 0.5).unwrap();
        write_theta_table(&p, &t, 9).unwrap();
        let back = read_theta_table(&p).unwrap();
        assert_eq!(back, t);
    }
}
