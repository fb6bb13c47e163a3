//! Artifact files: CSV tables, JSON reports, raw little-endian `f64` dumps
//! and the JSON manifests that describe them.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::diagnostics::SweepReport;
use crate::error::{Error, Result};
use crate::euler::{FluidRates, FluidState, Trajectory};
use crate::grid::{SpatialGrid, VelocityGrid};
use crate::kinetic::{KineticState, StepLedger};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn encode_f64s(values: &[f64]) -> Vec<u8> {
    values.iter().flat_map(|x| x.to_le_bytes()).collect()
}

pub fn decode_f64s(bytes: &[u8]) -> Result<Vec<f64>> {
    if bytes.len() % 8 != 0 {
        return Err(Error::InvalidInput(format!("{} bytes is not a whole number of f64 values", bytes.len())));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.display().to_string(),
        message: message.into(),
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    format_err(path, e.to_string())
}

/// Writes `bytes` and returns their checksum.
pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<String> {
    fs::write(path, bytes)?;
    Ok(sha256_hex(bytes))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

#[derive(Serialize)]
struct TrajectoryRow {
    t: f64,
    cell: usize,
    rho: f64,
    u_x: f64,
    u_y: f64,
    u_z: f64,
    theta: f64,
    phi: f64,
}

fn csv_bytes<R: Serialize>(path: &Path, rows: impl IntoIterator<Item = R>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| csv_err(path, e))?;
    }
    w.into_inner().map_err(|e| format_err(path, e.to_string()))
}

/// One row per stored time and cell.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<String> {
    let rows = traj.times.iter().zip(&traj.states).flat_map(|(&t, s)| {
        (0..s.num_cells()).map(move |c| TrajectoryRow {
            t,
            cell: c,
            rho: s.rho[c],
            u_x: s.u[c][0],
            u_y: s.u[c][1],
            u_z: s.u[c][2],
            theta: s.theta[c],
            phi: s.phi[c],
        })
    });
    write_bytes(path, &csv_bytes(path, rows)?)
}

/// Per stored time, in this order, each a run of `cells` values (`u` fields
/// hold `3·cells`, cell-major).
pub const TRAJECTORY_LAYOUT: [&str; 8] = ["rho", "u", "theta", "phi", "rho_t", "u_t", "theta_t", "phi_t"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryManifest {
    pub kind: String,
    pub data: String,
    pub sha256: String,
    pub grid: SpatialGrid,
    pub k: f64,
    pub times: Vec<f64>,
    pub layout: Vec<String>,
}

/// Dumps a trajectory to `<stem>.bin` with manifest `<stem>.json`; returns
/// the manifest.
pub fn write_trajectory(dir: &Path, stem: &str, traj: &Trajectory) -> Result<TrajectoryManifest> {
    let mut values = Vec::new();
    for (s, r) in traj.states.iter().zip(&traj.rates) {
        values.extend(&s.rho);
        values.extend(s.u.iter().flatten());
        values.extend(&s.theta);
        values.extend(&s.phi);
        values.extend(&r.rho);
        values.extend(r.u.iter().flatten());
        values.extend(&r.theta);
        values.extend(&r.phi);
    }
    let data = format!("{stem}.bin");
    let sha256 = write_bytes(&dir.join(&data), &encode_f64s(&values))?;
    let manifest = TrajectoryManifest {
        kind: "euler_trajectory".into(),
        data,
        sha256,
        grid: traj.grid.clone(),
        k: traj.states.first().map_or(0.0, |s| s.k),
        times: traj.times.clone(),
        layout: TRAJECTORY_LAYOUT.iter().map(|s| s.to_string()).collect(),
    };
    write_json(&dir.join(format!("{stem}.json")), &manifest)?;
    Ok(manifest)
}

/// Loads a trajectory from its manifest, checking the data checksum.
pub fn read_trajectory(manifest_path: &Path) -> Result<(Trajectory, TrajectoryManifest)> {
    let manifest: TrajectoryManifest = serde_json::from_str(&fs::read_to_string(manifest_path)?)?;
    let data_path = manifest_path.parent().unwrap_or(Path::new(".")).join(&manifest.data);
    let bytes = fs::read(&data_path)?;
    let sum = sha256_hex(&bytes);
    if sum != manifest.sha256 {
        return Err(format_err(&data_path, format!("checksum {sum} does not match the manifest")));
    }
    let values = decode_f64s(&bytes)?;
    let n = manifest.grid.num_cells();
    let per_time = 12 * n;
    if values.len() != per_time * manifest.times.len() {
        return Err(format_err(
            &data_path,
            format!("{} values for {} times of {n} cells", values.len(), manifest.times.len()),
        ));
    }
    let vec3 = |v: &[f64]| v.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect::<Vec<_>>();
    let mut states = Vec::new();
    let mut rates = Vec::new();
    for chunk in values.chunks_exact(per_time) {
        let (state, rate) = chunk.split_at(6 * n);
        states.push(FluidState {
            rho: state[..n].to_vec(),
            u: vec3(&state[n..4 * n]),
            theta: state[4 * n..5 * n].to_vec(),
            phi: state[5 * n..].to_vec(),
            k: manifest.k,
        });
        rates.push(FluidRates {
            rho: rate[..n].to_vec(),
            u: vec3(&rate[n..4 * n]),
            theta: rate[4 * n..5 * n].to_vec(),
            phi: rate[5 * n..].to_vec(),
        });
    }
    let traj = Trajectory {
        grid: manifest.grid.clone(),
        times: manifest.times.clone(),
        states,
        rates,
    };
    Ok((traj, manifest))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotManifest {
    pub kind: String,
    /// `F` (cell-major) followed by `φ`.
    pub data: String,
    pub sha256: String,
    pub spatial: SpatialGrid,
    pub velocity_nodes: usize,
    pub v_max: f64,
    pub epsilon: f64,
    pub time: f64,
    pub ledger: Vec<StepLedger>,
}

pub fn write_snapshot(
    dir: &Path,
    stem: &str,
    state: &KineticState,
    spatial: &SpatialGrid,
    velocity: &VelocityGrid,
    ledger: &[StepLedger],
) -> Result<SnapshotManifest> {
    let mut values = state.f.clone();
    values.extend(&state.phi);
    let data = format!("{stem}.bin");
    let sha256 = write_bytes(&dir.join(&data), &encode_f64s(&values))?;
    let manifest = SnapshotManifest {
        kind: "kinetic_snapshot".into(),
        data,
        sha256,
        spatial: spatial.clone(),
        velocity_nodes: velocity.nodes_per_axis(),
        v_max: velocity.v_max(),
        epsilon: state.epsilon,
        time: state.time,
        ledger: ledger.to_vec(),
    };
    write_json(&dir.join(format!("{stem}.json")), &manifest)?;
    Ok(manifest)
}

#[derive(Serialize)]
struct LedgerRow {
    epsilon: f64,
    t: f64,
    mass: f64,
    momentum_x: f64,
    momentum_y: f64,
    momentum_z: f64,
    kinetic_energy: f64,
    momentum_work_x: f64,
    energy_work: f64,
    velocity_leakage: f64,
    clipped_cells: usize,
}

pub fn write_ledger_csv(path: &Path, runs: &[(f64, Vec<StepLedger>)]) -> Result<String> {
    let rows = runs.iter().flat_map(|(eps, ledger)| {
        ledger.iter().map(move |l| LedgerRow {
            epsilon: *eps,
            t: l.time,
            mass: l.mass,
            momentum_x: l.momentum[0],
            momentum_y: l.momentum[1],
            momentum_z: l.momentum[2],
            kinetic_energy: l.kinetic_energy,
            momentum_work_x: l.momentum_work[0],
            energy_work: l.energy_work,
            velocity_leakage: l.velocity_leakage,
            clipped_cells: l.clipped_cells,
        })
    });
    write_bytes(path, &csv_bytes(path, rows)?)
}

/// One row per ε: the deviation, every norm-package entry and the ledger
/// summary.
pub fn write_sweep_csv(path: &Path, report: &SweepReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["epsilon".to_string(), "sup_deviation".into()];
    if let Some(row) = report.rows.first() {
        header.extend(row.norms.entries().iter().map(|(n, _)| n.to_string()));
    }
    header.extend(["mass_drift", "momentum_defect", "velocity_leakage", "clipped_fraction"].map(String::from));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for row in &report.rows {
        let mut record = vec![row.epsilon.to_string(), row.sup_deviation.to_string()];
        record.extend(row.norms.entries().iter().map(|(_, x)| x.to_string()));
        record.extend(
            [row.mass_drift, row.momentum_defect, row.velocity_leakage, row.clipped_fraction].map(|x| x.to_string()),
        );
        w.write_record(&record).map_err(|e| csv_err(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| format_err(path, e.to_string()))?;
    write_bytes(path, &bytes)
}

/// What a subcommand ran and produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: RunConfig,
    pub wall_time_s: f64,
    /// File name to SHA-256.
    pub artifacts: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub provenance: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: config.clone(),
            wall_time_s: 0.0,
            artifacts: BTreeMap::new(),
            provenance: serde_json::Value::Null,
        }
    }

    pub fn record(&mut self, name: &str, sha256: String) {
        self.artifacts.insert(name.into(), sha256);
    }
}

#[cfg(test)]
mod tests;
