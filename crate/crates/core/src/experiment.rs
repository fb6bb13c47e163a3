//! The five `ivpb` subcommands: build what a command needs from a
//! [`RunConfig`], run it and write its artifacts plus `manifest.json`.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cascade::{CascadeReport, ExpansionSet};
use crate::collision::CollisionOperator;
use crate::config::RunConfig;
use crate::diagnostics::{epsilon_sweep, phase_l2, SweepReport};
use crate::error::{Error, Result};
use crate::euler::{EulerSolver, FluidState, Trajectory};
use crate::grid::{SpatialGrid, VelocityGrid};
use crate::io::{
    encode_f64s, read_trajectory, write_bytes, write_json, write_ledger_csv, write_snapshot, write_sweep_csv,
    write_trajectory, write_trajectory_csv, RunManifest,
};
use crate::kinetic::KineticSolver;
use crate::maxwellian::GlobalMaxwellian;
use crate::verify::{run_suite, SuiteSizes, VerifyReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Euler,
    Cascade,
    Kinetic,
    Sweep,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Euler => "euler",
            Command::Cascade => "cascade",
            Command::Kinetic => "kinetic",
            Command::Sweep => "sweep",
            Command::Verify => "verify",
        }
    }
}

/// What a finished command leaves behind. `passed` is false only when
/// `verify` found a failing check.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub manifest: RunManifest,
    pub passed: bool,
    pub verify: Option<VerifyReport>,
}

/// The velocity side of a run: `θ_M`, its grid and the collision operator.
pub struct VelocitySetup {
    pub global: GlobalMaxwellian,
    pub grid: VelocityGrid,
    pub collision: CollisionOperator,
}

pub fn velocity_setup(cfg: &RunConfig, initial: &FluidState) -> Result<VelocitySetup> {
    let global = cfg.global_maxwellian(&initial.theta)?;
    let grid = cfg.velocity_grid(&global)?;
    let collision = CollisionOperator::new(&grid, &cfg.collision_config()?)?;
    Ok(VelocitySetup { global, grid, collision })
}

/// Initial fluid state on the kinetic grid.
pub fn initial_fluid(cfg: &RunConfig) -> Result<FluidState> {
    let solver = EulerSolver::new(&cfg.spatial_grid()?, &cfg.euler_options())?;
    let i = &cfg.initial;
    solver.init_irrotational(i.amplitude, &i.modes, cfg.physics.k, i.velocity_ratio)
}

/// Euler–Poisson reference on the refined grid up to `kinetic.t_end`,
/// restricted to the kinetic grid.
pub fn fluid_reference(cfg: &RunConfig) -> Result<Trajectory> {
    let solver = EulerSolver::new(&cfg.fine_grid()?, &cfg.euler_options())?;
    let i = &cfg.initial;
    let initial = solver.init_irrotational(i.amplitude, &i.modes, cfg.physics.k, i.velocity_ratio)?;
    solver
        .run(&initial, cfg.kinetic.t_end, cfg.euler.store_every)?
        .restrict(cfg.euler.refinement)
}

/// Where the cascade background came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySource {
    pub manifest: Option<String>,
    pub sha256: String,
}

/// The fluid reference, read from `cascade.trajectory` when set and computed
/// (and saved into `out`) otherwise.
pub fn background(cfg: &RunConfig, out: &Path, manifest: &mut RunManifest) -> Result<(Trajectory, TrajectorySource)> {
    if cfg.cascade.trajectory.is_empty() {
        let traj = fluid_reference(cfg)?;
        let written = write_trajectory(out, "trajectory", &traj)?;
        manifest.record("trajectory.bin", written.sha256.clone());
        return Ok((
            traj,
            TrajectorySource {
                manifest: None,
                sha256: written.sha256,
            },
        ));
    }
    let path = Path::new(&cfg.cascade.trajectory);
    let (traj, saved) = read_trajectory(path)?;
    let expected = cfg.spatial_grid()?;
    if traj.grid != expected {
        return Err(Error::config(
            "cascade.trajectory",
            format!("{} holds a {:?} grid, the config asks for {expected:?}", path.display(), traj.grid),
        ));
    }
    if saved.k != cfg.physics.k {
        return Err(Error::config(
            "cascade.trajectory",
            format!("{} was computed with K = {}, the config has {}", path.display(), saved.k, cfg.physics.k),
        ));
    }
    Ok((
        traj,
        TrajectorySource {
            manifest: Some(path.display().to_string()),
            sha256: saved.sha256,
        },
    ))
}

/// Kinetic stored times: every `store_every` steps and the end.
pub fn stored_times(cfg: &RunConfig) -> Vec<f64> {
    let k = &cfg.kinetic;
    let steps = (k.t_end / k.dt).round() as usize;
    let mut times: Vec<f64> = (0..=steps)
        .filter(|i| i % k.store_every == 0 || *i == steps)
        .map(|i| i as f64 * k.dt)
        .collect();
    if let Some(last) = times.last_mut() {
        *last = k.t_end;
    }
    times
}

/// Per stored time and order `n ≥ 1`: `ρ_n, u_n (3 per cell), θ_n, φ_n`.
pub const EXPANSION_LAYOUT: [&str; 4] = ["rho", "u", "theta", "phi"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpansionManifest {
    pub kind: String,
    pub data: String,
    pub sha256: String,
    pub spatial: SpatialGrid,
    pub velocity_nodes: usize,
    pub v_max: f64,
    pub theta_m: f64,
    pub orders: usize,
    pub times: Vec<f64>,
    pub layout: Vec<String>,
    /// `max_t ‖F_n‖_{L²}` for `n = 0, 1, ...`.
    pub phase_norms: Vec<f64>,
    pub report: CascadeReport,
}

fn write_expansion(
    out: &Path,
    set: &ExpansionSet,
    global: &GlobalMaxwellian,
    times: &[f64],
) -> Result<ExpansionManifest> {
    let orders = set.solved_orders();
    let spatial = set.spatial_grid();
    let velocity = set.velocity_grid();
    let mut values = Vec::new();
    let mut phase_norms = vec![0.0f64; orders + 1];
    for &t in times {
        for n in 1..=orders {
            let m = set.macroscopic(n, t)?;
            values.extend(&m.rho);
            values.extend(m.u.iter().flatten());
            values.extend(&m.theta);
            values.extend(&m.phi);
        }
        for (n, norm) in phase_norms.iter_mut().enumerate() {
            *norm = norm.max(phase_l2(&set.phase(n, t)?, spatial, velocity));
        }
    }
    let data = "expansion.bin".to_string();
    let sha256 = write_bytes(&out.join(&data), &encode_f64s(&values))?;
    let manifest = ExpansionManifest {
        kind: "hilbert_expansion".into(),
        data,
        sha256,
        spatial: spatial.clone(),
        velocity_nodes: velocity.nodes_per_axis(),
        v_max: velocity.v_max(),
        theta_m: global.theta_m,
        orders,
        times: times.to_vec(),
        layout: EXPANSION_LAYOUT.iter().map(|s| s.to_string()).collect(),
        phase_norms,
        report: set.report(),
    };
    write_json(&out.join("expansion.json"), &manifest)?;
    Ok(manifest)
}

/// Background plus every solved order.
pub fn build_expansion(
    cfg: &RunConfig,
    out: &Path,
    manifest: &mut RunManifest,
) -> Result<(ExpansionSet, VelocitySetup, TrajectorySource)> {
    let (traj, source) = background(cfg, out, manifest)?;
    let velocity = velocity_setup(cfg, &traj.states[0])?;
    let set = ExpansionSet::build(traj, &velocity.collision, cfg.cascade_options())?;
    Ok((set, velocity, source))
}

fn run_euler(cfg: &RunConfig, out: &Path, manifest: &mut RunManifest) -> Result<()> {
    let traj = fluid_reference(cfg)?;
    manifest.record("trajectory.csv", write_trajectory_csv(&out.join("trajectory.csv"), &traj)?);
    let written = write_trajectory(out, "trajectory", &traj)?;
    manifest.record("trajectory.bin", written.sha256);
    Ok(())
}

fn run_cascade(cfg: &RunConfig, out: &Path, manifest: &mut RunManifest) -> Result<()> {
    let (set, velocity, source) = build_expansion(cfg, out, manifest)?;
    let written = write_expansion(out, &set, &velocity.global, &stored_times(cfg))?;
    manifest.record("expansion.bin", written.sha256);
    manifest.record("cascade.json", write_json(&out.join("cascade.json"), &set.report())?);
    manifest.provenance = json!({ "trajectory": source, "theta_m": velocity.global.theta_m });
    Ok(())
}

fn run_kinetic(cfg: &RunConfig, out: &Path, manifest: &mut RunManifest) -> Result<()> {
    let fluid = initial_fluid(cfg)?;
    let velocity = velocity_setup(cfg, &fluid)?;
    let spatial = cfg.spatial_grid()?;
    let solver = KineticSolver::new(&spatial, &velocity.collision, &cfg.kinetic_options())?;
    let mut runs = Vec::new();
    let mut epsilons = cfg.kinetic.epsilons.clone();
    epsilons.sort_by(|a, b| b.total_cmp(a));
    for (i, &eps) in epsilons.iter().enumerate() {
        let initial = solver.well_prepared(&fluid, eps, 0.0)?;
        let mut last = initial.clone();
        let ledger = solver.run_with(&initial, cfg.kinetic.t_end, usize::MAX, |s| {
            last = s.clone();
            Ok(())
        })?;
        let stem = format!("kinetic_{i}");
        let snap = write_snapshot(out, &stem, &last, &spatial, &velocity.grid, &ledger)?;
        manifest.record(&format!("{stem}.bin"), snap.sha256);
        runs.push((eps, ledger));
    }
    manifest.record("ledger.csv", write_ledger_csv(&out.join("ledger.csv"), &runs)?);
    manifest.provenance = json!({ "theta_m": velocity.global.theta_m, "epsilons": epsilons });
    Ok(())
}

fn run_sweep(cfg: &RunConfig, out: &Path, manifest: &mut RunManifest) -> Result<SweepReport> {
    // Reject the ε list before any expensive work.
    let inputs = cfg.sweep_inputs()?;
    let (set, velocity, source) = build_expansion(cfg, out, manifest)?;
    let report = epsilon_sweep(&set, &velocity.collision, &velocity.global, &inputs)?;
    manifest.record("sweep.csv", write_sweep_csv(&out.join("sweep.csv"), &report)?);
    manifest.record("sweep.json", write_json(&out.join("sweep.json"), &report)?);
    let runs: Vec<_> = report.rows.iter().map(|r| (r.epsilon, r.ledger.clone())).collect();
    manifest.record("ledger.csv", write_ledger_csv(&out.join("ledger.csv"), &runs)?);
    manifest.provenance = json!({ "trajectory": source, "theta_m": velocity.global.theta_m });
    Ok(report)
}

/// Runs `cmd` and writes its artifacts into `out`, creating it if needed.
pub fn run_command(cmd: Command, cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    cfg.validate()?;
    std::fs::create_dir_all(out)?;
    let start = Instant::now();
    let mut manifest = RunManifest::new(cmd.name(), cfg);
    manifest.record("config.toml", write_bytes(&out.join("config.toml"), cfg.to_toml().as_bytes())?);
    let mut verify = None;
    match cmd {
        Command::Euler => run_euler(cfg, out, &mut manifest)?,
        Command::Cascade => run_cascade(cfg, out, &mut manifest)?,
        Command::Kinetic => run_kinetic(cfg, out, &mut manifest)?,
        Command::Sweep => {
            run_sweep(cfg, out, &mut manifest)?;
        }
        Command::Verify => {
            let report = run_suite(&SuiteSizes::default(), cfg.seed)?;
            manifest.record("verify.json", write_json(&out.join("verify.json"), &report)?);
            verify = Some(report);
        }
    }
    manifest.wall_time_s = start.elapsed().as_secs_f64();
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(Outcome {
        passed: verify.as_ref().is_none_or(|r| r.passed),
        manifest,
        verify,
    })
}
