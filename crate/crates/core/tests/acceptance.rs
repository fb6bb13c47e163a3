//! One test per acceptance criterion. Each prints a `criterion N: PASS|FAIL`
//! line with the measured quantities and the wall time against its budget;
//! the budget is reported, not enforced.

use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use ivpb_core::cascade::{assemble_matrices, BackgroundSlice, CascadeOptions, ExpansionSet};
use ivpb_core::collision::{CollisionConfig, CollisionOperator};
use ivpb_core::config::{parse_config, RunConfig};
use ivpb_core::diagnostics::{phase_l2, SweepReport};
use ivpb_core::euler::{EulerOptions, EulerSolver, FluidState, Reconstruction};
use ivpb_core::experiment::{fluid_reference, initial_fluid, run_command, velocity_setup, Command};
use ivpb_core::grid::{SpatialGrid, VelocityGrid};
use ivpb_core::kinetic::KineticSolver;
use ivpb_core::poisson::{EllipticSolveOptions, LaplacianStencil};
use ivpb_core::spectral::Spectral;
use ivpb_core::verify::{
    chi_orthonormality, collision_conservation, linearized_properties, lyapunov_bracket, poisson_checks,
    taylor_identities, Check,
};

const SEED: u64 = 20240601;

fn verdict(criterion: &str, passed: bool, detail: &str, elapsed: Duration, budget_s: f64) {
    let secs = elapsed.as_secs_f64();
    let budget = if secs <= budget_s { "within" } else { "OVER" };
    println!(
        "criterion {criterion}: {}  {detail}  [{secs:.1} s, {budget} the {budget_s} s budget]",
        if passed { "PASS" } else { "FAIL" }
    );
}

fn check_line(criterion: &str, checks: &[Check], elapsed: Duration, budget_s: f64) {
    let detail = checks
        .iter()
        .map(|c| format!("{} {:.2e}/{:.0e}", c.name, c.defect, c.limit))
        .collect::<Vec<_>>()
        .join(", ");
    let passed = checks.iter().all(|c| c.passed);
    verdict(criterion, passed, &detail, elapsed, budget_s);
    assert!(passed, "{checks:?}");
}

#[test]
fn criterion_1_chi_orthonormality() {
    let start = Instant::now();
    let check = chi_orthonormality(24, 8.0).unwrap();
    check_line("1", &[check], start.elapsed(), 5.0);
}

#[test]
fn criterion_2_collision_conservation() {
    let start = Instant::now();
    let checks = collision_conservation(16, 20, SEED).unwrap();
    check_line("2", &checks, start.elapsed(), 120.0);
}

#[test]
fn criterion_3_linearized_operator() {
    let start = Instant::now();
    let checks = linearized_properties([12, 16], 20, SEED).unwrap();
    check_line("3", &checks, start.elapsed(), 300.0);
}

#[test]
fn criterion_4_taylor_cascade() {
    let start = Instant::now();
    let checks = taylor_identities(SEED).unwrap();
    check_line("4", &checks, start.elapsed(), 10.0);
}

#[test]
fn criterion_5_nonlinear_poisson() {
    let start = Instant::now();
    let checks = poisson_checks(SEED).unwrap();
    check_line("5", &checks, start.elapsed(), 10.0);
}

#[test]
fn criterion_6_lyapunov_bracket() {
    let start = Instant::now();
    let check = lyapunov_bracket(10_000, SEED);
    check_line("6", &[check], start.elapsed(), 1.0);
}

fn elliptic() -> EllipticSolveOptions {
    EllipticSolveOptions {
        newton_tol: 1e-11,
        max_newton: 30,
        krylov_tol: 1e-12,
        max_krylov: 200,
        stencil: LaplacianStencil::Centered,
    }
}

fn euler_solver(cells: usize) -> EulerSolver {
    let grid = SpatialGrid::new(1, cells, 2.0 * PI).unwrap();
    EulerSolver::new(
        &grid,
        &EulerOptions {
            reconstruction: Reconstruction::VanLeer,
            cfl: 0.5,
            elliptic: elliptic(),
        },
    )
    .unwrap()
}

/// `ω` from the zero crossings of the first cosine coefficient of `ρ - 1`.
fn acoustic_frequency(solver: &EulerSolver) -> f64 {
    let mut s = solver.init_irrotational(1e-4, &[[1, 0, 0]], 1.0, 0.0).unwrap();
    let xs = solver.grid().positions();
    let coef = |s: &FluidState| s.rho.iter().zip(&xs).map(|(r, x)| (r - 1.0) * x[0].cos()).sum::<f64>();
    let dt = 0.5 * solver.cfl_limit(&s);
    let (mut t, mut prev) = (0.0, coef(&s));
    let mut crossings = Vec::new();
    while t < 12.0 {
        s = solver.step(&s, dt).unwrap();
        let c = coef(&s);
        if prev * c < 0.0 {
            crossings.push(t + dt * prev / (prev - c));
        }
        t += dt;
        prev = c;
    }
    let spans = crossings.len() - 1;
    PI * spans as f64 / (crossings[spans] - crossings[0])
}

#[test]
fn criterion_7_euler_poisson() {
    let start = Instant::now();
    let solver = euler_solver(64);

    let rest = solver.init_irrotational(0.0, &[[1, 0, 0]], 1.0, 1.0).unwrap();
    let mut s = rest.clone();
    for _ in 0..10 {
        s = solver.step(&s, 0.5 * solver.cfl_limit(&s)).unwrap();
    }
    let fixed = s == rest;

    let grid = solver.grid();
    let mut s = solver.init_irrotational(0.08, &[[1, 0, 0], [3, 0, 0]], 1.0, 1.0).unwrap();
    let mut mass_defect = 0.0f64;
    for _ in 0..50 {
        let before = grid.integrate(&s.rho);
        s = solver.step(&s, 0.5 * solver.cfl_limit(&s)).unwrap();
        mass_defect = mass_defect.max((grid.integrate(&s.rho) - before).abs() / before);
    }

    let xi = 1.0f64;
    let expected = 5.0 / 3.0 * xi * xi + xi * xi / (1.0 + xi * xi);
    let omega = acoustic_frequency(&solver);
    let dispersion = (omega * omega / expected - 1.0).abs();

    let passed = fixed && mass_defect <= 1e-13 && dispersion <= 0.03;
    verdict(
        "7",
        passed,
        &format!("equilibrium fixed {fixed}, mass defect {mass_defect:.1e}/1e-13, ω² error {dispersion:.2e}/0.03"),
        start.elapsed(),
        60.0,
    );
    assert!(passed);
}

fn cascade_background(amplitude: f64, t_end: f64) -> ivpb_core::euler::Trajectory {
    let solver = euler_solver(32);
    let init = solver.init_irrotational(amplitude, &[[1, 0, 0], [2, 0, 0]], 1.0, 0.5).unwrap();
    solver.run(&init, t_end, 1).unwrap()
}

fn cascade_options(t_end: f64) -> CascadeOptions {
    CascadeOptions {
        order: 2,
        dt: 0.05,
        t_end,
        leakage_limit: 1e-3,
        elliptic: elliptic(),
    }
}

#[test]
fn criterion_8_cascade_consistency() {
    let start = Instant::now();
    let collision = CollisionOperator::new(&VelocityGrid::new(12, 6.0).unwrap(), &CollisionConfig::bgk(1.0)).unwrap();

    let set = ExpansionSet::build(cascade_background(0.05, 0.5), &collision, cascade_options(0.5)).unwrap();
    let leakage = set.report().max_leakage.iter().fold(0.0f64, |m, x| m.max(*x));

    let uniform = ExpansionSet::build(cascade_background(0.0, 0.2), &collision, cascade_options(0.2)).unwrap();
    let mut zero_source_size = 0.0f64;
    for n in 1..=3 {
        for t in [0.1, 0.2] {
            let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            zero_source_size = zero_source_size
                .max(sup(&uniform.phase(n, t).unwrap()))
                .max(sup(&uniform.potential(n, t).unwrap()));
        }
    }

    let spectral = Spectral::new(&SpatialGrid::new(2, 8, 1.0).unwrap());
    let pos = spectral.grid().positions();
    let rho: Vec<f64> = pos.iter().map(|x| 1.0 + 0.1 * (6.0 * x[0]).sin()).collect();
    let u: Vec<[f64; 3]> = pos.iter().map(|x| [0.2 * (6.3 * x[1]).cos(), -0.1, 0.05]).collect();
    let theta: Vec<f64> = rho.iter().map(|r| r.powf(2.0 / 3.0)).collect();
    let bg = BackgroundSlice::from_fields(&spectral, rho, u, theta, vec![0.0; pos.len()]);
    let symmetric = (0..pos.len()).all(|c| {
        assemble_matrices(&bg, c)
            .a
            .iter()
            .all(|a| (0..5).all(|r| (0..5).all(|s| a[r][s] == a[s][r])))
    });

    let passed = leakage <= 1e-3 && zero_source_size <= 1e-12 && symmetric;
    verdict(
        "8",
        passed,
        &format!("leakage {leakage:.2e}/1e-3, zero-source orders {zero_source_size:.1e}, flux matrices symmetric {symmetric}"),
        start.elapsed(),
        120.0,
    );
    assert!(passed);
}

const SWEEP_CONFIG: &str = r#"
seed = 20240601

[grid]
dim = 1
cells = 64
velocity_nodes = 16
# A box of ±8√θ_M leaves the weighted remainder maximum on the edge.
v_max_factor = 10.0

[collision]
mode = "bgk"

[cascade]
order = 1
dt = 0.01

[kinetic]
epsilons = [0.2, 0.1, 0.05, 0.025]
dt = 0.0025
t_end = 0.5
store_every = 4
"#;

fn sweep() -> &'static (SweepReport, Duration) {
    static SWEEP: OnceLock<(SweepReport, Duration)> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let start = Instant::now();
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config(SWEEP_CONFIG).unwrap();
        run_command(Command::Sweep, &cfg, dir.path()).unwrap();
        let report = serde_json::from_slice(&std::fs::read(dir.path().join("sweep.json")).unwrap()).unwrap();
        (report, start.elapsed())
    })
}

#[test]
fn criterion_9_epsilon_convergence() {
    let (report, elapsed) = sweep();
    let fit = &report.deviation_fit;
    let passed = (0.8..=1.3).contains(&fit.slope) && fit.r_squared >= 0.98;
    let rows = report
        .rows
        .iter()
        .map(|r| format!("ε={} {:.3e}", r.epsilon, r.sup_deviation))
        .collect::<Vec<_>>()
        .join(", ");
    verdict(
        "9",
        passed,
        &format!(
            "slope {:.3} in [0.8, 1.3], r² {:.4} ≥ 0.98, CI [{:.3}, {:.3}]; {rows}",
            fit.slope, fit.r_squared, fit.slope_ci[0], fit.slope_ci[1]
        ),
        *elapsed,
        1800.0,
    );
    assert!(passed);
}

#[test]
fn criterion_10_remainder_boundedness() {
    let (report, elapsed) = sweep();
    let finite = report.rows.iter().all(|r| r.norms.is_finite());
    let passed = report.f_ratio <= 5.0 && finite && !report.boundary_flags;
    verdict(
        "10",
        passed,
        &format!(
            "sup‖f‖ ratio {:.3}/5, norms finite {finite}, boundary argmax flags {}",
            report.f_ratio, report.boundary_flags
        ),
        *elapsed,
        1800.0,
    );
    assert!(passed);
}

/// Hard-sphere repeat of criterion 9: two ε values at 12³ nodes, checked
/// only for a decrease by at least 1.7 per halving.
#[test]
#[ignore = "slow: hard-sphere kinetic runs"]
fn criterion_9_hard_sphere_repeat() {
    let start = Instant::now();
    let mut cfg: RunConfig = parse_config(SWEEP_CONFIG).unwrap();
    cfg.grid.velocity_nodes = 12;
    cfg.grid.v_max_factor = 7.0;
    cfg.collision.mode = ivpb_core::collision::CollisionMode::HardSphere;
    let fluid = initial_fluid(&cfg).unwrap();
    let velocity = velocity_setup(&cfg, &fluid).unwrap();
    let traj = fluid_reference(&cfg).unwrap();
    let initial = traj.states[0].clone();
    // Only the leading term μ is needed, so no order is solved.
    let expansion = ExpansionSet::new(traj, &velocity.collision, cfg.cascade_options()).unwrap();
    let spatial = cfg.spatial_grid().unwrap();
    let solver = KineticSolver::new(&spatial, &velocity.collision, &cfg.kinetic_options()).unwrap();
    let mut deviations = Vec::new();
    for eps in [0.1, 0.05] {
        let state = solver.well_prepared(&initial, eps, 0.0).unwrap();
        let mut sup = 0.0f64;
        solver
            .run_with(&state, cfg.kinetic.t_end, cfg.kinetic.store_every, |s| {
                let mu = expansion.phase(0, s.time)?;
                let diff: Vec<f64> = s.f.iter().zip(&mu).map(|(a, b)| a - b).collect();
                sup = sup.max(phase_l2(&diff, &spatial, &velocity.grid));
                Ok(())
            })
            .unwrap();
        deviations.push(sup);
    }
    let ratio = deviations[0] / deviations[1];
    let passed = ratio >= 1.7;
    verdict(
        "9 (hard sphere)",
        passed,
        &format!("ε=0.1 {:.3e}, ε=0.05 {:.3e}, ratio {ratio:.2} ≥ 1.7", deviations[0], deviations[1]),
        start.elapsed(),
        7200.0,
    );
    assert!(passed);
}
