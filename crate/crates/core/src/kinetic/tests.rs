use super::*;
use crate::collision::CollisionConfig;
use crate::poisson::LaplacianStencil;
use std::f64::consts::PI;

fn elliptic() -> EllipticSolveOptions {
    EllipticSolveOptions {
        newton_tol: 1e-12,
        max_newton: 30,
        krylov_tol: 1e-13,
        max_krylov: 200,
        stencil: LaplacianStencil::Centered,
    }
}

fn solver(cells: usize, nodes: usize, dt: f64) -> KineticSolver {
    let spatial = SpatialGrid::new(1, cells, 2.0 * PI).unwrap();
    let vg = VelocityGrid::new(nodes, 6.0).unwrap();
    let op = CollisionOperator::new(&vg, &CollisionConfig::bgk(1.0)).unwrap();
    KineticSolver::new(
        &spatial,
        &op,
        &KineticOptions {
            dt,
            clip_budget: 1e-3,
            elliptic: elliptic(),
        },
    )
    .unwrap()
}

/// A smooth positive non-equilibrium field.
fn smooth_field(s: &KineticSolver, amplitude: f64) -> Vec<f64> {
    let mut f = Vec::new();
    for x in s.spatial_grid().positions() {
        let rho = 1.0 + amplitude * x[0].cos();
        let u = [amplitude * (2.0 * x[0]).sin(), 0.0, 0.0];
        let p = LocalMaxwellianParams::new(rho, u, 1.0 + 0.5 * amplitude * x[0].sin()).unwrap();
        for v in s.velocity_grid().nodes() {
            f.push(p.value(*v) * (1.0 + 0.5 * amplitude * v[0].sin() * (0.5 * v[1]).cos() * x[0].cos()));
        }
    }
    f
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn global_equilibrium_is_a_fixed_point() {
    let s = solver(8, 12, 0.05);
    let mut mu = eval_local_maxwellian(&LocalMaxwellianParams::centered(1.0), s.velocity_grid());
    let mass = s.velocity_grid().integrate(&mu).unwrap();
    mu.iter_mut().for_each(|x| *x /= mass);
    let f: Vec<f64> = (0..8).flat_map(|_| mu.iter().copied()).collect();
    for eps in [1.0, 0.01] {
        let state = s.state_from(f.clone(), eps, 0.0).unwrap();
        assert!(state.phi.iter().all(|p| p.abs() < 1e-8));
        let (next, _) = s.step(&state).unwrap();
        assert!(max_abs_diff(&next.f, &f) < 1e-8 * 0.07, "{}", max_abs_diff(&next.f, &f));
    }
}

#[test]
fn mass_is_conserved_per_step() {
    let s = solver(16, 12, 0.05);
    let state = s.state_from(smooth_field(&s, 0.1), 0.1, 0.0).unwrap();
    let m0 = s.totals(&state.f).0;
    let mut cur = state;
    for _ in 0..5 {
        let (next, ledger) = s.step(&cur).unwrap();
        assert!((ledger.mass - m0).abs() < 1e-12 * m0, "{} vs {m0}", ledger.mass);
        cur = next;
    }
}

#[test]
fn momentum_and_energy_change_only_through_the_field() {
    let s = solver(16, 12, 0.05);
    let state = s.state_from(smooth_field(&s, 0.1), 0.5, 0.0).unwrap();
    let (_, mut mom, mut energy) = s.totals(&state.f);
    let mut cur = state;
    for _ in 0..5 {
        let (next, l) = s.step(&cur).unwrap();
        assert!(l.energy_work.abs() > 1e-6);
        assert!((l.momentum[0] - mom[0] - l.momentum_work[0]).abs() < 1e-8 * l.mass);
        assert!((l.kinetic_energy - energy - l.energy_work).abs() < 1e-8 * energy);
        mom = l.momentum;
        energy = l.kinetic_energy;
        cur = next;
    }
}

#[test]
fn bgk_entropy_decreases_for_bimodal_data() {
    let s = solver(4, 16, 0.05);
    let a = LocalMaxwellianParams::new(0.5, [1.5, 0.0, 0.0], 0.6).unwrap();
    let b = LocalMaxwellianParams::new(0.5, [-1.5, 0.0, 0.0], 0.6).unwrap();
    let cell: Vec<f64> = s.velocity_grid().nodes().iter().map(|v| a.value(*v) + b.value(*v)).collect();
    let f: Vec<f64> = (0..4).flat_map(|_| cell.iter().copied()).collect();
    let mut state = s.state_from(f, 1.0, 0.0).unwrap();
    let mut h = s.entropy(&state.f);
    for _ in 0..50 {
        state = s.step(&state).unwrap().0;
        let next = s.entropy(&state.f);
        assert!(next < h, "{next} >= {h}");
        h = next;
    }
}

#[test]
fn zero_length_run_keeps_the_initial_snapshot() {
    let s = solver(8, 8, 0.05);
    let state = s.state_from(smooth_field(&s, 0.05), 0.1, 0.0).unwrap();
    let traj = s.run(&state, 0.0, 1).unwrap();
    assert_eq!(traj.states.len(), 1);
    assert!(traj.ledger.is_empty());
    assert_eq!(traj.states[0], state);
}

#[test]
fn restarting_halfway_is_bitwise_identical() {
    let s = solver(8, 8, 0.05);
    let state = s.state_from(smooth_field(&s, 0.05), 0.1, 0.0).unwrap();
    let full = s.run(&state, 0.4, 100).unwrap();
    let half = s.run(&state, 0.2, 100).unwrap();
    let resumed = s.run(half.states.last().unwrap(), 0.4, 100).unwrap();
    assert_eq!(full.states.last().unwrap().f, resumed.states.last().unwrap().f);
    assert_eq!(full.states.last().unwrap().phi, resumed.states.last().unwrap().phi);
}

#[test]
fn splitting_is_second_order() {
    let end = |dt: f64| {
        // 12 velocity nodes leave a cubic-interpolation floor that hides the order.
        let s = solver(16, 16, dt);
        let state = s.state_from(smooth_field(&s, 0.1), 0.5, 0.0).unwrap();
        s.run(&state, 0.4, 1000).unwrap().states.pop().unwrap().f
    };
    let (a, b, c) = (end(0.04), end(0.02), end(0.01));
    let ratio = max_abs_diff(&a, &b) / max_abs_diff(&b, &c);
    assert!(ratio >= 3.0, "{ratio}");
}

#[test]
fn rejects_steps_beyond_the_transport_limit() {
    let spatial = SpatialGrid::new(1, 64, 2.0 * PI).unwrap();
    let vg = VelocityGrid::new(8, 6.0).unwrap();
    let op = CollisionOperator::new(&vg, &CollisionConfig::bgk(1.0)).unwrap();
    let r = KineticSolver::new(
        &spatial,
        &op,
        &KineticOptions {
            dt: 0.05,
            clip_budget: 1e-3,
            elliptic: elliptic(),
        },
    );
    assert!(matches!(r, Err(Error::Cfl { .. })));
}

#[test]
fn velocity_shift_is_exact_for_maxwellians() {
    let g = VelocityGrid::new(16, 8.0).unwrap();
    let p = LocalMaxwellianParams::new(1.2, [0.3, -0.1, 0.0], 0.9).unwrap();
    let mut f = eval_local_maxwellian(&p, &g);
    // Exact up to the quadrature error in the sampled moments.
    let mut q = p;
    shift_velocity_axis(&mut f, &g, 0, 0.37).unwrap();
    q.u[0] -= 0.37;
    let exact = eval_local_maxwellian(&q, &g);
    let peak = exact.iter().fold(0.0_f64, |m, x| m.max(*x));
    for (i, (a, b)) in f.iter().zip(&exact).enumerate() {
        assert!((a - b).abs() < 1e-6 * peak, "{i} {a} {b}");
    }
}

