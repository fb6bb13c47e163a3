use super::*;
use crate::cascade::CascadeOptions;
use crate::collision::CollisionConfig;
use crate::euler::{EulerOptions, EulerSolver, Reconstruction};
use crate::maxwellian::{eval_local_maxwellian, select_theta_m, LocalMaxwellianParams};
use crate::poisson::EllipticSolveOptions;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn elliptic() -> EllipticSolveOptions {
    EllipticSolveOptions {
        newton_tol: 1e-11,
        max_newton: 30,
        krylov_tol: 1e-12,
        max_krylov: 200,
        stencil: LaplacianStencil::Centered,
    }
}

fn bgk(nodes: usize) -> CollisionOperator {
    CollisionOperator::new(&VelocityGrid::new(nodes, 6.0).unwrap(), &CollisionConfig::bgk(1.0)).unwrap()
}

fn expansion(t_end: f64) -> (ExpansionSet, GlobalMaxwellian) {
    let grid = SpatialGrid::new(1, 16, 2.0 * PI).unwrap();
    let euler = EulerSolver::new(
        &grid,
        &EulerOptions {
            reconstruction: Reconstruction::VanLeer,
            cfl: 0.5,
            elliptic: elliptic(),
        },
    )
    .unwrap();
    let init = euler.init_irrotational(0.05, &[[1, 0, 0]], 1.0, 0.5).unwrap();
    let global = select_theta_m(&init.theta).unwrap();
    let background = euler.run(&init, t_end, 1).unwrap();
    let opts = CascadeOptions {
        order: 1,
        dt: 0.05,
        t_end,
        leakage_limit: 1e-3,
        elliptic: elliptic(),
    };
    (ExpansionSet::build(background, &bgk(12), opts).unwrap(), global)
}

fn split(set: &ExpansionSet, global: &GlobalMaxwellian, f: &[f64], phi: &[f64], eps: f64, t: f64) -> RemainderFields {
    let trunc = set.assemble(eps, t).unwrap();
    let mu = set.phase(0, t).unwrap();
    RemainderFields::from_parts(f, phi, &trunc, &mu, global, &WeightConfig::new(3.5).unwrap(), set.velocity_grid(), eps, 1)
        .unwrap()
}

fn random_field(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

#[test]
fn exact_truncation_has_no_remainder() {
    let (set, global) = expansion(0.1);
    let trunc = set.assemble(0.1, 0.05).unwrap();
    let rem = split(&set, &global, &trunc.f, &trunc.phi, 0.1, 0.05);
    assert!(rem.r.iter().chain(&rem.phi_r).all(|x| *x == 0.0));
    let norms = norm_package(&rem, set.spatial_grid(), set.velocity_grid(), &global, 3.5, LaplacianStencil::Centered).unwrap();
    assert!(norms.entries().iter().all(|(_, x)| *x == 0.0), "{norms:?}");
}

#[test]
fn doubling_the_discrepancy_doubles_the_norm() {
    let (set, global) = expansion(0.1);
    let trunc = set.assemble(0.2, 0.1).unwrap();
    let noise = random_field(trunc.f.len(), 1);
    let bump = |s: f64| -> Vec<f64> { trunc.f.iter().zip(&noise).map(|(t, n)| t + s * 1e-3 * n * t).collect() };
    let norm = |s: f64| {
        let rem = split(&set, &global, &bump(s), &trunc.phi, 0.2, 0.1);
        phase_l2(&rem.f, set.spatial_grid(), set.velocity_grid())
    };
    let ratio = norm(2.0) / norm(1.0);
    assert!((ratio - 2.0).abs() < 1e-10, "{ratio}");
}

#[test]
fn representations_agree_pointwise() {
    let (set, global) = expansion(0.1);
    let trunc = set.assemble(0.1, 0.0).unwrap();
    let mu = set.phase(0, 0.0).unwrap();
    let noise = random_field(trunc.f.len(), 2);
    let f: Vec<f64> = trunc.f.iter().zip(&noise).map(|(t, n)| t + 0.01 * n * t).collect();
    let rem = split(&set, &global, &f, &trunc.phi, 0.1, 0.0);
    let vg = set.velocity_grid();
    let nv = vg.num_nodes();
    let mu_m = global.eval(vg);
    let weight = WeightConfig::new(3.5).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..f.len() {
        let v = vg.nodes()[i % nv];
        let expected = weight.weight(v) * (mu[i] / mu_m[i % nv]).sqrt() * rem.f[i];
        worst = worst.max((rem.h[i] - expected).abs() / expected.abs().max(1.0));
    }
    assert!(worst < 1e-12, "{worst}");
    let back = rem.reassemble(&trunc);
    assert!(back.iter().zip(&f).all(|(a, b)| (a - b).abs() <= 1e-15 * b.abs().max(1e-300) + 1e-300));
}

#[test]
fn unit_h_has_unit_sup_and_no_x_gradient() {
    let spatial = SpatialGrid::new(1, 8, 1.0).unwrap();
    let vg = VelocityGrid::new(12, 6.0).unwrap();
    let global = GlobalMaxwellian { theta_m: 0.8 };
    let weight = WeightConfig::new(3.5).unwrap();
    let cell: Vec<f64> = vg.nodes().iter().zip(global.eval_sqrt(&vg)).map(|(v, s)| s / weight.weight(*v)).collect();
    let r: Vec<f64> = (0..8).flat_map(|_| cell.iter().copied()).collect();
    let trunc = Truncation {
        f: vec![0.0; r.len()],
        phi: vec![0.0; 8],
    };
    let mu = vec![1.0; r.len()];
    let rem = RemainderFields::from_parts(&r, &[0.0; 8], &trunc, &mu, &global, &weight, &vg, 0.5, 1).unwrap();
    // ε^{-k} = 2 scales R, so h ≡ 2.
    let norms = norm_package(&rem, &spatial, &vg, &global, 3.5, LaplacianStencil::Centered).unwrap();
    assert!((norms.h_sup - 2.0).abs() < 1e-12, "{}", norms.h_sup);
    assert_eq!(norms.h_x_gradient_sup, 0.0);
}

#[test]
fn larger_beta_weighs_tails_more() {
    let spatial = SpatialGrid::new(1, 4, 1.0).unwrap();
    let vg = VelocityGrid::new(12, 6.0).unwrap();
    let global = GlobalMaxwellian { theta_m: 1.0 };
    let shifted = eval_local_maxwellian(&LocalMaxwellianParams::new(1.0, [0.7, 0.0, 0.0], 0.9).unwrap(), &vg);
    let r: Vec<f64> = (0..4).flat_map(|_| shifted.iter().copied()).collect();
    let trunc = Truncation {
        f: vec![0.0; r.len()],
        phi: vec![0.0; 4],
    };
    let weight = WeightConfig::new(3.5).unwrap();
    let rem = RemainderFields::from_parts(&r, &[0.0; 4], &trunc, &shifted.repeat(4), &global, &weight, &vg, 0.3, 1).unwrap();
    let at = |beta: f64| norm_package(&rem, &spatial, &vg, &global, beta, LaplacianStencil::Centered).unwrap().weighted_sup;
    assert!(at(4.0) > at(3.5));
    assert!(at(4.5) > at(4.0));
    assert!(norm_package(&rem, &spatial, &vg, &global, 3.0, LaplacianStencil::Centered).is_err());
}

#[test]
fn hessian_of_a_sine() {
    let grid = SpatialGrid::new(2, 32, 2.0 * PI).unwrap();
    let f: Vec<f64> = grid.positions().iter().map(|x| (2.0 * x[0]).sin() * x[1].cos()).collect();
    let h = hessian(&f, &grid, LaplacianStencil::Spectral);
    assert_eq!(h.len(), 4);
    for (c, x) in grid.positions().iter().enumerate() {
        assert!((h[0][c] + 4.0 * f[c]).abs() < 1e-10);
        assert!((h[1][c] + 2.0 * (2.0 * x[0]).cos() * x[1].sin()).abs() < 1e-10);
        assert!((h[1][c] - h[2][c]).abs() < 1e-10);
    }
    let centered = hessian(&f, &grid, LaplacianStencil::Centered);
    let dx = grid.spacing();
    let symbol = |k: f64| (2.0 - 2.0 * (k * dx).cos()) / (dx * dx);
    for c in 0..f.len() {
        assert!((centered[0][c] + symbol(2.0) * f[c]).abs() < 1e-10);
        assert!((centered[3][c] + symbol(1.0) * f[c]).abs() < 1e-10);
    }
}

#[test]
fn power_laws_are_fitted_exactly() {
    let eps = [0.2, 0.1, 0.05, 0.025];
    let sq: Vec<_> = eps.iter().map(|e| (*e, e * e)).collect();
    let fit = fit_order(&sq).unwrap();
    assert!((fit.slope - 2.0).abs() < 1e-12);
    assert!((fit.r_squared - 1.0).abs() < 1e-12);
    let lin: Vec<_> = eps.iter().map(|e| (*e, 3.0 * e)).collect();
    let fit = fit_order(&lin).unwrap();
    assert!((fit.slope - 1.0).abs() < 1e-12);
    assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);
    assert!(fit.slope_ci[0] <= fit.slope && fit.slope <= fit.slope_ci[1]);
    let noisy: Vec<_> = eps
        .iter()
        .enumerate()
        .map(|(i, e)| (*e, e * (1.0 + 0.05 * if i % 2 == 0 { 1.0 } else { -1.0 })))
        .collect();
    let fit = fit_order(&noisy).unwrap();
    assert!((0.9..=1.1).contains(&fit.slope), "{}", fit.slope);
    assert!(fit.slope_ci[1] - fit.slope_ci[0] > 0.0);
    assert!(fit_order(&sq[..2]).is_err());
    assert!(fit_order(&[(0.1, 1.0), (0.2, 0.0), (0.4, 1.0)]).is_err());
}

#[test]
fn floor_is_the_linear_intercept() {
    let pts: Vec<_> = [0.4, 0.2, 0.1].iter().map(|e| (*e, 0.01 + 2.0 * e)).collect();
    assert!((discretization_floor(&pts) - 0.01).abs() < 1e-14);
}

#[test]
fn epsilon_lists_are_checked() {
    let msg = validate_epsilons(&[0.1]).unwrap_err().to_string();
    assert!(msg.contains("need ≥ 3 epsilons"), "{msg}");
    assert!(validate_epsilons(&[0.2, 0.1, 0.1]).unwrap_err().to_string().contains("duplicate"));
    assert!(validate_epsilons(&[0.3, 0.1, 0.05]).is_err());
    assert_eq!(validate_epsilons(&[0.05, 0.2, 0.1]).unwrap(), vec![0.2, 0.1, 0.05]);
}

fn small_sweep() -> SweepReport {
    let (set, global) = expansion(0.1);
    let inputs = SweepInputs {
        epsilons: vec![0.1, 0.4, 0.2],
        t_end: 0.1,
        store_every: 5,
        beta: 3.5,
        kinetic: KineticOptions {
            dt: 0.005,
            clip_budget: 1e-3,
            elliptic: elliptic(),
        },
    };
    epsilon_sweep(&set, &bgk(12), &global, &inputs).unwrap()
}

#[test]
fn sweep_rows_are_ordered_and_reproducible() {
    let a = small_sweep();
    assert_eq!(a.rows.iter().map(|r| r.epsilon).collect::<Vec<_>>(), vec![0.4, 0.2, 0.1]);
    assert_eq!(a.stored_times.len(), 5);
    for row in &a.rows {
        assert!(row.norms.is_finite());
        assert!(row.sup_deviation > 0.0);
        assert!(row.mass_drift < 1e-12, "{}", row.mass_drift);
        assert_eq!(row.steps, 20);
        assert_eq!(row.clipped_fraction, 0.0);
    }
    // Deviation shrinks with ε.
    assert!(a.rows[0].sup_deviation > a.rows[2].sup_deviation);
    let b = small_sweep();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn sweep_rejects_misaligned_snapshots() {
    let (set, global) = expansion(0.1);
    let inputs = SweepInputs {
        epsilons: vec![0.4, 0.2, 0.1],
        t_end: 0.1,
        store_every: 3,
        beta: 3.5,
        kinetic: KineticOptions {
            dt: 0.005,
            clip_budget: 1e-3,
            elliptic: elliptic(),
        },
    };
    assert!(matches!(epsilon_sweep(&set, &bgk(12), &global, &inputs), Err(Error::Config { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn phase_norm_is_a_norm(seed in 0u64..1000, scale in -3.0f64..3.0) {
        let spatial = SpatialGrid::new(1, 4, 1.0).unwrap();
        let vg = VelocityGrid::new(4, 2.0).unwrap();
        let a = random_field(4 * 64, seed);
        let b = random_field(4 * 64, seed + 7919);
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let (na, nb) = (phase_l2(&a, &spatial, &vg), phase_l2(&b, &spatial, &vg));
        prop_assert!(na >= 0.0);
        prop_assert!(phase_l2(&sum, &spatial, &vg) <= na + nb + 1e-12);
        let scaled: Vec<f64> = a.iter().map(|x| scale * x).collect();
        prop_assert!((phase_l2(&scaled, &spatial, &vg) - scale.abs() * na).abs() < 1e-12 * (1.0 + na));
    }
}
