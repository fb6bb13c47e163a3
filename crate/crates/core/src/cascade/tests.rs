use super::*;
use crate::collision::CollisionConfig;
use crate::euler::{EulerOptions, EulerSolver, Reconstruction};
use crate::poisson::LaplacianStencil;

fn elliptic() -> EllipticSolveOptions {
    EllipticSolveOptions {
        newton_tol: 1e-11,
        max_newton: 30,
        krylov_tol: 1e-12,
        max_krylov: 200,
        stencil: LaplacianStencil::Centered,
    }
}

fn background(amplitude: f64, t_end: f64) -> Trajectory {
    let grid = SpatialGrid::new(1, 16, 2.0 * std::f64::consts::PI).unwrap();
    let solver = EulerSolver::new(
        &grid,
        &EulerOptions {
            reconstruction: Reconstruction::FirstOrder,
            cfl: 0.5,
            elliptic: elliptic(),
        },
    )
    .unwrap();
    let init = solver.init_irrotational(amplitude, &[[1, 0, 0]], 1.0, 0.5).unwrap();
    solver.run(&init, t_end, 1).unwrap()
}

fn bgk() -> CollisionOperator {
    CollisionOperator::new(&VelocityGrid::new(12, 6.0).unwrap(), &CollisionConfig::bgk(1.0)).unwrap()
}

fn opts(order: usize, dt: f64, t_end: f64) -> CascadeOptions {
    CascadeOptions {
        order,
        dt,
        t_end,
        leakage_limit: 1e-3,
        elliptic: elliptic(),
    }
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[test]
fn uniform_background_has_vanishing_corrections() {
    let set = ExpansionSet::build(background(0.0, 0.1), &bgk(), opts(2, 0.05, 0.1)).unwrap();
    for n in 1..=3 {
        assert!(max_abs(&set.phase(n, 0.05).unwrap()) < 1e-12, "F_{n}");
        assert!(max_abs(&set.potential(n, 0.1).unwrap()) < 1e-12, "φ_{n}");
    }
    let t = set.assemble(0.1, 0.1).unwrap();
    let mu = set.phase(0, 0.1).unwrap();
    assert!(t.f.iter().zip(&mu).all(|(a, b)| (a - b).abs() < 1e-14));
}

#[test]
fn first_micro_part_is_orthogonal_to_invariants() {
    let set = ExpansionSet::new(background(0.05, 0.1), &bgk(), opts(1, 0.05, 0.1)).unwrap();
    let part = set.microscopic_part(1, 0.05).unwrap();
    assert!(part.leakage < 1e-4, "leakage {}", part.leakage);
    let vg = set.velocity_grid().clone();
    let nv = vg.num_nodes();
    let bg = set.background_at(set.node_index(0.05).unwrap()).unwrap();
    let mut largest: f64 = 0.0;
    for c in 0..set.spatial_grid().num_cells() {
        let basis = crate::maxwellian::ChiBasis::build(&bg.params(c).unwrap(), &vg).unwrap();
        let g = &part.g[c * nv..(c + 1) * nv];
        let coeff = basis.coefficients(g);
        largest = largest.max(coeff.iter().fold(0.0_f64, |m, x| m.max(x.abs())) / vg.norm(g).max(1e-300));
    }
    assert!(largest < 1e-8, "{largest}");
    assert!(vg.norm(&part.g[..nv]) > 1e-4);
}

#[test]
fn first_micro_part_is_linear_in_amplitude() {
    let norm = |a: f64| {
        let set = ExpansionSet::new(background(a, 0.1), &bgk(), opts(1, 0.05, 0.1)).unwrap();
        let g = set.microscopic_part(1, 0.0).unwrap().g;
        g.iter().map(|x| x * x).sum::<f64>().sqrt()
    };
    let ratio = norm(0.04) / norm(0.02);
    assert!((ratio - 2.0).abs() < 0.2, "{ratio}");
}

#[test]
fn energy_source_matches_its_definition() {
    let set = ExpansionSet::new(background(0.05, 0.1), &bgk(), opts(1, 0.05, 0.1)).unwrap();
    let src = set.macro_sources(1, 0.05).unwrap();
    let micro = set.microscopic_part(1, 0.05).unwrap();
    let bg = set.background_at(set.node_index(0.05).unwrap()).unwrap();
    let nv = set.velocity_grid().num_nodes();
    let cells = set.spatial_grid().num_cells();
    let spectral = Spectral::new(set.spatial_grid());
    let m: Vec<_> = (0..cells)
        .map(|c| stress_and_heat_flux(&micro.phase[c * nv..(c + 1) * nv], bg.u[c], bg.theta[c], set.velocity_grid()))
        .collect();
    let tau_xx: Vec<f64> = m.iter().map(|(t, _)| t[0][0]).collect();
    let flux: Vec<f64> = m.iter().zip(&bg.u).map(|((t, q), u)| q[0] + 2.0 * (0..3).map(|k| u[k] * t[0][k]).sum::<f64>()).collect();
    let d_tau = spectral.derivative(&tau_xx, 0);
    let d_flux = spectral.derivative(&flux, 0);
    for c in 0..cells {
        assert!((src.momentum[c][0] + d_tau[c]).abs() < 1e-12, "{} {}", src.momentum[c][0], d_tau[c]);
        let f_dot_u = src.momentum[c][0] * bg.u[c][0];
        let expected = -d_flux[c] - 2.0 * f_dot_u;
        assert!((src.energy[c] - expected).abs() < 1e-12, "{c}: {} vs {expected}", src.energy[c]);
    }
}

#[test]
fn corrections_stay_bounded() {
    let set = ExpansionSet::build(background(0.05, 0.5), &bgk(), opts(2, 0.05, 0.5)).unwrap();
    let report = set.report();
    assert_eq!(report.growth.len(), 3);
    for (n, g) in report.growth.iter().enumerate() {
        assert_eq!(g.len(), 11);
        assert_eq!(g[0], 0.0);
        let peak = g.iter().fold(0.0, |m: f64, x| m.max(*x));
        assert!(peak.is_finite() && peak < 10.0, "order {}: {g:?}", n + 1);
    }
    assert!(report.max_leakage.iter().all(|l| *l < 1e-3), "{:?}", report.max_leakage);
    assert!(report.growth[0].last().unwrap() > &1e-6);
}

#[test]
fn truncation_is_a_power_series() {
    let terms: Vec<Vec<f64>> = (0..4).map(|n| vec![n as f64 + 1.0, -(n as f64)]).collect();
    let eps = 0.3;
    let base = power_sum(eps, &terms);
    assert!((base[0] - (1.0 + 2.0 * eps + 3.0 * eps * eps + 4.0 * eps.powi(3))).abs() < 1e-14);
    let mut bumped = terms.clone();
    bumped[2][1] += 0.5;
    let changed = power_sum(eps, &bumped);
    assert!((changed[1] - base[1] - 0.5 * eps * eps).abs() < 1e-14);
    assert_eq!(changed[0], base[0]);
}

#[test]
fn flux_matrices_are_symmetric() {
    let spectral = Spectral::new(&SpatialGrid::new(2, 8, 1.0).unwrap());
    let pos = spectral.grid().positions();
    let rho: Vec<f64> = pos.iter().map(|x| 1.0 + 0.1 * (6.0 * x[0]).sin()).collect();
    let u: Vec<[f64; 3]> = pos.iter().map(|x| [0.2 * (6.3 * x[1]).cos(), -0.1, 0.05]).collect();
    let theta: Vec<f64> = rho.iter().map(|r| r.powf(2.0 / 3.0)).collect();
    let phi = vec![0.0; rho.len()];
    let bg = BackgroundSlice::from_fields(&spectral, rho, u, theta, phi);
    for c in [0, 5, 17] {
        let m = assemble_matrices(&bg, c);
        assert!(m.a0.iter().all(|x| *x > 0.0));
        for a in &m.a {
            for r in 0..5 {
                for s in 0..5 {
                    assert_eq!(a[r][s], a[s][r]);
                }
            }
        }
    }
}

#[test]
fn rejects_bad_time_grids() {
    let bad = opts(1, 0.03, 0.1);
    assert!(matches!(bad.validate(), Err(Error::Config { .. })));
    assert!(matches!(
        ExpansionSet::new(background(0.05, 0.1), &bgk(), opts(1, 2.0, 2.0)),
        Err(Error::InvalidInput(_))
    ));
    assert!(matches!(
        ExpansionSet::new(background(0.05, 1.0), &bgk(), opts(1, 1.0, 1.0)),
        Err(Error::Cfl { .. })
    ));
    let set = ExpansionSet::new(background(0.05, 0.1), &bgk(), opts(1, 0.05, 0.1)).unwrap();
    assert_eq!(set.node_index(0.075).unwrap(), 3);
    assert!(set.node_index(0.07).is_err());
    assert!(set.microscopic_part(2, 0.0).is_err());
}
