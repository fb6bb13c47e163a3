//! The Boltzmann-electron Poisson equation `Δφ = e^φ - ρ`, screened linear
//! solves `(c - Δ) u = r` and the Lyapunov density `ψ e^ψ - e^ψ + 1`.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::grid::SpatialGrid;
use crate::linalg::{pcg, KrylovReport};
use crate::spectral::Spectral;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaplacianStencil {
    /// Second-order centred differences.
    Centered,
    /// Fourier collocation.
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticSolveOptions {
    /// Stop when the residual sup-norm drops below this.
    pub newton_tol: f64,
    pub max_newton: usize,
    /// Relative residual target of each linear solve.
    pub krylov_tol: f64,
    pub max_krylov: usize,
    pub stencil: LaplacianStencil,
}

impl EllipticSolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.newton_tol > 0.0 && self.krylov_tol > 0.0) {
            return Err(Error::InvalidInput("solver tolerances must be positive".into()));
        }
        if self.max_newton == 0 || self.max_krylov == 0 {
            return Err(Error::InvalidInput("iteration limits must be positive".into()));
        }
        Ok(())
    }
}

/// Discrete Laplacian on the torus with the chosen stencil.
pub fn laplacian(field: &[f64], grid: &SpatialGrid, stencil: LaplacianStencil) -> Vec<f64> {
    match stencil {
        LaplacianStencil::Spectral => Spectral::new(grid).laplacian(field),
        LaplacianStencil::Centered => centered_laplacian(field, grid),
    }
}

/// Discrete gradient matching the Laplacian stencil: centred differences or
/// spectral derivatives. Inactive axes are zero.
pub fn gradient(field: &[f64], grid: &SpatialGrid, stencil: LaplacianStencil) -> [Vec<f64>; 3] {
    match stencil {
        LaplacianStencil::Spectral => Spectral::new(grid).gradient(field),
        LaplacianStencil::Centered => centered_gradient(field, grid),
    }
}

fn centered_gradient(field: &[f64], grid: &SpatialGrid) -> [Vec<f64>; 3] {
    let inv = 0.5 / grid.spacing();
    std::array::from_fn(|a| {
        if a >= grid.dim() {
            return vec![0.0; field.len()];
        }
        (0..field.len())
            .map(|c| (field[grid.shifted(c, a, 1)] - field[grid.shifted(c, a, -1)]) * inv)
            .collect()
    })
}

fn centered_laplacian(field: &[f64], grid: &SpatialGrid) -> Vec<f64> {
    let h2 = grid.spacing() * grid.spacing();
    (0..field.len())
        .map(|c| {
            (0..grid.dim())
                .map(|a| {
                    field[grid.shifted(c, a, 1)] - 2.0 * field[c] + field[grid.shifted(c, a, -1)]
                })
                .sum::<f64>()
                / h2
        })
        .collect()
}

/// Reusable solver bound to one grid; keeps the FFT plans.
#[derive(Debug, Clone)]
pub struct EllipticSolver {
    grid: SpatialGrid,
    spectral: Spectral,
    opts: EllipticSolveOptions,
}

/// Newton iteration record.
#[derive(Debug, Clone, Default)]
pub struct NewtonReport {
    /// Residual sup-norm before each step and after the last.
    pub residuals: Vec<f64>,
    /// Iterates, when requested.
    pub iterates: Vec<Vec<f64>>,
    pub damped: bool,
    pub krylov_iterations: usize,
}

impl EllipticSolver {
    pub fn new(grid: &SpatialGrid, opts: &EllipticSolveOptions) -> Result<Self> {
        opts.validate()?;
        Ok(Self {
            grid: grid.clone(),
            spectral: Spectral::new(grid),
            opts: *opts,
        })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn options(&self) -> &EllipticSolveOptions {
        &self.opts
    }

    pub fn laplacian(&self, field: &[f64]) -> Vec<f64> {
        match self.opts.stencil {
            LaplacianStencil::Spectral => self.spectral.laplacian(field),
            LaplacianStencil::Centered => centered_laplacian(field, &self.grid),
        }
    }

    pub fn gradient(&self, field: &[f64]) -> [Vec<f64>; 3] {
        match self.opts.stencil {
            LaplacianStencil::Spectral => self.spectral.gradient(field),
            LaplacianStencil::Centered => centered_gradient(field, &self.grid),
        }
    }

    fn symbol(&self, j: [usize; 3]) -> f64 {
        match self.opts.stencil {
            LaplacianStencil::Spectral => self.spectral.spectral_laplacian_symbol(j),
            LaplacianStencil::Centered => self.spectral.centered_laplacian_symbol(j),
        }
    }

    /// `Δφ - e^φ + ρ`.
    pub fn residual(&self, phi: &[f64], rho: &[f64]) -> Vec<f64> {
        let lap = self.laplacian(phi);
        lap.iter()
            .zip(phi)
            .zip(rho)
            .map(|((l, p), r)| l - p.exp() + r)
            .collect()
    }

    /// Solves `(c - Δ) u = rhs`.
    pub fn solve_screened(&self, c: &[f64], rhs: &[f64]) -> Result<(Vec<f64>, KrylovReport)> {
        let n = self.grid.num_cells();
        check_len(n, c.len())?;
        check_len(n, rhs.len())?;
        if let Some(bad) = c.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
            return Err(Error::InvalidInput(format!(
                "screening coefficient must be positive, found {bad}"
            )));
        }
        let c_bar = c.iter().sum::<f64>() / n as f64;
        let apply = |u: &[f64]| {
            let lap = self.laplacian(u);
            (0..n).map(|i| c[i] * u[i] - lap[i]).collect::<Vec<_>>()
        };
        let precondition = |r: &[f64]| {
            self.spectral
                .apply_multiplier(r, |j| Complex64::new(1.0 / (c_bar - self.symbol(j)), 0.0))
        };
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let mut u = vec![0.0; n];
        let report = pcg(
            "screened Poisson conjugate gradients",
            apply,
            precondition,
            dot,
            |_: &mut [f64]| {},
            rhs,
            &mut u,
            self.opts.krylov_tol,
            self.opts.max_krylov,
        )?;
        Ok((u, report))
    }

    pub fn solve_nonlinear(&self, rho: &[f64]) -> Result<Vec<f64>> {
        self.solve_nonlinear_from(rho, None, false).map(|(phi, _)| phi)
    }

    /// Newton's method for `Δφ = e^φ - ρ` from `initial` (default
    /// `log(mean ρ)`). After residual growth on three consecutive steps the
    /// solve restarts once with step halving; a second failure is an error.
    pub fn solve_nonlinear_from(
        &self,
        rho: &[f64],
        initial: Option<&[f64]>,
        keep_iterates: bool,
    ) -> Result<(Vec<f64>, NewtonReport)> {
        let n = self.grid.num_cells();
        check_len(n, rho.len())?;
        if let Some((cell, &r)) = rho.iter().enumerate().find(|(_, r)| !(**r > 0.0 && r.is_finite())) {
            return Err(Error::Vacuum { cell, rho: r });
        }
        let start = match initial {
            Some(phi) => {
                check_len(n, phi.len())?;
                phi.to_vec()
            }
            None => vec![(rho.iter().sum::<f64>() / n as f64).ln(); n],
        };
        let mut report = NewtonReport::default();
        match self.newton(rho, start.clone(), false, keep_iterates, &mut report) {
            Err(Error::NewtonDivergence { .. }) => {
                report.damped = true;
                self.newton(rho, start, true, keep_iterates, &mut report)
                    .map(|phi| (phi, report))
            }
            other => other.map(|phi| (phi, report)),
        }
    }

    fn newton(
        &self,
        rho: &[f64],
        mut phi: Vec<f64>,
        damped: bool,
        keep_iterates: bool,
        report: &mut NewtonReport,
    ) -> Result<Vec<f64>> {
        let sup = |r: &[f64]| r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut res = self.residual(&phi, rho);
        let mut norm = sup(&res);
        let mut history = vec![norm];
        report.residuals.push(norm);
        if keep_iterates {
            report.iterates.push(phi.clone());
        }
        let mut growth = 0;
        for _ in 0..self.opts.max_newton {
            if norm <= self.opts.newton_tol {
                return Ok(phi);
            }
            let c: Vec<f64> = phi.iter().map(|p| p.exp()).collect();
            let (delta, kr) = self.solve_screened(&c, &res)?;
            report.krylov_iterations += kr.iterations;
            let mut step = 1.0;
            let mut trial: Vec<f64>;
            loop {
                trial = phi.iter().zip(&delta).map(|(p, d)| p + step * d).collect();
                let r = self.residual(&trial, rho);
                let rn = sup(&r);
                if !damped || (rn.is_finite() && rn < norm) || step < 1e-4 {
                    res = r;
                    break;
                }
                step *= 0.5;
            }
            phi = trial;
            let new_norm = sup(&res);
            growth = if !(new_norm < norm) { growth + 1 } else { 0 };
            norm = new_norm;
            history.push(norm);
            report.residuals.push(norm);
            if keep_iterates {
                report.iterates.push(phi.clone());
            }
            if growth >= 3 || !norm.is_finite() {
                return Err(Error::NewtonDivergence { history });
            }
        }
        if norm <= self.opts.newton_tol {
            return Ok(phi);
        }
        Err(Error::NotConverged {
            what: "nonlinear Poisson Newton iteration",
            iterations: self.opts.max_newton,
            residual: norm,
        })
    }
}

/// Solves `Δφ = e^φ - ρ` on the grid.
pub fn solve_nonlinear_poisson(
    rho: &[f64],
    grid: &SpatialGrid,
    opts: &EllipticSolveOptions,
) -> Result<Vec<f64>> {
    EllipticSolver::new(grid, opts)?.solve_nonlinear(rho)
}

/// Solves `(c - Δ) u = rhs` on the grid.
pub fn solve_screened_poisson(
    c: &[f64],
    rhs: &[f64],
    grid: &SpatialGrid,
    opts: &EllipticSolveOptions,
) -> Result<Vec<f64>> {
    EllipticSolver::new(grid, opts)?
        .solve_screened(c, rhs)
        .map(|(u, _)| u)
}

/// `x e^x - e^x + 1`, accurate near zero.
pub fn lyapunov_density(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        // sum_{n >= 2} (n - 1) x^n / n!
        let mut term = x * x / 2.0;
        let mut sum = term;
        for n in 3..12 {
            term *= x / n as f64;
            sum += (n - 1) as f64 * term;
        }
        sum
    } else {
        x.exp_m1() * x - x.exp_m1() + x
    }
}

/// `∑ H (ψ e^ψ - e^ψ + 1) · cell_volume`.
pub fn lyapunov_energy(psi: &[f64], weight: &[f64], grid: &SpatialGrid) -> Result<f64> {
    check_len(grid.num_cells(), psi.len())?;
    check_len(grid.num_cells(), weight.len())?;
    let values: Vec<f64> = psi
        .iter()
        .zip(weight)
        .map(|(p, h)| h * lyapunov_density(*p))
        .collect();
    Ok(grid.integrate(&values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn opts(stencil: LaplacianStencil) -> EllipticSolveOptions {
        EllipticSolveOptions {
            newton_tol: 1e-11,
            max_newton: 30,
            krylov_tol: 1e-12,
            max_krylov: 200,
            stencil,
        }
    }

    fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn constant_densities() {
        let g = SpatialGrid::new(2, 8, 3.0).unwrap();
        let o = opts(LaplacianStencil::Centered);
        let phi = solve_nonlinear_poisson(&vec![1.0; 64], &g, &o).unwrap();
        assert!(phi.iter().all(|p| p.abs() < 1e-14));
        let phi = solve_nonlinear_poisson(&vec![0.3f64.exp(); 64], &g, &o).unwrap();
        assert!(phi.iter().all(|p| (p - 0.3).abs() < 1e-11));
    }

    #[test]
    fn manufactured_solution_with_quadratic_contraction() {
        let g = SpatialGrid::new(1, 64, 2.0 * PI).unwrap();
        let k = 2.0 * PI / g.length();
        for stencil in [LaplacianStencil::Centered, LaplacianStencil::Spectral] {
            let solver = EllipticSolver::new(&g, &opts(stencil)).unwrap();
            let exact: Vec<f64> = g.positions().iter().map(|x| 0.2 * (k * x[0]).sin()).collect();
            let lap = solver.laplacian(&exact);
            let rho: Vec<f64> = exact.iter().zip(&lap).map(|(p, l)| p.exp() - l).collect();
            let (phi, report) = solver.solve_nonlinear_from(&rho, None, true).unwrap();
            assert!(sup_diff(&phi, &exact) <= 1e-9);
            let errors: Vec<f64> = report.iterates.iter().map(|it| sup_diff(it, &exact)).collect();
            for w in errors.windows(2) {
                if w[1] > 1e-13 {
                    assert!(w[1] / (w[0] * w[0]) < 10.0, "{errors:?}");
                }
            }
            assert!(!report.damped);
        }
    }

    #[test]
    fn spectral_stencil_matches_exact_laplacian() {
        let g = SpatialGrid::new(1, 32, 2.0 * PI).unwrap();
        let f: Vec<f64> = g.positions().iter().map(|x| (3.0 * x[0]).cos()).collect();
        let lap = laplacian(&f, &g, LaplacianStencil::Spectral);
        assert!(lap.iter().zip(&f).all(|(l, v)| (l + 9.0 * v).abs() < 1e-11));
        let centred = laplacian(&f, &g, LaplacianStencil::Centered);
        let h = g.spacing();
        let lam = -4.0 * (1.5 * h).sin().powi(2) / (h * h);
        assert!(centred.iter().zip(&f).all(|(l, v)| (l - lam * v).abs() < 1e-11));
    }

    #[test]
    fn initial_guess_does_not_change_the_solution() {
        let g = SpatialGrid::new(2, 16, 4.0).unwrap();
        let solver = EllipticSolver::new(&g, &opts(LaplacianStencil::Centered)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rho: Vec<f64> = (0..g.num_cells()).map(|_| rng.gen_range(0.5..2.0)).collect();
        let a = solver.solve_nonlinear(&rho).unwrap();
        let (b, _) = solver.solve_nonlinear_from(&rho, Some(&vec![0.0; 256]), false).unwrap();
        assert!(sup_diff(&a, &b) <= 1e-9);
    }

    #[test]
    fn comparison_principle() {
        let g = SpatialGrid::new(1, 32, 5.0).unwrap();
        let solver = EllipticSolver::new(&g, &opts(LaplacianStencil::Centered)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let low: Vec<f64> = (0..32).map(|_| rng.gen_range(0.3..2.0)).collect();
            let high: Vec<f64> = low.iter().map(|r| r + rng.gen_range(0.0..1.0)).collect();
            let p_low = solver.solve_nonlinear(&low).unwrap();
            let p_high = solver.solve_nonlinear(&high).unwrap();
            assert!(p_high.iter().zip(&p_low).all(|(a, b)| *a >= *b - 1e-12));
        }
    }

    #[test]
    fn rejects_nonpositive_density() {
        let g = SpatialGrid::new(1, 4, 1.0).unwrap();
        let err = solve_nonlinear_poisson(&[1.0, 0.0, 1.0, 1.0], &g, &opts(LaplacianStencil::Centered));
        assert!(matches!(err, Err(Error::Vacuum { cell: 1, .. })));
    }

    #[test]
    fn screened_eigenfunction_and_zero_rhs() {
        let g = SpatialGrid::new(1, 64, 3.0).unwrap();
        let k = 2.0 * PI / g.length();
        let o = opts(LaplacianStencil::Spectral);
        let rhs: Vec<f64> = g.positions().iter().map(|x| (1.0 + k * k) * (k * x[0]).sin()).collect();
        let u = solve_screened_poisson(&vec![1.0; 64], &rhs, &g, &o).unwrap();
        for (ui, x) in u.iter().zip(g.positions()) {
            assert!((ui - (k * x[0]).sin()).abs() < 1e-10);
        }
        let zero = solve_screened_poisson(&vec![1.0; 64], &vec![0.0; 64], &g, &o).unwrap();
        assert!(zero.iter().all(|x| *x == 0.0));
        assert!(solve_screened_poisson(&vec![0.0; 64], &rhs, &g, &o).is_err());
    }

    #[test]
    fn variable_coefficient_against_dense_solve() {
        let g = SpatialGrid::new(1, 32, 2.0).unwrap();
        let k = 2.0 * PI / g.length();
        let solver = EllipticSolver::new(&g, &opts(LaplacianStencil::Centered)).unwrap();
        let c: Vec<f64> = g.positions().iter().map(|x| 1.0 + 0.5 * (k * x[0]).cos()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rhs: Vec<f64> = (0..32).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (u, report) = solver.solve_screened(&c, &rhs).unwrap();
        assert!(report.iterations <= 25, "{}", report.iterations);
        let h2 = g.spacing().powi(2);
        let mut a = vec![0.0; 32 * 32];
        for i in 0..32 {
            a[i * 32 + i] = c[i] + 2.0 / h2;
            a[i * 32 + (i + 1) % 32] -= 1.0 / h2;
            a[i * 32 + (i + 31) % 32] -= 1.0 / h2;
        }
        let direct = crate::linalg::solve_dense(&a, &rhs).unwrap();
        assert!(sup_diff(&u, &direct) < 1e-10);
        let lap = solver.laplacian(&u);
        let res: f64 = (0..32).map(|i| (c[i] * u[i] - lap[i] - rhs[i]).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = rhs.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(res <= 1e-12 * norm * 10.0);
    }

    #[test]
    fn screened_solve_is_linear() {
        let g = SpatialGrid::new(2, 12, 2.0).unwrap();
        let solver = EllipticSolver::new(&g, &opts(LaplacianStencil::Centered)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = g.num_cells();
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
        let r1: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r2: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mix: Vec<f64> = r1.iter().zip(&r2).map(|(a, b)| 2.5 * a + b).collect();
        let u1 = solver.solve_screened(&c, &r1).unwrap().0;
        let u2 = solver.solve_screened(&c, &r2).unwrap().0;
        let um = solver.solve_screened(&c, &mix).unwrap().0;
        let combo: Vec<f64> = u1.iter().zip(&u2).map(|(a, b)| 2.5 * a + b).collect();
        assert!(sup_diff(&um, &combo) < 1e-10);
    }

    #[test]
    fn lyapunov_values() {
        let g = SpatialGrid::new(1, 4, 4.0).unwrap();
        assert_eq!(lyapunov_energy(&[0.0; 4], &[1.0; 4], &g).unwrap(), 0.0);
        let unit = SpatialGrid::new(1, 2, 2.0).unwrap();
        let e = lyapunov_energy(&[0.1, 0.1], &[0.5, 0.5], &unit).unwrap();
        // 0.1 e^0.1 - e^0.1 + 1 = 1 - 0.9 e^0.1
        assert!((e - 0.005346173731916).abs() < 1e-14, "{e}");
        // Series and closed form agree across the switch.
        for x in [0.0099, -0.0099, 0.0101, -0.0101] {
            let direct = x * f64::exp(x) - f64::exp(x) + 1.0;
            assert!((lyapunov_density(x) - direct).abs() < 1e-15);
        }
    }

    #[test]
    fn energy_is_bracketed_by_weighted_l2() {
        let g = SpatialGrid::new(1, 10_000, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let bound = 6f64.ln();
        let psi: Vec<f64> = (0..10_000).map(|_| rng.gen_range(-bound..=bound)).collect();
        let h: Vec<f64> = (0..10_000).map(|_| rng.gen_range(0.5..2.0)).collect();
        let e = lyapunov_energy(&psi, &h, &g).unwrap();
        let l2 = g.integrate(&psi.iter().zip(&h).map(|(p, w)| w * p * p).collect::<Vec<_>>());
        assert!(l2 / 12.0 <= e && e <= 3.0 * l2);
    }

    proptest! {
        #[test]
        fn scalar_inequality(x in -6f64.ln()..=6f64.ln()) {
            let d = lyapunov_density(x);
            prop_assert!(3.0 * x * x >= d);
            prop_assert!(d >= x * x / 12.0);
        }
    }
}
