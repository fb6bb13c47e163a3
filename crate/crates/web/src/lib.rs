//! wasm-bindgen exports behind `www/index.html`: an ion-acoustic wave, the
//! Boltzmann-electron potential of a density profile, and the scalar
//! inequality bracketing `x e^x - e^x + 1`.

use std::f64::consts::PI;

use wasm_bindgen::prelude::*;

use ivpb_core::euler::{EulerOptions, EulerSolver, FluidState, Reconstruction};
use ivpb_core::grid::SpatialGrid;
use ivpb_core::poisson::{lyapunov_density, EllipticSolveOptions, EllipticSolver, LaplacianStencil};

fn elliptic() -> EllipticSolveOptions {
    EllipticSolveOptions {
        newton_tol: 1e-11,
        max_newton: 30,
        krylov_tol: 1e-12,
        max_krylov: 200,
        stencil: LaplacianStencil::Centered,
    }
}

fn js_err(e: ivpb_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// A 1D Euler–Poisson run on `[0, 2π)` from `ρ = 1 + a cos(m x)` at rest.
#[wasm_bindgen]
pub struct AcousticWave {
    solver: EulerSolver,
    state: FluidState,
    time: f64,
}

impl AcousticWave {
    pub fn start(cells: usize, amplitude: f64, mode: i32) -> ivpb_core::Result<Self> {
        let grid = SpatialGrid::new(1, cells, 2.0 * PI)?;
        let solver = EulerSolver::new(
            &grid,
            &EulerOptions {
                reconstruction: Reconstruction::VanLeer,
                cfl: 0.5,
                elliptic: elliptic(),
            },
        )?;
        let state = solver.init_irrotational(amplitude, &[[mode, 0, 0]], 1.0, 0.0)?;
        Ok(Self { solver, state, time: 0.0 })
    }

    pub fn run_for(&mut self, duration: f64) -> ivpb_core::Result<()> {
        let end = self.time + duration;
        while self.time < end {
            let dt = (0.5 * self.solver.cfl_limit(&self.state)).min(end - self.time);
            self.state = self.solver.step(&self.state, dt)?;
            self.time += dt;
        }
        Ok(())
    }
}

#[wasm_bindgen]
impl AcousticWave {
    #[wasm_bindgen(constructor)]
    pub fn new(cells: usize, amplitude: f64, mode: i32) -> Result<AcousticWave, JsError> {
        Self::start(cells, amplitude, mode).map_err(js_err)
    }

    pub fn advance(&mut self, duration: f64) -> Result<(), JsError> {
        self.run_for(duration).map_err(js_err)
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn density(&self) -> Vec<f64> {
        self.state.rho.clone()
    }

    pub fn velocity(&self) -> Vec<f64> {
        self.state.u.iter().map(|u| u[0]).collect()
    }

    pub fn potential(&self) -> Vec<f64> {
        self.state.phi.clone()
    }
}

pub fn potential_for(cells: usize, amplitude: f64, mode: i32) -> ivpb_core::Result<Vec<f64>> {
    let grid = SpatialGrid::new(1, cells, 2.0 * PI)?;
    let rho: Vec<f64> = grid
        .positions()
        .iter()
        .map(|x| 1.0 + amplitude * (mode as f64 * x[0]).cos())
        .collect();
    EllipticSolver::new(&grid, &elliptic())?.solve_nonlinear(&rho)
}

/// `φ` solving `φ'' = e^φ - ρ` for `ρ = 1 + a cos(m x)`.
#[wasm_bindgen]
pub fn boltzmann_potential(cells: usize, amplitude: f64, mode: i32) -> Result<Vec<f64>, JsError> {
    potential_for(cells, amplitude, mode).map_err(js_err)
}

/// Rows `x, x²/12, x e^x - e^x + 1, 3x²` at `samples` points of
/// `[-x_max, x_max]`, flattened.
#[wasm_bindgen]
pub fn lyapunov_bracket(x_max: f64, samples: usize) -> Vec<f64> {
    let n = samples.max(2);
    (0..n)
        .flat_map(|i| {
            let x = -x_max + 2.0 * x_max * i as f64 / (n - 1) as f64;
            [x, x * x / 12.0, lyapunov_density(x), 3.0 * x * x]
        })
        .collect()
}
