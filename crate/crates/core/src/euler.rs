//! Barotropic ionic Euler–Poisson solver: finite volumes for `(ρ, ρu)` with
//! pressure `Kρ^{5/3}`, the force `-ρ∇φ` and `Δφ = e^φ - ρ` re-solved at
//! every stage.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::grid::SpatialGrid;
use crate::parallel;
use crate::poisson::{EllipticSolveOptions, EllipticSolver};
use crate::spectral::Spectral;

const GAMMA: f64 = 5.0 / 3.0;

/// Fluid fields on the spatial grid. `theta = K rho^{2/3}` is derived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidState {
    pub rho: Vec<f64>,
    pub u: Vec<[f64; 3]>,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub k: f64,
}

impl FluidState {
    pub fn num_cells(&self) -> usize {
        self.rho.len()
    }

    fn rederive_theta(&mut self) {
        self.theta = self.rho.iter().map(|r| self.k * r.powf(2.0 / 3.0)).collect();
    }

    pub fn pressure(&self, cell: usize) -> f64 {
        self.k * self.rho[cell].powf(GAMMA)
    }
}

/// Time derivatives of the fluid fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluidRates {
    pub rho: Vec<f64>,
    pub u: Vec<[f64; 3]>,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reconstruction {
    FirstOrder,
    Minmod,
    VanLeer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerOptions {
    pub reconstruction: Reconstruction,
    /// Time step as a fraction of the stability limit.
    pub cfl: f64,
    pub elliptic: EllipticSolveOptions,
}

/// Conserved variables `(ρ, ρu)` per cell.
type Conserved = [f64; 4];

#[derive(Debug, Clone)]
pub struct EulerSolver {
    grid: SpatialGrid,
    elliptic: EllipticSolver,
    opts: EulerOptions,
}

fn limited_slope(kind: Reconstruction, left: f64, right: f64) -> f64 {
    match kind {
        Reconstruction::FirstOrder => 0.0,
        Reconstruction::Minmod => {
            if left * right <= 0.0 {
                0.0
            } else if left.abs() < right.abs() {
                left
            } else {
                right
            }
        }
        Reconstruction::VanLeer => {
            if left * right <= 0.0 {
                0.0
            } else {
                2.0 * left * right / (left + right)
            }
        }
    }
}

impl EulerSolver {
    pub fn new(grid: &SpatialGrid, opts: &EulerOptions) -> Result<Self> {
        if !(opts.cfl > 0.0 && opts.cfl <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "CFL fraction must lie in (0, 1], got {}",
                opts.cfl
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            elliptic: EllipticSolver::new(grid, &opts.elliptic)?,
            opts: *opts,
        })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn elliptic(&self) -> &EllipticSolver {
        &self.elliptic
    }

    pub fn options(&self) -> &EulerOptions {
        &self.opts
    }

    /// Builds a state from density and velocity, solving for `φ`.
    pub fn state_from(&self, rho: Vec<f64>, u: Vec<[f64; 3]>, k: f64) -> Result<FluidState> {
        let n = self.grid.num_cells();
        check_len(n, rho.len())?;
        check_len(n, u.len())?;
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidInput(format!("K must be positive, got {k}")));
        }
        let phi = self.elliptic.solve_nonlinear(&rho)?;
        let mut state = FluidState {
            rho,
            u,
            theta: Vec::new(),
            phi,
            k,
        };
        state.rederive_theta();
        Ok(state)
    }

    /// `ρ = 1 + a Σ cos(ξ·x)` and `u = ∇χ` with
    /// `χ = a · velocity_ratio · Σ sin(ξ·x) / |ξ|`, differentiated spectrally.
    pub fn init_irrotational(
        &self,
        amplitude: f64,
        modes: &[[i32; 3]],
        k: f64,
        velocity_ratio: f64,
    ) -> Result<FluidState> {
        if !(amplitude.abs() <= 0.1) {
            return Err(Error::InvalidInput(format!(
                "initial amplitude must satisfy |a| <= 0.1, got {amplitude}"
            )));
        }
        let dim = self.grid.dim();
        let half = (self.grid.cells_per_axis() / 2) as i32;
        for m in modes {
            if m.iter().all(|&x| x == 0) || m[dim..].iter().any(|&x| x != 0) {
                return Err(Error::InvalidInput(format!(
                    "mode {m:?} must be nonzero and lie in the first {dim} axes"
                )));
            }
            if m.iter().any(|x| x.abs() >= half) {
                return Err(Error::InvalidInput(format!(
                    "mode {m:?} is not resolved by {} cells per axis",
                    self.grid.cells_per_axis()
                )));
            }
        }
        let base = 2.0 * std::f64::consts::PI / self.grid.length();
        let phase = |x: &[f64; 3], m: &[i32; 3]| base * (0..3).map(|a| m[a] as f64 * x[a]).sum::<f64>();
        let positions = self.grid.positions();
        let rho: Vec<f64> = positions
            .iter()
            .map(|x| 1.0 + amplitude * modes.iter().map(|m| phase(x, m).cos()).sum::<f64>())
            .collect();
        let chi: Vec<f64> = positions
            .iter()
            .map(|x| {
                modes
                    .iter()
                    .map(|m| {
                        let norm = base * (m.iter().map(|&v| (v * v) as f64).sum::<f64>()).sqrt();
                        phase(x, m).sin() / norm
                    })
                    .sum::<f64>()
                    * amplitude
                    * velocity_ratio
            })
            .collect();
        let grad = Spectral::new(&self.grid).gradient(&chi);
        let u = (0..rho.len()).map(|c| [grad[0][c], grad[1][c], grad[2][c]]).collect();
        self.state_from(rho, u, k)
    }

    /// Largest stable step `h / (1.5 · dim · max(|u| + c))`.
    pub fn cfl_limit(&self, state: &FluidState) -> f64 {
        let dim = self.grid.dim();
        let speed = (0..state.num_cells()).fold(0.0f64, |m, c| {
            let sound = (GAMMA * state.theta[c]).sqrt();
            let flow = (0..dim).fold(0.0f64, |s, a| s.max(state.u[c][a].abs()));
            m.max(flow + sound)
        });
        self.grid.spacing() / (1.5 * dim as f64 * speed)
    }

    fn conserved(state: &FluidState) -> Vec<Conserved> {
        state
            .rho
            .iter()
            .zip(&state.u)
            .map(|(r, u)| [*r, r * u[0], r * u[1], r * u[2]])
            .collect()
    }

    /// Semi-discrete right-hand side for the conserved variables given `φ`.
    fn rhs(&self, q: &[Conserved], phi: &[f64], k: f64) -> Result<Vec<Conserved>> {
        let g = &self.grid;
        let n = q.len();
        if let Some((cell, r)) = q.iter().enumerate().find(|(_, q)| !(q[0] > 0.0)) {
            return Err(Error::Vacuum { cell, rho: r[0] });
        }
        let prim: Vec<[f64; 4]> = q
            .iter()
            .map(|c| [c[0], c[1] / c[0], c[2] / c[0], c[3] / c[0]])
            .collect();
        let inv_h = 1.0 / g.spacing();
        let mut out = vec![[0.0; 4]; n];
        for axis in 0..g.dim() {
            let kind = self.opts.reconstruction;
            let slope = |c: usize| -> [f64; 4] {
                let l = &prim[g.shifted(c, axis, -1)];
                let r = &prim[g.shifted(c, axis, 1)];
                let m = &prim[c];
                std::array::from_fn(|i| limited_slope(kind, m[i] - l[i], r[i] - m[i]))
            };
            let flux_at = |c: usize| -> [f64; 4] {
                let right_cell = g.shifted(c, axis, 1);
                let (sl, sr) = (slope(c), slope(right_cell));
                let wl: [f64; 4] = std::array::from_fn(|i| prim[c][i] + 0.5 * sl[i]);
                let wr: [f64; 4] = std::array::from_fn(|i| prim[right_cell][i] - 0.5 * sr[i]);
                let physical = |w: &[f64; 4]| -> ([f64; 4], [f64; 4], f64) {
                    let rho = w[0];
                    let p = k * rho.powf(GAMMA);
                    let un = w[1 + axis];
                    let cons = [rho, rho * w[1], rho * w[2], rho * w[3]];
                    let mut f = [rho * un, rho * w[1] * un, rho * w[2] * un, rho * w[3] * un];
                    f[1 + axis] += p;
                    let speed = un.abs() + (GAMMA * p / rho).sqrt();
                    (cons, f, speed)
                };
                let (ql, fl, sl_speed) = physical(&wl);
                let (qr, fr, sr_speed) = physical(&wr);
                let s = sl_speed.max(sr_speed);
                std::array::from_fn(|i| 0.5 * (fl[i] + fr[i]) - 0.5 * s * (qr[i] - ql[i]))
            };
            let fluxes: Vec<[f64; 4]> = parallel::map_range(n, flux_at);
            if fluxes.iter().flatten().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput("non-finite Euler flux".into()));
            }
            for c in 0..n {
                let left = &fluxes[g.shifted(c, axis, -1)];
                for i in 0..4 {
                    out[c][i] -= (fluxes[c][i] - left[i]) * inv_h;
                }
            }
        }
        let grad = self.elliptic.gradient(phi);
        for c in 0..n {
            for a in 0..g.dim() {
                out[c][1 + a] -= q[c][0] * grad[a][c];
            }
        }
        Ok(out)
    }

    fn assemble(&self, q: &[Conserved], phi_guess: &[f64], k: f64) -> Result<FluidState> {
        let rho: Vec<f64> = q.iter().map(|c| c[0]).collect();
        if let Some((cell, &r)) = rho.iter().enumerate().find(|(_, r)| !(**r > 0.0)) {
            return Err(Error::Vacuum { cell, rho: r });
        }
        let u = q
            .iter()
            .map(|c| [c[1] / c[0], c[2] / c[0], c[3] / c[0]])
            .collect();
        let (phi, _) = self.elliptic.solve_nonlinear_from(&rho, Some(phi_guess), false)?;
        let mut state = FluidState {
            rho,
            u,
            theta: Vec::new(),
            phi,
            k,
        };
        state.rederive_theta();
        Ok(state)
    }

    /// One SSP-RK2 step; `φ` is re-solved after each stage.
    pub fn step(&self, state: &FluidState, dt: f64) -> Result<FluidState> {
        check_len(self.grid.num_cells(), state.num_cells())?;
        let limit = self.cfl_limit(state);
        if !(dt > 0.0 && dt <= limit * (1.0 + 1e-12)) {
            return Err(Error::Cfl { dt, limit });
        }
        let q0 = Self::conserved(state);
        let r0 = self.rhs(&q0, &state.phi, state.k)?;
        let q1: Vec<Conserved> = q0
            .iter()
            .zip(&r0)
            .map(|(q, r)| std::array::from_fn(|i| q[i] + dt * r[i]))
            .collect();
        let stage = self.assemble(&q1, &state.phi, state.k)?;
        let r1 = self.rhs(&q1, &stage.phi, state.k)?;
        let q2: Vec<Conserved> = (0..q0.len())
            .map(|c| std::array::from_fn(|i| 0.5 * q0[c][i] + 0.5 * (q1[c][i] + dt * r1[c][i])))
            .collect();
        self.assemble(&q2, &stage.phi, state.k)
    }

    /// Time derivatives of all fields from the semi-discrete equations; `∂_tφ`
    /// solves `(e^φ - Δ) ∂_tφ = ∂_tρ`.
    pub fn rates(&self, state: &FluidState) -> Result<FluidRates> {
        let q = Self::conserved(state);
        let r = self.rhs(&q, &state.phi, state.k)?;
        let rho: Vec<f64> = r.iter().map(|x| x[0]).collect();
        let u = (0..q.len())
            .map(|c| std::array::from_fn(|a| (r[c][1 + a] - state.u[c][a] * r[c][0]) / q[c][0]))
            .collect();
        let theta = (0..q.len())
            .map(|c| 2.0 / 3.0 * state.theta[c] / state.rho[c] * rho[c])
            .collect();
        let e_phi: Vec<f64> = state.phi.iter().map(|p| p.exp()).collect();
        let (phi, _) = self.elliptic.solve_screened(&e_phi, &rho)?;
        Ok(FluidRates { rho, u, theta, phi })
    }

    /// Integrates to `t_end` with uniform steps at the configured CFL
    /// fraction, storing every `store_every` steps and the final state.
    pub fn run(&self, initial: &FluidState, t_end: f64, store_every: usize) -> Result<Trajectory> {
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(Error::InvalidInput(format!("end time must be nonnegative, got {t_end}")));
        }
        if store_every == 0 {
            return Err(Error::InvalidInput("store_every must be positive".into()));
        }
        let mut traj = Trajectory {
            grid: self.grid.clone(),
            times: vec![0.0],
            states: vec![initial.clone()],
            rates: vec![self.rates(initial)?],
        };
        if t_end == 0.0 {
            return Ok(traj);
        }
        let steps = (t_end / (self.opts.cfl * self.cfl_limit(initial))).ceil().max(1.0) as usize;
        let dt = t_end / steps as f64;
        let mut state = initial.clone();
        for i in 1..=steps {
            state = self.step(&state, dt)?;
            if i % store_every == 0 || i == steps {
                traj.times.push(if i == steps { t_end } else { i as f64 * dt });
                traj.rates.push(self.rates(&state)?);
                traj.states.push(state.clone());
            }
        }
        Ok(traj)
    }
}

/// Stored Euler–Poisson snapshots with their time derivatives and a
/// piecewise cubic Hermite interpolant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub grid: SpatialGrid,
    pub times: Vec<f64>,
    pub states: Vec<FluidState>,
    pub rates: Vec<FluidRates>,
}

fn hermite(t0: f64, t1: f64, t: f64, y0: f64, y1: f64, d0: f64, d1: f64) -> (f64, f64) {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let value = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
        + (s3 - 2.0 * s2 + s) * h * d0
        + (-2.0 * s3 + 3.0 * s2) * y1
        + (s3 - s2) * h * d1;
    let slope = (6.0 * s2 - 6.0 * s) / h * y0
        + (3.0 * s2 - 4.0 * s + 1.0) * d0
        + (-6.0 * s2 + 6.0 * s) / h * y1
        + (3.0 * s2 - 2.0 * s) * d1;
    (value, slope)
}

impl Trajectory {
    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        *self.times.last().expect("nonempty trajectory")
    }

    /// State and rates at time `t`; snapshots are reproduced exactly.
    pub fn at(&self, t: f64) -> Result<(FluidState, FluidRates)> {
        let (t0, t1) = (self.start_time(), self.end_time());
        let slack = 1e-12 * (1.0 + t1.abs());
        if !(t >= t0 - slack && t <= t1 + slack) {
            return Err(Error::InvalidInput(format!(
                "time {t} lies outside the trajectory [{t0}, {t1}]"
            )));
        }
        if let Some(i) = self.times.iter().position(|&s| s == t) {
            return Ok((self.states[i].clone(), self.rates[i].clone()));
        }
        let i = self.times.partition_point(|&s| s <= t).clamp(1, self.times.len() - 1) - 1;
        let (ta, tb) = (self.times[i], self.times[i + 1]);
        let (a, b) = (&self.states[i], &self.states[i + 1]);
        let (da, db) = (&self.rates[i], &self.rates[i + 1]);
        let n = a.num_cells();
        let mut rho = vec![0.0; n];
        let mut rho_t = vec![0.0; n];
        let mut phi = vec![0.0; n];
        let mut phi_t = vec![0.0; n];
        let mut u = vec![[0.0; 3]; n];
        let mut u_t = vec![[0.0; 3]; n];
        for c in 0..n {
            (rho[c], rho_t[c]) = hermite(ta, tb, t, a.rho[c], b.rho[c], da.rho[c], db.rho[c]);
            (phi[c], phi_t[c]) = hermite(ta, tb, t, a.phi[c], b.phi[c], da.phi[c], db.phi[c]);
            for k in 0..3 {
                (u[c][k], u_t[c][k]) = hermite(ta, tb, t, a.u[c][k], b.u[c][k], da.u[c][k], db.u[c][k]);
            }
        }
        let mut state = FluidState {
            rho,
            u,
            theta: Vec::new(),
            phi,
            k: a.k,
        };
        state.rederive_theta();
        let theta_t = (0..n)
            .map(|c| 2.0 / 3.0 * state.theta[c] / state.rho[c] * rho_t[c])
            .collect();
        Ok((
            state,
            FluidRates {
                rho: rho_t,
                u: u_t,
                theta: theta_t,
                phi: phi_t,
            },
        ))
    }

    /// Restriction to the grid with `1 / factor` as many cells per axis; node
    /// `i` of the coarse grid is node `factor · i` of this one.
    pub fn restrict(&self, factor: usize) -> Result<Trajectory> {
        let fine = &self.grid;
        if factor == 0 || fine.cells_per_axis() % factor != 0 {
            return Err(Error::InvalidGrid(format!(
                "cannot coarsen {} cells per axis by {factor}",
                fine.cells_per_axis()
            )));
        }
        let coarse = SpatialGrid::new(fine.dim(), fine.cells_per_axis() / factor, fine.length())?;
        let map: Vec<usize> = (0..coarse.num_cells())
            .map(|c| {
                let idx = coarse.multi_index(c);
                fine.cell_index(idx.map(|i| i * factor))
            })
            .collect();
        let pick = |v: &[f64]| map.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let pick3 = |v: &[[f64; 3]]| map.iter().map(|&i| v[i]).collect::<Vec<_>>();
        Ok(Trajectory {
            grid: coarse,
            times: self.times.clone(),
            states: self
                .states
                .iter()
                .map(|s| FluidState {
                    rho: pick(&s.rho),
                    u: pick3(&s.u),
                    theta: pick(&s.theta),
                    phi: pick(&s.phi),
                    k: s.k,
                })
                .collect(),
            rates: self
                .rates
                .iter()
                .map(|r| FluidRates {
                    rho: pick(&r.rho),
                    u: pick3(&r.u),
                    theta: pick(&r.theta),
                    phi: pick(&r.phi),
                })
                .collect(),
        })
    }
}

pub fn init_irrotational(
    amplitude: f64,
    modes: &[[i32; 3]],
    k: f64,
    velocity_ratio: f64,
    grid: &SpatialGrid,
    opts: &EulerOptions,
) -> Result<FluidState> {
    EulerSolver::new(grid, opts)?.init_irrotational(amplitude, modes, k, velocity_ratio)
}

pub fn step_euler_poisson(
    state: &FluidState,
    dt: f64,
    grid: &SpatialGrid,
    opts: &EulerOptions,
) -> Result<FluidState> {
    EulerSolver::new(grid, opts)?.step(state, dt)
}

pub fn run_euler(
    state: &FluidState,
    t_end: f64,
    store_every: usize,
    grid: &SpatialGrid,
    opts: &EulerOptions,
) -> Result<Trajectory> {
    EulerSolver::new(grid, opts)?.run(state, t_end, store_every)
}
