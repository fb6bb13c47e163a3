//! Ion Vlasov–Poisson–Boltzmann at finite Knudsen number:
//! `∂_t F + v·∇_x F - ∇φ·∇_v F = Q(F, F)/ε`, `Δφ = e^φ - ∫F dv`.
//!
//! One step is the Strang composition `X(dt/2) V(dt/2) C(dt) V(dt/2) X(dt/2)`
//! with `φ` re-solved after each transport substep.

use serde::{Deserialize, Serialize};

use crate::collision::{bgk_relax_exact, collision_frequency, CollisionMode, CollisionOperator};
use crate::error::{check_len, Error, Result};
use crate::euler::FluidState;
use crate::grid::{SpatialGrid, VelocityGrid};
use crate::maxwellian::{correct_moments, eval_local_maxwellian, moments, LocalMaxwellianParams, Moments};
use crate::parallel;
use crate::poisson::{EllipticSolveOptions, EllipticSolver};
use crate::spectral::Spectral;

#[derive(Debug, Clone, PartialEq)]
pub struct KineticState {
    /// Cell-major phase field.
    pub f: Vec<f64>,
    pub phi: Vec<f64>,
    pub epsilon: f64,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KineticOptions {
    pub dt: f64,
    /// Largest fraction of cell-steps allowed to need clipping.
    pub clip_budget: f64,
    pub elliptic: EllipticSolveOptions,
}

/// Domain totals after one step and what the step did to them.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepLedger {
    pub time: f64,
    pub mass: f64,
    pub momentum: [f64; 3],
    /// `½∫∫|v|²F`.
    pub kinetic_energy: f64,
    /// Momentum change the field should cause, `-∫ρ∇φ dt`.
    pub momentum_work: [f64; 3],
    /// Kinetic energy change the field should cause.
    pub energy_work: f64,
    /// Mass defect of the kicks before the moment fix: the net flow through
    /// the velocity truncation plus interpolation error.
    pub velocity_leakage: f64,
    pub clipped_cells: usize,
}

#[derive(Debug, Clone)]
pub struct KineticTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<KineticState>,
    pub ledger: Vec<StepLedger>,
    pub clipped_fraction: f64,
}

/// Per-cell moments `(ρ, u, θ)` of a phase field.
#[derive(Debug, Clone)]
pub struct FluidMoments {
    pub rho: Vec<f64>,
    pub u: Vec<[f64; 3]>,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct KineticSolver {
    spatial: SpatialGrid,
    velocity: VelocityGrid,
    spectral: Spectral,
    elliptic: EllipticSolver,
    collision: CollisionOperator,
    opts: KineticOptions,
}

impl KineticSolver {
    pub fn new(spatial: &SpatialGrid, collision: &CollisionOperator, opts: &KineticOptions) -> Result<Self> {
        let velocity = collision.grid().clone();
        if !(opts.dt > 0.0 && opts.dt.is_finite()) {
            return Err(Error::config("kinetic.dt", format!("must be positive, got {}", opts.dt)));
        }
        let limit = spatial.spacing() / velocity.v_max();
        if opts.dt > limit {
            return Err(Error::Cfl { dt: opts.dt, limit });
        }
        if !(0.0..=1.0).contains(&opts.clip_budget) {
            return Err(Error::config("kinetic.clip_budget", "must lie in [0, 1]"));
        }
        Ok(Self {
            spectral: Spectral::new(spatial),
            elliptic: EllipticSolver::new(spatial, &opts.elliptic)?,
            spatial: spatial.clone(),
            velocity,
            collision: collision.clone(),
            opts: *opts,
        })
    }

    pub fn spatial_grid(&self) -> &SpatialGrid {
        &self.spatial
    }

    pub fn velocity_grid(&self) -> &VelocityGrid {
        &self.velocity
    }

    pub fn options(&self) -> &KineticOptions {
        &self.opts
    }

    fn nv(&self) -> usize {
        self.velocity.num_nodes()
    }

    pub fn density(&self, f: &[f64]) -> Vec<f64> {
        let w = self.velocity.weight();
        f.chunks(self.nv()).map(|c| c.iter().sum::<f64>() * w).collect()
    }

    pub fn fluid_moments(&self, f: &[f64]) -> Result<FluidMoments> {
        check_len(self.spatial.num_cells() * self.nv(), f.len())?;
        let mut out = FluidMoments {
            rho: Vec::new(),
            u: Vec::new(),
            theta: Vec::new(),
        };
        for chunk in f.chunks(self.nv()) {
            let p = moments(chunk, &self.velocity)?.maxwellian_params()?;
            out.rho.push(p.rho);
            out.u.push(p.u);
            out.theta.push(p.theta);
        }
        Ok(out)
    }

    /// Builds a state from `F`, solving for `φ`.
    pub fn state_from(&self, f: Vec<f64>, epsilon: f64, time: f64) -> Result<KineticState> {
        check_len(self.spatial.num_cells() * self.nv(), f.len())?;
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidInput(format!("ε must be positive, got {epsilon}")));
        }
        if let Some(bad) = f.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite distribution value {bad}")));
        }
        let phi = self.elliptic.solve_nonlinear(&self.density(&f))?;
        Ok(KineticState { f, phi, epsilon, time })
    }

    /// The local Maxwellian of a fluid state.
    pub fn well_prepared(&self, fluid: &FluidState, epsilon: f64, time: f64) -> Result<KineticState> {
        check_len(self.spatial.num_cells(), fluid.num_cells())?;
        let mut f = Vec::with_capacity(self.spatial.num_cells() * self.nv());
        for c in 0..fluid.num_cells() {
            let p = LocalMaxwellianParams::new(fluid.rho[c], fluid.u[c], fluid.theta[c])?;
            f.extend(eval_local_maxwellian(&p, &self.velocity));
        }
        self.state_from(f, epsilon, time)
    }

    /// `F(x, v) ← F(x - v h, v)`, exact for the trigonometric interpolant.
    fn transport(&self, f: &mut [f64], h: f64) {
        let nv = self.nv();
        let cells = self.spatial.num_cells();
        let columns = parallel::map_range(nv, |node| {
            let v = self.velocity.nodes()[node];
            let column: Vec<f64> = (0..cells).map(|c| f[c * nv + node]).collect();
            self.spectral.shift(&column, [v[0] * h, v[1] * h, v[2] * h])
        });
        for (node, column) in columns.into_iter().enumerate() {
            for (c, x) in column.into_iter().enumerate() {
                f[c * nv + node] = x;
            }
        }
    }

    /// `F(x, v) ← F(x, v + ∇φ h)` per cell; returns the mass defect before
    /// the moment fix, integrated over `x`.
    fn kick(&self, f: &mut [f64], grad_phi: &[Vec<f64>; 3], h: f64) -> Result<f64> {
        let nv = self.nv();
        let leaks = parallel::map_range(self.spatial.num_cells(), |c| -> Result<(Vec<f64>, f64)> {
            let mut cell = f[c * nv..(c + 1) * nv].to_vec();
            let a = [grad_phi[0][c] * h, grad_phi[1][c] * h, grad_phi[2][c] * h];
            if a.iter().all(|x| *x == 0.0) {
                return Ok((cell, 0.0));
            }
            let before = moments(&cell, &self.velocity)?;
            for axis in 0..3 {
                if a[axis] != 0.0 {
                    shift_velocity_axis(&mut cell, &self.velocity, axis, a[axis])?;
                }
            }
            let after = moments(&cell, &self.velocity)?;
            let p = before.as_array();
            let e = p[4] - 2.0 * (a[0] * p[1] + a[1] * p[2] + a[2] * p[3]) + p[0] * (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
            let target = Moments {
                mass: p[0],
                momentum: [p[1] - p[0] * a[0], p[2] - p[0] * a[1], p[3] - p[0] * a[2]],
                energy: e,
            };
            let params = target.maxwellian_params()?;
            let weight = eval_local_maxwellian(&params, &self.velocity);
            correct_moments(&mut cell, &target, &weight, params.u, &self.velocity)?;
            Ok((cell, before.mass - after.mass))
        });
        let mut leaked = 0.0;
        for (c, r) in leaks.into_iter().enumerate() {
            let (cell, l) = r?;
            f[c * nv..(c + 1) * nv].copy_from_slice(&cell);
            leaked += l * self.spatial.cell_volume();
        }
        Ok(leaked)
    }

    /// Collision substep over `dt` with stiffness `1/ε`.
    fn collide(&self, f: &mut [f64], dt: f64, epsilon: f64) -> Result<()> {
        let nv = self.nv();
        let cfg = self.collision.config();
        let cells = parallel::map_range(self.spatial.num_cells(), |c| -> Result<Vec<f64>> {
            let cell = &f[c * nv..(c + 1) * nv];
            match cfg.mode {
                CollisionMode::Bgk => bgk_relax_exact(cell, &self.velocity, cfg.bgk_rate * dt / epsilon),
                CollisionMode::HardSphere => {
                    let m = moments(cell, &self.velocity)?;
                    let params = m.maxwellian_params()?;
                    let nu = collision_frequency(&params, &self.velocity);
                    let q = self.collision.collide(cell, cell)?;
                    let mut out: Vec<f64> = (0..nv)
                        .map(|i| {
                            let decay = (-nu[i] * dt / epsilon).exp();
                            let gain = q[i] + nu[i] * cell[i];
                            decay * cell[i] + (1.0 - decay) * gain / nu[i]
                        })
                        .collect();
                    let weight = eval_local_maxwellian(&params, &self.velocity);
                    correct_moments(&mut out, &m, &weight, params.u, &self.velocity)?;
                    Ok(out)
                }
            }
        });
        for (c, r) in cells.into_iter().enumerate() {
            f[c * nv..(c + 1) * nv].copy_from_slice(&r?);
        }
        Ok(())
    }

    /// Zeroes values below `-1e-12 max F`, restoring the cell moments with a
    /// correction proportional to the clipped field. Returns the number of
    /// cells touched.
    fn clip(&self, f: &mut [f64]) -> Result<usize> {
        let nv = self.nv();
        let floor = -1e-12 * f.iter().fold(0.0_f64, |m, x| m.max(*x));
        let mut touched = 0;
        for cell in f.chunks_mut(nv) {
            if cell.iter().all(|x| *x >= floor) {
                continue;
            }
            touched += 1;
            let m = moments(cell, &self.velocity)?;
            cell.iter_mut().for_each(|x| *x = x.max(0.0));
            let weight = cell.to_vec();
            let center = m.maxwellian_params().map(|p| p.u).unwrap_or([0.0; 3]);
            correct_moments(cell, &m, &weight, center, &self.velocity)?;
        }
        Ok(touched)
    }

    fn totals(&self, f: &[f64]) -> (f64, [f64; 3], f64) {
        let mut mass = 0.0;
        let mut mom = [0.0; 3];
        let mut energy = 0.0;
        for chunk in f.chunks(self.nv()) {
            let m = moments(chunk, &self.velocity).expect("chunk length");
            mass += m.mass;
            for k in 0..3 {
                mom[k] += m.momentum[k];
            }
            energy += 0.5 * m.energy;
        }
        let vol = self.spatial.cell_volume();
        (mass * vol, mom.map(|x| x * vol), energy * vol)
    }

    /// Momentum and kinetic-energy changes the two kicks must produce:
    /// `-dt ρ∇φ` and `-dt ∇φ·m + dt²/2 |∇φ|² ρ` per cell, summed.
    fn field_work(&self, f: &[f64], grad: &[Vec<f64>; 3], dt: f64) -> ([f64; 3], f64) {
        let mut momentum = [0.0; 3];
        let mut energy = 0.0;
        for (c, chunk) in f.chunks(self.nv()).enumerate() {
            let m = moments(chunk, &self.velocity).expect("chunk length");
            let g = [grad[0][c], grad[1][c], grad[2][c]];
            let g2 = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
            for k in 0..3 {
                momentum[k] -= dt * m.mass * g[k];
                energy -= dt * g[k] * m.momentum[k];
            }
            energy += 0.5 * dt * dt * g2 * m.mass;
        }
        let vol = self.spatial.cell_volume();
        (momentum.map(|x| x * vol), energy * vol)
    }

    pub fn step(&self, state: &KineticState) -> Result<(KineticState, StepLedger)> {
        let dt = self.opts.dt;
        let mut f = state.f.clone();
        self.transport(&mut f, 0.5 * dt);
        let rho = self.density(&f);
        let (phi_mid, _) = self.elliptic.solve_nonlinear_from(&rho, Some(&state.phi), false)?;
        let grad = self.spectral.gradient(&phi_mid);
        let (momentum_work, energy_work) = self.field_work(&f, &grad, dt);
        let mut leak = self.kick(&mut f, &grad, 0.5 * dt)?;
        self.collide(&mut f, dt, state.epsilon)?;
        leak += self.kick(&mut f, &grad, 0.5 * dt)?;
        self.transport(&mut f, 0.5 * dt);
        let clipped = self.clip(&mut f)?;
        let (mass, momentum, kinetic_energy) = self.totals(&f);
        let phi = self
            .elliptic
            .solve_nonlinear_from(&self.density(&f), Some(&phi_mid), false)?
            .0;
        let time = state.time + dt;
        if f.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                what: "kinetic distribution".into(),
                time,
            });
        }
        let ledger = StepLedger {
            time,
            mass,
            momentum,
            kinetic_energy,
            momentum_work,
            energy_work,
            velocity_leakage: leak,
            clipped_cells: clipped,
        };
        Ok((
            KineticState {
                f,
                phi,
                epsilon: state.epsilon,
                time,
            },
            ledger,
        ))
    }

    /// Steps to `t_end`, calling `visit` on the initial state and every
    /// `store_every`-th state (and the last).
    pub fn run_with<V>(&self, initial: &KineticState, t_end: f64, store_every: usize, mut visit: V) -> Result<Vec<StepLedger>>
    where
        V: FnMut(&KineticState) -> Result<()>,
    {
        if store_every == 0 {
            return Err(Error::config("kinetic.store_every", "must be at least 1"));
        }
        let steps = self.steps_between(initial.time, t_end)?;
        visit(initial)?;
        let mut ledger = Vec::with_capacity(steps);
        let mut state = initial.clone();
        let mut clipped = 0usize;
        for i in 1..=steps {
            let (next, entry) = self.step(&state)?;
            clipped += entry.clipped_cells;
            ledger.push(entry);
            state = next;
            state.time = initial.time + i as f64 * self.opts.dt;
            if i % store_every == 0 || i == steps {
                visit(&state)?;
            }
        }
        self.check_clipping(clipped, steps)?;
        Ok(ledger)
    }

    /// Fails when more than the clip budget of the `steps` cell-steps needed
    /// clipping.
    pub fn check_clipping(&self, clipped: usize, steps: usize) -> Result<()> {
        let total = (steps * self.spatial.num_cells()).max(1);
        if clipped as f64 > self.opts.clip_budget * total as f64 {
            return Err(Error::Positivity { clipped, total });
        }
        Ok(())
    }

    /// Number of steps from `start` to `end`; the step must divide the span.
    pub fn steps_between(&self, start: f64, end: f64) -> Result<usize> {
        let span = end - start;
        let steps = (span / self.opts.dt - 1e-9).ceil().max(0.0) as usize;
        if steps > 0 && ((steps as f64) * self.opts.dt - span).abs() > 1e-9 * span.max(1.0) {
            return Err(Error::config(
                "kinetic.dt",
                format!("{} does not divide the run length {span}", self.opts.dt),
            ));
        }
        Ok(steps)
    }

    pub fn run(&self, initial: &KineticState, t_end: f64, store_every: usize) -> Result<KineticTrajectory> {
        let mut times = Vec::new();
        let mut states = Vec::new();
        let ledger = self.run_with(initial, t_end, store_every, |s| {
            times.push(s.time);
            states.push(s.clone());
            Ok(())
        })?;
        let clipped: usize = ledger.iter().map(|l| l.clipped_cells).sum();
        let clipped_fraction = clipped as f64 / (ledger.len() * self.spatial.num_cells()).max(1) as f64;
        Ok(KineticTrajectory {
            times,
            states,
            ledger,
            clipped_fraction,
        })
    }

    /// `∫∫ F log F`.
    pub fn entropy(&self, f: &[f64]) -> f64 {
        f.iter().filter(|x| **x > 0.0).map(|x| x * x.ln()).sum::<f64>()
            * self.velocity.weight()
            * self.spatial.cell_volume()
    }
}

/// `F(v) ← F(v + a e_axis)` on one cell: cubic Lagrange interpolation of
/// `F/M`, `M` the Maxwellian of the cell's moments, times the exactly shifted
/// `M`. Beyond the velocity box the ratio keeps its edge value.
fn shift_velocity_axis(cell: &mut [f64], grid: &VelocityGrid, axis: usize, a: f64) -> Result<()> {
    let params = moments(cell, grid)?.maxwellian_params()?;
    let n = grid.nodes_per_axis();
    let dv = grid.spacing();
    let m = eval_local_maxwellian(&params, grid);
    let ratio: Vec<f64> = cell.iter().zip(&m).map(|(f, w)| if *w > 0.0 { f / w } else { 0.0 }).collect();
    let stride = [n * n, n, 1][axis];
    let mut shifted_params = params;
    shifted_params.u[axis] -= a;
    let offset = a / dv;
    for node in 0..cell.len() {
        let idx = grid.axis_index(node)[axis];
        let x = idx as f64 + offset;
        let line_start = node - idx * stride;
        let target = shifted_params.value(grid.nodes()[node]);
        if x < 0.0 || x > (n - 1) as f64 {
            let edge = if x < 0.0 { 0 } else { n - 1 };
            cell[node] = ratio[line_start + edge * stride] * target;
            continue;
        }
        let base = ((x.floor() as isize) - 1).clamp(0, n as isize - 4) as usize;
        let t = x - base as f64;
        let mut value = 0.0;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for k in 0..4 {
            let mut w = 1.0;
            for j in 0..4 {
                if j != k {
                    w *= (t - j as f64) / (k as f64 - j as f64);
                }
            }
            let r = ratio[line_start + (base + k) * stride];
            value += w * r;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        cell[node] = value.clamp(lo, hi) * target;
    }
    Ok(())
}

/// One Strang step.
pub fn step_vpb(state: &KineticState, spatial: &SpatialGrid, collision: &CollisionOperator, opts: &KineticOptions) -> Result<KineticState> {
    KineticSolver::new(spatial, collision, opts)?.step(state).map(|(s, _)| s)
}

pub fn run_vpb(
    initial: &KineticState,
    t_end: f64,
    store_every: usize,
    spatial: &SpatialGrid,
    collision: &CollisionOperator,
    opts: &KineticOptions,
) -> Result<KineticTrajectory> {
    KineticSolver::new(spatial, collision, opts)?.run(initial, t_end, store_every)
}

#[cfg(test)]
mod tests;
