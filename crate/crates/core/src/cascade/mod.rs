//! Hilbert expansion `F = μ + εF₁ + ε²F₂ + ...`, `φ = φ₀ + εφ₁ + ...` around an
//! Euler–Poisson background.
//!
//! Each `F_n` splits into a hydrodynamic part carried by `U_n = (ρ_n, u_n, θ_n)`
//! and a microscopic part obtained from `L⁻¹` applied to the order-`n-1`
//! residual. `U_n` solves a linear symmetric hyperbolic system coupled to a
//! screened Poisson equation for `φ_n`, integrated with RK4 whose stages read
//! sources on a half-step grid.

mod background;
mod phase;
mod system;
mod taylor;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

pub use background::BackgroundSlice;
pub use phase::{hydro_samples, stress_and_heat_flux, velocity_gradient};
pub use system::{assemble_matrices, cell_rate, SystemMatrices};
pub use taylor::{exp_taylor_coeffs, taylor_remainder};

use crate::collision::{CollisionOperator, LinearizedOperator};
use crate::error::{Error, Result};
use crate::euler::Trajectory;
use crate::grid::{SpatialGrid, VelocityGrid};
use crate::maxwellian::eval_local_maxwellian;
use crate::parallel;
use crate::poisson::{EllipticSolveOptions, EllipticSolver};
use crate::spectral::Spectral;
use phase::{hydro_jet, spatial_derivative, CellJetInput};

const TIME_TOL: f64 = 1e-9;

/// Largest `dt k_max λ_max` accepted; RK4 is stable on the imaginary axis up to 2√2.
const CFL_LIMIT: f64 = 2.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeOptions {
    /// `k`: orders `F_0..F_{2k-1}` are kept.
    pub order: usize,
    pub dt: f64,
    pub t_end: f64,
    /// Largest relative hydrodynamic component tolerated in an `L⁻¹` argument.
    pub leakage_limit: f64,
    pub elliptic: EllipticSolveOptions,
}

impl CascadeOptions {
    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(Error::config("cascade.order", "must be at least 1"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::config("cascade.dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::config("cascade.t_end", format!("must be positive, got {}", self.t_end)));
        }
        let steps = (self.t_end / self.dt).round();
        if steps < 1.0 || (steps * self.dt - self.t_end).abs() > TIME_TOL * self.t_end.max(1.0) {
            return Err(Error::config(
                "cascade.dt",
                format!("{} does not divide t_end = {}", self.dt, self.t_end),
            ));
        }
        if !(self.leakage_limit > 0.0) {
            return Err(Error::config("cascade.leakage_limit", "must be positive"));
        }
        self.elliptic.validate()
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    /// Number of corrections `F_1..F_{2k-1}`.
    pub fn num_orders(&self) -> usize {
        2 * self.order - 1
    }
}

/// `(ρ_n, u_n, θ_n)`, their rates and `φ_n` on every half-step node.
#[derive(Debug, Clone, Default)]
struct OrderTrack {
    u: Vec<Vec<[f64; 5]>>,
    rate: Vec<Vec<[f64; 5]>>,
    phi: Vec<Vec<f64>>,
}

#[derive(Debug)]
struct MicroEntry {
    /// `√μ (I - P)(F_n/√μ)`, cell-major.
    phase: Vec<f64>,
    leakage: f64,
}

/// Microscopic part of `F_n` at one time.
#[derive(Debug, Clone)]
pub struct MicroPart {
    /// `g_n = (I - P)(F_n/√μ)`, cell-major.
    pub g: Vec<f64>,
    /// `√μ g_n`.
    pub phase: Vec<f64>,
    /// Largest per-cell relative hydrodynamic component removed before `L⁻¹`.
    pub leakage: f64,
}

/// Forcing of the `U_n` system per cell.
#[derive(Debug, Clone)]
pub struct MacroSources {
    pub momentum: Vec<[f64; 3]>,
    pub energy: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct MacroSlice {
    pub rho: Vec<f64>,
    pub u: Vec<[f64; 3]>,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
}

/// `F_trunc = Σ εⁿ F_n` and `φ_trunc = Σ εⁿ φ_n`.
#[derive(Debug, Clone)]
pub struct Truncation {
    pub f: Vec<f64>,
    pub phi: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CascadeReport {
    pub order: usize,
    pub dt: f64,
    pub steps: usize,
    /// Largest leakage met while forming `F_n`, `n = 1, 2, ...`.
    pub max_leakage: Vec<f64>,
    /// `‖U_n‖ + ‖∇φ_n‖ + ‖φ_n‖` at every full step, per order.
    pub growth: Vec<Vec<f64>>,
}

struct StepContext {
    matrices: Vec<SystemMatrices>,
    forcing: Vec<[f64; 5]>,
    screen: Vec<f64>,
    /// `e^{φ₀}(A_n - φ_n)`.
    offset: Vec<f64>,
}

pub struct ExpansionSet {
    opts: CascadeOptions,
    spatial: SpatialGrid,
    velocity: VelocityGrid,
    spectral: Spectral,
    elliptic: EllipticSolver,
    collision: CollisionOperator,
    background: Trajectory,
    tracks: Vec<OrderTrack>,
    growth: Vec<Vec<f64>>,
    micro_memo: Mutex<HashMap<(usize, usize), Arc<MicroEntry>>>,
    bg_memo: Mutex<HashMap<usize, Arc<BackgroundSlice>>>,
    leakage: Mutex<Vec<f64>>,
}

impl std::fmt::Debug for ExpansionSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExpansionSet")
            .field("opts", &self.opts)
            .field("solved", &self.tracks.len())
            .finish()
    }
}

impl ExpansionSet {
    /// Sets up the expansion without solving any order.
    pub fn new(background: Trajectory, collision: &CollisionOperator, opts: CascadeOptions) -> Result<Self> {
        opts.validate()?;
        if background.start_time() > TIME_TOL || background.end_time() < opts.t_end - TIME_TOL {
            return Err(Error::InvalidInput(format!(
                "background covers [{}, {}], cascade needs [0, {}]",
                background.start_time(),
                background.end_time(),
                opts.t_end
            )));
        }
        let spatial = background.grid.clone();
        let n = spatial.cells_per_axis();
        let k_max = 2.0 * std::f64::consts::PI * (n / 2).saturating_sub(1) as f64 / spatial.length();
        let speed = background
            .states
            .iter()
            .flat_map(|s| {
                s.u.iter().zip(&s.theta).map(|(u, th)| {
                    (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt() + (5.0 / 3.0 * th).sqrt()
                })
            })
            .fold(0.0, f64::max);
        let stiffness = (spatial.dim() as f64).sqrt() * k_max * speed;
        if opts.dt * stiffness > CFL_LIMIT {
            return Err(Error::Cfl {
                dt: opts.dt,
                limit: CFL_LIMIT / stiffness,
            });
        }
        Ok(Self {
            spectral: Spectral::new(&spatial),
            elliptic: EllipticSolver::new(&spatial, &opts.elliptic)?,
            velocity: collision.grid().clone(),
            collision: collision.clone(),
            spatial,
            background,
            tracks: Vec::new(),
            growth: Vec::new(),
            micro_memo: Mutex::new(HashMap::new()),
            bg_memo: Mutex::new(HashMap::new()),
            leakage: Mutex::new(vec![0.0; opts.num_orders()]),
            opts,
        })
    }

    /// Sets up and solves every order.
    pub fn build(background: Trajectory, collision: &CollisionOperator, opts: CascadeOptions) -> Result<Self> {
        let mut set = Self::new(background, collision, opts)?;
        while set.solved_orders() < set.opts.num_orders() {
            set.solve_next_order()?;
        }
        Ok(set)
    }

    pub fn options(&self) -> &CascadeOptions {
        &self.opts
    }

    pub fn spatial_grid(&self) -> &SpatialGrid {
        &self.spatial
    }

    pub fn velocity_grid(&self) -> &VelocityGrid {
        &self.velocity
    }

    pub fn background(&self) -> &Trajectory {
        &self.background
    }

    pub fn solved_orders(&self) -> usize {
        self.tracks.len()
    }

    pub fn half_step(&self) -> f64 {
        0.5 * self.opts.dt
    }

    fn last_node(&self) -> usize {
        2 * self.opts.steps()
    }

    /// Index of `t` on the half-step grid.
    pub fn node_index(&self, t: f64) -> Result<usize> {
        let tau = self.half_step();
        let j = (t / tau).round();
        if j < 0.0 || j > self.last_node() as f64 || (t - j * tau).abs() > TIME_TOL {
            return Err(Error::InvalidInput(format!(
                "t = {t} is not a multiple of the half step {tau} within [0, {}]",
                self.opts.t_end
            )));
        }
        Ok(j as usize)
    }

    pub fn report(&self) -> CascadeReport {
        CascadeReport {
            order: self.opts.order,
            dt: self.opts.dt,
            steps: self.opts.steps(),
            max_leakage: self.leakage.lock().unwrap()[..self.tracks.len().max(1).min(self.opts.num_orders())].to_vec(),
            growth: self.growth.clone(),
        }
    }

    fn background_at(&self, j: usize) -> Result<Arc<BackgroundSlice>> {
        if let Some(b) = self.bg_memo.lock().unwrap().get(&j) {
            return Ok(b.clone());
        }
        let slice = Arc::new(BackgroundSlice::at(
            &self.background,
            &self.spectral,
            j as f64 * self.half_step(),
        )?);
        self.bg_memo.lock().unwrap().insert(j, slice.clone());
        Ok(slice)
    }

    fn evict_before(&self, j: usize) {
        self.micro_memo.lock().unwrap().retain(|k, _| k.1 >= j);
        self.bg_memo.lock().unwrap().retain(|k, _| *k >= j);
    }

    fn check_order(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.opts.num_orders() || n > self.tracks.len() + 1 {
            return Err(Error::InvalidInput(format!(
                "order {n} is not available ({} of {} solved)",
                self.tracks.len(),
                self.opts.num_orders()
            )));
        }
        Ok(())
    }

    fn micro(&self, n: usize, j: usize) -> Result<Arc<MicroEntry>> {
        self.check_order(n)?;
        if let Some(e) = self.micro_memo.lock().unwrap().get(&(n, j)) {
            return Ok(e.clone());
        }
        let entry = Arc::new(self.compute_micro(n, j)?);
        self.micro_memo.lock().unwrap().insert((n, j), entry.clone());
        let mut leak = self.leakage.lock().unwrap();
        leak[n - 1] = leak[n - 1].max(entry.leakage);
        Ok(entry)
    }

    /// `∂_t` of the microscopic part of `F_m` at node `j`: centred inside,
    /// one-sided second order at the ends.
    fn micro_time_derivative(&self, m: usize, j: usize) -> Result<Vec<f64>> {
        let last = self.last_node();
        let (nodes, weights): ([usize; 3], [f64; 3]) = if j == 0 {
            ([0, 1, 2], [-3.0, 4.0, -1.0])
        } else if j == last {
            ([last, last - 1, last - 2], [3.0, -4.0, 1.0])
        } else {
            ([j - 1, j, j + 1], [-1.0, 0.0, 1.0])
        };
        let scale = 1.0 / (2.0 * self.half_step());
        let mut out = vec![0.0; self.spatial.num_cells() * self.velocity.num_nodes()];
        for (node, w) in nodes.iter().zip(weights) {
            if w == 0.0 {
                continue;
            }
            let e = self.micro(m, *node)?;
            out.iter_mut().zip(&e.phase).for_each(|(o, x)| *o += w * scale * x);
        }
        Ok(out)
    }

    /// `grad[a][cell][k] = ∂_a U_n^k`.
    fn coefficient_gradient(&self, u: &[[f64; 5]]) -> [Vec<[f64; 5]>; 3] {
        let comps: [Vec<f64>; 5] = std::array::from_fn(|k| u.iter().map(|x| x[k]).collect());
        let grads: [[Vec<f64>; 3]; 5] = std::array::from_fn(|k| self.spectral.gradient(&comps[k]));
        std::array::from_fn(|a| (0..u.len()).map(|c| std::array::from_fn(|k| grads[k][a][c])).collect())
    }

    fn phi_gradient(&self, i: usize, j: usize, bg: &BackgroundSlice) -> [Vec<f64>; 3] {
        if i == 0 {
            bg.grad_phi.clone()
        } else {
            self.spectral.gradient(&self.tracks[i - 1].phi[j])
        }
    }

    /// Microscopic part of `F_n` from `L(F_n/√μ) = -S_{n-1}/√μ`, with
    /// `S_m = ∂_t F_m + v·∇_x F_m - Σ_{i+l=m} ∇φ_i·∇_v F_l - Σ_{i+l=m+1, i,l≥1} Q(F_i, F_l)`.
    fn compute_micro(&self, n: usize, j: usize) -> Result<MicroEntry> {
        let m = n - 1;
        let bg = self.background_at(j)?;
        let nv = self.velocity.num_nodes();
        let dim = self.spatial.dim();
        let lower: Vec<Arc<MicroEntry>> = (1..=m).map(|l| self.micro(l, j)).collect::<Result<_>>()?;
        let (micro_dt, micro_dx) = if m >= 1 {
            let dx: Vec<Vec<f64>> = (0..dim)
                .map(|a| spatial_derivative(&lower[m - 1].phase, nv, &self.spectral, a))
                .collect();
            (self.micro_time_derivative(m, j)?, dx)
        } else {
            (Vec::new(), Vec::new())
        };
        let grad_um = if m >= 1 {
            Some(self.coefficient_gradient(&self.tracks[m - 1].u[j]))
        } else {
            None
        };
        let phi_grad: Vec<[Vec<f64>; 3]> = (0..=m).map(|i| self.phi_gradient(i, j, &bg)).collect();
        let nodes = self.velocity.nodes();
        let limit = self.opts.leakage_limit;

        let per_cell = |c: usize| -> Result<(Vec<f64>, f64)> {
            let params = bg.params(c)?;
            let bgc = [bg.rho[c], bg.u[c][0], bg.u[c][1], bg.u[c][2], bg.theta[c]];
            let bg_dt = [bg.dt_rho[c], bg.dt_u[c][0], bg.dt_u[c][1], bg.dt_u[c][2], bg.dt_theta[c]];
            let bg_dx: [[f64; 5]; 3] = std::array::from_fn(|a| {
                let du = bg.grad_u[a][c];
                [bg.grad_rho[a][c], du[0], du[1], du[2], bg.grad_theta[a][c]]
            });
            let cell = c * nv..(c + 1) * nv;
            let mut s = vec![0.0; nv];
            let mut values: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
            for l in 0..=m {
                let coeff = (l >= 1).then(|| {
                    let t = &self.tracks[l - 1];
                    match (&grad_um, l == m) {
                        (Some(g), true) => (t.u[j][c], t.rate[j][c], std::array::from_fn(|a| g[a][c])),
                        _ => (t.u[j][c], [0.0; 5], [[0.0; 5]; 3]),
                    }
                });
                let jet = hydro_jet(&CellJetInput { bg: bgc, bg_dt, bg_dx, coeff }, &self.velocity, dim);
                let mut dv = jet.dv;
                let mut value = jet.value;
                if l >= 1 {
                    let micro = &lower[l - 1].phase[cell.clone()];
                    let fd = velocity_gradient(micro, &self.velocity);
                    for b in 0..3 {
                        dv[b].iter_mut().zip(&fd[b]).for_each(|(x, y)| *x += y);
                    }
                    value.iter_mut().zip(micro).for_each(|(x, y)| *x += y);
                }
                if l == m {
                    for i in 0..nv {
                        let v = nodes[i];
                        let mut x = jet.dt[i];
                        for a in 0..dim {
                            x += v[a] * jet.dx[a][i];
                        }
                        if m >= 1 {
                            x += micro_dt[c * nv + i];
                            for a in 0..dim {
                                x += v[a] * micro_dx[a][c * nv + i];
                            }
                        }
                        s[i] += x;
                    }
                }
                let gp = &phi_grad[m - l];
                for b in 0..3 {
                    let g = gp[b][c];
                    if g != 0.0 {
                        s.iter_mut().zip(&dv[b]).for_each(|(x, d)| *x -= g * d);
                    }
                }
                values.push(value);
            }
            for i in 1..n {
                let q = self.collision.bilinear(&values[i], &values[n - i], &params)?;
                s.iter_mut().zip(&q).for_each(|(x, y)| *x -= y);
            }
            let op = LinearizedOperator::new(&params, &self.collision)?;
            let basis = op.basis();
            let sqrt_mu = basis.sqrt_mu();
            let mut r: Vec<f64> = s
                .iter()
                .zip(sqrt_mu)
                .map(|(x, w)| if *w > 0.0 { -x / w } else { 0.0 })
                .collect();
            let norm = self.velocity.norm(&r);
            let leakage = if norm > 0.0 {
                self.velocity.norm(&basis.combine(&basis.coefficients(&r))) / norm
            } else {
                0.0
            };
            if leakage > limit {
                return Err(Error::CascadeInconsistency { leakage, limit });
            }
            basis.remove_hydro(&mut r);
            let (g, _) = op.invert(&r)?;
            Ok((g.iter().zip(sqrt_mu).map(|(a, b)| a * b).collect(), leakage))
        };
        let mut phase = Vec::with_capacity(self.spatial.num_cells() * nv);
        let mut leakage: f64 = 0.0;
        for part in parallel::map_range(self.spatial.num_cells(), per_cell) {
            let (p, l) = part?;
            phase.extend(p);
            leakage = leakage.max(l);
        }
        Ok(MicroEntry { phase, leakage })
    }

    fn sources_at(&self, n: usize, j: usize) -> Result<MacroSources> {
        let micro = self.micro(n, j)?;
        let bg = self.background_at(j)?;
        let nv = self.velocity.num_nodes();
        let cells = self.spatial.num_cells();
        let dim = self.spatial.dim();
        let moments: Vec<([[f64; 3]; 3], [f64; 3])> = (0..cells)
            .map(|c| stress_and_heat_flux(&micro.phase[c * nv..(c + 1) * nv], bg.u[c], bg.theta[c], &self.velocity))
            .collect();
        let mut momentum = vec![[0.0; 3]; cells];
        let mut energy = vec![0.0; cells];
        for a in 0..dim {
            for i in 0..3 {
                let tau: Vec<f64> = moments.iter().map(|(t, _)| t[i][a]).collect();
                let d = self.spectral.derivative(&tau, a);
                momentum.iter_mut().zip(d).for_each(|(f, x)| f[i] -= x);
            }
            let flux: Vec<f64> = moments
                .iter()
                .zip(&bg.u)
                .map(|((t, q), u)| q[a] + 2.0 * (0..3).map(|k| u[k] * t[a][k]).sum::<f64>())
                .collect();
            let d = self.spectral.derivative(&flux, a);
            energy.iter_mut().zip(d).for_each(|(g, x)| *g -= x);
        }
        let couplings: Vec<(usize, [Vec<f64>; 3])> = (1..n).map(|a| (n - a, self.phi_gradient(a, j, &bg))).collect();
        for (b, gphi) in &couplings {
            let ub = &self.tracks[b - 1].u[j];
            for c in 0..cells {
                for i in 0..3 {
                    momentum[c][i] -= ub[c][0] * gphi[i][c];
                }
            }
        }
        for c in 0..cells {
            energy[c] -= 2.0 * (0..3).map(|i| bg.u[c][i] * momentum[c][i]).sum::<f64>();
        }
        for (b, gphi) in &couplings {
            let ub = &self.tracks[b - 1].u[j];
            for c in 0..cells {
                for i in 0..3 {
                    energy[c] -= (bg.rho[c] * ub[c][1 + i] + ub[c][0] * bg.u[c][i]) * gphi[i][c];
                }
            }
        }
        Ok(MacroSources { momentum, energy })
    }

    fn context(&self, n: usize, j: usize) -> Result<StepContext> {
        let bg = self.background_at(j)?;
        let sources = self.sources_at(n, j)?;
        let cells = self.spatial.num_cells();
        let mut phis: Vec<Vec<f64>> = vec![bg.phi.clone()];
        phis.extend((1..n).map(|i| self.tracks[i - 1].phi[j].clone()));
        phis.push(vec![0.0; cells]);
        let a = exp_taylor_coeffs(&phis)?;
        let screen: Vec<f64> = bg.phi.iter().map(|p| p.exp()).collect();
        let offset = screen.iter().zip(&a[n]).map(|(e, x)| e * x).collect();
        Ok(StepContext {
            matrices: (0..cells).map(|c| assemble_matrices(&bg, c)).collect(),
            forcing: (0..cells)
                .map(|c| {
                    let f = sources.momentum[c];
                    [0.0, f[0], f[1], f[2], sources.energy[c] / (2.0 * bg.theta[c])]
                })
                .collect(),
            screen,
            offset,
        })
    }

    fn rhs(&self, ctx: &StepContext, u: &[[f64; 5]]) -> Result<(Vec<[f64; 5]>, Vec<f64>)> {
        let rhs: Vec<f64> = u.iter().zip(&ctx.offset).map(|(x, o)| x[0] - o).collect();
        let (phi, _) = self.elliptic.solve_screened(&ctx.screen, &rhs)?;
        let gphi = self.spectral.gradient(&phi);
        let du = self.coefficient_gradient(u);
        let dim = self.spatial.dim();
        let rate = (0..u.len())
            .map(|c| {
                let d = [du[0][c], du[1][c], du[2][c]];
                cell_rate(&ctx.matrices[c], &u[c], &d, [gphi[0][c], gphi[1][c], gphi[2][c]], &ctx.forcing[c], dim)
            })
            .collect();
        Ok((rate, phi))
    }

    fn size(&self, u: &[[f64; 5]], phi: &[f64]) -> f64 {
        let flat: Vec<f64> = u.iter().flatten().copied().collect();
        let grad: Vec<f64> = self.spectral.gradient(phi).into_iter().flatten().collect();
        self.spatial.l2_norm(&flat) + self.spatial.l2_norm(&grad) + self.spatial.l2_norm(phi)
    }

    /// Solves for `U_n` and `φ_n`, `n` one above the last solved order.
    pub fn solve_next_order(&mut self) -> Result<()> {
        let n = self.tracks.len() + 1;
        if n > self.opts.num_orders() {
            return Err(Error::InvalidInput("every order is already solved".into()));
        }
        let steps = self.opts.steps();
        let dt = self.opts.dt;
        let cells = self.spatial.num_cells();
        let lookback = self.opts.num_orders() + 1;
        let mut track = OrderTrack::default();
        let mut growth = Vec::with_capacity(steps + 1);
        let axpy = |u: &[[f64; 5]], k: &[[f64; 5]], h: f64| -> Vec<[f64; 5]> {
            u.iter()
                .zip(k)
                .map(|(a, b)| std::array::from_fn(|r| a[r] + h * b[r]))
                .collect()
        };

        let mut u = vec![[0.0; 5]; cells];
        let (mut k1, phi) = self.rhs(&self.context(n, 0)?, &u)?;
        growth.push(self.size(&u, &phi));
        track.u.push(u.clone());
        track.rate.push(k1.clone());
        track.phi.push(phi);
        for i in 0..steps {
            let (jm, je) = (2 * i + 1, 2 * i + 2);
            self.evict_before(jm.saturating_sub(lookback));
            let mid = self.context(n, jm)?;
            let end = self.context(n, je)?;
            let (k2, _) = self.rhs(&mid, &axpy(&u, &k1, 0.5 * dt))?;
            let (k3, _) = self.rhs(&mid, &axpy(&u, &k2, 0.5 * dt))?;
            let (k4, _) = self.rhs(&end, &axpy(&u, &k3, dt))?;
            let next: Vec<[f64; 5]> = (0..cells)
                .map(|c| std::array::from_fn(|r| u[c][r] + dt / 6.0 * (k1[c][r] + 2.0 * k2[c][r] + 2.0 * k3[c][r] + k4[c][r])))
                .collect();
            let (d_next, phi_next) = self.rhs(&end, &next)?;
            let half: Vec<[f64; 5]> = (0..cells)
                .map(|c| std::array::from_fn(|r| 0.5 * (u[c][r] + next[c][r]) + dt / 8.0 * (k1[c][r] - d_next[c][r])))
                .collect();
            let (d_half, phi_half) = self.rhs(&mid, &half)?;
            let size = self.size(&next, &phi_next);
            if !size.is_finite() {
                return Err(Error::NonFinite {
                    what: format!("cascade order {n}"),
                    time: je as f64 * self.half_step(),
                });
            }
            growth.push(size);
            track.u.push(half);
            track.rate.push(d_half);
            track.phi.push(phi_half);
            track.u.push(next.clone());
            track.rate.push(d_next.clone());
            track.phi.push(phi_next);
            u = next;
            k1 = d_next;
        }
        self.tracks.push(track);
        self.growth.push(growth);
        self.micro_memo.lock().unwrap().clear();
        Ok(())
    }

    fn check_solved(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.tracks.len() {
            return Err(Error::InvalidInput(format!(
                "order {n} is not solved ({} available)",
                self.tracks.len()
            )));
        }
        Ok(())
    }

    pub fn microscopic_part(&self, n: usize, t: f64) -> Result<MicroPart> {
        let j = self.node_index(t)?;
        self.evict_before(j.saturating_sub(self.opts.num_orders() + 1));
        let e = self.micro(n, j)?;
        let bg = self.background_at(j)?;
        let nv = self.velocity.num_nodes();
        let mut g = e.phase.clone();
        for (c, chunk) in g.chunks_mut(nv).enumerate() {
            let mu = eval_local_maxwellian(&bg.params(c)?, &self.velocity);
            chunk.iter_mut().zip(mu).for_each(|(x, w)| *x = if w > 0.0 { *x / w.sqrt() } else { 0.0 });
        }
        Ok(MicroPart {
            g,
            phase: e.phase.clone(),
            leakage: e.leakage,
        })
    }

    pub fn macro_sources(&self, n: usize, t: f64) -> Result<MacroSources> {
        let j = self.node_index(t)?;
        self.sources_at(n, j)
    }

    pub fn macroscopic(&self, n: usize, t: f64) -> Result<MacroSlice> {
        self.check_solved(n)?;
        let j = self.node_index(t)?;
        let track = &self.tracks[n - 1];
        Ok(MacroSlice {
            rho: track.u[j].iter().map(|x| x[0]).collect(),
            u: track.u[j].iter().map(|x| [x[1], x[2], x[3]]).collect(),
            theta: track.u[j].iter().map(|x| x[4]).collect(),
            phi: track.phi[j].clone(),
        })
    }

    /// `φ_n` at `t`; `n = 0` is the background potential.
    pub fn potential(&self, n: usize, t: f64) -> Result<Vec<f64>> {
        let j = self.node_index(t)?;
        if n == 0 {
            return Ok(self.background_at(j)?.phi.clone());
        }
        self.check_solved(n)?;
        Ok(self.tracks[n - 1].phi[j].clone())
    }

    /// The phase field `F_n` at `t`, cell-major; `n = 0` gives `μ`.
    pub fn phase(&self, n: usize, t: f64) -> Result<Vec<f64>> {
        let j = self.node_index(t)?;
        let bg = self.background_at(j)?;
        let nv = self.velocity.num_nodes();
        let mut out = Vec::with_capacity(self.spatial.num_cells() * nv);
        if n == 0 {
            for c in 0..bg.num_cells() {
                out.extend(eval_local_maxwellian(&bg.params(c)?, &self.velocity));
            }
            return Ok(out);
        }
        self.check_solved(n)?;
        let micro = self.micro(n, j)?;
        for (c, u) in self.tracks[n - 1].u[j].iter().enumerate() {
            let bgc = [bg.rho[c], bg.u[c][0], bg.u[c][1], bg.u[c][2], bg.theta[c]];
            let hydro = hydro_samples(&bgc, u, &self.velocity);
            out.extend(hydro.iter().zip(&micro.phase[c * nv..(c + 1) * nv]).map(|(a, b)| a + b));
        }
        Ok(out)
    }

    /// `F_trunc` and `φ_trunc` at `t`; needs every order solved.
    pub fn assemble(&self, epsilon: f64, t: f64) -> Result<Truncation> {
        if self.tracks.len() < self.opts.num_orders() {
            return Err(Error::InvalidInput("assemble needs every order solved".into()));
        }
        let j = self.node_index(t)?;
        self.evict_before(j.saturating_sub(self.opts.num_orders() + 1));
        let phases: Vec<Vec<f64>> = (0..=self.opts.num_orders()).map(|n| self.phase(n, t)).collect::<Result<_>>()?;
        let potentials: Vec<Vec<f64>> =
            (0..=self.opts.num_orders()).map(|n| self.potential(n, t)).collect::<Result<_>>()?;
        Ok(Truncation {
            f: power_sum(epsilon, &phases),
            phi: power_sum(epsilon, &potentials),
        })
    }
}

/// `Σ εⁿ terms[n]`.
pub fn power_sum(epsilon: f64, terms: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; terms.first().map_or(0, |t| t.len())];
    for term in terms.iter().rev() {
        out.iter_mut().zip(term).for_each(|(o, x)| *o = *o * epsilon + x);
    }
    out
}

#[cfg(test)]
mod tests;
