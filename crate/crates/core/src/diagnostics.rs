//! Remainder extraction `R = ε^{-k}(F - Σ_{i<2k} εⁱF_i)`, its weighted norms,
//! and the ε-sweep that measures how fast the kinetic solution approaches the
//! fluid limit.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::cascade::{ExpansionSet, Truncation};
use crate::collision::CollisionOperator;
use crate::error::{check_len, Error, Result};
use crate::grid::{SpatialGrid, VelocityGrid};
use crate::kinetic::{KineticOptions, KineticSolver, KineticState, StepLedger};
use crate::maxwellian::{GlobalMaxwellian, WeightConfig};
use crate::poisson::{gradient, LaplacianStencil};

/// The remainder in its three scalings plus the potential remainder.
#[derive(Debug, Clone, PartialEq)]
pub struct RemainderFields {
    pub r: Vec<f64>,
    /// `R/√μ`, zero where `μ` underflows.
    pub f: Vec<f64>,
    /// `w R/√μ_M`.
    pub h: Vec<f64>,
    pub phi_r: Vec<f64>,
    pub k: usize,
    pub epsilon: f64,
}

impl RemainderFields {
    /// Splits `(F, φ)` against an assembled truncation. `mu` is the leading
    /// order `F_0` on the same phase grid.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        f_eps: &[f64],
        phi_eps: &[f64],
        truncation: &Truncation,
        mu: &[f64],
        global: &GlobalMaxwellian,
        weight: &WeightConfig,
        velocity: &VelocityGrid,
        epsilon: f64,
        k: usize,
    ) -> Result<Self> {
        check_len(truncation.f.len(), f_eps.len())?;
        check_len(truncation.f.len(), mu.len())?;
        check_len(truncation.phi.len(), phi_eps.len())?;
        let nv = velocity.num_nodes();
        if nv == 0 || f_eps.len() % nv != 0 {
            return Err(Error::InvalidGrid(format!(
                "phase field of {} values does not fit {nv} velocity nodes",
                f_eps.len()
            )));
        }
        if f_eps.len() / nv != phi_eps.len() {
            return Err(Error::InvalidGrid(format!(
                "{} cells in the phase field but {} in the potential",
                f_eps.len() / nv,
                phi_eps.len()
            )));
        }
        if !(epsilon > 0.0) {
            return Err(Error::InvalidInput(format!("ε must be positive, got {epsilon}")));
        }
        let scale = epsilon.powi(-(k as i32));
        let r: Vec<f64> = f_eps.iter().zip(&truncation.f).map(|(a, b)| (a - b) * scale).collect();
        let f = r
            .iter()
            .zip(mu)
            .map(|(r, m)| if *m > 0.0 { r / m.sqrt() } else { 0.0 })
            .collect();
        let w_over: Vec<f64> = weight
            .eval(velocity)
            .iter()
            .zip(global.eval_sqrt(velocity))
            .map(|(w, s)| w / s)
            .collect();
        let h = r.iter().enumerate().map(|(i, r)| r * w_over[i % nv]).collect();
        let phi_r = phi_eps.iter().zip(&truncation.phi).map(|(a, b)| (a - b) * scale).collect();
        Ok(Self {
            r,
            f,
            h,
            phi_r,
            k,
            epsilon,
        })
    }

    /// Remainder of a kinetic state against the expansion at the state's time.
    pub fn extract(
        state: &KineticState,
        expansion: &ExpansionSet,
        global: &GlobalMaxwellian,
        weight: &WeightConfig,
    ) -> Result<Self> {
        let truncation = expansion.assemble(state.epsilon, state.time)?;
        let mu = expansion.phase(0, state.time)?;
        Self::from_parts(
            &state.f,
            &state.phi,
            &truncation,
            &mu,
            global,
            weight,
            expansion.velocity_grid(),
            state.epsilon,
            expansion.options().order,
        )
    }

    /// `ε^k R + Σ εⁱF_i`.
    pub fn reassemble(&self, truncation: &Truncation) -> Vec<f64> {
        let scale = self.epsilon.powi(self.k as i32);
        self.r.iter().zip(&truncation.f).map(|(r, t)| scale * r + t).collect()
    }
}

/// Weighted sup, derivative and `L²` norms of a remainder.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NormPackage {
    /// `ε^{3/2} ‖(1+|v|)^{2β+1} R/√μ_M‖_∞`.
    pub weighted_sup: f64,
    pub weighted_sup_on_boundary: bool,
    /// `ε^{3/2} ‖∇φ_R‖_∞`.
    pub grad_phi_sup: f64,
    /// `ε^5 ‖∇_{x,v}((1+|v|)^{2β} R/√μ_M)‖_∞`.
    pub weighted_gradient_sup: f64,
    pub weighted_gradient_on_boundary: bool,
    /// `ε^5 ‖∇²φ_R‖_∞`.
    pub hessian_phi_sup: f64,
    pub f_l2: f64,
    pub phi_l2: f64,
    pub grad_phi_l2: f64,
    pub hessian_phi_l2: f64,
    /// Unscaled `‖h‖_∞` and `‖∇_x h‖_∞`.
    pub h_sup: f64,
    pub h_x_gradient_sup: f64,
}

impl NormPackage {
    pub fn entries(&self) -> [(&'static str, f64); 12] {
        [
            ("weighted_sup", self.weighted_sup),
            ("grad_phi_sup", self.grad_phi_sup),
            ("weighted_gradient_sup", self.weighted_gradient_sup),
            ("hessian_phi_sup", self.hessian_phi_sup),
            ("f_l2", self.f_l2),
            ("phi_l2", self.phi_l2),
            ("grad_phi_l2", self.grad_phi_l2),
            ("hessian_phi_l2", self.hessian_phi_l2),
            ("h_sup", self.h_sup),
            ("h_x_gradient_sup", self.h_x_gradient_sup),
            ("weighted_sup_on_boundary", self.weighted_sup_on_boundary as u8 as f64),
            ("weighted_gradient_on_boundary", self.weighted_gradient_on_boundary as u8 as f64),
        ]
    }

    pub fn on_boundary(&self) -> bool {
        self.weighted_sup_on_boundary || self.weighted_gradient_on_boundary
    }

    pub fn is_finite(&self) -> bool {
        self.entries().iter().all(|(_, x)| x.is_finite())
    }

    /// Entrywise maximum; boundary flags are or-ed.
    pub fn max(&self, other: &NormPackage) -> NormPackage {
        NormPackage {
            weighted_sup: self.weighted_sup.max(other.weighted_sup),
            weighted_sup_on_boundary: self.weighted_sup_on_boundary || other.weighted_sup_on_boundary,
            grad_phi_sup: self.grad_phi_sup.max(other.grad_phi_sup),
            weighted_gradient_sup: self.weighted_gradient_sup.max(other.weighted_gradient_sup),
            weighted_gradient_on_boundary: self.weighted_gradient_on_boundary
                || other.weighted_gradient_on_boundary,
            hessian_phi_sup: self.hessian_phi_sup.max(other.hessian_phi_sup),
            f_l2: self.f_l2.max(other.f_l2),
            phi_l2: self.phi_l2.max(other.phi_l2),
            grad_phi_l2: self.grad_phi_l2.max(other.grad_phi_l2),
            hessian_phi_l2: self.hessian_phi_l2.max(other.hessian_phi_l2),
            h_sup: self.h_sup.max(other.h_sup),
            h_x_gradient_sup: self.h_x_gradient_sup.max(other.h_x_gradient_sup),
        }
    }
}

/// `L²` norm over `x` and `v` of a phase field.
pub fn phase_l2(field: &[f64], spatial: &SpatialGrid, velocity: &VelocityGrid) -> f64 {
    (field.iter().map(|x| x * x).sum::<f64>() * velocity.weight() * spatial.cell_volume()).sqrt()
}

/// Largest absolute value and whether it sits on the velocity boundary.
fn phase_sup(field: &[f64], velocity: &VelocityGrid) -> (f64, bool) {
    let nv = velocity.num_nodes();
    let mut best = (0.0, 0);
    for (i, x) in field.iter().enumerate() {
        if x.abs() > best.0 || x.is_nan() {
            best = (x.abs(), i);
        }
    }
    (best.0, best.0 > 0.0 && velocity.on_boundary(best.1 % nv))
}

/// Derivative along velocity axis `axis`: centred inside, second-order one
/// sided at the two ends.
fn velocity_derivative(cell: &[f64], velocity: &VelocityGrid, axis: usize) -> Vec<f64> {
    let n = velocity.nodes_per_axis();
    let stride = [n * n, n, 1][axis];
    let inv = 0.5 / velocity.spacing();
    (0..cell.len())
        .map(|node| {
            let i = velocity.axis_index(node)[axis];
            let at = |j: usize| cell[node - i * stride + j * stride];
            if i == 0 {
                (-3.0 * at(0) + 4.0 * at(1) - at(2)) * inv
            } else if i == n - 1 {
                (3.0 * at(n - 1) - 4.0 * at(n - 2) + at(n - 3)) * inv
            } else {
                (at(i + 1) - at(i - 1)) * inv
            }
        })
        .collect()
}

/// Centred periodic derivative of a phase field along spatial axis `axis`.
fn spatial_phase_derivative(field: &[f64], spatial: &SpatialGrid, nv: usize, axis: usize) -> Vec<f64> {
    let inv = 0.5 / spatial.spacing();
    let mut out = vec![0.0; field.len()];
    for c in 0..spatial.num_cells() {
        let (up, down) = (spatial.shifted(c, axis, 1), spatial.shifted(c, axis, -1));
        for j in 0..nv {
            out[c * nv + j] = (field[up * nv + j] - field[down * nv + j]) * inv;
        }
    }
    out
}

/// Pointwise Euclidean norm of the full `(x, v)` gradient; returns its sup
/// and whether the argmax is on the velocity boundary, plus the sup of the
/// `x` part alone.
fn phase_gradient_sup(field: &[f64], spatial: &SpatialGrid, velocity: &VelocityGrid) -> (f64, bool, f64) {
    let nv = velocity.num_nodes();
    let mut sq = vec![0.0; field.len()];
    let mut x_sq = vec![0.0; field.len()];
    for axis in 0..spatial.dim() {
        let d = spatial_phase_derivative(field, spatial, nv, axis);
        for (i, x) in d.iter().enumerate() {
            x_sq[i] += x * x;
        }
    }
    for (c, chunk) in field.chunks(nv).enumerate() {
        for axis in 0..3 {
            let d = velocity_derivative(chunk, velocity, axis);
            for (j, x) in d.iter().enumerate() {
                sq[c * nv + j] += x * x;
            }
        }
    }
    sq.iter_mut().zip(&x_sq).for_each(|(s, x)| *s += x);
    let norm: Vec<f64> = sq.iter().map(|s| s.sqrt()).collect();
    let (sup, flag) = phase_sup(&norm, velocity);
    let x_sup = x_sq.iter().fold(0.0_f64, |m, s| m.max(s.sqrt()));
    (sup, flag, x_sup)
}

/// Second derivatives `∂_a∂_b φ` for the active axes. Diagonal entries use
/// the Poisson stencil; mixed ones apply the matching gradient twice.
pub fn hessian(field: &[f64], grid: &SpatialGrid, stencil: LaplacianStencil) -> Vec<Vec<f64>> {
    let dim = grid.dim();
    let first = gradient(field, grid, stencil);
    let h2 = grid.spacing() * grid.spacing();
    let mut out = Vec::with_capacity(dim * dim);
    for a in 0..dim {
        let second = gradient(&first[a], grid, stencil);
        for b in 0..dim {
            if a == b && stencil == LaplacianStencil::Centered {
                out.push(
                    (0..field.len())
                        .map(|c| (field[grid.shifted(c, a, 1)] - 2.0 * field[c] + field[grid.shifted(c, a, -1)]) / h2)
                        .collect(),
                );
            } else {
                out.push(second[b].clone());
            }
        }
    }
    out
}

fn pointwise_norm(components: &[Vec<f64>], n: usize) -> Vec<f64> {
    (0..n).map(|i| components.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt()).collect()
}

/// The remainder norms at one instant.
pub fn norm_package(
    rem: &RemainderFields,
    spatial: &SpatialGrid,
    velocity: &VelocityGrid,
    global: &GlobalMaxwellian,
    beta: f64,
    stencil: LaplacianStencil,
) -> Result<NormPackage> {
    WeightConfig::new(beta)?;
    let nv = velocity.num_nodes();
    check_len(spatial.num_cells() * nv, rem.r.len())?;
    check_len(spatial.num_cells(), rem.phi_r.len())?;
    let eps = rem.epsilon;
    let sqrt_mu_m = global.eval_sqrt(velocity);
    let radial: Vec<f64> = velocity
        .nodes()
        .iter()
        .map(|v| 1.0 + (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt())
        .collect();
    let scaled = |power: f64| -> Vec<f64> {
        rem.r
            .iter()
            .enumerate()
            .map(|(i, r)| r * radial[i % nv].powf(power) / sqrt_mu_m[i % nv])
            .collect()
    };
    let (sup, sup_flag) = phase_sup(&scaled(2.0 * beta + 1.0), velocity);
    let (grad_sup, grad_flag, _) = phase_gradient_sup(&scaled(2.0 * beta), spatial, velocity);
    let (h_sup, _) = phase_sup(&rem.h, velocity);
    let (_, _, h_x) = phase_gradient_sup(&rem.h, spatial, velocity);

    let n = spatial.num_cells();
    let grad_phi = gradient(&rem.phi_r, spatial, stencil);
    let grad_norm = pointwise_norm(&grad_phi[..spatial.dim()], n);
    let hess_norm = pointwise_norm(&hessian(&rem.phi_r, spatial, stencil), n);
    let sup_of = |v: &[f64]| v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    Ok(NormPackage {
        weighted_sup: eps.powf(1.5) * sup,
        weighted_sup_on_boundary: sup_flag,
        grad_phi_sup: eps.powf(1.5) * sup_of(&grad_norm),
        weighted_gradient_sup: eps.powi(5) * grad_sup,
        weighted_gradient_on_boundary: grad_flag,
        hessian_phi_sup: eps.powi(5) * sup_of(&hess_norm),
        f_l2: phase_l2(&rem.f, spatial, velocity),
        phi_l2: spatial.l2_norm(&rem.phi_r),
        grad_phi_l2: spatial.l2_norm(&grad_norm),
        hessian_phi_l2: spatial.l2_norm(&hess_norm),
        h_sup,
        h_x_gradient_sup: h_x,
    })
}

/// Least-squares power law `value ≈ e^intercept · ε^slope`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// 95% Student-t interval for the slope.
    pub slope_ci: [f64; 2],
}

pub fn fit_order(points: &[(f64, f64)]) -> Result<OrderFit> {
    if points.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "an order fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if let Some((e, v)) = points.iter().find(|(e, v)| !(*e > 0.0 && *v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidInput(format!(
            "order fits need positive values, got ({e}, {v})"
        )));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|(e, v)| (e.ln(), v.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InvalidInput("order fit needs distinct ε values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = logs.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    let dof = n - 2.0;
    let se = (sse / dof / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, dof)
        .map_err(|e| Error::InvalidInput(e.to_string()))?
        .inverse_cdf(0.975);
    Ok(OrderFit {
        slope,
        intercept,
        r_squared,
        slope_ci: [slope - t * se, slope + t * se],
    })
}

/// Intercept of the straight-line fit `value ≈ a + bε`: what the deviation
/// tends to as ε → 0 on the given grids.
pub fn discretization_floor(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    my - sxy / sxx * mx
}

/// Checks an ε list: at least three distinct positive values, halving
/// from one to the next once sorted.
pub fn validate_epsilons(epsilons: &[f64]) -> Result<Vec<f64>> {
    if epsilons.len() < 3 {
        return Err(Error::config(
            "kinetic.epsilons",
            format!("need ≥ 3 epsilons, got {}", epsilons.len()),
        ));
    }
    if let Some(bad) = epsilons.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::config("kinetic.epsilons", format!("ε must be positive, got {bad}")));
    }
    let mut sorted = epsilons.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            return Err(Error::config(
                "kinetic.epsilons",
                format!("duplicate ε {} makes the fit degenerate", w[0]),
            ));
        }
        if ((w[0] / w[1]) - 2.0).abs() > 1e-9 {
            return Err(Error::config(
                "kinetic.epsilons",
                format!("consecutive ε must halve, got {} then {}", w[0], w[1]),
            ));
        }
    }
    Ok(sorted)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepInputs {
    pub epsilons: Vec<f64>,
    pub t_end: f64,
    /// Snapshots every this many kinetic steps enter the sup over time.
    pub store_every: usize,
    pub beta: f64,
    pub kinetic: KineticOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    /// `sup_t ‖F - μ‖_{L²}` over the stored times.
    pub sup_deviation: f64,
    /// Entrywise sup over the stored times.
    pub norms: NormPackage,
    pub steps: usize,
    /// `max_t |mass(t) - mass(0)| / mass(0)`.
    pub mass_drift: f64,
    /// Largest per-step mismatch between the momentum change and the field
    /// work, relative to the mass.
    pub momentum_defect: f64,
    /// Sum of the per-step velocity-truncation mass defects.
    pub velocity_leakage: f64,
    pub clipped_fraction: f64,
    pub ledger: Vec<StepLedger>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub order: usize,
    pub t_end: f64,
    /// Times at which the sups were taken.
    pub stored_times: Vec<f64>,
    /// Rows by decreasing ε.
    pub rows: Vec<SweepRow>,
    pub deviation_fit: OrderFit,
    pub f_fit: OrderFit,
    pub discretization_floor: f64,
    /// `max/min` of `sup_t ‖f‖` across the rows.
    pub f_ratio: f64,
    pub boundary_flags: bool,
    pub note: String,
}

struct RowState {
    state: KineticState,
    deviation: f64,
    norms: Option<NormPackage>,
    mass0: f64,
    clipped: usize,
    ledger: Vec<StepLedger>,
}

/// Runs the kinetic solver for every ε from the local Maxwellian of the
/// background's initial state, all in lockstep so each stored time needs
/// the expansion once.
pub fn epsilon_sweep(
    expansion: &ExpansionSet,
    collision: &CollisionOperator,
    global: &GlobalMaxwellian,
    inputs: &SweepInputs,
) -> Result<SweepReport> {
    let epsilons = validate_epsilons(&inputs.epsilons)?;
    let weight = WeightConfig::new(inputs.beta)?;
    if inputs.store_every == 0 {
        return Err(Error::config("kinetic.store_every", "must be at least 1"));
    }
    let spatial = expansion.spatial_grid().clone();
    let velocity = expansion.velocity_grid().clone();
    let solver = KineticSolver::new(&spatial, collision, &inputs.kinetic)?;
    let background = expansion.background();
    let t0 = background.start_time();
    let steps = solver.steps_between(t0, inputs.t_end)?;
    let tau = expansion.half_step();
    let dt = inputs.kinetic.dt;
    let on_cascade_grid = |n: usize| {
        let q = n as f64 * dt / tau;
        (q - q.round()).abs() < 1e-9 * q.max(1.0)
    };
    if !on_cascade_grid(inputs.store_every) || !on_cascade_grid(steps) {
        return Err(Error::config(
            "kinetic.store_every",
            format!("stored times must be multiples of the cascade half step {tau}"),
        ));
    }
    let stencil = expansion.options().elliptic.stencil;
    let initial = &background.states[0];
    let mut rows = epsilons
        .iter()
        .map(|&e| {
            let state = solver.well_prepared(initial, e, t0)?;
            Ok(RowState {
                mass0: solver.density(&state.f).iter().sum::<f64>() * spatial.cell_volume(),
                state,
                deviation: 0.0,
                norms: None,
                clipped: 0,
                ledger: Vec::with_capacity(steps),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut stored_times = Vec::new();
    let mut observe = |rows: &mut [RowState], t: f64| -> Result<()> {
        stored_times.push(t);
        let mu = expansion.phase(0, t)?;
        for row in rows.iter_mut() {
            let diff: Vec<f64> = row.state.f.iter().zip(&mu).map(|(a, b)| a - b).collect();
            row.deviation = row.deviation.max(phase_l2(&diff, &spatial, &velocity));
            let rem = RemainderFields::extract(&row.state, expansion, global, &weight)?;
            let norms = norm_package(&rem, &spatial, &velocity, global, inputs.beta, stencil)?;
            row.norms = Some(row.norms.map_or(norms, |n| n.max(&norms)));
        }
        Ok(())
    };
    observe(&mut rows, t0)?;
    for i in 1..=steps {
        for row in rows.iter_mut() {
            let (mut next, entry) = solver.step(&row.state)?;
            next.time = t0 + i as f64 * dt;
            row.clipped += entry.clipped_cells;
            row.ledger.push(entry);
            row.state = next;
        }
        if i % inputs.store_every == 0 || i == steps {
            observe(&mut rows, t0 + i as f64 * dt)?;
        }
    }

    let mut out = Vec::with_capacity(rows.len());
    for (row, &epsilon) in rows.into_iter().zip(&epsilons) {
        solver.check_clipping(row.clipped, steps)?;
        let mass0 = row.mass0;
        let mut mass_drift: f64 = 0.0;
        let mut momentum_defect: f64 = 0.0;
        let mut previous = [0.0; 3];
        let mut velocity_leakage = 0.0;
        for (s, entry) in row.ledger.iter().enumerate() {
            mass_drift = mass_drift.max((entry.mass - mass0).abs() / mass0);
            if s > 0 {
                for a in 0..3 {
                    let change = entry.momentum[a] - previous[a];
                    momentum_defect = momentum_defect.max((change - entry.momentum_work[a]).abs() / entry.mass);
                }
            }
            previous = entry.momentum;
            velocity_leakage += entry.velocity_leakage;
        }
        out.push(SweepRow {
            epsilon,
            sup_deviation: row.deviation,
            norms: row.norms.unwrap_or_default(),
            steps,
            mass_drift,
            momentum_defect,
            velocity_leakage,
            clipped_fraction: row.clipped as f64 / (steps * spatial.num_cells()).max(1) as f64,
            ledger: row.ledger,
        });
    }
    let deviations: Vec<(f64, f64)> = out.iter().map(|r| (r.epsilon, r.sup_deviation)).collect();
    let f_norms: Vec<(f64, f64)> = out.iter().map(|r| (r.epsilon, r.norms.f_l2)).collect();
    let f_max = f_norms.iter().fold(0.0_f64, |m, p| m.max(p.1));
    let f_min = f_norms.iter().fold(f64::INFINITY, |m, p| m.min(p.1));
    Ok(SweepReport {
        order: expansion.options().order,
        t_end: inputs.t_end,
        stored_times,
        deviation_fit: fit_order(&deviations)?,
        f_fit: fit_order(&f_norms)?,
        discretization_floor: discretization_floor(&deviations),
        f_ratio: f_max / f_min,
        boundary_flags: out.iter().any(|r| r.norms.on_boundary()),
        rows: out,
        note: "sup over time is the maximum over stored snapshots".into(),
    })
}

#[cfg(test)]
mod tests;
