//! Local and global Maxwellians, velocity moments, the null-space basis of the
//! linearized collision operator and the hydrodynamic projection.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::grid::VelocityGrid;
use crate::linalg::solve_dense;

/// Gram defect above which the velocity grid is considered unresolved.
pub const GRAM_DEFECT_LIMIT: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalMaxwellianParams {
    pub rho: f64,
    pub u: [f64; 3],
    pub theta: f64,
}

impl LocalMaxwellianParams {
    pub fn new(rho: f64, u: [f64; 3], theta: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) || !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::NonPhysicalMoments { mass: rho, theta });
        }
        Ok(Self { rho, u, theta })
    }

    /// The unit Maxwellian `(1, 0, theta)`.
    pub fn centered(theta: f64) -> Self {
        Self {
            rho: 1.0,
            u: [0.0; 3],
            theta,
        }
    }

    pub fn value(&self, v: [f64; 3]) -> f64 {
        let c2 = dist2(v, self.u);
        self.rho * (2.0 * PI * self.theta).powf(-1.5) * (-c2 / (2.0 * self.theta)).exp()
    }

    /// `sqrt(mu(v))`, evaluated directly to keep full relative accuracy in the tails.
    pub fn sqrt_value(&self, v: [f64; 3]) -> f64 {
        let c2 = dist2(v, self.u);
        (self.rho * (2.0 * PI * self.theta).powf(-1.5)).sqrt() * (-c2 / (4.0 * self.theta)).exp()
    }
}

fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

/// `mu(v) = rho (2 pi theta)^{-3/2} exp(-|v-u|^2 / (2 theta))` at every node.
pub fn eval_local_maxwellian(params: &LocalMaxwellianParams, grid: &VelocityGrid) -> Vec<f64> {
    grid.nodes().iter().map(|&v| params.value(v)).collect()
}

pub fn eval_sqrt_maxwellian(params: &LocalMaxwellianParams, grid: &VelocityGrid) -> Vec<f64> {
    grid.nodes().iter().map(|&v| params.sqrt_value(v)).collect()
}

/// Mass, momentum and (twice the kinetic) energy `(int F, int v F, int |v|^2 F)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Moments {
    pub mass: f64,
    pub momentum: [f64; 3],
    pub energy: f64,
}

impl Moments {
    /// The Maxwellian parameters carrying these moments.
    pub fn maxwellian_params(&self) -> Result<LocalMaxwellianParams> {
        let rho = self.mass;
        if !(rho > 0.0) {
            return Err(Error::NonPhysicalMoments {
                mass: rho,
                theta: f64::NAN,
            });
        }
        let u = [
            self.momentum[0] / rho,
            self.momentum[1] / rho,
            self.momentum[2] / rho,
        ];
        let theta = (self.energy / rho - (u[0] * u[0] + u[1] * u[1] + u[2] * u[2])) / 3.0;
        LocalMaxwellianParams::new(rho, u, theta)
    }

    pub fn as_array(&self) -> [f64; 5] {
        [
            self.mass,
            self.momentum[0],
            self.momentum[1],
            self.momentum[2],
            self.energy,
        ]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self {
            mass: a[0],
            momentum: [a[1], a[2], a[3]],
            energy: a[4],
        }
    }
}

pub fn moments(f: &[f64], grid: &VelocityGrid) -> Result<Moments> {
    check_len(grid.num_nodes(), f.len())?;
    Ok(moments_unchecked(f, grid))
}

pub(crate) fn moments_unchecked(f: &[f64], grid: &VelocityGrid) -> Moments {
    let mut m = [0.0f64; 5];
    for (v, &fv) in grid.nodes().iter().zip(f) {
        m[0] += fv;
        m[1] += v[0] * fv;
        m[2] += v[1] * fv;
        m[3] += v[2] * fv;
        m[4] += (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) * fv;
    }
    let w = grid.weight();
    Moments::from_array(m.map(|x| x * w))
}

/// Adds `weight * (c0 + c.(v - u) + c4 |v - u|^2)` to `field` so that its
/// discrete moments equal `target` exactly: the least-squares correction in the
/// `1/weight`-weighted norm. `center` only affects conditioning.
pub fn correct_moments(
    field: &mut [f64],
    target: &Moments,
    weight: &[f64],
    center: [f64; 3],
    grid: &VelocityGrid,
) -> Result<()> {
    check_len(grid.num_nodes(), field.len())?;
    check_len(grid.num_nodes(), weight.len())?;
    let current = moments_unchecked(field, grid);
    let t = target.as_array();
    let c = current.as_array();
    // Work with centred invariants psi = (1, v - u, |v - u|^2).
    let defect_raw: [f64; 5] = std::array::from_fn(|i| t[i] - c[i]);
    let defect = raw_to_centered(defect_raw, center);
    if defect.iter().all(|&d| d == 0.0) {
        return Ok(());
    }
    let mut gram = [0.0f64; 25];
    for (v, &m) in grid.nodes().iter().zip(weight) {
        let psi = centered_invariants(*v, center);
        for i in 0..5 {
            for j in i..5 {
                gram[i * 5 + j] += psi[i] * psi[j] * m;
            }
        }
    }
    for i in 0..5 {
        for j in 0..i {
            gram[i * 5 + j] = gram[j * 5 + i];
        }
    }
    let w = grid.weight();
    gram.iter_mut().for_each(|g| *g *= w);
    let coef = solve_dense(&gram, &defect).ok_or_else(|| {
        Error::InvalidInput("moment correction matrix is singular (empty weight?)".into())
    })?;
    for ((fv, v), &m) in field.iter_mut().zip(grid.nodes()).zip(weight) {
        let psi = centered_invariants(*v, center);
        let s: f64 = (0..5).map(|i| coef[i] * psi[i]).sum();
        *fv += m * s;
    }
    Ok(())
}

fn centered_invariants(v: [f64; 3], center: [f64; 3]) -> [f64; 5] {
    let c = [v[0] - center[0], v[1] - center[1], v[2] - center[2]];
    [1.0, c[0], c[1], c[2], c[0] * c[0] + c[1] * c[1] + c[2] * c[2]]
}

/// Converts raw moments `(m0, m1, m2)` of a field into centred ones about `u`.
fn raw_to_centered(raw: [f64; 5], u: [f64; 3]) -> [f64; 5] {
    let m1 = [raw[1], raw[2], raw[3]];
    let u2 = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
    let e = raw[4] - 2.0 * (u[0] * m1[0] + u[1] * m1[1] + u[2] * m1[2]) + u2 * raw[0];
    [
        raw[0],
        m1[0] - u[0] * raw[0],
        m1[1] - u[1] * raw[0],
        m1[2] - u[2] * raw[0],
        e,
    ]
}

/// The x-independent reference Maxwellian `mu_M` used for weighted norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalMaxwellian {
    pub theta_m: f64,
}

impl GlobalMaxwellian {
    pub fn params(&self) -> LocalMaxwellianParams {
        LocalMaxwellianParams::centered(self.theta_m)
    }

    pub fn eval(&self, grid: &VelocityGrid) -> Vec<f64> {
        eval_local_maxwellian(&self.params(), grid)
    }

    pub fn eval_sqrt(&self, grid: &VelocityGrid) -> Vec<f64> {
        eval_sqrt_maxwellian(&self.params(), grid)
    }
}

/// Picks `theta_M` as the midpoint of the admissible bracket
/// `[max theta / 2, min theta]`.
pub fn select_theta_m(theta_field: &[f64]) -> Result<GlobalMaxwellian> {
    if theta_field.is_empty() {
        return Err(Error::InvalidInput("empty temperature field".into()));
    }
    if let Some(&bad) = theta_field.iter().find(|&&t| !(t > 0.0)) {
        return Err(Error::InvalidInput(format!(
            "temperatures must be positive, found {bad}"
        )));
    }
    let min = theta_field.iter().copied().fold(f64::INFINITY, f64::min);
    let max = theta_field.iter().copied().fold(0.0, f64::max);
    if max > 2.0 * min {
        return Err(Error::TemperatureBracket { min, max });
    }
    let theta_m = 0.5 * (0.5 * max + min);
    Ok(GlobalMaxwellian { theta_m })
}

/// The polynomial velocity weight `w(v) = (1 + |v|^2)^beta`, `beta >= 7/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightConfig {
    beta: f64,
}

impl WeightConfig {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta >= 3.5) {
            return Err(Error::InvalidInput(format!(
                "β ≥ 7/2 required for the velocity weight, got {beta}"
            )));
        }
        Ok(Self { beta })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn weight(&self, v: [f64; 3]) -> f64 {
        (1.0 + v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).powf(self.beta)
    }

    pub fn eval(&self, grid: &VelocityGrid) -> Vec<f64> {
        grid.nodes().iter().map(|&v| self.weight(v)).collect()
    }
}

/// Hydrodynamic coordinates `(rho_i, u_i, theta_i)` of a coefficient `F_i`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HydroCoordinates {
    pub rho: f64,
    pub u: [f64; 3],
    pub theta: f64,
}

/// Orthonormal basis `chi_0..chi_4` of the null space of `L` around one local
/// Maxwellian, sampled on a velocity grid.
#[derive(Debug, Clone)]
pub struct ChiBasis {
    params: LocalMaxwellianParams,
    sqrt_mu: Vec<f64>,
    chi: [Vec<f64>; 5],
    gram: [f64; 25],
    gram_defect: f64,
    weight: f64,
}

impl ChiBasis {
    pub fn build(params: &LocalMaxwellianParams, grid: &VelocityGrid) -> Result<Self> {
        let basis = Self::build_unchecked(params, grid);
        if basis.gram_defect > GRAM_DEFECT_LIMIT {
            return Err(Error::UnresolvedGrid {
                defect: basis.gram_defect,
                limit: GRAM_DEFECT_LIMIT,
            });
        }
        Ok(basis)
    }

    pub(crate) fn build_unchecked(params: &LocalMaxwellianParams, grid: &VelocityGrid) -> Self {
        let sqrt_mu = eval_sqrt_maxwellian(params, grid);
        let (rho, u, theta) = (params.rho, params.u, params.theta);
        let n = grid.num_nodes();
        let mut chi: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; n]);
        let s0 = 1.0 / rho.sqrt();
        let s1 = 1.0 / (rho * theta).sqrt();
        let s4 = 1.0 / (6.0 * rho).sqrt();
        for (i, v) in grid.nodes().iter().enumerate() {
            let c = [v[0] - u[0], v[1] - u[1], v[2] - u[2]];
            let c2 = c[0] * c[0] + c[1] * c[1] + c[2] * c[2];
            let sm = sqrt_mu[i];
            chi[0][i] = s0 * sm;
            chi[1][i] = s1 * c[0] * sm;
            chi[2][i] = s1 * c[1] * sm;
            chi[3][i] = s1 * c[2] * sm;
            chi[4][i] = s4 * (c2 / theta - 3.0) * sm;
        }
        let mut gram = [0.0; 25];
        let mut defect = 0.0f64;
        for i in 0..5 {
            for j in 0..5 {
                let g = grid.inner(&chi[i], &chi[j]);
                gram[i * 5 + j] = g;
                let expected = if i == j { 1.0 } else { 0.0 };
                defect = defect.max((g - expected).abs());
            }
        }
        Self {
            params: *params,
            sqrt_mu,
            chi,
            gram,
            gram_defect: defect,
            weight: grid.weight(),
        }
    }

    pub fn params(&self) -> &LocalMaxwellianParams {
        &self.params
    }

    pub fn sqrt_mu(&self) -> &[f64] {
        &self.sqrt_mu
    }

    pub fn chi(&self, i: usize) -> &[f64] {
        &self.chi[i]
    }

    /// Largest entry of `|<chi_i, chi_j> - delta_ij|`.
    pub fn gram_defect(&self) -> f64 {
        self.gram_defect
    }

    pub fn gram(&self) -> &[f64; 25] {
        &self.gram
    }

    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * self.weight
    }

    /// Coefficients `c` with `P g = sum_i c_i chi_i`, using the discrete Gram
    /// matrix so that the projection is exactly orthogonal on the grid.
    pub fn coefficients(&self, g: &[f64]) -> [f64; 5] {
        let b: [f64; 5] = std::array::from_fn(|i| self.inner(g, &self.chi[i]));
        let c = solve_dense(&self.gram, &b).expect("chi basis Gram matrix is nonsingular");
        [c[0], c[1], c[2], c[3], c[4]]
    }

    pub fn combine(&self, c: &[f64; 5]) -> Vec<f64> {
        let n = self.sqrt_mu.len();
        (0..n)
            .map(|k| (0..5).map(|i| c[i] * self.chi[i][k]).sum())
            .collect()
    }

    /// `(P g, g - P g)`.
    pub fn project_hydro(&self, g: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_len(self.sqrt_mu.len(), g.len())?;
        let pg = self.combine(&self.coefficients(g));
        let residual = g.iter().zip(&pg).map(|(a, b)| a - b).collect();
        Ok((pg, residual))
    }

    /// Replaces `g` by `(I - P) g`.
    pub fn remove_hydro(&self, g: &mut [f64]) {
        let c = self.coefficients(g);
        for (k, gk) in g.iter_mut().enumerate() {
            *gk -= (0..5).map(|i| c[i] * self.chi[i][k]).sum::<f64>();
        }
    }

    /// Hydrodynamic coordinates of `g = F_i / sqrt(mu)`, inverting
    /// `P g = rho_i/sqrt(rho0) chi_0 + sqrt(rho0/theta0) u_i . chi + sqrt(3 rho0 / 2) theta_i/theta0 chi_4`.
    pub fn hydro_coordinates(&self, g: &[f64]) -> Result<HydroCoordinates> {
        check_len(self.sqrt_mu.len(), g.len())?;
        let c = self.coefficients(g);
        let (rho0, theta0) = (self.params.rho, self.params.theta);
        let su = (theta0 / rho0).sqrt();
        Ok(HydroCoordinates {
            rho: c[0] * rho0.sqrt(),
            u: [c[1] * su, c[2] * su, c[3] * su],
            theta: c[4] * theta0 / (1.5 * rho0).sqrt(),
        })
    }

    /// The hydrodynamic field `P(F_i / sqrt(mu))` with the given coordinates.
    pub fn hydro_field(&self, h: &HydroCoordinates) -> Vec<f64> {
        let (rho0, theta0) = (self.params.rho, self.params.theta);
        let su = (rho0 / theta0).sqrt();
        let c = [
            h.rho / rho0.sqrt(),
            su * h.u[0],
            su * h.u[1],
            su * h.u[2],
            (1.5 * rho0).sqrt() * h.theta / theta0,
        ];
        self.combine(&c)
    }
}
