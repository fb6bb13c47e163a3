//! The Euler–Poisson background at one instant with the spatial and time
//! derivatives the cascade needs.

use crate::error::Result;
use crate::euler::Trajectory;
use crate::maxwellian::LocalMaxwellianParams;
use crate::spectral::Spectral;

/// Background fields and derivatives per cell. Spatial derivatives are
/// spectral; `∂_t` comes from the non-conservative Euler equations evaluated
/// with the same derivatives, so the leading-order source has no
/// hydrodynamic component up to velocity quadrature.
#[derive(Debug, Clone)]
pub struct BackgroundSlice {
    pub rho: Vec<f64>,
    pub u: Vec<[f64; 3]>,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    /// `grad_rho[a][cell] = ∂_a ρ₀`.
    pub grad_rho: [Vec<f64>; 3],
    /// `grad_u[a][cell][b] = ∂_a u₀^b`.
    pub grad_u: [Vec<[f64; 3]>; 3],
    pub grad_theta: [Vec<f64>; 3],
    pub grad_phi: [Vec<f64>; 3],
    pub dt_rho: Vec<f64>,
    pub dt_u: Vec<[f64; 3]>,
    pub dt_theta: Vec<f64>,
}

impl BackgroundSlice {
    pub fn at(traj: &Trajectory, spectral: &Spectral, t: f64) -> Result<Self> {
        let (state, _) = traj.at(t)?;
        Ok(Self::from_fields(spectral, state.rho, state.u, state.theta, state.phi))
    }

    pub fn from_fields(
        spectral: &Spectral,
        rho: Vec<f64>,
        u: Vec<[f64; 3]>,
        theta: Vec<f64>,
        phi: Vec<f64>,
    ) -> Self {
        let n = rho.len();
        let dim = spectral.grid().dim();
        let grad_rho = spectral.gradient(&rho);
        let grad_phi = spectral.gradient(&phi);
        let components: [Vec<f64>; 3] = std::array::from_fn(|b| u.iter().map(|x| x[b]).collect());
        let du: [[Vec<f64>; 3]; 3] = std::array::from_fn(|b| spectral.gradient(&components[b]));
        let grad_u: [Vec<[f64; 3]>; 3] =
            std::array::from_fn(|a| (0..n).map(|c| std::array::from_fn(|b| du[b][a][c])).collect());
        // θ = Kρ^{2/3} differentiated by the chain rule.
        let grad_theta: [Vec<f64>; 3] = std::array::from_fn(|a| {
            (0..n)
                .map(|c| 2.0 / 3.0 * theta[c] / rho[c] * grad_rho[a][c])
                .collect()
        });
        let mut dt_rho = vec![0.0; n];
        let mut dt_u = vec![[0.0; 3]; n];
        let mut dt_theta = vec![0.0; n];
        for c in 0..n {
            let div_u: f64 = (0..dim).map(|a| grad_u[a][c][a]).sum();
            let u_grad_rho: f64 = (0..dim).map(|a| u[c][a] * grad_rho[a][c]).sum();
            dt_rho[c] = -(u_grad_rho + rho[c] * div_u);
            for b in 0..3 {
                let advect: f64 = (0..dim).map(|a| u[c][a] * grad_u[a][c][b]).sum();
                // ∇p / ρ with p = ρθ
                let pressure = grad_theta[b][c] + theta[c] / rho[c] * grad_rho[b][c];
                dt_u[c][b] = -(advect + pressure + grad_phi[b][c]);
            }
            dt_theta[c] = 2.0 / 3.0 * theta[c] / rho[c] * dt_rho[c];
        }
        Self {
            rho,
            u,
            theta,
            phi,
            grad_rho,
            grad_u,
            grad_theta,
            grad_phi,
            dt_rho,
            dt_u,
            dt_theta,
        }
    }

    pub fn num_cells(&self) -> usize {
        self.rho.len()
    }

    pub fn params(&self, cell: usize) -> Result<LocalMaxwellianParams> {
        LocalMaxwellianParams::new(self.rho[cell], self.u[cell], self.theta[cell])
    }
}
