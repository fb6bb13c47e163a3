//! The symmetrized linear hyperbolic system for `U_n = (ρ_n, u_n, θ_n)`:
//! `A₀(∂_t U + V) + Σ A_i ∂_i U + B U = G`.

use super::background::BackgroundSlice;

/// Per-cell coefficient matrices; unknowns ordered `(ρ, u¹, u², u³, θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices {
    /// Diagonal of `A₀`.
    pub a0: [f64; 5],
    pub a: [[[f64; 5]; 5]; 3],
    pub b: [[f64; 5]; 5],
}

pub fn assemble_matrices(bg: &BackgroundSlice, cell: usize) -> SystemMatrices {
    let rho = bg.rho[cell];
    let theta = bg.theta[cell];
    let u = bg.u[cell];
    let energy = 1.5 * rho / theta;
    let a0 = [theta / rho, rho, rho, rho, energy];
    let a = std::array::from_fn(|i| {
        let mut m = [[0.0; 5]; 5];
        m[0][0] = theta / rho * u[i];
        m[0][1 + i] = theta;
        m[1 + i][0] = theta;
        for j in 0..3 {
            m[1 + j][1 + j] = rho * u[i];
        }
        m[1 + i][4] = rho;
        m[4][1 + i] = rho;
        m[4][4] = energy * u[i];
        m
    });
    let div_u: f64 = (0..3).map(|k| bg.grad_u[k][cell][k]).sum();
    let mut b = [[0.0; 5]; 5];
    b[0][0] = theta / rho * div_u;
    for k in 0..3 {
        b[0][1 + k] = theta / rho * bg.grad_rho[k][cell];
        b[4][1 + k] = energy * bg.grad_theta[k][cell];
    }
    for j in 0..3 {
        b[1 + j][0] = -theta * bg.grad_rho[j][cell] / rho;
        for k in 0..3 {
            b[1 + j][1 + k] = rho * bg.grad_u[k][cell][j];
        }
        b[1 + j][4] = bg.grad_rho[j][cell];
    }
    b[4][4] = rho / theta * div_u;
    SystemMatrices { a0, a, b }
}

/// `∂_t U = A₀^{-1}(G - Σ A_i ∂_i U - B U) - V` in one cell.
pub fn cell_rate(
    m: &SystemMatrices,
    u: &[f64; 5],
    du: &[[f64; 5]; 3],
    grad_phi: [f64; 3],
    forcing: &[f64; 5],
    dim: usize,
) -> [f64; 5] {
    std::array::from_fn(|r| {
        let mut s = forcing[r];
        for i in 0..dim {
            s -= (0..5).map(|c| m.a[i][r][c] * du[i][c]).sum::<f64>();
        }
        s -= (0..5).map(|c| m.b[r][c] * u[c]).sum::<f64>();
        let v = if (1..4).contains(&r) { grad_phi[r - 1] } else { 0.0 };
        s / m.a0[r] - v
    })
}
