//! Phase-space building blocks of the cascade: exact jets of the
//! hydrodynamic part of `F_n`, derivatives of sampled fields, and the stress
//! and heat-flux moments.

use crate::grid::VelocityGrid;
use crate::hyperdual::HyperDual;
use crate::spectral::Spectral;

/// `μ (ρ_n/ρ₀ + u_n·c/θ₀ + θ_n/(2θ₀) (|c|²/θ₀ - 3))`, `c = v - u₀`; the local
/// Maxwellian itself when `coefficients` is `None`.
fn hydro_value(
    bg: &[HyperDual; 5],
    coefficients: Option<&[HyperDual; 5]>,
    v: &[HyperDual; 3],
) -> HyperDual {
    let (rho, theta) = (bg[0], bg[4]);
    let c: [HyperDual; 3] = std::array::from_fn(|k| v[k] - bg[1 + k]);
    let c2 = c[0] * c[0] + c[1] * c[1] + c[2] * c[2];
    let inv_theta = theta.recip();
    let mu = rho
        * (theta * (2.0 * std::f64::consts::PI)).powf(-1.5)
        * (-(c2 * inv_theta * 0.5)).exp();
    match coefficients {
        None => mu,
        Some(u) => {
            let drift = (u[1] * c[0] + u[2] * c[1] + u[3] * c[2]) * inv_theta;
            let heat = u[4] * inv_theta * 0.5 * (c2 * inv_theta - HyperDual::constant(3.0));
            mu * (u[0] / rho + drift + heat)
        }
    }
}

/// Samples of the hydrodynamic field with coefficients `coeff` around
/// `bg = (ρ₀, u₀, θ₀)`.
pub fn hydro_samples(bg: &[f64; 5], coeff: &[f64; 5], grid: &VelocityGrid) -> Vec<f64> {
    let bg = bg.map(HyperDual::constant);
    let coeff = coeff.map(HyperDual::constant);
    grid.nodes()
        .iter()
        .map(|v| hydro_value(&bg, Some(&coeff), &v.map(HyperDual::constant)).re)
        .collect()
}

/// Values and first derivatives of a hydrodynamic phase field in one cell.
#[derive(Debug, Clone)]
pub struct HydroJet {
    pub value: Vec<f64>,
    pub dt: Vec<f64>,
    /// `∂_{x_a}` for active axes.
    pub dx: Vec<Vec<f64>>,
    pub dv: [Vec<f64>; 3],
}

/// Background and coefficient state of one cell with their derivatives.
#[derive(Debug, Clone, Copy)]
pub struct CellJetInput {
    /// `(ρ₀, u₀, θ₀)`.
    pub bg: [f64; 5],
    pub bg_dt: [f64; 5],
    pub bg_dx: [[f64; 5]; 3],
    /// `(ρ_n, u_n, θ_n)`, absent for the Maxwellian itself.
    pub coeff: Option<([f64; 5], [f64; 5], [[f64; 5]; 3])>,
}

pub fn hydro_jet(input: &CellJetInput, grid: &VelocityGrid, dim: usize) -> HydroJet {
    let n = grid.num_nodes();
    let mut jet = HydroJet {
        value: vec![0.0; n],
        dt: vec![0.0; n],
        dx: vec![vec![0.0; n]; dim],
        dv: std::array::from_fn(|_| vec![0.0; n]),
    };
    let dual = |x: &[f64; 5], d: &[f64; 5]| -> [HyperDual; 5] {
        std::array::from_fn(|i| HyperDual::new(x[i], d[i], 0.0))
    };
    let zero = [0.0; 5];
    let constant_v = |v: &[f64; 3]| -> [HyperDual; 3] { v.map(HyperDual::constant) };
    // Direction 0 is time, 1..=dim space.
    let directions: Vec<([HyperDual; 5], Option<[HyperDual; 5]>)> = (0..=dim)
        .map(|d| {
            let (bg_d, co_d) = if d == 0 {
                (input.bg_dt, input.coeff.map(|c| (c.0, c.1)))
            } else {
                (input.bg_dx[d - 1], input.coeff.map(|c| (c.0, c.2[d - 1])))
            };
            (dual(&input.bg, &bg_d), co_d.map(|(x, dx)| dual(&x, &dx)))
        })
        .collect();
    let bg_const = dual(&input.bg, &zero);
    let co_const = input.coeff.map(|c| dual(&c.0, &zero));
    for (i, v) in grid.nodes().iter().enumerate() {
        let vc = constant_v(v);
        for (d, (bg, co)) in directions.iter().enumerate() {
            let f = hydro_value(bg, co.as_ref(), &vc);
            if d == 0 {
                jet.value[i] = f.re;
                jet.dt[i] = f.e1;
            } else {
                jet.dx[d - 1][i] = f.e1;
            }
        }
        for b in 0..3 {
            let mut vd = vc;
            vd[b] = HyperDual::new(v[b], 1.0, 0.0);
            jet.dv[b][i] = hydro_value(&bg_const, co_const.as_ref(), &vd).e1;
        }
    }
    jet
}

/// Fourth-order central differences in `v`, treating values beyond the
/// truncation as zero.
pub fn velocity_gradient(field: &[f64], grid: &VelocityGrid) -> [Vec<f64>; 3] {
    let n = grid.nodes_per_axis() as isize;
    let h = grid.spacing();
    let strides = [n * n, n, 1];
    std::array::from_fn(|axis| {
        (0..field.len())
            .map(|i| {
                let idx = grid.axis_index(i)[axis] as isize;
                let at = |o: isize| -> f64 {
                    let k = idx + o;
                    if (0..n).contains(&k) {
                        field[(i as isize + o * strides[axis]) as usize]
                    } else {
                        0.0
                    }
                };
                (8.0 * (at(1) - at(-1)) - (at(2) - at(-2))) / (12.0 * h)
            })
            .collect()
    })
}

/// Spectral `∂_{x_a}` of a cell-major phase field, one velocity node at a time.
pub fn spatial_derivative(field: &[f64], n_v: usize, spectral: &Spectral, axis: usize) -> Vec<f64> {
    let cells = field.len() / n_v;
    let mut out = vec![0.0; field.len()];
    let mut column = vec![0.0; cells];
    for node in 0..n_v {
        for (c, x) in column.iter_mut().enumerate() {
            *x = field[c * n_v + node];
        }
        let d = spectral.derivative(&column, axis);
        for (c, x) in d.into_iter().enumerate() {
            out[c * n_v + node] = x;
        }
    }
    out
}

/// Traceless stress `∫(c_i c_j - δ_ij |c|²/3) F dv` and heat flux
/// `∫c_i (|c|² - 5θ₀) F dv` of one cell's samples, `c = v - u₀`.
pub fn stress_and_heat_flux(
    f: &[f64],
    u0: [f64; 3],
    theta0: f64,
    grid: &VelocityGrid,
) -> ([[f64; 3]; 3], [f64; 3]) {
    let mut stress = [[0.0; 3]; 3];
    let mut heat = [0.0; 3];
    for (v, x) in grid.nodes().iter().zip(f) {
        let c = [v[0] - u0[0], v[1] - u0[1], v[2] - u0[2]];
        let c2 = c[0] * c[0] + c[1] * c[1] + c[2] * c[2];
        for i in 0..3 {
            for j in 0..3 {
                let delta = if i == j { c2 / 3.0 } else { 0.0 };
                stress[i][j] += (c[i] * c[j] - delta) * x;
            }
            heat[i] += c[i] * (c2 - 5.0 * theta0) * x;
        }
    }
    let w = grid.weight();
    (stress.map(|r| r.map(|s| s * w)), heat.map(|q| q * w))
}
