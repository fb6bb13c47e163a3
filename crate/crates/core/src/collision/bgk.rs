//! BGK relaxation surrogate: `Q(F) = rate (M[F] - F)`.

use crate::hyperdual::HyperDual;
use crate::error::{check_len, Error, Result};
use crate::grid::VelocityGrid;
use crate::maxwellian::{
    correct_moments, eval_local_maxwellian, moments, LocalMaxwellianParams, Moments,
};

/// The Maxwellian carrying the moments of `f`, corrected so that its
/// discrete moments equal those of `f` exactly.
pub fn matched_maxwellian(
    f: &[f64],
    grid: &VelocityGrid,
) -> Result<(LocalMaxwellianParams, Vec<f64>)> {
    let m = moments(f, grid)?;
    let params = m.maxwellian_params()?;
    let mut maxwellian = eval_local_maxwellian(&params, grid);
    let weight = maxwellian.clone();
    correct_moments(&mut maxwellian, &m, &weight, params.u, grid)?;
    Ok((params, maxwellian))
}

/// `rate (M[F] - F)`.
pub fn bgk_relax(f: &[f64], grid: &VelocityGrid, rate: f64) -> Result<Vec<f64>> {
    if let Some(bad) = f.iter().find(|x| **x < 0.0 || !x.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "BGK relaxation needs a nonnegative distribution, found {bad}"
        )));
    }
    let (_, m) = matched_maxwellian(f, grid)?;
    Ok(m.iter().zip(f).map(|(a, b)| rate * (a - b)).collect())
}

/// Exact solution of `dF/dt = rate (M[F] - F)` after time `dt`.
pub fn bgk_relax_exact(f: &[f64], grid: &VelocityGrid, rate_times_dt: f64) -> Result<Vec<f64>> {
    let (_, m) = matched_maxwellian(f, grid)?;
    let decay = (-rate_times_dt).exp();
    Ok(m.iter().zip(f).map(|(a, b)| a + decay * (b - a)).collect())
}

fn background_moments(p: &LocalMaxwellianParams) -> [f64; 5] {
    let u2 = p.u[0] * p.u[0] + p.u[1] * p.u[1] + p.u[2] * p.u[2];
    [
        p.rho,
        p.rho * p.u[0],
        p.rho * p.u[1],
        p.rho * p.u[2],
        p.rho * (u2 + 3.0 * p.theta),
    ]
}

/// Mixed second variation `d^2 M[a, b]` of the moment-to-Maxwellian map at
/// the background, in the directions given by the moments of `a` and `b`.
pub fn maxwellian_second_variation(
    a: &[f64],
    b: &[f64],
    background: &LocalMaxwellianParams,
    grid: &VelocityGrid,
) -> Result<Vec<f64>> {
    check_len(grid.num_nodes(), a.len())?;
    check_len(grid.num_nodes(), b.len())?;
    let base = background_moments(background);
    let da = moments(a, grid)?.as_array();
    let db = moments(b, grid)?.as_array();
    let m: [HyperDual; 5] = std::array::from_fn(|i| HyperDual::new(base[i], da[i], db[i]));
    let rho = m[0];
    let inv_rho = rho.recip();
    let u = [m[1] * inv_rho, m[2] * inv_rho, m[3] * inv_rho];
    let u2 = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
    let theta = (m[4] * inv_rho - u2) * (1.0 / 3.0);
    let prefactor = rho * (theta * (2.0 * std::f64::consts::PI)).powf(-1.5);
    let inv_2theta = (theta * 2.0).recip();
    Ok(grid
        .nodes()
        .iter()
        .map(|v| {
            let c: [HyperDual; 3] = std::array::from_fn(|k| HyperDual::constant(v[k]) - u[k]);
            let c2 = c[0] * c[0] + c[1] * c[1] + c[2] * c[2];
            (prefactor * (-(c2 * inv_2theta)).exp()).e12
        })
        .collect())
}

/// Bilinear part of the BGK operator around `background`:
/// `Q(a, b) = rate d^2 M[a, b] / 2`, with exactly zero moments.
pub fn bgk_bilinear(
    a: &[f64],
    b: &[f64],
    background: &LocalMaxwellianParams,
    grid: &VelocityGrid,
    rate: f64,
) -> Result<Vec<f64>> {
    let mut q: Vec<f64> = maxwellian_second_variation(a, b, background, grid)?
        .into_iter()
        .map(|x| 0.5 * rate * x)
        .collect();
    let weight = eval_local_maxwellian(background, grid);
    correct_moments(&mut q, &Moments::default(), &weight, background.u, grid)?;
    Ok(q)
}
