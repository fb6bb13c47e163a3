//! Taylor coefficients of `H(ε) = exp(φ₀ + εφ₁ + ...)` in `ε`.

use crate::error::{check_len, Error, Result};

/// `A_0..A_n` with `e^{φ₀} A_m` the `ε^m` coefficient of `H(ε)`, from the
/// power-series recursion `A_m = (1/m) Σ_{j=1}^{m} j φ_j A_{m-j}`, cellwise.
pub fn exp_taylor_coeffs(phi: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let first = phi
        .first()
        .ok_or_else(|| Error::InvalidInput("need at least φ₀".into()))?;
    let cells = first.len();
    for p in phi {
        check_len(cells, p.len())?;
    }
    let mut a: Vec<Vec<f64>> = vec![vec![1.0; cells]];
    for m in 1..phi.len() {
        let next = (0..cells)
            .map(|c| {
                (1..=m)
                    .map(|j| j as f64 * phi[j][c] * a[m - j][c])
                    .sum::<f64>()
                    / m as f64
            })
            .collect();
        a.push(next);
    }
    Ok(a)
}

/// `H(ε) - Σ_{m ≤ order} ε^m e^{φ₀} A_m`, cellwise.
pub fn taylor_remainder(phi: &[Vec<f64>], epsilon: f64, order: usize) -> Result<Vec<f64>> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput(format!("ε must be positive, got {epsilon}")));
    }
    let mut extended = phi.to_vec();
    let cells = phi.first().map_or(0, |p| p.len());
    extended.resize(extended.len().max(order + 1), vec![0.0; cells]);
    let a = exp_taylor_coeffs(&extended)?;
    Ok((0..cells)
        .map(|c| {
            let phi0 = phi[0][c];
            // H / e^{φ₀} = exp(Σ_{j ≥ 1} ε^j φ_j)
            let tail: f64 = phi[1..].iter().enumerate().map(|(j, p)| epsilon.powi(j as i32 + 1) * p[c]).sum();
            let poly: f64 = (1..=order).map(|m| epsilon.powi(m as i32) * a[m][c]).sum();
            phi0.exp() * (tail.exp_m1() - poly)
        })
        .collect())
}
