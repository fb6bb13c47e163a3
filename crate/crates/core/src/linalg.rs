//! Small dense solves and a preconditioned conjugate-gradient driver.

use crate::error::{Error, Result};

/// Solves `a x = b` for a small dense row-major matrix by Gaussian elimination
/// with partial pivoting. Returns `None` for a numerically singular matrix.
pub fn solve_dense(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    let scale = m.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))
            .unwrap();
        if m[pivot * n + col].abs() <= 1e-14 * scale {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                m.swap(col * n + k, pivot * n + k);
            }
            x.swap(col, pivot);
        }
        let d = m[col * n + col];
        for row in col + 1..n {
            let f = m[row * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[row * n + k] -= f * m[col * n + k];
            }
            x[row] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = x[col];
        for k in col + 1..n {
            s -= m[col * n + k] * x[k];
        }
        x[col] = s / m[col * n + col];
    }
    Some(x)
}

/// Outcome of an iterative linear solve.
#[derive(Debug, Clone)]
pub struct KrylovReport {
    pub iterations: usize,
    /// Final residual norm relative to the right-hand side norm.
    pub relative_residual: f64,
}

/// Preconditioned conjugate gradients for a symmetric positive definite
/// operator with respect to the inner product `dot`.
///
/// `project` is applied to every residual and search direction; pass the
/// identity for unconstrained problems or a subspace projector to run CG on an
/// invariant subspace.
#[allow(clippy::too_many_arguments)]
pub fn pcg<A, M, D, P>(
    what: &'static str,
    apply: A,
    precondition: M,
    dot: D,
    project: P,
    rhs: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<KrylovReport>
where
    A: Fn(&[f64]) -> Vec<f64>,
    M: Fn(&[f64]) -> Vec<f64>,
    D: Fn(&[f64], &[f64]) -> f64,
    P: Fn(&mut [f64]),
{
    let n = rhs.len();
    let b_norm = dot(rhs, rhs).sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(KrylovReport {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let ax = apply(x);
    let mut r: Vec<f64> = (0..n).map(|i| rhs[i] - ax[i]).collect();
    project(&mut r);
    let mut res = dot(&r, &r).sqrt() / b_norm;
    if res <= tol {
        return Ok(KrylovReport {
            iterations: 0,
            relative_residual: res,
        });
    }
    let mut z = precondition(&r);
    project(&mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return Err(Error::NotConverged {
                what,
                iterations: it,
                residual: res,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        project(&mut r);
        res = dot(&r, &r).sqrt() / b_norm;
        if res <= tol {
            return Ok(KrylovReport {
                iterations: it,
                relative_residual: res,
            });
        }
        z = precondition(&r);
        project(&mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        project(&mut p);
    }
    Err(Error::NotConverged {
        what,
        iterations: max_iter,
        residual: res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_solve_matches_known_solution() {
        let a = [4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0];
        let x_true = [1.0, -2.0, 0.5];
        let b: Vec<f64> = (0..3)
            .map(|i| (0..3).map(|j| a[i * 3 + j] * x_true[j]).sum())
            .collect();
        let x = solve_dense(&a, &b).unwrap();
        for i in 0..3 {
            assert!((x[i] - x_true[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn dense_solve_detects_singularity() {
        assert!(solve_dense(&[1.0, 2.0, 2.0, 4.0], &[1.0, 2.0]).is_none());
    }

    #[test]
    fn pcg_solves_spd_tridiagonal() {
        let n = 50;
        let apply = |x: &[f64]| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    let l = if i > 0 { x[i - 1] } else { 0.0 };
                    let r = if i + 1 < n { x[i + 1] } else { 0.0 };
                    3.0 * x[i] - l - r
                })
                .collect()
        };
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut x = vec![0.0; n];
        let rep = pcg(
            "test",
            apply,
            |r: &[f64]| r.to_vec(),
            |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum(),
            |_: &mut [f64]| {},
            &b,
            &mut x,
            1e-12,
            200,
        )
        .unwrap();
        assert!(rep.relative_residual <= 1e-12);
        let ax = apply(&x);
        for i in 0..n {
            assert!((ax[i] - b[i]).abs() < 1e-10);
        }
    }
}
