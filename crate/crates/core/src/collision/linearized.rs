//! The linearized collision operator `L` around a local Maxwellian and its
//! pseudo-inverse on the microscopic subspace.

use std::sync::Arc;

use rand::Rng;

use super::kernel::HardSphereKernel;
use super::{collision_frequency, CollisionMode, CollisionOperator};
use crate::error::{check_len, Error, Result};
use crate::grid::VelocityGrid;
use crate::linalg::{pcg, KrylovReport};
use crate::maxwellian::{eval_local_maxwellian, ChiBasis, LocalMaxwellianParams};
use crate::parallel;

/// Largest velocity grid (in nodes) for which `L` is assembled densely.
pub const DENSE_LIMIT: usize = 16 * 16 * 16;

/// Relative size of the hydrodynamic part tolerated in an `L^{-1}` argument.
const ORTHOGONALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub(super) enum Action {
    Relaxation {
        rate: f64,
    },
    HardSphere {
        kernel: Arc<HardSphereKernel>,
        mu: Vec<f64>,
        nu_d: Vec<f64>,
        /// `(A + A^T) / 2` of the raw operator, when small enough to store.
        dense: Option<Vec<f64>>,
    },
}

/// `L = Pi (A + A^T)/2 Pi` where `A` is the raw discrete linearization and
/// `Pi = I - P` removes the discrete collision invariants. In BGK mode
/// `L = rate (I - P)`.
#[derive(Debug, Clone)]
pub struct LinearizedOperator {
    background: LocalMaxwellianParams,
    basis: ChiBasis,
    nu: Vec<f64>,
    diag: Vec<f64>,
    weight: f64,
    pub(super) action: Action,
}

impl LinearizedOperator {
    pub fn new(background: &LocalMaxwellianParams, op: &CollisionOperator) -> Result<Self> {
        let grid = op.grid();
        let basis = ChiBasis::build(background, grid)?;
        let n = grid.num_nodes();
        let (nu, diag, action) = match op.config().mode {
            CollisionMode::Bgk => {
                let rate = op.config().bgk_rate;
                (vec![rate; n], vec![rate; n], Action::Relaxation { rate })
            }
            CollisionMode::HardSphere => {
                let kernel = op.kernel().expect("hard-sphere kernel").clone();
                let mu = eval_local_maxwellian(background, grid);
                let nu_d = kernel.discrete_frequency(&mu);
                let dense = (n <= DENSE_LIMIT).then(|| {
                    let mut a = kernel.assemble_linearized(&mu, basis.sqrt_mu(), &nu_d);
                    symmetrize(&mut a, n);
                    a
                });
                let diag = match &dense {
                    Some(a) => (0..n).map(|i| a[i * n + i]).collect(),
                    None => nu_d.clone(),
                };
                let nu = collision_frequency(background, grid);
                (
                    nu,
                    diag,
                    Action::HardSphere {
                        kernel,
                        mu,
                        nu_d,
                        dense,
                    },
                )
            }
        };
        Ok(Self {
            background: *background,
            basis,
            nu,
            diag,
            weight: grid.weight(),
            action,
        })
    }

    pub fn background(&self) -> &LocalMaxwellianParams {
        &self.background
    }

    pub fn basis(&self) -> &ChiBasis {
        &self.basis
    }

    /// Collision frequency `nu(v)`: the closed form for hard spheres, the
    /// relaxation rate for BGK.
    pub fn nu(&self) -> &[f64] {
        &self.nu
    }

    pub fn num_nodes(&self) -> usize {
        self.nu.len()
    }

    pub fn is_dense(&self) -> bool {
        matches!(
            self.action,
            Action::HardSphere {
                dense: Some(_),
                ..
            }
        )
    }

    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * self.weight
    }

    /// The raw discrete linearization `-(Q(mu, sqrt(mu) g) + Q(sqrt(mu) g, mu)) / sqrt(mu)`,
    /// neither symmetrized nor projected.
    pub fn apply_raw(&self, g: &[f64]) -> Result<Vec<f64>> {
        check_len(self.num_nodes(), g.len())?;
        Ok(match &self.action {
            Action::Relaxation { rate } => {
                let mut out = g.to_vec();
                self.basis.remove_hydro(&mut out);
                out.iter_mut().for_each(|x| *x *= rate);
                out
            }
            Action::HardSphere {
                kernel, mu, nu_d, ..
            } => kernel.apply_linearized(g, mu, self.basis.sqrt_mu(), nu_d),
        })
    }

    /// `L g`.
    pub fn apply(&self, g: &[f64]) -> Result<Vec<f64>> {
        check_len(self.num_nodes(), g.len())?;
        let mut x = g.to_vec();
        self.basis.remove_hydro(&mut x);
        let mut y = match &self.action {
            Action::Relaxation { rate } => x.iter().map(|v| rate * v).collect(),
            Action::HardSphere {
                dense: Some(a), ..
            } => matvec(a, &x),
            Action::HardSphere {
                kernel,
                mu,
                nu_d,
                dense: None,
            } => {
                let sm = self.basis.sqrt_mu();
                let a = kernel.apply_linearized(&x, mu, sm, nu_d);
                let at = kernel.apply_linearized_transpose(&x, mu, sm, nu_d);
                a.iter().zip(&at).map(|(p, q)| 0.5 * (p + q)).collect()
            }
        };
        self.basis.remove_hydro(&mut y);
        Ok(y)
    }

    /// Solves `L g = r` on the microscopic subspace.
    pub fn invert(&self, r: &[f64]) -> Result<(Vec<f64>, KrylovReport)> {
        check_len(self.num_nodes(), r.len())?;
        let r_norm = self.inner(r, r).sqrt();
        let n = self.num_nodes();
        if r_norm == 0.0 {
            return Ok((
                vec![0.0; n],
                KrylovReport {
                    iterations: 0,
                    relative_residual: 0.0,
                },
            ));
        }
        let c = self.basis.coefficients(r);
        let hydro = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        if hydro > ORTHOGONALITY_TOL * r_norm {
            return Err(Error::HydrodynamicComponent {
                relative: hydro / r_norm,
            });
        }
        let mut rhs = r.to_vec();
        self.basis.remove_hydro(&mut rhs);
        if let Action::Relaxation { rate } = self.action {
            let g = rhs.iter().map(|x| x / rate).collect();
            return Ok((
                g,
                KrylovReport {
                    iterations: 0,
                    relative_residual: 0.0,
                },
            ));
        }
        let mut g = vec![0.0; n];
        let report = pcg(
            "L^-1 conjugate gradients",
            |x: &[f64]| self.apply(x).expect("length checked"),
            |x: &[f64]| x.iter().zip(&self.diag).map(|(a, d)| a / d).collect(),
            |a: &[f64], b: &[f64]| self.inner(a, b),
            |x: &mut [f64]| self.basis.remove_hydro(x),
            &rhs,
            &mut g,
            1e-11,
            2000,
        )?;
        Ok((g, report))
    }
}

fn symmetrize(a: &mut [f64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            let s = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = s;
            a[j * n + i] = s;
        }
    }
}

pub(super) fn matvec(a: &[f64], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    parallel::map_range(n, |i| {
        a[i * n..(i + 1) * n]
            .iter()
            .zip(x)
            .map(|(p, q)| p * q)
            .sum()
    })
}

/// `L g`.
pub fn apply_l(g: &[f64], op: &LinearizedOperator) -> Result<Vec<f64>> {
    op.apply(g)
}

/// `L^{-1} r` for `r` orthogonal to the collision invariants.
pub fn invert_l(r: &[f64], op: &LinearizedOperator) -> Result<Vec<f64>> {
    op.invert(r).map(|(g, _)| g)
}

/// Smallest Rayleigh quotient `<L g, g> / |g|_nu^2` over `samples` random
/// microscopic fields `g = (I - P)(sqrt(mu) p(v))`, `p` a random polynomial
/// of degree at most four in the scaled peculiar velocity.
pub fn coercivity_estimate<R: Rng>(
    op: &LinearizedOperator,
    grid: &VelocityGrid,
    samples: usize,
    rng: &mut R,
) -> Result<f64> {
    let bg = op.background();
    let s = bg.theta.sqrt();
    let mut exponents = Vec::new();
    for a in 0..=4u32 {
        for b in 0..=4 - a {
            for c in 0..=4 - a - b {
                exponents.push([a as i32, b as i32, c as i32]);
            }
        }
    }
    let mut best = f64::INFINITY;
    for _ in 0..samples {
        let coef: Vec<f64> = exponents.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut g: Vec<f64> = grid
            .nodes()
            .iter()
            .zip(op.basis().sqrt_mu())
            .map(|(v, sm)| {
                let c = [(v[0] - bg.u[0]) / s, (v[1] - bg.u[1]) / s, (v[2] - bg.u[2]) / s];
                let p: f64 = exponents
                    .iter()
                    .zip(&coef)
                    .map(|(e, k)| k * c[0].powi(e[0]) * c[1].powi(e[1]) * c[2].powi(e[2]))
                    .sum();
                sm * p
            })
            .collect();
        op.basis().remove_hydro(&mut g);
        let lg = op.apply(&g)?;
        let num = op.inner(&lg, &g);
        let den: f64 = g
            .iter()
            .zip(op.nu())
            .map(|(x, n)| n * x * x)
            .sum::<f64>()
            * op.weight;
        best = best.min(num / den);
    }
    Ok(best)
}
