//! Collision operators: the hard-sphere Boltzmann operator `Q`, its
//! linearization `L` and bilinear form `Gamma`, and a BGK surrogate.

mod bgk;
mod kernel;
mod linearized;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use bgk::{bgk_relax, bgk_relax_exact, matched_maxwellian, maxwellian_second_variation};
pub use linearized::{apply_l, coercivity_estimate, invert_l, LinearizedOperator, DENSE_LIMIT};

use crate::error::{check_len, Error, Result};
use crate::grid::{AngularQuadrature, VelocityGrid};
use crate::maxwellian::{
    correct_moments, eval_local_maxwellian, eval_sqrt_maxwellian, moments, LocalMaxwellianParams,
    Moments,
};
use kernel::HardSphereKernel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollisionMode {
    HardSphere,
    Bgk,
}

#[derive(Debug, Clone)]
pub struct CollisionConfig {
    pub mode: CollisionMode,
    pub angular: AngularQuadrature,
    pub conservation_fix: bool,
    /// Relaxation rate of the BGK surrogate.
    pub bgk_rate: f64,
}

impl CollisionConfig {
    pub fn hard_sphere(angular: AngularQuadrature, conservation_fix: bool) -> Self {
        Self {
            mode: CollisionMode::HardSphere,
            angular,
            conservation_fix,
            bgk_rate: 1.0,
        }
    }

    pub fn bgk(rate: f64) -> Self {
        Self {
            mode: CollisionMode::Bgk,
            angular: AngularQuadrature::lebedev38(),
            conservation_fix: true,
            bgk_rate: rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == CollisionMode::Bgk && !(self.bgk_rate > 0.0 && self.bgk_rate.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "BGK rate must be positive, got {}",
                self.bgk_rate
            )));
        }
        Ok(())
    }
}

/// A collision configuration bound to a velocity grid, with the hard-sphere
/// stencil precomputed.
#[derive(Debug, Clone)]
pub struct CollisionOperator {
    grid: VelocityGrid,
    cfg: CollisionConfig,
    kernel: Option<Arc<HardSphereKernel>>,
}

impl CollisionOperator {
    pub fn new(grid: &VelocityGrid, cfg: &CollisionConfig) -> Result<Self> {
        cfg.validate()?;
        let kernel = match cfg.mode {
            CollisionMode::HardSphere => Some(Arc::new(HardSphereKernel::new(grid, &cfg.angular))),
            CollisionMode::Bgk => None,
        };
        Ok(Self {
            grid: grid.clone(),
            cfg: cfg.clone(),
            kernel,
        })
    }

    pub fn grid(&self) -> &VelocityGrid {
        &self.grid
    }

    pub fn config(&self) -> &CollisionConfig {
        &self.cfg
    }

    pub(crate) fn kernel(&self) -> Option<&Arc<HardSphereKernel>> {
        self.kernel.as_ref()
    }

    fn hard_sphere_kernel(&self) -> Result<&HardSphereKernel> {
        self.kernel.as_deref().ok_or_else(|| {
            Error::InvalidInput("the hard-sphere operator is not available in BGK mode".into())
        })
    }

    /// Hard-sphere `Q(F1, F2)`; the interpolation reference is the Maxwellian
    /// matching the moments of `F1` (or `F2`, or the unit Maxwellian).
    pub fn collide(&self, f1: &[f64], f2: &[f64]) -> Result<Vec<f64>> {
        let reference = [f1, f2]
            .iter()
            .find_map(|f| moments(f, &self.grid).ok()?.maxwellian_params().ok())
            .unwrap_or(LocalMaxwellianParams::centered(1.0));
        self.collide_with_reference(f1, f2, &reference, self.cfg.conservation_fix)
    }

    pub fn collide_with_reference(
        &self,
        f1: &[f64],
        f2: &[f64],
        reference: &LocalMaxwellianParams,
        conservation_fix: bool,
    ) -> Result<Vec<f64>> {
        let n = self.grid.num_nodes();
        check_len(n, f1.len())?;
        check_len(n, f2.len())?;
        let kernel = self.hard_sphere_kernel()?;
        let m_ref = eval_local_maxwellian(reference, &self.grid);
        let mut q = kernel.collide(f1, f2, &m_ref);
        if conservation_fix {
            correct_moments(&mut q, &Moments::default(), &m_ref, reference.u, &self.grid)?;
        }
        Ok(q)
    }

    /// The symmetric bilinear collision term `Q(F_i, F_j)` used in the Hilbert
    /// cascade, expanded around `background`.
    pub fn bilinear(
        &self,
        f1: &[f64],
        f2: &[f64],
        background: &LocalMaxwellianParams,
    ) -> Result<Vec<f64>> {
        match self.cfg.mode {
            CollisionMode::HardSphere => {
                self.collide_with_reference(f1, f2, background, self.cfg.conservation_fix)
            }
            CollisionMode::Bgk => {
                bgk::bgk_bilinear(f1, f2, background, &self.grid, self.cfg.bgk_rate)
            }
        }
    }

    /// `Gamma(g1, g2) = Q(sqrt(mu) g1, sqrt(mu) g2) / sqrt(mu)`.
    pub fn gamma(
        &self,
        g1: &[f64],
        g2: &[f64],
        background: &LocalMaxwellianParams,
    ) -> Result<Vec<f64>> {
        let n = self.grid.num_nodes();
        check_len(n, g1.len())?;
        check_len(n, g2.len())?;
        let sqrt_mu = eval_sqrt_maxwellian(background, &self.grid);
        let f1: Vec<f64> = g1.iter().zip(&sqrt_mu).map(|(a, b)| a * b).collect();
        let f2: Vec<f64> = g2.iter().zip(&sqrt_mu).map(|(a, b)| a * b).collect();
        let q = self.bilinear(&f1, &f2, background)?;
        Ok(q.iter().zip(&sqrt_mu).map(|(a, b)| a / b).collect())
    }
}

/// One-shot hard-sphere `Q(F1, F2)`.
pub fn collide(
    f1: &[f64],
    f2: &[f64],
    grid: &VelocityGrid,
    cfg: &CollisionConfig,
) -> Result<Vec<f64>> {
    if cfg.mode != CollisionMode::HardSphere {
        return Err(Error::InvalidInput(
            "collide needs the hard-sphere mode; use bgk_relax for BGK".into(),
        ));
    }
    CollisionOperator::new(grid, cfg)?.collide(f1, f2)
}

/// `Gamma(g1, g2)` for a one-off evaluation.
pub fn apply_gamma(
    g1: &[f64],
    g2: &[f64],
    background: &LocalMaxwellianParams,
    grid: &VelocityGrid,
    cfg: &CollisionConfig,
) -> Result<Vec<f64>> {
    CollisionOperator::new(grid, cfg)?.gamma(g1, g2, background)
}

/// Mean relative speed `int |u - v| mu(u) du` for a Maxwellian, in closed form.
fn mean_relative_speed(background: &LocalMaxwellianParams, v: [f64; 3]) -> f64 {
    let c = [v[0] - background.u[0], v[1] - background.u[1], v[2] - background.u[2]];
    let r = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
    let a = (2.0 * background.theta).sqrt();
    let s = r / a;
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let shape = if s < 1e-4 {
        // (s + 1/(2s)) erf(s) + exp(-s^2)/sqrt(pi) = (2 + 2 s^2 / 3) / sqrt(pi) + O(s^4)
        (2.0 + 2.0 * s * s / 3.0) / sqrt_pi
    } else {
        (s + 0.5 / s) * statrs::function::erf::erf(s) + (-s * s).exp() / sqrt_pi
    };
    background.rho * a * shape
}

/// `nu(v) = int int |(u - v) . omega| mu(u) d omega du = 2 pi int |u - v| mu(u) du`.
pub fn collision_frequency(background: &LocalMaxwellianParams, grid: &VelocityGrid) -> Vec<f64> {
    grid.nodes()
        .iter()
        .map(|&v| 2.0 * std::f64::consts::PI * mean_relative_speed(background, v))
        .collect()
}
