//! Run configuration: a TOML document checked against a fixed schema. Every
//! default lives here; missing keys take them, unknown keys are rejected.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cascade::CascadeOptions;
use crate::collision::{CollisionConfig, CollisionMode};
use crate::diagnostics::{validate_epsilons, SweepInputs};
use crate::error::{Error, Result};
use crate::euler::{EulerOptions, Reconstruction};
use crate::grid::{AngularQuadrature, SpatialGrid, VelocityGrid};
use crate::kinetic::KineticOptions;
use crate::maxwellian::{select_theta_m, GlobalMaxwellian, WeightConfig};
use crate::poisson::{EllipticSolveOptions, LaplacianStencil};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub cells: usize,
    pub length: f64,
    pub velocity_nodes: usize,
    /// `v_max = v_max_factor · √θ_M`.
    pub v_max_factor: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            cells: 64,
            length: 2.0 * std::f64::consts::PI,
            velocity_nodes: 16,
            v_max_factor: 8.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaPolicy {
    /// Midpoint of `[max θ/2, min θ]` over the initial temperature.
    BracketMidpoint,
    /// `physics.theta_m` as given.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsConfig {
    /// Pressure constant in `p = Kρ^{5/3}`.
    pub k: f64,
    pub beta: f64,
    pub theta_m_policy: ThetaPolicy,
    pub theta_m: f64,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self {
            k: 1.0,
            beta: 3.5,
            theta_m_policy: ThetaPolicy::BracketMidpoint,
            theta_m: 0.75,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConfig {
    pub amplitude: f64,
    pub modes: Vec<[i32; 3]>,
    /// Velocity amplitude relative to the density amplitude.
    pub velocity_ratio: f64,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            amplitude: 0.05,
            modes: vec![[1, 0, 0]],
            velocity_ratio: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollisionSection {
    pub mode: CollisionMode,
    pub bgk_rate: f64,
    pub angular: String,
    pub conservation_fix: bool,
}

impl Default for CollisionSection {
    fn default() -> Self {
        Self {
            mode: CollisionMode::Bgk,
            bgk_rate: 1.0,
            angular: "lebedev38".into(),
            conservation_fix: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EulerSection {
    pub reconstruction: Reconstruction,
    pub cfl: f64,
    pub store_every: usize,
    /// The fluid reference runs on `refinement` times as many cells per axis
    /// and is restricted back.
    pub refinement: usize,
}

impl Default for EulerSection {
    fn default() -> Self {
        Self {
            reconstruction: Reconstruction::VanLeer,
            cfl: 0.5,
            store_every: 1,
            refinement: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CascadeSection {
    /// Truncation order `k`; orders `1..2k-1` are built.
    pub order: usize,
    pub dt: f64,
    pub leakage_limit: f64,
    /// Saved Euler trajectory manifest to reuse; empty runs Euler afresh.
    pub trajectory: String,
}

impl Default for CascadeSection {
    fn default() -> Self {
        Self {
            order: 1,
            dt: 0.01,
            leakage_limit: 1e-3,
            trajectory: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KineticSection {
    pub epsilons: Vec<f64>,
    pub dt: f64,
    pub t_end: f64,
    pub store_every: usize,
    pub clip_budget: f64,
}

impl Default for KineticSection {
    fn default() -> Self {
        Self {
            epsilons: vec![0.2, 0.1, 0.05, 0.025],
            dt: 0.0025,
            t_end: 0.5,
            store_every: 4,
            clip_budget: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub newton_tol: f64,
    pub max_newton: usize,
    pub krylov_tol: f64,
    pub max_krylov: usize,
    pub stencil: LaplacianStencil,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            newton_tol: 1e-11,
            max_newton: 30,
            krylov_tol: 1e-12,
            max_krylov: 200,
            stencil: LaplacianStencil::Centered,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub grid: GridConfig,
    pub physics: PhysicsConfig,
    pub initial: InitialConfig,
    pub collision: CollisionSection,
    pub euler: EulerSection,
    pub cascade: CascadeSection,
    pub kinetic: KineticSection,
    pub solver: SolverSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 20_240_601,
            grid: GridConfig::default(),
            physics: PhysicsConfig::default(),
            initial: InitialConfig::default(),
            collision: CollisionSection::default(),
            euler: EulerSection::default(),
            cascade: CascadeSection::default(),
            kinetic: KineticSection::default(),
            solver: SolverSection::default(),
        }
    }
}

/// Rejects keys of `doc` that the default configuration does not have.
fn reject_unknown(doc: &Value, schema: &Value, path: &str) -> Result<()> {
    let (Value::Object(doc), Value::Object(schema)) = (doc, schema) else {
        return Ok(());
    };
    for (key, value) in doc {
        let full = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
        match schema.get(key) {
            None => return Err(Error::config(full, "unknown key")),
            Some(sub) => reject_unknown(value, sub, &full)?,
        }
    }
    Ok(())
}

fn from_value(doc: Value) -> Result<RunConfig> {
    let schema = serde_json::to_value(RunConfig::default())?;
    if !doc.is_object() {
        return Err(Error::config("<root>", "expected a table of settings"));
    }
    reject_unknown(&doc, &schema, "")?;
    let cfg: RunConfig = serde_path_to_error::deserialize(doc).map_err(|e| {
        let path = e.path().to_string();
        Error::config(if path == "." { "<root>".into() } else { path }, e.into_inner().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Parses and validates a TOML document; missing keys take their defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let doc: toml::Value = toml::from_str(text).map_err(|e| Error::config("<document>", e.message().to_string()))?;
    from_value(serde_json::to_value(doc)?)
}

/// Reads a TOML config, or the `config` object of a JSON run manifest.
pub fn load_config(path: &std::path::Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        let manifest: Value = serde_json::from_str(&text)?;
        let config = manifest.get("config").cloned().ok_or_else(|| Error::Format {
            path: path.display().to_string(),
            message: "manifest has no `config` object".into(),
        })?;
        return from_value(config);
    }
    parse_config(&text)
}

fn require(ok: bool, key: &str, message: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(key, message))
    }
}

impl RunConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Checks every module precondition that does not need a computed state.
    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        require((1..=3).contains(&g.dim), "grid.dim", format!("must be 1, 2 or 3, got {}", g.dim))?;
        require(g.cells >= 2, "grid.cells", format!("need at least 2 cells per axis, got {}", g.cells))?;
        require(g.length > 0.0 && g.length.is_finite(), "grid.length", "must be positive")?;
        require(
            g.velocity_nodes >= 4 && g.velocity_nodes % 2 == 0,
            "grid.velocity_nodes",
            format!(
                "{} nodes per axis: the count must be even (at least 4) so the midpoint nodes are closed under v ↦ -v and none sits at v = 0",
                g.velocity_nodes
            ),
        )?;
        require(g.v_max_factor > 0.0 && g.v_max_factor.is_finite(), "grid.v_max_factor", "must be positive")?;

        let p = &self.physics;
        require(p.k > 0.0 && p.k.is_finite(), "physics.k", "must be positive")?;
        require(p.beta >= 3.5, "physics.beta", format!("β ≥ 7/2 required, got {}", p.beta))?;
        require(p.theta_m > 0.0 && p.theta_m.is_finite(), "physics.theta_m", "must be positive")?;

        let i = &self.initial;
        require(i.amplitude.abs() <= 0.1, "initial.amplitude", format!("|a| ≤ 0.1 required, got {}", i.amplitude))?;
        require(!i.modes.is_empty(), "initial.modes", "need at least one mode")?;
        for m in &i.modes {
            require(
                m.iter().any(|&x| x != 0) && m[g.dim..].iter().all(|&x| x == 0),
                "initial.modes",
                format!("mode {m:?} must be nonzero and lie in the first {} axes", g.dim),
            )?;
            require(
                m.iter().all(|x| (x.unsigned_abs() as usize) < g.cells / 2),
                "initial.modes",
                format!("mode {m:?} is not resolved by {} cells", g.cells),
            )?;
        }
        require(i.velocity_ratio.is_finite(), "initial.velocity_ratio", "must be finite")?;

        let c = &self.collision;
        require(c.bgk_rate > 0.0 && c.bgk_rate.is_finite(), "collision.bgk_rate", "must be positive")?;
        AngularQuadrature::from_name(&c.angular).map_err(|e| Error::config("collision.angular", e.to_string()))?;

        let e = &self.euler;
        require(e.cfl > 0.0 && e.cfl <= 1.0, "euler.cfl", format!("must lie in (0, 1], got {}", e.cfl))?;
        require(e.store_every >= 1, "euler.store_every", "must be at least 1")?;
        require(e.refinement >= 1, "euler.refinement", "must be at least 1")?;

        let s = &self.solver;
        require(s.newton_tol > 0.0, "solver.newton_tol", "must be positive")?;
        require(s.krylov_tol > 0.0, "solver.krylov_tol", "must be positive")?;
        require(s.max_newton >= 1, "solver.max_newton", "must be at least 1")?;
        require(s.max_krylov >= 1, "solver.max_krylov", "must be at least 1")?;

        let k = &self.kinetic;
        require(!k.epsilons.is_empty(), "kinetic.epsilons", "need at least one ε")?;
        let mut sorted = k.epsilons.clone();
        sorted.sort_by(f64::total_cmp);
        for (n, eps) in sorted.iter().enumerate() {
            require(*eps > 0.0 && eps.is_finite(), "kinetic.epsilons", format!("ε must be positive, got {eps}"))?;
            require(n == 0 || sorted[n - 1] != *eps, "kinetic.epsilons", format!("duplicate ε {eps}"))?;
        }
        require(k.dt > 0.0, "kinetic.dt", "must be positive")?;
        require(k.t_end > 0.0, "kinetic.t_end", "must be positive")?;
        let steps = (k.t_end / k.dt).round();
        require(
            (steps * k.dt - k.t_end).abs() <= 1e-9 * k.t_end,
            "kinetic.dt",
            format!("{} does not divide t_end = {}", k.dt, k.t_end),
        )?;
        require(k.store_every >= 1, "kinetic.store_every", "must be at least 1")?;
        require((0.0..=1.0).contains(&k.clip_budget), "kinetic.clip_budget", "must lie in [0, 1]")?;

        self.cascade_options().validate()?;
        let tau = 0.5 * self.cascade.dt;
        let aligned = |n: f64| {
            let q = n * k.dt / tau;
            (q - q.round()).abs() < 1e-9 * q.max(1.0)
        };
        require(
            aligned(k.store_every as f64) && aligned(steps),
            "kinetic.store_every",
            format!("stored kinetic times must fall on the cascade half step {tau}"),
        )?;
        Ok(())
    }

    pub fn elliptic(&self) -> EllipticSolveOptions {
        let s = &self.solver;
        EllipticSolveOptions {
            newton_tol: s.newton_tol,
            max_newton: s.max_newton,
            krylov_tol: s.krylov_tol,
            max_krylov: s.max_krylov,
            stencil: s.stencil,
        }
    }

    pub fn spatial_grid(&self) -> Result<SpatialGrid> {
        SpatialGrid::new(self.grid.dim, self.grid.cells, self.grid.length)
    }

    /// The grid the Euler reference runs on.
    pub fn fine_grid(&self) -> Result<SpatialGrid> {
        SpatialGrid::new(self.grid.dim, self.grid.cells * self.euler.refinement, self.grid.length)
    }

    pub fn euler_options(&self) -> EulerOptions {
        EulerOptions {
            reconstruction: self.euler.reconstruction,
            cfl: self.euler.cfl,
            elliptic: self.elliptic(),
        }
    }

    pub fn global_maxwellian(&self, theta: &[f64]) -> Result<GlobalMaxwellian> {
        match self.physics.theta_m_policy {
            ThetaPolicy::BracketMidpoint => select_theta_m(theta),
            ThetaPolicy::Fixed => Ok(GlobalMaxwellian {
                theta_m: self.physics.theta_m,
            }),
        }
    }

    pub fn weight(&self) -> Result<WeightConfig> {
        WeightConfig::new(self.physics.beta)
    }

    pub fn velocity_grid(&self, global: &GlobalMaxwellian) -> Result<VelocityGrid> {
        VelocityGrid::new(self.grid.velocity_nodes, self.grid.v_max_factor * global.theta_m.sqrt())
    }

    pub fn collision_config(&self) -> Result<CollisionConfig> {
        let c = &self.collision;
        let angular = AngularQuadrature::from_name(&c.angular)?;
        Ok(CollisionConfig {
            mode: c.mode,
            angular,
            conservation_fix: c.conservation_fix,
            bgk_rate: c.bgk_rate,
        })
    }

    pub fn cascade_options(&self) -> CascadeOptions {
        CascadeOptions {
            order: self.cascade.order,
            dt: self.cascade.dt,
            t_end: self.kinetic.t_end,
            leakage_limit: self.cascade.leakage_limit,
            elliptic: self.elliptic(),
        }
    }

    pub fn kinetic_options(&self) -> KineticOptions {
        KineticOptions {
            dt: self.kinetic.dt,
            clip_budget: self.kinetic.clip_budget,
            elliptic: self.elliptic(),
        }
    }

    /// Sweep inputs; the ε list must have at least three halving values.
    pub fn sweep_inputs(&self) -> Result<SweepInputs> {
        validate_epsilons(&self.kinetic.epsilons)?;
        Ok(SweepInputs {
            epsilons: self.kinetic.epsilons.clone(),
            t_end: self.kinetic.t_end,
            store_every: self.kinetic.store_every,
            beta: self.physics.beta,
            kinetic: self.kinetic_options(),
        })
    }
}
