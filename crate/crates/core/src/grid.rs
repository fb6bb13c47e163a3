//! Periodic spatial grids, truncated Cartesian velocity grids and quadrature on
//! the unit sphere.
//!
//! Phase-space fields are stored cell-major: `field[cell * n_v + node]`, so the
//! velocity samples of one spatial cell are contiguous.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Uniform periodic grid on the torus `[0, length)^dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    dim: usize,
    cells_per_axis: usize,
    length: f64,
    spacing: f64,
    cell_volume: f64,
}

impl SpatialGrid {
    pub fn new(dim: usize, cells_per_axis: usize, length: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!(
                "spatial dimension must be 1, 2 or 3, got {dim}"
            )));
        }
        if cells_per_axis < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 cells per axis, got {cells_per_axis}"
            )));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "period length must be positive, got {length}"
            )));
        }
        let spacing = length / cells_per_axis as f64;
        Ok(Self {
            dim,
            cells_per_axis,
            length,
            spacing,
            cell_volume: spacing.powi(dim as i32),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells_per_axis(&self) -> usize {
        self.cells_per_axis
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }

    pub fn num_cells(&self) -> usize {
        self.cells_per_axis.pow(self.dim as u32)
    }

    /// Distance in flat index between neighbours along `axis` (axis 0 slowest).
    pub fn stride(&self, axis: usize) -> usize {
        self.cells_per_axis.pow((self.dim - 1 - axis) as u32)
    }

    /// Per-axis integer coordinates; inactive axes are zero.
    pub fn multi_index(&self, cell: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        let mut rest = cell;
        for axis in (0..self.dim).rev() {
            idx[axis] = rest % self.cells_per_axis;
            rest /= self.cells_per_axis;
        }
        idx
    }

    pub fn cell_index(&self, idx: [usize; 3]) -> usize {
        (0..self.dim).fold(0, |acc, axis| acc * self.cells_per_axis + idx[axis])
    }

    /// Periodic neighbour of `cell` displaced by `offset` cells along `axis`.
    pub fn shifted(&self, cell: usize, axis: usize, offset: isize) -> usize {
        let n = self.cells_per_axis as isize;
        let mut idx = self.multi_index(cell);
        idx[axis] = (idx[axis] as isize + offset).rem_euclid(n) as usize;
        self.cell_index(idx)
    }

    /// Node coordinate `x_j = j * length / cells_per_axis` per axis.
    pub fn position(&self, cell: usize) -> [f64; 3] {
        let idx = self.multi_index(cell);
        let mut x = [0.0; 3];
        for axis in 0..self.dim {
            x[axis] = idx[axis] as f64 * self.spacing;
        }
        x
    }

    pub fn positions(&self) -> Vec<[f64; 3]> {
        (0..self.num_cells()).map(|c| self.position(c)).collect()
    }

    /// `sum(values) * cell_volume`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().sum::<f64>() * self.cell_volume
    }

    /// Discrete L2 norm over the torus.
    pub fn l2_norm(&self, values: &[f64]) -> f64 {
        (values.iter().map(|v| v * v).sum::<f64>() * self.cell_volume).sqrt()
    }
}

/// Uniform midpoint grid on `[-v_max, v_max]^3`.
///
/// With an even node count there is no node at the origin and the node set is
/// closed under `v -> -v`; the mirror of flat index `i` is `n_v - 1 - i`.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityGrid {
    nodes_per_axis: usize,
    v_max: f64,
    spacing: f64,
    weight: f64,
    axis: Vec<f64>,
    nodes: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

impl VelocityGrid {
    pub fn new(nodes_per_axis: usize, v_max: f64) -> Result<Self> {
        if nodes_per_axis < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 velocity nodes per axis, got {nodes_per_axis}"
            )));
        }
        if nodes_per_axis % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "velocity nodes per axis must be even (got {nodes_per_axis}): midpoint nodes of an \
                 even count are closed under v -> -v, which odd-moment cancellation and collision \
                 symmetry rely on"
            )));
        }
        if !(v_max > 0.0 && v_max.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "v_max must be positive, got {v_max}"
            )));
        }
        let n = nodes_per_axis;
        let spacing = 2.0 * v_max / n as f64;
        let half = (n / 2) as f64;
        // (j + 1/2 - n/2) is exact, so mirrored nodes are exact negatives.
        let axis: Vec<f64> = (0..n).map(|j| (j as f64 + 0.5 - half) * spacing).collect();
        let mut nodes = Vec::with_capacity(n * n * n);
        for &a in &axis {
            for &b in &axis {
                for &c in &axis {
                    nodes.push([a, b, c]);
                }
            }
        }
        let weight = spacing * spacing * spacing;
        let weights = vec![weight; nodes.len()];
        Ok(Self {
            nodes_per_axis,
            v_max,
            spacing,
            weight,
            axis,
            nodes,
            weights,
        })
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.nodes_per_axis
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// The (uniform) quadrature weight of every node.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn index(&self, a: usize, b: usize, c: usize) -> usize {
        (a * self.nodes_per_axis + b) * self.nodes_per_axis + c
    }

    pub fn axis_index(&self, node: usize) -> [usize; 3] {
        let n = self.nodes_per_axis;
        [node / (n * n), (node / n) % n, node % n]
    }

    pub fn mirror(&self, node: usize) -> usize {
        self.nodes.len() - 1 - node
    }

    /// True when the node lies on the outer layer of the truncated box.
    pub fn on_boundary(&self, node: usize) -> bool {
        let last = self.nodes_per_axis - 1;
        self.axis_index(node).iter().any(|&j| j == 0 || j == last)
    }

    /// `sum_i w_i values_i`, summed in mirror pairs so that the result is
    /// bitwise invariant under `v -> -v`.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        check_len(self.num_nodes(), values.len())?;
        Ok(self.integrate_unchecked(values))
    }

    pub(crate) fn integrate_unchecked(&self, values: &[f64]) -> f64 {
        let n = values.len();
        let mut sum = 0.0;
        for i in 0..n / 2 {
            sum += values[i] + values[n - 1 - i];
        }
        sum * self.weight
    }

    /// Quadrature inner product `sum_i w_i a_i b_i`.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * self.weight
    }

    pub fn norm(&self, a: &[f64]) -> f64 {
        self.inner(a, a).sqrt()
    }
}

/// Quadrature on the unit sphere for the collision angle.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularQuadrature {
    name: String,
    degree: usize,
    directions: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

impl AngularQuadrature {
    pub fn new(
        name: impl Into<String>,
        degree: usize,
        directions: Vec<[f64; 3]>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        check_len(directions.len(), weights.len())?;
        for d in &directions {
            let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            if (norm - 1.0).abs() > 1e-14 {
                return Err(Error::InvalidInput(format!(
                    "angular direction {d:?} has norm {norm}"
                )));
            }
        }
        if weights.iter().any(|&w| w <= 0.0) {
            return Err(Error::InvalidInput("angular weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 4.0 * PI).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "angular weights sum to {total}, expected 4 pi"
            )));
        }
        Ok(Self {
            name: name.into(),
            degree,
            directions,
            weights,
        })
    }

    /// The 38-point Lebedev rule (polynomial degree 9).
    pub fn lebedev38() -> Self {
        let mut dirs = Vec::with_capacity(38);
        let mut w = Vec::with_capacity(38);
        let four_pi = 4.0 * PI;
        for axis in 0..3 {
            for s in [1.0, -1.0] {
                let mut d = [0.0; 3];
                d[axis] = s;
                dirs.push(d);
                w.push(four_pi / 105.0);
            }
        }
        let c = 1.0 / 3f64.sqrt();
        for sx in [1.0, -1.0] {
            for sy in [1.0, -1.0] {
                for sz in [1.0, -1.0] {
                    dirs.push([sx * c, sy * c, sz * c]);
                    w.push(four_pi * 9.0 / 280.0);
                }
            }
        }
        let p = ((1.0 - 1.0 / 3f64.sqrt()) / 2.0).sqrt();
        let q = (1.0 - p * p).sqrt();
        for (i, j) in [(0usize, 1usize), (1, 0), (0, 2), (2, 0), (1, 2), (2, 1)] {
            for si in [1.0, -1.0] {
                for sj in [1.0, -1.0] {
                    let mut d = [0.0; 3];
                    d[i] = si * p;
                    d[j] = sj * q;
                    dirs.push(d);
                    w.push(four_pi / 35.0);
                }
            }
        }
        Self::new("lebedev38", 9, dirs, w).expect("tabulated Lebedev rule is valid")
    }

    /// Gauss-Legendre in `cos(polar)` times the uniform rule in azimuth, exact
    /// for spherical polynomials of degree `min(2 n_polar - 1, n_azimuth - 1)`.
    pub fn product(n_polar: usize, n_azimuth: usize) -> Result<Self> {
        if n_polar < 1 || n_azimuth < 2 || n_azimuth % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "product rule needs n_polar >= 1 and an even n_azimuth >= 2, got {n_polar}x{n_azimuth}"
            )));
        }
        let (xs, ws) = gauss_legendre(n_polar);
        let mut dirs = Vec::with_capacity(n_polar * n_azimuth);
        let mut w = Vec::with_capacity(n_polar * n_azimuth);
        let dphi = 2.0 * PI / n_azimuth as f64;
        for (x, wx) in xs.iter().zip(&ws) {
            let s = (1.0 - x * x).sqrt();
            for k in 0..n_azimuth {
                let phi = (k as f64 + 0.5) * dphi;
                let mut d = [s * phi.cos(), s * phi.sin(), *x];
                let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                d.iter_mut().for_each(|c| *c /= norm);
                dirs.push(d);
                w.push(wx * dphi);
            }
        }
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x *= 4.0 * PI / total);
        let degree = (2 * n_polar - 1).min(n_azimuth - 1);
        Self::new(format!("product{n_polar}x{n_azimuth}"), degree, dirs, w)
    }

    /// Parses `lebedev38` or `product:<polar>x<azimuth>`.
    pub fn from_name(name: &str) -> Result<Self> {
        if name == "lebedev38" {
            return Ok(Self::lebedev38());
        }
        if let Some(spec) = name.strip_prefix("product:") {
            let parsed = spec
                .split_once('x')
                .and_then(|(a, b)| Some((a.parse().ok()?, b.parse().ok()?)));
            if let Some((a, b)) = parsed {
                return Self::product(a, b);
            }
        }
        Err(Error::InvalidInput(format!(
            "unknown angular rule '{name}' (expected 'lebedev38' or 'product:<n>x<m>')"
        )))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn directions(&self) -> &[[f64; 3]] {
        &self.directions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// Quadrature value of `int_{S^2} |a . omega| d omega` (exactly `2 pi |a|`).
    pub fn integrate_abs_dot(&self, a: [f64; 3]) -> f64 {
        self.directions
            .iter()
            .zip(&self.weights)
            .map(|(d, w)| w * (a[0] * d[0] + a[1] * d[1] + a[2] * d[2]).abs())
            .sum()
    }

    /// One representative of each antipodal pair with the pair's combined
    /// weight. Falls back to the full rule when it is not centrally symmetric.
    pub fn half_rule(&self) -> (Vec<[f64; 3]>, Vec<f64>) {
        let n = self.directions.len();
        let mut used = vec![false; n];
        let mut dirs = Vec::new();
        let mut weights = Vec::new();
        for i in 0..n {
            if used[i] {
                continue;
            }
            let d = self.directions[i];
            let partner = (i + 1..n).find(|&j| {
                !used[j] && {
                    let e = self.directions[j];
                    (d[0] + e[0]).abs() < 1e-13
                        && (d[1] + e[1]).abs() < 1e-13
                        && (d[2] + e[2]).abs() < 1e-13
                        && (self.weights[i] - self.weights[j]).abs() < 1e-14
                }
            });
            match partner {
                Some(j) => {
                    used[i] = true;
                    used[j] = true;
                    dirs.push(d);
                    weights.push(self.weights[i] + self.weights[j]);
                }
                None => return (self.directions.clone(), self.weights.clone()),
            }
        }
        (dirs, weights)
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        xs[i] = x;
        ws[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (xs, ws)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spatial_grid_examples() {
        let g = SpatialGrid::new(1, 4, 1.0).unwrap();
        let xs: Vec<f64> = g.positions().iter().map(|p| p[0]).collect();
        assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75]);
        assert_eq!(g.cell_volume(), 0.25);

        let g = SpatialGrid::new(1, 2, 2.0).unwrap();
        assert_eq!(g.positions().iter().map(|p| p[0]).collect::<Vec<_>>(), vec![0.0, 1.0]);
        assert_eq!(g.cell_volume(), 1.0);

        let g = SpatialGrid::new(2, 3, 3.0).unwrap();
        assert_eq!(g.num_cells(), 9);
        assert_eq!(g.cell_volume(), 1.0);
    }

    #[test]
    fn spatial_grid_rejects_bad_input() {
        assert!(SpatialGrid::new(0, 4, 1.0).is_err());
        assert!(SpatialGrid::new(4, 4, 1.0).is_err());
        assert!(SpatialGrid::new(1, 1, 1.0).is_err());
        assert!(SpatialGrid::new(1, 4, 0.0).is_err());
        assert!(SpatialGrid::new(1, 4, -1.0).is_err());
    }

    #[test]
    fn periodic_neighbours() {
        let g = SpatialGrid::new(2, 4, 1.0).unwrap();
        let c = g.cell_index([0, 3, 0]);
        assert_eq!(g.multi_index(g.shifted(c, 1, 1)), [0, 0, 0]);
        assert_eq!(g.multi_index(g.shifted(c, 0, -1)), [3, 3, 0]);
        assert_eq!(g.stride(0), 4);
        assert_eq!(g.stride(1), 1);
    }

    #[test]
    fn velocity_grid_weights() {
        let g = VelocityGrid::new(2, 6.0).unwrap();
        assert_eq!(g.num_nodes(), 8);
        assert!(g.weights().iter().all(|&w| w == 216.0));
        assert_eq!(g.integrate(&vec![1.0; 8]).unwrap(), 1728.0);

        let g = VelocityGrid::new(4, 8.0).unwrap();
        assert_eq!(g.num_nodes(), 64);
        assert!(g.weights().iter().all(|&w| w == 64.0));
        assert_eq!(g.integrate(&vec![1.0; 64]).unwrap(), 4096.0);
    }

    #[test]
    fn velocity_grid_is_symmetric() {
        let g = VelocityGrid::new(2, 1.0).unwrap();
        for (i, v) in g.nodes().iter().enumerate() {
            let m = g.nodes()[g.mirror(i)];
            assert_eq!([-v[0], -v[1], -v[2]], m);
        }
        let g = VelocityGrid::new(10, 3.7).unwrap();
        for (i, v) in g.nodes().iter().enumerate() {
            let m = g.nodes()[g.mirror(i)];
            assert_eq!([-v[0], -v[1], -v[2]], m);
        }
    }

    #[test]
    fn velocity_grid_rejects_odd_count() {
        let err = VelocityGrid::new(5, 8.0).unwrap_err().to_string();
        assert!(err.contains("even"), "{err}");
        assert!(err.contains("-v"), "{err}");
        assert!(VelocityGrid::new(4, 0.0).is_err());
    }

    #[test]
    fn integrate_checks_length() {
        let g = VelocityGrid::new(2, 1.0).unwrap();
        assert!(matches!(
            g.integrate(&[1.0; 3]),
            Err(Error::LengthMismatch { expected: 8, got: 3 })
        ));
    }

    #[test]
    fn lebedev_rule_is_valid() {
        let rule = AngularQuadrature::lebedev38();
        assert_eq!(rule.len(), 38);
        let total: f64 = rule.weights().iter().sum();
        assert!((total - 4.0 * PI).abs() < 1e-12);
        // Degree-9 exactness on monomials: int x^2 = 4pi/3, int x^4 = 4pi/5,
        // int x^2 y^2 z^2 = 4pi/105, int x^8 = 4pi/9.
        let integ = |f: &dyn Fn([f64; 3]) -> f64| -> f64 {
            rule.directions().iter().zip(rule.weights()).map(|(d, w)| w * f(*d)).sum()
        };
        assert!((integ(&|d| d[0] * d[0]) - 4.0 * PI / 3.0).abs() < 1e-13);
        assert!((integ(&|d| d[0].powi(4)) - 4.0 * PI / 5.0).abs() < 1e-13);
        assert!((integ(&|d| (d[0] * d[1] * d[2]).powi(2)) - 4.0 * PI / 105.0).abs() < 1e-13);
        assert!((integ(&|d| d[2].powi(8)) - 4.0 * PI / 9.0).abs() < 1e-13);
        let (half, w) = rule.half_rule();
        assert_eq!(half.len(), 19);
        assert!((w.iter().sum::<f64>() - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn abs_dot_integral_is_close_to_closed_form() {
        let a: [f64; 3] = [0.3, -1.2, 0.7];
        let exact = 2.0 * PI * (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
        let leb = AngularQuadrature::lebedev38().integrate_abs_dot(a);
        assert!((leb - exact).abs() / exact < 0.02, "{leb} vs {exact}");
        let fine = AngularQuadrature::product(32, 64).unwrap().integrate_abs_dot(a);
        assert!((fine - exact).abs() / exact < 1e-3, "{fine} vs {exact}");
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(5);
        let int = |p: i32| -> f64 { x.iter().zip(&w).map(|(x, w)| w * x.powi(p)).sum() };
        assert!((int(0) - 2.0).abs() < 1e-14);
        assert!((int(8) - 2.0 / 9.0).abs() < 1e-14);
        assert!(int(7).abs() < 1e-14);
    }

    #[test]
    fn rule_names_parse() {
        assert_eq!(AngularQuadrature::from_name("lebedev38").unwrap().len(), 38);
        assert_eq!(AngularQuadrature::from_name("product:4x8").unwrap().len(), 32);
        assert!(AngularQuadrature::from_name("foo").is_err());
    }
}
