//! Fourier tools on the periodic spatial grid: transforms, spectral
//! derivatives, exact shifts and constant-coefficient solves.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::SpatialGrid;

#[derive(Clone)]
pub struct Spectral {
    grid: SpatialGrid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Signed wavenumber `2 pi j / L` of each index along one axis.
    wavenumbers: Vec<f64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: &SpatialGrid) -> Self {
        let n = grid.cells_per_axis();
        let mut planner = FftPlanner::new();
        let wavenumbers = (0..n)
            .map(|j| {
                let s = if j <= n / 2 { j as f64 } else { j as f64 - n as f64 };
                2.0 * PI * s / grid.length()
            })
            .collect();
        Self {
            grid: grid.clone(),
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            wavenumbers,
        }
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    /// Index along one axis that carries the unpaired Nyquist mode.
    fn is_nyquist(&self, j: usize) -> bool {
        let n = self.grid.cells_per_axis();
        n % 2 == 0 && j == n / 2
    }

    fn transform(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.grid.cells_per_axis();
        let dim = self.grid.dim();
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        for axis in 0..dim {
            let stride = self.grid.stride(axis);
            let total = data.len();
            for start in 0..total {
                // Visit each line once, from the element whose axis index is zero.
                if (start / stride) % n != 0 {
                    continue;
                }
                for (k, l) in line.iter_mut().enumerate() {
                    *l = data[start + k * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (k, l) in line.iter().enumerate() {
                    data[start + k * stride] = *l;
                }
            }
        }
    }

    pub fn forward(&self, field: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = field.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.transform(&mut data, &self.forward);
        data
    }

    /// Inverse transform, normalized, keeping the real part.
    pub fn inverse(&self, mut data: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut data, &self.inverse);
        let scale = 1.0 / data.len() as f64;
        data.iter().map(|z| z.re * scale).collect()
    }

    /// Per-axis wavenumber indices of a flat spectral index.
    fn mode(&self, flat: usize) -> [usize; 3] {
        self.grid.multi_index(flat)
    }

    /// Applies a Fourier multiplier `symbol(j)` given the per-axis indices.
    pub fn apply_multiplier<F>(&self, field: &[f64], symbol: F) -> Vec<f64>
    where
        F: Fn([usize; 3]) -> Complex64,
    {
        let mut hat = self.forward(field);
        for (flat, z) in hat.iter_mut().enumerate() {
            *z *= symbol(self.mode(flat));
        }
        self.inverse(hat)
    }

    /// Spectral `d/dx_axis`; the Nyquist mode is dropped.
    pub fn derivative(&self, field: &[f64], axis: usize) -> Vec<f64> {
        self.apply_multiplier(field, |j| {
            if self.is_nyquist(j[axis]) {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, self.wavenumbers[j[axis]])
            }
        })
    }

    /// Spectral gradient; inactive axes get zero fields.
    pub fn gradient(&self, field: &[f64]) -> [Vec<f64>; 3] {
        std::array::from_fn(|axis| {
            if axis < self.grid.dim() {
                self.derivative(field, axis)
            } else {
                vec![0.0; field.len()]
            }
        })
    }

    /// Exact translation `f(x - shift)` of the trigonometric interpolant. The
    /// Nyquist mode keeps a real factor `cos(k s)` so the result stays real.
    pub fn shift(&self, field: &[f64], shift: [f64; 3]) -> Vec<f64> {
        let mut hat = self.forward(field);
        self.shift_spectrum(&mut hat, shift);
        self.inverse(hat)
    }

    pub fn shift_spectrum(&self, hat: &mut [Complex64], shift: [f64; 3]) {
        for (flat, z) in hat.iter_mut().enumerate() {
            let j = self.mode(flat);
            let mut factor = Complex64::new(1.0, 0.0);
            for axis in 0..self.grid.dim() {
                let phase = self.wavenumbers[j[axis]] * shift[axis];
                factor *= if self.is_nyquist(j[axis]) {
                    Complex64::new(phase.cos(), 0.0)
                } else {
                    Complex64::new(phase.cos(), -phase.sin())
                };
            }
            *z *= factor;
        }
    }

    /// Eigenvalue of the second-order centred Laplacian for mode `j`.
    pub fn centered_laplacian_symbol(&self, j: [usize; 3]) -> f64 {
        let n = self.grid.cells_per_axis() as f64;
        let h = self.grid.spacing();
        (0..self.grid.dim())
            .map(|a| {
                let s = (PI * j[a] as f64 / n).sin();
                -4.0 * s * s / (h * h)
            })
            .sum()
    }

    /// Eigenvalue `-|k|^2` of the exact Laplacian for mode `j`.
    pub fn spectral_laplacian_symbol(&self, j: [usize; 3]) -> f64 {
        -(0..self.grid.dim())
            .map(|a| self.wavenumbers[j[a]].powi(2))
            .sum::<f64>()
    }

    /// Spectral Laplacian.
    pub fn laplacian(&self, field: &[f64]) -> Vec<f64> {
        self.apply_multiplier(field, |j| Complex64::new(self.spectral_laplacian_symbol(j), 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_of_trigonometric_field() {
        let g = SpatialGrid::new(2, 16, 2.0 * PI).unwrap();
        let s = Spectral::new(&g);
        let f: Vec<f64> = g.positions().iter().map(|x| (x[0]).sin() * (2.0 * x[1]).cos()).collect();
        let dx = s.derivative(&f, 0);
        let dy = s.derivative(&f, 1);
        for (i, x) in g.positions().iter().enumerate() {
            assert!((dx[i] - x[0].cos() * (2.0 * x[1]).cos()).abs() < 1e-12);
            assert!((dy[i] + 2.0 * x[0].sin() * (2.0 * x[1]).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn shift_is_exact_for_band_limited_fields() {
        let g = SpatialGrid::new(1, 32, 3.0).unwrap();
        let s = Spectral::new(&g);
        let k = 2.0 * PI / 3.0;
        let f: Vec<f64> = g.positions().iter().map(|x| (k * x[0]).sin() + 0.3 * (3.0 * k * x[0]).cos()).collect();
        let shifted = s.shift(&f, [0.37, 0.0, 0.0]);
        for (i, x) in g.positions().iter().enumerate() {
            let y = x[0] - 0.37;
            let exact = (k * y).sin() + 0.3 * (3.0 * k * y).cos();
            assert!((shifted[i] - exact).abs() < 1e-12);
        }
        // A whole-cell shift is a permutation.
        let rolled = s.shift(&f, [g.spacing(), 0.0, 0.0]);
        for i in 0..32 {
            assert!((rolled[(i + 1) % 32] - f[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn laplacian_symbols() {
        let g = SpatialGrid::new(1, 8, 2.0 * PI).unwrap();
        let s = Spectral::new(&g);
        assert_eq!(s.centered_laplacian_symbol([0, 0, 0]), 0.0);
        let h = g.spacing();
        let expected = -4.0 * (h / 2.0).sin().powi(2) / (h * h);
        assert!((s.centered_laplacian_symbol([1, 0, 0]) - expected).abs() < 1e-13);
        assert!((s.spectral_laplacian_symbol([7, 0, 0]) + 1.0).abs() < 1e-13);
    }
}
