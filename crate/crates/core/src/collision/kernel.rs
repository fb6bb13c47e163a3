//! Discrete hard-sphere collision kernel on a Cartesian velocity grid.
//!
//! For every node pair `(v, u = v + m h)` and every direction `omega`, the
//! post-collision velocities are `v' = v + d` and `u' = u - d` with
//! `d = ((u - v) . omega) omega`. Off-grid values are reconstructed as
//! `F(x) = M(x) I[F/M](x)` for a reference Maxwellian `M`; because
//! `M(u')M(v') = M(u)M(v)`, the reference itself never has to be evaluated
//! off the grid. `I` is trilinear interpolation with a curvature correction
//! that makes it exact for quadratics, and constant extrapolation outside the
//! grid.

use crate::grid::{AngularQuadrature, VelocityGrid};
use crate::parallel;

/// Interpolation taps for one displacement, relative to the padded index of
/// the node the displacement starts from.
#[derive(Debug, Clone, Copy)]
struct Taps {
    off: [isize; 11],
    w: [f64; 11],
}

impl Taps {
    fn new(d: [f64; 3], strides: [isize; 3]) -> Self {
        let fl = d.map(f64::floor);
        let t = [d[0] - fl[0], d[1] - fl[1], d[2] - fl[2]];
        let base: isize = (0..3).map(|a| fl[a] as isize * strides[a]).sum();
        let mut off = [0isize; 11];
        let mut w = [0.0; 11];
        for corner in 0..8 {
            let bits = [(corner >> 2) & 1, (corner >> 1) & 1, corner & 1];
            let mut wc = 1.0;
            let mut oc = base;
            for a in 0..3 {
                if bits[a] == 1 {
                    wc *= t[a];
                    oc += strides[a];
                } else {
                    wc *= 1.0 - t[a];
                }
            }
            off[corner] = oc;
            w[corner] = wc;
        }
        let near = [t[0] >= 0.5, t[1] >= 0.5, t[2] >= 0.5];
        let ci = (near[0] as usize) << 2 | (near[1] as usize) << 1 | near[2] as usize;
        for a in 0..3 {
            let kappa = 0.5 * t[a] * (1.0 - t[a]);
            let bit = 4 >> a;
            w[ci] += 2.0 * kappa;
            w[ci ^ bit] -= kappa;
            off[8 + a] = off[ci] + if near[a] { strides[a] } else { -strides[a] };
            w[8 + a] = -kappa;
        }
        Self { off, w }
    }

    #[inline(always)]
    fn eval(&self, arr: &[f64], p: usize) -> f64 {
        let mut s = 0.0;
        for k in 0..11 {
            s += self.w[k] * arr[(p as isize + self.off[k]) as usize];
        }
        s
    }

    #[inline(always)]
    fn scatter(&self, arr: &mut [f64], p: usize, value: f64) {
        for k in 0..11 {
            arr[(p as isize + self.off[k]) as usize] += self.w[k] * value;
        }
    }
}

/// Relative displacement `m` together with its loss weight `W(m)`.
#[derive(Debug, Clone, Copy)]
struct Pair {
    m: [i32; 3],
    loss_weight: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct HardSphereKernel {
    n: usize,
    pad: usize,
    np: usize,
    directions: Vec<[f64; 3]>,
    dir_weights: Vec<f64>,
    /// Node-volume times grid spacing: `|(u - v) . omega| du = h |m . omega| w_v`.
    scale: f64,
    /// One representative of each `{m, -m}` with `m != 0`.
    pairs: Vec<Pair>,
    node_of_padded: Vec<u32>,
}

impl HardSphereKernel {
    pub fn new(grid: &VelocityGrid, angular: &AngularQuadrature) -> Self {
        let n = grid.nodes_per_axis();
        let (directions, dir_weights) = angular.half_rule();
        // Post-collision velocities stay within |m|/2 of the pair midpoint.
        let pad = ((3f64).sqrt() * (n as f64 - 1.0) / 2.0).ceil() as usize + 3;
        let np = n + 2 * pad;
        let scale = grid.weight() * grid.spacing();
        let r = n as i32 - 1;
        let mut pairs = Vec::new();
        for a in -r..=r {
            for b in -r..=r {
                for c in -r..=r {
                    if (a, b, c) <= (0, 0, 0) {
                        continue;
                    }
                    let m = [a, b, c];
                    let mf = m.map(f64::from);
                    let loss_weight = directions
                        .iter()
                        .zip(&dir_weights)
                        .map(|(o, w)| w * (mf[0] * o[0] + mf[1] * o[1] + mf[2] * o[2]).abs())
                        .sum::<f64>()
                        * scale;
                    pairs.push(Pair { m, loss_weight });
                }
            }
        }
        let mut node_of_padded = vec![0u32; np * np * np];
        for a in 0..np {
            let ia = a.clamp(pad, pad + n - 1) - pad;
            for b in 0..np {
                let ib = b.clamp(pad, pad + n - 1) - pad;
                for c in 0..np {
                    let ic = c.clamp(pad, pad + n - 1) - pad;
                    node_of_padded[(a * np + b) * np + c] = ((ia * n + ib) * n + ic) as u32;
                }
            }
        }
        Self {
            n,
            pad,
            np,
            directions,
            dir_weights,
            scale,
            pairs,
            node_of_padded,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.n * self.n * self.n
    }

    fn strides(&self) -> [isize; 3] {
        let np = self.np as isize;
        [np * np, np, 1]
    }

    fn padded(&self, values: &[f64]) -> Vec<f64> {
        self.node_of_padded
            .iter()
            .map(|&i| values[i as usize])
            .collect()
    }

    /// Folds a padded accumulator back onto the nodes it was extended from.
    fn fold(&self, padded: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_nodes()];
        for (p, &i) in padded.iter().zip(&self.node_of_padded) {
            out[i as usize] += p;
        }
        out
    }

    fn linear(&self, m: [i32; 3]) -> isize {
        let n = self.n as isize;
        (m[0] as isize * n + m[1] as isize) * n + m[2] as isize
    }

    /// Calls `body(v, u, pv)` for every node `v` such that `u = v + m` is a
    /// node; `pv` is the padded index of `v`.
    #[inline(always)]
    fn for_each_pair<F: FnMut(usize, usize, usize)>(&self, m: [i32; 3], mut body: F) {
        let n = self.n as i32;
        let lo = m.map(|x| (-x).max(0) as usize);
        let hi = m.map(|x| (n - x.max(0)) as usize);
        let ml = self.linear(m);
        let (nn, np, pad) = (self.n, self.np, self.pad);
        for a in lo[0]..hi[0] {
            for b in lo[1]..hi[1] {
                let row = (a * nn + b) * nn;
                let prow = ((a + pad) * np + b + pad) * np + pad;
                for c in lo[2]..hi[2] {
                    let v = row + c;
                    body(v, (v as isize + ml) as usize, prow + c);
                }
            }
        }
    }

    /// Per-direction coefficient and the taps for `v'` and `u'`.
    fn direction_terms(&self, m: [i32; 3]) -> Vec<(f64, Taps, Taps)> {
        let strides = self.strides();
        let mf = m.map(f64::from);
        self.directions
            .iter()
            .zip(&self.dir_weights)
            .filter_map(|(o, &w)| {
                let dot = mf[0] * o[0] + mf[1] * o[1] + mf[2] * o[2];
                let coef = w * self.scale * dot.abs();
                if coef == 0.0 {
                    return None;
                }
                let d = [dot * o[0], dot * o[1], dot * o[2]];
                let ud = [mf[0] - d[0], mf[1] - d[1], mf[2] - d[2]];
                Some((coef, Taps::new(d, strides), Taps::new(ud, strides)))
            })
            .collect()
    }

    /// `Q(F1, F2)` with the gain term reconstructed relative to `reference`.
    pub fn collide(&self, f1: &[f64], f2: &[f64], reference: &[f64]) -> Vec<f64> {
        let n_v = self.num_nodes();
        let symmetric = std::ptr::eq(f1, f2) || f1 == f2;
        let r1 = self.padded(&ratio(f1, reference));
        let r2 = if symmetric {
            r1.clone()
        } else {
            self.padded(&ratio(f2, reference))
        };
        let acc = parallel::sum_into(self.pairs.len(), 2 * n_v, |acc, k| {
            let pair = self.pairs[k];
            let (gain, loss) = acc.split_at_mut(n_v);
            let w = pair.loss_weight;
            self.for_each_pair(pair.m, |v, u, _| {
                loss[v] += w * f1[u];
                loss[u] += w * f1[v];
            });
            for (coef, tv, tu) in self.direction_terms(pair.m) {
                self.for_each_pair(pair.m, |v, u, pv| {
                    let a = tu.eval(&r1, pv) * tv.eval(&r2, pv);
                    gain[v] += coef * reference[u] * a;
                    let b = if symmetric {
                        a
                    } else {
                        tv.eval(&r1, pv) * tu.eval(&r2, pv)
                    };
                    gain[u] += coef * reference[v] * b;
                });
            }
        });
        (0..n_v)
            .map(|v| reference[v] * acc[v] - f2[v] * acc[n_v + v])
            .collect()
    }

    /// Discrete collision frequency `sum_m W(m) mu(v + m)`.
    pub fn discrete_frequency(&self, mu: &[f64]) -> Vec<f64> {
        parallel::sum_into(self.pairs.len(), self.num_nodes(), |acc, k| {
            let pair = self.pairs[k];
            self.for_each_pair(pair.m, |v, u, _| {
                acc[v] += pair.loss_weight * mu[u];
                acc[u] += pair.loss_weight * mu[v];
            });
        })
    }

    /// The velocity-averaged part `sqrt(mu(v)) sum_m W(m) sqrt(mu(u)) g(u)`,
    /// symmetric in `(v, u)`.
    fn loss_convolution(&self, g: &[f64], sqrt_mu: &[f64]) -> Vec<f64> {
        let y: Vec<f64> = g.iter().zip(sqrt_mu).map(|(a, b)| a * b).collect();
        let acc = parallel::sum_into(self.pairs.len(), self.num_nodes(), |acc, k| {
            let pair = self.pairs[k];
            self.for_each_pair(pair.m, |v, u, _| {
                acc[v] += pair.loss_weight * y[u];
                acc[u] += pair.loss_weight * y[v];
            });
        });
        acc.iter().zip(sqrt_mu).map(|(a, s)| a * s).collect()
    }

    /// Raw linearized operator `-(Q(mu, sqrt(mu) g) + Q(sqrt(mu) g, mu)) / sqrt(mu)`
    /// with `mu` as reference, given `nu_d = discrete_frequency(mu)`.
    pub fn apply_linearized(&self, g: &[f64], mu: &[f64], sqrt_mu: &[f64], nu_d: &[f64]) -> Vec<f64> {
        let n_v = self.num_nodes();
        let s = self.padded(&ratio(g, sqrt_mu));
        let gain = parallel::sum_into(self.pairs.len(), n_v, |acc, k| {
            let pair = self.pairs[k];
            for (coef, tv, tu) in self.direction_terms(pair.m) {
                self.for_each_pair(pair.m, |v, u, pv| {
                    let both = tv.eval(&s, pv) + tu.eval(&s, pv);
                    acc[v] += coef * mu[u] * both;
                    acc[u] += coef * mu[v] * both;
                });
            }
        });
        let conv = self.loss_convolution(g, sqrt_mu);
        (0..n_v)
            .map(|v| nu_d[v] * g[v] + conv[v] - sqrt_mu[v] * gain[v])
            .collect()
    }

    /// Transpose of [`Self::apply_linearized`] with respect to the Euclidean
    /// (equivalently, the uniform quadrature) inner product.
    pub fn apply_linearized_transpose(
        &self,
        g: &[f64],
        mu: &[f64],
        sqrt_mu: &[f64],
        nu_d: &[f64],
    ) -> Vec<f64> {
        let n_v = self.num_nodes();
        let y: Vec<f64> = g.iter().zip(sqrt_mu).map(|(a, b)| a * b).collect();
        let padded_len = self.np * self.np * self.np;
        let acc = parallel::sum_into(self.pairs.len(), padded_len, |acc, k| {
            let pair = self.pairs[k];
            for (coef, tv, tu) in self.direction_terms(pair.m) {
                self.for_each_pair(pair.m, |v, u, pv| {
                    let c = coef * (mu[u] * y[v] + mu[v] * y[u]);
                    tv.scatter(acc, pv, c);
                    tu.scatter(acc, pv, c);
                });
            }
        });
        let gain = self.fold(&acc);
        let conv = self.loss_convolution(g, sqrt_mu);
        (0..n_v)
            .map(|v| nu_d[v] * g[v] + conv[v] - gain[v] / sqrt_mu[v])
            .collect()
    }

    /// Dense row-major matrix of [`Self::apply_linearized`].
    pub fn assemble_linearized(&self, mu: &[f64], sqrt_mu: &[f64], nu_d: &[f64]) -> Vec<f64> {
        let n_v = self.num_nodes();
        let nn = self.n;
        let n = nn as i32;
        let inv_sqrt: Vec<f64> = sqrt_mu.iter().map(|s| 1.0 / s).collect();
        let mut matrix = vec![0.0; n_v * n_v];
        // One block per value of the slowest velocity index; rows in a block
        // share all displacement terms.
        parallel::for_each_chunk_mut(&mut matrix, nn * nn * n_v, |a, block| {
            let a = a as i32;
            for m0 in -a..n - a {
                for m1 in -(n - 1)..n {
                    for m2 in -(n - 1)..n {
                        let m = [m0, m1, m2];
                        if m == [0, 0, 0] {
                            continue;
                        }
                        let terms: Vec<(f64, Taps, Taps)> = self.direction_terms(m);
                        let w: f64 = terms.iter().map(|t| t.0).sum();
                        let ml = self.linear(m);
                        let b_lo = (-m1).max(0) as usize;
                        let b_hi = (n - m1.max(0)) as usize;
                        let c_lo = (-m2).max(0) as usize;
                        let c_hi = (n - m2.max(0)) as usize;
                        for b in b_lo..b_hi {
                            for c in c_lo..c_hi {
                                let local = b * nn + c;
                                let v = a as usize * nn * nn + local;
                                let u = (v as isize + ml) as usize;
                                let row = &mut block[local * n_v..(local + 1) * n_v];
                                row[u] += sqrt_mu[v] * w * sqrt_mu[u];
                                let pv = ((a as usize + self.pad) * self.np + b + self.pad) * self.np
                                    + c
                                    + self.pad;
                                let base = -sqrt_mu[v] * mu[u];
                                for (coef, tv, tu) in &terms {
                                    for taps in [tv, tu] {
                                        for k in 0..11 {
                                            let j = self.node_of_padded
                                                [(pv as isize + taps.off[k]) as usize]
                                                as usize;
                                            row[j] += base * coef * taps.w[k] * inv_sqrt[j];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
            for local in 0..nn * nn {
                let v = a as usize * nn * nn + local;
                block[local * n_v + v] += nu_d[v];
            }
        });
        matrix
    }
}

fn ratio(f: &[f64], reference: &[f64]) -> Vec<f64> {
    f.iter()
        .zip(reference)
        .map(|(a, b)| a / b.max(f64::MIN_POSITIVE))
        .collect()
}
