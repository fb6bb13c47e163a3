//! Hyper-dual numbers `a + b e1 + c e2 + d e1 e2` with `e1^2 = e2^2 = 0`,
//! giving exact first and mixed second derivatives.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct HyperDual {
    pub re: f64,
    pub e1: f64,
    pub e2: f64,
    pub e12: f64,
}

impl HyperDual {
    pub fn constant(re: f64) -> Self {
        Self {
            re,
            e1: 0.0,
            e2: 0.0,
            e12: 0.0,
        }
    }

    pub fn new(re: f64, e1: f64, e2: f64) -> Self {
        Self {
            re,
            e1,
            e2,
            e12: 0.0,
        }
    }

    /// Applies a scalar function given its value and first two derivatives at `re`.
    fn chain(self, f: f64, df: f64, d2f: f64) -> Self {
        Self {
            re: f,
            e1: df * self.e1,
            e2: df * self.e2,
            e12: df * self.e12 + d2f * self.e1 * self.e2,
        }
    }

    pub fn exp(self) -> Self {
        let e = self.re.exp();
        self.chain(e, e, e)
    }

    pub fn powf(self, p: f64) -> Self {
        let x = self.re;
        self.chain(x.powf(p), p * x.powf(p - 1.0), p * (p - 1.0) * x.powf(p - 2.0))
    }

    pub fn recip(self) -> Self {
        self.powf(-1.0)
    }
}

impl Add for HyperDual {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            re: self.re + o.re,
            e1: self.e1 + o.e1,
            e2: self.e2 + o.e2,
            e12: self.e12 + o.e12,
        }
    }
}

impl Sub for HyperDual {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl Neg for HyperDual {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            re: -self.re,
            e1: -self.e1,
            e2: -self.e2,
            e12: -self.e12,
        }
    }
}

impl Mul for HyperDual {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self {
            re: self.re * o.re,
            e1: self.re * o.e1 + self.e1 * o.re,
            e2: self.re * o.e2 + self.e2 * o.re,
            e12: self.re * o.e12 + self.e1 * o.e2 + self.e2 * o.e1 + self.e12 * o.re,
        }
    }
}

impl Mul<f64> for HyperDual {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self {
            re: self.re * s,
            e1: self.e1 * s,
            e2: self.e2 * s,
            e12: self.e12 * s,
        }
    }
}

impl Div for HyperDual {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        self * o.recip()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixed_derivative_of_product_exp() {
        // Mixed derivative of exp(x y) / x against a centred finite difference.
        let f = |x: f64, y: f64| (x * y).exp() / x;
        let (x0, y0) = (1.3, 0.7);
        let x = HyperDual::new(x0, 1.0, 0.0);
        let y = HyperDual::new(y0, 0.0, 1.0);
        let v = (x * y).exp() / x;
        let h = 1e-4;
        let fd = (f(x0 + h, y0 + h) - f(x0 + h, y0 - h) - f(x0 - h, y0 + h) + f(x0 - h, y0 - h))
            / (4.0 * h * h);
        assert!((v.e12 - fd).abs() < 1e-6, "{} vs {fd}", v.e12);
        assert!((v.re - f(x0, y0)).abs() < 1e-15);
    }
}
