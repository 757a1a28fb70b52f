//! Second-order forward-mode jets in two variables.
//!
//! A [`Jet2`] carries a value together with its gradient and Hessian at a
//! fixed point. Arithmetic follows the product and chain rules, which is all
//! the generator and Hamiltonian evaluations need.

use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet2 {
    pub v: f64,
    pub x: f64,
    pub y: f64,
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Jet2 {
    pub const ZERO: Jet2 = Jet2 { v: 0.0, x: 0.0, y: 0.0, xx: 0.0, xy: 0.0, yy: 0.0 };

    pub fn constant(v: f64) -> Self {
        Self { v, ..Self::ZERO }
    }

    pub fn var_x(x: f64) -> Self {
        Self { v: x, x: 1.0, ..Self::ZERO }
    }

    pub fn var_y(y: f64) -> Self {
        Self { v: y, y: 1.0, ..Self::ZERO }
    }

    /// `g(x)` from its value and first two derivatives at `x`.
    pub fn of_x(d: [f64; 3]) -> Self {
        Self { v: d[0], x: d[1], xx: d[2], ..Self::ZERO }
    }

    /// `g(y)` from its value and first two derivatives at `y`.
    pub fn of_y(d: [f64; 3]) -> Self {
        Self { v: d[0], y: d[1], yy: d[2], ..Self::ZERO }
    }

    /// Compose with a univariate `phi` given `[phi, phi', phi'']` at `self.v`.
    pub fn compose(&self, d: [f64; 3]) -> Self {
        let [_, d1, d2] = d;
        Self {
            v: d[0],
            x: d1 * self.x,
            y: d1 * self.y,
            xx: d2 * self.x * self.x + d1 * self.xx,
            xy: d2 * self.x * self.y + d1 * self.xy,
            yy: d2 * self.y * self.y + d1 * self.yy,
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            v: self.v * c,
            x: self.x * c,
            y: self.y * c,
            xx: self.xx * c,
            xy: self.xy * c,
            yy: self.yy * c,
        }
    }

    pub fn exp(&self) -> Self {
        let e = self.v.exp();
        self.compose([e, e, e])
    }

    pub fn powi(&self, k: i32) -> Self {
        let v = self.v;
        let kf = k as f64;
        self.compose([v.powi(k), kf * v.powi(k - 1), kf * (kf - 1.0) * v.powi(k - 2)])
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v + o.v,
            x: self.x + o.x,
            y: self.y + o.y,
            xx: self.xx + o.xx,
            xy: self.xy + o.xy,
            yy: self.yy + o.yy,
        }
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        self + (-o)
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self.scale(-1.0)
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v * o.v,
            x: self.x * o.v + self.v * o.x,
            y: self.y * o.v + self.v * o.y,
            xx: self.xx * o.v + 2.0 * self.x * o.x + self.v * o.xx,
            xy: self.xy * o.v + self.x * o.y + self.y * o.x + self.v * o.xy,
            yy: self.yy * o.v + 2.0 * self.y * o.y + self.v * o.yy,
        }
    }
}

impl Mul<f64> for Jet2 {
    type Output = Jet2;
    fn mul(self, c: f64) -> Jet2 {
        self.scale(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: impl Fn(f64, f64) -> f64, x: f64, y: f64) -> [f64; 5] {
        let h = 1e-4;
        [
            (f(x + h, y) - f(x - h, y)) / (2.0 * h),
            (f(x, y + h) - f(x, y - h)) / (2.0 * h),
            (f(x + h, y) - 2.0 * f(x, y) + f(x - h, y)) / (h * h),
            (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h)) / (4.0 * h * h),
            (f(x, y + h) - 2.0 * f(x, y) + f(x, y - h)) / (h * h),
        ]
    }

    #[test]
    fn product_and_compose_match_finite_differences() {
        let (x0, y0) = (0.7, -0.4);
        let f = |x: f64, y: f64| (x * x * y + y.sin() * x).exp() * 0.3;
        let xj = Jet2::var_x(x0);
        let yj = Jet2::var_y(y0);
        let sin_y = Jet2::of_y([y0.sin(), y0.cos(), -y0.sin()]);
        let j = (xj * xj * yj + sin_y * xj).exp() * 0.3;
        let d = fd(f, x0, y0);
        let got = [j.x, j.y, j.xx, j.xy, j.yy];
        for (a, b) in got.iter().zip(d.iter()) {
            assert!((a - b).abs() < 1e-5 * (1.0 + b.abs()), "{a} vs {b}");
        }
        assert!((j.v - f(x0, y0)).abs() < 1e-14);
    }

    #[test]
    fn powi_matches_repeated_product() {
        let j = Jet2::var_x(1.3) + Jet2::var_y(0.2) * Jet2::var_x(1.3);
        let a = j.powi(3);
        let b = j * j * j;
        for (p, q) in [(a.v, b.v), (a.x, b.x), (a.xx, b.xx), (a.xy, b.xy), (a.yy, b.yy)] {
            assert!((p - q).abs() < 1e-12);
        }
    }
}
