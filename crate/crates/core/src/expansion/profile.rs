//! Univariate test-function profiles with derivatives up to fourth order.
//!
//! The perturbed functions need `f`, `f'`, `f''` as functions of `x` together
//! with their own first two derivatives, hence jets of order four.

use serde::{Deserialize, Serialize};

use crate::poly::Poly2;

/// `[f, f', f'', f''', f'''']` at a point.
pub type Jet4 = [f64; 5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// `sum c_k x^k`, ascending coefficients.
    Polynomial(Vec<f64>),
    /// `g(x) = log(1 + x^2)`.
    LogOnePlusSquare,
    /// `base(x) * bump(x)` where the bump is 1 on `[-inner, inner]`, 0 outside
    /// `[-inner-1, inner+1]`, and C4 in between.
    Mollified { base: Box<Profile>, inner: f64 },
}

impl Profile {
    pub fn zero() -> Self {
        Profile::Polynomial(Vec::new())
    }

    pub fn monomial(k: usize) -> Self {
        let mut c = vec![0.0; k + 1];
        c[k] = 1.0;
        Profile::Polynomial(c)
    }

    pub fn from_poly(p: &Poly2) -> Self {
        Profile::Polynomial(p.univariate_f64())
    }

    pub fn mollified(self, inner: f64) -> Self {
        Profile::Mollified { base: Box::new(self), inner }
    }

    /// Half-width of the support, if compact.
    pub fn support_radius(&self) -> Option<f64> {
        match self {
            Profile::Polynomial(c) if c.iter().skip(1).all(|v| *v == 0.0) => Some(0.0),
            Profile::Polynomial(_) | Profile::LogOnePlusSquare => None,
            Profile::Mollified { inner, .. } => Some(inner + 1.0),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Profile::Polynomial(c) => c.iter().all(|v| *v == 0.0),
            Profile::Mollified { base, .. } => base.is_zero(),
            Profile::LogOnePlusSquare => false,
        }
    }

    pub fn jet(&self, x: f64) -> Jet4 {
        match self {
            Profile::Polynomial(c) => poly_jet(c, x),
            Profile::LogOnePlusSquare => log_one_plus_square(x),
            Profile::Mollified { base, inner } => {
                let b = bump_jet(x, *inner);
                if b == [0.0; 5] {
                    return b;
                }
                leibniz(&base.jet(x), &b)
            }
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.jet(x)[0]
    }

    /// Sup norms of `f`, `f'`, `f''` over the support (or `[-radius, radius]`),
    /// sampled with the given pitch and refined around the maxima.
    pub fn sup_norms(&self, radius: f64, pitch: f64) -> [f64; 3] {
        let r = self.support_radius().unwrap_or(radius);
        let steps = (2.0 * r / pitch).ceil().max(1.0) as usize;
        let mut best = [(0.0f64, 0.0f64); 3];
        for i in 0..=steps {
            let x = -r + 2.0 * r * i as f64 / steps as f64;
            let j = self.jet(x);
            for k in 0..3 {
                if j[k].abs() > best[k].0 {
                    best[k] = (j[k].abs(), x);
                }
            }
        }
        let fine = pitch / 64.0;
        let mut out = [0.0; 3];
        for k in 0..3 {
            let (mut m, x0) = best[k];
            for i in -64..=64 {
                let x = x0 + fine * i as f64;
                m = m.max(self.jet(x)[k].abs());
            }
            out[k] = m;
        }
        out
    }
}

fn poly_jet(c: &[f64], x: f64) -> Jet4 {
    let mut out = [0.0; 5];
    // Horner on each derivative order.
    for (order, slot) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for k in (order..c.len()).rev() {
            let mut fall = 1.0;
            for m in 0..order {
                fall *= (k - m) as f64;
            }
            acc = acc * x + c[k] * fall;
        }
        *slot = acc;
    }
    out
}

fn log_one_plus_square(x: f64) -> Jet4 {
    let q = 1.0 + x * x;
    let x2 = x * x;
    [
        q.ln(),
        2.0 * x / q,
        2.0 * (1.0 - x2) / (q * q),
        4.0 * x * (x2 - 3.0) / (q * q * q),
        -12.0 * (x2 * x2 - 6.0 * x2 + 1.0) / (q * q * q * q),
    ]
}

/// C4 smoothstep `S(t) = 126t^5 - 420t^6 + 540t^7 - 315t^8 + 70t^9` and its
/// first four derivatives.
fn smoothstep4(t: f64) -> Jet4 {
    const C: [f64; 10] = [0.0, 0.0, 0.0, 0.0, 0.0, 126.0, -420.0, 540.0, -315.0, 70.0];
    poly_jet(&C, t)
}

fn bump_jet(x: f64, inner: f64) -> Jet4 {
    let ax = x.abs();
    if ax <= inner {
        return [1.0, 0.0, 0.0, 0.0, 0.0];
    }
    if ax >= inner + 1.0 {
        return [0.0; 5];
    }
    let s = smoothstep4(ax - inner);
    let sg = if x < 0.0 { -1.0 } else { 1.0 };
    [1.0 - s[0], -sg * s[1], -s[2], -sg * s[3], -s[4]]
}

fn leibniz(f: &Jet4, g: &Jet4) -> Jet4 {
    const BINOM: [[f64; 5]; 5] = [
        [1.0, 0.0, 0.0, 0.0, 0.0],
        [1.0, 1.0, 0.0, 0.0, 0.0],
        [1.0, 2.0, 1.0, 0.0, 0.0],
        [1.0, 3.0, 3.0, 1.0, 0.0],
        [1.0, 4.0, 6.0, 4.0, 1.0],
    ];
    let mut out = [0.0; 5];
    for k in 0..5 {
        for i in 0..=k {
            out[k] += BINOM[k][i] * f[i] * g[k - i];
        }
    }
    out
}
