//! Kolmogorov-Smirnov tests, Wilson intervals, quadrature and summary
//! statistics.

use serde::Serialize;
use statrs::function::erf::erfc;

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    pub m: usize,
}

/// One-sample KS against a continuous CDF. Exact p-values for `n <= 100`,
/// the Stephens-corrected asymptotic form above that.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / nf - f).max(f - i as f64 / nf);
    }
    let p_value = if n == 0 {
        1.0
    } else if n <= 100 {
        (1.0 - kolmogorov_cdf_exact(n, d)).clamp(0.0, 1.0)
    } else {
        let sn = nf.sqrt();
        kolmogorov_q((sn + 0.12 + 0.11 / sn) * d)
    };
    KsResult { statistic: d, p_value, n, m: 0 }
}

/// Two-sample KS with the asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(f64::total_cmp);
    xb.sort_by(f64::total_cmp);
    let (n, m) = (xa.len(), xb.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = xa[i].min(xb[j]);
        while i < n && xa[i] <= v {
            i += 1;
        }
        while j < m && xb[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let en = ((n * m) as f64 / (n + m) as f64).sqrt();
    let p_value = if n == 0 || m == 0 { 1.0 } else { kolmogorov_q((en + 0.12 + 0.11 / en) * d) };
    KsResult { statistic: d, p_value, n, m }
}

/// Kolmogorov survival function `Q(l) = 2 sum (-1)^(k-1) exp(-2 k^2 l^2)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let a2 = -2.0 * lambda * lambda;
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = sign * (a2 * kf * kf).exp();
        sum += term;
        if term.abs() < 1e-16 * sum.abs().max(1e-300) {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// `P(D_n < d)` by the Marsaglia-Tsang-Wang matrix method.
pub fn kolmogorov_cdf_exact(n: usize, d: f64) -> f64 {
    if d <= 0.0 {
        return 0.0;
    }
    if d >= 1.0 {
        return 1.0;
    }
    let nf = n as f64;
    let k = (nf * d) as usize + 1;
    let m = 2 * k - 1;
    let h = k as f64 - nf * d;
    let mut hm = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            hm[i * m + j] = if i + 1 >= j { 1.0 } else { 0.0 };
        }
    }
    for i in 0..m {
        hm[i * m] -= h.powi(i as i32 + 1);
        hm[(m - 1) * m + i] -= h.powi((m - i) as i32);
    }
    if 2.0 * h - 1.0 > 0.0 {
        hm[(m - 1) * m] += (2.0 * h - 1.0).powi(m as i32);
    }
    for i in 0..m {
        for j in 0..m {
            if i + 1 > j {
                for g in 1..=(i + 1 - j) {
                    hm[i * m + j] /= g as f64;
                }
            }
        }
    }
    let (q, mut e) = mat_pow(&hm, m, n);
    let mut s = q[(k - 1) * m + k - 1];
    for i in 1..=n {
        s = s * i as f64 / nf;
        if s < 1e-140 {
            s *= 1e140;
            e -= 140;
        }
    }
    s * 10f64.powi(e)
}

fn mat_mul(a: &[f64], b: &[f64], m: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * m];
    for i in 0..m {
        for k in 0..m {
            let aik = a[i * m + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..m {
                c[i * m + j] += aik * b[k * m + j];
            }
        }
    }
    c
}

/// `a^p` with a decimal exponent carried separately to avoid overflow.
fn mat_pow(a: &[f64], m: usize, p: usize) -> (Vec<f64>, i32) {
    if p == 1 {
        return (a.to_vec(), 0);
    }
    let (half, eh) = mat_pow(a, m, p / 2);
    let mut out = mat_mul(&half, &half, m);
    let mut e = 2 * eh;
    if p % 2 == 1 {
        out = mat_mul(a, &out, m);
    }
    if out[(m / 2) * m + m / 2] > 1e140 {
        for v in &mut out {
            *v *= 1e-140;
        }
        e += 140;
    }
    (out, e)
}

/// Wilson score interval for a binomial proportion.
pub fn wilson(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let den = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / den;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / den;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let c = 0.5 * (a + b);
    let (fa, fb, fc) = (f(a), f(b), f(c));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fc + fb);
    simpson_step(f, a, b, fa, fb, fc, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fb: f64, fc: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let c = 0.5 * (a + b);
    let (l, r) = (0.5 * (a + c), 0.5 * (c + b));
    let (fl, fr) = (f(l), f(r));
    let left = (c - a) / 6.0 * (fa + 4.0 * fl + fc);
    let right = (b - c) / 6.0 * (fc + 4.0 * fr + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, c, fa, fc, fl, left, tol / 2.0, depth - 1)
        + simpson_step(f, c, b, fc, fb, fr, right, tol / 2.0, depth - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    /// Standard error of the mean.
    pub sem: f64,
    /// Standard error of the sample variance (normal-theory approximation
    /// corrected by the sample kurtosis).
    pub var_se: f64,
    pub skewness: f64,
    pub skew_se: f64,
}

pub fn summarize(xs: &[f64]) -> Summary {
    let n = xs.len();
    let nf = n as f64;
    let mean = xs.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &x in xs {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let variance = if n > 1 { m2 / (nf - 1.0) } else { 0.0 };
    let (c2, c3, c4) = (m2 / nf, m3 / nf, m4 / nf);
    let skewness = if c2 > 0.0 { c3 / c2.powf(1.5) } else { 0.0 };
    let var_se = if n > 1 { ((c4 - c2 * c2 * (nf - 3.0) / (nf - 1.0)) / nf).max(0.0).sqrt() } else { f64::NAN };
    let skew_se = (6.0 * nf * (nf - 1.0) / ((nf - 2.0) * (nf + 1.0) * (nf + 3.0))).sqrt();
    Summary { count: n, mean, variance, sem: (variance / nf).sqrt(), var_se, skewness, skew_se }
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Least-squares slope of `ys` against `xs`.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

/// Normalised one-dimensional density `exp(log_density)` tabulated on a
/// uniform grid, with its CDF by the trapezoid rule.
#[derive(Debug, Clone)]
pub struct TabulatedCdf {
    xs: Vec<f64>,
    cdf: Vec<f64>,
}

impl TabulatedCdf {
    pub fn new(log_density: impl Fn(f64) -> f64, lo: f64, hi: f64, points: usize) -> Self {
        let xs: Vec<f64> = (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect();
        let ld: Vec<f64> = xs.iter().map(|&x| log_density(x)).collect();
        let peak = ld.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let dens: Vec<f64> = ld.iter().map(|v| (v - peak).exp()).collect();
        let mut cdf = vec![0.0; points];
        for i in 1..points {
            cdf[i] = cdf[i - 1] + 0.5 * (dens[i] + dens[i - 1]) * (xs[i] - xs[i - 1]);
        }
        let total = cdf[points - 1];
        for c in &mut cdf {
            *c /= total;
        }
        Self { xs, cdf }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return 0.0;
        }
        if x >= self.xs[n - 1] {
            return 1.0;
        }
        let h = self.xs[1] - self.xs[0];
        let i = (((x - self.xs[0]) / h) as usize).min(n - 2);
        let t = (x - self.xs[i]) / h;
        self.cdf[i] + t * (self.cdf[i + 1] - self.cdf[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_sample_ks() {
        for x in [-1.0, 0.0, 0.7] {
            let r = ks_one_sample(&[x], normal_cdf);
            let f = normal_cdf(x);
            assert!((r.statistic - f.max(1.0 - f)).abs() < 1e-15);
            assert!((r.p_value - (2.0 - 2.0 * r.statistic)).abs() < 1e-12);
        }
    }

    #[test]
    fn exact_matches_asymptotic_for_moderate_n() {
        let d = 0.12;
        let exact = 1.0 - kolmogorov_cdf_exact(100, d);
        let asym = kolmogorov_q((10.0 + 0.12 + 0.011) * d);
        assert!((exact - asym).abs() < 5e-3, "{exact} {asym}");
    }

    #[test]
    fn exact_reference_value() {
        // P(D_10 < 0.274) = 0.6284796154565043 (Marsaglia, Tsang and Wang 2003).
        assert!((kolmogorov_cdf_exact(10, 0.274) - 0.6284796154565043).abs() < 1e-12);
    }

    #[test]
    fn two_sample_identical_and_disjoint() {
        let a: Vec<f64> = (0..50).map(|i| i as f64).collect();
        assert_eq!(ks_two_sample(&a, &a).statistic, 0.0);
        let b: Vec<f64> = (100..150).map(|i| i as f64).collect();
        let r = ks_two_sample(&a, &b);
        assert_eq!(r.statistic, 1.0);
        assert!(r.p_value < 1e-10);
    }

    #[test]
    fn wilson_shrinks_like_inverse_root() {
        let (l1, h1) = wilson(300, 1000, 1.96);
        let (l2, h2) = wilson(1200, 4000, 1.96);
        let ratio = (h1 - l1) / (h2 - l2);
        assert!((ratio - 2.0).abs() < 0.02);
        assert_eq!(wilson(0, 10, 1.96).0, 0.0);
    }

    #[test]
    fn simpson_integrates_gaussian() {
        let v = adaptive_simpson(&|x: f64| (-x * x / 2.0).exp(), -10.0, 10.0, 1e-12, 40);
        assert!((v - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-10);
    }

    #[test]
    fn tabulated_normal_cdf() {
        let t = TabulatedCdf::new(|x| -x * x / 2.0, -10.0, 10.0, 20001);
        for x in [-2.0, 0.0, 0.5, 1.7] {
            assert!((t.cdf(x) - normal_cdf(x)).abs() < 1e-6);
        }
    }

    #[test]
    fn summary_of_known_sample() {
        let s = summarize(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.variance - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.skewness, 0.0);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert!((slope(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]) - 2.0).abs() < 1e-15);
    }
}
