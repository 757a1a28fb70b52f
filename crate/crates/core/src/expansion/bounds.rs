//! Cut-off perturbed test functions `f_n^{eps,+-}` and the upper/lower
//! Hamiltonian bound checks built on them.

use serde::{Deserialize, Serialize};

use super::cutoff::{CutoffSpec, CHI_D1_SUP, CHI_D2_SUP};
use super::profile::Profile;
use super::{grid_sup, hamiltonian_jet, limiting_h_profile, perturbed_jet, Box2};
use crate::error::{Error, Result};
use crate::jet::Jet2;
use crate::model::{FluctuationScale, ModelParams, ScalingSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// How `f_n^{eps,+-}` treats indices and the cut-off.
///
/// `Literal` is the full construction: zero for `n <= N*`, otherwise the
/// cut-off of the perturbed function. `Local` drops the cut-off and the
/// `N*` switch and evaluates the perturbed function itself, which is what the
/// literal construction reduces to on a fixed compact once `n` is large.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutoffMode {
    Literal,
    Local,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundConstants {
    pub cbar: f64,
    pub n1: u64,
    pub n2: u64,
    pub n_star: u64,
    /// Support radius `M` of `f`.
    pub support: f64,
    /// `[||f||, ||f'||, ||f''||]`.
    pub norms: [f64; 3],
}

const NORM_PITCH: f64 = 1e-3;

pub fn bound_constants(f: &Profile, eps: f64, params: &ModelParams, schedule: &ScalingSchedule) -> Result<BoundConstants> {
    check_eps(eps)?;
    let m = f
        .support_radius()
        .ok_or_else(|| Error::invalid("f must have compact support (mollify it first)"))?;
    let norms = f.sup_norms(m, NORM_PITCH);
    let s2 = params.sigma2();
    let [n0, n1d, n2d] = norms;
    let cbar = n0
        .max((m * n1d + 2.0) / (2.0 * s2))
        .max((3.0 * m * n1d + m * m * n2d + 8.0) / (8.0 * s2 * s2));

    // N1 = sup{n : b_n^2 <= 6 Cbar / eps}.
    let ceiling = 6.0 * cbar / eps;
    let n1 = last_true(schedule, |_, b| b * b <= ceiling * (1.0 + 1e-12))?;
    // N2 = sup{n : -2 b^2/s2 + 8 s2 [(b^4/n) sup|chi''| + sup|chi'|^2] > 0}.
    let n2 = last_true(schedule, |n, b| {
        let b2 = b * b;
        -2.0 * b2 / s2 + 8.0 * s2 * (b2 * b2 / n as f64 * CHI_D2_SUP + CHI_D1_SUP * CHI_D1_SUP) > 0.0
    })?;
    Ok(BoundConstants { cbar, n1, n2, n_star: n1.max(n2), support: m, norms })
}

/// Largest `n` for which `pred(n, b_n)` holds, for a predicate that is true
/// up to some index and false after. Returns 0 when it never holds.
fn last_true(schedule: &ScalingSchedule, pred: impl Fn(u64, f64) -> bool) -> Result<u64> {
    if let Some(support) = schedule.support() {
        let mut best = 0;
        for n in support {
            if pred(n, schedule.b(n)?) {
                best = n;
            }
        }
        return Ok(best);
    }
    if !pred(1, schedule.b(1)?) {
        return Ok(0);
    }
    let (mut lo, mut hi) = (1u64, 2u64);
    while pred(hi, schedule.b(hi)?) {
        lo = hi;
        if hi >= u64::MAX / 2 {
            return Ok(u64::MAX);
        }
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if pred(mid, schedule.b(mid)?) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid(format!("eps must lie in (0, 1), got {eps}")));
    }
    Ok(())
}

/// `f_n^{eps,+-}` at a fixed `n`.
#[derive(Debug, Clone)]
pub struct FEps {
    pub f: Profile,
    pub eps: f64,
    pub sign: Sign,
    pub scale: FluctuationScale,
    pub constants: BoundConstants,
    pub mode: CutoffMode,
    cutoff: Option<CutoffSpec>,
}

pub fn build_f_eps(
    f: &Profile,
    eps: f64,
    sign: Sign,
    params: &ModelParams,
    schedule: &ScalingSchedule,
    mode: CutoffMode,
) -> Result<FEps> {
    check_eps(eps)?;
    let scale = FluctuationScale::new(*params, schedule)?;
    let constants = bound_constants(f, eps, params, schedule)?;
    let cutoff = match mode {
        CutoffMode::Literal if params.n() > constants.n_star => Some(CutoffSpec::new(&scale)?),
        _ => None,
    };
    Ok(FEps { f: f.clone(), eps, sign, scale, constants, mode, cutoff })
}

impl FEps {
    /// True when the literal construction is the zero function.
    pub fn vanishes(&self) -> bool {
        self.mode == CutoffMode::Literal && self.scale.params.n() <= self.constants.n_star
    }

    /// `F_{n,f} +- eps (y^2 + F_{n,g})` before the cut-off.
    pub fn inner_jet(&self, x: f64, y: f64) -> Jet2 {
        let s2 = self.scale.params.sigma2();
        let b = self.scale.b;
        let ff = perturbed_jet(&self.f, s2, b, x, y);
        let fg = perturbed_jet(&Profile::LogOnePlusSquare, s2, b, x, y);
        let y2 = Jet2::var_y(y) * Jet2::var_y(y);
        ff + (y2 + fg).scale(self.sign.factor() * self.eps)
    }

    pub fn jet(&self, x: f64, y: f64) -> Jet2 {
        if self.vanishes() {
            return Jet2::ZERO;
        }
        let inner = self.inner_jet(x, y);
        match &self.cutoff {
            Some(c) => inner.compose(c.chi(inner.v)),
            None => inner,
        }
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        self.jet(x, y).v
    }

    /// True when `(x, y)` sits where the cut-off is constant.
    pub fn on_plateau(&self, x: f64, y: f64) -> bool {
        match &self.cutoff {
            Some(c) => c.on_plateau(self.inner_jet(x, y).v),
            None => self.vanishes(),
        }
    }

    /// Limit object `f +- eps (y^2 + log(1 + x^2))`.
    pub fn limit(&self, x: f64, y: f64) -> f64 {
        self.f.value(x) + self.sign.factor() * self.eps * (y * y + (1.0 + x * x).ln())
    }

    pub fn hamiltonian(&self, x: f64, y: f64) -> Result<f64> {
        hamiltonian_jet(&self.scale, x, y, &self.jet(x, y))
    }

    /// `Hf(x) +- (eps ||f'||/2 + eps^2)`: the limiting upper (`+`) or lower (`-`) bound.
    pub fn target(&self, x: f64) -> f64 {
        let sigma = self.scale.params.sigma();
        let shift = self.eps * self.constants.norms[1] / 2.0 + self.eps * self.eps;
        limiting_h_profile(&self.f, sigma, x) + self.sign.factor() * shift
    }

    /// Signed gap that must be asymptotically nonpositive:
    /// `H_n f^+ - target` for `+`, `target - H_n f^-` for `-`.
    pub fn slack(&self, x: f64, y: f64) -> Result<f64> {
        let gap = self.hamiltonian(x, y)? - self.target(x);
        Ok(self.sign.factor() * gap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlackSup {
    pub value: f64,
    pub at: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DaggerReport {
    pub n: u64,
    pub b: f64,
    pub eps: f64,
    pub mode: CutoffMode,
    pub constants: BoundConstants,
    /// Sup of `H_n f^{eps,+} - (Hf + eps ||f'||/2 + eps^2)`.
    pub upper: SlackSup,
    /// Sup of `(Hf - eps ||f'||/2 - eps^2) - H_n f^{eps,-}`.
    pub lower: SlackSup,
    /// Sup over the region of `|H_n f^{eps,+} - M_n|` where `M_n` collects the
    /// displayed leading terms; an empirical stand-in for the remainder bound.
    pub remainder: f64,
    pub skipped: usize,
}

/// Grid sup of both slacks over `region` at a single `n`.
pub fn verify_dagger_bound(
    f: &Profile,
    eps: f64,
    params: &ModelParams,
    schedule: &ScalingSchedule,
    region: &Box2,
    pitch: f64,
    mode: CutoffMode,
) -> Result<DaggerReport> {
    let plus = build_f_eps(f, eps, Sign::Plus, params, schedule, mode)?;
    let minus = build_f_eps(f, eps, Sign::Minus, params, schedule, mode)?;
    let up = grid_sup(region, pitch, |x, y| plus.slack(x, y).ok());
    let lo = grid_sup(region, pitch, |x, y| minus.slack(x, y).ok());
    let rem = grid_sup(region, pitch, |x, y| {
        let hn = plus.hamiltonian(x, y).ok()?;
        Some((hn - leading_terms(&plus, x, y)).abs())
    });
    Ok(DaggerReport {
        n: params.n(),
        b: plus.scale.b,
        eps,
        mode,
        constants: plus.constants,
        upper: SlackSup { value: up.value, at: up.at },
        lower: SlackSup { value: lo.value, at: lo.at },
        remainder: rem.value,
        skipped: up.skipped + lo.skipped,
    })
}

/// Leading terms of `H_n f_n^{eps,+}` away from the plateau, with the
/// cut-off derivatives taken at their identity values.
fn leading_terms(fe: &FEps, x: f64, y: f64) -> f64 {
    let s2 = fe.scale.params.sigma2();
    let s4 = s2 * s2;
    let b = fe.scale.b;
    let e = fe.eps;
    let fp = fe.f.jet(x)[1];
    let x2 = x * x;
    -x * x2 * fp / (2.0 * s4) - e * (x2 * x2 / (s4 * (1.0 + x2)) + 2.0 * b * b * y * y / s2)
        + 0.5 * (fp * fp + 4.0 * e * e * x2 / ((1.0 + x2) * (1.0 + x2)))
        + 8.0 * e * e * s2 * y * y
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sq() -> Profile {
        Profile::monomial(2).mollified(4.0)
    }

    #[test]
    fn cbar_for_zero_profile() {
        let p = ModelParams::new(1.0, 10).unwrap();
        let s = ScalingSchedule::power(0.125).unwrap();
        let c = bound_constants(&Profile::zero().mollified(4.0), 0.5, &p, &s).unwrap();
        assert_eq!(c.cbar, 1.0);
        assert_eq!(c.n1, 20736);
        assert!(c.n_star >= c.n1 && c.n_star >= c.n2);
    }

    #[test]
    fn n2_sign_change() {
        let p = ModelParams::new(1.0, 10).unwrap();
        let s = ScalingSchedule::power(0.125).unwrap();
        let c = bound_constants(&Profile::zero().mollified(4.0), 0.5, &p, &s).unwrap();
        let at = |n: u64| {
            let b = s.b(n).unwrap();
            -2.0 * b * b + 8.0 * (b.powi(4) / n as f64 * CHI_D2_SUP + 1.0)
        };
        assert!(at(c.n2) > 0.0 && at(c.n2 + 1) <= 0.0);
    }

    #[test]
    fn rejects_bad_eps() {
        let p = ModelParams::new(1.0, 10).unwrap();
        let s = ScalingSchedule::power(0.125).unwrap();
        for e in [0.0, 1.0, -0.2] {
            assert!(build_f_eps(&sq(), e, Sign::Plus, &p, &s, CutoffMode::Local).is_err());
        }
    }

    #[test]
    fn literal_vanishes_below_nstar() {
        let p = ModelParams::new(1.0, 1000).unwrap();
        let s = ScalingSchedule::power(0.125).unwrap();
        let fe = build_f_eps(&sq(), 0.1, Sign::Plus, &p, &s, CutoffMode::Literal).unwrap();
        assert!(fe.vanishes());
        assert_eq!(fe.jet(0.3, 0.2), Jet2::ZERO);
        assert_eq!(fe.hamiltonian(0.3, 0.2).unwrap(), 0.0);
        assert!(fe.slack(0.3, 0.2).unwrap() < 0.0);
    }

    #[test]
    fn local_mode_is_perturbed_sum() {
        let p = ModelParams::new(1.0, 1_000_000).unwrap();
        let s = ScalingSchedule::power(0.125).unwrap();
        let fe = build_f_eps(&Profile::zero().mollified(4.0), 0.5, Sign::Plus, &p, &s, CutoffMode::Local).unwrap();
        let (x, y) = (0.4, -0.3);
        let b = fe.scale.b;
        let g = perturbed_jet(&Profile::LogOnePlusSquare, 1.0, b, x, y);
        assert!((fe.value(x, y) - 0.5 * (y * y + g.v)).abs() < 1e-15);
        assert!((fe.limit(x, y) - 0.5 * (y * y + (1.0 + x * x).ln())).abs() < 1e-15);
    }

    #[test]
    fn plus_bounded_below_minus_above() {
        let s = ScalingSchedule::power(0.125).unwrap();
        let f = sq();
        let p0 = ModelParams::new(1.0, 10).unwrap();
        let nstar = bound_constants(&f, 0.1, &p0, &s).unwrap().n_star;
        let fmax = f.sup_norms(0.0, 1e-3)[0];
        for n in [10_000u64, nstar + 1, nstar.saturating_mul(2), nstar.saturating_mul(5)] {
            let p = ModelParams::new(1.0, n).unwrap();
            let plus = build_f_eps(&f, 0.1, Sign::Plus, &p, &s, CutoffMode::Literal).unwrap();
            let minus = build_f_eps(&f, 0.1, Sign::Minus, &p, &s, CutoffMode::Literal).unwrap();
            for i in 0..=60 {
                for j in 0..=60 {
                    let (x, y) = (-6.0 + 0.2 * i as f64, -3.0 + 0.1 * j as f64);
                    assert!(plus.value(x, y) >= -fmax - 1.0);
                    assert!(minus.value(x, y) <= fmax + 1.0);
                }
            }
        }
    }
}
