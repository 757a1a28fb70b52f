//! Statistical checks tying the simulators to the limit theory: limit laws,
//! Gaussian tail bounds, compact containment and rate estimation.

mod containment;
mod limits;
mod rate;
mod tail;

use std::collections::BTreeMap;

use serde::Serialize;

pub use containment::{containment_diagnostic, ContainmentRow, ContainmentSpec, ContainmentTable};
pub use limits::{check_clt_increment, check_critical_limit, check_ou_limit, collapse_medians, CollapsePoint};
pub use rate::{estimate_rate, RateEstimate, RateRow, RateSpec, TubeCandidate};
pub use tail::{feller_bound_displayed, feller_bound_scaled, tail_bound_check, tail_empirical, TailEmpirical, TailReport};

/// Significance level for every KS verdict.
pub const ALPHA: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitTestReport {
    pub name: String,
    pub sizes: Vec<usize>,
    pub statistic: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub pass: bool,
    /// Every sample was identical, so no distributional test was run.
    pub degenerate: bool,
    pub extra: BTreeMap<String, f64>,
}
