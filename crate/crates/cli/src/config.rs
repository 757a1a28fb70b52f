//! `RunConfig`: sectioned `key = value` files (TOML syntax), overridden by
//! command-line flags. Unknown sections or keys are rejected.

use std::path::Path as FsPath;

use cwsoc::expansion::CutoffMode;
use cwsoc::simulate::{Engine, FluctuationMethod};
use cwsoc::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub model: ModelSection,
    pub schedule: ScheduleSection,
    pub sim: SimSection,
    pub gibbs: GibbsSection,
    pub expansion: ExpansionSection,
    pub variational: VariationalSection,
    pub check: CheckSection,
    pub rate: RateSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    /// Ensemble size; 0 picks the subcommand default.
    pub replicas: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub sigma: f64,
    pub n: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    /// `b_n = n^alpha`, ignored when `table` is non-empty.
    pub alpha: f64,
    /// Explicit `[n, b_n]` pairs.
    pub table: Vec<(u64, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    IidGaussian,
    FixedReducedState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub horizon: f64,
    /// Microscopic step; 0 resolves to `horizon / 4096`.
    pub dt: f64,
    pub initial: InitialKind,
    /// Start for `fixed-reduced-state` (raw frame) and for the critical SDE.
    pub x0: f64,
    /// Start for `fixed-reduced-state` (raw frame) and for the OU process.
    pub y0: f64,
    pub record_every: usize,
    pub noise: bool,
    pub engine: Engine,
    pub method: FluctuationMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GibbsSection {
    pub burn_in: usize,
    pub sweeps: usize,
    pub thin: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpansionSection {
    /// Highest monomial degree for `verify cancellation`.
    pub degree: u32,
    /// Random polynomials for `verify cancellation`.
    pub random: usize,
    /// Test function coefficients, ascending; mollified with `inner`.
    pub coefficients: Vec<f64>,
    pub inner: f64,
    pub eps: f64,
    pub mode: CutoffMode,
    pub ns: Vec<u64>,
    /// Ladder for `verify taylor`.
    pub taylor_ns: Vec<u64>,
    pub half_width: f64,
    pub pitch: f64,
    /// Threshold on the final slack in `verify dagger-bound`.
    pub slack_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialCostKind {
    Deterministic,
    Free,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariationalSection {
    pub x0: f64,
    pub x_end: f64,
    pub horizon: f64,
    pub nodes: usize,
    pub initial: InitialCostKind,
    pub max_iterations: usize,
    pub gradient_tol: f64,
    pub shooting_steps: usize,
    pub agreement: f64,
    pub lambda: f64,
    pub domain: (f64, f64),
    pub points: usize,
    /// Resolvent right-hand side: `cos`, `square`, `bump` or a CSV path with `x,h`.
    pub h: String,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSection {
    /// Evaluation time for the limit-law checks.
    pub t: f64,
    /// Tail level.
    pub a: f64,
    pub boxes: Vec<f64>,
    pub ns: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateSection {
    /// Target path `gamma(t) = start + slope t`.
    pub start: f64,
    pub slope: f64,
    pub horizon: f64,
    pub delta: f64,
    pub ns: Vec<u64>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { seed: 0, replicas: 0 }
    }
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { sigma: 1.0, n: 10_000 }
    }
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self { alpha: 0.125, table: Vec::new() }
    }
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            dt: 0.0,
            initial: InitialKind::IidGaussian,
            x0: 0.0,
            y0: 0.0,
            record_every: 1,
            noise: true,
            engine: Engine::Projected,
            method: FluctuationMethod::Transformed,
        }
    }
}

impl Default for GibbsSection {
    fn default() -> Self {
        Self { burn_in: 1000, sweeps: 1000, thin: 10 }
    }
}

impl Default for ExpansionSection {
    fn default() -> Self {
        Self {
            degree: 8,
            random: 100,
            coefficients: vec![0.0, 0.0, 1.0],
            inner: 4.0,
            eps: 0.1,
            mode: CutoffMode::Local,
            ns: vec![1_000, 10_000, 100_000, 1_000_000],
            taylor_ns: (10..=30).step_by(2).map(|e| 1u64 << e).collect(),
            half_width: 1.0,
            pitch: 0.01,
            slack_tol: 0.05,
        }
    }
}

impl Default for VariationalSection {
    fn default() -> Self {
        Self {
            x0: 0.0,
            x_end: 1.0,
            horizon: 1.0,
            nodes: 2049,
            initial: InitialCostKind::Deterministic,
            max_iterations: 200,
            gradient_tol: 1e-11,
            shooting_steps: 1 << 14,
            agreement: 1e-5,
            lambda: 1.0,
            domain: (-2.0, 2.0),
            points: 201,
            h: "cos".into(),
            tol: 1e-10,
        }
    }
}

impl Default for CheckSection {
    fn default() -> Self {
        Self { t: 1.0, a: 1.0, boxes: vec![0.5, 1.0, 2.0, 5.0], ns: vec![1_000, 10_000, 100_000] }
    }
}

impl Default for RateSection {
    fn default() -> Self {
        Self { start: 0.0, slope: 0.8, horizon: 1.0, delta: 0.25, ns: vec![1 << 10, 1 << 14, 1 << 18] }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            run: RunSection::default(),
            model: ModelSection::default(),
            schedule: ScheduleSection::default(),
            sim: SimSection::default(),
            gibbs: GibbsSection::default(),
            expansion: ExpansionSection::default(),
            variational: VariationalSection::default(),
            check: CheckSection::default(),
            rate: RateSection::default(),
        }
    }
}

fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

fn de_error(src: &str, e: toml::de::Error) -> Error {
    let line = e.span().map_or(0, |s| line_of(src, s.start));
    Error::Config { line, message: e.message().to_string() }
}

/// Parses an override value as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

impl RunConfig {
    /// Reads `path` (if any), applies `section.key = value` overrides in
    /// order, and resolves derived defaults.
    pub fn load(path: Option<&FsPath>, overrides: &[(String, String)]) -> Result<Self> {
        let src = match path {
            Some(p) => std::fs::read_to_string(p)?,
            None => String::new(),
        };
        // typed pass over the file alone keeps source spans for error lines
        toml::from_str::<RunConfig>(&src).map_err(|e| de_error(&src, e))?;
        let mut table: toml::Table = src.parse().map_err(|e| de_error(&src, e))?;
        for (key, raw) in overrides {
            let (section, field) = key
                .split_once('.')
                .ok_or_else(|| Error::Config { line: 0, message: format!("override `{key}` must be section.key") })?;
            let entry = table
                .entry(section.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            let toml::Value::Table(sec) = entry else {
                return Err(Error::Config { line: 0, message: format!("`{section}` is not a section") });
            };
            sec.insert(field.to_string(), parse_value(raw));
        }
        let mut cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config { line: 0, message: format!("override: {}", e.message()) })?;
        if cfg.sim.dt == 0.0 {
            cfg.sim.dt = cfg.sim.horizon / 4096.0;
        }
        Ok(cfg)
    }

    /// Fully resolved configuration in the input syntax.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn load_str(src: &str, ov: &[(&str, &str)]) -> Result<RunConfig> {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(src.as_bytes()).unwrap();
        let ov: Vec<(String, String)> = ov.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        RunConfig::load(Some(f.path()), &ov)
    }

    #[test]
    fn defaults_resolve_dt() {
        let c = RunConfig::load(None, &[]).unwrap();
        assert_eq!(c.sim.dt, 1.0 / 4096.0);
    }

    #[test]
    fn file_and_override() {
        let c = load_str("# comment\n[model]\nsigma = 2.0\nn = 100\n", &[("model.n", "500"), ("sim.engine", "spins")]).unwrap();
        assert_eq!(c.model.sigma, 2.0);
        assert_eq!(c.model.n, 500);
        assert_eq!(c.sim.engine, Engine::Spins);
    }

    #[test]
    fn unknown_key_reports_line() {
        match load_str("[model]\nsigma = 1.0\nsigmaa = 2.0\n", &[]) {
            Err(Error::Config { line, message }) => {
                assert_eq!(line, 3, "{message}");
                assert!(message.contains("sigmaa"));
            }
            other => panic!("{other:?}"),
        }
        assert!(load_str("[nope]\n", &[]).is_err());
        assert!(load_str("", &[("model.bogus", "1")]).is_err());
    }

    #[test]
    fn echo_round_trips() {
        let c = load_str("[check]\nboxes = [1.0, 3.0]\n", &[]).unwrap();
        let again = load_str(&c.echo(), &[]).unwrap();
        assert_eq!(c, again);
    }
}
