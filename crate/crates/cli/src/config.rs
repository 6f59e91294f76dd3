//! Run configuration: a small TOML document with top-level run settings and
//! one table per subsystem.
//!
//! ```toml
//! version = "horizon-walk/1"
//! manifold = "sphere"
//! seed = 7
//!
//! [walk]
//! alpha = 0.1
//! t = 1.0
//! ```

use horizon_walk_core::functions::BaseFunction;
use horizon_walk_core::increments::IncrementLaw;
use horizon_walk_core::manifold::{Manifold, ManifoldOptions};
use horizon_walk_core::walker::TimeMode;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Schema identifier written into every sidecar and accepted in configs.
pub const FORMAT_VERSION: &str = "horizon-walk/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_version")]
    pub version: String,
    #[serde(default = "default_manifold")]
    pub manifold: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: String,
    #[serde(default)]
    pub chart: ManifoldOptions,
    #[serde(default)]
    pub walk: WalkSection,
    #[serde(default)]
    pub generator: GeneratorSection,
    #[serde(default)]
    pub convergence: ConvergenceSection,
}

fn default_version() -> String {
    FORMAT_VERSION.to_string()
}

fn default_manifold() -> String {
    "euclidean".to_string()
}

fn default_out() -> String {
    "out".to_string()
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            version: default_version(),
            manifold: default_manifold(),
            seed: 0,
            out: default_out(),
            chart: ManifoldOptions::default(),
            walk: WalkSection::default(),
            generator: GeneratorSection::default(),
            convergence: ConvergenceSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkSection {
    pub alpha: f64,
    pub t: f64,
    pub law: IncrementLaw,
    pub replicas: usize,
    pub time_mode: TimeMode,
    /// Start point; the manifold's reference point when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<[f64; 2]>,
    /// Lifted walks start from the coordinate frame rotated by this angle.
    pub frame_angle: f64,
    /// Arclength per RK4 substep; min(1e-3, α/50) when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub integrator_step: Option<f64>,
    pub max_arclength: f64,
}

impl Default for WalkSection {
    fn default() -> Self {
        WalkSection {
            alpha: 0.1,
            t: 1.0,
            law: IncrementLaw::SphereUniform,
            replicas: 100,
            time_mode: TimeMode::DiscreteRescaled,
            initial: None,
            frame_angle: 0.0,
            integrator_step: None,
            max_arclength: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSection {
    /// Test functions by name; the manifold's whole catalog when empty.
    pub functions: Vec<String>,
    pub alphas: Vec<f64>,
    pub law: IncrementLaw,
    /// Monte Carlo samples for laws without an exact atom sum.
    pub samples: usize,
    pub fd_step: f64,
    pub tolerance: f64,
    /// Identity checks use `bases` random base points with
    /// `frames_per_base` frames over each.
    pub bases: usize,
    pub frames_per_base: usize,
    pub law_samples: usize,
    pub law_points: usize,
}

impl Default for GeneratorSection {
    fn default() -> Self {
        GeneratorSection {
            functions: Vec::new(),
            alphas: vec![0.2, 0.1, 0.05, 0.025],
            law: IncrementLaw::Rademacher,
            samples: 100_000,
            fd_step: 1e-3,
            tolerance: 1e-4,
            bases: 20,
            frames_per_base: 5,
            law_samples: 1_000_000,
            law_points: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceSection {
    /// Test functions by name; every function with a heat reference when empty.
    pub functions: Vec<String>,
    pub alphas: Vec<f64>,
    pub t_grid: Vec<f64>,
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        ConvergenceSection { functions: Vec::new(), alphas: vec![0.05], t_grid: vec![0.5] }
    }
}

const TOP_KEYS: &[&str] = &["version", "manifold", "seed", "out", "chart", "walk", "generator", "convergence"];
const CHART_KEYS: &[&str] = &["pole_band", "hyperbolic_y_min"];
const WALK_KEYS: &[&str] =
    &["alpha", "t", "law", "replicas", "time_mode", "initial", "frame_angle", "integrator_step", "max_arclength"];
const GENERATOR_KEYS: &[&str] = &[
    "functions",
    "alphas",
    "law",
    "samples",
    "fd_step",
    "tolerance",
    "bases",
    "frames_per_base",
    "law_samples",
    "law_points",
];
const CONVERGENCE_KEYS: &[&str] = &["functions", "alphas", "t_grid"];

fn suggestion(key: &str, known: &[&str]) -> Option<String> {
    known
        .iter()
        .map(|k| (strsim::damerau_levenshtein(key, k), *k))
        .filter(|(d, _)| *d <= 2)
        .min()
        .map(|(_, k)| k.to_string())
}

fn unknown_key(path: &str, key: &str, known: &[&str]) -> CliError {
    let full = if path.is_empty() { key.to_string() } else { format!("{path}.{key}") };
    let hint = suggestion(key, known).map(|s| format!("; did you mean `{s}`?")).unwrap_or_default();
    CliError::Validation { key: full, message: format!("unknown key{hint}") }
}

fn check_keys(table: &toml::Table) -> Result<(), CliError> {
    for (key, value) in table {
        let known = match key.as_str() {
            "chart" => CHART_KEYS,
            "walk" => WALK_KEYS,
            "generator" => GENERATOR_KEYS,
            "convergence" => CONVERGENCE_KEYS,
            k if TOP_KEYS.contains(&k) => continue,
            _ => {
                // a misplaced section key reads better with the section it belongs to
                let all: Vec<&str> = TOP_KEYS
                    .iter()
                    .chain(WALK_KEYS)
                    .chain(GENERATOR_KEYS)
                    .chain(CONVERGENCE_KEYS)
                    .chain(CHART_KEYS)
                    .copied()
                    .collect();
                return Err(unknown_key("", key, &all));
            }
        };
        let Some(section) = value.as_table() else {
            return Err(CliError::Validation { key: key.clone(), message: "expected a table".into() });
        };
        for k in section.keys() {
            if !known.contains(&k.as_str()) {
                return Err(unknown_key(key, k, known));
            }
        }
    }
    Ok(())
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map(|l| l.chars().count()).unwrap_or(0) + 1;
    (line, col)
}

/// The key assigned on the line containing `offset`, if any.
fn key_at(text: &str, offset: usize) -> Option<String> {
    let start = text[..offset.min(text.len())].rfind('\n').map(|i| i + 1).unwrap_or(0);
    let line = text[start..].lines().next()?;
    let (key, _) = line.split_once('=')?;
    Some(key.trim().trim_matches('"').to_string())
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let table: toml::Table = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map(|s| line_col(text, s.start)).unwrap_or((0, 0));
        CliError::Parse { line, column, message: e.message().to_string() }
    })?;
    check_keys(&table)?;
    let cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let key = e.span().and_then(|s| key_at(text, s.start)).unwrap_or_else(|| "config".into());
        CliError::Validation { key, message: e.message().to_string() }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// TOML text that [`parse_config`] maps back to `cfg`.
pub fn emit_config(cfg: &RunConfig) -> String {
    toml::to_string(cfg).expect("run configurations always serialize")
}

fn invalid(key: &str, message: impl Into<String>) -> CliError {
    CliError::Validation { key: key.to_string(), message: message.into() }
}

fn positive(key: &str, x: f64) -> Result<(), CliError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, format!("must be positive, got {x}")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.version != FORMAT_VERSION {
            return Err(invalid("version", format!("expected `{FORMAT_VERSION}`, got `{}`", self.version)));
        }
        if !Manifold::NAMES.contains(&self.manifold.as_str()) {
            let hint = suggestion(&self.manifold, &Manifold::NAMES)
                .map(|s| format!("; did you mean `{s}`?"))
                .unwrap_or_default();
            return Err(invalid("manifold", format!("unknown manifold `{}`{hint}", self.manifold)));
        }
        positive("chart.pole_band", self.chart.pole_band)?;
        positive("chart.hyperbolic_y_min", self.chart.hyperbolic_y_min)?;
        let w = &self.walk;
        if !(w.alpha > 0.0 && w.alpha <= 1.0) {
            return Err(invalid("alpha", format!("must lie in (0, 1], got {}", w.alpha)));
        }
        if !(w.t >= 0.0 && w.t.is_finite()) {
            return Err(invalid("t", format!("must be nonnegative, got {}", w.t)));
        }
        if w.replicas == 0 {
            return Err(invalid("replicas", "must be at least 1"));
        }
        if let Some(h) = w.integrator_step {
            positive("integrator_step", h)?;
        }
        positive("max_arclength", w.max_arclength)?;
        let g = &self.generator;
        for f in &g.functions {
            self.function_named("generator.functions", f)?;
        }
        if g.alphas.iter().any(|a| !(*a > 0.0 && *a <= 1.0)) {
            return Err(invalid("generator.alphas", "values must lie in (0, 1]"));
        }
        positive("fd_step", g.fd_step)?;
        positive("tolerance", g.tolerance)?;
        if g.bases == 0 || g.frames_per_base == 0 || g.law_points == 0 {
            return Err(invalid("generator", "bases, frames_per_base and law_points must be at least 1"));
        }
        let c = &self.convergence;
        for f in &c.functions {
            self.function_named("convergence.functions", f)?;
        }
        if c.alphas.is_empty() || c.alphas.iter().any(|a| !(*a > 0.0 && *a <= 1.0)) {
            return Err(invalid("convergence.alphas", "need at least one value in (0, 1]"));
        }
        if c.t_grid.is_empty() || c.t_grid.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(invalid("t_grid", "need at least one nonnegative time"));
        }
        Ok(())
    }

    fn function_named(&self, key: &str, name: &str) -> Result<BaseFunction, CliError> {
        let f: BaseFunction = name.parse().map_err(|_| {
            let names: Vec<&str> = BaseFunction::ALL.iter().map(|f| f.name()).collect();
            let hint = suggestion(name, &names).map(|s| format!("; did you mean `{s}`?")).unwrap_or_default();
            invalid(key, format!("unknown test function `{name}`{hint}"))
        })?;
        if f.manifold() != self.manifold {
            return Err(invalid(key, format!("`{name}` is defined on {}, not {}", f.manifold(), self.manifold)));
        }
        Ok(f)
    }

    pub fn manifold(&self) -> Manifold {
        Manifold::from_name(&self.manifold, &self.chart).expect("validated manifold name")
    }

    /// The configured generator test functions, or the manifold's catalog.
    pub fn generator_functions(&self) -> Vec<BaseFunction> {
        if self.generator.functions.is_empty() {
            BaseFunction::catalog_for(&self.manifold)
        } else {
            self.generator.functions.iter().map(|f| self.function_named("", f).expect("validated")).collect()
        }
    }

    /// The configured convergence test functions, or every catalog function
    /// of the manifold that has a heat reference.
    pub fn convergence_functions(&self) -> Vec<BaseFunction> {
        if self.convergence.functions.is_empty() {
            BaseFunction::catalog_for(&self.manifold)
                .into_iter()
                .filter(|f| self.manifold != "sphere" || f.eigenvalue().is_some())
                .collect()
        } else {
            self.convergence.functions.iter().map(|f| self.function_named("", f).expect("validated")).collect()
        }
    }
}
