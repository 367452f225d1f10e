//! Scenario configuration: TOML schema, validation and replica expansion.
//!
//! Unknown keys are rejected. A scenario with `replicas = k` expands into
//! `k` scenarios named `name/00`, `name/01`, ... whose local seeds are
//! `seed, seed + 1, ...`. Every seed used by a check is derived from the run
//! seed and the local seed only, so scenario order never changes a draw.

use std::collections::BTreeSet;
use std::path::Path;

use cr_toeplitz::rng::fnv1a;
use globset::Glob;
use serde::Deserialize;

use crate::error::ConfigError;

/// Name under which the bundled default configuration can be requested.
pub const PAPER_DEFAULTS: &str = "paper-defaults";

const PAPER_DEFAULTS_TOML: &str = include_str!("../configs/paper-defaults.toml");

fn default_jet_order() -> usize {
    6
}

fn default_n() -> usize {
    1
}

fn default_replicas() -> usize {
    1
}

fn default_lambda_share() -> f64 {
    0.5
}

/// Top-level file contents.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_jet_order")]
    pub jet_order: usize,
    pub tolerance: Option<Tolerance>,
    #[serde(default, rename = "scenario")]
    pub scenarios: Vec<ScenarioSpec>,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Tolerance {
    pub absolute: f64,
    pub relative: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            absolute: 1e-10,
            relative: 1e-10,
        }
    }
}

impl Tolerance {
    /// Pass rule: `|a - b| <= absolute + relative |b|`.
    pub fn accepts(&self, abs_dev: f64, reference: f64) -> bool {
        abs_dev <= self.absolute + self.relative * reference
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    pub chart: ChartSpec,
    pub symbol: Option<SymbolSpec>,
    pub amplitudes: Option<AmplitudeSpec>,
    pub checks: Vec<Check>,
    pub tolerance: Option<Tolerance>,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Model {
    Heisenberg,
    Perturbed,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    pub model: Model,
    #[serde(default = "default_n")]
    pub n: usize,
    pub jet_order: Option<usize>,
    pub r_synth: Option<f64>,
    #[serde(default = "default_lambda_share")]
    pub lambda_share: f64,
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum SymbolKind {
    Identity,
    Multiplication,
    RandomHomogeneous,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolSpec {
    pub kind: SymbolKind,
    pub order: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmplitudeSpec {
    pub top_powers: [f64; 2],
    pub seed: Option<u64>,
}

/// Named invariants a scenario can request.
#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    ToeplitzB0,
    ToeplitzB1,
    SzegoIdempotenceC0,
    SzegoIdempotenceC1,
    CompositionC0,
    CompositionC1,
    OracleC0,
    OracleC1,
    SubprincipalInvariance,
    POperatorRoutes,
    EulerIdentity,
    PrincipalSymbolIdentity,
    KohnPointFormula,
    ChristoffelTable,
    ModelConsistency,
    UniquenessB1,
}

impl Check {
    pub fn id(self) -> &'static str {
        match self {
            Check::ToeplitzB0 => "toeplitz_b0",
            Check::ToeplitzB1 => "toeplitz_b1",
            Check::SzegoIdempotenceC0 => "szego_idempotence_c0",
            Check::SzegoIdempotenceC1 => "szego_idempotence_c1",
            Check::CompositionC0 => "composition_c0",
            Check::CompositionC1 => "composition_c1",
            Check::OracleC0 => "oracle_c0",
            Check::OracleC1 => "oracle_c1",
            Check::SubprincipalInvariance => "subprincipal_invariance",
            Check::POperatorRoutes => "p_operator_routes",
            Check::EulerIdentity => "euler_identity",
            Check::PrincipalSymbolIdentity => "principal_symbol_identity",
            Check::KohnPointFormula => "kohn_point_formula",
            Check::ChristoffelTable => "christoffel_table",
            Check::ModelConsistency => "model_consistency",
            Check::UniquenessB1 => "uniqueness_b1",
        }
    }

    /// Checks that apply `L₁` to phase jets.
    pub fn uses_l1(self) -> bool {
        matches!(
            self,
            Check::ToeplitzB1 | Check::SzegoIdempotenceC1 | Check::CompositionC1 | Check::OracleC1
        )
    }

    pub fn needs_symbol(self) -> bool {
        matches!(
            self,
            Check::ToeplitzB0
                | Check::ToeplitzB1
                | Check::SubprincipalInvariance
                | Check::POperatorRoutes
                | Check::EulerIdentity
                | Check::PrincipalSymbolIdentity
        )
    }

    fn needs_exact_heisenberg(self) -> bool {
        matches!(
            self,
            Check::POperatorRoutes | Check::OracleC0 | Check::OracleC1
        )
    }
}

/// A validated scenario with every seed and default resolved.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub chart: ResolvedChart,
    pub symbol: Option<ResolvedSymbol>,
    pub amplitudes: ResolvedAmplitudes,
    pub checks: Vec<Check>,
    pub tolerance: Tolerance,
    /// Scenario seed derived from the run seed and the scenario name.
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedChart {
    pub model: Model,
    pub n: usize,
    pub jet_order: usize,
    pub r_synth: f64,
    pub lambda_share: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedSymbol {
    pub kind: SymbolKind,
    pub order: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResolvedAmplitudes {
    pub top_powers: [f64; 2],
    pub seed: u64,
}

/// A validated run configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub seed: u64,
    pub jet_order: usize,
    pub scenarios: Vec<Scenario>,
}

/// Command-line overrides applied before validation.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub jet_order: Option<usize>,
    pub seed: Option<u64>,
    pub filter: Option<String>,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed used by a check: depends on the run seed and a local seed only.
pub fn derive_seed(run_seed: u64, local: u64) -> u64 {
    splitmix(run_seed ^ splitmix(local))
}

/// Reads a configuration file, or the bundled defaults for
/// [`PAPER_DEFAULTS`] when no such file exists.
pub fn load(path: &str, overrides: &Overrides) -> Result<Config, ConfigError> {
    let text = if path == PAPER_DEFAULTS && !Path::new(path).exists() {
        PAPER_DEFAULTS_TOML.to_string()
    } else {
        std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_string(),
            source,
        })?
    };
    parse(&text, overrides)
}

/// Parses and validates configuration text.
pub fn parse(text: &str, overrides: &Overrides) -> Result<Config, ConfigError> {
    let file: ConfigFile = toml::from_str(text)?;
    validate(file, overrides)
}

fn check_tolerance(field: &str, t: &Tolerance) -> Result<(), ConfigError> {
    for (name, v) in [("absolute", t.absolute), ("relative", t.relative)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(ConfigError::invalid(
                format!("{field}.{name}"),
                format!("tolerance must be positive and finite, got {v}"),
            ));
        }
    }
    Ok(())
}

/// Validates a parsed file and expands replicas.
pub fn validate(file: ConfigFile, overrides: &Overrides) -> Result<Config, ConfigError> {
    let seed = overrides.seed.unwrap_or(file.seed);
    let jet_order = overrides.jet_order.unwrap_or(file.jet_order);
    let default_tol = file.tolerance.unwrap_or_default();
    check_tolerance("tolerance", &default_tol)?;
    let filter = overrides
        .filter
        .as_deref()
        .map(|g| Glob::new(g).map(|g| g.compile_matcher()))
        .transpose()?;

    let mut scenarios = Vec::new();
    let mut names = BTreeSet::new();
    for (idx, spec) in file.scenarios.iter().enumerate() {
        let field = format!("scenario[{idx}]");
        if spec.name.trim().is_empty() {
            return Err(ConfigError::invalid(
                format!("{field}.name"),
                "must not be empty",
            ));
        }
        let field = format!("scenario[{idx}] ({})", spec.name);
        if spec.replicas == 0 {
            return Err(ConfigError::invalid(
                format!("{field}.replicas"),
                "must be at least 1",
            ));
        }
        let tolerance = spec.tolerance.unwrap_or(default_tol);
        check_tolerance(&format!("{field}.tolerance"), &tolerance)?;
        if spec.checks.is_empty() {
            return Err(ConfigError::invalid(
                format!("{field}.checks"),
                "no checks requested",
            ));
        }
        let mut seen = BTreeSet::new();
        for c in &spec.checks {
            if !seen.insert(*c) {
                return Err(ConfigError::invalid(
                    format!("{field}.checks"),
                    format!("check {} listed twice", c.id()),
                ));
            }
        }

        let chart = &spec.chart;
        if chart.n == 0 {
            return Err(ConfigError::invalid(
                format!("{field}.chart.n"),
                "must be at least 1",
            ));
        }
        let order = if overrides.jet_order.is_some() {
            jet_order
        } else {
            chart.jet_order.unwrap_or(jet_order)
        };
        let needs_l1 = spec.checks.iter().any(|c| c.uses_l1());
        let min_order = match (needs_l1, chart.model) {
            (true, Model::Perturbed) => 6,
            (true, Model::Heisenberg) => 4,
            (false, _) => 2,
        };
        if order < min_order {
            return Err(ConfigError::invalid(
                format!("{field}.chart.jet_order"),
                format!("jet order {order} is below the required {min_order} for these checks"),
            ));
        }
        let r_synth = match (chart.model, chart.r_synth) {
            (Model::Perturbed, Some(r)) if r.is_finite() => r,
            (Model::Perturbed, _) => {
                return Err(ConfigError::invalid(
                    format!("{field}.chart.r_synth"),
                    "perturbed charts need a finite r_synth",
                ))
            }
            (Model::Heisenberg, None) => 0.0,
            (Model::Heisenberg, Some(_)) => {
                return Err(ConfigError::invalid(
                    format!("{field}.chart.r_synth"),
                    "exact Heisenberg charts have R = 0",
                ))
            }
        };
        if !(0.0..=1.0).contains(&chart.lambda_share) {
            return Err(ConfigError::invalid(
                format!("{field}.chart.lambda_share"),
                "must lie in [0, 1]",
            ));
        }
        for c in &spec.checks {
            if c.needs_exact_heisenberg() && chart.model != Model::Heisenberg {
                return Err(ConfigError::invalid(
                    format!("{field}.checks"),
                    format!("check {} needs an exact Heisenberg chart", c.id()),
                ));
            }
            if matches!(c, Check::OracleC0 | Check::OracleC1) && chart.n != 1 {
                return Err(ConfigError::invalid(
                    format!("{field}.checks"),
                    format!("check {} is calibrated for n = 1", c.id()),
                ));
            }
            if c.needs_symbol() && spec.symbol.is_none() {
                return Err(ConfigError::invalid(
                    format!("{field}.symbol"),
                    format!("check {} needs a symbol", c.id()),
                ));
            }
        }
        if let Some(sym) = &spec.symbol {
            match (sym.kind, sym.order) {
                (SymbolKind::RandomHomogeneous, Some(m)) if m.is_finite() => {}
                (SymbolKind::RandomHomogeneous, _) => {
                    return Err(ConfigError::invalid(
                        format!("{field}.symbol.order"),
                        "random-homogeneous symbols need a finite order",
                    ))
                }
                (_, Some(m)) if m != 0.0 => {
                    return Err(ConfigError::invalid(
                        format!("{field}.symbol.order"),
                        "identity and multiplication symbols have order 0",
                    ))
                }
                _ => {}
            }
        }
        if let Some(a) = &spec.amplitudes {
            if a.top_powers.iter().any(|p| !p.is_finite()) {
                return Err(ConfigError::invalid(
                    format!("{field}.amplitudes.top_powers"),
                    "must be finite",
                ));
            }
        }

        let base_local = fnv1a(&spec.name);
        for r in 0..spec.replicas {
            let name = if spec.replicas == 1 {
                spec.name.clone()
            } else {
                format!("{}/{r:02}", spec.name)
            };
            if !names.insert(name.clone()) {
                return Err(ConfigError::invalid(
                    format!("{field}.name"),
                    format!("duplicate scenario name {name}"),
                ));
            }
            let local = |s: Option<u64>| s.unwrap_or(base_local).wrapping_add(r as u64);
            let scenario = Scenario {
                name: name.clone(),
                chart: ResolvedChart {
                    model: chart.model,
                    n: chart.n,
                    jet_order: order,
                    r_synth,
                    lambda_share: chart.lambda_share,
                    seed: derive_seed(seed, chart.seed.unwrap_or(base_local)),
                },
                symbol: spec.symbol.as_ref().map(|s| ResolvedSymbol {
                    kind: s.kind,
                    order: s.order.unwrap_or(0.0),
                    seed: derive_seed(seed, local(s.seed)),
                }),
                amplitudes: ResolvedAmplitudes {
                    top_powers: spec
                        .amplitudes
                        .as_ref()
                        .map_or([chart.n as f64; 2], |a| a.top_powers),
                    seed: derive_seed(seed, local(spec.amplitudes.as_ref().and_then(|a| a.seed))),
                },
                checks: spec.checks.clone(),
                tolerance,
                seed: derive_seed(seed, fnv1a(&name)),
            };
            if filter.as_ref().is_none_or(|m| m.is_match(&name)) {
                scenarios.push(scenario);
            }
        }
    }
    Ok(Config {
        seed,
        jet_order,
        scenarios,
    })
}
