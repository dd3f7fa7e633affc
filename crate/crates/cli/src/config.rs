//! JSON run configuration: parsing, validation and emission.

use std::fmt;

use branch_exponent_core::exponents::fpp_transform;
use branch_exponent_core::{LabelLaw, ModelSpec, PassageLaw, RootColour};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Analyze,
    Simulate,
    LdCheck,
    Brw,
    Fpp,
    Verify,
}

impl Command {
    /// Whether the command consumes random numbers and so needs a seed.
    pub fn is_stochastic(self) -> bool {
        matches!(
            self,
            Command::Simulate | Command::LdCheck | Command::Brw | Command::Fpp
        )
    }

    /// `brw` and `fpp` read passage-time / jump laws; the rest read labels.
    pub fn reads_passage_laws(self) -> bool {
        matches!(self, Command::Brw | Command::Fpp)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Command::Analyze => "analyze",
            Command::Simulate => "simulate",
            Command::LdCheck => "ld-check",
            Command::Brw => "brw",
            Command::Fpp => "fpp",
            Command::Verify => "verify",
        };
        f.write_str(name)
    }
}

/// Label law as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "lowercase")]
pub enum LabelDoc {
    Atomic {
        atoms: Vec<f64>,
        probs: Vec<f64>,
    },
    Lognormal {
        location: f64,
        scale: f64,
    },
    /// Bounds on `log xi`.
    Loguniform {
        lower: f64,
        upper: f64,
    },
    Deterministic {
        value: f64,
    },
}

impl LabelDoc {
    pub fn build(&self) -> branch_exponent_core::Result<LabelLaw> {
        match self {
            LabelDoc::Atomic { atoms, probs } => LabelLaw::atomic(atoms.clone(), probs.clone()),
            LabelDoc::Lognormal { location, scale } => LabelLaw::lognormal(*location, *scale),
            LabelDoc::Loguniform { lower, upper } => LabelLaw::loguniform(*lower, *upper),
            LabelDoc::Deterministic { value } => LabelLaw::deterministic(*value),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Laws {
    Labels(Vec<Vec<LabelDoc>>),
    Passage(Vec<Vec<PassageLaw>>),
}

impl Laws {
    fn to_value(&self) -> Value {
        match self {
            Laws::Labels(m) => serde_json::to_value(m),
            Laws::Passage(m) => serde_json::to_value(m),
        }
        .expect("law documents serialise")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Perron residual tolerance for the spectral solver.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectral: Option<f64>,
    /// Allowed `|M - s1|` in `verify`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_check: Option<f64>,
    /// Allowed relative error of `rho'` against central differences.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derivative: Option<f64>,
    /// Absolute slack on empirical LD rates in `ld-check`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ld_slack: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimulateMethod {
    /// Weighted single-path level sums.
    #[default]
    LevelSum,
    /// Depth-first enumeration of whole trees.
    Enumerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    #[serde(default)]
    pub method: SimulateMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdSection {
    #[serde(default)]
    pub a_grid: Vec<f64>,
    #[serde(default = "default_ld_n")]
    pub n: usize,
    #[serde(default)]
    pub tilt: bool,
    /// Cap for the adaptive doubling of `reps`.
    #[serde(default = "default_ld_max_reps")]
    pub max_reps: usize,
}

fn default_ld_n() -> usize {
    40
}

fn default_ld_max_reps() -> usize {
    1 << 22
}

impl Default for LdSection {
    fn default() -> Self {
        Self {
            a_grid: Vec::new(),
            n: default_ld_n(),
            tilt: false,
            max_reps: default_ld_max_reps(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BrwSection {
    #[serde(default = "default_brw_generations")]
    pub n_max: usize,
}

fn default_brw_generations() -> usize {
    20
}

impl Default for BrwSection {
    fn default() -> Self {
        Self {
            n_max: default_brw_generations(),
        }
    }
}

fn default_reps() -> usize {
    1000
}

fn default_depth_cap() -> usize {
    64
}

fn default_output() -> String {
    "results".into()
}

/// The document as written on disk, before laws are interpreted.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    d: usize,
    laws: Value,
    command: Command,
    #[serde(default)]
    t_grid: Vec<f64>,
    #[serde(default = "default_reps")]
    reps: usize,
    #[serde(default = "default_depth_cap")]
    depth_cap: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default)]
    tolerances: Tolerances,
    #[serde(default = "default_output")]
    output: String,
    #[serde(default)]
    root_colour: RootColour,
    #[serde(default)]
    simulate: SimulateSection,
    #[serde(default)]
    ld: LdSection,
    #[serde(default)]
    brw: BrwSection,
}

/// A validated configuration. `laws` keeps the documents verbatim so that
/// emitting and re-parsing reproduces the same value; `model` is the label
/// model they define (after the passage-time transform for `brw`/`fpp`).
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub d: usize,
    pub laws: Laws,
    pub model: ModelSpec,
    pub command: Command,
    pub t_grid: Vec<f64>,
    pub reps: usize,
    pub depth_cap: usize,
    pub seed: Option<u64>,
    pub tolerances: Tolerances,
    pub output: String,
    pub root_colour: RootColour,
    pub simulate: SimulateSection,
    pub ld: LdSection,
    pub brw: BrwSection,
}

impl RunConfig {
    /// Seed of a stochastic command; validation guarantees it is present.
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or_default()
    }
}

/// Either one law object (shared by every edge) or a `d x d` matrix.
fn law_matrix<T: for<'de> Deserialize<'de> + Clone>(
    value: &Value,
    d: usize,
    errors: &mut Vec<String>,
) -> std::result::Result<Option<Vec<Vec<T>>>, String> {
    match value {
        Value::Object(_) => {
            let law: T = serde_json::from_value(value.clone()).map_err(|e| format!("laws: {e}"))?;
            Ok(Some(vec![vec![law; d]; d]))
        }
        Value::Array(rows) => {
            let shape_ok = rows.len() == d
                && rows
                    .iter()
                    .all(|r| r.as_array().is_some_and(|r| r.len() == d));
            if !shape_ok {
                let got: Vec<String> = rows
                    .iter()
                    .map(|r| r.as_array().map_or("?".into(), |r| r.len().to_string()))
                    .collect();
                errors.push(format!(
                    "matrix shape: laws must be {d}x{d}, got {} row(s) of length [{}]",
                    rows.len(),
                    got.join(", ")
                ));
                return Ok(None);
            }
            let mut out = Vec::with_capacity(d);
            for (i, row) in rows.iter().enumerate() {
                let mut parsed = Vec::with_capacity(d);
                for (j, cell) in row.as_array().into_iter().flatten().enumerate() {
                    parsed.push(
                        serde_json::from_value(cell.clone())
                            .map_err(|e| format!("laws[{i}][{j}]: {e}"))?,
                    );
                }
                out.push(parsed);
            }
            Ok(Some(out))
        }
        _ => Err("laws: expected a law object or a matrix of law objects".into()),
    }
}

fn label_model(m: &[Vec<LabelDoc>], errors: &mut Vec<String>) -> Option<ModelSpec> {
    let mut rows = Vec::with_capacity(m.len());
    let mut ok = true;
    for (i, row) in m.iter().enumerate() {
        let mut built = Vec::with_capacity(row.len());
        for (j, doc) in row.iter().enumerate() {
            match doc.build() {
                Ok(law) => built.push(law),
                Err(e) => {
                    errors.push(format!("laws[{i}][{j}]: {e}"));
                    ok = false;
                }
            }
        }
        rows.push(built);
    }
    if !ok {
        return None;
    }
    ModelSpec::new(rows)
        .map_err(|e| errors.push(format!("laws: {e}")))
        .ok()
}

fn check_grid(name: &str, grid: &[f64], nonnegative: bool, errors: &mut Vec<String>) {
    if grid
        .iter()
        .any(|t| !t.is_finite() || (nonnegative && *t < 0.0))
    {
        let what = if nonnegative {
            "finite and >= 0"
        } else {
            "finite"
        };
        errors.push(format!("{name} values must be {what}"));
    }
    if grid
        .windows(2)
        .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
    {
        errors.push(format!("{name} must be strictly increasing"));
    }
}

fn check_positive(name: &str, v: Option<f64>, errors: &mut Vec<String>) {
    if let Some(v) = v {
        if !(v.is_finite() && v > 0.0) {
            errors.push(format!("tolerances.{name} must be positive and finite"));
        }
    }
}

/// Parses and validates a configuration document.
///
/// Syntax errors (with line and column) are [`CliError::Parse`]; every
/// violated invariant is collected into one [`CliError::Validation`].
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let doc: Document = serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    let mut errors = Vec::new();
    let d = doc.d;
    if d < 2 {
        return Err(CliError::Validation(vec![format!(
            "d must be at least 2 (got {d})"
        )]));
    }

    let mut model = None;
    let laws = if doc.command.reads_passage_laws() {
        let m = law_matrix::<PassageLaw>(&doc.laws, d, &mut errors).map_err(CliError::Parse)?;
        if let Some(m) = &m {
            match fpp_transform(m) {
                Ok(labels) => model = Some(labels),
                Err(e) => errors.push(format!("laws: {e}")),
            }
        }
        m.map(Laws::Passage)
    } else {
        let m = law_matrix::<LabelDoc>(&doc.laws, d, &mut errors).map_err(CliError::Parse)?;
        if let Some(m) = &m {
            model = label_model(m, &mut errors);
        }
        m.map(Laws::Labels)
    };

    check_grid("t_grid", &doc.t_grid, true, &mut errors);
    if doc.reps == 0 {
        errors.push("reps must be at least 1".into());
    }
    if doc.depth_cap == 0 {
        errors.push("depth_cap must be at least 1".into());
    }
    if doc.command.is_stochastic() && doc.seed.is_none() {
        errors.push(format!("seed required for command {}", doc.command));
    }
    if let RootColour::Fixed(c) = doc.root_colour {
        if c >= d {
            errors.push(format!("root_colour {c} out of range for d = {d}"));
        }
    }
    let t = &doc.tolerances;
    check_positive("spectral", t.spectral, &mut errors);
    check_positive("cross_check", t.cross_check, &mut errors);
    check_positive("derivative", t.derivative, &mut errors);
    check_positive("ld_slack", t.ld_slack, &mut errors);
    match doc.command {
        Command::Simulate | Command::Fpp if doc.t_grid.is_empty() => errors.push(format!(
            "t_grid must be non-empty for command {}",
            doc.command
        )),
        Command::LdCheck => {
            if doc.ld.a_grid.is_empty() {
                errors.push("ld.a_grid must be non-empty for command ld-check".into());
            }
            check_grid("ld.a_grid", &doc.ld.a_grid, false, &mut errors);
            if doc.ld.n == 0 {
                errors.push("ld.n must be at least 1".into());
            }
            if doc.ld.max_reps < doc.reps {
                errors.push("ld.max_reps must be at least reps".into());
            }
        }
        Command::Brw if doc.brw.n_max == 0 => errors.push("brw.n_max must be at least 1".into()),
        _ => {}
    }

    match (laws, model) {
        (Some(laws), Some(model)) if errors.is_empty() => Ok(RunConfig {
            d,
            laws,
            model,
            command: doc.command,
            t_grid: doc.t_grid,
            reps: doc.reps,
            depth_cap: doc.depth_cap,
            seed: doc.seed,
            tolerances: doc.tolerances,
            output: doc.output,
            root_colour: doc.root_colour,
            simulate: doc.simulate,
            ld: doc.ld,
            brw: doc.brw,
        }),
        _ => Err(CliError::Validation(errors)),
    }
}

/// Canonical JSON form of a configuration; laws are always written as a
/// full matrix.
pub fn emit(config: &RunConfig) -> String {
    let doc = Document {
        d: config.d,
        laws: config.laws.to_value(),
        command: config.command,
        t_grid: config.t_grid.clone(),
        reps: config.reps,
        depth_cap: config.depth_cap,
        seed: config.seed,
        tolerances: config.tolerances,
        output: config.output.clone(),
        root_colour: config.root_colour,
        simulate: config.simulate,
        ld: config.ld.clone(),
        brw: config.brw,
    };
    serde_json::to_string_pretty(&doc).expect("config serialises")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "d": 2,
        "laws": {"family": "lognormal", "params": {"location": -1.5, "scale": 1.0}},
        "command": "analyze"
    }"#;

    fn validation(text: &str) -> Vec<String> {
        match parse_config(text) {
            Err(CliError::Validation(v)) => v,
            other => panic!("expected a validation error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_document() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.d, 2);
        assert_eq!(c.command, Command::Analyze);
        assert!(c.model.is_iid());
        assert_eq!(c.reps, 1000);
        assert_eq!(c.seed, None);
        assert_eq!(c.root_colour, RootColour::Fixed(0));
    }

    #[test]
    fn wrong_matrix_shape() {
        let law = r#"{"family": "deterministic", "params": {"value": 0.5}}"#;
        let row = format!("[{law}, {law}, {law}]");
        let text = format!(r#"{{"d": 2, "laws": [{row}, {row}, {row}], "command": "analyze"}}"#);
        let errs = validation(&text);
        assert!(
            errs.iter().any(|e| e.starts_with("matrix shape")),
            "{errs:?}"
        );
    }

    #[test]
    fn stochastic_command_needs_seed() {
        let text = MINIMAL.replace("\"analyze\"", "\"simulate\", \"t_grid\": [1.0]");
        let errs = validation(&text);
        assert!(errs.iter().any(|e| e.contains("seed required")), "{errs:?}");
    }

    #[test]
    fn every_violation_is_listed() {
        let text = MINIMAL.replace(
            "\"analyze\"",
            "\"simulate\", \"t_grid\": [2.0, 1.0], \"reps\": 0",
        );
        let errs = validation(&text);
        assert_eq!(errs.len(), 3, "{errs:?}");
    }

    #[test]
    fn law_constructor_errors_are_reported_per_entry() {
        let text = MINIMAL.replace("\"scale\": 1.0", "\"scale\": -1.0");
        let errs = validation(&text);
        assert!(errs[0].starts_with("laws[0][0]"), "{errs:?}");
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_config("{\n  \"d\": 2,\n  oops\n}").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let text = MINIMAL.replace("\"d\": 2", "\"d\": 2, \"dd\": 3");
        assert!(matches!(parse_config(&text), Err(CliError::Parse(_))));
    }

    #[test]
    fn passage_laws_for_brw() {
        let text = r#"{
            "d": 2,
            "laws": {"family": "normal", "params": {"mean": 1.5, "sd": 1.0}},
            "command": "brw",
            "seed": 7
        }"#;
        let c = parse_config(text).unwrap();
        let expected = ModelSpec::iid(2, LabelLaw::lognormal(-1.5, 1.0).unwrap()).unwrap();
        assert_eq!(c.model, expected);
    }

    #[test]
    fn emit_round_trips() {
        let text = r#"{
            "d": 2,
            "laws": [
                [{"family": "atomic", "params": {"atoms": [0.25, 0.5], "probs": [0.3, 0.7]}},
                 {"family": "loguniform", "params": {"lower": -2.0, "upper": -0.1}}],
                [{"family": "deterministic", "params": {"value": 0.5}},
                 {"family": "lognormal", "params": {"location": -1.1, "scale": 0.3}}]
            ],
            "command": "ld-check",
            "seed": 18446744073709551615,
            "root_colour": "uniform",
            "tolerances": {"ld_slack": 0.05},
            "ld": {"a_grid": [-1.4, -1.0], "n": 30, "tilt": true}
        }"#;
        let c = parse_config(text).unwrap();
        assert_eq!(parse_config(&emit(&c)).unwrap(), c);
    }
}
