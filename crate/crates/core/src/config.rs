//! JSON run configuration.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "system": { "catalog": "ball", "params": { "m": 1, "r": 1, "k2": 0.4, "Omega": "1" } },
//!   "tolerances": { "cond_tol": 1e12, "on_constraint_tol": 1e-8 },
//!   "run": { "command": "simulate", "t0": 0, "t1": 10, "step": 0.001, "method": "rk4" }
//! }
//! ```
//!
//! An explicit system replaces `catalog` with `base`, `fibre`, `rho0`, `rho`, optional `c0`,
//! `brackets` (1-based `gamma, alpha, beta`), `lagrangian` and `constraints`. Expression entries
//! may be strings or numbers.

use std::collections::BTreeMap;

use serde::Deserialize;

use crate::algebroid::AffgebroidModel;
use crate::catalog::{descriptor, parse_constraints, SystemDescriptor};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::hamiltonian::NewtonOptions;
use crate::integrator::Method;
use crate::lagrangian::Lagrangian;
use crate::linalg::COND_TOL;
use crate::nonholonomic::{ConstrainedSystem, Tolerances};

pub const SCHEMA_VERSION: u32 = 1;

/// An expression written either as a string or as a bare number.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ExprText {
    Number(f64),
    Text(String),
}

impl ExprText {
    pub fn as_source(&self) -> String {
        match self {
            ExprText::Number(v) => format!("{v:?}"),
            ExprText::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BracketEntry {
    pub gamma: usize,
    pub alpha: usize,
    pub beta: usize,
    pub value: ExprText,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintEntry {
    pub mu0: ExprText,
    pub mu: Vec<ExprText>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub catalog: Option<String>,
    pub name: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, serde_json::Value>,
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub r: Option<usize>,
    pub base: Option<Vec<String>>,
    pub fibre: Option<Vec<String>>,
    pub rho0: Option<Vec<ExprText>>,
    pub rho: Option<Vec<Vec<ExprText>>>,
    pub c0: Option<Vec<Vec<ExprText>>>,
    #[serde(default)]
    pub brackets: Vec<BracketEntry>,
    pub lagrangian: Option<String>,
    #[serde(default)]
    pub constraints: Vec<ConstraintEntry>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceSection {
    pub cond_tol: f64,
    pub on_constraint_tol: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Overrides of the per-invariant tolerances used by `check`.
    pub checks: BTreeMap<String, f64>,
}

impl Default for ToleranceSection {
    fn default() -> Self {
        Self {
            cond_tol: COND_TOL,
            on_constraint_tol: Tolerances::default().on_constraint_tol,
            newton_tol: NewtonOptions::default().tol,
            newton_max_iter: NewtonOptions::default().max_iter,
            checks: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub command: Option<String>,
    pub initial_state: Option<Vec<f64>>,
    pub t0: f64,
    pub t1: f64,
    pub step: f64,
    pub method: String,
    pub project: bool,
    pub hamiltonian: bool,
    pub seed: u64,
    pub samples: usize,
    pub out: Option<String>,
    /// Evaluation points: `[x, y]` for `derive`, `[x, p]` for `bracket`.
    pub points: Option<Vec<Vec<f64>>>,
    /// Extensions for `bracket`: `"H"`, `"H + <expr>"`, `"H - <expr>"` or an expression in the base names and `p_<fibre>`.
    pub h1: String,
    pub h2: String,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            command: None,
            initial_state: None,
            t0: 0.0,
            t1: 10.0,
            step: 1e-3,
            method: "rk4".into(),
            project: false,
            hamiltonian: false,
            seed: 0,
            samples: 100,
            out: None,
            points: None,
            h1: "H".into(),
            h2: "H".into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema_version: u32,
    pub system: SystemSection,
    #[serde(default)]
    pub tolerances: ToleranceSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Check,
    Bracket,
    Derive,
}

impl std::str::FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simulate" => Ok(Command::Simulate),
            "check" => Ok(Command::Check),
            "bracket" => Ok(Command::Bracket),
            "derive" => Ok(Command::Derive),
            other => Err(Error::Config {
                field: "run.command".into(),
                message: format!("unknown command `{other}` (expected simulate, check, bracket or derive)"),
            }),
        }
    }
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Check => "check",
            Command::Bracket => "bracket",
            Command::Derive => "derive",
        }
    }
}

/// Validated run parameters after command-line overrides.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub command: Command,
    pub initial_state: Option<Vec<f64>>,
    pub t0: f64,
    pub t1: f64,
    pub step: f64,
    pub method: Method,
    pub project: bool,
    pub hamiltonian: bool,
    pub seed: u64,
    pub samples: usize,
    pub out: String,
    pub points: Option<Vec<Vec<f64>>>,
    pub h1: String,
    pub h2: String,
}

/// A parsed configuration ready to run.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub system: SystemDescriptor,
    pub newton: NewtonOptions,
    pub check_tolerances: BTreeMap<String, f64>,
    pub run: RunSection,
}

/// Command-line overrides of the `run` section.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub command: Option<String>,
    pub out: Option<String>,
    pub seed: Option<u64>,
    pub step: Option<f64>,
    pub t0: Option<f64>,
    pub t1: Option<f64>,
    pub method: Option<String>,
    pub project: bool,
    pub hamiltonian: bool,
}

fn config_err(field: impl Into<String>, e: impl std::fmt::Display) -> Error {
    Error::Config {
        field: field.into(),
        message: e.to_string(),
    }
}

/// Parses and validates a JSON configuration.
pub fn parse_config(text: &str) -> Result<LoadedConfig> {
    let file: ConfigFile = serde_json::from_str(text)
        .map_err(|e| config_err("<json>", format!("line {} column {}: {e}", e.line(), e.column())))?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(config_err(
            "schema_version",
            format!("unsupported version {} (expected {SCHEMA_VERSION})", file.schema_version),
        ));
    }
    let tol = &file.tolerances;
    if !(tol.cond_tol > 1.0) || !(tol.on_constraint_tol > 0.0) || !(tol.newton_tol > 0.0) {
        return Err(config_err("tolerances", "cond_tol must exceed 1 and other tolerances must be positive"));
    }
    let tolerances = Tolerances {
        cond_tol: tol.cond_tol,
        on_constraint_tol: tol.on_constraint_tol,
    };
    let mut system = build_system(&file.system)?;
    system.system = system.system.with_tolerances(tolerances);
    let newton = NewtonOptions {
        tol: tol.newton_tol,
        max_iter: tol.newton_max_iter,
        cond_tol: tol.cond_tol,
    };
    Ok(LoadedConfig {
        system,
        newton,
        check_tolerances: tol.checks.clone(),
        run: file.run,
    })
}

fn build_system(s: &SystemSection) -> Result<SystemDescriptor> {
    let desc = match &s.catalog {
        Some(name) => catalog_system(name, s)?,
        None => explicit_system(s)?,
    };
    let sys = &desc.system;
    for (key, expected, got) in [("m", s.m, sys.m()), ("n", s.n, sys.n()), ("r", s.r, sys.r())] {
        if let Some(e) = expected {
            if e != got {
                return Err(config_err(format!("system.{key}"), format!("declared {e} but the system has {got}")));
            }
        }
    }
    Ok(desc)
}

fn catalog_system(name: &str, s: &SystemSection) -> Result<SystemDescriptor> {
    let explicit = s.base.is_some() || s.fibre.is_some() || s.rho0.is_some() || s.rho.is_some() || s.lagrangian.is_some();
    if explicit || !s.constraints.is_empty() || !s.brackets.is_empty() {
        return Err(config_err("system", "a catalog reference cannot be combined with explicit model entries"));
    }
    let mut params = BTreeMap::new();
    let mut expr = None;
    for (k, v) in &s.params {
        match v {
            serde_json::Value::Number(x) => {
                params.insert(k.clone(), x.as_f64().unwrap_or(f64::NAN));
            }
            serde_json::Value::String(text) if k == "Omega" || k == "f" => expr = Some(text.clone()),
            _ => return Err(config_err(format!("system.params.{k}"), "expected a number")),
        }
    }
    let mut desc = descriptor(name, &params, expr.as_deref()).map_err(|e| match e {
        Error::Config { .. } => e,
        other => config_err("system.params", other),
    })?;
    if let Some(n) = &s.name {
        desc.name = n.clone();
    }
    Ok(desc)
}

fn numeric_params(s: &SystemSection) -> Result<BTreeMap<String, f64>> {
    s.params
        .iter()
        .map(|(k, v)| match v.as_f64() {
            Some(x) => Ok((k.clone(), x)),
            None => Err(config_err(format!("system.params.{k}"), "expected a number")),
        })
        .collect()
}

fn explicit_system(s: &SystemSection) -> Result<SystemDescriptor> {
    let need = |field: &str| config_err(format!("system.{field}"), "required for an explicit system");
    let base = s.base.as_ref().ok_or_else(|| need("base"))?;
    let fibre = s.fibre.as_ref().ok_or_else(|| need("fibre"))?;
    let (m, n) = (base.len(), fibre.len());
    let params = numeric_params(s)?;
    let field = |src: &ExprText, path: String| -> Result<ScalarField> {
        ScalarField::parse(&src.as_source(), base, &params).map_err(|e| config_err(path, e))
    };
    let mut b = AffgebroidModel::builder(base, fibre);
    if let Some(rho0) = &s.rho0 {
        if rho0.len() != m {
            return Err(config_err("system.rho0", format!("expected {m} entries, got {}", rho0.len())));
        }
        for (i, e) in rho0.iter().enumerate() {
            b = b.rho0(i, field(e, format!("system.rho0[{i}]"))?);
        }
    }
    let rho = s.rho.as_ref().ok_or_else(|| need("rho"))?;
    if rho.len() != m || rho.iter().any(|row| row.len() != n) {
        return Err(config_err("system.rho", format!("expected an {m} x {n} array")));
    }
    for (i, row) in rho.iter().enumerate() {
        for (a, e) in row.iter().enumerate() {
            b = b.rho(i, a, field(e, format!("system.rho[{i}][{a}]"))?);
        }
    }
    if let Some(c0) = &s.c0 {
        if c0.len() != n || c0.iter().any(|row| row.len() != n) {
            return Err(config_err("system.c0", format!("expected an {n} x {n} array indexed [gamma][alpha]")));
        }
        for (g, row) in c0.iter().enumerate() {
            for (a, e) in row.iter().enumerate() {
                b = b.c0(g, a, field(e, format!("system.c0[{g}][{a}]"))?);
            }
        }
    }
    for (k, br) in s.brackets.iter().enumerate() {
        let path = format!("system.brackets[{k}]");
        let ok = |i: usize| (1..=n).contains(&i);
        if !ok(br.gamma) || !ok(br.alpha) || !ok(br.beta) {
            return Err(config_err(path, format!("indices are 1-based and must lie in 1..={n}")));
        }
        b = b.bracket(br.gamma - 1, br.alpha - 1, br.beta - 1, field(&br.value, path)?);
    }
    let model = b.build().map_err(|e| config_err("system", e))?;
    let lsrc = s.lagrangian.as_ref().ok_or_else(|| need("lagrangian"))?;
    let l = Lagrangian::parse(&model, lsrc, &params).map_err(|e| config_err("system.lagrangian", e))?;
    if s.constraints.is_empty() {
        return Err(config_err("system.constraints", "at least one constraint is required"));
    }
    let rows: Vec<(String, Vec<String>)> = s
        .constraints
        .iter()
        .map(|c| (c.mu0.as_source(), c.mu.iter().map(ExprText::as_source).collect()))
        .collect();
    let cs = parse_constraints(&model, &rows, &params).map_err(|e| config_err("system.constraints", e))?;
    let sys = ConstrainedSystem::from_parts(model, l, cs)?;
    Ok(SystemDescriptor {
        name: s.name.clone().unwrap_or_else(|| "custom".into()),
        params,
        system: sys,
        time_index: None,
        reference_accelerations: None,
    })
}

impl LoadedConfig {
    /// Applies command-line overrides and validates the run parameters.
    pub fn run_spec(&self, o: &Overrides) -> Result<RunSpec> {
        let r = &self.run;
        let command: Command = o
            .command
            .clone()
            .or_else(|| r.command.clone())
            .ok_or_else(|| config_err("run.command", "no command given"))?
            .parse()?;
        let method: Method = o.method.clone().unwrap_or_else(|| r.method.clone()).parse()?;
        let spec = RunSpec {
            command,
            initial_state: r.initial_state.clone(),
            t0: o.t0.unwrap_or(r.t0),
            t1: o.t1.unwrap_or(r.t1),
            step: o.step.unwrap_or(r.step),
            method,
            project: o.project || r.project,
            hamiltonian: o.hamiltonian || r.hamiltonian,
            seed: o.seed.unwrap_or(r.seed),
            samples: r.samples,
            out: o.out.clone().or_else(|| r.out.clone()).unwrap_or_else(|| "out".into()),
            points: r.points.clone(),
            h1: r.h1.clone(),
            h2: r.h2.clone(),
        };
        let dim = self.system.system.m() + self.system.system.n();
        if let Some(s) = &spec.initial_state {
            if s.len() != dim {
                return Err(config_err("run.initial_state", format!("expected {dim} entries, got {}", s.len())));
            }
        }
        if let Some(points) = &spec.points {
            if let Some(k) = points.iter().position(|p| p.len() != dim) {
                return Err(config_err(format!("run.points[{k}]"), format!("expected {dim} entries")));
            }
        }
        if command == Command::Simulate && (!(spec.step > 0.0) || !(spec.t1 > spec.t0)) {
            return Err(config_err("run", "simulate needs step > 0 and t1 > t0"));
        }
        if spec.samples == 0 && spec.points.is_none() && command != Command::Simulate {
            return Err(config_err("run.samples", "must be positive"));
        }
        Ok(spec)
    }
}
