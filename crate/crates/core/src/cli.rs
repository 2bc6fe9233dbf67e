//! Command execution behind the `affgebroid` binary. Every artifact is written at the end
//! through a temporary file and an atomic rename.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::algebroid::PhasePoint;
use crate::checks::{run_checks, sample_states};
use crate::config::{Command, LoadedConfig, Overrides, RunSpec, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::hamiltonian::{
    constrained_hamilton_field, hamiltonian_constraints, hamiltonian_from_lagrangian, legendre_forward, momentum_names,
    nonholonomic_bracket, HamiltonianData, MomentumPoint,
};
use crate::integrator::{
    drift_report, drift_report_momentum, integrate_with, project_momentum, project_to_constraint, IntegratorOptions,
};

/// Files produced by a command and whether every check passed.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub success: bool,
}

struct Artifacts {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    fn new(dir: &str) -> Self {
        Self {
            dir: PathBuf::from(dir),
            files: Vec::new(),
        }
    }

    fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    fn add_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
        text.push('\n');
        self.add(name, text.into_bytes());
        Ok(())
    }

    fn commit(self) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(&self.dir).map_err(|e| Error::Io(format!("{}: {e}", self.dir.display())))?;
        let mut out = Vec::new();
        for (name, bytes) in self.files {
            let path = self.dir.join(&name);
            write_atomic(&self.dir, &path, &bytes)?;
            out.push(path);
        }
        Ok(out)
    }
}

fn write_atomic(dir: &Path, path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |e: std::io::Error| Error::Io(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn csv_row(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// Runs the configured command.
pub fn run(cfg: &LoadedConfig, overrides: &Overrides) -> Result<Outcome> {
    let spec = cfg.run_spec(overrides)?;
    log::info!("running `{}` on system `{}`", spec.command.name(), cfg.system.name);
    let mut art = Artifacts::new(&spec.out);
    let success = match spec.command {
        Command::Simulate => simulate(cfg, &spec, &mut art)?,
        Command::Check => check(cfg, &spec, &mut art)?,
        Command::Bracket => bracket(cfg, &spec, &mut art)?,
        Command::Derive => derive(cfg, &spec, &mut art)?,
    };
    Ok(Outcome {
        files: art.commit()?,
        success,
    })
}

fn initial_point(cfg: &LoadedConfig, spec: &RunSpec) -> Result<PhasePoint> {
    let sys = &cfg.system.system;
    match &spec.initial_state {
        Some(s) => Ok(PhasePoint::from_coords(sys.m(), s)),
        None => Ok(sample_states(sys, spec.seed, 1)?.remove(0)),
    }
}

fn simulate(cfg: &LoadedConfig, spec: &RunSpec, art: &mut Artifacts) -> Result<bool> {
    let sys = &cfg.system.system;
    let m = sys.m();
    let mut p0 = initial_point(cfg, spec)?;
    if spec.project {
        p0 = project_to_constraint(sys, &p0)?;
    }
    if !sys.on_constraint(&p0)? {
        log::warn!("initial state violates the constraints by {:e}", sys.constraint_values(&p0)?.amax());
    }
    let opts = IntegratorOptions {
        step: spec.step,
        method: spec.method,
        ..IntegratorOptions::default()
    };
    let l = sys.lagrangian();
    let (mut traj, drift, names, energy) = if spec.hamiltonian {
        let hc = hamiltonian_constraints(sys, cfg.newton);
        let h = hamiltonian_from_lagrangian(sys.model(), l, cfg.newton);
        let (q0, _) = legendre_forward(l, &p0)?;
        let traj = integrate_with(
            |s: &[f64]| constrained_hamilton_field(&hc, &h, s),
            &q0.coords(),
            spec.t0,
            spec.t1,
            &opts,
            |s: &mut Vec<f64>| {
                if spec.project {
                    *s = project_momentum(&hc, &MomentumPoint::from_coords(m, s))?.coords();
                }
                Ok(())
            },
        )?;
        let drift = drift_report_momentum(&hc, &traj)?;
        let mut names = sys.model().base_names().to_vec();
        names.extend(momentum_names(sys.model()));
        let e0 = h.value(&MomentumPoint::from_coords(m, &traj.states[0]))?;
        let e1 = h.value(&MomentumPoint::from_coords(m, traj.last_state()))?;
        (traj, drift, names, (e0, e1))
    } else {
        let traj = integrate_with(
            |s: &[f64]| sys.constrained_field(s),
            &p0.coords(),
            spec.t0,
            spec.t1,
            &opts,
            |s: &mut Vec<f64>| {
                if spec.project {
                    *s = project_to_constraint(sys, &PhasePoint::from_coords(m, s))?.coords();
                }
                Ok(())
            },
        )?;
        let drift = drift_report(sys, &traj)?;
        let mut names = sys.model().base_names().to_vec();
        names.extend(sys.model().fiber_names().iter().cloned());
        let energy = |s: &[f64]| -> Result<f64> { Ok(-legendre_forward(l, &PhasePoint::from_coords(m, s))?.1) };
        let e = (energy(&traj.states[0])?, energy(traj.last_state())?);
        (traj, drift, names, e)
    };
    traj.drift = drift.per_step.clone();
    traj.metadata.system = cfg.system.name.clone();
    let mut csv = Vec::new();
    traj.write_csv(&mut csv, &names)?;
    art.add("trajectory.csv", csv);
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "simulate",
        "system": cfg.system.name,
        "side": if spec.hamiltonian { "hamiltonian" } else { "lagrangian" },
        "method": traj.metadata.method.to_string(),
        "step": spec.step,
        "t0": spec.t0,
        "t1": spec.t1,
        "seed": spec.seed,
        "projected": spec.project,
        "samples": traj.len(),
        "max_drift": drift.max_drift,
        "initial_state": traj.states[0],
        "final_state": traj.last_state(),
        "energy": { "initial": energy.0, "final": energy.1, "delta": energy.1 - energy.0 },
    });
    art.add_json("summary.json", &summary)?;
    Ok(true)
}

fn check(cfg: &LoadedConfig, spec: &RunSpec, art: &mut Artifacts) -> Result<bool> {
    let report = run_checks(&cfg.system, &cfg.newton, spec.seed, spec.samples, &cfg.check_tolerances)?;
    for c in &report.checks {
        log::info!("{} residual {:e} (tol {:e}): {}", c.name, c.residual, c.tol, if c.passed { "pass" } else { "FAIL" });
    }
    art.add_json("report.json", &report)?;
    Ok(report.passed)
}

fn extension(cfg: &LoadedConfig, h: &HamiltonianData, src: &str) -> Result<HamiltonianData> {
    let model = cfg.system.system.model();
    let params = &cfg.system.params;
    let parse = |s: &str| {
        HamiltonianData::parse(model, s, params).map_err(|e| Error::Config {
            field: "run.h1/h2".into(),
            message: e.to_string(),
        })
    };
    let t = src.trim();
    if t == "H" {
        return Ok(h.clone());
    }
    if let Some(rest) = t.strip_prefix("H +").or_else(|| t.strip_prefix("H+")) {
        return HamiltonianData::linear_combination(&[(1.0, h), (1.0, &parse(rest)?)]);
    }
    if let Some(rest) = t.strip_prefix("H -").or_else(|| t.strip_prefix("H-")) {
        return HamiltonianData::linear_combination(&[(1.0, h), (-1.0, &parse(rest)?)]);
    }
    parse(t)
}

fn bracket(cfg: &LoadedConfig, spec: &RunSpec, art: &mut Artifacts) -> Result<bool> {
    let sys = &cfg.system.system;
    let l = sys.lagrangian();
    let hc = hamiltonian_constraints(sys, cfg.newton);
    let h = hamiltonian_from_lagrangian(sys.model(), l, cfg.newton);
    let h1 = extension(cfg, &h, &spec.h1)?;
    let h2 = extension(cfg, &h, &spec.h2)?;
    let points: Vec<MomentumPoint> = match &spec.points {
        Some(ps) => ps.iter().map(|p| MomentumPoint::from_coords(sys.m(), p)).collect(),
        None => sample_states(sys, spec.seed, spec.samples)?
            .iter()
            .map(|p| legendre_forward(l, p).map(|(q, _)| q))
            .collect::<Result<_>>()?,
    };
    let mut names = vec!["index".to_string()];
    names.extend(sys.model().base_names().iter().cloned());
    names.extend(momentum_names(sys.model()));
    names.push("bracket".into());
    let mut text = names.join(",") + "\n";
    for (k, q) in points.iter().enumerate() {
        let v = nonholonomic_bracket(&hc, &h, q, &h1, &h2)?;
        writeln!(text, "{k},{}", csv_row(q.coords().into_iter().chain([v]))).expect("write to string");
    }
    art.add("bracket.csv", text.into_bytes());
    Ok(true)
}

fn derive(cfg: &LoadedConfig, spec: &RunSpec, art: &mut Artifacts) -> Result<bool> {
    let sys = &cfg.system.system;
    let (m, n, r) = (sys.m(), sys.n(), sys.r());
    let points = match &spec.points {
        Some(ps) => ps.iter().map(|p| PhasePoint::from_coords(m, p)).collect(),
        None => sample_states(sys, spec.seed, spec.samples)?,
    };
    let model = sys.model();
    let mut header = vec!["index".to_string()];
    header.extend(model.base_names().iter().cloned());
    header.extend(model.fiber_names().iter().cloned());
    header.extend((1..=r).map(|a| format!("lambda_{a}")));
    header.extend(model.fiber_names().iter().map(|f| format!("acc_{f}")));
    for a in 1..=r {
        header.extend((1..=r).map(|b| format!("C_{a}_{b}")));
    }
    header.extend(["cond_W", "cond_C", "cond_flat", "on_constraint"].map(String::from));
    let mut text = header.join(",") + "\n";
    let mut all_ok = true;
    for (k, p) in points.iter().enumerate() {
        let nf = sys.nh_frame(p)?;
        let d = sys.constrained_dynamics(p)?;
        all_ok &= d.on_constraint;
        let mut vals = p.coords();
        vals.extend(d.lambda.iter());
        vals.extend(d.field.rows(m, n).iter());
        vals.extend(nf.c.transpose().iter());
        vals.extend([nf.free.w_condition, nf.c_condition, nf.ops.flat_condition]);
        writeln!(text, "{k},{},{}", csv_row(vals), d.on_constraint).expect("write to string");
    }
    art.add("derive.csv", text.into_bytes());
    let meta: BTreeMap<&str, serde_json::Value> = BTreeMap::from([
        ("schema_version", json!(SCHEMA_VERSION)),
        ("command", json!("derive")),
        ("system", json!(cfg.system.name)),
        ("seed", json!(spec.seed)),
        ("points", json!(points.len())),
        ("all_on_constraint", json!(all_ok)),
    ]);
    art.add_json("derive.json", &meta)?;
    Ok(true)
}
