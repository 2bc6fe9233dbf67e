//! Built-in systems: the rolling ball on a rotating table, linear constraints on a Lie
//! algebroid, time-dependent systems on a jet bundle, and a few small companions.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::algebroid::AffgebroidModel;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::lagrangian::{Lagrangian, LagrangianSystem};
use crate::nonholonomic::{ConstrainedSystem, ConstraintSet};

/// Default table angular velocity of the ball demo.
pub const DEFAULT_OMEGA: &str = "1 + 0.5*sin(t)";

pub const BALL_BASE: [&str; 3] = ["t", "x", "y"];
pub const BALL_FIBRE: [&str; 5] = ["xd", "yd", "wx", "wy", "wz"];

type Reference = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A named catalog system with its parameters and, where known, closed-form fibre accelerations.
#[derive(Clone)]
pub struct SystemDescriptor {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub system: ConstrainedSystem,
    /// Index of the base coordinate playing the role of time, if any.
    pub time_index: Option<usize>,
    pub reference_accelerations: Option<Reference>,
}

impl fmt::Debug for SystemDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemDescriptor")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("time_index", &self.time_index)
            .field("has_reference", &self.reference_accelerations.is_some())
            .finish()
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config {
            field: name.into(),
            message: format!("must be positive, got {v}"),
        })
    }
}

fn ball_lagrangian(model: &AffgebroidModel, m: f64, k2: f64) -> Result<Lagrangian> {
    let params = BTreeMap::from([("m".to_string(), m), ("k2".to_string(), k2)]);
    Lagrangian::parse(model, "0.5*(m*(xd^2 + yd^2) + k2*(wx^2 + wy^2 + wz^2))", &params)
}

/// Adds the rotational brackets `[e_wy, e_wx] = e_wz`, `[e_wz, e_wy] = e_wx`, `[e_wx, e_wz] = e_wy`
/// with fibre indices offset so that `wx` sits at `w0`.
fn with_ball_brackets(b: crate::algebroid::ModelBuilder, m: usize, w0: usize) -> crate::algebroid::ModelBuilder {
    let one = || ScalarField::constant(m, 1.0);
    b.bracket(w0 + 2, w0 + 1, w0, one())
        .bracket(w0, w0 + 2, w0 + 1, one())
        .bracket(w0 + 1, w0, w0 + 2, one())
}

/// Sphere of mass `m`, radius `r` and inertia `k2` rolling without slipping on a table
/// rotating with angular velocity `omega(t)`.
pub fn rolling_ball(m: f64, r: f64, k2: f64, omega: ScalarField) -> Result<ConstrainedSystem> {
    positive("m", m)?;
    positive("r", r)?;
    positive("k2", k2)?;
    if omega.arity() != 1 {
        return Err(Error::Misuse(format!("Omega must be a function of t alone, got arity {}", omega.arity())));
    }
    let c = |v: f64| ScalarField::constant(3, v);
    let builder = AffgebroidModel::builder(&BALL_BASE, &BALL_FIBRE)
        .rho0(0, c(1.0))
        .rho(1, 0, c(1.0))
        .rho(2, 1, c(1.0));
    let model = with_ball_brackets(builder, 3, 2).build()?;
    let l = ball_lagrangian(&model, m, k2)?;
    let om = omega.pullback(vec![0], 3);
    let xf = ScalarField::parse_vars("x", &BALL_BASE)?;
    let yf = ScalarField::parse_vars("y", &BALL_BASE)?;
    let mu0 = vec![om.mul(&yf), om.mul(&xf).scale(-1.0)];
    let mu = vec![
        vec![c(1.0), c(0.0), c(0.0), c(-r), c(0.0)],
        vec![c(0.0), c(1.0), c(r), c(0.0), c(0.0)],
    ];
    let cs = ConstraintSet::new(3, 5, mu0, mu)?;
    ConstrainedSystem::from_parts(model, l, cs)
}

/// Closed-form accelerations `(xdd, ydd, wxd, wyd, wzd)` of the ball at a state `(t, x, y, xd, yd, w)`.
pub fn ball_accelerations(m: f64, r: f64, k2: f64, omega: &ScalarField, s: &[f64]) -> Vec<f64> {
    let (om, dom) = omega.value_grad(&s[..1]);
    let (x, y, xd, yd) = (s[1], s[2], s[3], s[4]);
    let d = k2 + m * r * r;
    let a = dom[0] * y + om * yd;
    let b = dom[0] * x + om * xd;
    vec![-k2 / d * a, k2 / d * b, m * r / d * b, m * r / d * a, 0.0]
}

/// Linear constraints on a model with inert affine part.
pub fn linear_on_algebroid(model: AffgebroidModel, l: Lagrangian, constraints: ConstraintSet) -> Result<ConstrainedSystem> {
    if !constraints.is_linear() {
        return Err(Error::Misuse("linear_on_algebroid requires mu0 = 0".into()));
    }
    if !model.has_inert_affine_part() {
        return Err(Error::Misuse("linear_on_algebroid requires rho0 = 0 and C0 = 0".into()));
    }
    ConstrainedSystem::new(LagrangianSystem::new(model, l)?, constraints)
}

/// The ball on a non-rotating table, built as a linear system over the base `(x, y)`.
pub fn linear_ball(m: f64, r: f64, k2: f64) -> Result<ConstrainedSystem> {
    positive("m", m)?;
    positive("r", r)?;
    positive("k2", k2)?;
    let c = |v: f64| ScalarField::constant(2, v);
    let builder = AffgebroidModel::builder(&["x", "y"], &BALL_FIBRE).rho(0, 0, c(1.0)).rho(1, 1, c(1.0));
    let model = with_ball_brackets(builder, 2, 2).build()?;
    let l = ball_lagrangian(&model, m, k2)?;
    let cs = ConstraintSet::new(
        2,
        5,
        vec![c(0.0), c(0.0)],
        vec![
            vec![c(1.0), c(0.0), c(0.0), c(-r), c(0.0)],
            vec![c(0.0), c(1.0), c(r), c(0.0), c(0.0)],
        ],
    )?;
    linear_on_algebroid(model, l, cs)
}

/// First-jet model of `R x Q -> R`: base `(t, q..)`, fibre `(<q>_dot..)`, zero brackets.
pub fn jet_bundle_model(q_names: &[&str]) -> Result<AffgebroidModel> {
    let k = q_names.len();
    let mut base = vec!["t".to_string()];
    base.extend(q_names.iter().map(|s| s.to_string()));
    let fibre: Vec<String> = q_names.iter().map(|s| format!("{s}_dot")).collect();
    let mut b = AffgebroidModel::builder(&base, &fibre).rho0(0, ScalarField::constant(k + 1, 1.0));
    for a in 0..k {
        b = b.rho(1 + a, a, ScalarField::constant(k + 1, 1.0));
    }
    b.build()
}

/// Constraint coefficients given as expressions over the base names of `model`.
pub fn parse_constraints(
    model: &AffgebroidModel,
    rows: &[(String, Vec<String>)],
    params: &BTreeMap<String, f64>,
) -> Result<ConstraintSet> {
    let vars = model.base_names();
    let mut mu0 = Vec::with_capacity(rows.len());
    let mut mu = Vec::with_capacity(rows.len());
    for (c0, row) in rows {
        mu0.push(ScalarField::parse(c0, vars, params)?);
        mu.push(row.iter().map(|s| ScalarField::parse(s, vars, params)).collect::<Result<Vec<_>>>()?);
    }
    ConstraintSet::new(model.m(), model.n(), mu0, mu)
}

/// Time-dependent system on the jet bundle with Lagrangian and constraints given as expressions.
pub fn jet_bundle_system(
    q_names: &[&str],
    lagrangian: &str,
    constraints: &[(String, Vec<String>)],
    params: &BTreeMap<String, f64>,
) -> Result<ConstrainedSystem> {
    let model = jet_bundle_model(q_names)?;
    let l = Lagrangian::parse(&model, lagrangian, params)?;
    let cs = parse_constraints(&model, constraints, params)?;
    ConstrainedSystem::from_parts(model, l, cs)
}

/// Rigid body with principal inertias `i` and the constraint `wz = 0`. The base is a single
/// inert coordinate `s` because a model needs at least one base coordinate.
pub fn euler_top(i: [f64; 3]) -> Result<ConstrainedSystem> {
    for (k, v) in i.iter().enumerate() {
        positive(&format!("I{}", k + 1), *v)?;
    }
    let one = || ScalarField::constant(1, 1.0);
    let model = AffgebroidModel::builder(&["s"], &["wx", "wy", "wz"])
        .bracket(2, 0, 1, one())
        .bracket(0, 1, 2, one())
        .bracket(1, 2, 0, one())
        .build()?;
    let params = BTreeMap::from([("I1".to_string(), i[0]), ("I2".to_string(), i[1]), ("I3".to_string(), i[2])]);
    let l = Lagrangian::parse(&model, "0.5*(I1*wx^2 + I2*wy^2 + I3*wz^2)", &params)?;
    let z = || ScalarField::zero(1);
    let cs = ConstraintSet::new(1, 3, vec![z()], vec![vec![z(), z(), one()]])?;
    linear_on_algebroid(model, l, cs)
}

/// Free particle on the plane with the linear constraint `v1 = 0`.
pub fn free_particle() -> Result<ConstrainedSystem> {
    let c = |v: f64| ScalarField::constant(2, v);
    let model = AffgebroidModel::builder(&["q1", "q2"], &["v1", "v2"])
        .rho(0, 0, c(1.0))
        .rho(1, 1, c(1.0))
        .build()?;
    let l = Lagrangian::parse(&model, "0.5*(v1^2 + v2^2)", &BTreeMap::new())?;
    let cs = ConstraintSet::new(2, 2, vec![c(0.0)], vec![vec![c(1.0), c(0.0)]])?;
    linear_on_algebroid(model, l, cs)
}

/// Names accepted by [`descriptor`].
pub const CATALOG_NAMES: [&str; 5] = ["ball", "linear", "jet", "euler_top", "free_particle"];

fn param(params: &BTreeMap<String, f64>, key: &str, default: f64) -> f64 {
    params.get(key).copied().unwrap_or(default)
}

fn check_keys(params: &BTreeMap<String, f64>, allowed: &[&str]) -> Result<()> {
    match params.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(Error::Config {
            field: format!("params.{k}"),
            message: format!("unknown parameter (allowed: {})", allowed.join(", ")),
        }),
        None => Ok(()),
    }
}

/// Builds a catalog system by name. `expr` is an expression in `t` overriding the table angular
/// velocity of the ball or the prescribed velocity `q1_dot = f(t)` of the jet example.
pub fn descriptor(name: &str, params: &BTreeMap<String, f64>, expr: Option<&str>) -> Result<SystemDescriptor> {
    let (system, time_index, reference): (ConstrainedSystem, Option<usize>, Option<Reference>) = match name {
        "ball" => {
            check_keys(params, &["m", "r", "k2"])?;
            let (m, r, k2) = (param(params, "m", 1.0), param(params, "r", 1.0), param(params, "k2", 0.4));
            let omega = ScalarField::parse_vars(expr.unwrap_or(DEFAULT_OMEGA), &["t"])?;
            let sys = rolling_ball(m, r, k2, omega.clone())?;
            let reference: Reference = Arc::new(move |s: &[f64]| ball_accelerations(m, r, k2, &omega, s));
            (sys, Some(0), Some(reference))
        }
        "linear" => {
            check_keys(params, &["m", "r", "k2"])?;
            let sys = linear_ball(param(params, "m", 1.0), param(params, "r", 1.0), param(params, "k2", 0.4))?;
            (sys, None, Some(Arc::new(|_: &[f64]| vec![0.0; 5]) as Reference))
        }
        "jet" => {
            check_keys(params, &["k"])?;
            let k = param(params, "k", 1.0);
            let f = expr.unwrap_or("sin(t)");
            let p = BTreeMap::from([("k".to_string(), k)]);
            let rows = vec![(format!("-({f})"), vec!["1".to_string(), "0".to_string()])];
            let sys = jet_bundle_system(&["q1", "q2"], "0.5*(q1_dot^2 + q2_dot^2) - 0.5*k*q2^2", &rows, &p)?;
            let fdot = ScalarField::parse_vars(f, &["t"])?;
            let reference: Reference = Arc::new(move |s: &[f64]| vec![fdot.value_grad(&s[..1]).1[0], -k * s[2]]);
            (sys, Some(0), Some(reference))
        }
        "euler_top" => {
            check_keys(params, &["I1", "I2", "I3"])?;
            let i = [param(params, "I1", 1.0), param(params, "I2", 2.0), param(params, "I3", 3.0)];
            (euler_top(i)?, None, None)
        }
        "free_particle" => {
            check_keys(params, &[])?;
            (free_particle()?, None, Some(Arc::new(|_: &[f64]| vec![0.0; 2]) as Reference))
        }
        other => {
            return Err(Error::Config {
                field: "system.catalog".into(),
                message: format!("unknown catalog system `{other}` (known: {})", CATALOG_NAMES.join(", ")),
            })
        }
    };
    Ok(SystemDescriptor {
        name: name.to_string(),
        params: params.clone(),
        system,
        time_index,
        reference_accelerations: reference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebroid::PhasePoint;

    #[test]
    fn ball_rejects_nonpositive_parameters() {
        let om = ScalarField::constant(1, 1.0);
        assert!(rolling_ball(0.0, 1.0, 0.4, om.clone()).is_err());
        assert!(rolling_ball(1.0, -1.0, 0.4, om.clone()).is_err());
        assert!(rolling_ball(1.0, 1.0, 0.0, om).is_err());
    }

    #[test]
    fn ball_constraint_values() {
        let sys = rolling_ball(1.0, 1.0, 0.4, ScalarField::constant(1, 1.0)).unwrap();
        let p = PhasePoint::new(vec![0.0, 0.0, 1.0], vec![0.0; 5]);
        assert_eq!(sys.constraint_values(&p).unwrap().as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn ball_compatibility_is_diagonal() {
        let sys = rolling_ball(1.0, 1.0, 0.4, ScalarField::constant(1, 1.0)).unwrap();
        let p = PhasePoint::new(vec![0.0, 0.3, -0.2], vec![0.1; 5]);
        let c = sys.compatibility_matrix(&p).unwrap().c;
        assert!((c[(0, 0)] + 3.5).abs() < 1e-12 && (c[(1, 1)] + 3.5).abs() < 1e-12);
        assert!(c[(0, 1)].abs() < 1e-15 && c[(1, 0)].abs() < 1e-15);
    }

    #[test]
    fn ball_unit_acceleration_example() {
        let sys = rolling_ball(1.0, 1.0, 0.4, ScalarField::constant(1, 1.0)).unwrap();
        // on the constraint set with (xd, yd) = (0, 1) at the origin: wy = 0, wx = -1
        let p = PhasePoint::new(vec![0.0, 0.0, 0.0], vec![0.0, 1.0, -1.0, 0.0, 0.0]);
        assert!(sys.on_constraint(&p).unwrap());
        let d = sys.constrained_dynamics(&p).unwrap();
        let v = d.r_nh.v;
        assert!((v[0] + 2.0 / 7.0).abs() < 1e-12);
        assert!((v[3] - 5.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn descriptor_names() {
        for name in CATALOG_NAMES {
            let d = descriptor(name, &BTreeMap::new(), None).unwrap();
            assert_eq!(d.name, name);
        }
        assert!(descriptor("pendulum", &BTreeMap::new(), None).is_err());
        let bad = BTreeMap::from([("mass".to_string(), 1.0)]);
        assert!(descriptor("ball", &bad, None).is_err());
    }

    #[test]
    fn linear_constructor_rejects_affine_input() {
        let sys = rolling_ball(1.0, 1.0, 0.4, ScalarField::constant(1, 1.0)).unwrap();
        let err = linear_on_algebroid(sys.free.model.clone(), sys.free.lagrangian.clone(), sys.constraints.clone());
        assert!(matches!(err, Err(Error::Misuse(_))));
    }
}
