//! Invariant suite evaluated at seeded random points of the constraint set.

use std::collections::BTreeMap;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algebroid::PhasePoint;
use crate::catalog::SystemDescriptor;
use crate::error::Result;
use crate::hamiltonian::{
    constrained_hamilton_dynamics, hamiltonian_compatibility, hamiltonian_constraints, hamiltonian_from_lagrangian,
    legendre_forward, legendre_inverse, nonholonomic_bracket, HamiltonianData, NewtonOptions,
};
use crate::linalg::{span_residual, Mat, Vector};
use crate::nonholonomic::ConstrainedSystem;
use crate::prolong::theta;

/// Default tolerance of every invariant reported by [`run_checks`].
pub fn default_tolerances() -> BTreeMap<String, f64> {
    [
        ("structure_identities", 1e-12),
        ("euler_lagrange_section", 1e-10),
        ("reaction_sections", 1e-10),
        ("compatibility_cross_check", 1e-12),
        ("route_equivalence", 1e-9),
        ("projector_algebra", 1e-10),
        ("reaction_span", 1e-10),
        ("reaction_consistency", 1e-9),
        ("tangency", 1e-10),
        ("constrained_two_section", 1e-10),
        ("legendre_round_trip", 1e-10),
        ("hamiltonian_compatibility", 1e-8),
        ("hamiltonian_equivalence", 1e-8),
        ("bracket_skew_symmetry", 1e-12),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub residual: f64,
    pub tol: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CheckReport {
    pub schema_version: u32,
    pub system: String,
    pub seed: u64,
    pub samples: usize,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

/// Max over samples of each named residual; an evaluation error fails that invariant.
struct Accumulator {
    residuals: BTreeMap<&'static str, f64>,
    errors: BTreeMap<&'static str, String>,
}

impl Accumulator {
    fn record(&mut self, name: &'static str, value: Result<f64>) {
        match value {
            Ok(v) => {
                let e = self.residuals.entry(name).or_insert(0.0);
                // NaN must not be swallowed by max
                *e = if v.is_nan() || e.is_nan() { f64::NAN } else { e.max(v) };
            }
            Err(err) => {
                self.errors.entry(name).or_insert_with(|| err.to_string());
            }
        }
    }
}

fn max_abs(m: &Mat) -> f64 {
    m.amax()
}

/// Random points of the constraint set with base and free fibre coordinates in `[-1, 1]`.
pub fn sample_states(sys: &ConstrainedSystem, seed: u64, count: usize) -> Result<Vec<PhasePoint>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| sys.sample_on_constraint(&mut rng, 1.0, 1.0)).collect()
}

fn lagrangian_checks(sys: &ConstrainedSystem, p: &PhasePoint, acc: &mut Accumulator) -> Result<()> {
    let nf = sys.nh_frame(p)?;
    let ops = &nf.ops;
    let r_l = &ops.r_l;
    let n = sys.n();
    let dim = 2 * n + 1;

    acc.record("euler_lagrange_section", Ok(ops.contract(r_l).amax().max((r_l[0] - 1.0).abs())));

    let mut reaction = 0.0f64;
    for a in 0..nf.r() {
        let mut target = Vector::zeros(dim);
        for al in 0..n {
            target += theta(&p.y, al) * nf.mu[(a, al)];
        }
        reaction = reaction.max((ops.contract(&nf.z[a]) - target).amax()).max(nf.z[a][0].abs());
    }
    acc.record("reaction_sections", Ok(reaction));

    let cross = Mat::from_fn(nf.r(), nf.r(), |a, b| nf.dpsi[a].dot(&nf.z[b]));
    acc.record("compatibility_cross_check", Ok(max_abs(&(cross - &nf.c))));

    let dynamics = sys.constrained_dynamics(p)?;
    let r_nh = dynamics.r_nh.to_vector();
    let (pa, qa) = nf.projector_affine();
    let pc = nf.projector_cosymplectic();
    let pp = nf.projector_poisson();
    let routes = [&pa * r_l, &pc * r_l, &pp * r_l];
    acc.record("route_equivalence", Ok(routes.iter().map(|v| (v - &r_nh).amax()).fold(0.0, f64::max)));

    let id = Mat::identity(dim, dim);
    let algebra = [
        max_abs(&(&pa * &pa - &pa)),
        max_abs(&(&qa * &qa - &qa)),
        max_abs(&(&pa + &qa - &id)),
        max_abs(&(&pc * &pc - &pc)),
        max_abs(&(&pp * &pp - &pp)),
    ];
    acc.record("projector_algebra", Ok(algebra.into_iter().fold(0.0, f64::max)));

    let zs = Mat::from_columns(&nf.z);
    acc.record("reaction_span", Ok(span_residual(&zs, &(&qa * r_l))));

    let forms: Vec<Vector> = (0..nf.r())
        .map(|a| (0..n).fold(Vector::zeros(dim), |s, al| s + theta(&p.y, al) * nf.mu[(a, al)]))
        .collect();
    acc.record("reaction_consistency", Ok(span_residual(&Mat::from_columns(&forms), &ops.contract(&r_nh))));

    acc.record("tangency", Ok(nf.dpsi.iter().map(|d| d.dot(&r_nh).abs()).fold(0.0, f64::max)));

    let omega = nf.constrained_two_section();
    let two = crate::prolong::contract(&omega, &r_nh)
        .amax()
        .max(max_abs(&(&omega + omega.transpose())))
        .max((r_nh[0] - 1.0).abs());
    acc.record("constrained_two_section", Ok(two));
    Ok(())
}

fn hamiltonian_checks(sys: &ConstrainedSystem, newton: &NewtonOptions, p: &PhasePoint, acc: &mut Accumulator) -> Result<()> {
    let l = sys.lagrangian();
    let (q, _) = legendre_forward(l, p)?;
    let back = legendre_inverse(l, &q, newton)?;
    let round = back.y.iter().zip(&p.y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    acc.record("legendre_round_trip", Ok(round));

    let hc = hamiltonian_constraints(sys, *newton);
    let h = hamiltonian_from_lagrangian(sys.model(), l, *newton);
    let hcomp = hamiltonian_compatibility(&hc, &h, &q)?;
    let c = sys.compatibility_matrix(p)?.c;
    acc.record("hamiltonian_compatibility", Ok(max_abs(&(hcomp.cbar - c))));

    let frame = sys.free.frame(p)?;
    let v = sys.constrained_dynamics(p)?.r_nh.v;
    let pdot = frame.jet.mixed.transpose() * &frame.velocity + &frame.jet.w * Vector::from_vec(v);
    let pushed = crate::lagrangian::stack(&frame.velocity, &pdot);
    let field = constrained_hamilton_dynamics(&hc, &h, &q)?.field;
    acc.record("hamiltonian_equivalence", Ok((field - pushed).amax()));

    let names = crate::hamiltonian::momentum_names(sys.model());
    let base = sys.model().base_names();
    let quad = |k: usize| -> String {
        let mut terms = Vec::new();
        for (i, pn) in names.iter().enumerate() {
            let c = 0.3 + 0.1 * ((i + k) % 3) as f64;
            terms.push(format!("{c}*{pn}^2"));
            terms.push(format!("{}*{}*{pn}", 0.2 * (k as f64 + 1.0), base[(i + k) % base.len()]));
        }
        terms.join(" + ")
    };
    let h1 = HamiltonianData::parse(sys.model(), &quad(0), &BTreeMap::new())?;
    let h2 = HamiltonianData::parse(sys.model(), &quad(1), &BTreeMap::new())?;
    let a = nonholonomic_bracket(&hc, &h, &q, &h1, &h2)?;
    let b = nonholonomic_bracket(&hc, &h, &q, &h2, &h1)?;
    acc.record("bracket_skew_symmetry", Ok((a + b).abs()));
    Ok(())
}

/// Evaluates every invariant at `samples` seeded points; `overrides` replaces default tolerances.
pub fn run_checks(
    desc: &SystemDescriptor,
    newton: &NewtonOptions,
    seed: u64,
    samples: usize,
    overrides: &BTreeMap<String, f64>,
) -> Result<CheckReport> {
    let sys = &desc.system;
    let mut tols = default_tolerances();
    for (k, v) in overrides {
        if !tols.contains_key(k) {
            return Err(crate::error::Error::Config {
                field: format!("tolerances.checks.{k}"),
                message: "unknown invariant".into(),
            });
        }
        tols.insert(k.clone(), *v);
    }
    let states = sample_states(sys, seed, samples)?;
    let mut acc = Accumulator {
        residuals: BTreeMap::new(),
        errors: BTreeMap::new(),
    };
    let bases: Vec<Vec<f64>> = states.iter().map(|p| p.x.clone()).collect();
    let identities = sys.model().check_structure_identities(&bases, tols["structure_identities"]);
    acc.record("structure_identities", identities.map(|r| r.max_residual()));
    for p in &states {
        if let Err(e) = lagrangian_checks(sys, p, &mut acc) {
            acc.errors.entry("euler_lagrange_section").or_insert_with(|| e.to_string());
        }
        if let Err(e) = hamiltonian_checks(sys, newton, p, &mut acc) {
            acc.errors.entry("legendre_round_trip").or_insert_with(|| e.to_string());
        }
    }
    let checks: Vec<CheckResult> = tols
        .iter()
        .map(|(name, &tol)| {
            let error = acc.errors.get(name.as_str()).cloned();
            let residual = acc.residuals.get(name.as_str()).copied().unwrap_or(f64::NAN);
            CheckResult {
                name: name.clone(),
                passed: error.is_none() && residual <= tol,
                residual,
                tol,
                error,
            }
        })
        .collect();
    Ok(CheckReport {
        schema_version: crate::config::SCHEMA_VERSION,
        system: desc.name.clone(),
        seed,
        samples,
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}
