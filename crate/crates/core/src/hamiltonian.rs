//! Hamiltonian side: Legendre correspondence, Hamilton equations on the dual bundle,
//! the linear Poisson bracket, constrained Hamilton equations and the nonholonomic bracket.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::algebroid::{AffgebroidModel, PhasePoint, StructureAt};
use crate::error::{check_len, Error, Result};
use crate::expr::Expr;
use crate::field::ScalarField;
use crate::lagrangian::{stack, Lagrangian};
use crate::linalg::{inverse_with_condition, regular_inverse, solve, Mat, Vector, COND_TOL};
use crate::nonholonomic::ConstrainedSystem;

/// A point `(x^i, p_alpha)` of the dual bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumPoint {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
}

impl MomentumPoint {
    pub fn new(x: Vec<f64>, p: Vec<f64>) -> Self {
        Self { x, p }
    }

    /// `[x, p]` concatenated.
    pub fn coords(&self) -> Vec<f64> {
        let mut v = self.x.clone();
        v.extend_from_slice(&self.p);
        v
    }

    pub fn from_coords(m: usize, v: &[f64]) -> Self {
        Self::new(v[..m].to_vec(), v[m..].to_vec())
    }
}

/// Newton parameters for the inverse Legendre map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Stop when `max |dL/dy - p| <= tol * max(1, max |p|)`.
    pub tol: f64,
    pub max_iter: usize,
    pub cond_tol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            cond_tol: COND_TOL,
        }
    }
}

/// `leg_L(x, y) = (x, dL/dy)` together with the extended coordinate `L - y dL/dy`.
pub fn legendre_forward(l: &Lagrangian, p: &PhasePoint) -> Result<(MomentumPoint, f64)> {
    let jet = l.jet(p)?;
    let ext0 = jet.value - jet.dy.iter().zip(&p.y).map(|(a, b)| a * b).sum::<f64>();
    Ok((MomentumPoint::new(p.x.clone(), jet.dy.iter().cloned().collect()), ext0))
}

/// Solves `dL/dy(x, y) = p` by Newton's method from `y = 0`.
pub fn legendre_inverse(l: &Lagrangian, q: &MomentumPoint, opts: &NewtonOptions) -> Result<PhasePoint> {
    let n = q.p.len();
    let target = Vector::from_column_slice(&q.p);
    let scale = target.amax().max(1.0);
    let mut y = Vector::zeros(n);
    let mut residual = f64::INFINITY;
    for it in 0..=opts.max_iter {
        let point = PhasePoint::new(q.x.clone(), y.iter().cloned().collect());
        let jet = l.jet(&point).map_err(|_| Error::Hyperregularity {
            iterations: it,
            residual,
        })?;
        let f = &jet.dy - &target;
        residual = f.amax();
        if residual <= opts.tol * scale {
            return Ok(point);
        }
        if it == opts.max_iter {
            break;
        }
        let step = solve(&jet.w, &f, opts.cond_tol, "fibre Hessian W")?;
        y -= step;
        if y.iter().any(|v| !v.is_finite()) {
            break;
        }
    }
    Err(Error::Hyperregularity {
        iterations: opts.max_iter,
        residual,
    })
}

/// Value and first derivatives of a Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct HamGrad {
    pub value: f64,
    pub dx: Vector,
    pub dp: Vector,
}

trait HamEval: Send + Sync {
    fn gradient(&self, x: &[f64], p: &[f64]) -> Result<HamGrad>;
    /// Momentum Hessian `d2H/dp dp`.
    fn hessian(&self, x: &[f64], p: &[f64]) -> Result<Mat>;
    fn describe(&self) -> String;
}

struct LegendreH {
    l: Lagrangian,
    opts: NewtonOptions,
}

impl HamEval for LegendreH {
    fn gradient(&self, x: &[f64], p: &[f64]) -> Result<HamGrad> {
        let q = MomentumPoint::new(x.to_vec(), p.to_vec());
        let pt = legendre_inverse(&self.l, &q, &self.opts)?;
        let jet = self.l.jet(&pt)?;
        let y = Vector::from_column_slice(&pt.y);
        Ok(HamGrad {
            value: Vector::from_column_slice(p).dot(&y) - jet.value,
            dx: -jet.dx,
            dp: y,
        })
    }

    fn hessian(&self, x: &[f64], p: &[f64]) -> Result<Mat> {
        let q = MomentumPoint::new(x.to_vec(), p.to_vec());
        let pt = legendre_inverse(&self.l, &q, &self.opts)?;
        let jet = self.l.jet(&pt)?;
        Ok(regular_inverse(&jet.w, self.opts.cond_tol, "fibre Hessian W")?.0)
    }

    fn describe(&self) -> String {
        "Legendre transform of a Lagrangian".into()
    }
}

/// A function of `(x, p)` carried by the Lagrangian machinery, which already
/// provides the gradient and the fibre Hessian.
struct DirectH {
    f: Lagrangian,
    label: String,
}

impl HamEval for DirectH {
    fn gradient(&self, x: &[f64], p: &[f64]) -> Result<HamGrad> {
        let jet = self.f.jet(&PhasePoint::new(x.to_vec(), p.to_vec()))?;
        Ok(HamGrad {
            value: jet.value,
            dx: jet.dx,
            dp: jet.dy,
        })
    }

    fn hessian(&self, x: &[f64], p: &[f64]) -> Result<Mat> {
        Ok(self.f.jet(&PhasePoint::new(x.to_vec(), p.to_vec()))?.w)
    }

    fn describe(&self) -> String {
        self.label.clone()
    }
}

struct CombinationH {
    terms: Vec<(f64, HamiltonianData)>,
}

impl HamEval for CombinationH {
    fn gradient(&self, x: &[f64], p: &[f64]) -> Result<HamGrad> {
        let mut out = HamGrad {
            value: 0.0,
            dx: Vector::zeros(x.len()),
            dp: Vector::zeros(p.len()),
        };
        for (c, h) in &self.terms {
            let g = h.inner.gradient(x, p)?;
            out.value += c * g.value;
            out.dx += g.dx * *c;
            out.dp += g.dp * *c;
        }
        Ok(out)
    }

    fn hessian(&self, x: &[f64], p: &[f64]) -> Result<Mat> {
        let mut out = Mat::zeros(p.len(), p.len());
        for (c, h) in &self.terms {
            out += h.inner.hessian(x, p)? * *c;
        }
        Ok(out)
    }

    fn describe(&self) -> String {
        let parts: Vec<String> = self.terms.iter().map(|(c, h)| format!("{c}*({})", h.inner.describe())).collect();
        parts.join(" + ")
    }
}

struct ConstraintH {
    hc: HamiltonianConstraints,
    a: usize,
}

impl HamEval for ConstraintH {
    fn gradient(&self, x: &[f64], p: &[f64]) -> Result<HamGrad> {
        let j = self.hc.jet(&MomentumPoint::new(x.to_vec(), p.to_vec()))?;
        Ok(HamGrad {
            value: j.psi[self.a],
            dx: j.psi_x.row(self.a).transpose(),
            dp: j.psi_p.row(self.a).transpose(),
        })
    }

    fn hessian(&self, x: &[f64], p: &[f64]) -> Result<Mat> {
        let n = p.len();
        let mut h = Mat::zeros(n, n);
        let mut q = p.to_vec();
        for b in 0..n {
            let step = 1e-5 * p[b].abs().max(1.0);
            q[b] = p[b] + step;
            let up = self.gradient(x, &q)?.dp;
            q[b] = p[b] - step;
            let down = self.gradient(x, &q)?.dp;
            q[b] = p[b];
            h.set_column(b, &((up - down) / (2.0 * step)));
        }
        Ok((&h + h.transpose()) * 0.5)
    }

    fn describe(&self) -> String {
        format!("constraint psi^{}", self.a + 1)
    }
}

/// Where a Hamiltonian came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Legendre,
    Supplied,
    Constraint,
    Combination,
}

/// A Hamiltonian-type function on the dual bundle with gradient and momentum Hessian.
#[derive(Clone)]
pub struct HamiltonianData {
    inner: Arc<dyn HamEval>,
    m: usize,
    n: usize,
    pub provenance: Provenance,
}

impl fmt::Debug for HamiltonianData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hamiltonian({:?}: {})", self.provenance, self.inner.describe())
    }
}

/// Momentum variable names `p_<fibre>` used by parsed Hamiltonians.
pub fn momentum_names(model: &AffgebroidModel) -> Vec<String> {
    model.fiber_names().iter().map(|s| format!("p_{s}")).collect()
}

impl HamiltonianData {
    pub fn from_lagrangian(l: &Lagrangian, m: usize, n: usize, opts: NewtonOptions) -> Self {
        Self {
            inner: Arc::new(LegendreH { l: l.clone(), opts }),
            m,
            n,
            provenance: Provenance::Legendre,
        }
    }

    /// Parses `src` over the base names followed by `p_<fibre>` for each fibre name.
    pub fn parse(model: &AffgebroidModel, src: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let mut vars = model.base_names().to_vec();
        vars.extend(momentum_names(model));
        let e = Expr::parse(src, &vars, params)?;
        Ok(Self::from_expr(e, model.m(), model.n()))
    }

    pub fn from_expr(e: Expr, m: usize, n: usize) -> Self {
        let label = e.source().to_string();
        Self {
            inner: Arc::new(DirectH {
                f: Lagrangian::from_expr(e, m, n),
                label,
            }),
            m,
            n,
            provenance: Provenance::Supplied,
        }
    }

    /// A callback `H(x, p)` differentiated by finite differences.
    pub fn from_fn(m: usize, n: usize, f: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            inner: Arc::new(DirectH {
                f: Lagrangian::from_fn(m, n, f),
                label: "<callback>".into(),
            }),
            m,
            n,
            provenance: Provenance::Supplied,
        }
    }

    /// The constraint function `psi^a` as a Hamiltonian-type function.
    pub fn constraint(hc: &HamiltonianConstraints, a: usize) -> Result<Self> {
        if a >= hc.r() {
            return Err(Error::Misuse(format!("constraint index {a} out of range")));
        }
        Ok(Self {
            inner: Arc::new(ConstraintH { hc: hc.clone(), a }),
            m: hc.sys.m(),
            n: hc.sys.n(),
            provenance: Provenance::Constraint,
        })
    }

    /// `sum_k c_k H_k`.
    pub fn linear_combination(terms: &[(f64, &HamiltonianData)]) -> Result<Self> {
        let first = terms.first().ok_or_else(|| Error::Misuse("empty linear combination".into()))?.1;
        for (_, h) in terms {
            check_len("Hamiltonian base dimension", first.m, h.m)?;
            check_len("Hamiltonian fibre dimension", first.n, h.n)?;
        }
        Ok(Self {
            inner: Arc::new(CombinationH {
                terms: terms.iter().map(|(c, h)| (*c, (*h).clone())).collect(),
            }),
            m: first.m,
            n: first.n,
            provenance: Provenance::Combination,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn check(&self, q: &MomentumPoint) -> Result<()> {
        check_len("momentum base point", self.m, q.x.len())?;
        check_len("momentum fibre point", self.n, q.p.len())
    }

    pub fn gradient(&self, q: &MomentumPoint) -> Result<HamGrad> {
        self.check(q)?;
        let g = self.inner.gradient(&q.x, &q.p)?;
        if !g.value.is_finite() || g.dx.iter().chain(g.dp.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Evaluation("non-finite Hamiltonian derivative".into()));
        }
        Ok(g)
    }

    pub fn value(&self, q: &MomentumPoint) -> Result<f64> {
        Ok(self.gradient(q)?.value)
    }

    pub fn hessian(&self, q: &MomentumPoint) -> Result<Mat> {
        self.check(q)?;
        self.inner.hessian(&q.x, &q.p)
    }
}

/// `H = p y - L` composed with the inverse Legendre map.
pub fn hamiltonian_from_lagrangian(model: &AffgebroidModel, l: &Lagrangian, opts: NewtonOptions) -> HamiltonianData {
    HamiltonianData::from_lagrangian(l, model.m(), model.n(), opts)
}

/// Free Hamilton equations: `xdot = rho0 + rho dH/dp`,
/// `pdot_alpha = -rho^i_alpha dH/dx^i + p_gamma (C^gamma_{0 alpha} + C^gamma_{beta alpha} dH/dp_beta)`.
pub fn hamilton_field(model: &AffgebroidModel, h: &HamiltonianData, q: &MomentumPoint) -> Result<Vector> {
    let s = model.structure_at(&q.x)?;
    let g = h.gradient(q)?;
    Ok(hamilton_field_from(&s, &q.p, &g))
}

fn hamilton_field_from(s: &StructureAt, p: &[f64], g: &HamGrad) -> Vector {
    let hp: Vec<f64> = g.dp.iter().cloned().collect();
    let xdot = s.base_velocity(&hp);
    let pdot = -(s.rho.transpose() * &g.dx) + s.twisted(&hp).transpose() * Vector::from_column_slice(p);
    stack(&xdot, &pdot)
}

/// Linear Poisson bracket on the dual bundle from coordinate gradients:
/// `rho^i_alpha (f_i g^alpha - f^alpha g_i) - C^gamma_{alpha beta} p_gamma f^alpha g^beta`.
pub fn poisson_bracket_from_gradients(
    s: &StructureAt,
    p: &[f64],
    fx: &Vector,
    fp: &Vector,
    gx: &Vector,
    gp: &Vector,
) -> f64 {
    let n = p.len();
    let mut out = fx.dot(&(&s.rho * gp)) - gx.dot(&(&s.rho * fp));
    for g in 0..n {
        if p[g] == 0.0 {
            continue;
        }
        for a in 0..n {
            for b in 0..n {
                let c = s.c.get(g, a, b);
                if c != 0.0 {
                    out -= c * p[g] * fp[a] * gp[b];
                }
            }
        }
    }
    out
}

/// `{f, g}` for fields over `(x, p)`.
pub fn poisson_bracket_h(model: &AffgebroidModel, q: &MomentumPoint, f: &ScalarField, g: &ScalarField) -> Result<f64> {
    let m = model.m();
    check_len("momentum point", m + model.n(), q.x.len() + q.p.len())?;
    let s = model.structure_at(&q.x)?;
    let coords = q.coords();
    let (_, df) = f.try_value_grad(&coords)?;
    let (_, dg) = g.try_value_grad(&coords)?;
    let split = |d: &[f64]| (Vector::from_column_slice(&d[..m]), Vector::from_column_slice(&d[m..]));
    let (fx, fp) = split(&df);
    let (gx, gp) = split(&dg);
    Ok(poisson_bracket_from_gradients(&s, &q.p, &fx, &fp, &gx, &gp))
}

/// Constraint functions `psi^a = Psi^a o leg_L^{-1}` on the dual bundle.
#[derive(Debug, Clone)]
pub struct HamiltonianConstraints {
    pub sys: ConstrainedSystem,
    pub opts: NewtonOptions,
}

/// Values and gradients of the `psi^a` at one momentum point.
#[derive(Debug, Clone)]
pub struct ConstraintJet {
    /// `leg_L^{-1}(q)`.
    pub point: PhasePoint,
    pub psi: Vector,
    /// r x m.
    pub psi_x: Mat,
    /// r x n.
    pub psi_p: Mat,
    /// `mu^a_alpha` at the base point, r x n.
    pub mu: Mat,
}

pub fn hamiltonian_constraints(sys: &ConstrainedSystem, opts: NewtonOptions) -> HamiltonianConstraints {
    HamiltonianConstraints {
        sys: sys.clone(),
        opts,
    }
}

impl HamiltonianConstraints {
    pub fn r(&self) -> usize {
        self.sys.r()
    }

    /// `psi_p = mu W^{-1}`, `psi_x = dPsi/dx - mu W^{-1} d2L/dy dx`, both at `leg_L^{-1}(q)`.
    pub fn jet(&self, q: &MomentumPoint) -> Result<ConstraintJet> {
        let point = legendre_inverse(self.sys.lagrangian(), q, &self.opts)?;
        let jet = self.sys.lagrangian().jet(&point)?;
        let (w_inv, _) = regular_inverse(&jet.w, self.opts.cond_tol, "fibre Hessian W")?;
        let (psi, mu, gx) = self.sys.constraints.jet(&point);
        let psi_p = &mu * &w_inv;
        let psi_x = gx - &psi_p * jet.mixed.transpose();
        Ok(ConstraintJet {
            point,
            psi,
            psi_x,
            psi_p,
            mu,
        })
    }

    pub fn values(&self, q: &MomentumPoint) -> Result<Vector> {
        let point = legendre_inverse(self.sys.lagrangian(), q, &self.opts)?;
        Ok(self.sys.constraints.values(&point))
    }
}

/// Hamiltonian compatibility matrix and reaction directions.
#[derive(Debug, Clone)]
pub struct HamCompatibility {
    pub cbar: Mat,
    pub cbar_inv: Option<Mat>,
    pub condition: f64,
    pub regular: bool,
    /// Row `a` holds the fibre components of `Zbar_a = -W psi^a_p`.
    pub zbar: Mat,
}

/// Everything the constrained Hamiltonian formulas need at one point.
#[derive(Debug, Clone)]
struct HamFrame {
    structure: StructureAt,
    grad: HamGrad,
    /// Inverse of the momentum Hessian of `H`.
    w: Mat,
    cj: ConstraintJet,
    cbar: Mat,
}

fn ham_frame(hc: &HamiltonianConstraints, h: &HamiltonianData, q: &MomentumPoint) -> Result<HamFrame> {
    let structure = hc.sys.model().structure_at(&q.x)?;
    let grad = h.gradient(q)?;
    let (w, _) = regular_inverse(&h.hessian(q)?, hc.opts.cond_tol, "momentum Hessian")?;
    let cj = hc.jet(q)?;
    let cbar = -(&cj.psi_p * &w * cj.psi_p.transpose());
    Ok(HamFrame {
        structure,
        grad,
        w,
        cj,
        cbar,
    })
}

pub fn hamiltonian_compatibility(
    hc: &HamiltonianConstraints,
    h: &HamiltonianData,
    q: &MomentumPoint,
) -> Result<HamCompatibility> {
    let f = ham_frame(hc, h, q)?;
    let (inv, condition) = match inverse_with_condition(&f.cbar) {
        Some((inv, c)) => (Some(inv), c),
        None => (None, f64::INFINITY),
    };
    let regular = condition <= hc.opts.cond_tol;
    Ok(HamCompatibility {
        zbar: -(&f.cj.psi_p * &f.w),
        cbar: f.cbar,
        cbar_inv: if regular { inv } else { None },
        condition,
        regular,
    })
}

/// Output of the constrained Hamilton equations.
#[derive(Debug, Clone)]
pub struct HamDynamics {
    pub lambda: Vector,
    /// `(xdot, pdot)`.
    pub field: Vector,
    pub on_constraint: bool,
}

/// `pdot = free + lambda_a Zbar_a` with `Cbar lambda = -dpsi(free)`.
pub fn constrained_hamilton_dynamics(
    hc: &HamiltonianConstraints,
    h: &HamiltonianData,
    q: &MomentumPoint,
) -> Result<HamDynamics> {
    let f = ham_frame(hc, h, q)?;
    let on_constraint = f.cj.psi.amax() <= hc.sys.tolerances.on_constraint_tol;
    if !on_constraint {
        log::warn!("constrained Hamilton equations evaluated off the constraint set (|psi| = {:e})", f.cj.psi.amax());
    }
    let m = q.x.len();
    let n = q.p.len();
    let mut field = hamilton_field_from(&f.structure, &q.p, &f.grad);
    let rate = &f.cj.psi_x * field.rows(0, m) + &f.cj.psi_p * field.rows(m, n);
    let lambda = solve(&f.cbar, &(-rate), hc.opts.cond_tol, "Hamiltonian compatibility matrix")?;
    let zbar = -(&f.cj.psi_p * &f.w);
    let correction = zbar.transpose() * &lambda;
    let mut tail = field.rows_mut(m, n);
    tail += correction;
    Ok(HamDynamics {
        lambda,
        field,
        on_constraint,
    })
}

/// `(xdot, pdot)` of the constrained Hamilton equations for a flat state `[x, p]`.
pub fn constrained_hamilton_field(hc: &HamiltonianConstraints, h: &HamiltonianData, state: &[f64]) -> Result<Vector> {
    let q = MomentumPoint::from_coords(hc.sys.m(), state);
    Ok(constrained_hamilton_dynamics(hc, h, &q)?.field)
}

/// The nonholonomic bracket of the sections represented by the extensions `hp` and `hpp`,
/// evaluated at `q` on the constraint image. `h` is the system Hamiltonian.
pub fn nonholonomic_bracket(
    hc: &HamiltonianConstraints,
    h: &HamiltonianData,
    q: &MomentumPoint,
    hp: &HamiltonianData,
    hpp: &HamiltonianData,
) -> Result<f64> {
    let f = ham_frame(hc, h, q)?;
    let (ci, _) = regular_inverse(&f.cbar, hc.opts.cond_tol, "Hamiltonian compatibility matrix")?;
    let g1 = hp.gradient(q)?;
    let g2 = hpp.gradient(q)?;
    let s = &f.structure;
    let p = Vector::from_column_slice(&q.p);
    let r = hc.r();
    let (psi_x, psi_p) = (&f.cj.psi_x, &f.cj.psi_p);

    // free part
    let ddx = &g1.dx - &g2.dx;
    let ddp = &g1.dp - &g2.dp;
    let mut out = s.rho0.dot(&ddx);
    out += poisson_bracket_from_gradients(s, &q.p, &g1.dx, &g1.dp, &g2.dx, &g2.dp);
    out += (s.c0.transpose() * &p).dot(&ddp);

    // multiplier corrections
    let y: Vector = psi_p * &f.w * (&g1.dp - &f.grad.dp);
    let x: Vector = psi_p * &f.w * (&g2.dp - &f.grad.dp);
    let bmat = Mat::from_fn(r, r, |b, d| {
        poisson_bracket_from_gradients(
            s,
            &q.p,
            &psi_x.row(b).transpose(),
            &psi_p.row(b).transpose(),
            &psi_x.row(d).transpose(),
            &psi_p.row(d).transpose(),
        )
    });
    out += y.dot(&(&ci * &bmat * &ci * &x));
    let mixed = |b: usize, g: &HamGrad| -> f64 {
        let bx = psi_x.row(b).transpose();
        let bp = psi_p.row(b).transpose();
        s.rho0.dot(&bx) + poisson_bracket_from_gradients(s, &q.p, &bx, &bp, &g.dx, &g.dp) + (s.c0.transpose() * &p).dot(&bp)
    };
    let m2 = Vector::from_fn(r, |b, _| mixed(b, &g2));
    let m1 = Vector::from_fn(r, |b, _| mixed(b, &g1));
    out += y.dot(&(&ci * m2));
    out -= m1.dot(&(&ci * x));
    Ok(out)
}

/// Rate of change of the observable `f` along the constrained Hamilton flow, `df(field)`.
pub fn evolution_rate(hc: &HamiltonianConstraints, h: &HamiltonianData, q: &MomentumPoint, f: &HamiltonianData) -> Result<f64> {
    let field = constrained_hamilton_dynamics(hc, h, q)?.field;
    let g = f.gradient(q)?;
    Ok(stack(&g.dx, &g.dp).dot(&field))
}

/// The same rate from the bracket, `{H, H - f}_nh`.
pub fn evolution_rate_bracket(
    hc: &HamiltonianConstraints,
    h: &HamiltonianData,
    q: &MomentumPoint,
    f: &HamiltonianData,
) -> Result<f64> {
    let h_minus_f = HamiltonianData::linear_combination(&[(1.0, h), (-1.0, f)])?;
    nonholonomic_bracket(hc, h, q, h, &h_minus_f)
}
