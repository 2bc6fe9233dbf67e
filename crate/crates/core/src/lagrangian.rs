//! Free Lagrangian dynamics: derivatives of `L`, regularity, Poincaré-Cartan
//! data, the Euler-Lagrange section and the musical isomorphisms.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::algebroid::{AffgebroidModel, PhasePoint, StructureAt};
use crate::dual::Dual;
use crate::error::{check_len, Error, Result};
use crate::expr::Expr;
use crate::linalg::{inverse_with_condition, regular_inverse, Mat, Vector, COND_TOL};
use crate::prolong::{contract, outer, theta, wedge, ProlongCovector, ProlongVector};

/// Value and derivatives of a Lagrangian at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianJet {
    pub value: f64,
    /// `dL/dx^i`.
    pub dx: Vector,
    /// `dL/dy^alpha`.
    pub dy: Vector,
    /// Fibre Hessian `W_{alpha beta}`, symmetrized.
    pub w: Mat,
    /// Mixed block `d2L/dx^i dy^alpha`, m x n.
    pub mixed: Mat,
}

trait LagrangianEval: Send + Sync {
    fn jet(&self, x: &[f64], y: &[f64]) -> LagrangianJet;
    fn value(&self, x: &[f64], y: &[f64]) -> f64;
    fn describe(&self) -> String;
}

struct ExprLagrangian {
    e: Expr,
    m: usize,
}

impl LagrangianEval for ExprLagrangian {
    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut v = x.to_vec();
        v.extend_from_slice(y);
        self.e.eval(&v)
    }

    fn jet(&self, x: &[f64], y: &[f64]) -> LagrangianJet {
        let (m, n) = (self.m, y.len());
        let total = m + n;
        let mut coords: Vec<Dual<Dual<f64>>> = x
            .iter()
            .chain(y)
            .map(|&v| Dual::new(Dual::new(v, 0.0), Dual::new(0.0, 0.0)))
            .collect();
        let mut dx = Vector::zeros(m);
        let mut dy = Vector::zeros(n);
        let mut w = Mat::zeros(n, n);
        let mut mixed = Mat::zeros(m, n);
        let mut value = self.value(x, y);
        for a in 0..n {
            coords[m + a].re.eps = 1.0;
            // Outer direction j over base coordinates and fibre coordinates beta >= alpha.
            for j in (0..m).chain(m + a..total) {
                coords[j].eps.re = 1.0;
                let f = self.e.eval(&coords);
                coords[j].eps.re = 0.0;
                value = f.re.re;
                dy[a] = f.re.eps;
                if j < m {
                    dx[j] = f.eps.re;
                    mixed[(j, a)] = f.eps.eps;
                } else {
                    let b = j - m;
                    w[(a, b)] = f.eps.eps;
                    w[(b, a)] = f.eps.eps;
                }
            }
            coords[m + a].re.eps = 0.0;
        }
        LagrangianJet {
            value,
            dx,
            dy,
            w,
            mixed,
        }
    }

    fn describe(&self) -> String {
        self.e.source().to_string()
    }
}

type Callback = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;

struct FnLagrangian {
    f: Arc<Callback>,
}

impl LagrangianEval for FnLagrangian {
    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        (self.f)(x, y)
    }

    fn jet(&self, x: &[f64], y: &[f64]) -> LagrangianJet {
        let (m, n) = (x.len(), y.len());
        let mut c: Vec<f64> = x.iter().chain(y).cloned().collect();
        let eval = |c: &[f64]| (self.f)(&c[..m], &c[m..]);
        let step = |v: f64| f64::EPSILON.cbrt() * v.abs().max(1.0);
        let total = m + n;
        let mut grad = vec![0.0; total];
        for k in 0..total {
            let h = step(c[k]);
            let c0 = c[k];
            c[k] = c0 + h;
            let fp = eval(&c);
            c[k] = c0 - h;
            let fm = eval(&c);
            c[k] = c0;
            grad[k] = (fp - fm) / (2.0 * h);
        }
        let f0 = eval(&c);
        let mut second = |j: usize, k: usize| -> f64 {
            let (hj, hk) = (step(c[j]), step(c[k]));
            let (cj, ck) = (c[j], c[k]);
            if j == k {
                c[j] = cj + hj;
                let fp = eval(&c);
                c[j] = cj - hj;
                let fm = eval(&c);
                c[j] = cj;
                return (fp - 2.0 * f0 + fm) / (hj * hj);
            }
            let mut acc = 0.0;
            for (sj, sk, sign) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                c[j] = cj + sj * hj;
                c[k] = ck + sk * hk;
                acc += sign * eval(&c);
            }
            c[j] = cj;
            c[k] = ck;
            acc / (4.0 * hj * hk)
        };
        let mut w = Mat::zeros(n, n);
        let mut mixed = Mat::zeros(m, n);
        for a in 0..n {
            for b in a..n {
                let v = second(m + a, m + b);
                w[(a, b)] = v;
                w[(b, a)] = v;
            }
            for i in 0..m {
                mixed[(i, a)] = second(i, m + a);
            }
        }
        LagrangianJet {
            value: f0,
            dx: Vector::from_column_slice(&grad[..m]),
            dy: Vector::from_column_slice(&grad[m..]),
            w,
            mixed,
        }
    }

    fn describe(&self) -> String {
        "<callback>".to_string()
    }
}

/// A Lagrangian function on the affine bundle.
#[derive(Clone)]
pub struct Lagrangian {
    inner: Arc<dyn LagrangianEval>,
    m: usize,
    n: usize,
}

impl fmt::Debug for Lagrangian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Lagrangian({})", self.inner.describe())
    }
}

impl Lagrangian {
    /// Parses `src` over the base names followed by the fibre names of `model`.
    pub fn parse(model: &AffgebroidModel, src: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let mut vars = model.base_names().to_vec();
        vars.extend_from_slice(model.fiber_names());
        let e = Expr::parse(src, &vars, params)?;
        Ok(Self::from_expr(e, model.m(), model.n()))
    }

    pub fn from_expr(e: Expr, m: usize, n: usize) -> Self {
        assert_eq!(e.arity(), m + n, "Lagrangian expression arity");
        Self {
            inner: Arc::new(ExprLagrangian { e, m }),
            m,
            n,
        }
    }

    /// A callback Lagrangian differentiated by central differences.
    pub fn from_fn(m: usize, n: usize, f: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            inner: Arc::new(FnLagrangian { f: Arc::new(f) }),
            m,
            n,
        }
    }

    pub fn value(&self, p: &PhasePoint) -> f64 {
        self.inner.value(&p.x, &p.y)
    }

    pub fn jet(&self, p: &PhasePoint) -> Result<LagrangianJet> {
        check_len("Lagrangian base point", self.m, p.x.len())?;
        check_len("Lagrangian fibre point", self.n, p.y.len())?;
        let j = self.inner.jet(&p.x, &p.y);
        let finite = j.value.is_finite()
            && j.dx.iter().chain(j.dy.iter()).chain(j.w.iter()).chain(j.mixed.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::Evaluation("non-finite Lagrangian derivative".into()));
        }
        Ok(j)
    }
}

/// Outcome of the regularity test of `W`.
#[derive(Debug, Clone)]
pub struct Regularity {
    pub regular: bool,
    pub w: Mat,
    pub w_inv: Option<Mat>,
    pub condition: f64,
}

/// `W` is regular when its condition estimate does not exceed `cond_tol`.
pub fn lagrangian_regularity(l: &Lagrangian, p: &PhasePoint, cond_tol: f64) -> Result<Regularity> {
    let jet = l.jet(p)?;
    let (w_inv, condition) = match inverse_with_condition(&jet.w) {
        Some((inv, c)) => (Some(inv), c),
        None => (None, f64::INFINITY),
    };
    let regular = condition <= cond_tol;
    Ok(Regularity {
        regular,
        w: jet.w,
        w_inv: if regular { w_inv } else { None },
        condition,
    })
}

/// A model together with a Lagrangian.
#[derive(Debug, Clone)]
pub struct LagrangianSystem {
    pub model: AffgebroidModel,
    pub lagrangian: Lagrangian,
    pub cond_tol: f64,
}

/// Everything the free dynamics needs at one regular point.
#[derive(Debug, Clone)]
pub struct Frame {
    pub point: PhasePoint,
    pub structure: StructureAt,
    pub jet: LagrangianJet,
    pub w_inv: Mat,
    pub w_condition: f64,
    /// `C^gamma_{0 alpha} + C^gamma_{beta alpha} y^beta`, indexed `(gamma, alpha)`.
    pub twisted: Mat,
    /// `rho0 + rho y`.
    pub velocity: Vector,
    /// Fibre part of the Euler-Lagrange section.
    pub xi: Vector,
}

impl LagrangianSystem {
    pub fn new(model: AffgebroidModel, lagrangian: Lagrangian) -> Result<Self> {
        check_len("Lagrangian base dimension", model.m(), lagrangian.m)?;
        check_len("Lagrangian fibre dimension", model.n(), lagrangian.n)?;
        Ok(Self {
            model,
            lagrangian,
            cond_tol: COND_TOL,
        })
    }

    pub fn n(&self) -> usize {
        self.model.n()
    }

    pub fn check_point(&self, p: &PhasePoint) -> Result<()> {
        check_len("base point", self.model.m(), p.x.len())?;
        check_len("fibre point", self.model.n(), p.y.len())
    }

    /// Evaluates structure, jet and the Euler-Lagrange section at `p`.
    pub fn frame(&self, p: &PhasePoint) -> Result<Frame> {
        self.check_point(p)?;
        let structure = self.model.structure_at(&p.x)?;
        let jet = self.lagrangian.jet(p)?;
        let (w_inv, w_condition) = regular_inverse(&jet.w, self.cond_tol, "fibre Hessian W")?;
        let twisted = structure.twisted(&p.y);
        let velocity = structure.base_velocity(&p.y);
        let force = structure.rho.transpose() * &jet.dx - jet.mixed.transpose() * &velocity
            + twisted.transpose() * &jet.dy;
        let xi = &w_inv * force;
        Ok(Frame {
            point: p.clone(),
            structure,
            jet,
            w_inv,
            w_condition,
            twisted,
            velocity,
            xi,
        })
    }

    /// Fibre acceleration of `R_L` and the full vector field `(rho0 + rho y, xi)`.
    pub fn euler_lagrange_section(&self, p: &PhasePoint) -> Result<(Vector, Vector)> {
        let f = self.frame(p)?;
        let field = stack(&f.velocity, &f.xi);
        Ok((f.xi, field))
    }

    /// Residuals of the Euler-Lagrange equations with `d/dt` expanded by the chain rule.
    pub fn euler_lagrange_residual(
        &self,
        samples: &[(f64, PhasePoint)],
        ydot: &[Vec<f64>],
    ) -> Result<Vec<Vector>> {
        check_len("Euler-Lagrange samples", samples.len(), ydot.len())?;
        samples
            .iter()
            .zip(ydot)
            .map(|((_, p), yd)| {
                self.check_point(p)?;
                check_len("ydot", self.n(), yd.len())?;
                let s = self.model.structure_at(&p.x)?;
                let j = self.lagrangian.jet(p)?;
                let vel = s.base_velocity(&p.y);
                let ddt = j.mixed.transpose() * vel + &j.w * Vector::from_column_slice(yd);
                Ok(ddt - s.rho.transpose() * &j.dx - s.twisted(&p.y).transpose() * &j.dy)
            })
            .collect()
    }

    /// `Theta_L`, `Omega_L` (auxiliary SODE `xi0 = 0`) and `phi_0` at `p`.
    pub fn poincare_cartan(&self, p: &PhasePoint) -> Result<(ProlongCovector, Mat, ProlongCovector)> {
        let zero = vec![0.0; self.n()];
        self.poincare_cartan_with_sode(p, &zero)
    }

    /// Same as [`Self::poincare_cartan`] assembled with an arbitrary auxiliary SODE fibre part `xi0`.
    pub fn poincare_cartan_with_sode(
        &self,
        p: &PhasePoint,
        xi0: &[f64],
    ) -> Result<(ProlongCovector, Mat, ProlongCovector)> {
        self.check_point(p)?;
        check_len("auxiliary SODE", self.n(), xi0.len())?;
        let s = self.model.structure_at(&p.x)?;
        let j = self.lagrangian.jet(p)?;
        let omega = omega_matrix(&s, &j, &p.y, xi0);
        let n = self.n();
        let ydl: f64 = p.y.iter().zip(j.dy.iter()).map(|(a, b)| a * b).sum();
        let theta_l = ProlongCovector::new(j.value - ydl, j.dy.iter().cloned().collect(), vec![0.0; n]);
        Ok((theta_l, omega, ProlongCovector::phi0(n)))
    }

    /// Bilinear-form matrix of `flat_L = i_X Omega_L + phi_0(X) phi_0`.
    pub fn flat_matrix(&self, p: &PhasePoint) -> Result<Mat> {
        let (_, omega, _) = self.poincare_cartan(p)?;
        Ok(flat_from_omega(&omega))
    }

    /// `sharp(alpha) = -flat^{-1}(alpha) + alpha(R_L) R_L`.
    pub fn sharp_lambda(&self, p: &PhasePoint, alpha: &ProlongCovector) -> Result<ProlongVector> {
        let f = self.frame(p)?;
        let ops = f.operators(self.cond_tol)?;
        Ok(ProlongVector::from_vector(&ops.sharp(&alpha.to_vector())))
    }
}

pub(crate) fn stack(a: &Vector, b: &Vector) -> Vector {
    let mut out = Vector::zeros(a.len() + b.len());
    out.rows_mut(0, a.len()).copy_from(a);
    out.rows_mut(a.len(), b.len()).copy_from(b);
    out
}

fn flat_from_omega(omega: &Mat) -> Mat {
    let mut b = omega.clone();
    b[(0, 0)] += 1.0;
    b
}

fn omega_matrix(s: &StructureAt, j: &LagrangianJet, y: &[f64], xi0: &[f64]) -> Mat {
    let n = y.len();
    let dim = 2 * n + 1;
    let twisted = s.twisted(y);
    let vel = s.base_velocity(y);
    let xi0v = Vector::from_column_slice(xi0);
    let e = j.mixed.transpose() * &vel + &j.w * &xi0v
        - twisted.transpose() * &j.dy
        - s.rho.transpose() * &j.dx;
    let mut phi0 = Vector::zeros(dim);
    phi0[0] = 1.0;
    let thetas: Vec<Vector> = (0..n).map(|a| theta(y, a)).collect();
    let psis: Vec<Vector> = (0..n)
        .map(|a| {
            let mut v = Vector::zeros(dim);
            v[1 + n + a] = 1.0;
            v[0] = -xi0[a];
            v
        })
        .collect();
    let mut omega = Mat::zeros(dim, dim);
    for a in 0..n {
        omega += wedge(&thetas[a], &phi0) * e[a];
        for b in 0..n {
            if j.w[(a, b)] != 0.0 {
                omega += wedge(&thetas[a], &psis[b]) * j.w[(a, b)];
            }
            let mut aab = 0.0;
            for i in 0..s.rho.nrows() {
                aab += s.rho[(i, b)] * j.mixed[(i, a)] - s.rho[(i, a)] * j.mixed[(i, b)];
            }
            for g in 0..n {
                aab += j.dy[g] * s.c.get(g, a, b);
            }
            if aab != 0.0 {
                omega += outer(&thetas[a], &thetas[b]) * aab;
            }
        }
    }
    omega
}

/// Musical isomorphisms and `R_L` at one point.
#[derive(Debug, Clone)]
pub struct FreeOperators {
    pub omega: Mat,
    pub flat: Mat,
    /// Inverse of `flat^T`, so that `flat^{-1}(alpha) = flat_inv * alpha`.
    pub flat_inv: Mat,
    pub flat_condition: f64,
    pub r_l: Vector,
}

impl FreeOperators {
    pub fn flat_inverse(&self, alpha: &Vector) -> Vector {
        &self.flat_inv * alpha
    }

    pub fn sharp(&self, alpha: &Vector) -> Vector {
        -self.flat_inverse(alpha) + &self.r_l * alpha.dot(&self.r_l)
    }

    /// `X^Lambda_f = -sharp(df)`.
    pub fn hamiltonian_vector(&self, df: &Vector) -> Vector {
        -self.sharp(df)
    }

    /// `grad f = flat^{-1}(df)`.
    pub fn gradient(&self, df: &Vector) -> Vector {
        self.flat_inverse(df)
    }

    /// `i_X Omega_L`.
    pub fn contract(&self, x: &Vector) -> Vector {
        contract(&self.omega, x)
    }
}

impl Frame {
    pub fn n(&self) -> usize {
        self.point.y.len()
    }

    /// `R_L = T_0 + y^a T_a + xi^a V_a` flattened.
    pub fn r_l(&self) -> Vector {
        let n = self.n();
        let mut r = Vector::zeros(2 * n + 1);
        r[0] = 1.0;
        for a in 0..n {
            r[1 + a] = self.point.y[a];
            r[1 + n + a] = self.xi[a];
        }
        r
    }

    pub fn omega(&self) -> Mat {
        omega_matrix(&self.structure, &self.jet, &self.point.y, &vec![0.0; self.n()])
    }

    pub fn operators(&self, cond_tol: f64) -> Result<FreeOperators> {
        let omega = self.omega();
        let flat = flat_from_omega(&omega);
        let (flat_inv, flat_condition) = regular_inverse(&flat.transpose(), cond_tol, "flat_L")?;
        Ok(FreeOperators {
            omega,
            flat,
            flat_inv,
            flat_condition,
            r_l: self.r_l(),
        })
    }

    /// Differential of a function on the affine bundle from its coordinate gradients.
    pub fn differential(&self, fx: &Vector, fy: &Vector) -> Vector {
        let n = self.n();
        let mut d = Vector::zeros(2 * n + 1);
        d[0] = self.structure.rho0.dot(fx);
        let a = self.structure.rho.transpose() * fx;
        d.rows_mut(1, n).copy_from(&a);
        d.rows_mut(1 + n, n).copy_from(fy);
        d
    }

    /// Legendre momentum `dL/dy`.
    pub fn momentum(&self) -> &Vector {
        &self.jet.dy
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ScalarField;

    fn oscillator() -> LagrangianSystem {
        let model = AffgebroidModel::builder(&["x"], &["v"])
            .rho(0, 0, ScalarField::constant(1, 1.0))
            .build()
            .unwrap();
        let l = Lagrangian::parse(&model, "0.5*v^2 - 0.5*x^2", &BTreeMap::new()).unwrap();
        LagrangianSystem::new(model, l).unwrap()
    }

    #[test]
    fn oscillator_section_and_residual() {
        let sys = oscillator();
        let p = PhasePoint::new(vec![0.8], vec![0.3]);
        let (xi, field) = sys.euler_lagrange_section(&p).unwrap();
        assert!((xi[0] + 0.8).abs() < 1e-15);
        assert_eq!(field.as_slice(), &[0.3, xi[0]]);
        let s = vec![(0.0, PhasePoint::new(vec![1.0], vec![0.0]))];
        let r = sys.euler_lagrange_residual(&s, &[vec![-1.0]]).unwrap();
        assert!(r[0][0].abs() < 1e-15);
        let r = sys.euler_lagrange_residual(&s, &[vec![0.0]]).unwrap();
        assert!((r[0][0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn free_quadratic_has_no_acceleration() {
        let model = AffgebroidModel::builder(&["q1", "q2"], &["v1", "v2"])
            .rho(0, 0, ScalarField::constant(2, 1.0))
            .rho(1, 1, ScalarField::constant(2, 1.0))
            .build()
            .unwrap();
        let l = Lagrangian::parse(&model, "0.5*(v1^2+v2^2)", &BTreeMap::new()).unwrap();
        let sys = LagrangianSystem::new(model, l).unwrap();
        let (xi, _) = sys.euler_lagrange_section(&PhasePoint::new(vec![1.0, 2.0], vec![3.0, -4.0])).unwrap();
        assert_eq!(xi.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn regularity_cases() {
        let model = AffgebroidModel::builder(&["x"], &["a", "b"]).build().unwrap();
        let p = PhasePoint::new(vec![0.0], vec![0.4, 0.2]);
        let zero = Lagrangian::parse(&model, "0", &BTreeMap::new()).unwrap();
        let r = lagrangian_regularity(&zero, &p, COND_TOL).unwrap();
        assert!(!r.regular && r.w_inv.is_none());
        let rank1 = Lagrangian::parse(&model, "0.5*a^2", &BTreeMap::new()).unwrap();
        assert!(!lagrangian_regularity(&rank1, &p, COND_TOL).unwrap().regular);
        let good = Lagrangian::parse(&model, "0.5*a^2 + 2*b^2", &BTreeMap::new()).unwrap();
        let r = lagrangian_regularity(&good, &p, COND_TOL).unwrap();
        assert!(r.regular);
        let inv = r.w_inv.unwrap();
        assert!((inv[(0, 0)] - 1.0).abs() < 1e-15 && (inv[(1, 1)] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn callback_jet_agrees_with_dual_jet() {
        let model = AffgebroidModel::builder(&["x"], &["a", "b"]).build().unwrap();
        let src = "exp(0.3*x)*a^2 + sin(x)*a*b + 0.25*b^4";
        let l1 = Lagrangian::parse(&model, src, &BTreeMap::new()).unwrap();
        let l2 = Lagrangian::from_fn(1, 2, |x, y| {
            (0.3 * x[0]).exp() * y[0] * y[0] + x[0].sin() * y[0] * y[1] + 0.25 * y[1].powi(4)
        });
        let p = PhasePoint::new(vec![0.7], vec![1.1, -0.6]);
        let (a, b) = (l1.jet(&p).unwrap(), l2.jet(&p).unwrap());
        assert!((a.dx - b.dx).amax() < 1e-8);
        assert!((a.dy - b.dy).amax() < 1e-8);
        assert!((&a.w - &b.w).amax() < 1e-5);
        assert!((&a.mixed - &b.mixed).amax() < 1e-5);
        // hand derivatives of the mixed block
        let e = (0.3f64 * 0.7).exp();
        assert!((a.mixed[(0, 0)] - (0.6 * e * 1.1 + 0.7f64.cos() * -0.6)).abs() < 1e-13);
        assert!((a.w[(1, 1)] - 3.0 * 0.36).abs() < 1e-13);
    }

    #[test]
    fn omega_defining_identities_oscillator() {
        let sys = oscillator();
        let p = PhasePoint::new(vec![0.3], vec![-1.4]);
        let f = sys.frame(&p).unwrap();
        let ops = f.operators(COND_TOL).unwrap();
        assert!(ops.contract(&ops.r_l).amax() < 1e-14);
        let (theta_l, omega, _) = sys.poincare_cartan(&p).unwrap();
        assert!((omega.clone() + omega.transpose()).amax() == 0.0);
        // Theta_L = (L - y L_y) phi_0 + L_y T^1
        let l = 0.5 * 1.96 - 0.5 * 0.09;
        assert!((theta_l.a0 - (l - 1.96)).abs() < 1e-14);
        assert_eq!(theta_l.a, vec![-1.4]);
    }
}
